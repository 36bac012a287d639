//! Per-mode decision triad and efficacy.
//!
//! For one mode every packet is reduced to a point `(mu, sigma)`: the mean and
//! sample standard deviation of its frames projected onto the mode. Each
//! functional/nonfunctional pair of points yields a selection power; the
//! median over pairs is the mode's selection power `S`, the agreement of the
//! pair verdicts its consensus `C`, and the class separation of the points its
//! cluster quality `Q_d = -Q_i`. Efficacy rewards modes pushed away from the
//! reference score `S_o`, signed by the cluster quality and shaped by the bias.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Result, SplocError};
use crate::packets::DataPacket;

/// Logistic steepness of the consensus power.
pub const CONSENSUS_STEEPNESS: f64 = 20.0;
/// Agreement fraction at which the consensus power is one half.
pub const CONSENSUS_MIDPOINT: f64 = 0.75;
/// Fixed reverse-bias level of the predisposed (-2/+2) perspectives.
pub const REVERSE_BIAS_LEVEL: f64 = 1.0;
/// Scale applied to the disfavored rectifier by the weak and adaptive biases.
pub const WEAK_BIAS_SCALE: f64 = 0.1;
/// Floor for the within-class spread used to standardize the MFSP axes.
pub const SPREAD_FLOOR: f64 = 1e-12;

const UNIT_TOLERANCE: f64 = 1e-10;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    /// Upper selection threshold for indifference.
    pub s_i: f64,
    /// Lower selection threshold for discrimination.
    pub s_d: f64,
    /// Consensus floor for a confirmed d- or i-mode.
    pub c_min: f64,
    /// Cluster-quality floor for a confirmed d- or i-mode.
    pub q_min: f64,
}

impl Default for Thresholds {
    fn default() -> Self {
        Thresholds {
            s_i: 1.3,
            s_d: 2.0,
            c_min: 0.5,
            q_min: 0.0,
        }
    }
}

impl Thresholds {
    /// Reference score, the geometric mean of the two selection thresholds.
    pub fn s_o(&self) -> f64 {
        (self.s_i * self.s_d).sqrt()
    }

    pub fn validate(&self) -> Result<()> {
        let ok = 1.0 < self.s_i
            && self.s_i < self.s_d
            && (0.0..=1.0).contains(&self.c_min)
            && self.q_min.is_finite();
        if ok {
            Ok(())
        } else {
            Err(SplocError::invalid(format!("invalid thresholds {self:?}")))
        }
    }
}

/// Location and spread of one packet projected onto one mode.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModeTraits {
    pub mean: f64,
    pub std: f64,
}

/// Mean and sample standard deviation of `packet` projected onto the unit
/// vector `mode`.
pub fn mode_traits(packet: &DataPacket, mode: &DVector<f64>) -> Result<ModeTraits> {
    if mode.len() != packet.dim() {
        return Err(SplocError::DimensionMismatch {
            context: "mode_traits".into(),
            expected: packet.dim(),
            found: mode.len(),
        });
    }
    if (mode.norm() - 1.0).abs() > UNIT_TOLERANCE {
        return Err(SplocError::invalid(format!(
            "mode_traits: mode vector has norm {}",
            mode.norm()
        )));
    }
    let proj = packet.frames() * mode;
    let m = proj.len() as f64;
    let mean = proj.sum() / m;
    let ss: f64 = proj.iter().map(|v| (v - mean).powi(2)).sum();
    let std = (ss / (m - 1.0)).sqrt();
    if std <= 0.0 {
        return Err(SplocError::Degenerate(format!(
            "packet {} has zero spread along the mode",
            packet.id()
        )));
    }
    Ok(ModeTraits { mean, std })
}

fn check_spread(sa: f64, sb: f64) -> Result<()> {
    if sa > 0.0 && sb > 0.0 && sa.is_finite() && sb.is_finite() {
        Ok(())
    } else {
        Err(SplocError::Degenerate(format!(
            "standard deviations must be positive, got {sa} and {sb}"
        )))
    }
}

/// Signal-to-noise ratio `|mu_a - mu_b| / sqrt(sigma_a^2 + sigma_b^2)`.
pub fn snr(mu_a: f64, sigma_a: f64, mu_b: f64, sigma_b: f64) -> Result<f64> {
    check_spread(sigma_a, sigma_b)?;
    Ok((mu_a - mu_b).abs() / sigma_a.hypot(sigma_b))
}

/// Signal beyond noise.
pub fn sbr(snr: f64) -> f64 {
    (snr - 1.0).max(0.0)
}

/// Excess ratio of standard deviations.
pub fn rex(sigma_a: f64, sigma_b: f64) -> Result<f64> {
    check_spread(sigma_a, sigma_b)?;
    Ok((sigma_a / sigma_b).max(sigma_b / sigma_a) - 1.0)
}

/// Selection power of one functional/nonfunctional pair.
pub fn pair_selection_power(a: ModeTraits, b: ModeTraits, th: &Thresholds) -> Result<f64> {
    check_spread(a.std, b.std)?;
    Ok(selection_unchecked(a, b, th.s_i, th.s_d, th.s_o()))
}

#[inline]
fn selection_unchecked(a: ModeTraits, b: ModeTraits, s_i: f64, s_d: f64, s_o: f64) -> f64 {
    let snr = (a.mean - b.mean).abs() / a.std.hypot(b.std);
    let rex = (a.std / b.std).max(b.std / a.std) - 1.0;
    let lower = snr.hypot(rex) + 1.0;
    if lower < s_i {
        return lower;
    }
    let upper = sbr(snr).hypot(rex) + 1.0;
    if upper > s_d {
        upper
    } else {
        s_o
    }
}

/// Median of the pair scores.
pub fn aggregate_selection(pair_scores: &[f64]) -> Result<f64> {
    if pair_scores.is_empty() {
        return Err(SplocError::invalid("aggregate_selection: no pair scores"));
    }
    let mut buf = pair_scores.to_vec();
    Ok(median_in_place(&mut buf))
}

fn median_in_place(v: &mut [f64]) -> f64 {
    let n = v.len();
    let cmp = |a: &f64, b: &f64| a.partial_cmp(b).unwrap_or(Ordering::Equal);
    let (lo, mid, _) = v.select_nth_unstable_by(n / 2, cmp);
    let upper = *mid;
    if n % 2 == 1 {
        upper
    } else {
        let lower = lo.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        0.5 * (lower + upper)
    }
}

/// Logistic map of an agreement fraction onto `[0, 1]`.
pub fn consensus_logistic(fraction: f64) -> f64 {
    1.0 / (1.0 + (-CONSENSUS_STEEPNESS * (fraction - CONSENSUS_MIDPOINT)).exp())
}

/// Consensus power: how strongly the pairs agree on a verdict. Pairs scoring
/// at or above `S_o` vote "different", the rest vote "alike".
pub fn consensus_power(pair_scores: &[f64], th: &Thresholds) -> Result<f64> {
    if pair_scores.is_empty() {
        return Err(SplocError::invalid("consensus_power: no pair scores"));
    }
    Ok(consensus_from_scores(pair_scores, th.s_o()))
}

fn consensus_from_scores(scores: &[f64], s_o: f64) -> f64 {
    let d = scores.iter().filter(|&&s| s >= s_o).count() as f64;
    let f_d = d / scores.len() as f64;
    consensus_logistic(f_d.max(1.0 - f_d))
}

/// Signed separation of the two classes in the MFSP. Returns `(Q_d, Q_i)`
/// with `Q_i = -Q_d`.
///
/// Each axis is standardized by the pooled within-class spread along it
/// (floored at [`SPREAD_FLOOR`]). With `d` the distance between the class
/// centroids in standardized units, `Q_d = (d^2 - 1) / (d^2 + 1)`: `-1` for
/// coincident classes, `0` at a separation of one spread, `+1` in the limit.
pub fn cluster_quality(functional: &[ModeTraits], nonfunctional: &[ModeTraits]) -> Result<(f64, f64)> {
    if functional.is_empty() || nonfunctional.is_empty() {
        return Err(SplocError::invalid("cluster_quality: a class has no packets"));
    }
    let q = separation_quality(functional, nonfunctional);
    Ok((q, -q))
}

fn separation_quality(a: &[ModeTraits], b: &[ModeTraits]) -> f64 {
    let centroid = |pts: &[ModeTraits]| {
        let n = pts.len() as f64;
        let (sm, ss) = pts.iter().fold((0.0, 0.0), |acc, t| (acc.0 + t.mean, acc.1 + t.std));
        (sm / n, ss / n)
    };
    let (ma, sa) = centroid(a);
    let (mb, sb) = centroid(b);
    let scatter = |pts: &[ModeTraits], cm: f64, cs: f64| {
        pts.iter().fold((0.0, 0.0), |acc, t| {
            (acc.0 + (t.mean - cm).powi(2), acc.1 + (t.std - cs).powi(2))
        })
    };
    let (am, as_) = scatter(a, ma, sa);
    let (bm, bs) = scatter(b, mb, sb);
    let dof = (a.len() + b.len()).saturating_sub(2);
    let (spread_mu, spread_sigma) = if dof == 0 {
        (0.0, 0.0)
    } else {
        (((am + bm) / dof as f64).sqrt(), ((as_ + bs) / dof as f64).sqrt())
    };
    let zm = (ma - mb) / spread_mu.max(SPREAD_FLOOR);
    let zs = (sa - sb) / spread_sigma.max(SPREAD_FLOOR);
    let d2 = zm * zm + zs * zs;
    if d2.is_infinite() {
        1.0
    } else {
        (d2 - 1.0) / (d2 + 1.0)
    }
}

// ---------------------------------------------------------------------------
// Bias and efficacy

/// Perspective under which the rectifiers are evaluated.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum BiasMode {
    /// Predisposed toward i-modes: confirmed d-modes are penalized.
    Neg2,
    /// Adaptive toward i-modes: `r_d` is scaled by `scale`, which relaxes from
    /// 1/10 to 1 as i-modes are found.
    Neg1 { scale: f64 },
    /// Weak bias toward i-modes: `r_d` scaled by 1/10.
    ZeroMinus,
    Zero,
    /// Weak bias toward d-modes: `r_i` scaled by 1/10.
    ZeroPlus,
    /// Adaptive toward d-modes.
    Pos1 { scale: f64 },
    /// Predisposed toward d-modes: confirmed i-modes are penalized.
    Pos2,
}

impl BiasMode {
    pub const LABELS: [&'static str; 7] = ["-2", "-1", "0-", "0", "0+", "+1", "+2"];

    pub fn all() -> [BiasMode; 7] {
        [
            BiasMode::Neg2,
            BiasMode::Neg1 {
                scale: WEAK_BIAS_SCALE,
            },
            BiasMode::ZeroMinus,
            BiasMode::Zero,
            BiasMode::ZeroPlus,
            BiasMode::Pos1 {
                scale: WEAK_BIAS_SCALE,
            },
            BiasMode::Pos2,
        ]
    }

    pub fn label(&self) -> &'static str {
        match self {
            BiasMode::Neg2 => "-2",
            BiasMode::Neg1 { .. } => "-1",
            BiasMode::ZeroMinus => "0-",
            BiasMode::Zero => "0",
            BiasMode::ZeroPlus => "0+",
            BiasMode::Pos1 { .. } => "+1",
            BiasMode::Pos2 => "+2",
        }
    }

    /// Multipliers applied to `(r_d, r_i)`.
    fn scales(&self) -> (f64, f64) {
        match *self {
            BiasMode::Neg2 => (0.0, 1.0),
            BiasMode::Neg1 { scale } => (scale, 1.0),
            BiasMode::ZeroMinus => (WEAK_BIAS_SCALE, 1.0),
            BiasMode::Zero => (1.0, 1.0),
            BiasMode::ZeroPlus => (1.0, WEAK_BIAS_SCALE),
            BiasMode::Pos1 { scale } => (1.0, scale),
            BiasMode::Pos2 => (1.0, 0.0),
        }
    }

    /// Advance the adaptive biases: with `n_target = p / 4`, the scale becomes
    /// `min(1, 1/10 + 9/10 * n_found / n_target)` where `n_found` counts the
    /// favored mode type. Other modes are unchanged.
    pub fn relax(&mut self, n_d: usize, n_i: usize, p: usize) {
        let target = (p as f64 / 4.0).max(f64::MIN_POSITIVE);
        let schedule = |found: usize| (WEAK_BIAS_SCALE + 0.9 * found as f64 / target).min(1.0);
        match self {
            BiasMode::Neg1 { scale } => *scale = schedule(n_i),
            BiasMode::Pos1 { scale } => *scale = schedule(n_d),
            _ => {}
        }
    }
}

impl fmt::Display for BiasMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for BiasMode {
    type Err = SplocError;

    fn from_str(s: &str) -> Result<Self> {
        BiasMode::all()
            .into_iter()
            .find(|b| b.label() == s)
            .ok_or_else(|| SplocError::Parse {
                what: "bias",
                text: s.to_string(),
                reason: format!("expected one of {{{}}}", BiasMode::LABELS.join(",")),
            })
    }
}

impl Serialize for BiasMode {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.label())
    }
}

impl<'de> Deserialize<'de> for BiasMode {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Discriminant,
    Indifferent,
}

/// Rectifying adaptive nonlinear unit: `r_d(x) = max(0, x)` and
/// `r_i(x) = max(0, -x)`, scaled by the bias. Under `-2` (`+2`) the
/// discriminant (indifferent) rectifier is zero.
pub fn ranu(x: f64, side: Side, bias: &BiasMode) -> f64 {
    let (sd, si) = bias.scales();
    match side {
        Side::Discriminant => sd * x.max(0.0),
        Side::Indifferent => si * (-x).max(0.0),
    }
}

/// Efficacy of one mode from its selection power and cluster qualities.
///
/// With `x = ln(S / S_o)`, `E = Q_d r_d(x)` for `S >= S_o` and `Q_i r_i(x)`
/// otherwise. Under `-2` a confirmed d-mode (`Q_d > Q_min`) contributes
/// `-|x|` instead; `+2` treats confirmed i-modes the same way.
pub fn mode_efficacy(s: f64, q_d: f64, q_i: f64, bias: &BiasMode, th: &Thresholds) -> Result<f64> {
    if !(s > 0.0 && s.is_finite()) {
        return Err(SplocError::invalid(format!("mode_efficacy: selection power {s}")));
    }
    Ok(efficacy_unchecked(s, q_d, q_i, bias, th))
}

#[inline]
fn efficacy_unchecked(s: f64, q_d: f64, q_i: f64, bias: &BiasMode, th: &Thresholds) -> f64 {
    let s_o = th.s_o();
    let q_min = th.q_min;
    let x = (s / s_o).ln();
    if s >= s_o {
        match bias {
            BiasMode::Neg2 if q_d > q_min => -REVERSE_BIAS_LEVEL * x.abs(),
            _ => q_d * ranu(x, Side::Discriminant, bias),
        }
    } else {
        match bias {
            BiasMode::Pos2 if q_i > q_min => -REVERSE_BIAS_LEVEL * x.abs(),
            _ => q_i * ranu(x, Side::Indifferent, bias),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ModeClass {
    D,
    U,
    I,
}

impl ModeClass {
    pub fn as_str(self) -> &'static str {
        match self {
            ModeClass::D => "D",
            ModeClass::U => "U",
            ModeClass::I => "I",
        }
    }
}

impl fmt::Display for ModeClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModeClass {
    type Err = SplocError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "D" => Ok(ModeClass::D),
            "U" => Ok(ModeClass::U),
            "I" => Ok(ModeClass::I),
            _ => Err(SplocError::Parse {
                what: "mode class",
                text: s.into(),
                reason: "expected D, U or I".into(),
            }),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModeScore {
    pub mode: usize,
    pub s: f64,
    pub c: f64,
    pub q_d: f64,
    pub q_i: f64,
    pub e: f64,
    pub class: ModeClass,
}

/// Decision triad.
pub fn classify_mode(score: &ModeScore, th: &Thresholds) -> ModeClass {
    if score.s > th.s_d && score.c >= th.c_min && score.q_d > th.q_min {
        ModeClass::D
    } else if score.s < th.s_i && score.c >= th.c_min && score.q_i > th.q_min {
        ModeClass::I
    } else {
        ModeClass::U
    }
}

/// Reusable evaluator for the hot path: scores a mode from the traits of
/// every functional and nonfunctional packet without allocating.
#[derive(Clone, Debug)]
pub struct ModeScorer {
    th: Thresholds,
    s_o: f64,
    pairs: Vec<f64>,
}

impl ModeScorer {
    pub fn new(th: Thresholds) -> Self {
        ModeScorer {
            s_o: th.s_o(),
            th,
            pairs: Vec::new(),
        }
    }

    pub fn thresholds(&self) -> &Thresholds {
        &self.th
    }

    fn fill_pairs(&mut self, f: &[ModeTraits], n: &[ModeTraits]) {
        self.pairs.clear();
        for a in f {
            for b in n {
                self.pairs
                    .push(selection_unchecked(*a, *b, self.th.s_i, self.th.s_d, self.s_o));
            }
        }
    }

    /// Efficacy only.
    pub fn efficacy(&mut self, f: &[ModeTraits], n: &[ModeTraits], bias: &BiasMode) -> f64 {
        self.fill_pairs(f, n);
        let s = median_in_place(&mut self.pairs);
        let q = separation_quality(f, n);
        efficacy_unchecked(s, q, -q, bias, &self.th)
    }

    /// Full score. Callers guarantee positive spreads and non-empty classes.
    pub fn score(&mut self, mode: usize, f: &[ModeTraits], n: &[ModeTraits], bias: &BiasMode) -> ModeScore {
        self.fill_pairs(f, n);
        let c = consensus_from_scores(&self.pairs, self.s_o);
        let s = median_in_place(&mut self.pairs);
        let q = separation_quality(f, n);
        let e = efficacy_unchecked(s, q, -q, bias, &self.th);
        let mut score = ModeScore {
            mode,
            s,
            c,
            q_d: q,
            q_i: -q,
            e,
            class: ModeClass::U,
        };
        score.class = classify_mode(&score, &self.th);
        score
    }
}

/// Score of every mode of a basis.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrum {
    pub modes: Vec<ModeScore>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ModeCounts {
    pub d: usize,
    pub u: usize,
    pub i: usize,
}

impl ModeCounts {
    pub fn total(&self) -> usize {
        self.d + self.u + self.i
    }
}

impl Spectrum {
    pub fn len(&self) -> usize {
        self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    /// Net efficacy, the sum of the per-mode efficacies.
    pub fn net_efficacy(&self) -> f64 {
        self.modes.iter().map(|m| m.e).sum()
    }

    pub fn counts(&self) -> ModeCounts {
        let mut c = ModeCounts::default();
        for m in &self.modes {
            match m.class {
                ModeClass::D => c.d += 1,
                ModeClass::U => c.u += 1,
                ModeClass::I => c.i += 1,
            }
        }
        c
    }

    /// Indices of the modes of one class, in basis order.
    pub fn indices(&self, class: ModeClass) -> Vec<usize> {
        self.modes
            .iter()
            .filter(|m| m.class == class)
            .map(|m| m.mode)
            .collect()
    }

    /// Rows ordered by class block (D, U, I), then by descending efficacy.
    pub fn report_order(&self) -> Vec<ModeScore> {
        let mut rows = self.modes.clone();
        rows.sort_by(|a, b| {
            a.class
                .cmp(&b.class)
                .then(b.e.partial_cmp(&a.e).unwrap_or(Ordering::Equal))
                .then(a.mode.cmp(&b.mode))
        });
        rows
    }

    /// CSV with header `mode,S,C,Qd,Qi,E,class`; modes are 1-based.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("mode,S,C,Qd,Qi,E,class\n");
        for m in self.report_order() {
            out.push_str(&format!(
                "{},{},{},{},{},{},{}\n",
                m.mode + 1,
                m.s,
                m.c,
                m.q_d,
                m.q_i,
                m.e,
                m.class
            ));
        }
        out
    }

    pub fn from_csv(text: &str) -> Result<Spectrum> {
        let bad = |line: &str, why: &str| SplocError::Parse {
            what: "spectrum row",
            text: line.to_string(),
            reason: why.to_string(),
        };
        let mut lines = text.lines();
        match lines.next() {
            Some(h) if h.trim() == "mode,S,C,Qd,Qi,E,class" => {}
            other => return Err(bad(other.unwrap_or(""), "missing spectrum header")),
        }
        let mut modes = Vec::new();
        for line in lines.filter(|l| !l.trim().is_empty()) {
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            if f.len() != 7 {
                return Err(bad(line, "expected 7 fields"));
            }
            let num = |k: usize| f[k].parse::<f64>().map_err(|_| bad(line, "bad number"));
            let mode: usize = f[0].parse().map_err(|_| bad(line, "bad mode index"))?;
            if mode == 0 {
                return Err(bad(line, "mode indices are 1-based"));
            }
            modes.push(ModeScore {
                mode: mode - 1,
                s: num(1)?,
                c: num(2)?,
                q_d: num(3)?,
                q_i: num(4)?,
                e: num(5)?,
                class: f[6].parse()?,
            });
        }
        modes.sort_by_key(|m| m.mode);
        if modes.iter().enumerate().any(|(k, m)| m.mode != k) {
            return Err(SplocError::invalid("spectrum: mode indices are not 1..=p"));
        }
        Ok(Spectrum { modes })
    }
}

/// Score every column of `basis` against the two packet classes by projecting
/// the raw frames.
pub fn basis_spectrum(
    basis: &DMatrix<f64>,
    functional: &[DataPacket],
    nonfunctional: &[DataPacket],
    bias: &BiasMode,
    th: &Thresholds,
) -> Result<Spectrum> {
    if functional.is_empty() || nonfunctional.is_empty() {
        return Err(SplocError::invalid("basis_spectrum: both classes need packets"));
    }
    let p = basis.nrows();
    if basis.ncols() != p {
        return Err(SplocError::invalid("basis_spectrum: basis must be square"));
    }
    let mut scorer = ModeScorer::new(*th);
    let mut modes = Vec::with_capacity(p);
    for j in 0..p {
        let v: DVector<f64> = basis.column(j).into_owned();
        let tf = functional
            .iter()
            .map(|pk| mode_traits(pk, &v))
            .collect::<Result<Vec<_>>>()?;
        let tn = nonfunctional
            .iter()
            .map(|pk| mode_traits(pk, &v))
            .collect::<Result<Vec<_>>>()?;
        modes.push(scorer.score(j, &tf, &tn, bias));
    }
    Ok(Spectrum { modes })
}
