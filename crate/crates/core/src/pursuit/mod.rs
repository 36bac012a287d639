//! Basis optimization.
//!
//! Starting from a PCA basis, each outer iteration
//!
//! 1. relaxes the adaptive biases and mixes the undetermined modes with a
//!    small random Cayley rotation,
//! 2. draws a first mode `j1`, favoring modes whose selection power sits near
//!    `S_o`,
//! 3. for every other mode `j2` admitted by the pair gate, searches the plane
//!    rotation angle that maximizes `E(j1) + E(j2)` and applies it when it
//!    strictly improves the pair,
//! 4. rescores the basis and checks convergence of the net efficacy.

mod basis;
mod moments;

use std::f64::consts::FRAC_PI_4;
use std::time::{Duration, Instant};

use log::{debug, warn};
use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Result, SplocError};
use crate::packets::{validate_training_set, DataPacket, Label};
use crate::rng::{rng_from_seed, SplocRng};
use crate::scoring::{BiasMode, ModeClass, ModeCounts, Spectrum, Thresholds};

pub use basis::{cayley_transform, Basis, ORTHONORMAL_TOLERANCE};
pub use moments::PacketMoments;
use moments::ProjectedState;

/// Largest entry of the pair gating matrix.
pub const PAIR_GATE_MAX: f64 = 0.9;
/// Minimum gain for a rotation to be accepted.
pub const ACCEPT_MARGIN: f64 = 1e-12;
/// Jitter added to a rank-deficient pooled covariance.
pub const PCA_JITTER: f64 = 1e-12;

const GOLDEN_ITERATIONS: usize = 20;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    /// Number of trial angles over `[-pi/4, pi/4]`; odd so that 0 is included.
    pub angle_steps: usize,
    pub max_sweeps: usize,
    /// Relative net-efficacy change regarded as stalled.
    pub tolerance: f64,
    /// Consecutive stalled sweeps that end the run.
    pub patience: usize,
    pub seed: u64,
    pub bias: BiasMode,
    pub thresholds: Thresholds,
    /// Entry range of the antisymmetric generator of the Cayley shuffle.
    pub cayley_magnitude: f64,
    /// Accepted rotations between Gram-Schmidt passes.
    pub reorthonormalize_every: usize,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            angle_steps: 31,
            max_sweeps: 200,
            tolerance: 1e-6,
            patience: 3,
            seed: 0,
            bias: BiasMode::Zero,
            thresholds: Thresholds::default(),
            cayley_magnitude: 0.05,
            reorthonormalize_every: 50,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.angle_steps < 3 || self.angle_steps.is_multiple_of(2) {
            return Err(SplocError::invalid(format!(
                "angle_steps must be odd and >= 3, got {}",
                self.angle_steps
            )));
        }
        if self.tolerance.is_nan() || self.tolerance <= 0.0 {
            return Err(SplocError::invalid("tolerance must be positive"));
        }
        if self.patience == 0 || self.reorthonormalize_every == 0 {
            return Err(SplocError::invalid("patience and reorthonormalize_every must be >= 1"));
        }
        if !(self.cayley_magnitude >= 0.0 && self.cayley_magnitude.is_finite()) {
            return Err(SplocError::invalid("cayley_magnitude must be finite and >= 0"));
        }
        self.thresholds.validate()
    }

    /// The trial angles, symmetric about 0.
    pub fn angle_grid(&self) -> Vec<f64> {
        let n = self.angle_steps;
        let step = 2.0 * FRAC_PI_4 / (n - 1) as f64;
        (0..n)
            .map(|k| {
                if 2 * k + 1 == n {
                    0.0
                } else {
                    -FRAC_PI_4 + k as f64 * step
                }
            })
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRecord {
    pub sweep: usize,
    pub net_efficacy: f64,
    pub counts: ModeCounts,
    pub accepted: usize,
}

#[derive(Clone, Debug)]
pub struct SplocResult {
    pub basis: Basis,
    pub spectrum: Spectrum,
    /// Sweep 0 is the starting basis.
    pub history: Vec<SweepRecord>,
    pub config: OptimizerConfig,
    /// Bias state at the end of the run (differs from `config.bias` only for
    /// the adaptive biases).
    pub final_bias: BiasMode,
    pub converged: bool,
    pub elapsed: Duration,
}

impl SplocResult {
    pub fn counts(&self) -> ModeCounts {
        self.spectrum.counts()
    }

    pub fn net_efficacy(&self) -> f64 {
        self.spectrum.net_efficacy()
    }

    pub fn sweeps(&self) -> usize {
        self.history.last().map_or(0, |h| h.sweep)
    }

    /// Columns of the basis belonging to one class, in mode order.
    pub fn subspace_matrix(&self, class: ModeClass) -> DMatrix<f64> {
        let idx = self.spectrum.indices(class);
        let u = self.basis.matrix();
        DMatrix::from_fn(u.nrows(), idx.len(), |r, k| u[(r, idx[k])])
    }
}

// ---------------------------------------------------------------------------
// Initial basis

/// Eigenvectors of the pooled covariance in order of decreasing eigenvalue.
/// Each vector's largest-magnitude component is made positive.
pub fn pca_initial_basis(packets: &[DataPacket]) -> Result<Basis> {
    let moments: Vec<PacketMoments> = packets.iter().map(PacketMoments::from_packet).collect();
    pca_from_moments(&moments)
}

pub(crate) fn pca_from_moments(moments: &[PacketMoments]) -> Result<Basis> {
    let first = moments
        .first()
        .ok_or_else(|| SplocError::invalid("pca_initial_basis: no packets"))?;
    let p = first.dim();
    let total: usize = moments.iter().map(|m| m.n_frames).sum();
    if total <= p {
        return Err(SplocError::invalid(format!(
            "pca_initial_basis: {total} pooled frames do not exceed dimension {p}"
        )));
    }
    let mut mean = nalgebra::DVector::zeros(p);
    for m in moments {
        if m.dim() != p {
            return Err(SplocError::DimensionMismatch {
                context: format!("packet {}", m.id),
                expected: p,
                found: m.dim(),
            });
        }
        mean += &m.mean * m.n_frames as f64;
    }
    mean /= total as f64;
    // Total scatter = within-packet scatter + between-packet scatter.
    let mut scatter = DMatrix::zeros(p, p);
    for m in moments {
        scatter += &m.cov * (m.n_frames as f64 - 1.0);
        let d = &m.mean - &mean;
        scatter += &d * d.transpose() * m.n_frames as f64;
    }
    let mut cov = scatter / (total as f64 - 1.0);
    // Symmetrize against accumulated rounding.
    cov = (&cov + cov.transpose()) * 0.5;

    let mut eig = SymmetricEigen::new(cov.clone());
    let min_eig = eig.eigenvalues.min();
    if min_eig < PCA_JITTER {
        warn!("pooled covariance is rank deficient (min eigenvalue {min_eig:e}); adding jitter");
        for i in 0..p {
            cov[(i, i)] += PCA_JITTER;
        }
        eig = SymmetricEigen::new(cov);
    }
    let mut order: Vec<usize> = (0..p).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let mut u = DMatrix::zeros(p, p);
    for (k, &src) in order.iter().enumerate() {
        let mut v = eig.eigenvectors.column(src).into_owned();
        let lead = v.iter().copied().fold(0.0f64, |best, x| if x.abs() > best.abs() { x } else { best });
        if lead < 0.0 {
            v.neg_mut();
        }
        u.set_column(k, &v);
    }
    let mut basis = Basis::from_columns_unchecked(u);
    // Nearly degenerate eigenvalues can leave eigenvectors slightly off.
    if basis.orthonormality_error() >= ORTHONORMAL_TOLERANCE / 10.0 {
        basis.reorthonormalize();
    }
    Ok(basis)
}

// ---------------------------------------------------------------------------
// Sampling helpers

/// Gate probabilities for rotating mode pairs. Entry `(j1, j2)` is
/// proportional to `w(j1) w(j2)` with `w = 2` for u-modes and 1 otherwise,
/// scaled so the largest entry is [`PAIR_GATE_MAX`]; the diagonal is zero.
pub fn pair_probability_matrix(spectrum: &Spectrum) -> DMatrix<f64> {
    let p = spectrum.len();
    let w: Vec<f64> = spectrum
        .modes
        .iter()
        .map(|m| if m.class == ModeClass::U { 2.0 } else { 1.0 })
        .collect();
    let mut m = DMatrix::from_fn(p, p, |a, b| if a == b { 0.0 } else { w[a] * w[b] });
    let max = m.max();
    if max > 0.0 {
        m *= PAIR_GATE_MAX / max;
    }
    m
}

/// First-mode sampling weights `exp(-|ln(S/S_o)|)`, normalized to sum 1.
pub fn importance_weights(spectrum: &Spectrum, th: &Thresholds) -> Vec<f64> {
    let s_o = th.s_o();
    let raw: Vec<f64> = spectrum
        .modes
        .iter()
        .map(|m| (-(m.s / s_o).ln().abs()).exp())
        .collect();
    let total: f64 = raw.iter().sum();
    raw.into_iter().map(|w| w / total).collect()
}

fn sample_index(weights: &[f64], rng: &mut SplocRng) -> usize {
    let r: f64 = rng.random();
    let mut acc = 0.0;
    for (k, w) in weights.iter().enumerate() {
        acc += w;
        if r < acc {
            return k;
        }
    }
    weights.len() - 1
}

// ---------------------------------------------------------------------------
// Optimizer

/// One optimizer instance: a basis, the projected packet statistics for it,
/// and its current spectrum.
pub struct Optimizer {
    moments: Vec<PacketMoments>,
    basis: Basis,
    state: ProjectedState,
    spectrum: Spectrum,
    bias: BiasMode,
    config: OptimizerConfig,
    grid: Vec<f64>,
    accepted_since_gs: usize,
}

impl Optimizer {
    pub fn new(packets: &[DataPacket], config: &OptimizerConfig, start: Option<Basis>) -> Result<Self> {
        config.validate()?;
        let p = validate_training_set(packets)?;
        let moments: Vec<PacketMoments> = packets.iter().map(PacketMoments::from_packet).collect();
        let basis = match start {
            Some(b) if b.dim() != p => {
                return Err(SplocError::DimensionMismatch {
                    context: "starting basis".into(),
                    expected: p,
                    found: b.dim(),
                })
            }
            Some(b) => b,
            None => pca_from_moments(&moments)?,
        };
        let mut state = ProjectedState::new(&moments, &basis, config.thresholds);
        let bias = config.bias;
        let spectrum = state.spectrum(&bias)?;
        Ok(Optimizer {
            moments,
            basis,
            state,
            spectrum,
            bias,
            grid: config.angle_grid(),
            config: config.clone(),
            accepted_since_gs: 0,
        })
    }

    pub fn basis(&self) -> &Basis {
        &self.basis
    }

    pub fn spectrum(&self) -> &Spectrum {
        &self.spectrum
    }

    pub fn bias(&self) -> BiasMode {
        self.bias
    }

    pub fn net_efficacy(&self) -> f64 {
        self.spectrum.net_efficacy()
    }

    /// Update the adaptive bias from the current counts and rescore.
    pub fn relax_bias(&mut self) -> Result<()> {
        if matches!(self.bias, BiasMode::Neg1 { .. } | BiasMode::Pos1 { .. }) {
            let c = self.spectrum.counts();
            self.bias.relax(c.d, c.i, self.basis.dim());
            self.spectrum = self.state.spectrum(&self.bias)?;
        }
        Ok(())
    }

    /// `E(j1) + E(j2)` after a virtual rotation of the `(j1, j2)` plane.
    pub fn two_mode_efficacy(&mut self, j1: usize, j2: usize, angle: f64) -> Result<f64> {
        if j1 == j2 {
            return Err(SplocError::invalid("two_mode_efficacy: j1 == j2"));
        }
        self.state.plane_efficacy(j1, j2, angle, &self.bias)
    }

    /// Best angle for the `(j1, j2)` plane and its two-mode efficacy: grid
    /// search followed by golden-section refinement around the best point.
    fn best_angle(&mut self, j1: usize, j2: usize) -> Result<(f64, f64)> {
        let mut best = (0.0, f64::NEG_INFINITY);
        for k in 0..self.grid.len() {
            let a = self.grid[k];
            let e = self.two_mode_efficacy(j1, j2, a)?;
            if e > best.1 {
                best = (a, e);
            }
        }
        let step = self.grid[1] - self.grid[0];
        let (mut lo, mut hi) = (best.0 - step, best.0 + step);
        let g = (5f64.sqrt() - 1.0) / 2.0;
        let mut x1 = hi - g * (hi - lo);
        let mut x2 = lo + g * (hi - lo);
        let mut f1 = self.two_mode_efficacy(j1, j2, x1)?;
        let mut f2 = self.two_mode_efficacy(j1, j2, x2)?;
        for _ in 0..GOLDEN_ITERATIONS {
            if f1 >= f2 {
                hi = x2;
                x2 = x1;
                f2 = f1;
                x1 = hi - g * (hi - lo);
                f1 = self.two_mode_efficacy(j1, j2, x1)?;
            } else {
                lo = x1;
                x1 = x2;
                f1 = f2;
                x2 = lo + g * (hi - lo);
                f2 = self.two_mode_efficacy(j1, j2, x2)?;
            }
        }
        for (a, e) in [(x1, f1), (x2, f2)] {
            if e > best.1 {
                best = (a, e);
            }
        }
        Ok(best)
    }

    fn apply_rotation(&mut self, j1: usize, j2: usize, angle: f64) {
        self.basis.rotate_plane(j1, j2, angle);
        self.state.rotate(j1, j2, angle);
        self.accepted_since_gs += 1;
        if self.accepted_since_gs >= self.config.reorthonormalize_every {
            self.basis.reorthonormalize();
            self.state.rebuild(&self.moments, &self.basis);
            self.accepted_since_gs = 0;
        }
    }

    /// Mix the u-modes with a random Cayley rotation `(I - A)(I + A)^{-1}`,
    /// `A` antisymmetric with entries uniform in `[-magnitude, magnitude]`.
    /// Returns the number of mixed modes (0 when fewer than two u-modes).
    pub fn cayley_shuffle(&mut self, rng: &mut SplocRng) -> Result<usize> {
        let umodes = self.spectrum.indices(ModeClass::U);
        let mixed = cayley_shuffle_umodes(&mut self.basis, &self.spectrum, rng, self.config.cayley_magnitude);
        if mixed > 0 {
            debug_assert_eq!(mixed, umodes.len());
            self.state.rebuild(&self.moments, &self.basis);
            self.spectrum = self.state.spectrum(&self.bias)?;
        }
        Ok(mixed)
    }

    /// One Jacobi sweep. Returns the number of accepted rotations.
    pub fn sweep(&mut self, rng: &mut SplocRng) -> Result<usize> {
        let p = self.basis.dim();
        let weights = importance_weights(&self.spectrum, &self.config.thresholds);
        let gate = pair_probability_matrix(&self.spectrum);
        let j1 = sample_index(&weights, rng);
        let mut accepted = 0;
        for j2 in (0..p).filter(|&j| j != j1) {
            let r: f64 = rng.random();
            if r >= gate[(j1, j2)] {
                continue;
            }
            let current = self.two_mode_efficacy(j1, j2, 0.0)?;
            let (angle, best) = self.best_angle(j1, j2)?;
            if best > current + ACCEPT_MARGIN {
                self.apply_rotation(j1, j2, angle);
                accepted += 1;
            }
        }
        self.spectrum = self.state.spectrum(&self.bias)?;
        Ok(accepted)
    }

    /// Rescore from the raw packet statistics after a Gram-Schmidt pass.
    fn finalize(&mut self) -> Result<()> {
        self.basis.reorthonormalize();
        self.state.rebuild(&self.moments, &self.basis);
        self.spectrum = self.state.spectrum(&self.bias)?;
        Ok(())
    }
}

/// Apply a random Cayley rotation to the u-mode block of `basis`. D- and
/// i-mode columns are left untouched. Returns the number of mixed columns.
pub fn cayley_shuffle_umodes(
    basis: &mut Basis,
    spectrum: &Spectrum,
    rng: &mut SplocRng,
    magnitude: f64,
) -> usize {
    let umodes = spectrum.indices(ModeClass::U);
    let k = umodes.len();
    if k < 2 {
        return 0;
    }
    let mut a = DMatrix::zeros(k, k);
    for r in 0..k {
        for c in r + 1..k {
            let v = magnitude * (2.0 * rng.random::<f64>() - 1.0);
            a[(r, c)] = v;
            a[(c, r)] = -v;
        }
    }
    if magnitude == 0.0 {
        return 0;
    }
    let q = cayley_transform(&a);
    basis.mix_columns(&umodes, &q);
    k
}

/// Virtual plane rotation on a stand-alone basis: `E(j1) + E(j2)` after
/// rotating `(j1, j2)` by `angle`. The basis itself is not modified.
pub fn two_mode_efficacy(
    basis: &Basis,
    j1: usize,
    j2: usize,
    angle: f64,
    packets: &[DataPacket],
    bias: &BiasMode,
    th: &Thresholds,
) -> Result<f64> {
    validate_training_set(packets)?;
    if j1 == j2 || j1 >= basis.dim() || j2 >= basis.dim() {
        return Err(SplocError::invalid("two_mode_efficacy: bad mode pair"));
    }
    let moments: Vec<PacketMoments> = packets.iter().map(PacketMoments::from_packet).collect();
    let mut state = ProjectedState::new(&moments, basis, *th);
    state.plane_efficacy(j1, j2, angle, bias)
}

/// Run one Jacobi sweep from `basis`. Returns the updated basis and its net
/// efficacy.
pub fn jacobi_sweep(
    basis: Basis,
    packets: &[DataPacket],
    config: &OptimizerConfig,
    rng: &mut SplocRng,
) -> Result<(Basis, f64)> {
    let mut opt = Optimizer::new(packets, config, Some(basis))?;
    opt.sweep(rng)?;
    let e = opt.net_efficacy();
    Ok((opt.basis, e))
}

/// Optimize a complete basis for the labeled packets.
pub fn run_sploc(packets: &[DataPacket], config: &OptimizerConfig, start: Option<Basis>) -> Result<SplocResult> {
    let clock = Instant::now();
    let mut opt = Optimizer::new(packets, config, start)?;
    let mut rng = rng_from_seed(config.seed);
    let mut history = vec![SweepRecord {
        sweep: 0,
        net_efficacy: opt.net_efficacy(),
        counts: opt.spectrum.counts(),
        accepted: 0,
    }];
    let mut stalled = 0;
    let mut converged = false;
    for sweep in 1..=config.max_sweeps {
        let current = opt.net_efficacy();
        opt.relax_bias()?;
        opt.cayley_shuffle(&mut rng)?;
        let accepted = opt.sweep(&mut rng)?;
        let new = opt.net_efficacy();
        history.push(SweepRecord {
            sweep,
            net_efficacy: new,
            counts: opt.spectrum.counts(),
            accepted,
        });
        let rel = (new - current).abs() / current.abs().max(f64::MIN_POSITIVE);
        if rel < config.tolerance || new == current {
            stalled += 1;
        } else {
            stalled = 0;
        }
        debug!("sweep {sweep}: E={new:.6} accepted={accepted} counts={:?}", opt.spectrum.counts());
        if stalled >= config.patience {
            converged = true;
            break;
        }
    }
    if !converged {
        warn!("no convergence after {} sweeps", config.max_sweeps);
    }
    opt.finalize()?;
    if let Some(last) = history.last_mut() {
        last.net_efficacy = opt.net_efficacy();
        last.counts = opt.spectrum.counts();
    }
    Ok(SplocResult {
        final_bias: opt.bias,
        basis: opt.basis,
        spectrum: opt.spectrum,
        history,
        config: config.clone(),
        converged,
        elapsed: clock.elapsed(),
    })
}

/// Split packets by label.
pub fn partition_by_label(packets: &[DataPacket]) -> (Vec<DataPacket>, Vec<DataPacket>) {
    packets.iter().cloned().partition(|p| p.label() == Label::Functional)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scoring::ModeScore;

    fn spectrum_of(classes: &[ModeClass], s: &[f64]) -> Spectrum {
        Spectrum {
            modes: classes
                .iter()
                .zip(s)
                .enumerate()
                .map(|(mode, (&class, &s))| ModeScore {
                    mode,
                    s,
                    c: 1.0,
                    q_d: 0.0,
                    q_i: 0.0,
                    e: 0.0,
                    class,
                })
                .collect(),
        }
    }

    #[test]
    fn angle_grid_contains_zero() {
        let cfg = OptimizerConfig::default();
        let g = cfg.angle_grid();
        assert_eq!(g.len(), 31);
        assert_eq!(g[15], 0.0);
        assert!((g[0] + FRAC_PI_4).abs() < 1e-15);
        assert!((g[30] - FRAC_PI_4).abs() < 1e-15);
        let bad = OptimizerConfig {
            angle_steps: 30,
            ..cfg
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn pair_gate_examples() {
        let u = ModeClass::U;
        let m = pair_probability_matrix(&spectrum_of(&[u, u, u], &[1.0; 3]));
        for a in 0..3 {
            assert_eq!(m[(a, a)], 0.0);
            for b in 0..3 {
                if a != b {
                    assert!((m[(a, b)] - PAIR_GATE_MAX).abs() < 1e-15);
                }
            }
        }
        let m = pair_probability_matrix(&spectrum_of(&[ModeClass::D, u, u], &[1.0; 3]));
        assert!((m[(0, 1)] - PAIR_GATE_MAX / 2.0).abs() < 1e-15);
        assert!((m[(1, 2)] - PAIR_GATE_MAX).abs() < 1e-15);
        assert_eq!(m, m.transpose());
    }

    #[test]
    fn importance_weight_examples() {
        let th = Thresholds::default();
        let s_o = th.s_o();
        let w = importance_weights(&spectrum_of(&[ModeClass::U; 5], &[s_o; 5]), &th);
        assert!(w.iter().all(|x| (x - 0.2).abs() < 1e-15));

        let p = 6;
        let mut s = vec![2.0 * s_o; p];
        s[2] = s_o;
        let w = importance_weights(&spectrum_of(&vec![ModeClass::U; p], &s), &th);
        let expected = 1.0 / (1.0 + (p as f64 - 1.0) / 2.0);
        assert!((w[2] - expected).abs() < 1e-12);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cayley_shuffle_touches_only_umodes() {
        let classes = [ModeClass::D, ModeClass::U, ModeClass::I, ModeClass::U, ModeClass::U];
        let spec = spectrum_of(&classes, &[1.0; 5]);
        let mut basis = Basis::identity(5);
        basis.rotate_plane(0, 1, 0.3);
        let before = basis.clone();
        let mut rng = rng_from_seed(5);
        assert_eq!(cayley_shuffle_umodes(&mut basis, &spec, &mut rng, 0.05), 3);
        for j in [0, 2] {
            assert_eq!(basis.mode(j), before.mode(j));
        }
        assert_ne!(basis.mode(1), before.mode(1));
        assert!(basis.orthonormality_error() < 1e-10);

        let mut same = before.clone();
        assert_eq!(cayley_shuffle_umodes(&mut same, &spec, &mut rng, 0.0), 0);
        assert_eq!(same, before);

        let few = spectrum_of(&[ModeClass::D, ModeClass::U, ModeClass::I, ModeClass::I, ModeClass::D], &[1.0; 5]);
        let mut b = before.clone();
        assert_eq!(cayley_shuffle_umodes(&mut b, &few, &mut rng, 0.05), 0);
        assert_eq!(b, before);
    }
}
