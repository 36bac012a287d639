//! Synthetic two-dimensional molecules.
//!
//! A molecule has `N_a` atoms split into three spatial domains. Every atom is
//! tethered to its reference position; a domain with a geometrical signature
//! additionally couples a small set of atoms with stiff vector springs whose
//! rest displacements trace out the signature shape. The energy is quadratic,
//! so the dynamics is a multivariate Ornstein-Uhlenbeck process, integrated
//! here with an Euler-Maruyama step:
//!
//! ```text
//! x <- x - h * grad U(x) + noise * sqrt(h) * xi,    xi ~ N(0, I)
//! ```
//!
//! For a free coordinate with tether stiffness `k` the stationary variance of
//! this update is `noise^2 / (k * (2 - h k))`.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Result, SplocError};
use crate::packets::{split_stream, DataPacket, Label};
use crate::rng::{derive_seed, rng_from_seed};

/// Integrator time step.
pub const TIME_STEP: f64 = 0.005;
/// Integrator steps between recorded frames.
pub const STEPS_PER_FRAME: usize = 300;
/// Steps discarded before the first frame.
pub const BURN_IN_STEPS: usize = 3000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Domain1 {
    E,
    F,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Domain2 {
    F,
    L,
    S,
    T,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Domain3 {
    F,
    L,
    T,
}

/// Three-letter molecule name, one geometrical signature per domain.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct MoleculeCode {
    pub domain1: Domain1,
    pub domain2: Domain2,
    pub domain3: Domain3,
}

impl MoleculeCode {
    pub fn new(domain1: Domain1, domain2: Domain2, domain3: Domain3) -> Self {
        MoleculeCode {
            domain1,
            domain2,
            domain3,
        }
    }

    /// Functional molecules carry E in domain 1 and L in domain 3.
    pub fn is_functional(&self) -> bool {
        self.domain1 == Domain1::E && self.domain3 == Domain3::L
    }

    /// Shell-style pattern match where `*` (or a lowercase letter) matches any
    /// signature, e.g. `"E*L"`, `"FbF"`, `"abF"`.
    pub fn matches(&self, pattern: &str) -> bool {
        let text = self.to_string();
        let pat: Vec<char> = pattern.chars().collect();
        pat.len() == 3
            && text
                .chars()
                .zip(pat)
                .all(|(c, p)| p == '*' || p.is_ascii_lowercase() || c == p)
    }
}

impl fmt::Display for MoleculeCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}{:?}{:?}", self.domain1, self.domain2, self.domain3)
    }
}

impl FromStr for MoleculeCode {
    type Err = SplocError;

    fn from_str(text: &str) -> Result<Self> {
        parse_code(text)
    }
}

fn code_error(text: &str, reason: String) -> SplocError {
    SplocError::Parse {
        what: "molecule code",
        text: text.to_string(),
        reason,
    }
}

pub fn parse_code(text: &str) -> Result<MoleculeCode> {
    let chars: Vec<char> = text.chars().collect();
    if chars.len() != 3 {
        return Err(code_error(text, "expected three letters".into()));
    }
    let d1 = match chars[0] {
        'E' => Domain1::E,
        'F' => Domain1::F,
        c => return Err(code_error(text, format!("domain 1 accepts E or F, got {c:?}"))),
    };
    let d2 = match chars[1] {
        'F' => Domain2::F,
        'L' => Domain2::L,
        'S' => Domain2::S,
        'T' => Domain2::T,
        c => {
            return Err(code_error(
                text,
                format!("domain 2 accepts F, L, S or T, got {c:?}"),
            ))
        }
    };
    let d3 = match chars[2] {
        'F' => Domain3::F,
        'L' => Domain3::L,
        'T' => Domain3::T,
        c => return Err(code_error(text, format!("domain 3 accepts F, L or T, got {c:?}"))),
    };
    Ok(MoleculeCode::new(d1, d2, d3))
}

/// All 24 codes in lexicographic order.
pub fn enumerate_codes() -> Vec<MoleculeCode> {
    let mut out = Vec::with_capacity(24);
    for d1 in [Domain1::E, Domain1::F] {
        for d2 in [Domain2::F, Domain2::L, Domain2::S, Domain2::T] {
            for d3 in [Domain3::F, Domain3::L, Domain3::T] {
                out.push(MoleculeCode::new(d1, d2, d3));
            }
        }
    }
    out
}

/// Reference layout of a molecule. Atom indices are 0-based internally and
/// 1-based in every report.
#[derive(Clone, Debug, PartialEq)]
pub struct MoleculeGeometry {
    pub positions: Vec<[f64; 2]>,
    /// Domain (1, 2 or 3) of each atom.
    pub domain_of: Vec<u8>,
    /// Signature atoms of domain 1 (the E signature).
    pub domain1_signature: Vec<usize>,
    /// Signature atoms of domain 2. L and T use the first three, S all four.
    pub domain2_signature: Vec<usize>,
    /// Signature atoms of domain 3 (L and T).
    pub domain3_signature: Vec<usize>,
}

// Domain membership of the 29-atom molecule, 1-based.
const DOMAIN1_29: [usize; 10] = [1, 5, 8, 11, 14, 17, 19, 23, 27, 29];
const DOMAIN2_29: [usize; 9] = [3, 6, 9, 12, 15, 16, 18, 21, 24];
const DOMAIN3_29: [usize; 10] = [2, 4, 7, 10, 13, 20, 22, 25, 26, 28];
const SIG1_29: [usize; 3] = [5, 19, 29];
const SIG2_29: [usize; 4] = [9, 12, 15, 18];
const SIG3_29: [usize; 3] = [2, 22, 26];

impl MoleculeGeometry {
    pub fn atoms(&self) -> usize {
        self.positions.len()
    }

    /// Atoms of domain `d`, 0-based.
    pub fn domain_atoms(&self, d: u8) -> Vec<usize> {
        (0..self.atoms()).filter(|&a| self.domain_of[a] == d).collect()
    }

    /// Every atom that can carry a signature in domains 1 and 3, 1-based.
    /// For 29 atoms this is {2, 5, 19, 22, 26, 29}.
    pub fn discriminating_atoms_one_based(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self
            .domain1_signature
            .iter()
            .chain(&self.domain3_signature)
            .map(|a| a + 1)
            .collect();
        v.sort_unstable();
        v
    }
}

/// Deterministic planar layout. Domains occupy three side-by-side regions of
/// the plane; within a region atoms sit on a slightly perturbed lattice, with
/// each signature set placed on neighbouring lattice sites.
pub fn reference_geometry(atoms: usize) -> Result<MoleculeGeometry> {
    if atoms < 9 {
        return Err(SplocError::invalid(format!(
            "reference_geometry: need at least 9 atoms, got {atoms}"
        )));
    }
    let mut domain_of = vec![0u8; atoms];
    let (sig1, sig2, sig3): (Vec<usize>, Vec<usize>, Vec<usize>);
    if atoms == 29 {
        for (d, set) in [(1u8, &DOMAIN1_29[..]), (2, &DOMAIN2_29[..]), (3, &DOMAIN3_29[..])] {
            for &a in set {
                domain_of[a - 1] = d;
            }
        }
        sig1 = SIG1_29.iter().map(|a| a - 1).collect();
        sig2 = SIG2_29.iter().map(|a| a - 1).collect();
        sig3 = SIG3_29.iter().map(|a| a - 1).collect();
    } else {
        for (a, d) in domain_of.iter_mut().enumerate() {
            *d = (a % 3) as u8 + 1;
        }
        let first = |d: u8, n: usize| -> Vec<usize> {
            (0..atoms).filter(|&a| domain_of[a] == d).take(n).collect()
        };
        sig1 = first(1, 3);
        sig2 = first(2, 4);
        sig3 = first(3, 3);
    }

    let mut positions = vec![[0.0; 2]; atoms];
    for d in 1..=3u8 {
        // Signature atoms first so they occupy adjacent lattice sites.
        let sig: &[usize] = match d {
            1 => &sig1,
            2 => &sig2,
            _ => &sig3,
        };
        let mut order: Vec<usize> = sig.to_vec();
        order.extend((0..atoms).filter(|&a| domain_of[a] == d && !sig.contains(&a)));
        let x0 = f64::from(d - 1) * 3.5;
        for (k, &a) in order.iter().enumerate() {
            let (col, row) = ((k % 3) as f64, (k / 3) as f64);
            let jx = lattice_jitter(a, 0);
            let jy = lattice_jitter(a, 1);
            positions[a] = [x0 + col + jx, row + jy];
        }
    }
    Ok(MoleculeGeometry {
        positions,
        domain_of,
        domain1_signature: sig1,
        domain2_signature: sig2,
        domain3_signature: sig3,
    })
}

fn lattice_jitter(atom: usize, axis: u64) -> f64 {
    let h = crate::rng::splitmix64((atom as u64) << 1 | axis);
    // Uniform in [-0.15, 0.15).
    ((h >> 11) as f64 / (1u64 << 53) as f64 - 0.5) * 0.3
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorConfig {
    pub atoms: usize,
    pub frames: usize,
    pub noise: f64,
    pub k_ref: f64,
    pub k_sig: f64,
    pub seed: u64,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            atoms: 29,
            frames: 2000,
            noise: 0.1,
            k_ref: 1.0,
            k_sig: 50.0,
            seed: 0,
        }
    }
}

impl GeneratorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.k_ref > 0.0 && self.k_sig > self.k_ref) {
            return Err(SplocError::invalid(format!(
                "generator: need k_sig > k_ref > 0, got k_ref={}, k_sig={}",
                self.k_ref, self.k_sig
            )));
        }
        if !(self.noise > 0.0 && self.noise.is_finite()) {
            return Err(SplocError::invalid("generator: noise must be positive"));
        }
        if self.frames < 2 {
            return Err(SplocError::invalid("generator: need at least 2 frames"));
        }
        if self.atoms < 9 {
            return Err(SplocError::invalid("generator: need at least 9 atoms"));
        }
        // Stiffest mode: tether plus the largest signature group (4 atoms).
        let stiffest = self.k_ref + 4.0 * self.k_sig;
        if TIME_STEP * stiffest >= 2.0 {
            return Err(SplocError::invalid(format!(
                "generator: k_sig={} too stiff for the fixed time step",
                self.k_sig
            )));
        }
        Ok(())
    }

    /// Stationary variance of a free coordinate under the discrete update.
    pub fn free_variance(&self) -> f64 {
        self.noise * self.noise / (self.k_ref * (2.0 - TIME_STEP * self.k_ref))
    }
}

/// A vector spring pulling `x_i - x_j` towards `rest`.
#[derive(Clone, Copy, Debug)]
struct Coupling {
    i: usize,
    j: usize,
    rest: [f64; 2],
}

fn shape_offsets(shape: char, n: usize) -> Vec<[f64; 2]> {
    match (shape, n) {
        // Extended: collinear, widely spaced.
        ('E', 3) => vec![[-1.5, 0.0], [0.0, 0.0], [1.5, 0.0]],
        // Linear: collinear, unit spacing.
        ('L', 3) => vec![[-1.0, 0.0], [0.0, 0.0], [1.0, 0.0]],
        // Equilateral triangle of unit side, centroid at the origin.
        ('T', 3) => {
            let h = 3f64.sqrt() / 2.0;
            vec![[-0.5, -h / 3.0], [0.5, -h / 3.0], [0.0, 2.0 * h / 3.0]]
        }
        // Unit square.
        ('S', 4) => vec![[-0.5, -0.5], [0.5, -0.5], [0.5, 0.5], [-0.5, 0.5]],
        _ => unreachable!("no shape {shape} on {n} atoms"),
    }
}

fn couplings_for(atoms: &[usize], shape: char) -> Vec<Coupling> {
    let offsets = shape_offsets(shape, atoms.len());
    let mut out = Vec::new();
    for a in 0..atoms.len() {
        for b in a + 1..atoms.len() {
            out.push(Coupling {
                i: atoms[a],
                j: atoms[b],
                rest: [offsets[a][0] - offsets[b][0], offsets[a][1] - offsets[b][1]],
            });
        }
    }
    out
}

fn signature_couplings(code: MoleculeCode, geom: &MoleculeGeometry) -> Result<Vec<Coupling>> {
    let mut out = Vec::new();
    if code.domain1 == Domain1::E {
        out.extend(couplings_for(&geom.domain1_signature, 'E'));
    }
    let sig2 = &geom.domain2_signature;
    match code.domain2 {
        Domain2::F => {}
        Domain2::L | Domain2::T if sig2.len() >= 3 => {
            let shape = if code.domain2 == Domain2::L { 'L' } else { 'T' };
            out.extend(couplings_for(&sig2[..3], shape));
        }
        Domain2::S if sig2.len() >= 4 => out.extend(couplings_for(&sig2[..4], 'S')),
        _ => {
            return Err(SplocError::invalid(format!(
                "molecule {code}: domain 2 has too few atoms for its signature"
            )))
        }
    }
    match code.domain3 {
        Domain3::F => {}
        Domain3::L => out.extend(couplings_for(&geom.domain3_signature, 'L')),
        Domain3::T => out.extend(couplings_for(&geom.domain3_signature, 'T')),
    }
    Ok(out)
}

/// Simulate one molecule. Frames are `[x_1..x_Na, y_1..y_Na]`, labeled by
/// [`MoleculeCode::is_functional`].
pub fn simulate(code: MoleculeCode, config: &GeneratorConfig) -> Result<DataPacket> {
    config.validate()?;
    let geom = reference_geometry(config.atoms)?;
    let couplings = signature_couplings(code, &geom)?;
    let na = config.atoms;
    let h = TIME_STEP;
    let kick = config.noise * h.sqrt();
    let mut rng = rng_from_seed(config.seed);

    let mut pos: Vec<[f64; 2]> = geom.positions.clone();
    let mut force = vec![[0.0f64; 2]; na];
    let mut frames = DMatrix::zeros(config.frames, 2 * na);

    let mut step = |pos: &mut Vec<[f64; 2]>, rng: &mut crate::rng::SplocRng| {
        for (a, f) in force.iter_mut().enumerate() {
            f[0] = -config.k_ref * (pos[a][0] - geom.positions[a][0]);
            f[1] = -config.k_ref * (pos[a][1] - geom.positions[a][1]);
        }
        for c in &couplings {
            for ax in 0..2 {
                let stretch = pos[c.i][ax] - pos[c.j][ax] - c.rest[ax];
                force[c.i][ax] -= config.k_sig * stretch;
                force[c.j][ax] += config.k_sig * stretch;
            }
        }
        for (p, f) in pos.iter_mut().zip(&force) {
            for ax in 0..2 {
                let xi: f64 = StandardNormal.sample(rng);
                p[ax] += h * f[ax] + kick * xi;
            }
        }
    };

    for _ in 0..BURN_IN_STEPS {
        step(&mut pos, &mut rng);
    }
    for t in 0..config.frames {
        for _ in 0..STEPS_PER_FRAME {
            step(&mut pos, &mut rng);
        }
        for a in 0..na {
            frames[(t, a)] = pos[a][0];
            frames[(t, na + a)] = pos[a][1];
        }
    }
    let label = if code.is_functional() {
        Label::Functional
    } else {
        Label::Nonfunctional
    };
    DataPacket::new(
        code.to_string(),
        label,
        frames,
        format!("synthgen:{code}:seed={}", config.seed),
    )
}

/// Seed used for molecule `code` when a set is generated from `seed`.
pub fn molecule_seed(seed: u64, code: MoleculeCode) -> u64 {
    derive_seed(seed, &code.to_string())
}

/// Simulate every code with its derived seed and split each trajectory into
/// `streams` packets.
pub fn generate_set(
    codes: &[MoleculeCode],
    config: &GeneratorConfig,
    streams: usize,
) -> Result<Vec<DataPacket>> {
    let mut out = Vec::with_capacity(codes.len() * streams);
    for &code in codes {
        let cfg = GeneratorConfig {
            seed: molecule_seed(config.seed, code),
            ..config.clone()
        };
        let packet = simulate(code, &cfg)?;
        out.extend(split_stream(&packet, streams)?);
    }
    Ok(out)
}

/// Molecule code of a packet id such as `"EFL.2"`.
pub fn code_of_packet_id(id: &str) -> Option<MoleculeCode> {
    id.split('.').next().and_then(|s| parse_code(s).ok())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_examples() {
        let efl = parse_code("EFL").unwrap();
        assert_eq!(efl, MoleculeCode::new(Domain1::E, Domain2::F, Domain3::L));
        assert_eq!(
            parse_code("FFF").unwrap(),
            MoleculeCode::new(Domain1::F, Domain2::F, Domain3::F)
        );
        assert_eq!(
            parse_code("ESF").unwrap(),
            MoleculeCode::new(Domain1::E, Domain2::S, Domain3::F)
        );
        assert_eq!(
            parse_code("ELT").unwrap(),
            MoleculeCode::new(Domain1::E, Domain2::L, Domain3::T)
        );
        for bad in ["EEF", "ELS", "XFF", "EF", "EFLL"] {
            assert!(parse_code(bad).is_err(), "{bad}");
        }
    }

    #[test]
    fn code_display_round_trips() {
        for code in enumerate_codes() {
            assert_eq!(parse_code(&code.to_string()).unwrap(), code);
        }
    }

    #[test]
    fn enumerate_matches_letter_enumeration() {
        // Independent oracle: every three-letter string over the union of
        // letters that parses.
        let letters = ['E', 'F', 'L', 'S', 'T'];
        let mut brute = Vec::new();
        for a in letters {
            for b in letters {
                for c in letters {
                    let s: String = [a, b, c].iter().collect();
                    if parse_code(&s).is_ok() {
                        brute.push(s);
                    }
                }
            }
        }
        let listed: Vec<String> = enumerate_codes().iter().map(|c| c.to_string()).collect();
        assert_eq!(listed, brute);
        assert_eq!(listed.len(), 24);
    }

    #[test]
    fn pattern_subsets() {
        let codes = enumerate_codes();
        let count = |pat: &str| codes.iter().filter(|c| c.matches(pat)).count();
        assert_eq!(count("EbL"), 4);
        assert_eq!(count("FbF"), 4);
        assert_eq!(count("abF"), 8);
        assert_eq!(count("Fbc"), 12);
        assert_eq!(codes.iter().filter(|c| !c.is_functional()).count(), 20);
        let functional: Vec<String> = codes
            .iter()
            .filter(|c| c.is_functional())
            .map(|c| c.to_string())
            .collect();
        assert_eq!(functional, vec!["EFL", "ELL", "ESL", "ETL"]);
    }

    #[test]
    fn geometry_29() {
        let g = reference_geometry(29).unwrap();
        assert_eq!(g.atoms(), 29);
        assert!(g.domain_of.iter().all(|d| (1..=3).contains(d)));
        for a in [5, 19, 29] {
            assert_eq!(g.domain_of[a - 1], 1);
        }
        for a in [2, 22, 26] {
            assert_eq!(g.domain_of[a - 1], 3);
        }
        for a in &g.domain2_signature {
            assert_eq!(g.domain_of[*a], 2);
        }
        assert_eq!(g.discriminating_atoms_one_based(), vec![2, 5, 19, 22, 26, 29]);
        let sizes: Vec<usize> = (1..=3).map(|d| g.domain_atoms(d).len()).collect();
        assert_eq!(sizes.iter().sum::<usize>(), 29);
        assert!(reference_geometry(8).is_err());
    }

    #[test]
    fn geometry_generic_sizes() {
        let g = reference_geometry(9).unwrap();
        assert_eq!(g.domain1_signature.len(), 3);
        assert_eq!(g.domain3_signature.len(), 3);
        // Too few domain-2 atoms for a square.
        let cfg = GeneratorConfig {
            atoms: 9,
            frames: 4,
            ..Default::default()
        };
        assert!(simulate(parse_code("ESF").unwrap(), &cfg).is_err());
        assert!(simulate(parse_code("ELF").unwrap(), &cfg).is_ok());
    }

    #[test]
    fn config_validation() {
        let ok = GeneratorConfig::default();
        assert!(ok.validate().is_ok());
        for bad in [
            GeneratorConfig { k_sig: 0.5, ..ok.clone() },
            GeneratorConfig { k_ref: 0.0, ..ok.clone() },
            GeneratorConfig { noise: 0.0, ..ok.clone() },
            GeneratorConfig { frames: 1, ..ok.clone() },
            GeneratorConfig { k_sig: 1000.0, ..ok.clone() },
        ] {
            assert!(bad.validate().is_err());
        }
    }

    #[test]
    fn simulate_is_deterministic() {
        let cfg = GeneratorConfig {
            frames: 20,
            seed: 11,
            ..Default::default()
        };
        let code = parse_code("ETL").unwrap();
        let a = simulate(code, &cfg).unwrap();
        let b = simulate(code, &cfg).unwrap();
        assert_eq!(a.frames(), b.frames());
        assert_eq!(a.dim(), 58);
        assert_eq!(a.label(), Label::Functional);
    }
}
