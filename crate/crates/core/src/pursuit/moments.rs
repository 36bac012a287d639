//! Sufficient statistics for the optimizer.
//!
//! The traits of a packet along a unit vector `v` depend on the frames only
//! through the packet mean `m` and sample covariance `C`:
//! `mu = v.m` and `sigma^2 = v^T C v`. Holding `U^T m` and `U^T C U` for the
//! current basis `U` turns a plane rotation into an `O(p)` update per packet
//! and a trial angle into `O(1)` work per packet.

use nalgebra::{DMatrix, DVector};

use crate::error::{Result, SplocError};
use crate::packets::{DataPacket, Label};
use crate::scoring::{BiasMode, ModeScorer, ModeTraits, Spectrum, Thresholds};

use super::basis::Basis;

/// Mean and sample covariance of one packet in the data coordinates.
#[derive(Clone, Debug, PartialEq)]
pub struct PacketMoments {
    pub id: String,
    pub label: Label,
    pub n_frames: usize,
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
}

impl PacketMoments {
    pub fn from_packet(packet: &DataPacket) -> Self {
        let m = packet.n_frames();
        let mean = packet.mean();
        let mut centered = packet.frames().clone();
        for mut row in centered.row_iter_mut() {
            row -= mean.transpose();
        }
        let cov = centered.tr_mul(&centered) / (m as f64 - 1.0);
        PacketMoments {
            id: packet.id().to_string(),
            label: packet.label(),
            n_frames: m,
            mean,
            cov,
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }
}

#[derive(Clone, Debug)]
struct Projected {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
}

impl Projected {
    fn new(m: &PacketMoments, u: &DMatrix<f64>) -> Self {
        Projected {
            mean: u.tr_mul(&m.mean),
            cov: u.tr_mul(&(&m.cov * u)),
        }
    }

    fn rotate(&mut self, j1: usize, j2: usize, c: f64, s: f64) {
        let a = self.mean[j1];
        let b = self.mean[j2];
        self.mean[j1] = c * a + s * b;
        self.mean[j2] = -s * a + c * b;
        let p = self.mean.len();
        // Columns, then rows: C <- G^T C G.
        for r in 0..p {
            let x = self.cov[(r, j1)];
            let y = self.cov[(r, j2)];
            self.cov[(r, j1)] = c * x + s * y;
            self.cov[(r, j2)] = -s * x + c * y;
        }
        for k in 0..p {
            let x = self.cov[(j1, k)];
            let y = self.cov[(j2, k)];
            self.cov[(j1, k)] = c * x + s * y;
            self.cov[(j2, k)] = -s * x + c * y;
        }
    }

    fn traits(&self, j: usize, id: &str) -> Result<ModeTraits> {
        spread_traits(self.mean[j], self.cov[(j, j)], id)
    }

    /// Traits of both modes after a virtual rotation of the `(j1, j2)` plane.
    fn plane_traits(&self, j1: usize, j2: usize, c: f64, s: f64, id: &str) -> Result<(ModeTraits, ModeTraits)> {
        let (a, b) = (self.mean[j1], self.mean[j2]);
        let (c11, c12, c22) = (self.cov[(j1, j1)], self.cov[(j1, j2)], self.cov[(j2, j2)]);
        let cross = 2.0 * c * s * c12;
        let v1 = c * c * c11 + cross + s * s * c22;
        let v2 = s * s * c11 - cross + c * c * c22;
        Ok((
            spread_traits(c * a + s * b, v1, id)?,
            spread_traits(-s * a + c * b, v2, id)?,
        ))
    }
}

#[inline]
fn spread_traits(mean: f64, var: f64, id: &str) -> Result<ModeTraits> {
    if var > 0.0 && var.is_finite() {
        Ok(ModeTraits {
            mean,
            std: var.sqrt(),
        })
    } else {
        Err(SplocError::Degenerate(format!(
            "packet {id} has zero spread along a mode"
        )))
    }
}

/// Projected statistics of every packet for the current basis, plus scratch
/// space for scoring.
#[derive(Clone, Debug)]
pub(crate) struct ProjectedState {
    functional: Vec<(String, Projected)>,
    nonfunctional: Vec<(String, Projected)>,
    scorer: ModeScorer,
    tf: Vec<ModeTraits>,
    tn: Vec<ModeTraits>,
    tf2: Vec<ModeTraits>,
    tn2: Vec<ModeTraits>,
}

impl ProjectedState {
    pub(crate) fn new(moments: &[PacketMoments], basis: &Basis, th: Thresholds) -> Self {
        let mut state = ProjectedState {
            functional: Vec::new(),
            nonfunctional: Vec::new(),
            scorer: ModeScorer::new(th),
            tf: Vec::new(),
            tn: Vec::new(),
            tf2: Vec::new(),
            tn2: Vec::new(),
        };
        state.rebuild(moments, basis);
        state
    }

    pub(crate) fn rebuild(&mut self, moments: &[PacketMoments], basis: &Basis) {
        let u = basis.matrix();
        self.functional.clear();
        self.nonfunctional.clear();
        for m in moments {
            let entry = (m.id.clone(), Projected::new(m, u));
            match m.label {
                Label::Functional => self.functional.push(entry),
                Label::Nonfunctional => self.nonfunctional.push(entry),
            }
        }
    }

    pub(crate) fn rotate(&mut self, j1: usize, j2: usize, angle: f64) {
        let (s, c) = angle.sin_cos();
        for (_, pr) in self.functional.iter_mut().chain(self.nonfunctional.iter_mut()) {
            pr.rotate(j1, j2, c, s);
        }
    }

    fn fill_mode(&mut self, j: usize) -> Result<()> {
        self.tf.clear();
        self.tn.clear();
        for (id, pr) in &self.functional {
            self.tf.push(pr.traits(j, id)?);
        }
        for (id, pr) in &self.nonfunctional {
            self.tn.push(pr.traits(j, id)?);
        }
        Ok(())
    }

    pub(crate) fn spectrum(&mut self, bias: &BiasMode) -> Result<Spectrum> {
        let p = self
            .functional
            .first()
            .map(|(_, pr)| pr.mean.len())
            .unwrap_or(0);
        let mut modes = Vec::with_capacity(p);
        for j in 0..p {
            self.fill_mode(j)?;
            modes.push(self.scorer.score(j, &self.tf, &self.tn, bias));
        }
        Ok(Spectrum { modes })
    }

    /// `E(j1) + E(j2)` after rotating the `(j1, j2)` plane by `angle`.
    pub(crate) fn plane_efficacy(&mut self, j1: usize, j2: usize, angle: f64, bias: &BiasMode) -> Result<f64> {
        let (s, c) = angle.sin_cos();
        self.tf.clear();
        self.tn.clear();
        self.tf2.clear();
        self.tn2.clear();
        for (id, pr) in &self.functional {
            let (a, b) = pr.plane_traits(j1, j2, c, s, id)?;
            self.tf.push(a);
            self.tf2.push(b);
        }
        for (id, pr) in &self.nonfunctional {
            let (a, b) = pr.plane_traits(j1, j2, c, s, id)?;
            self.tn.push(a);
            self.tn2.push(b);
        }
        let e1 = self.scorer.efficacy(&self.tf, &self.tn, bias);
        let e2 = self.scorer.efficacy(&self.tf2, &self.tn2, bias);
        Ok(e1 + e2)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scoring::mode_traits;

    fn packet(id: &str, label: Label, seed: u64) -> DataPacket {
        let mut x = seed;
        let frames = DMatrix::from_fn(40, 3, |i, j| {
            x = crate::rng::splitmix64(x ^ (i * 3 + j) as u64);
            (x >> 11) as f64 / (1u64 << 53) as f64 + j as f64 * 0.3
        });
        DataPacket::new(id, label, frames, "").unwrap()
    }

    #[test]
    fn moments_reproduce_direct_traits() {
        let pk = packet("a", Label::Functional, 3);
        let mo = PacketMoments::from_packet(&pk);
        let mut basis = Basis::identity(3);
        basis.rotate_plane(0, 1, 0.3);
        basis.rotate_plane(1, 2, -1.1);
        let pr = Projected::new(&mo, basis.matrix());
        for j in 0..3 {
            let direct = mode_traits(&pk, &basis.mode(j)).unwrap();
            let fast = pr.traits(j, "a").unwrap();
            assert!((direct.mean - fast.mean).abs() < 1e-12);
            assert!((direct.std - fast.std).abs() < 1e-12);
        }
    }

    #[test]
    fn incremental_rotation_matches_rebuild() {
        let pk = packet("a", Label::Functional, 9);
        let mo = PacketMoments::from_packet(&pk);
        let mut basis = Basis::identity(3);
        let mut pr = Projected::new(&mo, basis.matrix());
        for (j1, j2, ang) in [(0, 1, 0.4), (2, 0, -0.2), (1, 2, 0.77)] {
            basis.rotate_plane(j1, j2, ang);
            let (s, c) = f64::sin_cos(ang);
            pr.rotate(j1, j2, c, s);
        }
        let fresh = Projected::new(&mo, basis.matrix());
        assert!((pr.mean - fresh.mean).abs().max() < 1e-12);
        assert!((pr.cov - fresh.cov).abs().max() < 1e-12);
    }
}
