//! Interpretation of optimized bases.

use log::warn;
use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::error::{Result, SplocError};
use crate::packets::{DataPacket, StateVector};
use crate::pursuit::SplocResult;
use crate::scoring::{ModeClass, ModeCounts, Spectrum};

/// Orthonormal vectors (as columns) spanning one class of modes.
#[derive(Clone, Debug, PartialEq)]
pub struct Subspace {
    pub label: ModeClass,
    pub vectors: DMatrix<f64>,
    pub source: String,
}

impl Subspace {
    pub fn new(label: ModeClass, vectors: DMatrix<f64>, source: impl Into<String>) -> Self {
        Subspace {
            label,
            vectors,
            source: source.into(),
        }
    }

    pub fn ambient_dim(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn dim(&self) -> usize {
        self.vectors.ncols()
    }

    pub fn of_result(result: &SplocResult, label: ModeClass, source: impl Into<String>) -> Self {
        Subspace::new(label, result.subspace_matrix(label), source)
    }
}

/// The D, U and I subspaces of a result.
pub fn subspaces(result: &SplocResult, source: &str) -> [Subspace; 3] {
    class_subspaces(result.basis.matrix(), &result.spectrum, source)
}

/// Split the columns of `basis` into D, U and I subspaces by the classes in
/// `spectrum`.
pub fn class_subspaces(basis: &DMatrix<f64>, spectrum: &Spectrum, source: &str) -> [Subspace; 3] {
    [ModeClass::D, ModeClass::U, ModeClass::I].map(|c| {
        let cols: Vec<_> = spectrum.indices(c).into_iter().map(|j| basis.column(j)).collect();
        let m = if cols.is_empty() {
            DMatrix::zeros(basis.nrows(), 0)
        } else {
            DMatrix::from_columns(&cols)
        };
        Subspace::new(c, m, source)
    })
}

/// Mean square inner product
/// `sum_{u,v} (u.v)^2 / max(dim U, dim V)`. An empty subspace gives 0.
pub fn msip(u: &Subspace, v: &Subspace) -> Result<f64> {
    if u.ambient_dim() != v.ambient_dim() {
        return Err(SplocError::DimensionMismatch {
            context: "msip".into(),
            expected: u.ambient_dim(),
            found: v.ambient_dim(),
        });
    }
    if u.dim() == 0 || v.dim() == 0 {
        warn!(
            "msip between {}:{} and {}:{} involves an empty subspace; reporting 0",
            u.source, u.label, v.source, v.label
        );
        return Ok(0.0);
    }
    let overlap = u.vectors.tr_mul(&v.vectors);
    Ok(overlap.norm_squared() / u.dim().max(v.dim()) as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MsipEntry {
    pub result_a: String,
    pub result_b: String,
    pub block_a: ModeClass,
    pub block_b: ModeClass,
    pub value: f64,
}

/// Every (D, U, I) x (D, U, I) block for every ordered pair of results.
#[derive(Clone, Debug, PartialEq, Default)]
pub struct MsipMatrix {
    pub entries: Vec<MsipEntry>,
}

impl MsipMatrix {
    pub fn get(&self, a: &str, b: &str, block_a: ModeClass, block_b: ModeClass) -> Option<f64> {
        self.entries
            .iter()
            .find(|e| e.result_a == a && e.result_b == b && e.block_a == block_a && e.block_b == block_b)
            .map(|e| e.value)
    }

    /// CSV rows `resultA,resultB,blockA,blockB,value`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("resultA,resultB,blockA,blockB,value\n");
        for e in &self.entries {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                e.result_a, e.result_b, e.block_a, e.block_b, e.value
            ));
        }
        out
    }
}

/// MSIP for every ordered pair of named (D, U, I) subspace triples.
pub fn msip_grid(sets: &[(String, [Subspace; 3])]) -> Result<MsipMatrix> {
    let mut entries = Vec::with_capacity(9 * sets.len() * sets.len());
    for (name_a, a) in sets {
        for (name_b, b) in sets {
            for ua in a {
                for vb in b {
                    entries.push(MsipEntry {
                        result_a: name_a.clone(),
                        result_b: name_b.clone(),
                        block_a: ua.label,
                        block_b: vb.label,
                        value: msip(ua, vb)?,
                    });
                }
            }
        }
    }
    Ok(MsipMatrix { entries })
}

/// Per-atom fluctuation of a packet projected into a subspace.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct RmsfProfile {
    pub packet: String,
    pub subspace: ModeClass,
    pub values: Vec<f64>,
}

/// `RMSF_a = sqrt(mean_t |P (x(t) - center)|_a^2)` where `P` projects onto
/// the subspace and `|.|_a` takes atom `a`'s x and y coordinates. The mean
/// over frames uses `1/m`.
pub fn rmsf_profile(packet: &DataPacket, subspace: &Subspace, center: &StateVector) -> Result<RmsfProfile> {
    let p = packet.dim();
    if !p.is_multiple_of(2) {
        return Err(SplocError::invalid(format!(
            "rmsf_profile: dimension {p} is odd, frames are not 2D molecules"
        )));
    }
    if subspace.ambient_dim() != p || center.dim() != p {
        return Err(SplocError::DimensionMismatch {
            context: "rmsf_profile".into(),
            expected: p,
            found: if center.dim() != p { center.dim() } else { subspace.ambient_dim() },
        });
    }
    if subspace.dim() == 0 {
        return Err(SplocError::invalid(format!(
            "rmsf_profile: {} subspace is empty",
            subspace.label
        )));
    }
    let na = p / 2;
    let m = packet.n_frames();
    let mut centered = packet.frames().clone();
    for mut row in centered.row_iter_mut() {
        row -= center.as_vector().transpose();
    }
    let v = &subspace.vectors;
    let projected = (&centered * v) * v.transpose();
    let mut values = vec![0.0; na];
    for (a, val) in values.iter_mut().enumerate() {
        let sx = projected.column(a).norm_squared();
        let sy = projected.column(na + a).norm_squared();
        *val = ((sx + sy) / m as f64).sqrt();
    }
    Ok(RmsfProfile {
        packet: packet.id().to_string(),
        subspace: subspace.label,
        values,
    })
}

/// Centered on the packet's own mean.
pub fn packet_rmsf(packet: &DataPacket, subspace: &Subspace) -> Result<RmsfProfile> {
    let center = StateVector::new(packet.mean().as_slice().to_vec())?;
    rmsf_profile(packet, subspace, &center)
}

/// Ordinary per-atom RMSF about the packet mean.
pub fn plain_rmsf(packet: &DataPacket) -> Result<Vec<f64>> {
    let p = packet.dim();
    let full = Subspace::new(ModeClass::U, DMatrix::identity(p, p), "identity");
    Ok(packet_rmsf(packet, &full)?.values)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ReplicateSummary {
    pub replicates: usize,
    /// Means of (nD, nU, nI).
    pub mean: [f64; 3],
    /// Standard errors `s / sqrt(n)` of (nD, nU, nI).
    pub stderr: [f64; 3],
}

/// Mean and standard error of the mode counts over replicates. Every
/// replicate must partition the same dimension `p`.
pub fn replicate_summary(counts: &[ModeCounts], p: usize) -> Result<ReplicateSummary> {
    if counts.len() < 2 {
        return Err(SplocError::invalid(format!(
            "replicate_summary: need at least 2 results, got {}",
            counts.len()
        )));
    }
    if let Some(bad) = counts.iter().find(|c| c.total() != p) {
        return Err(SplocError::invalid(format!(
            "replicate_summary: counts {bad:?} do not sum to p = {p}"
        )));
    }
    let n = counts.len() as f64;
    let mut mean = [0.0; 3];
    let mut stderr = [0.0; 3];
    for k in 0..3 {
        let xs: Vec<f64> = counts
            .iter()
            .map(|c| [c.d, c.u, c.i][k] as f64)
            .collect();
        let mu = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mu).powi(2)).sum::<f64>() / (n - 1.0);
        mean[k] = mu;
        stderr[k] = (var / n).sqrt();
    }
    Ok(ReplicateSummary {
        replicates: counts.len(),
        mean,
        stderr,
    })
}

pub fn summarize_results(results: &[SplocResult]) -> Result<ReplicateSummary> {
    let p = results
        .first()
        .ok_or_else(|| SplocError::invalid("replicate_summary: no results"))?
        .basis
        .dim();
    let counts: Vec<ModeCounts> = results.iter().map(SplocResult::counts).collect();
    replicate_summary(&counts, p)
}

/// Unit vector along coordinate `k`.
pub fn unit(p: usize, k: usize) -> DVector<f64> {
    let mut v = DVector::zeros(p);
    v[k] = 1.0;
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::packets::Label;

    fn sub(cols: Vec<DVector<f64>>) -> Subspace {
        let m = DMatrix::from_columns(&cols);
        Subspace::new(ModeClass::D, m, "t")
    }

    #[test]
    fn msip_exact_cases() {
        let p = 4;
        let full = sub((0..p).map(|k| unit(p, k)).collect());
        assert!((msip(&full, &full).unwrap() - 1.0).abs() < 1e-15);
        assert_eq!(msip(&sub(vec![unit(p, 0)]), &sub(vec![unit(p, 1)])).unwrap(), 0.0);
        let diag = (unit(p, 0) + unit(p, 1)) / 2f64.sqrt();
        assert!((msip(&sub(vec![unit(p, 0)]), &sub(vec![diag])).unwrap() - 0.5).abs() < 1e-12);
        let empty = Subspace::new(ModeClass::I, DMatrix::zeros(p, 0), "e");
        assert_eq!(msip(&full, &empty).unwrap(), 0.0);
        let other = Subspace::new(ModeClass::I, DMatrix::zeros(3, 1), "e");
        assert!(msip(&full, &other).is_err());
    }

    #[test]
    fn rmsf_single_coordinate_subspace() {
        // Three frames of a 2-atom molecule; only x_1 varies along e1.
        let rows = vec![
            vec![1.0, 5.0, 0.0, 2.0],
            vec![2.0, 3.0, 1.0, 2.0],
            vec![6.0, 4.0, -1.0, 2.0],
        ];
        let pk = DataPacket::from_rows("m", Label::Functional, &rows, "").unwrap();
        let s = sub(vec![unit(4, 0)]);
        let prof = packet_rmsf(&pk, &s).unwrap();
        // x_1 = {1, 2, 6}: mean 3, population variance (4 + 1 + 9) / 3.
        let expected = (14.0f64 / 3.0).sqrt();
        assert!((prof.values[0] - expected).abs() < 1e-12);
        assert_eq!(prof.values[1], 0.0);
    }

    #[test]
    fn rmsf_full_basis_is_plain_rmsf_and_constant_is_zero() {
        let rows = vec![
            vec![1.0, 5.0, 0.0, 2.0],
            vec![2.0, 3.0, 1.0, 2.0],
            vec![6.0, 4.0, -1.0, 2.5],
        ];
        let pk = DataPacket::from_rows("m", Label::Functional, &rows, "").unwrap();
        let plain = plain_rmsf(&pk).unwrap();
        // Brute force: per atom, mean over frames of squared displacement.
        for a in 0..2 {
            let mx: f64 = rows.iter().map(|r| r[a]).sum::<f64>() / 3.0;
            let my: f64 = rows.iter().map(|r| r[2 + a]).sum::<f64>() / 3.0;
            let ms: f64 = rows
                .iter()
                .map(|r| (r[a] - mx).powi(2) + (r[2 + a] - my).powi(2))
                .sum::<f64>()
                / 3.0;
            assert!((plain[a] - ms.sqrt()).abs() < 1e-12);
        }
        let constant = DataPacket::from_rows("c", Label::Functional, &[vec![1.0; 4], vec![1.0; 4]], "")
            .unwrap();
        assert!(plain_rmsf(&constant).unwrap().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn rmsf_rejects_odd_dimension_and_empty() {
        let pk = DataPacket::from_rows("m", Label::Functional, &[vec![1.0; 3], vec![2.0; 3]], "")
            .unwrap();
        assert!(packet_rmsf(&pk, &sub(vec![unit(3, 0)])).is_err());
        let pk4 = DataPacket::from_rows("m", Label::Functional, &[vec![1.0; 4], vec![2.0; 4]], "")
            .unwrap();
        let empty = Subspace::new(ModeClass::D, DMatrix::zeros(4, 0), "e");
        assert!(packet_rmsf(&pk4, &empty).is_err());
    }

    #[test]
    fn replicate_summary_examples() {
        let c = |d, u, i| ModeCounts { d, u, i };
        let s = replicate_summary(&[c(2, 3, 5), c(4, 1, 5)], 10).unwrap();
        assert_eq!(s.mean[0], 3.0);
        assert!((s.stderr[0] - 1.0).abs() < 1e-15);
        assert_eq!(s.stderr[2], 0.0);
        let same = replicate_summary(&[c(1, 1, 1); 4], 3).unwrap();
        assert_eq!(same.stderr, [0.0; 3]);
        assert!(replicate_summary(&[c(1, 1, 1)], 3).is_err());
        assert!(replicate_summary(&[c(1, 1, 1), c(1, 1, 2)], 3).is_err());
    }
}
