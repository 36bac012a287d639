#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use sploc::rng::rng_from_seed;
use sploc::{Basis, DataPacket, Label};

/// Gaussian frames with per-coordinate means and standard deviations.
pub fn gaussian_packet(id: &str, label: Label, mean: &[f64], std: &[f64], frames: usize, seed: u64) -> DataPacket {
    let mut rng = rng_from_seed(seed);
    let p = mean.len();
    let m = DMatrix::from_fn(frames, p, |_, c| {
        let z: f64 = StandardNormal.sample(&mut rng);
        mean[c] + std[c] * z
    });
    DataPacket::new(id, label, m, "test").unwrap()
}

/// Four-dimensional problem where functional packets are shifted by
/// `shift` along the first coordinate.
pub fn planted_packets(seed: u64, shift: f64) -> Vec<DataPacket> {
    let std = [1.0, 1.5, 0.8, 1.2];
    let mut out = Vec::new();
    for k in 0..6u64 {
        out.push(gaussian_packet(
            &format!("f{k}"),
            Label::Functional,
            &[shift, 0.0, 0.0, 0.0],
            &std,
            100,
            seed.wrapping_mul(31).wrapping_add(k),
        ));
        out.push(gaussian_packet(
            &format!("n{k}"),
            Label::Nonfunctional,
            &[0.0; 4],
            &std,
            100,
            seed.wrapping_mul(31).wrapping_add(100 + k),
        ));
    }
    out
}

/// A random orthogonal basis from the QR factorization of a Gaussian matrix.
pub fn random_basis(p: usize, seed: u64) -> Basis {
    let mut rng = rng_from_seed(seed);
    let a = DMatrix::from_fn(p, p, |_, _| StandardNormal.sample(&mut rng));
    let q = a.qr().q();
    Basis::from_matrix(q).unwrap()
}

pub fn random_unit_vectors(p: usize, n: usize, seed: u64) -> Vec<DVector<f64>> {
    let mut rng = rng_from_seed(seed);
    (0..n)
        .map(|_| {
            let v = DVector::from_fn(p, |_, _| rng.random::<f64>() - 0.5);
            v.normalize()
        })
        .collect()
}
