use nalgebra::{DMatrix, DVector};

use crate::error::{Result, SplocError};

/// Tolerance on `max |U^T U - I|` for a valid basis.
pub const ORTHONORMAL_TOLERANCE: f64 = 1e-10;

/// Complete orthonormal basis; column `j` is mode `j`.
#[derive(Clone, Debug, PartialEq)]
pub struct Basis {
    vectors: DMatrix<f64>,
    generation: u64,
}

impl Basis {
    pub fn identity(p: usize) -> Self {
        Basis {
            vectors: DMatrix::identity(p, p),
            generation: 0,
        }
    }

    pub fn from_matrix(vectors: DMatrix<f64>) -> Result<Self> {
        if vectors.nrows() != vectors.ncols() || vectors.nrows() < 2 {
            return Err(SplocError::invalid(format!(
                "basis must be square with p >= 2, got {}x{}",
                vectors.nrows(),
                vectors.ncols()
            )));
        }
        let basis = Basis {
            vectors,
            generation: 0,
        };
        let err = basis.orthonormality_error();
        if err >= ORTHONORMAL_TOLERANCE {
            return Err(SplocError::invalid(format!(
                "basis is not orthonormal: max |U^T U - I| = {err:e}"
            )));
        }
        Ok(basis)
    }

    pub(crate) fn from_columns_unchecked(vectors: DMatrix<f64>) -> Self {
        Basis {
            vectors,
            generation: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.vectors
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.vectors
    }

    /// Number of modifications applied since construction.
    pub fn generation(&self) -> u64 {
        self.generation
    }

    pub fn mode(&self, j: usize) -> DVector<f64> {
        self.vectors.column(j).into_owned()
    }

    pub fn orthonormality_error(&self) -> f64 {
        let gram = self.vectors.transpose() * &self.vectors;
        let p = self.dim();
        let mut worst: f64 = 0.0;
        for i in 0..p {
            for j in 0..p {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((gram[(i, j)] - target).abs());
            }
        }
        worst
    }

    /// Rotate modes `j1` and `j2` within their plane:
    /// `u1 <- c u1 + s u2`, `u2 <- -s u1 + c u2`.
    pub fn rotate_plane(&mut self, j1: usize, j2: usize, angle: f64) {
        let (s, c) = angle.sin_cos();
        for r in 0..self.dim() {
            let a = self.vectors[(r, j1)];
            let b = self.vectors[(r, j2)];
            self.vectors[(r, j1)] = c * a + s * b;
            self.vectors[(r, j2)] = -s * a + c * b;
        }
        self.generation += 1;
    }

    /// Modified Gram-Schmidt over the columns, in order.
    pub fn reorthonormalize(&mut self) {
        let p = self.dim();
        for j in 0..p {
            for k in 0..j {
                let proj = self.vectors.column(k).dot(&self.vectors.column(j));
                let qk = self.vectors.column(k).into_owned();
                self.vectors.column_mut(j).axpy(-proj, &qk, 1.0);
            }
            let n = self.vectors.column(j).norm();
            self.vectors.column_mut(j).unscale_mut(n);
        }
        self.generation += 1;
    }

    /// Replace the columns listed in `modes` by `old_block * q`, where
    /// `old_block` holds those columns in the given order.
    pub(crate) fn mix_columns(&mut self, modes: &[usize], q: &DMatrix<f64>) {
        let p = self.dim();
        let block = DMatrix::from_fn(p, modes.len(), |r, k| self.vectors[(r, modes[k])]);
        let mixed = block * q;
        for (k, &m) in modes.iter().enumerate() {
            self.vectors.set_column(m, &mixed.column(k));
        }
        self.generation += 1;
    }
}

/// Cayley transform `(I - A)(I + A)^{-1}` of an antisymmetric matrix.
pub fn cayley_transform(a: &DMatrix<f64>) -> DMatrix<f64> {
    let n = a.nrows();
    let id = DMatrix::<f64>::identity(n, n);
    let plus = &id + a;
    let minus = &id - a;
    // I + A is invertible for every antisymmetric A (eigenvalues 1 + i*lambda).
    let inv = plus.lu().try_inverse().expect("I + A is invertible");
    minus * inv
}
