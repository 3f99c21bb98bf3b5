//! Small dense square matrices.
//!
//! Site spaces are tiny (a handful of states each), so everything here is a
//! plain row-major `Vec<f64>` with unsophisticated O(d^3) arithmetic. The one
//! non-trivial routine is [`SquareMatrix::expm`], a scaling-and-squaring
//! matrix exponential with a truncated Taylor series, which is all that is
//! needed for per-site semigroups.

use crate::error::{Error, Result};

/// Dense `dim x dim` matrix, row-major. Entry `(k, l)` sits at `data[k*dim + l]`.
#[derive(Clone, Debug, PartialEq)]
pub struct SquareMatrix {
    dim: usize,
    data: Vec<f64>,
}

impl SquareMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, data: vec![0.0; dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for k in 0..dim {
            m.data[k * dim + k] = 1.0;
        }
        m
    }

    /// Builds a matrix from row slices; all rows must have length `rows.len()`.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        let mut data = Vec::with_capacity(dim * dim);
        for (k, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::InvalidArgument(format!(
                    "row {k} has length {}, expected {dim} (matrix must be square)",
                    row.len()
                )));
            }
            data.extend_from_slice(row);
        }
        Ok(Self { dim, data })
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (k, &v) in diag.iter().enumerate() {
            m.data[k * diag.len() + k] = v;
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.dim + col]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[row * self.dim + col] = value;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&x| x == 0.0)
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { dim: self.dim, data: self.data.iter().map(|x| x * c).collect() }
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim, "matrix dimension mismatch");
        Self {
            dim: self.dim,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn add_assign(&mut self, other: &Self) {
        assert_eq!(self.dim, other.dim, "matrix dimension mismatch");
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += *b;
        }
    }

    pub fn add_diagonal(&self, diag: &[f64]) -> Self {
        assert_eq!(self.dim, diag.len(), "diagonal length mismatch");
        let mut m = self.clone();
        for (k, &v) in diag.iter().enumerate() {
            m.data[k * self.dim + k] += v;
        }
        m
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim, "matrix dimension mismatch");
        let d = self.dim;
        let mut out = Self::zeros(d);
        for k in 0..d {
            for j in 0..d {
                let a = self.data[k * d + j];
                if a == 0.0 {
                    continue;
                }
                for l in 0..d {
                    out.data[k * d + l] += a * other.data[j * d + l];
                }
            }
        }
        out
    }

    /// Matrix-vector product `self * v`.
    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.dim, v.len(), "vector length mismatch");
        let d = self.dim;
        (0..d)
            .map(|k| self.data[k * d..(k + 1) * d].iter().zip(v).map(|(m, x)| m * x).sum())
            .collect()
    }

    /// Operator 1-norm: maximum absolute column sum.
    pub fn one_norm(&self) -> f64 {
        let d = self.dim;
        (0..d)
            .map(|l| (0..d).map(|k| self.data[k * d + l].abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    pub fn column_sums(&self) -> Vec<f64> {
        let d = self.dim;
        (0..d).map(|l| (0..d).map(|k| self.data[k * d + l]).sum()).collect()
    }

    /// Matrix exponential by scaling and squaring.
    ///
    /// The argument is halved until its 1-norm drops below 0.5, the series
    /// `sum A^j / j!` is summed to machine precision, and the result is
    /// squared back up. Adequate for the small generator matrices handled
    /// here; no Pade machinery required.
    pub fn expm(&self) -> Result<Self> {
        if !self.data.iter().all(|x| x.is_finite()) {
            return Err(Error::Numerical("matrix exponential of non-finite matrix".into()));
        }
        let norm = self.one_norm();
        let squarings = if norm <= 0.5 {
            0
        } else {
            (norm / 0.5).log2().ceil() as u32
        };
        let scaled = self.scaled(0.5f64.powi(squarings as i32));

        let mut sum = Self::identity(self.dim);
        let mut term = Self::identity(self.dim);
        for j in 1..=64u32 {
            term = term.matmul(&scaled).scaled(1.0 / j as f64);
            sum.add_assign(&term);
            if term.one_norm() <= 1e-16 * sum.one_norm() {
                break;
            }
            if j == 64 {
                return Err(Error::Numerical("matrix exponential series did not converge".into()));
            }
        }
        for _ in 0..squarings {
            sum = sum.matmul(&sum);
        }
        Ok(sum)
    }
}
