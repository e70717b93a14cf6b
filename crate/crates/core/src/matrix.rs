use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Symmetric `n x n` matrix stored as its upper triangle, row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SymRepr", into = "SymRepr")]
pub struct SymMatrix {
    dim: usize,
    entries: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct SymRepr {
    dim: usize,
    entries: Vec<f64>,
}

impl TryFrom<SymRepr> for SymMatrix {
    type Error = Error;
    fn try_from(r: SymRepr) -> Result<Self> {
        SymMatrix::from_upper(r.dim, r.entries)
    }
}

impl From<SymMatrix> for SymRepr {
    fn from(m: SymMatrix) -> Self {
        SymRepr { dim: m.dim, entries: m.entries }
    }
}

#[inline]
fn tri_index(dim: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    // rows 0..i hold dim + (dim-1) + ... + (dim-i+1) entries
    i * dim - i * i.saturating_sub(1) / 2 + (j - i)
}

impl SymMatrix {
    pub fn from_upper(dim: usize, entries: Vec<f64>) -> Result<Self> {
        let want = dim * (dim + 1) / 2;
        if entries.len() != want {
            return Err(Error::Dimension { expected: want, got: entries.len() });
        }
        if let Some(i) = entries.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(Self { dim, entries })
    }

    pub fn zeros(dim: usize) -> Self {
        Self { dim, entries: vec![0.0; dim * (dim + 1) / 2] }
    }

    pub fn scaled_identity(dim: usize, s: f64) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m.set(i, i, s);
        }
        m
    }

    pub fn identity(dim: usize) -> Self {
        Self::scaled_identity(dim, 1.0)
    }

    /// Builds from a dense row-major matrix, symmetrising `(M + M^T) / 2`.
    pub fn from_dense(dim: usize, rows: &[f64]) -> Result<Self> {
        if rows.len() != dim * dim {
            return Err(Error::Dimension { expected: dim * dim, got: rows.len() });
        }
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            for j in i..dim {
                m.set(i, j, 0.5 * (rows[i * dim + j] + rows[j * dim + i]));
            }
        }
        Ok(m)
    }

    pub fn from_nalgebra(m: &DMatrix<f64>) -> Self {
        let n = m.nrows();
        let mut out = Self::zeros(n);
        for i in 0..n {
            for j in i..n {
                out.set(i, j, 0.5 * (m[(i, j)] + m[(j, i)]));
            }
        }
        out
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[tri_index(self.dim, i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        let k = tri_index(self.dim, i, j);
        self.entries[k] = v;
    }

    pub fn to_nalgebra(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.dim, self.dim, |i, j| self.get(i, j))
    }

    /// `A x`.
    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        (0..self.dim).map(|i| (0..self.dim).map(|j| self.get(i, j) * x[j]).sum()).collect()
    }

    /// `<A x, x>`.
    pub fn quad_form(&self, x: &[f64]) -> f64 {
        let mut s = 0.0;
        for i in 0..self.dim {
            s += self.get(i, i) * x[i] * x[i];
            for j in i + 1..self.dim {
                s += 2.0 * self.get(i, j) * x[i] * x[j];
            }
        }
        s
    }

    pub fn add(&self, other: &SymMatrix) -> Result<SymMatrix> {
        if other.dim != self.dim {
            return Err(Error::Dimension { expected: self.dim, got: other.dim });
        }
        let entries = self.entries.iter().zip(&other.entries).map(|(a, b)| a + b).collect();
        Ok(SymMatrix { dim: self.dim, entries })
    }

    pub fn add_scaled_identity(&self, s: f64) -> SymMatrix {
        let mut m = self.clone();
        for i in 0..self.dim {
            m.set(i, i, self.get(i, i) + s);
        }
        m
    }

    pub fn scale(&self, s: f64) -> SymMatrix {
        SymMatrix { dim: self.dim, entries: self.entries.iter().map(|v| v * s).collect() }
    }

    /// Eigenvalues in ascending order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        if self.dim == 1 {
            return vec![self.entries[0]];
        }
        let mut ev: Vec<f64> = self.to_nalgebra().symmetric_eigenvalues().iter().copied().collect();
        ev.sort_by(|a, b| a.total_cmp(b));
        ev
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }

    pub fn max_eigenvalue(&self) -> f64 {
        *self.eigenvalues().last().unwrap()
    }

    /// Inverse, or `None` when the condition number exceeds `max_condition`.
    pub fn inverse_if_conditioned(&self, max_condition: f64) -> Option<SymMatrix> {
        let ev = self.eigenvalues();
        let big = ev.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let small = ev.iter().fold(f64::INFINITY, |m, v| m.min(v.abs()));
        if big == 0.0 || small * max_condition < big {
            return None;
        }
        self.to_nalgebra().try_inverse().map(|m| SymMatrix::from_nalgebra(&m))
    }

    pub fn max_abs_diff(&self, other: &SymMatrix) -> f64 {
        self.entries.iter().zip(&other.entries).fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}
