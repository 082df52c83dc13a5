//! Switch selection matrices.
//!
//! A selection matrix routes the wave impinging on element `i` to element
//! `j` (entry `(i, j)` set). Feasible matrices are exactly the permutation
//! matrices, so they are stored as the column index of the single one in
//! each row.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Selection {
    /// `columns[i] = j` iff `S[i, j] = 1`.
    columns: Vec<usize>,
}

impl Selection {
    pub fn identity(m: usize) -> Self {
        Self { columns: (0..m).collect() }
    }

    pub fn from_columns(columns: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; columns.len()];
        for &j in &columns {
            if j >= columns.len() || std::mem::replace(&mut seen[j], true) {
                return Err(Error::Precondition(format!("{columns:?} is not a permutation")));
            }
        }
        Ok(Self { columns })
    }

    /// Accepts a real matrix that is exactly binary with unit row and
    /// column sums.
    pub fn from_matrix(s: &DMatrix<f64>) -> Result<Self> {
        if s.nrows() != s.ncols() {
            return Err(Error::Precondition("selection matrix must be square".into()));
        }
        if s.iter().any(|&v| v != 0.0 && v != 1.0) {
            return Err(Error::Precondition("selection matrix must be binary".into()));
        }
        let mut columns = Vec::with_capacity(s.nrows());
        for i in 0..s.nrows() {
            let ones: Vec<usize> = (0..s.ncols()).filter(|&j| s[(i, j)] == 1.0).collect();
            if ones.len() != 1 {
                return Err(Error::Precondition(format!("row {i} of selection matrix has {} ones", ones.len())));
            }
            columns.push(ones[0]);
        }
        Self::from_columns(columns)
    }

    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn columns(&self) -> &[usize] {
        &self.columns
    }

    pub fn is_identity(&self) -> bool {
        self.columns.iter().enumerate().all(|(i, &j)| i == j)
    }

    pub fn to_matrix(&self) -> DMatrix<f64> {
        let m = self.len();
        DMatrix::from_fn(m, m, |i, j| if self.columns[i] == j { 1.0 } else { 0.0 })
    }

    /// `S^T g`: entry `j` is `g[i]` for the row `i` routed to `j`.
    pub fn transpose_apply(&self, g: &DVector<Complex64>) -> DVector<Complex64> {
        let mut out = DVector::zeros(g.len());
        for (i, &j) in self.columns.iter().enumerate() {
            out[j] = g[i];
        }
        out
    }

    /// Frobenius inner product `<W, S>` for a real matrix `W`.
    pub fn score(&self, w: &DMatrix<f64>) -> f64 {
        self.columns.iter().enumerate().map(|(i, &j)| w[(i, j)]).sum()
    }

    /// Squared Frobenius distance between two selections.
    pub fn distance_sq(&self, other: &Selection) -> f64 {
        2.0 * self.columns.iter().zip(&other.columns).filter(|(a, b)| a != b).count() as f64
    }
}
