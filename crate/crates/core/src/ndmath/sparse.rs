use alloc::vec;
use alloc::vec::Vec;

use super::Matrix;
use crate::error::{Error, Result};

/// Compressed sparse row matrix. Used for constant graph operators that
/// never receive gradients.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from per-row `(column, value)` lists.
    pub fn from_row_entries(cols: usize, rows: Vec<Vec<(usize, f64)>>) -> Self {
        let mut indptr = Vec::with_capacity(rows.len() + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for row in &rows {
            for &(c, v) in row {
                debug_assert!(c < cols);
                indices.push(c);
                values.push(v);
            }
            indptr.push(indices.len());
        }
        Self { rows: rows.len(), cols, indptr, indices, values }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            rows: n,
            cols: n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_entries(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.indptr[r]..self.indptr[r + 1];
        self.indices[span.clone()].iter().copied().zip(self.values[span].iter().copied())
    }

    pub fn mul_dense(&self, rhs: &Matrix) -> Result<Matrix> {
        if self.cols != rhs.rows() {
            return Err(Error::Dimension {
                op: "sparse-matmul",
                lhs: (self.rows, self.cols),
                rhs: rhs.shape(),
            });
        }
        let mut out = Matrix::zeros(self.rows, rhs.cols());
        for r in 0..self.rows {
            let span = self.indptr[r]..self.indptr[r + 1];
            let out_row = out.row_mut(r);
            for (&c, &v) in self.indices[span.clone()].iter().zip(&self.values[span]) {
                for (o, &x) in out_row.iter_mut().zip(rhs.row(c)) {
                    *o += v * x;
                }
            }
        }
        Ok(out)
    }

    pub fn transpose(&self) -> Self {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); self.cols];
        for r in 0..self.rows {
            for (c, v) in self.row_entries(r) {
                rows[c].push((r, v));
            }
        }
        Self::from_row_entries(self.rows, rows)
    }

    pub fn to_dense(&self) -> Matrix {
        let mut out = Matrix::zeros(self.rows, self.cols);
        for r in 0..self.rows {
            for (c, v) in self.row_entries(r) {
                out.set(r, c, out.get(r, c) + v);
            }
        }
        out
    }
}

/// A constant sparse operator paired with its precomputed transpose, so the
/// tape can push adjoints back through it cheaply.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseOperator {
    forward: CsrMatrix,
    adjoint: CsrMatrix,
}

impl SparseOperator {
    pub fn new(forward: CsrMatrix) -> Self {
        let adjoint = forward.transpose();
        Self { forward, adjoint }
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.forward
    }

    pub fn transposed(&self) -> &CsrMatrix {
        &self.adjoint
    }

    pub fn apply(&self, x: &Matrix) -> Result<Matrix> {
        self.forward.mul_dense(x)
    }

    pub fn apply_transpose(&self, x: &Matrix) -> Result<Matrix> {
        self.adjoint.mul_dense(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_dense_product() {
        let s = CsrMatrix::from_row_entries(3, vec![vec![(0, 0.5), (2, 0.5)], vec![(1, 1.0)]]);
        let x = Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]]);
        assert_eq!(s.mul_dense(&x).unwrap(), s.to_dense().matmul(&x).unwrap());
        assert_eq!(s.transpose().to_dense(), s.to_dense().transpose());
    }
}
