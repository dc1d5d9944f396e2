use super::matrix::Matrix;
use crate::error::{Error, Result};

/// Compressed sparse rows of a real matrix. Used for bag-of-words feature
/// inputs, where roughly one entry in a hundred is nonzero.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseRows {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseRows {
    pub fn from_dense(m: &Matrix) -> Self {
        let mut row_ptr = Vec::with_capacity(m.rows() + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for i in 0..m.rows() {
            for (j, &v) in m.row(i).iter().enumerate() {
                if v != 0.0 {
                    col_idx.push(j);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Self {
            rows: m.rows(),
            cols: m.cols(),
            row_ptr,
            col_idx,
            values,
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

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Same sparsity pattern with new values.
    pub fn with_values(&self, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), self.values.len());
        Self {
            values,
            ..self.clone()
        }
    }

    pub fn to_dense(&self) -> Matrix {
        let mut m = Matrix::zeros(self.rows, self.cols);
        for i in 0..self.rows {
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                m.set(i, self.col_idx[p], self.values[p]);
            }
        }
        m
    }

    /// `self · rhs`, accumulating in the same order as [`Matrix::matmul`].
    pub fn matmul(&self, rhs: &Matrix) -> Result<Matrix> {
        if self.cols != rhs.rows() {
            return Err(Error::Shape(format!(
                "sparse matmul {}x{} by {}x{}",
                self.rows,
                self.cols,
                rhs.rows(),
                rhs.cols()
            )));
        }
        let mut out = Matrix::zeros(self.rows, rhs.cols());
        for i in 0..self.rows {
            let o = out.row_mut(i);
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                let a = self.values[p];
                if a == 0.0 {
                    continue;
                }
                for (o, &b) in o.iter_mut().zip(rhs.row(self.col_idx[p])) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }

    /// `selfᵀ · rhs`.
    pub fn t_matmul(&self, rhs: &Matrix) -> Result<Matrix> {
        if self.rows != rhs.rows() {
            return Err(Error::Shape(format!(
                "sparse t_matmul {}x{}ᵀ by {}x{}",
                self.rows,
                self.cols,
                rhs.rows(),
                rhs.cols()
            )));
        }
        let n = rhs.cols();
        let mut out = Matrix::zeros(self.cols, n);
        for i in 0..self.rows {
            let r = rhs.row(i);
            for p in self.row_ptr[i]..self.row_ptr[i + 1] {
                let a = self.values[p];
                if a == 0.0 {
                    continue;
                }
                for (o, &b) in out.row_mut(self.col_idx[p]).iter_mut().zip(r) {
                    *o += a * b;
                }
            }
        }
        Ok(out)
    }
}
