use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};

/// Constant sparse matrix in compressed-row form.
#[derive(Debug, Clone, PartialEq)]
pub struct Csr {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl Csr {
    /// Builds from per-row `(column, value)` lists.
    pub fn from_rows(cols: usize, rows: &[Vec<(usize, f64)>]) -> Result<Self> {
        let mut indptr = Vec::with_capacity(rows.len() + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for row in rows {
            for &(c, v) in row {
                if c >= cols {
                    return Err(Error::shape(format!("column {c} out of {cols}")));
                }
                indices.push(c);
                values.push(v);
            }
            indptr.push(indices.len());
        }
        Ok(Csr {
            rows: rows.len(),
            cols,
            indptr,
            indices,
            values,
        })
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.indptr[r]..self.indptr[r + 1];
        self.indices[span.clone()]
            .iter()
            .copied()
            .zip(self.values[span].iter().copied())
    }

    /// `self · dense`
    pub fn matmul(&self, dense: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut out = Array2::zeros((self.rows, dense.ncols()));
        for r in 0..self.rows {
            let mut acc = out.row_mut(r);
            for (c, v) in self.row(r) {
                acc.scaled_add(v, &dense.row(c));
            }
        }
        out
    }

    /// `selfᵀ · dense`
    pub fn transpose_matmul(&self, dense: ArrayView2<'_, f64>) -> Array2<f64> {
        let mut out = Array2::zeros((self.cols, dense.ncols()));
        for r in 0..self.rows {
            for (c, v) in self.row(r) {
                out.row_mut(c).scaled_add(v, &dense.row(r));
            }
        }
        out
    }
}
