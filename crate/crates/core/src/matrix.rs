use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense column-major matrix. Column access is contiguous, which is what the
/// pruning and Lasso code iterate over.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColMatrix {
    nrows: usize,
    ncols: usize,
    data: Vec<f64>,
}

impl ColMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            data: vec![0.0; nrows * ncols],
        }
    }

    pub fn from_columns(columns: &[Vec<f64>]) -> Result<Self> {
        let ncols = columns.len();
        let nrows = columns.first().map_or(0, Vec::len);
        if columns.iter().any(|c| c.len() != nrows) {
            return Err(Error::invalid("columns have differing lengths"));
        }
        let mut data = Vec::with_capacity(nrows * ncols);
        for c in columns {
            data.extend_from_slice(c);
        }
        Ok(Self { nrows, ncols, data })
    }

    /// Builds from row-major data.
    pub fn from_rows(nrows: usize, ncols: usize, row_major: &[f64]) -> Result<Self> {
        if row_major.len() != nrows * ncols {
            return Err(Error::invalid(format!(
                "expected {} values for a {nrows}x{ncols} matrix, got {}",
                nrows * ncols,
                row_major.len()
            )));
        }
        let mut m = Self::zeros(nrows, ncols);
        for i in 0..nrows {
            for j in 0..ncols {
                m.data[j * nrows + i] = row_major[i * ncols + j];
            }
        }
        Ok(m)
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.nrows..(j + 1) * self.nrows]
    }

    pub fn col_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.nrows..(j + 1) * self.nrows]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[j * self.nrows + i]
    }

    pub fn row(&self, i: usize) -> Vec<f64> {
        (0..self.ncols).map(|j| self.get(i, j)).collect()
    }

    /// Keeps only the listed columns, in the given order.
    pub fn select_columns(&self, cols: &[usize]) -> Self {
        let mut data = Vec::with_capacity(self.nrows * cols.len());
        for &j in cols {
            data.extend_from_slice(self.col(j));
        }
        Self {
            nrows: self.nrows,
            ncols: cols.len(),
            data,
        }
    }

    /// Keeps only the listed rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        let mut data = Vec::with_capacity(rows.len() * self.ncols);
        for j in 0..self.ncols {
            let c = self.col(j);
            data.extend(rows.iter().map(|&i| c[i]));
        }
        Self {
            nrows: rows.len(),
            ncols: self.ncols,
            data,
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// `self * beta`, accumulated left to right over columns.
    pub fn mul_vec(&self, beta: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.nrows];
        for (j, &b) in beta.iter().enumerate() {
            for (o, &x) in out.iter_mut().zip(self.col(j)) {
                *o += b * x;
            }
        }
        out
    }

    /// Row-major `XᵀX` (symmetric, `ncols × ncols`).
    pub fn gram(&self) -> Vec<f64> {
        let p = self.ncols;
        let mut g = vec![0.0; p * p];
        for a in 0..p {
            for b in a..p {
                let v = dot(self.col(a), self.col(b));
                g[a * p + b] = v;
                g[b * p + a] = v;
            }
        }
        g
    }

    pub fn t_mul_vec(&self, y: &[f64]) -> Vec<f64> {
        (0..self.ncols).map(|j| dot(self.col(j), y)).collect()
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
