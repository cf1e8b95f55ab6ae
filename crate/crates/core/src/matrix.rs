//! Dense row-major matrices plus the small symmetric solvers used everywhere.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Dense real matrix with row = observation. Used both for feature matrices
/// (n x m, one column per candidate feature, no intercept column) and for
/// response matrices (n x h).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
    names: Option<Vec<String>>,
}

impl DataMatrix {
    /// Build from a flat row-major buffer. All entries must be finite.
    pub fn from_vec(data: Vec<f64>, rows: usize, cols: usize) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "buffer of length {} cannot hold a {}x{} matrix",
                data.len(),
                rows,
                cols
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::Degenerate(format!(
                "non-finite entry at row {}, column {}",
                pos / cols + 1,
                pos % cols + 1
            )));
        }
        Ok(Self {
            rows,
            cols,
            data,
            names: None,
        })
    }

    /// Build from nested rows; every row must have the same length.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, |r| r.len());
        let mut data = Vec::with_capacity(nrows * ncols);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != ncols {
                return Err(Error::Dimension(format!(
                    "row {} has {} entries, expected {}",
                    i + 1,
                    row.len(),
                    ncols
                )));
            }
            data.extend_from_slice(row);
        }
        Self::from_vec(data, nrows, ncols)
    }

    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
            names: None,
        }
    }

    pub fn nrows(&self) -> usize {
        self.rows
    }

    pub fn ncols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: f64) {
        self.data[row * self.cols + col] = value;
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.data[row * self.cols..(row + 1) * self.cols]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn column(&self, col: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, col)).collect()
    }

    pub fn column_names(&self) -> Option<&[String]> {
        self.names.as_deref()
    }

    pub fn set_column_names(&mut self, names: Vec<String>) -> Result<()> {
        if names.len() != self.cols {
            return Err(Error::Dimension(format!(
                "{} names for {} columns",
                names.len(),
                self.cols
            )));
        }
        self.names = Some(names);
        Ok(())
    }

    pub fn col_sum(&self, col: usize) -> f64 {
        (0..self.rows).map(|i| self.get(i, col)).sum()
    }

    pub fn col_mean(&self, col: usize) -> f64 {
        self.col_sum(col) / self.rows as f64
    }

    /// Dot product of two columns.
    pub fn col_dot(&self, a: usize, b: usize) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.rows {
            acc += self.get(i, a) * self.get(i, b);
        }
        acc
    }

    /// Dot product of a column against an external vector of length nrows.
    pub fn col_dot_slice(&self, col: usize, v: &[f64]) -> f64 {
        let mut acc = 0.0;
        for i in 0..self.rows {
            acc += self.get(i, col) * v[i];
        }
        acc
    }
}

/// Lower-triangular Cholesky factor of a symmetric positive definite matrix,
/// stored densely row-major.
#[derive(Debug)]
pub(crate) struct Cholesky {
    dim: usize,
    l: Vec<f64>,
}

/// Factor a symmetric matrix given as a dense `dim x dim` row-major buffer.
///
/// `rel_tol` is the rank tolerance: a diagonal pivot below
/// `rel_tol * max(diag)` aborts with `SingularDesign` at the offending
/// column.
pub(crate) fn cholesky(a: &[f64], dim: usize, rel_tol: f64) -> Result<Cholesky> {
    debug_assert_eq!(a.len(), dim * dim);
    let max_diag = (0..dim)
        .map(|j| a[j * dim + j])
        .fold(0.0_f64, |acc, v| acc.max(v));
    let tol = rel_tol * max_diag.max(f64::MIN_POSITIVE);
    let mut l = vec![0.0; dim * dim];
    for j in 0..dim {
        let mut d = a[j * dim + j];
        for k in 0..j {
            d -= l[j * dim + k] * l[j * dim + k];
        }
        if !(d > tol) {
            return Err(Error::SingularDesign {
                column: j,
                pivot: d,
            });
        }
        let dsq = d.sqrt();
        l[j * dim + j] = dsq;
        for i in (j + 1)..dim {
            let mut s = a[i * dim + j];
            for k in 0..j {
                s -= l[i * dim + k] * l[j * dim + k];
            }
            l[i * dim + j] = s / dsq;
        }
    }
    Ok(Cholesky { dim, l })
}

impl Cholesky {
    /// Solve A x = b via the stored factor.
    pub(crate) fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim;
        let mut y = b.to_vec();
        for i in 0..n {
            for k in 0..i {
                y[i] -= self.l[i * n + k] * y[k];
            }
            y[i] /= self.l[i * n + i];
        }
        for i in (0..n).rev() {
            for k in (i + 1)..n {
                y[i] -= self.l[k * n + i] * y[k];
            }
            y[i] /= self.l[i * n + i];
        }
        y
    }

    /// Natural log of det(A).
    pub(crate) fn ln_det(&self) -> f64 {
        let n = self.dim;
        2.0 * (0..n).map(|i| self.l[i * n + i].ln()).sum::<f64>()
    }

    pub(crate) fn lower(&self) -> &[f64] {
        &self.l
    }
}
