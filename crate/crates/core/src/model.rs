//! Sparse coefficient estimates shared by the selection and testing modules.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::DataMatrix;

/// Sparse m x h coefficient matrix with explicit support. The intercept row
/// is kept separately: it is always present, one value per response, and is
/// never charged by any coding scheme. Feature indices are 0-based over the
/// raw feature columns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientMatrix {
    m: usize,
    h: usize,
    intercept: Vec<f64>,
    entries: BTreeMap<(usize, usize), f64>,
}

impl CoefficientMatrix {
    pub fn new(m: usize, h: usize) -> Self {
        Self {
            m,
            h,
            intercept: vec![0.0; h],
            entries: BTreeMap::new(),
        }
    }

    pub fn n_features(&self) -> usize {
        self.m
    }

    pub fn n_responses(&self) -> usize {
        self.h
    }

    pub fn set_intercept(&mut self, response: usize, value: f64) {
        self.intercept[response] = value;
    }

    pub fn intercept(&self, response: usize) -> f64 {
        self.intercept[response]
    }

    pub fn insert(&mut self, feature: usize, response: usize, value: f64) -> Result<()> {
        if feature >= self.m || response >= self.h {
            return Err(Error::Dimension(format!(
                "entry ({feature}, {response}) outside a {}x{} coefficient matrix",
                self.m, self.h
            )));
        }
        self.entries.insert((feature, response), value);
        Ok(())
    }

    pub fn remove(&mut self, feature: usize, response: usize) {
        self.entries.remove(&(feature, response));
    }

    pub fn get(&self, feature: usize, response: usize) -> f64 {
        self.entries.get(&(feature, response)).copied().unwrap_or(0.0)
    }

    pub fn contains(&self, feature: usize, response: usize) -> bool {
        self.entries.contains_key(&(feature, response))
    }

    /// Iterate over (feature, response) -> value support entries.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        self.entries.iter().map(|(&(f, r), &v)| (f, r, v))
    }

    pub fn support(&self) -> BTreeSet<(usize, usize)> {
        self.entries.keys().copied().collect()
    }

    pub fn n_nonzero(&self) -> usize {
        self.entries.len()
    }

    /// Features selected for one response, ascending.
    pub fn selected_features(&self, response: usize) -> Vec<usize> {
        self.entries
            .keys()
            .filter(|&&(_, r)| r == response)
            .map(|&(f, _)| f)
            .collect()
    }

    /// Number of responses a feature is selected for.
    pub fn response_count(&self, feature: usize) -> usize {
        self.entries.keys().filter(|&&(f, _)| f == feature).count()
    }

    /// Features with any nonzero response, ascending.
    pub fn feature_rows(&self) -> BTreeSet<usize> {
        self.entries.keys().map(|&(f, _)| f).collect()
    }

    /// Prediction for one raw feature row (no intercept column) and response.
    pub fn predict(&self, row: &[f64], response: usize) -> f64 {
        let mut acc = self.intercept[response];
        for (&(f, r), &v) in &self.entries {
            if r == response {
                acc += v * row[f];
            }
        }
        acc
    }

    /// Residual matrix Y - prediction over all responses.
    pub fn residuals(&self, x: &DataMatrix, y: &DataMatrix) -> Result<DataMatrix> {
        if x.nrows() != y.nrows() {
            return Err(Error::Dimension(format!(
                "features have {} rows, responses {}",
                x.nrows(),
                y.nrows()
            )));
        }
        if x.ncols() != self.m || y.ncols() != self.h {
            return Err(Error::Dimension(format!(
                "coefficients are {}x{} but data is {}x{}",
                self.m,
                self.h,
                x.ncols(),
                y.ncols()
            )));
        }
        let n = x.nrows();
        let mut resid = DataMatrix::zeros(n, self.h);
        for r in 0..self.h {
            for i in 0..n {
                resid.set(i, r, y.get(i, r) - self.intercept[r]);
            }
        }
        for (&(f, r), &v) in &self.entries {
            for i in 0..n {
                let cur = resid.get(i, r);
                resid.set(i, r, cur - v * x.get(i, f));
            }
        }
        Ok(resid)
    }

    /// Support as serialization-friendly triples.
    pub fn to_triples(&self) -> Vec<(usize, usize, f64)> {
        self.iter().collect()
    }

    pub fn from_triples(
        m: usize,
        h: usize,
        triples: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self> {
        let mut out = Self::new(m, h);
        for (f, r, v) in triples {
            out.insert(f, r, v)?;
        }
        Ok(out)
    }
}
