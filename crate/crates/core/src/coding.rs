//! Description-length arithmetic: the universal integer code and its
//! truncated variants, per-feature model-coding costs for the three
//! selection schemes, and Gaussian residual-coding costs for single and
//! multiple responses.
//!
//! All costs are idealized code lengths in bits; nothing here produces an
//! actual bitstream.

use serde::{Deserialize, Serialize};

use crate::dist::ln_gamma;
use crate::error::{Error, Result};
use crate::matrix::{cholesky, DataMatrix};
use crate::model::CoefficientMatrix;

const LN_2: f64 = std::f64::consts::LN_2;

/// Constant of the untruncated universal integer code, lg 2.865.
pub fn untruncated_constant() -> f64 {
    2.865_f64.log2()
}

/// Iterated base-2 logarithm sum: lg i + lg lg i + ... while terms stay
/// positive. `lg_star(1) == 0` (empty sum).
pub fn lg_star(i: u64) -> Result<f64> {
    if i == 0 {
        return Err(Error::Domain("lg* is defined for positive integers".into()));
    }
    let mut term = (i as f64).log2();
    let mut sum = 0.0;
    while term > 0.0 {
        sum += term;
        term = term.log2();
    }
    Ok(sum)
}

/// Normalization constant c_Z of the universal code truncated at `z`:
/// the unique value with sum_{i=1..z} 2^-(lg* i + c_Z) = 1.
pub fn compute_c_z(z: u64) -> Result<f64> {
    if z == 0 {
        return Err(Error::Domain("truncation cap must be positive".into()));
    }
    let mut total = 0.0;
    for i in 1..=z {
        total += (-lg_star(i)?).exp2();
    }
    Ok(total.log2())
}

/// Idealized code lengths lg* i + constant for integers, either untruncated
/// (constant lg 2.865) or truncated at a cap Z (constant c_Z).
#[derive(Debug, Clone, PartialEq)]
pub struct UniversalCodeTable {
    cap: Option<u64>,
    constant: f64,
    memo: Vec<f64>,
}

impl UniversalCodeTable {
    pub fn untruncated() -> Self {
        Self {
            cap: None,
            constant: untruncated_constant(),
            memo: Vec::new(),
        }
    }

    pub fn truncated(z: u64) -> Result<Self> {
        if z == 0 {
            return Err(Error::Domain("truncation cap must be positive".into()));
        }
        let mut memo = Vec::with_capacity(z as usize);
        let mut total = 0.0;
        for i in 1..=z {
            let ls = lg_star(i)?;
            memo.push(ls);
            total += (-ls).exp2();
        }
        Ok(Self {
            cap: Some(z),
            constant: total.log2(),
            memo,
        })
    }

    pub fn cap(&self) -> Option<u64> {
        self.cap
    }

    pub fn constant(&self) -> f64 {
        self.constant
    }

    /// Code length for integer `i` in bits.
    pub fn cost(&self, i: u64) -> Result<f64> {
        if i == 0 {
            return Err(Error::Domain("cannot code the integer 0".into()));
        }
        if let Some(z) = self.cap {
            if i > z {
                return Err(Error::Domain(format!("integer {i} exceeds the code cap {z}")));
            }
            return Ok(self.memo[(i - 1) as usize] + self.constant);
        }
        Ok(lg_star(i)? + self.constant)
    }
}

/// Free-function form of [`UniversalCodeTable::cost`].
pub fn universal_cost(i: u64, table: &UniversalCodeTable) -> Result<f64> {
    table.cost(i)
}

/// Selection policy for the per-feature model-coding cost.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SchemeKind {
    /// Per-response coding: each (feature, response) pair pays the full
    /// feature-index cost. The no-sharing baseline.
    Ric,
    /// A selected feature gets nonzero coefficients for every response.
    FullMic,
    /// A selected feature carries an explicitly coded subset of responses.
    PartialMic,
}

impl SchemeKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            SchemeKind::Ric => "ric",
            SchemeKind::FullMic => "full-mic",
            SchemeKind::PartialMic => "partial-mic",
        }
    }
}

/// A coding scheme bound to a problem size: `m` candidate features
/// (excluding the intercept), `h` responses, and the per-coefficient cost
/// in bits (default 2).
#[derive(Debug, Clone, PartialEq)]
pub struct CodingScheme {
    pub kind: SchemeKind,
    pub bits_per_coefficient: f64,
    pub m: usize,
    pub h: usize,
    subset_constant: f64,
}

impl CodingScheme {
    pub fn new(kind: SchemeKind, m: usize, h: usize) -> Result<Self> {
        Self::with_bits(kind, m, h, 2.0)
    }

    pub fn with_bits(kind: SchemeKind, m: usize, h: usize, bits_per_coefficient: f64) -> Result<Self> {
        if m < 1 || h < 1 {
            return Err(Error::Domain(format!(
                "coding scheme needs m >= 1 and h >= 1, got m={m}, h={h}"
            )));
        }
        if !(bits_per_coefficient >= 0.0) {
            return Err(Error::Domain(format!(
                "bits per coefficient must be nonnegative, got {bits_per_coefficient}"
            )));
        }
        let subset_constant = compute_c_z(h as u64)?;
        Ok(Self {
            kind,
            bits_per_coefficient,
            m,
            h,
            subset_constant,
        })
    }

    /// Normalization constant of the response-count code (cap at h).
    pub fn subset_constant(&self) -> f64 {
        self.subset_constant
    }

    /// Model-coding cost in bits for one feature appearing in `k` response
    /// models. A feature absent from the model (`k == 0`) transmits nothing.
    pub fn feature_cost(&self, k: usize) -> Result<f64> {
        if k > self.h {
            return Err(Error::Domain(format!(
                "k={k} exceeds the number of responses {}",
                self.h
            )));
        }
        if k == 0 {
            return Ok(0.0);
        }
        let lg_m = (self.m as f64).log2();
        let bpc = self.bits_per_coefficient;
        Ok(match self.kind {
            SchemeKind::Ric => k as f64 * (lg_m + bpc),
            SchemeKind::FullMic => lg_m + bpc * self.h as f64,
            SchemeKind::PartialMic => {
                lg_m + lg_star(k as u64)?
                    + self.subset_constant
                    + lg_choose(self.h, k)
                    + bpc * k as f64
            }
        })
    }
}

/// Free-function form of [`CodingScheme::feature_cost`].
pub fn feature_model_cost(scheme: &CodingScheme, k: usize) -> Result<f64> {
    scheme.feature_cost(k)
}

/// lg of the binomial coefficient C(n, k), via log-gamma so large n stay
/// exact to ~1e-9.
pub fn lg_choose(n: usize, k: usize) -> f64 {
    if k == 0 || k == n {
        return 0.0;
    }
    (ln_gamma(n as f64 + 1.0) - ln_gamma(k as f64 + 1.0) - ln_gamma((n - k) as f64 + 1.0)) / LN_2
}

/// Residual-coding cost in bits for a single response, with the noise
/// variance estimated from the previous model's RSS:
/// (n / (2 ln 2)) * [ ln(2 pi rss_prev / n) + rss_new / rss_prev ].
pub fn residual_cost_single(rss_prev: f64, rss_new: f64, n: usize) -> Result<f64> {
    residual_cost_single_for(rss_prev, rss_new, n, 0)
}

pub(crate) fn residual_cost_single_for(
    rss_prev: f64,
    rss_new: f64,
    n: usize,
    response: usize,
) -> Result<f64> {
    if n < 2 {
        return Err(Error::Domain(format!("need n >= 2 observations, got {n}")));
    }
    if !(rss_new >= 0.0) {
        return Err(Error::Domain(format!("rss_new must be nonnegative, got {rss_new}")));
    }
    if !(rss_prev > 0.0) {
        return Err(Error::DegenerateFit { response });
    }
    let nf = n as f64;
    Ok(nf / (2.0 * LN_2)
        * ((2.0 * std::f64::consts::PI * rss_prev / nf).ln() + rss_new / rss_prev))
}

/// How the residual covariance across responses is estimated.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CovMode {
    Diagonal,
    Full,
    /// lambda * diagonal + (1 - lambda) * full, lambda in [0, 1].
    Shrunken(f64),
}

impl CovMode {
    pub fn validate(&self) -> Result<()> {
        if let CovMode::Shrunken(l) = self {
            if !(0.0..=1.0).contains(l) {
                return Err(Error::Domain(format!(
                    "shrinkage weight must be in [0, 1], got {l}"
                )));
            }
        }
        Ok(())
    }
}

/// h x h residual covariance estimate (maximum likelihood, divide by n).
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseCovEstimate {
    pub mode: CovMode,
    h: usize,
    matrix: Vec<f64>,
}

impl NoiseCovEstimate {
    pub fn n_responses(&self) -> usize {
        self.h
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.matrix[i * self.h + j]
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.h).map(|i| self.entry(i, i)).collect()
    }

    pub fn matrix(&self) -> &[f64] {
        &self.matrix
    }

    /// Build a diagonal estimate directly from per-response variances.
    pub fn from_diagonal(variances: &[f64]) -> Result<Self> {
        let h = variances.len();
        for (r, v) in variances.iter().enumerate() {
            if !(*v > 0.0) {
                return Err(Error::Degenerate(format!(
                    "response {r} has zero residual variance"
                )));
            }
        }
        let mut matrix = vec![0.0; h * h];
        for (r, v) in variances.iter().enumerate() {
            matrix[r * h + r] = *v;
        }
        Ok(Self {
            mode: CovMode::Diagonal,
            h,
            matrix,
        })
    }
}

/// Maximum-likelihood residual covariance from the previous-step model's
/// residuals: full = R'R / n, diagonal zeroes the off-diagonal entries, and
/// shrunken(lambda) blends the two entrywise.
pub fn estimate_noise_cov(residuals_prev: &DataMatrix, mode: CovMode) -> Result<NoiseCovEstimate> {
    mode.validate()?;
    let n = residuals_prev.nrows();
    let h = residuals_prev.ncols();
    if n < 2 || h < 1 {
        return Err(Error::Dimension(format!(
            "residual matrix must be at least 2x1, got {n}x{h}"
        )));
    }
    let nf = n as f64;
    let mut full = vec![0.0; h * h];
    for a in 0..h {
        for b in a..h {
            let v = residuals_prev.col_dot(a, b) / nf;
            full[a * h + b] = v;
            full[b * h + a] = v;
        }
    }
    for r in 0..h {
        if !(full[r * h + r] > 0.0) {
            return Err(Error::Degenerate(format!(
                "response {r} has zero residual variance"
            )));
        }
    }
    let matrix = match mode {
        CovMode::Full => full,
        CovMode::Diagonal => {
            let mut d = vec![0.0; h * h];
            for r in 0..h {
                d[r * h + r] = full[r * h + r];
            }
            d
        }
        CovMode::Shrunken(lambda) => {
            let mut s = vec![0.0; h * h];
            for a in 0..h {
                for b in 0..h {
                    s[a * h + b] = if a == b {
                        full[a * h + b]
                    } else {
                        (1.0 - lambda) * full[a * h + b]
                    };
                }
            }
            s
        }
    };
    Ok(NoiseCovEstimate { mode, h, matrix })
}

/// Residual-coding cost in bits for the candidate model `beta` under a
/// covariance estimated from the previous-step model:
/// (1 / (2 ln 2)) * [ n ln((2 pi)^h |Sigma|) + sum_i r_i' Sigma^-1 r_i ].
///
/// With a diagonal estimate this decomposes into a sum of
/// [`residual_cost_single`] terms over responses.
pub fn residual_cost_multi(
    y: &DataMatrix,
    x: &DataMatrix,
    beta: &CoefficientMatrix,
    cov: &NoiseCovEstimate,
) -> Result<f64> {
    let n = y.nrows();
    let h = y.ncols();
    if cov.n_responses() != h {
        return Err(Error::Dimension(format!(
            "covariance is {}x{} but data has {h} responses",
            cov.n_responses(),
            cov.n_responses()
        )));
    }
    let resid = beta.residuals(x, y)?;
    residual_cost_from_residuals(&resid, cov, n)
}

pub(crate) fn residual_cost_from_residuals(
    resid: &DataMatrix,
    cov: &NoiseCovEstimate,
    n: usize,
) -> Result<f64> {
    let h = cov.n_responses();
    let nf = n as f64;
    if cov.mode == CovMode::Diagonal {
        let mut total = 0.0;
        for r in 0..h {
            let sigma2 = cov.entry(r, r);
            if !(sigma2 > 0.0) {
                return Err(Error::DegenerateFit { response: r });
            }
            let rss_new = resid.col_dot(r, r);
            total += residual_cost_single_for(sigma2 * nf, rss_new, n, r)?;
        }
        return Ok(total);
    }
    let chol = cholesky(cov.matrix(), h, 1e-12).map_err(|_| Error::SingularCovariance)?;
    let ln_det = chol.ln_det();
    // Quadratic form via forward substitution row by row.
    let l = chol.lower();
    let mut quad = 0.0;
    let mut z = vec![0.0; h];
    for i in 0..n {
        let row = resid.row(i);
        for a in 0..h {
            let mut s = row[a];
            for k in 0..a {
                s -= l[a * h + k] * z[k];
            }
            z[a] = s / l[a * h + a];
            quad += z[a] * z[a];
        }
    }
    Ok((nf * (h as f64 * (2.0 * std::f64::consts::PI).ln() + ln_det) + quad) / (2.0 * LN_2))
}
