//! Greedy stepwise feature selection driven by total description length.
//!
//! One step = pick the feature (and, for the partial scheme, the response
//! subset) whose addition most reduces the total description length; accept
//! it only if the total strictly decreases. The residual covariance is
//! re-estimated from the updated model after every accepted step, and the
//! acceptance comparison always uses the covariance estimated from the model
//! *without* the candidate, which is what keeps pure noise out.

use std::cell::{Cell, RefCell};
use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::coding::{
    estimate_noise_cov, residual_cost_from_residuals, residual_cost_multi, residual_cost_single,
    CodingScheme, CovMode, NoiseCovEstimate, SchemeKind,
};
use crate::error::{Error, Result};
use crate::linalg::{logistic_refit, RANK_TOLERANCE};
use crate::matrix::{cholesky, DataMatrix};
use crate::model::CoefficientMatrix;

const LN_2: f64 = std::f64::consts::LN_2;

/// Description lengths within this many bits are treated as ties; ties go to
/// the lowest feature index (and the smallest subset), which keeps runs
/// deterministic regardless of evaluation order.
pub const TIE_EPS: f64 = 1e-9;

/// Configuration for one stepwise run.
#[derive(Debug, Clone)]
pub struct SearchConfig {
    pub scheme: CodingScheme,
    /// Residual covariance estimator. The per-response scheme requires
    /// `Diagonal`.
    pub cov_mode: CovMode,
    /// Prefilter width: per step, only the `top_t` features with the largest
    /// all-response likelihood gain enter the subset search (partial scheme
    /// only). `top_t >= m` disables the filter.
    pub top_t: usize,
    /// Cap on accepted steps (per response for the per-response scheme).
    /// Defaults to min(n/2, m).
    pub max_steps: Option<usize>,
    /// Skip subset sizes whose likelihood lower bound cannot beat the best
    /// candidate seen in the current step. Only applied with the diagonal
    /// covariance estimate, where the bound is exact; results never change,
    /// only the evaluation count.
    pub short_circuit: bool,
}

impl SearchConfig {
    pub fn new(scheme: CodingScheme) -> Self {
        Self {
            scheme,
            cov_mode: CovMode::Diagonal,
            top_t: 75,
            max_steps: None,
            short_circuit: true,
        }
    }
}

/// One accepted step.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LedgerStep {
    pub feature: usize,
    /// Responses granted to the feature in this step.
    pub responses: Vec<usize>,
    pub dl_before: f64,
    pub dl_after: f64,
    /// Residual component of `dl_after` (under the pre-step covariance).
    pub residual_bits: f64,
    /// Model-coding component of `dl_after`.
    pub model_bits: f64,
}

/// Audit trail of a stepwise run. The total description length strictly
/// decreases at every accepted step.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct SelectionLedger {
    pub steps: Vec<LedgerStep>,
    pub notes: Vec<String>,
    pub initial_dl: f64,
    pub final_dl: f64,
    /// Candidate description-length evaluations performed.
    pub n_evaluations: u64,
}

/// Total description length of `beta` on (x, y) under a covariance estimate
/// and coding scheme: residual cost plus per-feature model costs. The
/// intercept row is free.
pub fn description_length(
    x: &DataMatrix,
    y: &DataMatrix,
    beta: &CoefficientMatrix,
    cov: &NoiseCovEstimate,
    scheme: &CodingScheme,
) -> Result<f64> {
    let (residual, model) = description_length_parts(x, y, beta, cov, scheme)?;
    Ok(residual + model)
}

/// Residual and model components of [`description_length`].
pub fn description_length_parts(
    x: &DataMatrix,
    y: &DataMatrix,
    beta: &CoefficientMatrix,
    cov: &NoiseCovEstimate,
    scheme: &CodingScheme,
) -> Result<(f64, f64)> {
    let residual = residual_cost_multi(y, x, beta, cov)?;
    let mut model = 0.0;
    for f in beta.feature_rows() {
        model += scheme.feature_cost(beta.response_count(f))?;
    }
    Ok((residual, model))
}

// ---------------------------------------------------------------------------
// Shared regression context: cached cross-products and subset solves.
// ---------------------------------------------------------------------------

pub(crate) struct RegressionContext<'a> {
    pub(crate) x: &'a DataMatrix,
    pub(crate) y: &'a DataMatrix,
    pub(crate) n: usize,
    pub(crate) m: usize,
    pub(crate) h: usize,
    sum_x: Vec<f64>,
    xx_diag: Vec<f64>,
    sum_y: Vec<f64>,
    yty: Vec<f64>,
    xty: Vec<f64>,
    xx_cache: RefCell<HashMap<(u32, u32), f64>>,
    evals: Cell<u64>,
}

impl<'a> RegressionContext<'a> {
    pub(crate) fn new(x: &'a DataMatrix, y: &'a DataMatrix) -> Result<Self> {
        let n = x.nrows();
        let m = x.ncols();
        let h = y.ncols();
        if y.nrows() != n {
            return Err(Error::Dimension(format!(
                "features have {n} rows, responses {}",
                y.nrows()
            )));
        }
        if n < 3 {
            return Err(Error::Degenerate("need at least 3 observations".into()));
        }
        if m == 0 || h == 0 {
            return Err(Error::Dimension("need at least one feature and one response".into()));
        }
        let sum_x: Vec<f64> = (0..m).map(|j| x.col_sum(j)).collect();
        let xx_diag: Vec<f64> = (0..m).map(|j| x.col_dot(j, j)).collect();
        let sum_y: Vec<f64> = (0..h).map(|r| y.col_sum(r)).collect();
        let yty: Vec<f64> = (0..h).map(|r| y.col_dot(r, r)).collect();
        let mut xty = vec![0.0; m * h];
        for i in 0..n {
            let xrow = x.row(i);
            let yrow = y.row(i);
            for (j, &xv) in xrow.iter().enumerate() {
                if xv != 0.0 {
                    let base = j * h;
                    for (r, &yv) in yrow.iter().enumerate() {
                        xty[base + r] += xv * yv;
                    }
                }
            }
        }
        Ok(Self {
            x,
            y,
            n,
            m,
            h,
            sum_x,
            xx_diag,
            sum_y,
            yty,
            xty,
            xx_cache: RefCell::new(HashMap::new()),
            evals: Cell::new(0),
        })
    }

    fn xx(&self, a: usize, b: usize) -> f64 {
        if a == b {
            return self.xx_diag[a];
        }
        let key = (a.min(b) as u32, a.max(b) as u32);
        if let Some(&v) = self.xx_cache.borrow().get(&key) {
            return v;
        }
        let v = self.x.col_dot(a, b);
        self.xx_cache.borrow_mut().insert(key, v);
        v
    }

    fn count_eval(&self) {
        self.evals.set(self.evals.get() + 1);
    }

    pub(crate) fn evals(&self) -> u64 {
        self.evals.get()
    }

    /// Centered sum of squares of a response (intercept-only RSS).
    pub(crate) fn syy(&self, r: usize) -> f64 {
        (self.yty[r] - self.sum_y[r] * self.sum_y[r] / self.n as f64).max(0.0)
    }

    /// OLS of response `r` on {intercept} + `feats`. Returns the
    /// coefficients (intercept first, then `feats` order) and the RSS.
    pub(crate) fn solve_subset(&self, r: usize, feats: &[usize]) -> Result<(Vec<f64>, f64)> {
        let q = feats.len();
        let dim = q + 1;
        let mut a = vec![0.0; dim * dim];
        a[0] = self.n as f64;
        for (j, &f) in feats.iter().enumerate() {
            a[j + 1] = self.sum_x[f];
            a[(j + 1) * dim] = self.sum_x[f];
            for (k, &g) in feats.iter().enumerate().skip(j) {
                let v = self.xx(f, g);
                a[(j + 1) * dim + k + 1] = v;
                a[(k + 1) * dim + j + 1] = v;
            }
        }
        let mut b = vec![0.0; dim];
        b[0] = self.sum_y[r];
        for (j, &f) in feats.iter().enumerate() {
            b[j + 1] = self.xty[f * self.h + r];
        }
        let chol = cholesky(&a, dim, RANK_TOLERANCE)?;
        let coef = chol.solve(&b);
        let mut rss = self.yty[r];
        for (c, rhs) in coef.iter().zip(&b) {
            rss -= c * rhs;
        }
        Ok((coef, rss.max(0.0)))
    }

    /// Residual column of response `r` under the fit on `feats`.
    fn residual_column(&self, r: usize, feats: &[usize], coef: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n);
        for i in 0..self.n {
            let mut pred = coef[0];
            for (j, &f) in feats.iter().enumerate() {
                pred += coef[j + 1] * self.x.get(i, f);
            }
            out.push(self.y.get(i, r) - pred);
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Model state during the search.
// ---------------------------------------------------------------------------

struct SearchState {
    selected: Vec<Vec<usize>>,
    coeffs: Vec<Vec<f64>>,
    rss: Vec<f64>,
    sat_scale: Vec<f64>,
    saturated: Vec<bool>,
    k_of: BTreeMap<usize, usize>,
    /// Residual matrix, maintained for non-diagonal covariance modes.
    resid: Option<DataMatrix>,
}

impl SearchState {
    fn init(ctx: &RegressionContext, track_residuals: bool) -> Result<Self> {
        let h = ctx.h;
        let n = ctx.n as f64;
        let mut selected = Vec::with_capacity(h);
        let mut coeffs = Vec::with_capacity(h);
        let mut rss = Vec::with_capacity(h);
        let mut sat_scale = Vec::with_capacity(h);
        let mut saturated = Vec::with_capacity(h);
        for r in 0..h {
            let syy = ctx.syy(r);
            selected.push(Vec::new());
            coeffs.push(vec![ctx.sum_y[r] / n]);
            rss.push(syy);
            sat_scale.push(syy.max(f64::MIN_POSITIVE));
            saturated.push(syy <= 0.0);
        }
        let resid = if track_residuals {
            let mut m = DataMatrix::zeros(ctx.n, h);
            for r in 0..h {
                let mean = ctx.sum_y[r] / n;
                for i in 0..ctx.n {
                    m.set(i, r, ctx.y.get(i, r) - mean);
                }
            }
            Some(m)
        } else {
            None
        };
        Ok(Self {
            selected,
            coeffs,
            rss,
            sat_scale,
            saturated,
            k_of: BTreeMap::new(),
            resid,
        })
    }

    fn feature_k(&self, f: usize) -> usize {
        self.k_of.get(&f).copied().unwrap_or(0)
    }

    fn model_bits(&self, scheme: &CodingScheme) -> Result<f64> {
        let mut total = 0.0;
        for (_, &k) in self.k_of.iter() {
            total += scheme.feature_cost(k)?;
        }
        Ok(total)
    }

    /// Self-estimate residual bits of the current model (saturated responses
    /// contribute nothing).
    fn residual_bits_self(&self, n: usize) -> Result<f64> {
        let mut total = 0.0;
        for r in 0..self.rss.len() {
            if self.saturated[r] {
                continue;
            }
            total += residual_cost_single(self.rss[r], self.rss[r], n)?;
        }
        Ok(total)
    }

    fn commit(
        &mut self,
        ctx: &RegressionContext,
        feature: usize,
        add: &[usize],
        notes: &mut Vec<String>,
    ) -> Result<()> {
        for &r in add {
            let mut feats = self.selected[r].clone();
            feats.push(feature);
            feats.sort_unstable();
            let (coef, rss) = ctx.solve_subset(r, &feats)?;
            if let Some(res) = self.resid.as_mut() {
                let col = ctx.residual_column(r, &feats, &coef);
                for (i, v) in col.into_iter().enumerate() {
                    res.set(i, r, v);
                }
            }
            self.selected[r] = feats;
            self.coeffs[r] = coef;
            self.rss[r] = rss;
            if rss <= 1e-12 * self.sat_scale[r] {
                self.saturated[r] = true;
                notes.push(format!(
                    "response {r} reached zero residual; no further features will be added to it"
                ));
            }
        }
        *self.k_of.entry(feature).or_insert(0) += add.len();
        Ok(())
    }

    fn to_coefficients(&self, m: usize, h: usize) -> Result<CoefficientMatrix> {
        let mut beta = CoefficientMatrix::new(m, h);
        for r in 0..h {
            beta.set_intercept(r, self.coeffs[r][0]);
            for (j, &f) in self.selected[r].iter().enumerate() {
                beta.insert(f, r, self.coeffs[r][j + 1])?;
            }
        }
        Ok(beta)
    }
}

// ---------------------------------------------------------------------------
// Candidate scoring.
// ---------------------------------------------------------------------------

struct Candidate {
    feature: usize,
    add: Vec<usize>,
    delta: f64,
}

/// Per-response likelihood gains (in bits) of adding `feature`, under a
/// diagonal covariance with variances `sigma2`. Responses where the solve is
/// rank-deficient are skipped with a note.
fn diagonal_gains(
    ctx: &RegressionContext,
    state: &SearchState,
    sigma2: &[f64],
    feature: usize,
    notes: &mut Vec<String>,
) -> Result<Vec<(usize, f64, f64)>> {
    let mut out = Vec::new();
    for r in 0..ctx.h {
        if state.saturated[r] || state.selected[r].contains(&feature) {
            continue;
        }
        let mut feats = state.selected[r].clone();
        feats.push(feature);
        feats.sort_unstable();
        match ctx.solve_subset(r, &feats) {
            Ok((_, rss_new)) => {
                let gain = (state.rss[r] - rss_new) / (2.0 * LN_2 * sigma2[r]);
                out.push((r, gain.max(0.0), rss_new));
            }
            Err(Error::SingularDesign { .. }) => {
                notes.push(format!(
                    "feature {feature} skipped for response {r}: collinear with the current design"
                ));
            }
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

/// Best prefix of the gain-sorted responses for one candidate under the
/// partial scheme. Returns (responses, delta-DL) where delta is relative to
/// the current model; empty responses means "cost not beaten".
#[allow(clippy::too_many_arguments)]
fn partial_subset_scan(
    scheme: &CodingScheme,
    gains: &mut [(usize, f64, f64)],
    k0: usize,
    base_cost: f64,
    best_so_far: f64,
    short_circuit: bool,
    ctx: &RegressionContext,
) -> Result<(Vec<usize>, f64)> {
    // Sort by gain descending, ties to the lower response index.
    gains.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    let total_gain: f64 = gains.iter().map(|g| g.1).sum();
    let prune_at = best_so_far.min(0.0) + TIE_EPS;
    let mut best_delta = 0.0;
    let mut best_kadd = 0usize;
    let mut prefix_gain = 0.0;
    for (idx, g) in gains.iter().enumerate() {
        let kadd = idx + 1;
        prefix_gain += g.1;
        let cost_delta = scheme.feature_cost(k0 + kadd)? - base_cost;
        if short_circuit {
            let bound = cost_delta - total_gain;
            if bound > prune_at {
                continue;
            }
        }
        ctx.count_eval();
        let delta = cost_delta - prefix_gain;
        if delta < best_delta - TIE_EPS {
            best_delta = delta;
            best_kadd = kadd;
        }
    }
    let mut add: Vec<usize> = gains[..best_kadd].iter().map(|g| g.0).collect();
    add.sort_unstable();
    Ok((add, best_delta))
}

/// Quadratic-form machinery for the full/shrunken covariance path.
struct FullCovStep {
    weights: Vec<f64>, // Sigma^-1, h x h
    ln_det: f64,
    current_residual_bits: f64,
}

impl FullCovStep {
    fn new(cov: &NoiseCovEstimate, resid: &DataMatrix, n: usize) -> Result<Self> {
        let h = cov.n_responses();
        let chol = cholesky(cov.matrix(), h, 1e-12).map_err(|_| Error::SingularCovariance)?;
        let mut weights = vec![0.0; h * h];
        for j in 0..h {
            let mut e = vec![0.0; h];
            e[j] = 1.0;
            let col = chol.solve(&e);
            for i in 0..h {
                weights[i * h + j] = col[i];
            }
        }
        let current_residual_bits = residual_cost_from_residuals(resid, cov, n)?;
        Ok(Self {
            weights,
            ln_det: chol.ln_det(),
            current_residual_bits,
        })
    }

    /// Residual bits for a trial residual matrix given its Gram matrix M = R'R.
    fn residual_bits_from_gram(&self, gram: &[f64], h: usize, n: usize) -> f64 {
        let mut quad = 0.0;
        for a in 0..h {
            for b in 0..h {
                quad += self.weights[a * h + b] * gram[a * h + b];
            }
        }
        (n as f64 * (h as f64 * (2.0 * std::f64::consts::PI).ln() + self.ln_det) + quad)
            / (2.0 * LN_2)
    }
}

/// Greedy subset search for one candidate under a non-diagonal covariance:
/// responses are added one at a time, re-evaluating the joint likelihood
/// after each addition, and the best prefix wins.
#[allow(clippy::too_many_arguments)]
fn full_cov_subset_scan(
    ctx: &RegressionContext,
    state: &SearchState,
    scheme: &CodingScheme,
    step: &FullCovStep,
    feature: usize,
    k0: usize,
    base_cost: f64,
    notes: &mut Vec<String>,
) -> Result<(Vec<usize>, f64)> {
    let h = ctx.h;
    let n = ctx.n;
    let resid = state.resid.as_ref().expect("full-cov search tracks residuals");
    // New residual columns for each eligible response.
    let mut new_cols: Vec<Option<Vec<f64>>> = vec![None; h];
    let mut eligible = Vec::new();
    for r in 0..h {
        if state.saturated[r] || state.selected[r].contains(&feature) {
            continue;
        }
        let mut feats = state.selected[r].clone();
        feats.push(feature);
        feats.sort_unstable();
        match ctx.solve_subset(r, &feats) {
            Ok((coef, _)) => {
                new_cols[r] = Some(ctx.residual_column(r, &feats, &coef));
                eligible.push(r);
            }
            Err(Error::SingularDesign { .. }) => {
                notes.push(format!(
                    "feature {feature} skipped for response {r}: collinear with the current design"
                ));
            }
            Err(e) => return Err(e),
        }
    }
    if eligible.is_empty() {
        return Ok((Vec::new(), 0.0));
    }

    // Working copy of the residual columns and Gram matrix.
    let mut cols: Vec<Vec<f64>> = (0..h).map(|r| resid.column(r)).collect();
    let mut gram = vec![0.0; h * h];
    for a in 0..h {
        for b in a..h {
            let v: f64 = cols[a].iter().zip(&cols[b]).map(|(p, q)| p * q).sum();
            gram[a * h + b] = v;
            gram[b * h + a] = v;
        }
    }

    let mut remaining = eligible;
    let mut chosen: Vec<usize> = Vec::new();
    let mut best_delta = 0.0;
    let mut best_prefix = 0usize;
    let mut kadd = 0usize;
    while !remaining.is_empty() {
        kadd += 1;
        let cost_delta = scheme.feature_cost(k0 + kadd)? - base_cost;
        // Try each remaining response in the current trial model.
        let mut best_r: Option<(usize, f64, f64)> = None; // (response, residual_bits, delta)
        for &r in &remaining {
            ctx.count_eval();
            let new_col = new_cols[r].as_ref().unwrap();
            let mut trial = gram.to_vec();
            for a in 0..h {
                let v: f64 = if a == r {
                    new_col.iter().map(|p| p * p).sum()
                } else {
                    cols[a].iter().zip(new_col).map(|(p, q)| p * q).sum()
                };
                trial[a * h + r] = v;
                trial[r * h + a] = v;
            }
            let bits = step.residual_bits_from_gram(&trial, h, n);
            let delta = bits - step.current_residual_bits + cost_delta;
            let better = match best_r {
                None => true,
                Some((br, _, bd)) => delta < bd - TIE_EPS || (delta < bd + TIE_EPS && r < br),
            };
            if better {
                best_r = Some((r, bits, delta));
            }
        }
        let (r, _bits, delta) = best_r.unwrap();
        // Commit r into the trial state and continue to k = h regardless of
        // whether this level improved; the subset-index term is not monotone.
        let new_col = new_cols[r].take().unwrap();
        for a in 0..h {
            let v: f64 = if a == r {
                new_col.iter().map(|p| p * p).sum()
            } else {
                cols[a].iter().zip(&new_col).map(|(p, q)| p * q).sum()
            };
            gram[a * h + r] = v;
            gram[r * h + a] = v;
        }
        cols[r] = new_col;
        chosen.push(r);
        remaining.retain(|&v| v != r);
        if delta < best_delta - TIE_EPS {
            best_delta = delta;
            best_prefix = kadd;
        }
    }
    let mut add = chosen[..best_prefix].to_vec();
    add.sort_unstable();
    Ok((add, best_delta))
}

// ---------------------------------------------------------------------------
// Drivers.
// ---------------------------------------------------------------------------

/// Stepwise selection on raw feature columns (no intercept column; the
/// intercept is fitted implicitly and transmitted free). `config.scheme.m`
/// and `.h` must match the data.
pub fn stepwise_select(
    x: &DataMatrix,
    y: &DataMatrix,
    config: &SearchConfig,
) -> Result<(CoefficientMatrix, SelectionLedger)> {
    config.cov_mode.validate()?;
    if config.top_t < 1 {
        return Err(Error::Config("top_t must be at least 1".into()));
    }
    let ctx = RegressionContext::new(x, y)?;
    if config.scheme.m != ctx.m || config.scheme.h != ctx.h {
        return Err(Error::Dimension(format!(
            "scheme sized for m={}, h={} but data is m={}, h={}",
            config.scheme.m, config.scheme.h, ctx.m, ctx.h
        )));
    }
    match config.scheme.kind {
        SchemeKind::Ric => stepwise_per_response(&ctx, config),
        SchemeKind::FullMic | SchemeKind::PartialMic => stepwise_joint(&ctx, config),
    }
}

fn default_max_steps(n: usize, m: usize) -> usize {
    (n / 2).min(m).max(1)
}

fn stepwise_joint(
    ctx: &RegressionContext,
    config: &SearchConfig,
) -> Result<(CoefficientMatrix, SelectionLedger)> {
    let scheme = &config.scheme;
    let track_resid = config.cov_mode != CovMode::Diagonal;
    let mut state = SearchState::init(ctx, track_resid)?;
    let mut ledger = SelectionLedger::default();
    let max_steps = config.max_steps.unwrap_or_else(|| default_max_steps(ctx.n, ctx.m));

    ledger.initial_dl = state.residual_bits_self(ctx.n)? + state.model_bits(scheme)?;
    loop {
        if ledger.steps.len() >= max_steps {
            ledger.notes.push(format!("stopped at the step cap ({max_steps})"));
            break;
        }
        let model_bits = state.model_bits(scheme)?;
        let mut notes = Vec::new();
        let best = match config.cov_mode {
            CovMode::Diagonal => {
                let sigma2: Vec<f64> =
                    state.rss.iter().map(|&r| r / ctx.n as f64).collect();
                find_best_diagonal(ctx, &state, scheme, &sigma2, config, &mut notes)?
            }
            _ => {
                let resid = state.resid.as_ref().unwrap();
                let cov = estimate_noise_cov(resid, config.cov_mode)?;
                let step = FullCovStep::new(&cov, resid, ctx.n)?;
                find_best_full(ctx, &state, scheme, &step, config, &mut notes)?
            }
        };
        let residual_before = match config.cov_mode {
            CovMode::Diagonal => state.residual_bits_self(ctx.n)?,
            _ => {
                let resid = state.resid.as_ref().unwrap();
                let cov = estimate_noise_cov(resid, config.cov_mode)?;
                residual_cost_from_residuals(resid, &cov, ctx.n)?
            }
        };
        let dl_before = residual_before + model_bits;
        let accepted = match best {
            Some(c) if c.delta < -TIE_EPS => c,
            _ => {
                ledger.notes.extend(notes);
                break;
            }
        };
        state.commit(ctx, accepted.feature, &accepted.add, &mut notes)?;
        let model_after = state.model_bits(scheme)?;
        let dl_after = dl_before + accepted.delta;
        ledger.steps.push(LedgerStep {
            feature: accepted.feature,
            responses: accepted.add.clone(),
            dl_before,
            dl_after,
            residual_bits: dl_after - model_after,
            model_bits: model_after,
        });
        ledger.notes.extend(notes);
    }
    ledger.final_dl = state.residual_bits_self(ctx.n)? + state.model_bits(scheme)?;
    ledger.n_evaluations = ctx.evals();
    Ok((state.to_coefficients(ctx.m, ctx.h)?, ledger))
}

fn find_best_diagonal(
    ctx: &RegressionContext,
    state: &SearchState,
    scheme: &CodingScheme,
    sigma2: &[f64],
    config: &SearchConfig,
    notes: &mut Vec<String>,
) -> Result<Option<Candidate>> {
    // Likelihood gain of taking every eligible response, used both as the
    // full scheme's score and as the partial scheme's prefilter rank.
    let mut scored: Vec<(usize, Vec<(usize, f64, f64)>, f64)> = Vec::new();
    for f in 0..ctx.m {
        match scheme.kind {
            SchemeKind::FullMic if state.feature_k(f) > 0 => continue,
            _ => {}
        }
        let gains = diagonal_gains(ctx, state, sigma2, f, notes)?;
        if gains.is_empty() {
            continue;
        }
        let total: f64 = gains.iter().map(|g| g.1).sum();
        scored.push((f, gains, total));
    }
    let mut best: Option<Candidate> = None;
    match scheme.kind {
        SchemeKind::FullMic => {
            for (f, gains, total) in scored {
                ctx.count_eval();
                let delta = scheme.feature_cost(scheme.h)? - total;
                if best.as_ref().map_or(true, |b| delta < b.delta - TIE_EPS) {
                    best = Some(Candidate {
                        feature: f,
                        add: gains.iter().map(|g| g.0).collect(),
                        delta,
                    });
                }
            }
        }
        SchemeKind::PartialMic => {
            // Prefilter: keep the top_t features by all-response gain.
            if scored.len() > config.top_t {
                scored.sort_by(|a, b| b.2.partial_cmp(&a.2).unwrap().then(a.0.cmp(&b.0)));
                scored.truncate(config.top_t);
                scored.sort_by_key(|s| s.0);
            }
            for (f, mut gains, _) in scored {
                let k0 = state.feature_k(f);
                let base_cost = scheme.feature_cost(k0)?;
                let best_so_far = best.as_ref().map_or(f64::INFINITY, |b| b.delta);
                let (add, delta) = partial_subset_scan(
                    scheme,
                    &mut gains,
                    k0,
                    base_cost,
                    best_so_far,
                    config.short_circuit,
                    ctx,
                )?;
                if add.is_empty() {
                    continue;
                }
                if best.as_ref().map_or(true, |b| delta < b.delta - TIE_EPS) {
                    best = Some(Candidate { feature: f, add, delta });
                }
            }
        }
        SchemeKind::Ric => unreachable!("per-response scheme uses its own driver"),
    }
    Ok(best)
}

fn find_best_full(
    ctx: &RegressionContext,
    state: &SearchState,
    scheme: &CodingScheme,
    step: &FullCovStep,
    config: &SearchConfig,
    notes: &mut Vec<String>,
) -> Result<Option<Candidate>> {
    let h = ctx.h;
    let n = ctx.n;
    let mut best: Option<Candidate> = None;
    match scheme.kind {
        SchemeKind::FullMic => {
            for f in 0..ctx.m {
                if state.feature_k(f) > 0 {
                    continue;
                }
                // All eligible responses at once.
                let resid = state.resid.as_ref().unwrap();
                let mut cols: Vec<Vec<f64>> = (0..h).map(|r| resid.column(r)).collect();
                let mut any = false;
                for r in 0..h {
                    if state.saturated[r] || state.selected[r].contains(&f) {
                        continue;
                    }
                    let mut feats = state.selected[r].clone();
                    feats.push(f);
                    feats.sort_unstable();
                    match ctx.solve_subset(r, &feats) {
                        Ok((coef, _)) => {
                            cols[r] = ctx.residual_column(r, &feats, &coef);
                            any = true;
                        }
                        Err(Error::SingularDesign { .. }) => notes.push(format!(
                            "feature {f} skipped for response {r}: collinear with the current design"
                        )),
                        Err(e) => return Err(e),
                    }
                }
                if !any {
                    continue;
                }
                ctx.count_eval();
                let mut gram = vec![0.0; h * h];
                for a in 0..h {
                    for b in a..h {
                        let v: f64 = cols[a].iter().zip(&cols[b]).map(|(p, q)| p * q).sum();
                        gram[a * h + b] = v;
                        gram[b * h + a] = v;
                    }
                }
                let bits = step.residual_bits_from_gram(&gram, h, n);
                let delta = bits - step.current_residual_bits + scheme.feature_cost(scheme.h)?;
                let add: Vec<usize> = (0..h)
                    .filter(|&r| !state.saturated[r] && !state.selected[r].contains(&f))
                    .collect();
                if best.as_ref().map_or(true, |b| delta < b.delta - TIE_EPS) {
                    best = Some(Candidate { feature: f, add, delta });
                }
            }
        }
        SchemeKind::PartialMic => {
            // Prefilter by the all-response gain under the diagonal part of
            // the estimate (cheap rank, same spirit as the diagonal path).
            let sigma2: Vec<f64> = state.rss.iter().map(|&v| v / n as f64).collect();
            let mut ranked: Vec<(usize, f64)> = Vec::new();
            for f in 0..ctx.m {
                let mut tmp_notes = Vec::new();
                let gains = diagonal_gains(ctx, state, &sigma2, f, &mut tmp_notes)?;
                if gains.is_empty() {
                    continue;
                }
                ranked.push((f, gains.iter().map(|g| g.1).sum()));
            }
            if ranked.len() > config.top_t {
                ranked.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
                ranked.truncate(config.top_t);
                ranked.sort_by_key(|s| s.0);
            }
            for (f, _) in ranked {
                let k0 = state.feature_k(f);
                let base_cost = scheme.feature_cost(k0)?;
                let (add, delta) =
                    full_cov_subset_scan(ctx, state, scheme, step, f, k0, base_cost, notes)?;
                if add.is_empty() {
                    continue;
                }
                if best.as_ref().map_or(true, |b| delta < b.delta - TIE_EPS) {
                    best = Some(Candidate { feature: f, add, delta });
                }
            }
        }
        SchemeKind::Ric => unreachable!("per-response scheme uses its own driver"),
    }
    Ok(best)
}

fn stepwise_per_response(
    ctx: &RegressionContext,
    config: &SearchConfig,
) -> Result<(CoefficientMatrix, SelectionLedger)> {
    if config.cov_mode != CovMode::Diagonal {
        return Err(Error::Config(
            "the per-response scheme scores one response at a time and requires the diagonal covariance estimate".into(),
        ));
    }
    let scheme = &config.scheme;
    let per_feature = (scheme.m as f64).log2() + scheme.bits_per_coefficient;
    let mut state = SearchState::init(ctx, false)?;
    let mut ledger = SelectionLedger::default();
    let max_steps = config.max_steps.unwrap_or_else(|| default_max_steps(ctx.n, ctx.m));
    ledger.initial_dl = state.residual_bits_self(ctx.n)? + state.model_bits(scheme)?;
    let mut running_dl = ledger.initial_dl;

    for r in 0..ctx.h {
        let mut accepted = 0usize;
        loop {
            if state.saturated[r] {
                break;
            }
            if accepted >= max_steps {
                ledger
                    .notes
                    .push(format!("response {r}: stopped at the step cap ({max_steps})"));
                break;
            }
            let sigma2 = state.rss[r] / ctx.n as f64;
            let mut best: Option<(usize, f64, f64)> = None; // (feature, gain, rss_new)
            for f in 0..ctx.m {
                if state.selected[r].contains(&f) {
                    continue;
                }
                let mut feats = state.selected[r].clone();
                feats.push(f);
                feats.sort_unstable();
                ctx.count_eval();
                match ctx.solve_subset(r, &feats) {
                    Ok((_, rss_new)) => {
                        let gain = (state.rss[r] - rss_new) / (2.0 * LN_2 * sigma2);
                        if best.as_ref().map_or(true, |b| gain > b.1 + TIE_EPS) {
                            best = Some((f, gain, rss_new));
                        }
                    }
                    Err(Error::SingularDesign { .. }) => ledger.notes.push(format!(
                        "feature {f} skipped for response {r}: collinear with the current design"
                    )),
                    Err(e) => return Err(e),
                }
            }
            let (f, gain, _) = match best {
                Some(b) if b.1 > per_feature + TIE_EPS => b,
                _ => break,
            };
            let dl_before = running_dl;
            let mut notes = Vec::new();
            state.commit(ctx, f, &[r], &mut notes)?;
            ledger.notes.extend(notes);
            running_dl = dl_before - gain + per_feature;
            let model_after = state.model_bits(scheme)?;
            ledger.steps.push(LedgerStep {
                feature: f,
                responses: vec![r],
                dl_before,
                dl_after: running_dl,
                residual_bits: running_dl - model_after,
                model_bits: model_after,
            });
            accepted += 1;
            // Re-estimate the per-response variance for the next pass.
            running_dl = state.residual_bits_self(ctx.n)? + model_after;
        }
    }
    ledger.final_dl = state.residual_bits_self(ctx.n)? + state.model_bits(scheme)?;
    ledger.n_evaluations = ctx.evals();
    Ok((state.to_coefficients(ctx.m, ctx.h)?, ledger))
}

/// Best response subset for a candidate feature not yet in the model, under
/// the partial scheme: greedy additions scored against `cov` (estimated by
/// the caller from `beta_current`'s residuals), continued all the way to
/// k = h, returning the prefix with the smallest total description length.
///
/// The returned bits are the full description length of the model with the
/// candidate added for those responses; an empty subset returns the current
/// model's description length unchanged.
pub fn best_response_subset(
    x: &DataMatrix,
    y: &DataMatrix,
    beta_current: &CoefficientMatrix,
    candidate: usize,
    cov: &NoiseCovEstimate,
    scheme: &CodingScheme,
) -> Result<(Vec<usize>, f64)> {
    if scheme.kind != SchemeKind::PartialMic {
        return Err(Error::Config("response-subset search is defined for the partial scheme".into()));
    }
    if beta_current.response_count(candidate) > 0 {
        return Err(Error::Config(format!(
            "feature {candidate} is already in the model"
        )));
    }
    let ctx = RegressionContext::new(x, y)?;
    if candidate >= ctx.m {
        return Err(Error::Dimension(format!("candidate {candidate} out of range")));
    }
    // Rebuild the search state from the support of beta_current (refitting,
    // which is what the support invariant promises anyway).
    let track = cov.mode != CovMode::Diagonal;
    let mut state = SearchState::init(&ctx, track)?;
    let mut notes = Vec::new();
    for r in 0..ctx.h {
        let feats = beta_current.selected_features(r);
        if !feats.is_empty() {
            for &f in &feats {
                state.commit(&ctx, f, &[r], &mut notes)?;
            }
        }
    }
    let current_dl = match cov.mode {
        CovMode::Diagonal => {
            let mut bits = state.model_bits(scheme)?;
            for r in 0..ctx.h {
                let sigma2 = cov.entry(r, r);
                if !(sigma2 > 0.0) {
                    return Err(Error::DegenerateFit { response: r });
                }
                bits += residual_cost_single(sigma2 * ctx.n as f64, state.rss[r], ctx.n)?;
            }
            bits
        }
        _ => {
            let resid = state.resid.as_ref().unwrap();
            residual_cost_from_residuals(resid, cov, ctx.n)? + state.model_bits(scheme)?
        }
    };
    let k0 = 0usize;
    let base_cost = 0.0;
    let (add, delta) = match cov.mode {
        CovMode::Diagonal => {
            let sigma2: Vec<f64> = (0..ctx.h).map(|r| cov.entry(r, r)).collect();
            // Gains relative to the *provided* covariance, consistent with
            // the in-search scoring when sigma2 == rss/n.
            let mut gains = Vec::new();
            for r in 0..ctx.h {
                if state.saturated[r] {
                    continue;
                }
                let mut feats = state.selected[r].clone();
                feats.push(candidate);
                feats.sort_unstable();
                match ctx.solve_subset(r, &feats) {
                    Ok((_, rss_new)) => {
                        let gain = (state.rss[r] - rss_new) / (2.0 * LN_2 * sigma2[r]);
                        gains.push((r, gain.max(0.0), rss_new));
                    }
                    Err(Error::SingularDesign { .. }) => {}
                    Err(e) => return Err(e),
                }
            }
            partial_subset_scan(scheme, &mut gains, k0, base_cost, f64::INFINITY, false, &ctx)?
        }
        _ => {
            let resid = state.resid.as_ref().unwrap();
            let step = FullCovStep::new(cov, resid, ctx.n)?;
            full_cov_subset_scan(&ctx, &state, scheme, &step, candidate, k0, base_cost, &mut notes)?
        }
    };
    Ok((add, current_dl + delta))
}

// ---------------------------------------------------------------------------
// Classification pipeline.
// ---------------------------------------------------------------------------

/// Per-response classifier produced by [`classify_pipeline`]: a logistic fit
/// on the selected features, or a majority-label fallback for degenerate
/// responses.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResponseClassifier {
    pub response: usize,
    pub features: Vec<usize>,
    /// Intercept followed by one weight per feature in `features`.
    pub weights: Vec<f64>,
    pub converged: bool,
    /// Set when the training labels had a single class; prediction returns
    /// this label unconditionally.
    pub majority: Option<f64>,
}

impl ResponseClassifier {
    pub fn probability(&self, row: &[f64]) -> f64 {
        if let Some(label) = self.majority {
            return label;
        }
        let mut z = self.weights[0];
        for (j, &f) in self.features.iter().enumerate() {
            z += self.weights[j + 1] * row[f];
        }
        1.0 / (1.0 + (-z).exp())
    }

    /// 0/1 prediction at threshold 0.5.
    pub fn predict(&self, row: &[f64]) -> f64 {
        if self.probability(row) >= 0.5 {
            1.0
        } else {
            0.0
        }
    }
}

/// Run stepwise selection on 0/1 responses treated as reals, then refit each
/// response with logistic regression on its selected features.
pub fn classify_pipeline(
    x: &DataMatrix,
    y_binary: &DataMatrix,
    config: &SearchConfig,
) -> Result<(CoefficientMatrix, SelectionLedger, Vec<ResponseClassifier>)> {
    for r in 0..y_binary.ncols() {
        for i in 0..y_binary.nrows() {
            let v = y_binary.get(i, r);
            if v != 0.0 && v != 1.0 {
                return Err(Error::Domain(format!(
                    "response {r} is not binary at row {i} (value {v})"
                )));
            }
        }
    }
    let (beta, ledger) = stepwise_select(x, y_binary, config)?;
    let mut classifiers = Vec::with_capacity(y_binary.ncols());
    for r in 0..y_binary.ncols() {
        let features = beta.selected_features(r);
        let labels = y_binary.column(r);
        let ones = labels.iter().filter(|&&v| v == 1.0).count();
        if ones == 0 || ones == labels.len() {
            classifiers.push(ResponseClassifier {
                response: r,
                features,
                weights: Vec::new(),
                converged: true,
                majority: Some(if ones == 0 { 0.0 } else { 1.0 }),
            });
            continue;
        }
        let mut rows = Vec::with_capacity(x.nrows());
        for i in 0..x.nrows() {
            let mut row = Vec::with_capacity(features.len() + 1);
            row.push(1.0);
            for &f in &features {
                row.push(x.get(i, f));
            }
            rows.push(row);
        }
        let design = DataMatrix::from_rows(rows)?;
        let fit = logistic_refit(&design, &labels)?;
        classifiers.push(ResponseClassifier {
            response: r,
            features,
            weights: fit.coefficients,
            converged: fit.converged,
            majority: None,
        });
    }
    Ok((beta, ledger, classifiers))
}
