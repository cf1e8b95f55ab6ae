//! Multiple-testing procedures over an m x h grid of (feature, response)
//! hypotheses: classical Bonferroni and Benjamini-Hochberg step-up baselines
//! (per response or over the flattened matrix), their description-length
//! counterparts that test each feature independently with a shared-index
//! penalty, and the chi-square bridge between bit costs and significance
//! levels.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::coding::{compute_c_z, lg_choose, lg_star, CodingScheme, SchemeKind};
use crate::dist::chi_square_upper;
use crate::error::{Error, Result};
use crate::linalg::slope_p_value;
use crate::matrix::DataMatrix;
use crate::stepwise::RegressionContext;

const LN_2: f64 = std::f64::consts::LN_2;
const TIE_EPS: f64 = 1e-9;

/// m x h matrix of single-feature regression p-values.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PValueMatrix {
    m: usize,
    h: usize,
    values: Vec<f64>,
    /// Cells recorded as p = 1 because the feature column was constant.
    pub flagged: Vec<(usize, usize)>,
}

impl PValueMatrix {
    pub fn n_features(&self) -> usize {
        self.m
    }

    pub fn n_responses(&self) -> usize {
        self.h
    }

    pub fn get(&self, feature: usize, response: usize) -> f64 {
        self.values[feature * self.h + response]
    }

    pub fn from_values(values: Vec<f64>, m: usize, h: usize) -> Result<Self> {
        if values.len() != m * h {
            return Err(Error::Dimension(format!(
                "{} p-values cannot fill a {m}x{h} matrix",
                values.len()
            )));
        }
        if values.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return Err(Error::Domain("p-values must lie in [0, 1]".into()));
        }
        Ok(Self {
            m,
            h,
            values,
            flagged: Vec::new(),
        })
    }
}

/// Outcome of a testing procedure: the selected (feature, response) cells
/// plus procedure metadata.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HypothesisResult {
    pub support: BTreeSet<(usize, usize)>,
    /// Per-feature bits saved in the unpenalized pass (step-up procedure
    /// only; zero for features that selected nothing).
    pub bits_saved: Option<Vec<f64>>,
    /// Support after the unpenalized pass, before the rank cutoff.
    pub phase1_support: Option<BTreeSet<(usize, usize)>>,
    pub procedure: String,
    pub notes: Vec<String>,
}

impl HypothesisResult {
    fn new(procedure: String) -> Self {
        Self {
            support: BTreeSet::new(),
            bits_saved: None,
            phase1_support: None,
            procedure,
            notes: Vec::new(),
        }
    }

    pub fn selected_features(&self) -> BTreeSet<usize> {
        self.support.iter().map(|&(f, _)| f).collect()
    }
}

/// Per-cell slope p-values: cell (j, r) regresses response r on feature j
/// plus an intercept. Constant features get p = 1 with a flag rather than
/// an error so one bad column cannot sink a whole scan.
pub fn pvalue_matrix(x: &DataMatrix, y: &DataMatrix) -> Result<PValueMatrix> {
    if x.nrows() != y.nrows() {
        return Err(Error::Dimension(format!(
            "features have {} rows, responses {}",
            x.nrows(),
            y.nrows()
        )));
    }
    let m = x.ncols();
    let h = y.ncols();
    let mut values = vec![1.0; m * h];
    let mut flagged = Vec::new();
    for f in 0..m {
        let col = x.column(f);
        for r in 0..h {
            let resp = y.column(r);
            match slope_p_value(&col, &resp) {
                Ok(p) => values[f * h + r] = p,
                Err(Error::Degenerate(_)) => {
                    values[f * h + r] = 1.0;
                    flagged.push((f, r));
                }
                Err(e) => return Err(e),
            }
        }
    }
    Ok(PValueMatrix {
        m,
        h,
        values,
        flagged,
    })
}

fn check_alpha(alpha: f64) -> Result<()> {
    if !(alpha > 0.0) || !(alpha < 1.0) {
        return Err(Error::Domain(format!("alpha must lie in (0, 1), got {alpha}")));
    }
    Ok(())
}

/// Bonferroni selection: per response, keep cells with p <= alpha / m. In
/// matrix mode the threshold is alpha / (m h) over the whole grid.
pub fn bonferroni_select(
    p: &PValueMatrix,
    alpha: f64,
    matrix_mode: bool,
) -> Result<HypothesisResult> {
    check_alpha(alpha)?;
    let denom = if matrix_mode {
        (p.m * p.h) as f64
    } else {
        p.m as f64
    };
    let threshold = alpha / denom;
    let mut out = HypothesisResult::new(format!(
        "{}(alpha={alpha})",
        if matrix_mode { "bonferroni-matrix" } else { "bonferroni" }
    ));
    for f in 0..p.m {
        for r in 0..p.h {
            if p.get(f, r) <= threshold {
                out.support.insert((f, r));
            }
        }
    }
    Ok(out)
}

/// Benjamini-Hochberg step-up: per response, sort the m p-values and reject
/// the q smallest where q = max { j : p_(j) <= j alpha / m }. In matrix mode
/// one step-up runs over all m h values with denominator m h.
pub fn bh_select(p: &PValueMatrix, alpha: f64, matrix_mode: bool) -> Result<HypothesisResult> {
    check_alpha(alpha)?;
    let mut out = HypothesisResult::new(format!(
        "{}(alpha={alpha})",
        if matrix_mode { "bh-matrix" } else { "bh" }
    ));
    let step_up = |cells: &mut Vec<((usize, usize), f64)>, denom: f64| {
        cells.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap().then(a.0.cmp(&b.0)));
        let mut q = 0;
        for (idx, cell) in cells.iter().enumerate() {
            if cell.1 <= (idx + 1) as f64 * alpha / denom {
                q = idx + 1;
            }
        }
        cells[..q].iter().map(|c| c.0).collect::<Vec<_>>()
    };
    if matrix_mode {
        let mut cells: Vec<((usize, usize), f64)> = (0..p.m)
            .flat_map(|f| (0..p.h).map(move |r| ((f, r), 0.0)))
            .collect();
        for cell in cells.iter_mut() {
            cell.1 = p.get(cell.0 .0, cell.0 .1);
        }
        for c in step_up(&mut cells, (p.m * p.h) as f64) {
            out.support.insert(c);
        }
    } else {
        for r in 0..p.h {
            let mut cells: Vec<((usize, usize), f64)> =
                (0..p.m).map(|f| ((f, r), p.get(f, r))).collect();
            for c in step_up(&mut cells, p.m as f64) {
                out.support.insert(c);
            }
        }
    }
    Ok(out)
}

/// Per-feature likelihood gains (bits) against the intercept-only baseline,
/// with the diagonal variance fixed from the intercept-only residuals.
/// Returns (response, gain) pairs; rank-deficient cells are skipped.
fn single_feature_gains(
    ctx: &RegressionContext,
    feature: usize,
    sigma2: &[f64],
    syy: &[f64],
    notes: &mut Vec<String>,
) -> Result<Vec<(usize, f64)>> {
    let mut out = Vec::new();
    for r in 0..ctx.h {
        if !(sigma2[r] > 0.0) {
            continue;
        }
        match ctx.solve_subset(r, &[feature]) {
            Ok((_, rss_new)) => {
                let gain = (syy[r] - rss_new) / (2.0 * LN_2 * sigma2[r]);
                out.push((r, gain.max(0.0)));
            }
            Err(Error::SingularDesign { .. }) => {
                if r == 0 {
                    notes.push(format!("feature {feature} is constant; cells recorded as null"));
                }
            }
            Err(e) => return Err(e),
        }
    }
    Ok(out)
}

/// Best response subset for one feature given gains sorted descending:
/// maximize (sum of top-k gains) - cost(k). Returns (responses, saving).
fn best_subset_for_feature(
    gains: &mut Vec<(usize, f64)>,
    cost: impl Fn(usize) -> Result<f64>,
) -> Result<(Vec<usize>, f64)> {
    gains.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap().then(a.0.cmp(&b.0)));
    let mut best_saving = 0.0;
    let mut best_k = 0usize;
    let mut prefix = 0.0;
    for (idx, g) in gains.iter().enumerate() {
        let k = idx + 1;
        prefix += g.1;
        let saving = prefix - cost(k)?;
        if saving > best_saving + TIE_EPS {
            best_saving = saving;
            best_k = k;
        }
    }
    let mut subset: Vec<usize> = gains[..best_k].iter().map(|g| g.0).collect();
    subset.sort_unstable();
    Ok((subset, best_saving))
}

fn check_mic_scheme(scheme: &CodingScheme) -> Result<()> {
    if scheme.kind == SchemeKind::Ric {
        return Err(Error::Config(
            "feature-index testing requires a shared-index scheme (full or partial)".into(),
        ));
    }
    Ok(())
}

/// Independent per-feature selection with the feature-index penalty: a
/// feature enters (with its best response subset) iff coding it saves bits
/// over the intercept-only null. `scheme.m` is the penalty's feature count,
/// normally the number of columns of `x`.
pub fn bonferroni_mic(
    x: &DataMatrix,
    y: &DataMatrix,
    scheme: &CodingScheme,
) -> Result<HypothesisResult> {
    check_mic_scheme(scheme)?;
    let ctx = RegressionContext::new(x, y)?;
    if scheme.h != ctx.h {
        return Err(Error::Dimension(format!(
            "scheme sized for h={} but data has {} responses",
            scheme.h, ctx.h
        )));
    }
    let mut out = HypothesisResult::new(format!(
        "bonf-mic({},bpc={})",
        scheme.kind.as_str(),
        scheme.bits_per_coefficient
    ));
    let syy: Vec<f64> = (0..ctx.h).map(|r| ctx.syy(r)).collect();
    let sigma2: Vec<f64> = syy.iter().map(|&s| s / ctx.n as f64).collect();
    let lg_m = (scheme.m as f64).log2();
    for f in 0..ctx.m {
        let mut gains = single_feature_gains(&ctx, f, &sigma2, &syy, &mut out.notes)?;
        if gains.is_empty() {
            continue;
        }
        let (subset, saving) = match scheme.kind {
            SchemeKind::FullMic => {
                let total: f64 = gains.iter().map(|g| g.1).sum();
                let saving = total - (lg_m + scheme.bits_per_coefficient * scheme.h as f64);
                let subset: Vec<usize> = gains.iter().map(|g| g.0).collect();
                (subset, saving)
            }
            SchemeKind::PartialMic => {
                best_subset_for_feature(&mut gains, |k| Ok(lg_m + subset_code_bits(scheme, k)?))?
            }
            SchemeKind::Ric => unreachable!(),
        };
        if saving > 0.0 {
            for r in subset {
                out.support.insert((f, r));
            }
        }
    }
    Ok(out)
}

/// Coefficient plus response-subset bits for the partial scheme, without
/// the feature-index term.
fn subset_code_bits(scheme: &CodingScheme, k: usize) -> Result<f64> {
    Ok(scheme.bits_per_coefficient * k as f64
        + lg_star(k as u64)?
        + scheme.subset_constant()
        + lg_choose(scheme.h, k))
}

/// Rank cutoff of the step-up procedure: given per-feature savings sorted
/// descending, pick q maximizing sum_{i<=q} s_(i) - (lg* q + c_m + lg C(m, q)),
/// or 0 when no q is positive. Ties go to the smaller q.
fn step_up_cutoff(sorted_savings: &[f64], m: usize) -> Result<usize> {
    let c_m = compute_c_z(m as u64)?;
    let mut best_q = 0usize;
    let mut best_net = 0.0;
    let mut prefix = 0.0;
    for (idx, s) in sorted_savings.iter().enumerate() {
        let q = idx + 1;
        prefix += s;
        let net = prefix - (lg_star(q as u64)? + c_m + lg_choose(m, q));
        if net > best_net + TIE_EPS {
            best_net = net;
            best_q = q;
        }
    }
    Ok(best_q)
}

/// Step-up variant: phase one selects per-feature response subsets with no
/// feature-index cost, recording the bits saved; phase two keeps only the
/// q* best features under the subset-of-features code and zeroes out the
/// rest (their response subsets are unchanged).
pub fn bh_mic(x: &DataMatrix, y: &DataMatrix, scheme: &CodingScheme) -> Result<HypothesisResult> {
    check_mic_scheme(scheme)?;
    let ctx = RegressionContext::new(x, y)?;
    if scheme.h != ctx.h {
        return Err(Error::Dimension(format!(
            "scheme sized for h={} but data has {} responses",
            scheme.h, ctx.h
        )));
    }
    let mut out = HypothesisResult::new(format!(
        "bh-mic({},bpc={})",
        scheme.kind.as_str(),
        scheme.bits_per_coefficient
    ));
    let syy: Vec<f64> = (0..ctx.h).map(|r| ctx.syy(r)).collect();
    let sigma2: Vec<f64> = syy.iter().map(|&s| s / ctx.n as f64).collect();
    let mut savings = vec![0.0; ctx.m];
    let mut subsets: Vec<Vec<usize>> = vec![Vec::new(); ctx.m];
    for f in 0..ctx.m {
        let mut gains = single_feature_gains(&ctx, f, &sigma2, &syy, &mut out.notes)?;
        if gains.is_empty() {
            continue;
        }
        let (subset, saving) = match scheme.kind {
            SchemeKind::FullMic => {
                let total: f64 = gains.iter().map(|g| g.1).sum();
                (
                    gains.iter().map(|g| g.0).collect(),
                    total - scheme.bits_per_coefficient * scheme.h as f64,
                )
            }
            SchemeKind::PartialMic => {
                best_subset_for_feature(&mut gains, |k| subset_code_bits(scheme, k))?
            }
            SchemeKind::Ric => unreachable!(),
        };
        if saving > 0.0 {
            savings[f] = saving;
            subsets[f] = subset;
        }
    }
    let phase1: BTreeSet<(usize, usize)> = subsets
        .iter()
        .enumerate()
        .flat_map(|(f, subset)| subset.iter().map(move |&r| (f, r)))
        .collect();

    // Rank features by savings (ties to the lower index) and trim.
    let mut order: Vec<usize> = (0..ctx.m).filter(|&f| savings[f] > 0.0).collect();
    order.sort_by(|&a, &b| savings[b].partial_cmp(&savings[a]).unwrap().then(a.cmp(&b)));
    let sorted: Vec<f64> = order.iter().map(|&f| savings[f]).collect();
    let q_star = step_up_cutoff(&sorted, scheme.m)?;
    for &f in order.iter().take(q_star) {
        for &r in &subsets[f] {
            out.support.insert((f, r));
        }
    }
    out.bits_saved = Some(savings);
    out.phase1_support = Some(phase1);
    Ok(out)
}

/// Significance level implied by requiring a description-length drop of
/// `delta_c` bits with `dof` extra parameters: the chi-square upper tail at
/// (2 ln 2) delta_c.
pub fn implied_alpha(delta_c: f64, dof: u32) -> Result<f64> {
    if !(delta_c >= 0.0) {
        return Err(Error::Domain(format!("bit cost must be nonnegative, got {delta_c}")));
    }
    chi_square_upper(2.0 * LN_2 * delta_c, dof)
}

/// Classical p-value of an observed log-likelihood-ratio gain of
/// `neg_lg_lambda` bits: 1 - F_chi2(dof)((2 ln 2) neg_lg_lambda).
pub fn lambda_to_pvalue(neg_lg_lambda: f64, dof: u32) -> Result<f64> {
    if !(neg_lg_lambda >= 0.0) {
        return Err(Error::Domain(format!(
            "log-likelihood ratio gain must be nonnegative, got {neg_lg_lambda}"
        )));
    }
    chi_square_upper(2.0 * LN_2 * neg_lg_lambda, dof)
}
