//! Experiment orchestration: precision/recall scoring against generating
//! coefficients, refit-based test errors, multi-replicate aggregation with
//! standard errors, cross-validation folds, and precision-matched parameter
//! sweeps.

use std::collections::BTreeSet;
use std::fmt;
use std::path::PathBuf;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::coding::{CodingScheme, CovMode, SchemeKind};
use crate::error::{Error, Result};
use crate::hypothesis::{bh_mic, bh_select, bonferroni_mic, bonferroni_select, pvalue_matrix};
use crate::linalg::logistic_refit;
use crate::matrix::DataMatrix;
use crate::model::CoefficientMatrix;
use crate::stepwise::{stepwise_select, ResponseClassifier, SearchConfig};
use crate::synth::{binarize, gen_scenario, gen_yeast_sim, ScenarioSpec, SyntheticInstance, YeastSimSpec};

pub type SupportSet = BTreeSet<(usize, usize)>;

/// Per-run metrics. Coefficient-level precision/recall are kept per
/// response (the aggregation unit), feature-level metrics per dataset.
/// Precision is absent (None), never zero, when nothing was selected.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MetricReport {
    pub test_error: Option<Vec<f64>>,
    pub train_error: Option<Vec<f64>>,
    pub coeff_precision: Vec<Option<f64>>,
    pub coeff_recall: Vec<Option<f64>>,
    pub feat_precision: Option<f64>,
    pub feat_recall: Option<f64>,
    pub n_coeff_selected: usize,
    pub n_feat_selected: usize,
}

impl MetricReport {
    pub fn mean_coeff_precision(&self) -> Option<f64> {
        mean_of(self.coeff_precision.iter().flatten().copied())
    }

    pub fn mean_coeff_recall(&self) -> Option<f64> {
        mean_of(self.coeff_recall.iter().flatten().copied())
    }

    pub fn mean_test_error(&self) -> Option<f64> {
        self.test_error.as_ref().and_then(|v| mean_of(v.iter().copied()))
    }
}

fn mean_of(values: impl Iterator<Item = f64>) -> Option<f64> {
    let mut sum = 0.0;
    let mut count = 0usize;
    for v in values {
        sum += v;
        count += 1;
    }
    if count == 0 {
        None
    } else {
        Some(sum / count as f64)
    }
}

/// Score an estimated support against the generating support.
/// Coefficient-level counts are per response; feature-level counts compare
/// whole rows (any nonzero in the row).
pub fn score_support(est: &SupportSet, truth: &SupportSet, m: usize, h: usize) -> MetricReport {
    let mut coeff_precision = Vec::with_capacity(h);
    let mut coeff_recall = Vec::with_capacity(h);
    for r in 0..h {
        let est_r: BTreeSet<usize> = est.iter().filter(|&&(_, rr)| rr == r).map(|&(f, _)| f).collect();
        let true_r: BTreeSet<usize> =
            truth.iter().filter(|&&(_, rr)| rr == r).map(|&(f, _)| f).collect();
        let tp = est_r.intersection(&true_r).count();
        coeff_precision.push(if est_r.is_empty() {
            None
        } else {
            Some(tp as f64 / est_r.len() as f64)
        });
        coeff_recall.push(if true_r.is_empty() {
            None
        } else {
            Some(tp as f64 / true_r.len() as f64)
        });
    }
    let est_rows: BTreeSet<usize> = est.iter().map(|&(f, _)| f).collect();
    let true_rows: BTreeSet<usize> = truth.iter().map(|&(f, _)| f).collect();
    let row_tp = est_rows.intersection(&true_rows).count();
    let feat_precision = if est_rows.is_empty() {
        None
    } else {
        Some(row_tp as f64 / est_rows.len() as f64)
    };
    let feat_recall = if true_rows.is_empty() {
        None
    } else {
        Some(row_tp as f64 / true_rows.len() as f64)
    };
    let _ = m;
    MetricReport {
        test_error: None,
        train_error: None,
        coeff_precision,
        coeff_recall,
        feat_precision,
        feat_recall,
        n_coeff_selected: est.len(),
        n_feat_selected: est_rows.len(),
    }
}

/// Convenience wrapper scoring one coefficient matrix against another.
pub fn score_selection(beta_hat: &CoefficientMatrix, beta_true: &CoefficientMatrix) -> MetricReport {
    score_support(
        &beta_hat.support(),
        &beta_true.support(),
        beta_true.n_features(),
        beta_true.n_responses(),
    )
}

/// Per-response root-mean-square prediction error of an OLS refit on
/// exactly the selected features (plus an intercept): sqrt(SSE / n) on the
/// evaluation split. Collinear features are dropped from the refit.
pub fn regression_test_error(
    x_test: &DataMatrix,
    y_test: &DataMatrix,
    x_train: &DataMatrix,
    y_train: &DataMatrix,
    support: &[Vec<usize>],
) -> Result<Vec<f64>> {
    if support.len() != y_train.ncols() {
        return Err(Error::Dimension(format!(
            "{} support sets for {} responses",
            support.len(),
            y_train.ncols()
        )));
    }
    let ctx = crate::stepwise::RegressionContext::new(x_train, y_train)?;
    let n_test = x_test.nrows();
    if n_test == 0 {
        return Err(Error::Dimension("empty evaluation split".into()));
    }
    let mut out = Vec::with_capacity(support.len());
    for (r, feats) in support.iter().enumerate() {
        // Refit, dropping collinear columns one at a time if needed.
        let mut kept: Vec<usize> = Vec::new();
        let mut coef = vec![y_train.col_mean(r)];
        for &f in feats {
            let mut trial = kept.clone();
            trial.push(f);
            trial.sort_unstable();
            match ctx.solve_subset(r, &trial) {
                Ok((c, _)) => {
                    kept = trial;
                    coef = c;
                }
                Err(Error::SingularDesign { .. }) => {}
                Err(e) => return Err(e),
            }
        }
        let mut sse = 0.0;
        for i in 0..n_test {
            let mut pred = coef[0];
            for (j, &f) in kept.iter().enumerate() {
                pred += coef[j + 1] * x_test.get(i, f);
            }
            let diff = y_test.get(i, r) - pred;
            sse += diff * diff;
        }
        out.push((sse / n_test as f64).sqrt());
    }
    Ok(out)
}

/// Per-response 0/1 error of the classifiers at threshold 0.5.
pub fn classification_test_error(
    models: &[ResponseClassifier],
    x_test: &DataMatrix,
    y_test_binary: &DataMatrix,
) -> Vec<f64> {
    let n = x_test.nrows();
    models
        .iter()
        .map(|clf| {
            let mut wrong = 0usize;
            for i in 0..n {
                if clf.predict(x_test.row(i)) != y_test_binary.get(i, clf.response) {
                    wrong += 1;
                }
            }
            wrong as f64 / n as f64
        })
        .collect()
}

/// Logistic classifiers refit from arbitrary per-response supports
/// (majority-label fallback for single-class responses).
pub fn fit_support_classifiers(
    x: &DataMatrix,
    y_binary: &DataMatrix,
    support: &[Vec<usize>],
) -> Result<Vec<ResponseClassifier>> {
    let mut out = Vec::with_capacity(support.len());
    for (r, feats) in support.iter().enumerate() {
        let labels = y_binary.column(r);
        let ones = labels.iter().filter(|&&v| v == 1.0).count();
        if ones == 0 || ones == labels.len() {
            out.push(ResponseClassifier {
                response: r,
                features: feats.clone(),
                weights: Vec::new(),
                converged: true,
                majority: Some(if ones == 0 { 0.0 } else { 1.0 }),
            });
            continue;
        }
        let mut rows = Vec::with_capacity(x.nrows());
        for i in 0..x.nrows() {
            let mut row = Vec::with_capacity(feats.len() + 1);
            row.push(1.0);
            for &f in feats {
                row.push(x.get(i, f));
            }
            rows.push(row);
        }
        let fit = logistic_refit(&DataMatrix::from_rows(rows)?, &labels)?;
        out.push(ResponseClassifier {
            response: r,
            features: feats.clone(),
            weights: fit.coefficients,
            converged: fit.converged,
            majority: None,
        });
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// Experiment plans.
// ---------------------------------------------------------------------------

/// Data source for an experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case")]
pub enum GeneratorSpec {
    Scenario(ScenarioSpec),
    YeastSim(YeastSimSpec),
    /// Real data from CSV files, evaluated by K-fold cross-validation
    /// (contiguous blocks, optional seeded shuffle). No generating
    /// coefficients, so precision/recall are absent.
    CsvData {
        x: PathBuf,
        y: PathBuf,
        #[serde(default = "default_folds")]
        folds: usize,
        #[serde(default)]
        shuffle_seed: Option<u64>,
    },
}

fn default_folds() -> usize {
    5
}

/// A selection or testing procedure plus its parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum MethodSpec {
    /// Oracle: select exactly the generating support.
    TrueModel,
    Stepwise {
        scheme: SchemeKind,
        #[serde(default = "default_bpc")]
        bpc: f64,
        #[serde(default)]
        cov: Option<CovMode>,
        #[serde(default = "default_top_t")]
        top_t: usize,
        #[serde(default)]
        max_steps: Option<usize>,
    },
    Bonferroni {
        alpha: f64,
        #[serde(default)]
        matrix: bool,
    },
    #[serde(rename = "bh")]
    BenjaminiHochberg {
        alpha: f64,
        #[serde(default)]
        matrix: bool,
    },
    BonfMic {
        scheme: SchemeKind,
        #[serde(default = "default_bpc")]
        bpc: f64,
    },
    BhMic {
        scheme: SchemeKind,
        #[serde(default = "default_bpc")]
        bpc: f64,
    },
}

fn default_bpc() -> f64 {
    2.0
}

fn default_top_t() -> usize {
    75
}

impl fmt::Display for MethodSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MethodSpec::TrueModel => write!(f, "true-model"),
            MethodSpec::Stepwise { scheme, bpc, .. } => {
                write!(f, "stepwise({},bpc={bpc})", scheme.as_str())
            }
            MethodSpec::Bonferroni { alpha, matrix } => {
                write!(f, "bonferroni{}(alpha={alpha})", if *matrix { "-matrix" } else { "" })
            }
            MethodSpec::BenjaminiHochberg { alpha, matrix } => {
                write!(f, "bh{}(alpha={alpha})", if *matrix { "-matrix" } else { "" })
            }
            MethodSpec::BonfMic { scheme, bpc } => {
                write!(f, "bonf-mic({},bpc={bpc})", scheme.as_str())
            }
            MethodSpec::BhMic { scheme, bpc } => {
                write!(f, "bh-mic({},bpc={bpc})", scheme.as_str())
            }
        }
    }
}

/// An experiment: one generator, several methods, aggregated over
/// replicates. `binarize` switches to the classification pipeline
/// (responses thresholded at their column means, logistic refits, 0/1 test
/// error).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub generator: GeneratorSpec,
    pub methods: Vec<MethodSpec>,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
    #[serde(default)]
    pub test_size: usize,
    #[serde(default)]
    pub binarize: bool,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_threads")]
    pub threads: usize,
}

fn default_replicates() -> usize {
    1
}

fn default_threads() -> usize {
    1
}

/// Mean and standard error (sd / sqrt(count)) over aggregation cells.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub mean: f64,
    pub stderr: f64,
    pub count: usize,
}

fn aggregate(values: &[f64]) -> Option<Aggregate> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = if values.len() < 2 {
        0.0
    } else {
        values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1.0)
    };
    Some(Aggregate {
        mean,
        stderr: (var / n).sqrt(),
        count: values.len(),
    })
}

/// Aggregated results for one method. Coefficient metrics and errors
/// aggregate over response x replicate cells; feature metrics and selection
/// counts over replicates.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: String,
    pub test_error: Option<Aggregate>,
    pub train_error: Option<Aggregate>,
    pub coeff_precision: Option<Aggregate>,
    pub coeff_recall: Option<Aggregate>,
    pub feat_precision: Option<Aggregate>,
    pub feat_recall: Option<Aggregate>,
    pub n_coeff_selected: Option<Aggregate>,
    pub n_feat_selected: Option<Aggregate>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentTable {
    pub methods: Vec<MethodSummary>,
    pub replicates: usize,
    /// Replicate failures, recorded rather than fatal.
    pub errors: Vec<String>,
}

impl ExperimentTable {
    pub fn summary(&self, method_index: usize) -> &MethodSummary {
        &self.methods[method_index]
    }
}

struct ReplicateData {
    x_train: DataMatrix,
    y_train: DataMatrix,
    x_test: DataMatrix,
    y_test: DataMatrix,
    truth: Option<SupportSet>,
}

fn replicate_seed(base: u64, idx: usize) -> u64 {
    base.wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(idx as u64)
}

fn build_replicate(plan: &ExperimentPlan, idx: usize) -> Result<ReplicateData> {
    match &plan.generator {
        GeneratorSpec::Scenario(spec) => {
            let mut spec = spec.clone();
            spec.seed = replicate_seed(plan.seed ^ spec.seed, idx);
            if plan.test_size > 0 {
                spec.test_size = plan.test_size;
            }
            let inst = gen_scenario(&spec)?;
            Ok(instance_to_replicate(inst, plan.binarize))
        }
        GeneratorSpec::YeastSim(spec) => {
            let mut spec = spec.clone();
            spec.seed = replicate_seed(plan.seed ^ spec.seed, idx);
            if plan.test_size > 0 {
                spec.test_size = plan.test_size;
            }
            // Identity covariance source unless the caller provides data
            // through the library API.
            let mut cov = DataMatrix::zeros(spec.m, spec.m);
            for j in 0..spec.m {
                cov.set(j, j, 1.0);
            }
            let inst = gen_yeast_sim(&spec, None, Some(&cov))?;
            Ok(instance_to_replicate(inst, plan.binarize))
        }
        GeneratorSpec::CsvData {
            x,
            y,
            folds,
            shuffle_seed,
        } => {
            let xm = crate::io::read_matrix_csv(x)?;
            let ym = crate::io::read_matrix_csv(y)?;
            if xm.nrows() != ym.nrows() {
                return Err(Error::Dimension(format!(
                    "x has {} rows but y has {}",
                    xm.nrows(),
                    ym.nrows()
                )));
            }
            let folds_idx = kfold_indices(xm.nrows(), *folds, *shuffle_seed)?;
            let (train_idx, test_idx) = &folds_idx[idx % folds_idx.len()];
            let take = |mat: &DataMatrix, idx: &[usize]| {
                let mut out = DataMatrix::zeros(idx.len(), mat.ncols());
                for (i, &src) in idx.iter().enumerate() {
                    for j in 0..mat.ncols() {
                        out.set(i, j, mat.get(src, j));
                    }
                }
                out
            };
            let mut data = ReplicateData {
                x_train: take(&xm, train_idx),
                y_train: take(&ym, train_idx),
                x_test: take(&xm, test_idx),
                y_test: take(&ym, test_idx),
                truth: None,
            };
            if plan.binarize {
                data.y_train = binarize(&data.y_train).0;
                data.y_test = binarize(&data.y_test).0;
            }
            Ok(data)
        }
    }
}

fn instance_to_replicate(inst: SyntheticInstance, do_binarize: bool) -> ReplicateData {
    let truth = Some(inst.beta_true.support());
    if do_binarize {
        let (b, _) = inst.binarized();
        ReplicateData {
            x_train: b.x_train,
            y_train: b.y_train,
            x_test: b.x_test,
            y_test: b.y_test,
            truth,
        }
    } else {
        ReplicateData {
            x_train: inst.x_train,
            y_train: inst.y_train,
            x_test: inst.x_test,
            y_test: inst.y_test,
            truth,
        }
    }
}

fn support_by_response(support: &SupportSet, h: usize) -> Vec<Vec<usize>> {
    let mut out = vec![Vec::new(); h];
    for &(f, r) in support {
        out[r].push(f);
    }
    out
}

/// Run one method on one replicate, producing its metric report.
fn run_method(plan: &ExperimentPlan, method: &MethodSpec, data: &ReplicateData) -> Result<MetricReport> {
    let m = data.x_train.ncols();
    let h = data.y_train.ncols();
    let support: SupportSet = match method {
        MethodSpec::TrueModel => data
            .truth
            .clone()
            .ok_or_else(|| Error::Config("true-model needs a generated dataset".into()))?,
        MethodSpec::Stepwise {
            scheme,
            bpc,
            cov,
            top_t,
            max_steps,
        } => {
            let mut config =
                SearchConfig::new(CodingScheme::with_bits(*scheme, m, h, *bpc)?);
            if let Some(cov) = cov {
                config.cov_mode = *cov;
            }
            config.top_t = *top_t;
            config.max_steps = *max_steps;
            let (beta, _) = stepwise_select(&data.x_train, &data.y_train, &config)?;
            beta.support()
        }
        MethodSpec::Bonferroni { alpha, matrix } => {
            let p = pvalue_matrix(&data.x_train, &data.y_train)?;
            bonferroni_select(&p, *alpha, *matrix)?.support
        }
        MethodSpec::BenjaminiHochberg { alpha, matrix } => {
            let p = pvalue_matrix(&data.x_train, &data.y_train)?;
            bh_select(&p, *alpha, *matrix)?.support
        }
        MethodSpec::BonfMic { scheme, bpc } => {
            bonferroni_mic(
                &data.x_train,
                &data.y_train,
                &CodingScheme::with_bits(*scheme, m, h, *bpc)?,
            )?
            .support
        }
        MethodSpec::BhMic { scheme, bpc } => {
            bh_mic(
                &data.x_train,
                &data.y_train,
                &CodingScheme::with_bits(*scheme, m, h, *bpc)?,
            )?
            .support
        }
    };

    let mut report = match &data.truth {
        Some(truth) => score_support(&support, truth, m, h),
        None => score_support(&support, &SupportSet::new(), m, h),
    };
    if data.truth.is_none() {
        // No generating coefficients: recall/precision are meaningless.
        report.coeff_precision = vec![None; h];
        report.coeff_recall = vec![None; h];
        report.feat_precision = None;
        report.feat_recall = None;
    }

    let by_response = support_by_response(&support, h);
    if data.x_test.nrows() > 0 {
        if plan.binarize {
            let models = fit_support_classifiers(&data.x_train, &data.y_train, &by_response)?;
            report.test_error = Some(classification_test_error(&models, &data.x_test, &data.y_test));
            report.train_error =
                Some(classification_test_error(&models, &data.x_train, &data.y_train));
        } else {
            report.test_error = Some(regression_test_error(
                &data.x_test,
                &data.y_test,
                &data.x_train,
                &data.y_train,
                &by_response,
            )?);
            report.train_error = Some(regression_test_error(
                &data.x_train,
                &data.y_train,
                &data.x_train,
                &data.y_train,
                &by_response,
            )?);
        }
    }
    Ok(report)
}

/// Run every method over every replicate and aggregate. Replicate failures
/// are recorded in `errors`; their cells are simply missing.
pub fn run_experiment(plan: &ExperimentPlan) -> Result<ExperimentTable> {
    if plan.replicates == 0 {
        return Err(Error::Config("need at least one replicate".into()));
    }
    if plan.methods.is_empty() {
        return Err(Error::Config("need at least one method".into()));
    }
    let threads = plan.threads.max(1);
    let n_methods = plan.methods.len();
    let mut per_replicate: Vec<std::result::Result<Vec<MetricReport>, String>> =
        Vec::with_capacity(plan.replicates);

    let run_one = |idx: usize| -> std::result::Result<Vec<MetricReport>, String> {
        let data = build_replicate(plan, idx).map_err(|e| format!("replicate {idx}: {e}"))?;
        plan.methods
            .iter()
            .map(|m| {
                run_method(plan, m, &data).map_err(|e| format!("replicate {idx}, {m}: {e}"))
            })
            .collect()
    };

    if threads <= 1 || plan.replicates == 1 {
        for idx in 0..plan.replicates {
            per_replicate.push(run_one(idx));
        }
    } else {
        let mut slots: Vec<Option<std::result::Result<Vec<MetricReport>, String>>> =
            (0..plan.replicates).map(|_| None).collect();
        std::thread::scope(|scope| {
            let chunks = slots.chunks_mut(plan.replicates.div_ceil(threads));
            for (chunk_no, chunk) in chunks.enumerate() {
                let base = chunk_no * plan.replicates.div_ceil(threads);
                let run_one = &run_one;
                scope.spawn(move || {
                    for (offset, slot) in chunk.iter_mut().enumerate() {
                        *slot = Some(run_one(base + offset));
                    }
                });
            }
        });
        per_replicate.extend(slots.into_iter().map(|s| s.expect("all slots filled")));
    }

    let mut errors = Vec::new();
    let mut method_reports: Vec<Vec<MetricReport>> = vec![Vec::new(); n_methods];
    for rep in per_replicate {
        match rep {
            Ok(reports) => {
                for (i, r) in reports.into_iter().enumerate() {
                    method_reports[i].push(r);
                }
            }
            Err(e) => errors.push(e),
        }
    }

    let methods = plan
        .methods
        .iter()
        .zip(method_reports)
        .map(|(spec, reports)| summarize_method(spec, &reports))
        .collect();
    Ok(ExperimentTable {
        methods,
        replicates: plan.replicates,
        errors,
    })
}

fn summarize_method(spec: &MethodSpec, reports: &[MetricReport]) -> MethodSummary {
    let cells = |f: &dyn Fn(&MetricReport) -> Vec<f64>| -> Vec<f64> {
        reports.iter().flat_map(|r| f(r)).collect()
    };
    let test_error = aggregate(&cells(&|r| r.test_error.clone().unwrap_or_default()));
    let train_error = aggregate(&cells(&|r| r.train_error.clone().unwrap_or_default()));
    let coeff_precision = aggregate(&cells(&|r| {
        r.coeff_precision.iter().flatten().copied().collect()
    }));
    let coeff_recall = aggregate(&cells(&|r| {
        r.coeff_recall.iter().flatten().copied().collect()
    }));
    let feat_precision = aggregate(&cells(&|r| r.feat_precision.into_iter().collect()));
    let feat_recall = aggregate(&cells(&|r| r.feat_recall.into_iter().collect()));
    let n_coeff = aggregate(&cells(&|r| vec![r.n_coeff_selected as f64]));
    let n_feat = aggregate(&cells(&|r| vec![r.n_feat_selected as f64]));
    MethodSummary {
        method: spec.to_string(),
        test_error,
        train_error,
        coeff_precision,
        coeff_recall,
        feat_precision,
        feat_recall,
        n_coeff_selected: n_coeff,
        n_feat_selected: n_feat,
    }
}

/// Contiguous-block K-fold split of 0..n, optionally over a seeded shuffle.
/// Returns (train, test) index pairs, one per fold.
pub fn kfold_indices(
    n: usize,
    k: usize,
    shuffle_seed: Option<u64>,
) -> Result<Vec<(Vec<usize>, Vec<usize>)>> {
    if k < 2 || k > n {
        return Err(Error::Config(format!("need 2 <= folds <= n, got k={k}, n={n}")));
    }
    let mut order: Vec<usize> = (0..n).collect();
    if let Some(seed) = shuffle_seed {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        order.shuffle(&mut rng);
    }
    let mut out = Vec::with_capacity(k);
    let base = n / k;
    let extra = n % k;
    let mut start = 0usize;
    for fold in 0..k {
        let len = base + usize::from(fold < extra);
        let test: Vec<usize> = order[start..start + len].to_vec();
        let train: Vec<usize> = order[..start]
            .iter()
            .chain(&order[start + len..])
            .copied()
            .collect();
        out.push((train, test));
        start += len;
    }
    Ok(out)
}

/// Which knob a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepParam {
    Alpha,
    BitsPerCoefficient,
}

/// A method template plus the grid of parameter values to try.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    pub template: MethodSpec,
    pub param: SweepParam,
    pub grid: Vec<f64>,
}

fn apply_param(template: &MethodSpec, param: SweepParam, value: f64) -> Result<MethodSpec> {
    let mut spec = template.clone();
    match (param, &mut spec) {
        (SweepParam::Alpha, MethodSpec::Bonferroni { alpha, .. })
        | (SweepParam::Alpha, MethodSpec::BenjaminiHochberg { alpha, .. }) => *alpha = value,
        (SweepParam::BitsPerCoefficient, MethodSpec::Stepwise { bpc, .. })
        | (SweepParam::BitsPerCoefficient, MethodSpec::BonfMic { bpc, .. })
        | (SweepParam::BitsPerCoefficient, MethodSpec::BhMic { bpc, .. }) => *bpc = value,
        _ => {
            return Err(Error::Config(format!(
                "parameter {param:?} does not apply to method {template}"
            )))
        }
    }
    Ok(spec)
}

/// One evaluated grid point.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepPoint {
    pub param: f64,
    pub summary: MethodSummary,
}

/// Result of a precision-matched sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepOutcome {
    pub reference: MethodSummary,
    pub points: Vec<SweepPoint>,
    /// Chosen grid value: highest mean coefficient precision not exceeding
    /// the reference precision.
    pub chosen: f64,
    pub chosen_method: MethodSpec,
    /// Set when no grid point had precision <= the reference, in which case
    /// the minimum-precision point is returned instead.
    pub flagged: bool,
}

/// Run `sweep.template` at every grid value and pick the one whose mean
/// coefficient precision is the largest value still at or below the
/// reference method's precision.
pub fn precision_matched_sweep(
    plan: &ExperimentPlan,
    reference: &MethodSpec,
    sweep: &SweepSpec,
) -> Result<SweepOutcome> {
    if sweep.grid.is_empty() {
        return Err(Error::Config("sweep grid must be nonempty".into()));
    }
    let mut ref_plan = plan.clone();
    ref_plan.methods = vec![reference.clone()];
    let ref_table = run_experiment(&ref_plan)?;
    let reference_summary = ref_table.methods.into_iter().next().unwrap();
    let ref_precision = reference_summary
        .coeff_precision
        .map(|a| a.mean)
        .ok_or_else(|| Error::Config("reference method selected nothing; no precision to match".into()))?;

    let mut points = Vec::with_capacity(sweep.grid.len());
    for &value in &sweep.grid {
        let method = apply_param(&sweep.template, sweep.param, value)?;
        let mut grid_plan = plan.clone();
        grid_plan.methods = vec![method];
        let table = run_experiment(&grid_plan)?;
        points.push(SweepPoint {
            param: value,
            summary: table.methods.into_iter().next().unwrap(),
        });
    }

    let mut chosen: Option<(f64, f64)> = None; // (param, precision)
    let mut fallback: Option<(f64, f64)> = None;
    for p in &points {
        let prec = match p.summary.coeff_precision {
            Some(a) => a.mean,
            None => continue,
        };
        if fallback.map_or(true, |(_, fp)| prec < fp) {
            fallback = Some((p.param, prec));
        }
        if prec <= ref_precision && chosen.map_or(true, |(_, cp)| prec > cp) {
            chosen = Some((p.param, prec));
        }
    }
    let (chosen, flagged) = match (chosen, fallback) {
        (Some((param, _)), _) => (param, false),
        (None, Some((param, _))) => (param, true),
        (None, None) => {
            return Err(Error::Config("no grid point produced a selection".into()))
        }
    };
    Ok(SweepOutcome {
        reference: reference_summary,
        points,
        chosen_method: apply_param(&sweep.template, sweep.param, chosen)?,
        chosen,
        flagged,
    })
}
