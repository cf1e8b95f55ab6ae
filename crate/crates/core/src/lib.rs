//! Feature selection for single- and multi-response linear regression by
//! minimizing description length, with the shared-index coding schemes that
//! let one feature pay its index cost once across many responses.
//!
//! The crate covers four layers:
//!
//! - [`linalg`]: OLS fits, slope t-test p-values, and logistic refits.
//! - [`coding`]: universal integer codes and the residual/model bit costs.
//! - [`stepwise`] / [`hypothesis`]: greedy selection for prediction and
//!   independent per-feature testing with Bonferroni- and step-up-style
//!   feature penalties.
//! - [`synth`] / [`harness`] / [`io`]: seeded benchmark generators, the
//!   experiment runner with precision/recall scoring, and file formats.

pub mod coding;
pub mod dist;
pub mod error;
pub mod harness;
pub mod hypothesis;
pub mod io;
pub mod linalg;
pub mod matrix;
pub mod model;
pub mod stepwise;
pub mod synth;

pub use coding::{
    compute_c_z, estimate_noise_cov, feature_model_cost, lg_star, residual_cost_multi,
    residual_cost_single, universal_cost, CodingScheme, CovMode, NoiseCovEstimate, SchemeKind,
    UniversalCodeTable,
};
pub use error::{Error, Result};
pub use harness::{
    classification_test_error, kfold_indices, precision_matched_sweep, regression_test_error,
    run_experiment, score_selection, score_support, ExperimentPlan, ExperimentTable,
    GeneratorSpec, MethodSpec, MetricReport, SweepParam, SweepSpec,
};
pub use hypothesis::{
    bh_mic, bh_select, bonferroni_mic, bonferroni_select, implied_alpha, lambda_to_pvalue,
    pvalue_matrix, HypothesisResult, PValueMatrix,
};
pub use linalg::{logistic_refit, ols_fit, slope_p_value, LogisticFit, OlsFit};
pub use matrix::DataMatrix;
pub use model::CoefficientMatrix;
pub use stepwise::{
    best_response_subset, classify_pipeline, description_length, description_length_parts,
    stepwise_select, ResponseClassifier, SearchConfig, SelectionLedger,
};
pub use synth::{
    binarize, gen_scenario, gen_yeast_sim, CovVariant, ScenarioKind, ScenarioSpec,
    SyntheticInstance, YeastSimSpec,
};
