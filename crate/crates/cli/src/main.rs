//! Command-line driver: selection and testing on CSV matrices, synthetic
//! data generation, experiment plans, and precision-matched sweeps.
//!
//! Exit codes: 0 on success, 2 for usage errors, 1 for runtime errors.

mod config;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use config::Resolver;
use micsel::coding::{CodingScheme, CovMode, SchemeKind};
use micsel::error::{Error, Result};
use micsel::harness::{
    precision_matched_sweep, run_experiment, ExperimentPlan, MethodSpec, SweepSpec,
};
use micsel::hypothesis::{bh_mic, bh_select, bonferroni_mic, bonferroni_select, pvalue_matrix};
use micsel::io::{
    read_matrix_csv, render_report, write_matrix_csv, write_report, Report, ReportFormat,
    SupportTriple,
};
use micsel::matrix::DataMatrix;
use micsel::stepwise::{stepwise_select, SearchConfig};
use micsel::synth::{gen_scenario, gen_yeast_sim, ScenarioKind, ScenarioSpec, YeastSimSpec};

const ENV_HELP: &str = "Environment overrides: any long option can also be supplied as \
MICSEL_<OPTION> with dashes as underscores (e.g. MICSEL_BPC=0.5, MICSEL_SCHEME=full-mic). \
Precedence: command-line flag, then environment, then --config file, then the default.";

#[derive(Parser)]
#[command(
    name = "micsel",
    version,
    about = "Description-length feature selection and multiple testing for multi-response regression",
    after_help = ENV_HELP,
    subcommand_required = true,
    arg_required_else_help = true
)]
struct Cli {
    /// JSON config file consulted for options not given on the command line
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Stepwise selection on CSV feature/response matrices
    Select(SelectArgs),
    /// Multiple-testing procedures over (feature, response) hypotheses
    Test(TestArgs),
    /// Write a synthetic dataset to a directory
    Generate(GenerateArgs),
    /// Run an experiment plan (JSON) and aggregate over replicates
    Experiment(ExperimentArgs),
    /// Precision-matched parameter sweep against a reference method
    Sweep(SweepArgs),
}

#[derive(Args)]
struct SelectArgs {
    /// Feature matrix CSV (rows = observations, no intercept column)
    #[arg(long, visible_alias = "X")]
    x: Option<PathBuf>,
    /// Response matrix CSV
    #[arg(long, visible_alias = "Y")]
    y: Option<PathBuf>,
    /// Coding scheme: ric | full-mic | partial-mic
    #[arg(long)]
    scheme: Option<String>,
    /// Bits charged per nonzero coefficient
    #[arg(long)]
    bpc: Option<f64>,
    /// Residual covariance estimate: diagonal | full | shrunken
    #[arg(long)]
    cov: Option<String>,
    /// Shrinkage weight for --cov shrunken (1 = diagonal, 0 = full)
    #[arg(long)]
    lambda: Option<f64>,
    /// Prefilter width for the response-subset search
    #[arg(long)]
    top_t: Option<usize>,
    /// Cap on accepted steps
    #[arg(long)]
    max_steps: Option<usize>,
    /// Z-score feature columns before selection
    #[arg(long)]
    standardize: bool,
    #[arg(long)]
    seed: Option<u64>,
    /// Report path (stdout when omitted)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Report format: json | csv
    #[arg(long)]
    format: Option<String>,
}

#[derive(Args)]
struct TestArgs {
    #[arg(long, visible_alias = "X")]
    x: Option<PathBuf>,
    #[arg(long, visible_alias = "Y")]
    y: Option<PathBuf>,
    /// bonferroni | bonferroni-matrix | bh | bh-matrix | bonf-mic | bh-mic
    #[arg(long)]
    method: Option<String>,
    /// Significance level for the p-value procedures
    #[arg(long)]
    alpha: Option<f64>,
    /// Coding scheme for the description-length procedures
    #[arg(long)]
    scheme: Option<String>,
    #[arg(long)]
    bpc: Option<f64>,
    #[arg(long)]
    standardize: bool,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    format: Option<String>,
}

#[derive(Args)]
struct GenerateArgs {
    /// Scenario generator: partial | full | independent
    #[arg(long)]
    scenario: Option<String>,
    /// Use the summary-statistics simulator instead of a scenario
    #[arg(long)]
    yeast_sim: bool,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    h: Option<usize>,
    #[arg(long)]
    n: Option<usize>,
    /// Nonzero coefficients per response (scenario generator)
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    noise_var: Option<f64>,
    #[arg(long)]
    test_size: Option<usize>,
    /// Also write responses thresholded at their column means
    #[arg(long)]
    binarize: bool,
    /// Simulator: row activation probability
    #[arg(long)]
    f: Option<f64>,
    /// Simulator: Poisson rate of responses per active row
    #[arg(long)]
    a: Option<f64>,
    #[arg(long)]
    mu_beta: Option<f64>,
    #[arg(long)]
    sigma_beta: Option<f64>,
    /// Simulator: diag | half | full | original-x
    #[arg(long)]
    cov_variant: Option<String>,
    #[arg(long)]
    target_nonzeros: Option<usize>,
    /// Simulator: CSV feature matrix to derive the covariance from
    #[arg(long)]
    x_source: Option<PathBuf>,
    /// Simulator: CSV covariance matrix (m x m)
    #[arg(long)]
    cov_source: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Directory the dataset files are written into
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct ExperimentArgs {
    /// Experiment plan JSON
    #[arg(long)]
    plan: Option<PathBuf>,
    /// Override the plan seed
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads across replicates
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    format: Option<String>,
}

#[derive(Args)]
struct SweepArgs {
    /// Sweep plan JSON: {"plan": ..., "reference": ..., "sweep": ...}
    #[arg(long)]
    plan: Option<PathBuf>,
    /// Override the sweep grid (comma-separated values)
    #[arg(long)]
    grid: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    format: Option<String>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let resolver = Resolver::from_file(cli.config.as_deref())?;
    match cli.command {
        Command::Select(args) => run_select(args, &resolver),
        Command::Test(args) => run_test(args, &resolver),
        Command::Generate(args) => run_generate(args, &resolver),
        Command::Experiment(args) => run_experiment_cmd(args, &resolver),
        Command::Sweep(args) => run_sweep(args, &resolver),
    }
}

// ---------------------------------------------------------------------------
// Shared parsing helpers.
// ---------------------------------------------------------------------------

fn parse_scheme(raw: &str) -> Result<SchemeKind> {
    match raw {
        "ric" => Ok(SchemeKind::Ric),
        "full-mic" => Ok(SchemeKind::FullMic),
        "partial-mic" => Ok(SchemeKind::PartialMic),
        other => Err(Error::Config(format!(
            "scheme: expected ric | full-mic | partial-mic, got {other:?}"
        ))),
    }
}

fn parse_cov(raw: &str, lambda: f64) -> Result<CovMode> {
    match raw {
        "diagonal" => Ok(CovMode::Diagonal),
        "full" => Ok(CovMode::Full),
        "shrunken" => {
            let mode = CovMode::Shrunken(lambda);
            mode.validate()?;
            Ok(mode)
        }
        other => Err(Error::Config(format!(
            "cov: expected diagonal | full | shrunken, got {other:?}"
        ))),
    }
}

fn parse_format(raw: &str) -> Result<ReportFormat> {
    match raw {
        "json" => Ok(ReportFormat::Json),
        "csv" => Ok(ReportFormat::Csv),
        other => Err(Error::Config(format!("format: expected json | csv, got {other:?}"))),
    }
}

fn required<T>(value: Option<T>, key: &str) -> Result<T> {
    value.ok_or_else(|| Error::Config(format!("missing required option {key:?}")))
}

fn emit(report: &Report, format: ReportFormat, out: Option<&Path>) -> Result<()> {
    match out {
        Some(path) => write_report(report, format, path),
        None => {
            print!("{}", render_report(report, format)?);
            Ok(())
        }
    }
}

/// Z-score every column using its own mean and standard deviation; constant
/// columns are left centered only.
fn standardize_columns(x: &DataMatrix) -> DataMatrix {
    let n = x.nrows();
    let mut out = x.clone();
    for j in 0..x.ncols() {
        let mean = x.col_mean(j);
        let var = (0..n).map(|i| (x.get(i, j) - mean).powi(2)).sum::<f64>() / n as f64;
        let sd = var.sqrt();
        for i in 0..n {
            let v = x.get(i, j) - mean;
            out.set(i, j, if sd > 0.0 { v / sd } else { v });
        }
    }
    out
}

fn load_xy(
    x: Option<PathBuf>,
    y: Option<PathBuf>,
    standardize: bool,
    resolver: &Resolver,
    standardize_key: &str,
) -> Result<(DataMatrix, DataMatrix, bool, PathBuf, PathBuf)> {
    let x_path: PathBuf = required(resolver.get(x, "x")?, "x")?;
    let y_path: PathBuf = required(resolver.get(y, "y")?, "y")?;
    let mut xm = read_matrix_csv(&x_path)?;
    let ym = read_matrix_csv(&y_path)?;
    if xm.nrows() != ym.nrows() {
        return Err(Error::Dimension(format!(
            "x has {} rows but y has {}",
            xm.nrows(),
            ym.nrows()
        )));
    }
    let standardize = resolver.get_flag(standardize, standardize_key)?;
    if standardize {
        xm = standardize_columns(&xm);
    }
    Ok((xm, ym, standardize, x_path, y_path))
}

fn params_hash(params: &BTreeMap<String, serde_json::Value>, seed: u64) -> String {
    let canonical = serde_json::to_string(&(params, seed)).expect("params serialize");
    micsel::io::fnv1a_hex(canonical.as_bytes())
}

// ---------------------------------------------------------------------------
// select
// ---------------------------------------------------------------------------

fn run_select(args: SelectArgs, resolver: &Resolver) -> Result<()> {
    resolver.check_known_keys(&[
        "x", "y", "scheme", "bpc", "cov", "lambda", "top-t", "max-steps", "standardize", "seed",
        "out", "format",
    ])?;
    let (xm, ym, standardized, x_path, y_path) =
        load_xy(args.x, args.y, args.standardize, resolver, "standardize")?;
    let scheme_raw: String = resolver.get_or(args.scheme, "scheme", "partial-mic".to_string())?;
    let kind = parse_scheme(&scheme_raw)?;
    let bpc: f64 = resolver.get_or(args.bpc, "bpc", 2.0)?;
    let lambda: f64 = resolver.get_or(args.lambda, "lambda", 0.5)?;
    let cov_raw: String = resolver.get_or(args.cov, "cov", "diagonal".to_string())?;
    let cov = parse_cov(&cov_raw, lambda)?;
    let top_t: usize = resolver.get_or(args.top_t, "top-t", 75)?;
    let max_steps: Option<usize> = resolver.get(args.max_steps, "max-steps")?;
    let seed: u64 = resolver.get_or(args.seed, "seed", 0)?;
    let format = parse_format(&resolver.get_or(args.format, "format", "json".to_string())?)?;
    let out: Option<PathBuf> = resolver.get(args.out, "out")?;

    let mut config = SearchConfig::new(CodingScheme::with_bits(
        kind,
        xm.ncols(),
        ym.ncols(),
        bpc,
    )?);
    config.cov_mode = cov;
    config.top_t = top_t;
    config.max_steps = max_steps;
    let (beta, ledger) = stepwise_select(&xm, &ym, &config)?;

    let mut report = Report::new(format!("stepwise({},bpc={bpc})", kind.as_str()), seed);
    report.params = BTreeMap::from([
        ("scheme".into(), json!(scheme_raw)),
        ("bpc".into(), json!(bpc)),
        ("cov".into(), json!(cov_raw)),
        ("lambda".into(), json!(lambda)),
        ("top-t".into(), json!(top_t)),
        ("max-steps".into(), json!(max_steps)),
        ("standardize".into(), json!(standardized)),
        ("x".into(), json!(x_path.display().to_string())),
        ("y".into(), json!(y_path.display().to_string())),
    ]);
    report.metrics = BTreeMap::from([
        ("initial_dl_bits".into(), json!(ledger.initial_dl)),
        ("final_dl_bits".into(), json!(ledger.final_dl)),
        ("n_steps".into(), json!(ledger.steps.len())),
        ("n_coeff_selected".into(), json!(beta.n_nonzero())),
        ("n_feat_selected".into(), json!(beta.feature_rows().len())),
        ("n_evaluations".into(), json!(ledger.n_evaluations)),
    ]);
    report.support = beta
        .iter()
        .map(|(feature, response, value)| SupportTriple {
            feature,
            response,
            value,
        })
        .collect();
    report.config_hash = params_hash(&report.params, seed);
    report.ledger = Some(ledger);
    emit(&report, format, out.as_deref())
}

// ---------------------------------------------------------------------------
// test
// ---------------------------------------------------------------------------

fn run_test(args: TestArgs, resolver: &Resolver) -> Result<()> {
    resolver.check_known_keys(&[
        "x", "y", "method", "alpha", "scheme", "bpc", "standardize", "seed", "out", "format",
    ])?;
    let (xm, ym, standardized, x_path, y_path) =
        load_xy(args.x, args.y, args.standardize, resolver, "standardize")?;
    let method: String = required(resolver.get(args.method, "method")?, "method")?;
    let alpha: f64 = resolver.get_or(args.alpha, "alpha", 0.05)?;
    let scheme_raw: String = resolver.get_or(args.scheme, "scheme", "partial-mic".to_string())?;
    let bpc: f64 = resolver.get_or(args.bpc, "bpc", 2.0)?;
    let seed: u64 = resolver.get_or(args.seed, "seed", 0)?;
    let format = parse_format(&resolver.get_or(args.format, "format", "json".to_string())?)?;
    let out: Option<PathBuf> = resolver.get(args.out, "out")?;

    let result = match method.as_str() {
        "bonferroni" | "bonferroni-matrix" => {
            let p = pvalue_matrix(&xm, &ym)?;
            bonferroni_select(&p, alpha, method.ends_with("matrix"))?
        }
        "bh" | "bh-matrix" => {
            let p = pvalue_matrix(&xm, &ym)?;
            bh_select(&p, alpha, method.ends_with("matrix"))?
        }
        "bonf-mic" => {
            let scheme = CodingScheme::with_bits(parse_scheme(&scheme_raw)?, xm.ncols(), ym.ncols(), bpc)?;
            bonferroni_mic(&xm, &ym, &scheme)?
        }
        "bh-mic" => {
            let scheme = CodingScheme::with_bits(parse_scheme(&scheme_raw)?, xm.ncols(), ym.ncols(), bpc)?;
            bh_mic(&xm, &ym, &scheme)?
        }
        other => {
            return Err(Error::Config(format!(
                "method: expected bonferroni | bonferroni-matrix | bh | bh-matrix | bonf-mic | bh-mic, got {other:?}"
            )))
        }
    };

    // Report each selected cell with its single-feature slope estimate.
    let mut support = Vec::with_capacity(result.support.len());
    for &(f, r) in &result.support {
        let col = xm.column(f);
        let resp = ym.column(r);
        let design = DataMatrix::from_rows(
            col.iter().map(|&v| vec![1.0, v]).collect(),
        )?;
        let fit = micsel::linalg::ols_fit(&design, &resp)?;
        support.push(SupportTriple {
            feature: f,
            response: r,
            value: fit.coefficients[1],
        });
    }

    let mut report = Report::new(result.procedure.clone(), seed);
    report.params = BTreeMap::from([
        ("method".into(), json!(method)),
        ("alpha".into(), json!(alpha)),
        ("scheme".into(), json!(scheme_raw)),
        ("bpc".into(), json!(bpc)),
        ("standardize".into(), json!(standardized)),
        ("x".into(), json!(x_path.display().to_string())),
        ("y".into(), json!(y_path.display().to_string())),
    ]);
    report.metrics = BTreeMap::from([
        ("n_coeff_selected".into(), json!(result.support.len())),
        (
            "n_feat_selected".into(),
            json!(result.selected_features().len()),
        ),
        ("notes".into(), json!(result.notes)),
    ]);
    if let Some(bits) = &result.bits_saved {
        report.metrics.insert("bits_saved".into(), json!(bits));
    }
    report.support = support;
    report.config_hash = params_hash(&report.params, seed);
    emit(&report, format, out.as_deref())
}

// ---------------------------------------------------------------------------
// generate
// ---------------------------------------------------------------------------

fn parse_scenario(raw: &str) -> Result<ScenarioKind> {
    match raw {
        "partial" => Ok(ScenarioKind::Partial),
        "full" => Ok(ScenarioKind::Full),
        "independent" => Ok(ScenarioKind::Independent),
        other => Err(Error::Config(format!(
            "scenario: expected partial | full | independent, got {other:?}"
        ))),
    }
}

fn parse_cov_variant(raw: &str) -> Result<micsel::synth::CovVariant> {
    use micsel::synth::CovVariant;
    match raw {
        "diag" => Ok(CovVariant::Diag),
        "half" => Ok(CovVariant::Half),
        "full" => Ok(CovVariant::Full),
        "original-x" => Ok(CovVariant::OriginalX),
        other => Err(Error::Config(format!(
            "cov-variant: expected diag | half | full | original-x, got {other:?}"
        ))),
    }
}

fn run_generate(args: GenerateArgs, resolver: &Resolver) -> Result<()> {
    resolver.check_known_keys(&[
        "scenario", "yeast-sim", "m", "h", "n", "k", "noise-var", "test-size", "binarize", "f",
        "a", "mu-beta", "sigma-beta", "cov-variant", "target-nonzeros", "x-source", "cov-source",
        "seed", "out-dir",
    ])?;
    let out_dir: PathBuf = required(resolver.get(args.out_dir, "out-dir")?, "out-dir")?;
    let seed: u64 = resolver.get_or(args.seed, "seed", 0)?;
    let m: usize = required(resolver.get(args.m, "m")?, "m")?;
    let h: usize = required(resolver.get(args.h, "h")?, "h")?;
    let n: usize = required(resolver.get(args.n, "n")?, "n")?;
    let test_size: usize = resolver.get_or(args.test_size, "test-size", 0)?;
    let binarize_out = resolver.get_flag(args.binarize, "binarize")?;
    let yeast = resolver.get_flag(args.yeast_sim, "yeast-sim")?;

    let (instance, spec_json, label) = if yeast {
        let cov_variant =
            parse_cov_variant(&resolver.get_or(args.cov_variant, "cov-variant", "diag".to_string())?)?;
        let mut spec = YeastSimSpec::new(m, h, n, cov_variant, seed);
        spec.f = resolver.get_or(args.f, "f", spec.f)?;
        spec.a = resolver.get_or(args.a, "a", spec.a)?;
        spec.mu_beta = resolver.get_or(args.mu_beta, "mu-beta", spec.mu_beta)?;
        spec.sigma_beta = resolver.get_or(args.sigma_beta, "sigma-beta", spec.sigma_beta)?;
        spec.target_nonzeros = resolver.get(args.target_nonzeros, "target-nonzeros")?;
        spec.test_size = test_size;
        let x_source: Option<PathBuf> = resolver.get(args.x_source, "x-source")?;
        let cov_source: Option<PathBuf> = resolver.get(args.cov_source, "cov-source")?;
        let x_source = x_source.map(read_matrix_csv).transpose()?;
        let cov_source = match cov_source {
            Some(p) => Some(read_matrix_csv(p)?),
            None if x_source.is_none() => {
                // Default to independent unit-variance features.
                let mut c = DataMatrix::zeros(m, m);
                for j in 0..m {
                    c.set(j, j, 1.0);
                }
                Some(c)
            }
            None => None,
        };
        let inst = gen_yeast_sim(&spec, x_source.as_ref(), cov_source.as_ref())?;
        (inst, serde_json::to_value(&spec)?, "yeast-sim")
    } else {
        let scenario_raw: String = required(resolver.get(args.scenario, "scenario")?, "scenario")?;
        let kind = parse_scenario(&scenario_raw)?;
        let mut spec = ScenarioSpec::new(kind, m, h, n, seed);
        spec.k_per_response = resolver.get_or(args.k, "k", spec.k_per_response)?;
        spec.noise_var = resolver.get_or(args.noise_var, "noise-var", spec.noise_var)?;
        spec.test_size = test_size;
        let inst = gen_scenario(&spec)?;
        (inst, serde_json::to_value(&spec)?, "scenario")
    };

    std::fs::create_dir_all(&out_dir).map_err(|source| Error::Io {
        path: out_dir.clone(),
        source,
    })?;
    let mut files = vec![("x_train.csv", &instance.x_train), ("y_train.csv", &instance.y_train)];
    if instance.x_test.nrows() > 0 {
        files.push(("x_test.csv", &instance.x_test));
        files.push(("y_test.csv", &instance.y_test));
    }
    let mut written: Vec<String> = Vec::new();
    for (name, matrix) in files {
        let path = out_dir.join(name);
        write_matrix_csv(&path, matrix)?;
        written.push(name.to_string());
    }
    if binarize_out {
        let (bin, _) = instance.binarized();
        write_matrix_csv(out_dir.join("y_train_binary.csv"), &bin.y_train)?;
        written.push("y_train_binary.csv".into());
        if bin.y_test.nrows() > 0 {
            write_matrix_csv(out_dir.join("y_test_binary.csv"), &bin.y_test)?;
            written.push("y_test_binary.csv".into());
        }
    }
    // Generating coefficients as (feature, response, value) triples.
    {
        let mut triples = DataMatrix::from_rows(
            instance
                .beta_true
                .iter()
                .map(|(f, r, v)| vec![f as f64, r as f64, v])
                .collect(),
        )?;
        triples.set_column_names(vec!["feature".into(), "response".into(), "value".into()])?;
        write_matrix_csv(out_dir.join("beta_true.csv"), &triples)?;
        written.push("beta_true.csv".into());
    }

    let mut report = Report::new(format!("generate({label})"), seed);
    report.params = BTreeMap::from([
        ("spec".into(), spec_json),
        ("out-dir".into(), json!(out_dir.display().to_string())),
        ("binarize".into(), json!(binarize_out)),
    ]);
    report.metrics = BTreeMap::from([
        ("n_nonzero_coefficients".into(), json!(instance.beta_true.n_nonzero())),
        ("files".into(), json!(written)),
    ]);
    report.config_hash = params_hash(&report.params, seed);
    write_report(&report, ReportFormat::Json, out_dir.join("manifest.json"))?;
    println!("{}", out_dir.join("manifest.json").display());
    Ok(())
}

// ---------------------------------------------------------------------------
// experiment / sweep
// ---------------------------------------------------------------------------

fn load_plan(path: &Path) -> Result<ExperimentPlan> {
    let raw = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&raw).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn run_experiment_cmd(args: ExperimentArgs, resolver: &Resolver) -> Result<()> {
    resolver.check_known_keys(&["plan", "seed", "threads", "out", "format"])?;
    let plan_path: PathBuf = required(resolver.get(args.plan, "plan")?, "plan")?;
    let mut plan = load_plan(&plan_path)?;
    if let Some(seed) = resolver.get(args.seed, "seed")? {
        plan.seed = seed;
    }
    if let Some(threads) = resolver.get(args.threads, "threads")? {
        plan.threads = threads;
    }
    let format = parse_format(&resolver.get_or(args.format, "format", "json".to_string())?)?;
    let out: Option<PathBuf> = resolver.get(args.out, "out")?;

    let table = run_experiment(&plan)?;
    let mut report = Report::new("experiment", plan.seed);
    report.params = BTreeMap::from([("plan".into(), serde_json::to_value(&plan)?)]);
    report.config_hash = params_hash(&report.params, plan.seed);
    report.table = Some(table);
    emit(&report, format, out.as_deref())
}

/// On-disk sweep plan: the base experiment plan, the reference method whose
/// precision is matched, and the sweep template with its grid.
#[derive(serde::Serialize, serde::Deserialize)]
struct SweepPlanFile {
    plan: ExperimentPlan,
    reference: MethodSpec,
    sweep: SweepSpec,
}

fn run_sweep(args: SweepArgs, resolver: &Resolver) -> Result<()> {
    resolver.check_known_keys(&["plan", "grid", "seed", "threads", "out", "format"])?;
    let plan_path: PathBuf = required(resolver.get(args.plan, "plan")?, "plan")?;
    let raw = std::fs::read_to_string(&plan_path).map_err(|source| Error::Io {
        path: plan_path.clone(),
        source,
    })?;
    let mut sweep_plan: SweepPlanFile = serde_json::from_str(&raw)
        .map_err(|e| Error::Config(format!("{}: {e}", plan_path.display())))?;
    if let Some(seed) = resolver.get(args.seed, "seed")? {
        sweep_plan.plan.seed = seed;
    }
    if let Some(threads) = resolver.get(args.threads, "threads")? {
        sweep_plan.plan.threads = threads;
    }
    if let Some(grid_raw) = resolver.get::<String>(args.grid, "grid")? {
        let grid: std::result::Result<Vec<f64>, _> =
            grid_raw.split(',').map(|s| s.trim().parse::<f64>()).collect();
        sweep_plan.sweep.grid =
            grid.map_err(|e| Error::Config(format!("grid {grid_raw:?}: {e}")))?;
    }
    let format = parse_format(&resolver.get_or(args.format, "format", "json".to_string())?)?;
    let out: Option<PathBuf> = resolver.get(args.out, "out")?;

    let outcome = precision_matched_sweep(&sweep_plan.plan, &sweep_plan.reference, &sweep_plan.sweep)?;
    let mut report = Report::new("sweep", sweep_plan.plan.seed);
    report.params = BTreeMap::from([
        ("plan".into(), serde_json::to_value(&sweep_plan.plan)?),
        ("reference".into(), serde_json::to_value(&sweep_plan.reference)?),
        ("sweep".into(), serde_json::to_value(&sweep_plan.sweep)?),
    ]);
    report.metrics = BTreeMap::from([
        ("chosen".into(), json!(outcome.chosen)),
        ("flagged".into(), json!(outcome.flagged)),
        (
            "reference_precision".into(),
            json!(outcome.reference.coeff_precision.map(|a| a.mean)),
        ),
        ("chosen_method".into(), serde_json::to_value(&outcome.chosen_method)?),
        ("points".into(), serde_json::to_value(&outcome.points)?),
    ]);
    report.config_hash = params_hash(&report.params, sweep_plan.plan.seed);
    emit(&report, format, out.as_deref())
}
