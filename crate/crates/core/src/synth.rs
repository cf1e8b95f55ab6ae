//! Seeded synthetic-data generators: the three sharing scenarios (partial,
//! full, independent) and a summary-statistics simulator that mimics a
//! sparse coefficient matrix estimated from real marker data.
//!
//! Reproducibility: every matrix draws from its own numbered stream of a
//! ChaCha8 generator seeded from the spec seed, so adding or resizing one
//! matrix never perturbs the draws of another. Stream assignment:
//! 1 = training features, 2 = coefficients, 3 = training noise,
//! 4 = test features, 5 = test noise.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Poisson, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{cholesky, DataMatrix};
use crate::model::CoefficientMatrix;

const STREAM_X_TRAIN: u64 = 1;
const STREAM_BETA: u64 = 2;
const STREAM_NOISE_TRAIN: u64 = 3;
const STREAM_X_TEST: u64 = 4;
const STREAM_NOISE_TEST: u64 = 5;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Which sharing pattern the coefficient matrix follows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScenarioKind {
    /// Four shared features with coverage h, 3h/4, h/2, h/4 (rounded up),
    /// topped up per response with random fill features.
    Partial,
    /// Every response uses exactly the first k features.
    Full,
    /// Every response draws its features independently at random.
    Independent,
}

/// Spec for the scenario generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioSpec {
    pub kind: ScenarioKind,
    pub m: usize,
    pub h: usize,
    pub n: usize,
    /// Nonzero coefficients per response (default 4).
    #[serde(default = "default_k_per_response")]
    pub k_per_response: usize,
    /// Noise variance (default 0.1).
    #[serde(default = "default_noise_var")]
    pub noise_var: f64,
    /// Rows in the held-out test split (default 0).
    #[serde(default)]
    pub test_size: usize,
    pub seed: u64,
}

fn default_k_per_response() -> usize {
    4
}

fn default_noise_var() -> f64 {
    0.1
}

impl ScenarioSpec {
    pub fn new(kind: ScenarioKind, m: usize, h: usize, n: usize, seed: u64) -> Self {
        Self {
            kind,
            m,
            h,
            n,
            k_per_response: default_k_per_response(),
            noise_var: default_noise_var(),
            test_size: 0,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.h < 1 {
            return Err(Error::Domain("need at least one response".into()));
        }
        if self.n < 2 {
            return Err(Error::Domain("need at least two observations".into()));
        }
        if self.k_per_response == 0 || self.k_per_response > self.m.saturating_sub(1) {
            return Err(Error::Domain(format!(
                "k_per_response = {} must lie in [1, m - 1] with m = {}",
                self.k_per_response, self.m
            )));
        }
        if self.kind == ScenarioKind::Partial && self.k_per_response < 4 {
            return Err(Error::Domain(
                "the partial scenario spreads 4 shared features; k_per_response must be >= 4".into(),
            ));
        }
        if !(self.noise_var > 0.0) {
            return Err(Error::Domain("noise variance must be positive".into()));
        }
        Ok(())
    }
}

/// One generated dataset: train/test splits plus the generating
/// coefficients.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SyntheticInstance {
    pub x_train: DataMatrix,
    pub y_train: DataMatrix,
    pub x_test: DataMatrix,
    pub y_test: DataMatrix,
    pub beta_true: CoefficientMatrix,
    pub binarized: bool,
}

impl SyntheticInstance {
    /// Copy with both response matrices thresholded at their column means.
    /// Returns the flagged constant columns of the training split.
    pub fn binarized(&self) -> (SyntheticInstance, Vec<usize>) {
        let (y_train, flags) = binarize(&self.y_train);
        let (y_test, _) = binarize(&self.y_test);
        (
            SyntheticInstance {
                x_train: self.x_train.clone(),
                y_train,
                x_test: self.x_test.clone(),
                y_test,
                beta_true: self.beta_true.clone(),
                binarized: true,
            },
            flags,
        )
    }
}

/// Draw `count` distinct values from `pool` (which is consumed in place via
/// partial Fisher-Yates), deterministic given the generator state.
fn draw_distinct(rng: &mut ChaCha8Rng, pool: &mut Vec<usize>, count: usize) -> Vec<usize> {
    let mut out = Vec::with_capacity(count);
    for _ in 0..count {
        let idx = rng.random_range(0..pool.len());
        out.push(pool.swap_remove(idx));
    }
    out
}

fn scenario_support(spec: &ScenarioSpec, rng: &mut ChaCha8Rng) -> Vec<Vec<usize>> {
    let h = spec.h;
    let k = spec.k_per_response;
    let mut support: Vec<Vec<usize>> = vec![Vec::new(); h];
    match spec.kind {
        ScenarioKind::Full => {
            for resp in support.iter_mut() {
                resp.extend(0..k);
            }
        }
        ScenarioKind::Partial => {
            let coverage = [
                h,
                (3 * h).div_ceil(4),
                h.div_ceil(2),
                h.div_ceil(4),
            ];
            for (f, &cov) in coverage.iter().enumerate() {
                for resp in support.iter_mut().take(cov) {
                    resp.push(f);
                }
            }
            for resp in support.iter_mut() {
                let missing = k - resp.len();
                if missing > 0 {
                    let mut pool: Vec<usize> = (4..spec.m).collect();
                    resp.extend(draw_distinct(rng, &mut pool, missing));
                }
                resp.sort_unstable();
            }
        }
        ScenarioKind::Independent => {
            for resp in support.iter_mut() {
                let mut pool: Vec<usize> = (0..spec.m).collect();
                resp.extend(draw_distinct(rng, &mut pool, k));
                resp.sort_unstable();
            }
        }
    }
    support
}

fn standard_normal_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DataMatrix {
    let data: Vec<f64> = (0..rows * cols)
        .map(|_| rng.sample::<f64, _>(StandardNormal))
        .collect();
    DataMatrix::from_vec(data, rows, cols).expect("normal draws are finite")
}

fn response_matrix(
    x: &DataMatrix,
    beta: &CoefficientMatrix,
    noise_sd: f64,
    rng: &mut ChaCha8Rng,
) -> DataMatrix {
    let n = x.nrows();
    let h = beta.n_responses();
    let mut y = DataMatrix::zeros(n, h);
    for i in 0..n {
        for r in 0..h {
            y.set(i, r, noise_sd * rng.sample::<f64, _>(StandardNormal));
        }
    }
    for (f, r, v) in beta.iter() {
        for i in 0..n {
            let cur = y.get(i, r);
            y.set(i, r, cur + v * x.get(i, f));
        }
    }
    y
}

/// Generate one scenario instance. X entries are iid standard normal,
/// nonzero coefficients iid standard normal, noise iid normal with variance
/// `noise_var`, independent across responses.
pub fn gen_scenario(spec: &ScenarioSpec) -> Result<SyntheticInstance> {
    spec.validate()?;
    let mut beta_rng = stream(spec.seed, STREAM_BETA);
    let support = scenario_support(spec, &mut beta_rng);
    let mut beta = CoefficientMatrix::new(spec.m, spec.h);
    for (r, feats) in support.iter().enumerate() {
        for &f in feats {
            beta.insert(f, r, beta_rng.sample::<f64, _>(StandardNormal))?;
        }
    }
    let noise_sd = spec.noise_var.sqrt();
    let x_train = standard_normal_matrix(&mut stream(spec.seed, STREAM_X_TRAIN), spec.n, spec.m);
    let y_train = response_matrix(
        &x_train,
        &beta,
        noise_sd,
        &mut stream(spec.seed, STREAM_NOISE_TRAIN),
    );
    let x_test = standard_normal_matrix(
        &mut stream(spec.seed, STREAM_X_TEST),
        spec.test_size,
        spec.m,
    );
    let y_test = response_matrix(
        &x_test,
        &beta,
        noise_sd,
        &mut stream(spec.seed, STREAM_NOISE_TEST),
    );
    Ok(SyntheticInstance {
        x_train,
        y_train,
        x_test,
        y_test,
        beta_true: beta,
        binarized: false,
    })
}

/// Per-column threshold at the mean: 1 iff the value is at least as big as
/// its column average. Constant columns become all ones and are returned as
/// flags.
pub fn binarize(y: &DataMatrix) -> (DataMatrix, Vec<usize>) {
    let n = y.nrows();
    let h = y.ncols();
    let mut out = DataMatrix::zeros(n, h);
    let mut flagged = Vec::new();
    for r in 0..h {
        if n == 0 {
            continue;
        }
        let mean = y.col_mean(r);
        let mut constant = true;
        for i in 0..n {
            let v = y.get(i, r);
            if v != y.get(0, r) {
                constant = false;
            }
            out.set(i, r, if v >= mean { 1.0 } else { 0.0 });
        }
        if constant {
            flagged.push(r);
        }
    }
    (out, flagged)
}

/// Covariance structure used for the simulated feature rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CovVariant {
    /// Diagonal of the source covariance (independent features).
    Diag,
    /// Half shrinkage toward the diagonal.
    Half,
    /// The source covariance as-is.
    Full,
    /// Use the source feature matrix directly instead of sampling.
    OriginalX,
}

/// Spec for the summary-statistics simulator: a sparse coefficient matrix
/// grown by a row walk (activation probability `f`, response count Poisson
/// with rate `a` capped at h, values normal with the given mean and sd),
/// rejected until the nonzero total lands within 25% of the target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YeastSimSpec {
    pub m: usize,
    pub h: usize,
    pub n: usize,
    /// Probability that a feature row is active (default 0.05).
    #[serde(default = "default_row_fraction")]
    pub f: f64,
    /// Poisson rate of nonzero responses per active row (default 1.3).
    #[serde(default = "default_poisson_rate")]
    pub a: f64,
    /// Mean of nonzero coefficient values (default -0.12).
    #[serde(default = "default_mu_beta")]
    pub mu_beta: f64,
    /// Standard deviation of nonzero coefficient values (default 0.20).
    #[serde(default = "default_sigma_beta")]
    pub sigma_beta: f64,
    pub cov_variant: CovVariant,
    /// Accepted total nonzero count window is +-25% of this. Defaults to
    /// round(m * f * a).
    #[serde(default)]
    pub target_nonzeros: Option<usize>,
    /// Per-response noise variances (default all 1).
    #[serde(default)]
    pub noise_diag: Option<Vec<f64>>,
    #[serde(default)]
    pub test_size: usize,
    pub seed: u64,
}

fn default_row_fraction() -> f64 {
    0.05
}

fn default_poisson_rate() -> f64 {
    1.3
}

fn default_mu_beta() -> f64 {
    -0.12
}

fn default_sigma_beta() -> f64 {
    0.20
}

impl YeastSimSpec {
    pub fn new(m: usize, h: usize, n: usize, cov_variant: CovVariant, seed: u64) -> Self {
        Self {
            m,
            h,
            n,
            f: default_row_fraction(),
            a: default_poisson_rate(),
            mu_beta: default_mu_beta(),
            sigma_beta: default_sigma_beta(),
            cov_variant,
            target_nonzeros: None,
            noise_diag: None,
            test_size: 0,
            seed,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.f > 0.0 && self.f < 1.0) {
            return Err(Error::Domain(format!("row fraction must lie in (0, 1), got {}", self.f)));
        }
        if !(self.a > 0.0) {
            return Err(Error::Domain(format!("Poisson rate must be positive, got {}", self.a)));
        }
        if self.m == 0 || self.h == 0 || self.n < 2 {
            return Err(Error::Domain("need m >= 1, h >= 1, n >= 2".into()));
        }
        if let Some(d) = &self.noise_diag {
            if d.len() != self.h || d.iter().any(|v| !(*v > 0.0)) {
                return Err(Error::Domain(
                    "noise_diag must list one positive variance per response".into(),
                ));
            }
        }
        Ok(())
    }

    fn target(&self) -> usize {
        self.target_nonzeros
            .unwrap_or(((self.m as f64) * self.f * self.a).round() as usize)
            .max(1)
    }
}

fn row_walk_beta(spec: &YeastSimSpec, rng: &mut ChaCha8Rng) -> Result<CoefficientMatrix> {
    let target = spec.target() as f64;
    let lo = (0.75 * target).floor();
    let hi = (1.25 * target).ceil();
    let poisson = Poisson::new(spec.a)
        .map_err(|e| Error::Domain(format!("invalid Poisson rate {}: {e}", spec.a)))?;
    for _attempt in 0..1000 {
        let mut beta = CoefficientMatrix::new(spec.m, spec.h);
        let mut total = 0usize;
        for f in 0..spec.m {
            if rng.random::<f64>() >= spec.f {
                continue;
            }
            let drawn: f64 = rng.sample(poisson);
            let count = (drawn as usize).min(spec.h);
            if count == 0 {
                continue;
            }
            let mut pool: Vec<usize> = (0..spec.h).collect();
            for r in draw_distinct(rng, &mut pool, count) {
                let value = spec.mu_beta + spec.sigma_beta * rng.sample::<f64, _>(StandardNormal);
                beta.insert(f, r, value)?;
                total += 1;
            }
        }
        if (total as f64) >= lo && (total as f64) <= hi {
            return Ok(beta);
        }
    }
    Err(Error::Infeasible(format!(
        "row walk never hit the nonzero-count window around {} in 1000 attempts",
        spec.target()
    )))
}

/// Sample covariance of the columns of `x` (maximum likelihood, divide by n).
pub fn sample_covariance(x: &DataMatrix) -> Result<DataMatrix> {
    let n = x.nrows();
    let m = x.ncols();
    if n < 2 {
        return Err(Error::Degenerate("need at least two rows for a covariance".into()));
    }
    let means: Vec<f64> = (0..m).map(|j| x.col_mean(j)).collect();
    let mut cov = DataMatrix::zeros(m, m);
    for a in 0..m {
        for b in a..m {
            let mut acc = 0.0;
            for i in 0..n {
                acc += (x.get(i, a) - means[a]) * (x.get(i, b) - means[b]);
            }
            let v = acc / n as f64;
            cov.set(a, b, v);
            cov.set(b, a, v);
        }
    }
    Ok(cov)
}

fn shrink_covariance(cov: &DataMatrix, lambda: f64) -> DataMatrix {
    let m = cov.ncols();
    let mut out = DataMatrix::zeros(m, m);
    for a in 0..m {
        for b in 0..m {
            let v = if a == b {
                cov.get(a, b)
            } else {
                (1.0 - lambda) * cov.get(a, b)
            };
            out.set(a, b, v);
        }
    }
    out
}

/// Draw `rows` samples from N(0, cov) via a Cholesky factor, adding a tiny
/// ridge when the matrix is only semidefinite.
fn multivariate_normal(cov: &DataMatrix, rows: usize, rng: &mut ChaCha8Rng) -> Result<DataMatrix> {
    let m = cov.ncols();
    let mut work = cov.data().to_vec();
    let mut jitter = 0.0;
    let trace: f64 = (0..m).map(|j| cov.get(j, j)).sum();
    let chol = loop {
        match cholesky(&work, m, 1e-12) {
            Ok(c) => break c,
            Err(_) => {
                jitter = if jitter == 0.0 {
                    1e-10 * (trace / m as f64).max(1e-300)
                } else {
                    jitter * 10.0
                };
                if jitter > 1e-2 * trace.max(1e-300) {
                    return Err(Error::SingularCovariance);
                }
                work = cov.data().to_vec();
                for j in 0..m {
                    work[j * m + j] += jitter;
                }
            }
        }
    };
    let l = chol.lower();
    let mut out = DataMatrix::zeros(rows, m);
    let mut z = vec![0.0; m];
    for i in 0..rows {
        for v in z.iter_mut() {
            *v = rng.sample::<f64, _>(StandardNormal);
        }
        for a in 0..m {
            let mut acc = 0.0;
            for k in 0..=a {
                acc += l[a * m + k] * z[k];
            }
            out.set(i, a, acc);
        }
    }
    Ok(out)
}

fn yeast_feature_matrix(
    spec: &YeastSimSpec,
    rows: usize,
    x_source: Option<&DataMatrix>,
    cov_source: Option<&DataMatrix>,
    rng: &mut ChaCha8Rng,
) -> Result<DataMatrix> {
    match spec.cov_variant {
        CovVariant::OriginalX => {
            let src = x_source.ok_or_else(|| {
                Error::Config("the original-x variant needs a source feature matrix".into())
            })?;
            if src.ncols() != spec.m {
                return Err(Error::Dimension(format!(
                    "source matrix has {} columns, spec says {}",
                    src.ncols(),
                    spec.m
                )));
            }
            if rows <= src.nrows() {
                // Leading rows of the source.
                let mut out = DataMatrix::zeros(rows, spec.m);
                for i in 0..rows {
                    for j in 0..spec.m {
                        out.set(i, j, src.get(i, j));
                    }
                }
                Ok(out)
            } else {
                // Not enough source rows: bootstrap rows with replacement.
                let mut out = DataMatrix::zeros(rows, spec.m);
                for i in 0..rows {
                    let pick = rng.random_range(0..src.nrows());
                    for j in 0..spec.m {
                        out.set(i, j, src.get(pick, j));
                    }
                }
                Ok(out)
            }
        }
        variant => {
            let lambda = match variant {
                CovVariant::Diag => 1.0,
                CovVariant::Half => 0.5,
                CovVariant::Full => 0.0,
                CovVariant::OriginalX => unreachable!(),
            };
            let base = match (cov_source, x_source) {
                (Some(c), _) => {
                    if c.ncols() != spec.m || c.nrows() != spec.m {
                        return Err(Error::Dimension(format!(
                            "covariance source is {}x{}, spec says m = {}",
                            c.nrows(),
                            c.ncols(),
                            spec.m
                        )));
                    }
                    c.clone()
                }
                (None, Some(x)) => sample_covariance(x)?,
                (None, None) => {
                    return Err(Error::Config(
                        "need either a covariance source or a feature matrix to derive one".into(),
                    ))
                }
            };
            multivariate_normal(&shrink_covariance(&base, lambda), rows, rng)
        }
    }
}

/// Generate one simulator instance. Exactly one of `x_source` /
/// `cov_source` is needed for the sampled variants; `x_source` is required
/// for the original-x variant.
pub fn gen_yeast_sim(
    spec: &YeastSimSpec,
    x_source: Option<&DataMatrix>,
    cov_source: Option<&DataMatrix>,
) -> Result<SyntheticInstance> {
    spec.validate()?;
    let beta = row_walk_beta(spec, &mut stream(spec.seed, STREAM_BETA))?;
    let noise_sd: Vec<f64> = spec
        .noise_diag
        .clone()
        .unwrap_or_else(|| vec![1.0; spec.h])
        .iter()
        .map(|v| v.sqrt())
        .collect();
    let x_train = yeast_feature_matrix(
        spec,
        spec.n,
        x_source,
        cov_source,
        &mut stream(spec.seed, STREAM_X_TRAIN),
    )?;
    let x_test = yeast_feature_matrix(
        spec,
        spec.test_size,
        x_source,
        cov_source,
        &mut stream(spec.seed, STREAM_X_TEST),
    )?;
    let make_y = |x: &DataMatrix, rng: &mut ChaCha8Rng| -> DataMatrix {
        let n = x.nrows();
        let mut y = DataMatrix::zeros(n, spec.h);
        for i in 0..n {
            for r in 0..spec.h {
                y.set(i, r, noise_sd[r] * rng.sample::<f64, _>(StandardNormal));
            }
        }
        for (f, r, v) in beta.iter() {
            for i in 0..n {
                let cur = y.get(i, r);
                y.set(i, r, cur + v * x.get(i, f));
            }
        }
        y
    };
    let y_train = make_y(&x_train, &mut stream(spec.seed, STREAM_NOISE_TRAIN));
    let y_test = make_y(&x_test, &mut stream(spec.seed, STREAM_NOISE_TEST));
    Ok(SyntheticInstance {
        x_train,
        y_train,
        x_test,
        y_test,
        beta_true: beta,
        binarized: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn full_scenario_support_is_first_four() {
        let spec = ScenarioSpec::new(ScenarioKind::Full, 50, 6, 20, 7);
        let inst = gen_scenario(&spec).unwrap();
        for r in 0..6 {
            assert_eq!(inst.beta_true.selected_features(r), vec![0, 1, 2, 3]);
        }
        assert_eq!(inst.beta_true.n_nonzero(), 24);
    }

    #[test]
    fn partial_scenario_coverage_counts() {
        let spec = ScenarioSpec::new(ScenarioKind::Partial, 200, 20, 30, 11);
        let inst = gen_scenario(&spec).unwrap();
        assert_eq!(inst.beta_true.response_count(0), 20);
        assert_eq!(inst.beta_true.response_count(1), 15);
        assert_eq!(inst.beta_true.response_count(2), 10);
        assert_eq!(inst.beta_true.response_count(3), 5);
        for r in 0..20 {
            assert_eq!(inst.beta_true.selected_features(r).len(), 4);
        }
        assert_eq!(inst.beta_true.n_nonzero(), 80);
    }

    #[test]
    fn independent_scenario_sizes_and_overlap_rate() {
        // Independent supports overlap like draws without replacement: for
        // k = 4 of m = 100, P(two responses share >= 1 feature) = 0.15276.
        let m = 100;
        let mut pairs_with_overlap = 0usize;
        let mut total_pairs = 0usize;
        for seed in 0..500u64 {
            let spec = ScenarioSpec::new(ScenarioKind::Independent, m, 3, 10, seed);
            let inst = gen_scenario(&spec).unwrap();
            let sup: Vec<Vec<usize>> =
                (0..3).map(|r| inst.beta_true.selected_features(r)).collect();
            for r in 0..3 {
                assert_eq!(sup[r].len(), 4);
            }
            for a in 0..3 {
                for b in (a + 1)..3 {
                    total_pairs += 1;
                    if sup[a].iter().any(|f| sup[b].contains(f)) {
                        pairs_with_overlap += 1;
                    }
                }
            }
        }
        let p = 1.0
            - (96.0 * 95.0 * 94.0 * 93.0) / (100.0 * 99.0 * 98.0 * 97.0);
        let expect = p * total_pairs as f64;
        let sd = (total_pairs as f64 * p * (1.0 - p)).sqrt();
        let z = (pairs_with_overlap as f64 - expect) / sd;
        assert!(z.abs() < 2.58, "overlap z-score {z}");
    }

    #[test]
    fn total_support_is_h_times_k() {
        for kind in [ScenarioKind::Partial, ScenarioKind::Full, ScenarioKind::Independent] {
            let spec = ScenarioSpec::new(kind, 60, 7, 25, 3);
            let inst = gen_scenario(&spec).unwrap();
            assert_eq!(inst.beta_true.n_nonzero(), 7 * 4);
        }
    }

    #[test]
    fn generation_is_bit_reproducible() {
        let spec = ScenarioSpec {
            test_size: 10,
            ..ScenarioSpec::new(ScenarioKind::Partial, 40, 8, 15, 99)
        };
        let a = gen_scenario(&spec).unwrap();
        let b = gen_scenario(&spec).unwrap();
        assert_eq!(a.x_train, b.x_train);
        assert_eq!(a.y_train, b.y_train);
        assert_eq!(a.x_test, b.x_test);
        assert_eq!(a.beta_true, b.beta_true);
        let other = gen_scenario(&ScenarioSpec { seed: 100, ..spec }).unwrap();
        assert_ne!(a.x_train, other.x_train);
    }

    #[test]
    fn test_size_only_extends_the_test_split() {
        // Growing the test split must not perturb the training draws.
        let small = ScenarioSpec {
            test_size: 5,
            ..ScenarioSpec::new(ScenarioKind::Full, 30, 4, 12, 42)
        };
        let big = ScenarioSpec {
            test_size: 50,
            ..small.clone()
        };
        let a = gen_scenario(&small).unwrap();
        let b = gen_scenario(&big).unwrap();
        assert_eq!(a.x_train, b.x_train);
        assert_eq!(a.y_train, b.y_train);
        for i in 0..5 {
            for j in 0..30 {
                assert_eq!(a.x_test.get(i, j), b.x_test.get(i, j));
            }
        }
    }

    #[test]
    fn train_and_test_share_a_distribution() {
        let spec = ScenarioSpec {
            test_size: 400,
            ..ScenarioSpec::new(ScenarioKind::Full, 20, 4, 400, 5)
        };
        let inst = gen_scenario(&spec).unwrap();
        // Pooled two-sample mean test per column; sum of squared z-scores is
        // chi-square with m degrees of freedom under equality.
        let mut z2 = 0.0;
        for j in 0..20 {
            let m1 = inst.x_train.col_mean(j);
            let m2 = inst.x_test.col_mean(j);
            let z = (m1 - m2) / (1.0 / 400.0_f64 + 1.0 / 400.0).sqrt();
            z2 += z * z;
        }
        let p = crate::dist::chi_square_upper(z2, 20).unwrap();
        assert!(p > 0.01, "train/test mean test failed, p = {p}");
    }

    #[test]
    fn binarize_threshold_includes_the_mean() {
        let y = DataMatrix::from_rows(vec![vec![1.0], vec![2.0], vec![3.0]]).unwrap();
        let (b, flags) = binarize(&y);
        assert_eq!(b.column(0), vec![0.0, 1.0, 1.0]);
        assert!(flags.is_empty());
        let constant = DataMatrix::from_rows(vec![vec![5.0], vec![5.0]]).unwrap();
        let (b, flags) = binarize(&constant);
        assert_eq!(b.column(0), vec![1.0, 1.0]);
        assert_eq!(flags, vec![0]);
    }

    #[test]
    fn binarize_splits_normal_data_evenly() {
        let mut rng = stream(8, 1);
        let col: Vec<f64> = (0..10_000)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect();
        let y = DataMatrix::from_vec(col, 10_000, 1).unwrap();
        let (b, _) = binarize(&y);
        let ones = b.column(0).iter().filter(|&&v| v == 1.0).count();
        let frac = ones as f64 / 10_000.0;
        assert!((frac - 0.5).abs() < 0.02, "fraction of ones {frac}");
    }

    #[test]
    fn row_walk_hits_the_target_window() {
        let spec = YeastSimSpec::new(200, 20, 50, CovVariant::Diag, 17);
        let target = spec.target() as f64;
        let mut rng = stream(spec.seed, STREAM_BETA);
        let beta = row_walk_beta(&spec, &mut rng).unwrap();
        let total = beta.n_nonzero() as f64;
        assert!(total >= (0.75 * target).floor() && total <= (1.25 * target).ceil());
    }

    #[test]
    fn row_walk_cap_fills_every_row() {
        let spec = YeastSimSpec {
            f: 0.999,
            a: 60.0,
            target_nonzeros: Some(20 * 8),
            ..YeastSimSpec::new(20, 8, 30, CovVariant::Diag, 23)
        };
        let mut rng = stream(spec.seed, STREAM_BETA);
        let beta = row_walk_beta(&spec, &mut rng).unwrap();
        assert_eq!(beta.n_nonzero(), 160);
        for f in 0..20 {
            assert_eq!(beta.response_count(f), 8);
        }
    }

    #[test]
    fn row_walk_mean_matches_rate_product() {
        // Accepted totals average close to m * f * a (the cap at h barely
        // binds for a = 1.3).
        let mut total = 0.0;
        let reps = 500;
        for seed in 0..reps {
            let spec = YeastSimSpec::new(400, 20, 10, CovVariant::Diag, 1000 + seed);
            let mut rng = stream(spec.seed, STREAM_BETA);
            total += row_walk_beta(&spec, &mut rng).unwrap().n_nonzero() as f64;
        }
        let mean = total / reps as f64;
        let want = 400.0 * 0.05 * 1.3;
        assert!(
            (mean - want).abs() / want < 0.05,
            "mean nonzeros {mean}, want about {want}"
        );
    }

    #[test]
    fn infeasible_window_errors_out() {
        let spec = YeastSimSpec {
            target_nonzeros: Some(100_000),
            ..YeastSimSpec::new(50, 5, 20, CovVariant::Diag, 3)
        };
        assert!(matches!(
            gen_yeast_sim(&spec, None, Some(&identity_cov(50))),
            Err(Error::Infeasible(_))
        ));
    }

    fn identity_cov(m: usize) -> DataMatrix {
        let mut c = DataMatrix::zeros(m, m);
        for j in 0..m {
            c.set(j, j, 1.0);
        }
        c
    }

    #[test]
    fn diag_variant_decorrelates_features() {
        // Source covariance with strong correlations; the diagonal variant
        // must produce near-independent columns.
        let m = 50;
        let mut cov = DataMatrix::zeros(m, m);
        for a in 0..m {
            for b in 0..m {
                cov.set(a, b, if a == b { 1.0 } else { 0.6 });
            }
        }
        let spec = YeastSimSpec {
            n: 100,
            ..YeastSimSpec::new(m, 5, 100, CovVariant::Diag, 31)
        };
        let inst = gen_yeast_sim(&spec, None, Some(&cov)).unwrap();
        let mut acc = 0.0;
        let mut count = 0;
        for a in 0..m {
            for b in (a + 1)..m {
                let ca = inst.x_train.column(a);
                let cb = inst.x_train.column(b);
                let ma = inst.x_train.col_mean(a);
                let mb = inst.x_train.col_mean(b);
                let mut num = 0.0;
                let mut da = 0.0;
                let mut db = 0.0;
                for i in 0..100 {
                    num += (ca[i] - ma) * (cb[i] - mb);
                    da += (ca[i] - ma) * (ca[i] - ma);
                    db += (cb[i] - mb) * (cb[i] - mb);
                }
                acc += (num / (da * db).sqrt()).abs();
                count += 1;
            }
        }
        let mean_abs_corr = acc / count as f64;
        assert!(mean_abs_corr < 0.1, "mean |corr| = {mean_abs_corr}");
    }

    #[test]
    fn full_variant_preserves_correlation_sign() {
        let m = 10;
        let mut cov = DataMatrix::zeros(m, m);
        for a in 0..m {
            for b in 0..m {
                cov.set(a, b, if a == b { 1.0 } else { 0.8 });
            }
        }
        let spec = YeastSimSpec {
            n: 300,
            ..YeastSimSpec::new(m, 3, 300, CovVariant::Full, 37)
        };
        let inst = gen_yeast_sim(&spec, None, Some(&cov)).unwrap();
        let sample = sample_covariance(&inst.x_train).unwrap();
        let mut acc = 0.0;
        let mut count = 0;
        for a in 0..m {
            for b in (a + 1)..m {
                acc += sample.get(a, b) / (sample.get(a, a) * sample.get(b, b)).sqrt();
                count += 1;
            }
        }
        assert!(acc / count as f64 > 0.6, "correlations were not preserved");
    }

    #[test]
    fn original_x_variant_uses_source_rows() {
        let src = DataMatrix::from_rows(
            (0..30).map(|i| vec![(i % 2) as f64, (i % 3) as f64]).collect(),
        )
        .unwrap();
        let spec = YeastSimSpec {
            f: 0.4,
            target_nonzeros: Some(2),
            ..YeastSimSpec::new(2, 2, 20, CovVariant::OriginalX, 41)
        };
        let inst = gen_yeast_sim(&spec, Some(&src), None).unwrap();
        for i in 0..20 {
            assert_eq!(inst.x_train.get(i, 0), src.get(i, 0));
            assert_eq!(inst.x_train.get(i, 1), src.get(i, 1));
        }
    }
}
