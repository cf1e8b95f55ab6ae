//! Dense regression primitives: OLS fits, slope t-test p-values, and the
//! logistic refit used by the classification pipeline.
//!
//! Everything here is a pure function of its inputs and safe to call
//! concurrently on shared matrices.

use crate::dist::t_two_sided_p;
use crate::error::{Error, Result};
use crate::matrix::{cholesky, DataMatrix};

/// Rank tolerance for the normal equations, relative to the largest Gram
/// diagonal. Stepwise search adds one column at a time so conditioning stays
/// mild; a pivot this small means an effectively collinear column.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// Result of an ordinary least-squares fit.
#[derive(Debug, Clone, PartialEq)]
pub struct OlsFit {
    /// One coefficient per design column, in column order.
    pub coefficients: Vec<f64>,
    /// Residual sum of squares of `coefficients` on the training data.
    pub rss: f64,
    /// Residual degrees of freedom: n minus the number of fitted columns.
    pub dof: i64,
}

/// Least-squares fit of `response` on the columns of `design`.
///
/// The design matrix is used as given; callers wanting an intercept include
/// an all-ones column (conventionally at index 0). Rank deficiency is
/// reported as an error rather than silently resolved by a pseudo-inverse.
pub fn ols_fit(design: &DataMatrix, response: &[f64]) -> Result<OlsFit> {
    let n = design.nrows();
    let p = design.ncols();
    if response.len() != n {
        return Err(Error::Dimension(format!(
            "design has {n} rows but response has {} entries",
            response.len()
        )));
    }
    if n < 2 {
        return Err(Error::Degenerate("need at least 2 observations".into()));
    }
    if p == 0 {
        return Err(Error::Dimension("design has no columns".into()));
    }

    // Normal equations: (X'X) b = X'y.
    let mut gram = vec![0.0; p * p];
    let mut xty = vec![0.0; p];
    for j in 0..p {
        for k in j..p {
            let v = design.col_dot(j, k);
            gram[j * p + k] = v;
            gram[k * p + j] = v;
        }
        xty[j] = design.col_dot_slice(j, response);
    }
    let chol = cholesky(&gram, p, RANK_TOLERANCE)?;
    let coefficients = chol.solve(&xty);

    let yty: f64 = response.iter().map(|v| v * v).sum();
    let explained: f64 = coefficients.iter().zip(&xty).map(|(b, c)| b * c).sum();
    let rss = (yty - explained).max(0.0);
    Ok(OlsFit {
        coefficients,
        rss,
        dof: n as i64 - p as i64,
    })
}

/// Two-sided p-value of the slope from the simple regression of `response`
/// on `feature` plus an intercept, using the t distribution with n - 2
/// degrees of freedom.
pub fn slope_p_value(feature: &[f64], response: &[f64]) -> Result<f64> {
    let n = feature.len();
    if response.len() != n {
        return Err(Error::Dimension(format!(
            "feature has {n} entries but response has {}",
            response.len()
        )));
    }
    if n < 3 {
        return Err(Error::Degenerate("slope test needs at least 3 observations".into()));
    }
    let nf = n as f64;
    let mean_x = feature.iter().sum::<f64>() / nf;
    let mean_y = response.iter().sum::<f64>() / nf;
    let mut sxx = 0.0;
    let mut sxy = 0.0;
    let mut syy = 0.0;
    for i in 0..n {
        let dx = feature[i] - mean_x;
        let dy = response[i] - mean_y;
        sxx += dx * dx;
        sxy += dx * dy;
        syy += dy * dy;
    }
    if sxx <= 0.0 || sxx < 1e-14 * nf * (mean_x * mean_x).max(1.0) {
        return Err(Error::Degenerate("feature column is constant".into()));
    }
    let slope = sxy / sxx;
    let rss = (syy - slope * sxy).max(0.0);
    let dof = n - 2;
    let s2 = rss / dof as f64;
    if s2 <= 0.0 {
        // Exact linear relationship: the t statistic diverges.
        return Ok(0.0);
    }
    let t = slope / (s2 / sxx).sqrt();
    t_two_sided_p(t, dof)
}

/// Maximum-likelihood logistic fit.
#[derive(Debug, Clone, PartialEq)]
pub struct LogisticFit {
    /// One coefficient per design column.
    pub coefficients: Vec<f64>,
    /// False when the iteration cap was hit (typically perfect separation).
    pub converged: bool,
    pub iterations: usize,
}

impl LogisticFit {
    /// Predicted probability for one design row.
    pub fn probability(&self, row: &[f64]) -> f64 {
        let z: f64 = row.iter().zip(&self.coefficients).map(|(x, b)| x * b).sum();
        1.0 / (1.0 + (-z).exp())
    }

    /// Log-likelihood of labels under this fit.
    pub fn log_likelihood(&self, design: &DataMatrix, labels: &[f64]) -> f64 {
        let mut ll = 0.0;
        for i in 0..design.nrows() {
            let p = self.probability(design.row(i)).clamp(1e-12, 1.0 - 1e-12);
            ll += if labels[i] > 0.5 { p.ln() } else { (1.0 - p).ln() };
        }
        ll
    }
}

/// Logistic regression of binary labels on `design` via iteratively
/// reweighted least squares. Converged when the largest coefficient change
/// drops below 1e-8, capped at 100 iterations; hitting the cap is flagged,
/// not an error, since separation still yields a usable classifier.
pub fn logistic_refit(design: &DataMatrix, labels: &[f64]) -> Result<LogisticFit> {
    let n = design.nrows();
    let p = design.ncols();
    if labels.len() != n {
        return Err(Error::Dimension(format!(
            "design has {n} rows but labels has {}",
            labels.len()
        )));
    }
    if labels.iter().any(|&y| y != 0.0 && y != 1.0) {
        return Err(Error::Domain("labels must be 0 or 1".into()));
    }
    let ones = labels.iter().filter(|&&y| y == 1.0).count();
    if ones == 0 || ones == n {
        return Err(Error::Degenerate("labels contain a single class".into()));
    }

    let mut beta = vec![0.0; p];
    let mut converged = false;
    let mut iterations = 0;
    for iter in 0..100 {
        iterations = iter + 1;
        // Weighted normal equations for the Newton step:
        // (X' W X) delta = X' (y - mu),  W = diag(mu (1 - mu)).
        let mut gram = vec![0.0; p * p];
        let mut grad = vec![0.0; p];
        for i in 0..n {
            let row = design.row(i);
            let z: f64 = row.iter().zip(&beta).map(|(x, b)| x * b).sum();
            let mu = 1.0 / (1.0 + (-z).exp());
            let w = (mu * (1.0 - mu)).max(1e-10);
            let r = labels[i] - mu;
            for j in 0..p {
                grad[j] += row[j] * r;
                for k in j..p {
                    gram[j * p + k] += w * row[j] * row[k];
                }
            }
        }
        for j in 0..p {
            for k in 0..j {
                gram[j * p + k] = gram[k * p + j];
            }
        }
        let chol = cholesky(&gram, p, RANK_TOLERANCE)?;
        let delta = chol.solve(&grad);
        let mut max_change = 0.0_f64;
        for j in 0..p {
            beta[j] += delta[j];
            max_change = max_change.max(delta[j].abs());
        }
        if max_change < 1e-8 {
            converged = true;
            break;
        }
    }
    Ok(LogisticFit {
        coefficients: beta,
        converged,
        iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn ones_design(n: usize) -> DataMatrix {
        DataMatrix::from_vec(vec![1.0; n], n, 1).unwrap()
    }

    // Brute-force least squares through explicit Gauss-Jordan inversion of
    // the normal matrix; deliberately independent of the Cholesky path.
    fn brute_force_ols(design: &DataMatrix, y: &[f64]) -> Vec<f64> {
        let p = design.ncols();
        let mut a = vec![0.0; p * (p + 1)];
        for j in 0..p {
            for k in 0..p {
                a[j * (p + 1) + k] = design.col_dot(j, k);
            }
            a[j * (p + 1) + p] = design.col_dot_slice(j, y);
        }
        let w = p + 1;
        for col in 0..p {
            let pivot_row = (col..p)
                .max_by(|&r1, &r2| {
                    a[r1 * w + col]
                        .abs()
                        .partial_cmp(&a[r2 * w + col].abs())
                        .unwrap()
                })
                .unwrap();
            for k in 0..w {
                a.swap(col * w + k, pivot_row * w + k);
            }
            let piv = a[col * w + col];
            for k in 0..w {
                a[col * w + k] /= piv;
            }
            for r in 0..p {
                if r != col {
                    let f = a[r * w + col];
                    for k in 0..w {
                        a[r * w + k] -= f * a[col * w + k];
                    }
                }
            }
        }
        (0..p).map(|j| a[j * w + p]).collect()
    }

    #[test]
    fn intercept_only_is_mean_fit() {
        let fit = ols_fit(&ones_design(3), &[1.0, 2.0, 3.0]).unwrap();
        assert_relative_eq!(fit.coefficients[0], 2.0, epsilon = 1e-12);
        assert_relative_eq!(fit.rss, 2.0, epsilon = 1e-12);
        assert_eq!(fit.dof, 2);
    }

    #[test]
    fn exact_linear_relationship_has_zero_rss() {
        let x = vec![0.5, 1.5, 2.0, 4.0];
        let design = DataMatrix::from_rows(x.iter().map(|&v| vec![1.0, v]).collect()).unwrap();
        let y: Vec<f64> = x.iter().map(|&v| 3.0 - 2.0 * v).collect();
        let fit = ols_fit(&design, &y).unwrap();
        assert!(fit.rss < 1e-10, "rss = {}", fit.rss);
        assert_relative_eq!(fit.coefficients[0], 3.0, epsilon = 1e-9);
        assert_relative_eq!(fit.coefficients[1], -2.0, epsilon = 1e-9);
    }

    #[test]
    fn matches_normal_equation_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let design = DataMatrix::from_rows(
            (0..10)
                .map(|_| {
                    vec![
                        1.0,
                        rng.sample::<f64, _>(StandardNormal),
                        rng.sample::<f64, _>(StandardNormal),
                    ]
                })
                .collect(),
        )
        .unwrap();
        let y: Vec<f64> = (0..10).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let fit = ols_fit(&design, &y).unwrap();
        let brute = brute_force_ols(&design, &y);
        for (a, b) in fit.coefficients.iter().zip(&brute) {
            assert_relative_eq!(a, b, epsilon = 1e-8);
        }
        // RSS really is the residual sum of squares of the coefficients.
        let mut rss = 0.0;
        for i in 0..10 {
            let pred: f64 = design.row(i).iter().zip(&fit.coefficients).map(|(x, b)| x * b).sum();
            rss += (y[i] - pred) * (y[i] - pred);
        }
        assert_relative_eq!(fit.rss, rss, max_relative = 1e-8);
    }

    #[test]
    fn duplicate_column_is_singular() {
        let design =
            DataMatrix::from_rows((0..5).map(|i| vec![1.0, i as f64, i as f64]).collect()).unwrap();
        let y = vec![0.0, 1.0, 2.0, 3.0, 4.5];
        assert!(matches!(
            ols_fit(&design, &y),
            Err(Error::SingularDesign { .. })
        ));
    }

    #[test]
    fn nesting_never_increases_rss() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..20 {
            let rows: Vec<Vec<f64>> = (0..12)
                .map(|_| {
                    vec![
                        1.0,
                        rng.sample::<f64, _>(StandardNormal),
                        rng.sample::<f64, _>(StandardNormal),
                        rng.sample::<f64, _>(StandardNormal),
                    ]
                })
                .collect();
            let y: Vec<f64> = (0..12).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
            let full = DataMatrix::from_rows(rows.clone()).unwrap();
            let nested =
                DataMatrix::from_rows(rows.iter().map(|r| r[..3].to_vec()).collect()).unwrap();
            let rss_full = ols_fit(&full, &y).unwrap().rss;
            let rss_nested = ols_fit(&nested, &y).unwrap().rss;
            assert!(rss_full <= rss_nested + 1e-10);
        }
    }

    #[test]
    fn slope_p_value_matches_hand_computation() {
        // x = 1..5, y as below: slope 1.2, RSS 6.8, t = 2.52047...,
        // and the closed-form t(3) tail gives the frozen value.
        let x = [1.0, 2.0, 3.0, 4.0, 5.0];
        let y = [2.0, 1.0, 4.0, 3.0, 7.0];
        let t = 1.2 / (6.8f64 / 3.0 / 10.0).sqrt();
        let s = t / 3.0_f64.sqrt();
        let expected =
            2.0 * (0.5 - (1.0 / std::f64::consts::PI) * (s / (1.0 + s * s) + s.atan()));
        let p = slope_p_value(&x, &y).unwrap();
        assert_relative_eq!(p, expected, epsilon = 1e-6);
        assert_relative_eq!(p, 0.0861386313, epsilon = 1e-6);
    }

    #[test]
    fn exact_relationship_gives_vanishing_p() {
        let x = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        let p = slope_p_value(&x, &x).unwrap();
        assert!(p < 1e-12);
    }

    #[test]
    fn constant_feature_is_degenerate() {
        let x = [2.0; 5];
        let y = [1.0, 2.0, 3.0, 4.0, 5.0];
        assert!(matches!(
            slope_p_value(&x, &y),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn null_p_values_are_uniform() {
        // Monte-Carlo calibration: independent feature and response give
        // uniformly distributed p-values. Kolmogorov-Smirnov test at level
        // 0.01 (asymptotic critical value 1.6276 / sqrt(reps)).
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let reps = 10_000;
        let n = 40;
        let mut ps: Vec<f64> = (0..reps)
            .map(|_| {
                let x: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
                let y: Vec<f64> = (0..n).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
                slope_p_value(&x, &y).unwrap()
            })
            .collect();
        ps.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut d: f64 = 0.0;
        for (i, p) in ps.iter().enumerate() {
            let hi = (i + 1) as f64 / reps as f64;
            let lo = i as f64 / reps as f64;
            d = d.max((hi - p).abs()).max((p - lo).abs());
        }
        let critical = 1.6276 / (reps as f64).sqrt();
        assert!(d < critical, "KS statistic {d} exceeds {critical}");
    }

    #[test]
    fn p_value_invariant_under_affine_rescaling() {
        let x = [0.3, 1.7, 2.2, 3.9, 4.1, 5.5, 6.0];
        let y = [1.0, 0.4, 2.2, 1.9, 3.3, 2.8, 4.0];
        let p0 = slope_p_value(&x, &y).unwrap();
        let xs: Vec<f64> = x.iter().map(|v| -3.0 * v + 11.0).collect();
        let ys: Vec<f64> = y.iter().map(|v| 0.25 * v - 2.0).collect();
        let p1 = slope_p_value(&xs, &ys).unwrap();
        assert_relative_eq!(p0, p1, epsilon = 1e-12);
    }

    #[test]
    fn logistic_intercept_only_even_split() {
        let labels = [0.0, 0.0, 1.0, 1.0];
        let fit = logistic_refit(&ones_design(4), &labels).unwrap();
        assert!(fit.converged);
        assert_relative_eq!(fit.coefficients[0], 0.0, epsilon = 1e-8);
    }

    #[test]
    fn logistic_intercept_only_three_quarters() {
        let labels = [0.0, 1.0, 1.0, 1.0];
        let fit = logistic_refit(&ones_design(4), &labels).unwrap();
        assert_relative_eq!(fit.coefficients[0], 3.0_f64.ln(), epsilon = 1e-6);
    }

    #[test]
    fn logistic_single_class_is_degenerate() {
        let labels = [1.0; 4];
        assert!(matches!(
            logistic_refit(&ones_design(4), &labels),
            Err(Error::Degenerate(_))
        ));
    }

    #[test]
    fn logistic_separation_hits_cap_with_flag() {
        let design =
            DataMatrix::from_rows((0..6).map(|i| vec![1.0, i as f64 - 2.5]).collect()).unwrap();
        let labels = [0.0, 0.0, 0.0, 1.0, 1.0, 1.0];
        let fit = logistic_refit(&design, &labels).unwrap();
        assert!(!fit.converged);
        assert_eq!(fit.iterations, 100);
    }

    #[test]
    fn logistic_fit_is_local_optimum() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let design = DataMatrix::from_rows(
            (0..30)
                .map(|_| {
                    vec![
                        1.0,
                        rng.sample::<f64, _>(StandardNormal),
                        rng.sample::<f64, _>(StandardNormal),
                    ]
                })
                .collect(),
        )
        .unwrap();
        let labels: Vec<f64> = (0..30)
            .map(|i| {
                let z = design.get(i, 1) - 0.5 * design.get(i, 2);
                let p = 1.0 / (1.0 + (-z as f64).exp());
                if rng.random::<f64>() < p {
                    1.0
                } else {
                    0.0
                }
            })
            .collect();
        let fit = logistic_refit(&design, &labels).unwrap();
        let ll = fit.log_likelihood(&design, &labels);
        for _ in 0..1000 {
            let mut jittered = fit.clone();
            for b in jittered.coefficients.iter_mut() {
                *b += 0.05 * rng.sample::<f64, _>(StandardNormal);
            }
            assert!(jittered.log_likelihood(&design, &labels) <= ll + 1e-9);
        }
    }

    #[test]
    fn scale_equivariance_of_coefficients() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rows: Vec<Vec<f64>> = (0..15)
            .map(|_| vec![1.0, rng.sample::<f64, _>(StandardNormal), rng.sample::<f64, _>(StandardNormal)])
            .collect();
        let y: Vec<f64> = (0..15).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let base = ols_fit(&DataMatrix::from_rows(rows.clone()).unwrap(), &y).unwrap();
        let scaled_rows: Vec<Vec<f64>> = rows
            .iter()
            .map(|r| vec![r[0], 10.0 * r[1], r[2]])
            .collect();
        let scaled = ols_fit(&DataMatrix::from_rows(scaled_rows).unwrap(), &y).unwrap();
        assert_relative_eq!(scaled.coefficients[1], base.coefficients[1] / 10.0, max_relative = 1e-8);
        assert_relative_eq!(scaled.rss, base.rss, max_relative = 1e-8);
    }
}
