//! Fixed-effects GLM fit by Newton-form iteratively reweighted least squares.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::design::build_bundle_from;
use crate::error::{Error, Result};
use crate::likelihood::ObsLik;
use crate::linalg::column_rank;
use crate::lp::exists_positive_null;
use crate::model::{Family, Link, ValidatedModel};
use crate::numeric::{CompensatedSum, RatMatrix};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GlmFit {
    pub beta_hat: Vec<f64>,
    pub converged: bool,
    pub iterations: usize,
    /// The maximum likelihood estimate does not exist.
    pub separation_flag: bool,
    pub deviance: f64,
    /// Max-norm of the score at `beta_hat`.
    pub score_norm: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GlmConfig {
    pub deviance_rel_tol: f64,
    pub score_tol: f64,
    pub max_iterations: usize,
    pub max_halvings: usize,
}

impl Default for GlmConfig {
    fn default() -> Self {
        GlmConfig {
            deviance_rel_tol: 1e-10,
            score_tol: 1e-8,
            max_iterations: 100,
            max_halvings: 30,
        }
    }
}

/// Fits the GLM of a validated model, ignoring its random effects.
pub fn fit_model_glm(model: &ValidatedModel) -> Result<GlmFit> {
    let trials = if model.family() == Family::Poisson {
        vec![0; model.n()]
    } else {
        model.trials().to_vec()
    };
    fit_glm(model.y(), &trials, model.x(), model.family(), model.link())
}

/// `m` holds trial counts for binomial-like families and is ignored for
/// Poisson. Failure to converge is reported through `converged = false`.
pub fn fit_glm(y: &[i64], m: &[i64], x: &RatMatrix, family: Family, link: &Link) -> Result<GlmFit> {
    fit_glm_with(y, m, x, family, link, &GlmConfig::default())
}

pub fn fit_glm_with(y: &[i64], m: &[i64], x: &RatMatrix, family: Family, link: &Link, cfg: &GlmConfig) -> Result<GlmFit> {
    let lik = ObsLik::new(family, link)?;
    let n = y.len();
    if x.nrows() != n || m.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "y has {n} entries, m has {}, X has {} rows",
            m.len(),
            x.nrows()
        )));
    }
    let rank = column_rank(x);
    if !rank.full_column_rank() {
        return Err(Error::RankDeficient {
            rank: rank.rank,
            cols: rank.cols,
        });
    }
    let separation_flag = mle_missing(y, m, x, family);

    let p = x.ncols();
    let xf = x.to_dmatrix();
    let mut beta = DVector::<f64>::zeros(p);
    if let Some(j) = (0..p).find(|&j| xf.column(j).iter().all(|&v| v == 1.0)) {
        beta[j] = initial_intercept(y, m, family, link);
    }

    let deviance = |b: &DVector<f64>| -> f64 {
        let eta = &xf * b;
        let mut s = CompensatedSum::new();
        for i in 0..n {
            s.add(lik.saturated_kernel(y[i], m[i]) - lik.kernel(eta[i], y[i], m[i]));
        }
        2.0 * s.value()
    };
    let derivatives = |b: &DVector<f64>| -> (DVector<f64>, DMatrix<f64>) {
        let eta = &xf * b;
        let mut grad = DVector::zeros(p);
        let mut info = DMatrix::zeros(p, p);
        for i in 0..n {
            let t = lik.term(eta[i], y[i], m[i]);
            let row = xf.row(i);
            grad += row.transpose() * t.d1;
            info += row.transpose() * row * (-t.d2);
        }
        (grad, info)
    };

    let mut dev = deviance(&beta);
    let (mut grad, mut info) = derivatives(&beta);
    let mut iterations = 0;
    let mut converged = grad.amax() < cfg.score_tol;
    while !converged && iterations < cfg.max_iterations {
        iterations += 1;
        let Some(step) = solve_spd(&info, &grad) else {
            break;
        };
        let mut scale = 1.0;
        let mut accepted = None;
        for _ in 0..=cfg.max_halvings {
            let candidate = &beta + &step * scale;
            let d = deviance(&candidate);
            if d.is_finite() && d <= dev + 1e-12 * dev.abs().max(1.0) {
                accepted = Some((candidate, d));
                break;
            }
            scale *= 0.5;
        }
        let Some((next, next_dev)) = accepted else {
            break;
        };
        let rel_change = (dev - next_dev).abs() / (next_dev.abs() + 0.1);
        beta = next;
        dev = next_dev;
        (grad, info) = derivatives(&beta);
        converged = grad.amax() < cfg.score_tol || rel_change < cfg.deviance_rel_tol;
    }

    Ok(GlmFit {
        beta_hat: beta.iter().copied().collect(),
        converged,
        iterations,
        separation_flag,
        deviance: dev,
        score_norm: grad.amax(),
    })
}

fn solve_spd(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    if let Some(ch) = a.clone().cholesky() {
        return Some(ch.solve(b));
    }
    a.clone().lu().solve(b)
}

fn initial_intercept(y: &[i64], m: &[i64], family: Family, link: &Link) -> f64 {
    let sum_y: f64 = y.iter().map(|&v| v as f64).sum();
    match family {
        Family::Poisson => ((sum_y + 0.5) / y.len() as f64).ln(),
        Family::Binomial | Family::Bernoulli => {
            let sum_m: f64 = m.iter().map(|&v| v as f64).sum();
            let p = (sum_y + 0.5) / (sum_m + 1.0);
            match link {
                Link::Probit => Normal::standard().inverse_cdf(p),
                _ => (p / (1.0 - p)).ln(),
            }
        }
    }
}

/// The MLE fails to exist exactly when no positive vector balances the rows
/// of the signed augmented design. Poisson data use m_i = y_i + 1, which
/// makes every positive count interior.
fn mle_missing(y: &[i64], m: &[i64], x: &RatMatrix, family: Family) -> bool {
    let trials: Vec<i64> = match family {
        Family::Poisson => y.iter().map(|&v| v + 1).collect(),
        _ => m.to_vec(),
    };
    let empty = RatMatrix::zeros(y.len(), 0);
    let bundle = build_bundle_from(x, &empty, y, &trials);
    !exists_positive_null(&bundle.x_star).exists
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn ones(n: usize) -> RatMatrix {
        RatMatrix::from_row_major(n, 1, vec![crate::numeric::rat(1); n])
    }

    #[test]
    fn bernoulli_intercept_is_logit_of_mean() {
        let y = [1, 0, 1, 0, 0, 1, 0, 0, 0, 0];
        let fit = fit_glm(&y, &[1; 10], &ones(10), Family::Bernoulli, &Link::Logit).unwrap();
        assert!(fit.converged && !fit.separation_flag);
        assert_relative_eq!(fit.beta_hat[0], (3.0f64 / 7.0).ln(), max_relative = 1e-10);
    }

    #[test]
    fn poisson_intercept_is_log_mean() {
        let fit = fit_glm(&[1, 2, 3], &[0; 3], &ones(3), Family::Poisson, &Link::Log).unwrap();
        assert!(fit.converged);
        assert_relative_eq!(fit.beta_hat[0], 2f64.ln(), max_relative = 1e-10);
    }

    #[test]
    fn probit_intercept_is_probit_of_mean() {
        let fit = fit_glm(&[1, 2, 0], &[4, 4, 4], &ones(3), Family::Binomial, &Link::Probit).unwrap();
        assert!(fit.converged);
        assert_relative_eq!(fit.beta_hat[0], Normal::standard().inverse_cdf(0.25), max_relative = 1e-9);
    }

    #[test]
    fn separated_binary_data_are_flagged() {
        let x = RatMatrix::from_i64_rows(&[&[1, -2], &[1, -1], &[1, 1], &[1, 2]]);
        let fit = fit_glm(&[0, 0, 1, 1], &[1; 4], &x, Family::Bernoulli, &Link::Logit).unwrap();
        assert!(fit.separation_flag);
    }

    #[test]
    fn overlapping_binary_data_fit_and_satisfy_score_equations() {
        let x = RatMatrix::from_i64_rows(&[&[1, -2], &[1, -1], &[1, 0], &[1, 1], &[1, 2], &[1, 3]]);
        let y = [0, 1, 0, 1, 0, 1];
        let fit = fit_glm(&y, &[1; 6], &x, Family::Bernoulli, &Link::Logit).unwrap();
        assert!(fit.converged && !fit.separation_flag);
        for j in 0..2 {
            let mut s = 0.0;
            for i in 0..6 {
                let eta = fit.beta_hat[0] + fit.beta_hat[1] * crate::numeric::to_f64(&x[(i, 1)]);
                let mu = crate::model::logistic(eta);
                s += crate::numeric::to_f64(&x[(i, j)]) * (y[i] as f64 - mu);
            }
            assert!(s.abs() < 1e-8);
        }
    }

    #[test]
    fn poisson_all_zero_counts_have_no_mle() {
        let fit = fit_glm(&[0, 0, 0], &[0; 3], &ones(3), Family::Poisson, &Link::Log).unwrap();
        assert!(fit.separation_flag);
    }

    #[test]
    fn rank_deficient_design_is_rejected() {
        let x = RatMatrix::from_i64_rows(&[&[1, 2], &[1, 2], &[1, 2]]);
        let err = fit_glm(&[0, 1, 0], &[1; 3], &x, Family::Bernoulli, &Link::Logit).unwrap_err();
        assert_eq!(err, Error::RankDeficient { rank: 1, cols: 2 });
    }
}
