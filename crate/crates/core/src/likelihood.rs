//! Per-observation log-likelihood terms and their η-derivatives.

use statrs::function::erf::erfc;
use statrs::function::factorial::{ln_binomial, ln_factorial};

use crate::error::{Error, Result};
use crate::model::{Family, Link};

const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Value, first and second derivative of one observation's log pmf in η.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Term {
    pub value: f64,
    pub d1: f64,
    pub d2: f64,
}

/// Evaluator for one family/link pair. Constant terms of the pmf are
/// included so values are true log probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObsLik {
    Logit,
    Probit,
    PoissonLog,
}

impl ObsLik {
    pub fn new(family: Family, link: &Link) -> Result<Self> {
        match (family, link) {
            (Family::Binomial | Family::Bernoulli, Link::Logit) => Ok(ObsLik::Logit),
            (Family::Binomial | Family::Bernoulli, Link::Probit) => Ok(ObsLik::Probit),
            (Family::Poisson, Link::Log) => Ok(ObsLik::PoissonLog),
            _ => Err(Error::UnsupportedLink {
                family: family.to_string(),
                link: link.to_string(),
            }),
        }
    }

    /// Normalizing constant: log C(m, y) or -log y!.
    pub fn log_constant(self, y: i64, m: i64) -> f64 {
        match self {
            ObsLik::Logit | ObsLik::Probit => ln_binomial(m as u64, y as u64),
            ObsLik::PoissonLog => -ln_factorial(y as u64),
        }
    }

    /// Log pmf without the normalizing constant.
    pub fn kernel(self, eta: f64, y: i64, m: i64) -> f64 {
        let (yf, mf) = (y as f64, m as f64);
        match self {
            ObsLik::Logit => -yf * softplus(-eta) - (mf - yf) * softplus(eta),
            ObsLik::Probit => weighted(yf, log_ndtr(eta)) + weighted(mf - yf, log_ndtr(-eta)),
            ObsLik::PoissonLog => weighted(yf, eta) - eta.exp(),
        }
    }

    pub fn term(self, eta: f64, y: i64, m: i64) -> Term {
        let (yf, mf) = (y as f64, m as f64);
        let value = self.kernel(eta, y, m);
        let (d1, d2) = match self {
            ObsLik::Logit => {
                // Both tails kept explicitly; y − mσ(η) cancels when σ(η) ≈ 1.
                let p = crate::model::logistic(eta);
                let q = crate::model::logistic(-eta);
                (yf * q - (mf - yf) * p, -mf * p * q)
            }
            ObsLik::Probit => {
                let lp = mills(eta);
                let lm = mills(-eta);
                let d1 = weighted(yf, lp) - weighted(mf - yf, lm);
                let d2 = -weighted(yf, lp * (eta + lp)) - weighted(mf - yf, lm * (lm - eta));
                (d1, d2)
            }
            ObsLik::PoissonLog => {
                let mu = eta.exp();
                (yf - mu, -mu)
            }
        };
        Term { value, d1, d2 }
    }

    /// Saturated log pmf kernel, the maximum of [`ObsLik::kernel`] over η.
    pub fn saturated_kernel(self, y: i64, m: i64) -> f64 {
        let (yf, mf) = (y as f64, m as f64);
        match self {
            ObsLik::Logit | ObsLik::Probit => {
                xlogx(yf) + xlogx(mf - yf) - xlogx(mf)
            }
            ObsLik::PoissonLog => xlogx(yf) - yf,
        }
    }

    /// Derivative of the single-trial mean in η (the variance function for
    /// canonical links).
    pub fn mean_derivative(self, eta: f64) -> f64 {
        match self {
            ObsLik::Logit => crate::model::logistic(eta) * crate::model::logistic(-eta),
            ObsLik::Probit => (-0.5 * eta * eta - LN_SQRT_2PI).exp(),
            ObsLik::PoissonLog => eta.exp(),
        }
    }

    /// Single-trial mean.
    pub fn mean(self, eta: f64) -> f64 {
        match self {
            ObsLik::Logit => crate::model::logistic(eta),
            ObsLik::Probit => log_ndtr(eta).exp(),
            ObsLik::PoissonLog => eta.exp(),
        }
    }
}

/// `w * v` with the convention `0 * (-inf) = 0`.
fn weighted(w: f64, v: f64) -> f64 {
    if w == 0.0 {
        0.0
    } else {
        w * v
    }
}

fn xlogx(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

/// log(1 + e^x) without overflow.
pub fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

/// log Φ(x), accurate far into the lower tail.
pub fn log_ndtr(x: f64) -> f64 {
    if x > -30.0 {
        (0.5 * erfc(-x / std::f64::consts::SQRT_2)).ln()
    } else {
        // Asymptotic expansion of the Mills ratio.
        let x2 = x * x;
        let series = 1.0 - 1.0 / x2 + 3.0 / (x2 * x2) - 15.0 / (x2 * x2 * x2);
        -0.5 * x2 - LN_SQRT_2PI - (-x).ln() + series.ln()
    }
}

/// φ(x) / Φ(x).
pub fn mills(x: f64) -> f64 {
    (-0.5 * x * x - LN_SQRT_2PI - log_ndtr(x)).exp()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn fd(lik: ObsLik, eta: f64, y: i64, m: i64) -> (f64, f64) {
        let h = 1e-4;
        let f = |e| lik.kernel(e, y, m);
        let d1 = (f(eta + h) - f(eta - h)) / (2.0 * h);
        let d2 = (f(eta + h) - 2.0 * f(eta) + f(eta - h)) / (h * h);
        (d1, d2)
    }

    #[test]
    fn derivatives_match_finite_differences() {
        for lik in [ObsLik::Logit, ObsLik::Probit, ObsLik::PoissonLog] {
            for &eta in &[-3.0, -0.4, 0.0, 1.1, 2.5] {
                for &(y, m) in &[(0, 3), (2, 5), (4, 4)] {
                    let t = lik.term(eta, y, m);
                    let (d1, d2) = fd(lik, eta, y, m);
                    assert_relative_eq!(t.d1, d1, epsilon = 1e-6, max_relative = 1e-6);
                    assert_relative_eq!(t.d2, d2, epsilon = 1e-4, max_relative = 1e-4);
                }
            }
        }
    }

    #[test]
    fn logit_matches_direct_pmf() {
        let p: f64 = 0.3;
        let eta = (p / (1.0 - p)).ln();
        let lik = ObsLik::Logit;
        let v = lik.kernel(eta, 2, 5) + lik.log_constant(2, 5);
        assert_relative_eq!(v, (10.0 * p.powi(2) * (1.0 - p).powi(3)).ln(), max_relative = 1e-12);
        assert_relative_eq!(lik.kernel(0.0, 1, 1), 0.5f64.ln(), max_relative = 1e-15);
    }

    #[test]
    fn poisson_matches_direct_pmf() {
        let lik = ObsLik::PoissonLog;
        let v = lik.kernel(2f64.ln(), 3, 0) + lik.log_constant(3, 0);
        assert_relative_eq!(v, (8.0 * (-2f64).exp() / 6.0).ln(), max_relative = 1e-12);
    }

    #[test]
    fn log_ndtr_is_continuous_across_branches() {
        let a = log_ndtr(-30.0 + 1e-9);
        let b = log_ndtr(-30.0 - 1e-9);
        assert_relative_eq!(a, b, max_relative = 1e-9);
        assert_relative_eq!(log_ndtr(0.0), 0.5f64.ln(), max_relative = 1e-15);
        assert!(log_ndtr(40.0).abs() < 1e-300);
    }

    #[test]
    fn saturated_kernel_bounds_kernel() {
        for lik in [ObsLik::Logit, ObsLik::Probit, ObsLik::PoissonLog] {
            for &eta in &[-2.0, 0.0, 1.0] {
                assert!(lik.kernel(eta, 2, 5) <= lik.saturated_kernel(2, 5) + 1e-12);
            }
        }
    }

    #[test]
    fn rejects_unsupported_pairs() {
        assert!(ObsLik::new(Family::Poisson, &Link::Logit).is_err());
        assert!(ObsLik::new(Family::Binomial, &Link::Log).is_err());
        let user = Link::UserCdf {
            name: None,
            moment_order: None,
        };
        assert!(ObsLik::new(Family::Binomial, &user).is_err());
    }
}
