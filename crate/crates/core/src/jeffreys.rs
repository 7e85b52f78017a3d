//! Approximate independence Jeffreys prior for random-effect precisions,
//! its power-prior envelope, and the closed-form comparator priors for the
//! single-intercept, single-random-effect case.
//!
//! For block i and level m, `c_im = Σ_k z_imk² t'(x_kᵀβ̂)` where t is the
//! mean function of one observation and β̂ the fixed-effects GLM fit. Then
//! the Fisher information for τ_i is approximately
//! `Σ_m [1/(2τ²) − 1/(2(τ + c_im)²)]` and the prior density is its square
//! root. Using `τ + c ≥ 2√(τc)` bounds each term, giving the envelope
//! `(Σ_m √c_im / 2)^{1/2} τ^{-5/4}`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::glm::fit_model_glm;
use crate::likelihood::ObsLik;
use crate::model::{Family, ValidatedModel};
use crate::roots::{bisect, expand_bracket};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct JeffreysPrior {
    /// `c_constants[i][m]` for block i, level m.
    pub c_constants: Vec<Vec<f64>>,
    pub beta_hat: Vec<f64>,
    /// `(Σ_m √c_im / 2)^{1/2}` per block.
    pub envelope_scale: Vec<f64>,
    /// `Σ_k z_imk (y_k − E y_k)` at β̂, used by the unsimplified information.
    pub residual_sums: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ConditionalMoments {
    pub u_tilde: f64,
    pub v_tilde: f64,
}

/// One observation attached to a random-effect level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LevelObservation {
    pub z: f64,
    pub y: f64,
    pub mean: f64,
    /// t'(η) at the linearization point.
    pub slope: f64,
}

/// Normal approximation to the conditional law of one random-effect level
/// given its precision and the level's data.
pub fn approx_conditional_moments(level: &[LevelObservation], tau: f64) -> Result<ConditionalMoments> {
    check_tau(tau)?;
    let residual: f64 = level.iter().map(|o| o.z * (o.y - o.mean)).sum();
    let c: f64 = level.iter().map(|o| o.z * o.z * o.slope).sum();
    Ok(ConditionalMoments {
        u_tilde: residual / tau,
        v_tilde: 1.0 / (tau + c),
    })
}

fn check_tau(tau: f64) -> Result<()> {
    if tau > 0.0 && tau.is_finite() {
        Ok(())
    } else {
        Err(Error::NonpositiveTau(tau))
    }
}

fn envelope_scale(c: &[f64]) -> f64 {
    (c.iter().map(|v| v.sqrt()).sum::<f64>() / 2.0).sqrt()
}

impl JeffreysPrior {
    /// Prior from known constants, one vector per block.
    pub fn from_constants(c_constants: Vec<Vec<f64>>, beta_hat: Vec<f64>) -> Result<Self> {
        for (i, block) in c_constants.iter().enumerate() {
            if block.is_empty() {
                return Err(Error::EmptyBlock(i));
            }
            if let Some(bad) = block.iter().find(|c| !(c.is_finite() && **c >= 0.0)) {
                return Err(Error::InvalidHyperparameter {
                    block: i,
                    reason: format!("constant {bad} is not a finite nonnegative number"),
                });
            }
        }
        let residual_sums = c_constants.iter().map(|b| vec![0.0; b.len()]).collect();
        let envelope_scale = c_constants.iter().map(|b| envelope_scale(b)).collect();
        Ok(JeffreysPrior {
            c_constants,
            beta_hat,
            envelope_scale,
            residual_sums,
        })
    }

    pub fn blocks(&self) -> usize {
        self.c_constants.len()
    }

    fn block(&self, i: usize) -> Result<&[f64]> {
        self.c_constants
            .get(i)
            .map(Vec::as_slice)
            .ok_or_else(|| Error::DimensionMismatch(format!("block {i} out of range ({} blocks)", self.blocks())))
    }

    /// `Σ_m [1/(2τ²) − 1/(2(τ+c)²)]`, each term written as
    /// `c(2τ + c) / (2τ²(τ + c)²)` to avoid cancellation.
    pub fn fisher_info(&self, i: usize, tau: f64) -> Result<f64> {
        check_tau(tau)?;
        Ok(self
            .block(i)?
            .iter()
            .map(|&c| c * (2.0 * tau + c) / (2.0 * tau * tau * (tau + c) * (tau + c)))
            .sum())
    }

    pub fn density(&self, i: usize, tau: f64) -> Result<f64> {
        Ok(self.fisher_info(i, tau)?.sqrt())
    }

    pub fn log_density(&self, i: usize, tau: f64) -> Result<f64> {
        Ok(0.5 * self.fisher_info(i, tau)?.ln())
    }

    pub fn envelope(&self, i: usize, tau: f64) -> Result<f64> {
        check_tau(tau)?;
        self.block(i)?;
        Ok(self.envelope_scale[i] * tau.powf(-1.25))
    }

    /// Information keeping the squared conditional-mean term:
    /// `Σ_m [1/(2τ²) − ṽ²/2 − ṽũ²]`. May be negative.
    pub fn fisher_info_unsimplified(&self, i: usize, tau: f64) -> Result<f64> {
        check_tau(tau)?;
        let c = self.block(i)?;
        Ok(c.iter()
            .zip(&self.residual_sums[i])
            .map(|(&c, &r)| {
                let v = 1.0 / (tau + c);
                let u = r / tau;
                c * (2.0 * tau + c) / (2.0 * tau * tau * (tau + c) * (tau + c)) - v * u * u
            })
            .sum())
    }

    /// Per-level observation lists of block `i` at β̂.
    pub fn level_data(model: &ValidatedModel, beta_hat: &[f64], i: usize) -> Result<Vec<Vec<LevelObservation>>> {
        let lik = ObsLik::new(model.family(), model.link())?;
        let eta: Vec<f64> = model
            .x_rows()
            .iter()
            .map(|row| row.iter().zip(beta_hat).map(|(x, b)| x * b).sum())
            .collect();
        let z = model.z_rows();
        Ok(model
            .block_columns(i)
            .map(|col| {
                (0..model.n())
                    .filter(|&k| z[k][col] != 0.0)
                    .map(|k| {
                        let trials = match model.family() {
                            Family::Poisson => 1.0,
                            _ => model.trials()[k] as f64,
                        };
                        LevelObservation {
                            z: z[k][col],
                            y: model.y()[k] as f64,
                            mean: trials * lik.mean(eta[k]),
                            slope: trials * lik.mean_derivative(eta[k]),
                        }
                    })
                    .collect()
            })
            .collect())
    }
}

/// Builds the prior from a model: one GLM fit, then constants per level.
pub fn build_jeffreys(model: &ValidatedModel) -> Result<JeffreysPrior> {
    if !model.link().is_canonical_for(model.family()) {
        return Err(Error::NonCanonicalLink);
    }
    let fit = fit_model_glm(model)?;
    if fit.separation_flag {
        return Err(Error::Separation);
    }
    let mut c_constants = Vec::with_capacity(model.r());
    let mut residual_sums = Vec::with_capacity(model.r());
    for i in 0..model.r() {
        let levels = JeffreysPrior::level_data(model, &fit.beta_hat, i)?;
        c_constants.push(levels.iter().map(|l| l.iter().map(|o| o.z * o.z * o.slope).sum()).collect());
        residual_sums.push(levels.iter().map(|l| l.iter().map(|o| o.z * (o.y - o.mean)).sum()).collect());
    }
    let mut jp = JeffreysPrior::from_constants(c_constants, fit.beta_hat)?;
    jp.residual_sums = residual_sums;
    Ok(jp)
}

pub fn jeffreys_density(jp: &JeffreysPrior, block: usize, tau: f64) -> Result<f64> {
    jp.density(block, tau)
}

pub fn jeffreys_envelope(jp: &JeffreysPrior, block: usize, tau: f64) -> Result<f64> {
    jp.envelope(block, tau)
}

pub fn fisher_info_tau(jp: &JeffreysPrior, block: usize, tau: f64) -> Result<f64> {
    jp.fisher_info(block, tau)
}

/// Response families with a closed-form comparator prior.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ClosedFormFamily {
    Binary,
    Poisson,
}

impl ClosedFormFamily {
    /// `c = n t'(β̂)` for n observations sharing one intercept and one level.
    pub fn constant(self, n: usize, beta_hat: f64) -> f64 {
        let n = n as f64;
        match self {
            ClosedFormFamily::Binary => {
                // e^β / (1 + e^β)² written symmetrically in β.
                let e = (-beta_hat.abs()).exp();
                n * e / ((1.0 + e) * (1.0 + e))
            }
            ClosedFormFamily::Poisson => n * beta_hat.exp(),
        }
    }

    /// Scope check: intercept-only X, one random-effect column with one block.
    pub fn from_model(model: &ValidatedModel) -> Result<(Self, usize)> {
        if model.p() != 1 || model.q() != 1 || model.r() != 1 {
            return Err(Error::OutOfScope(format!(
                "closed form needs p = q = r = 1, got p = {}, q = {}, r = {}",
                model.p(),
                model.q(),
                model.r()
            )));
        }
        let family = match model.family() {
            Family::Bernoulli => ClosedFormFamily::Binary,
            Family::Binomial if model.trials().iter().all(|&m| m == 1) => ClosedFormFamily::Binary,
            Family::Poisson => ClosedFormFamily::Poisson,
            other => return Err(Error::OutOfScope(format!("closed form unavailable for {other} data with m > 1"))),
        };
        Ok((family, model.n()))
    }
}

/// Comparator density `(1 + cτ)^{-1}` with unit proportionality constant.
pub fn nk_density(family: ClosedFormFamily, n: usize, beta_hat: f64, tau: f64) -> Result<f64> {
    if !(tau >= 0.0 && tau.is_finite()) {
        return Err(Error::NonpositiveTau(tau));
    }
    Ok(1.0 / (1.0 + family.constant(n, beta_hat) * tau))
}

/// `log π_J(τ) − log π_NK(τ)` for a single level with constant `c`.
pub fn crossover_gap(c: f64, tau: f64) -> f64 {
    let log_j = 0.5 * (c.ln() + (2.0 * tau + c).ln() - std::f64::consts::LN_2 - 2.0 * tau.ln() - 2.0 * (tau + c).ln());
    let log_nk = -(c * tau).ln_1p();
    log_j - log_nk
}

/// Unique τ₀ with `π_J(τ₀) = π_NK(τ₀)`, to relative tolerance `rel_tol`.
///
/// The gap is decreasing in τ, positive near zero and negative for large τ;
/// the search runs in log τ starting from the large-c asymptote τ₀ ≈ c³.
pub fn crossover_tau0_with(family: ClosedFormFamily, n: usize, beta_hat: f64, rel_tol: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::OutOfScope("crossover needs at least one observation".into()));
    }
    let c = family.constant(n, beta_hat);
    if !(c > 0.0 && c.is_finite()) {
        return Err(Error::RootBracket(format!("constant c = {c} is not positive and finite")));
    }
    let g = |s: f64| crossover_gap(c, s.exp());
    let guess = 3.0 * c.ln();
    let (lo, hi) = expand_bracket(&g, guess - 1.0, guess + 1.0, 60)?;
    // A width δ in log τ is a relative error of about δ in τ.
    let s = bisect(g, lo, hi, rel_tol)?;
    Ok(s.exp())
}

pub fn crossover_tau0(family: ClosedFormFamily, n: usize, beta_hat: f64) -> Result<f64> {
    crossover_tau0_with(family, n, beta_hat, 1e-10)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn single(c: f64) -> JeffreysPrior {
        JeffreysPrior::from_constants(vec![vec![c]], vec![0.0]).unwrap()
    }

    #[test]
    fn conditional_moments_examples() {
        let empty = approx_conditional_moments(&[], 2.0).unwrap();
        assert_eq!(empty.u_tilde, 0.0);
        assert_eq!(empty.v_tilde, 0.5);

        let obs = LevelObservation {
            z: 1.0,
            y: 3.0,
            mean: 2.0,
            slope: 2.0,
        };
        let m = approx_conditional_moments(&[obs], 1.0).unwrap();
        assert_relative_eq!(m.u_tilde, 1.0);
        assert_relative_eq!(m.v_tilde, 1.0 / 3.0);

        let centered = LevelObservation { y: 2.0, ..obs };
        assert_eq!(approx_conditional_moments(&[centered, centered], 0.7).unwrap().u_tilde, 0.0);
        assert_eq!(approx_conditional_moments(&[obs], 0.0), Err(Error::NonpositiveTau(0.0)));
    }

    #[test]
    fn zero_constants_give_zero_density() {
        let jp = single(0.0);
        for tau in [1e-3, 1.0, 1e5] {
            assert_eq!(jp.density(0, tau).unwrap(), 0.0);
            assert_eq!(jp.envelope(0, tau).unwrap(), 0.0);
        }
    }

    #[test]
    fn envelope_examples() {
        assert_relative_eq!(single(1.0).envelope(0, 1.0).unwrap(), 0.5f64.sqrt(), max_relative = 1e-15);
        let jp = single(4.0);
        assert!(jp.density(0, 1.0).unwrap() <= 1.0);
        assert_relative_eq!(jp.envelope(0, 1.0).unwrap(), 1.0, max_relative = 1e-15);
    }

    #[test]
    fn information_matches_direct_formula() {
        let jp = JeffreysPrior::from_constants(vec![vec![0.3, 2.0, 11.0]], vec![]).unwrap();
        let tau = 1.7;
        let direct: f64 = [0.3, 2.0, 11.0]
            .iter()
            .map(|c| 0.5 / (tau * tau) - 0.5 / ((tau + c) * (tau + c)))
            .sum();
        assert_relative_eq!(jp.fisher_info(0, tau).unwrap(), direct, max_relative = 1e-13);
        assert_relative_eq!(jp.density(0, tau).unwrap().powi(2), direct, max_relative = 1e-13);
        // Large constants leave q/(2τ²).
        let big = JeffreysPrior::from_constants(vec![vec![1e12, 1e12]], vec![]).unwrap();
        assert_relative_eq!(big.fisher_info(0, 3.0).unwrap(), 2.0 / 18.0, max_relative = 1e-9);
    }

    #[test]
    fn nk_examples() {
        assert_eq!(nk_density(ClosedFormFamily::Binary, 30, 0.4, 0.0).unwrap(), 1.0);
        assert_relative_eq!(nk_density(ClosedFormFamily::Poisson, 30, 0.0, 1.0).unwrap(), 1.0 / 31.0);
        assert_relative_eq!(nk_density(ClosedFormFamily::Binary, 30, 0.0, 4.0 / 7.5).unwrap(), 0.2, max_relative = 1e-14);
    }

    #[test]
    fn crossover_balances_the_two_densities() {
        let tau0 = crossover_tau0(ClosedFormFamily::Binary, 30, 0.0).unwrap();
        let jp = single(7.5);
        let ratio = jp.density(0, tau0).unwrap() / nk_density(ClosedFormFamily::Binary, 30, 0.0, tau0).unwrap();
        assert_relative_eq!(ratio, 1.0, max_relative = 1e-8);
        assert!(crossover_gap(7.5, tau0 * 0.9) > 0.0);
        assert!(crossover_gap(7.5, tau0 * 1.1) < 0.0);
    }

    #[test]
    fn crossover_tracks_cubic_asymptote() {
        for beta in [1.0f64, 2.0, 3.0] {
            let c = 30.0 * beta.exp();
            let tau0 = crossover_tau0(ClosedFormFamily::Poisson, 30, beta).unwrap();
            let r = tau0 / c.powi(3);
            assert!((0.9..=1.1).contains(&r), "ratio {r}");
        }
    }

    #[test]
    fn rejects_nonpositive_tau() {
        let jp = single(1.0);
        assert_eq!(jp.density(0, -1.0), Err(Error::NonpositiveTau(-1.0)));
        assert_eq!(jp.envelope(0, 0.0), Err(Error::NonpositiveTau(0.0)));
        assert!(jp.density(1, 1.0).is_err());
    }
}
