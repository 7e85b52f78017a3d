//! GLMM description: response family, link, design matrices and the
//! per-block priors on random-effect precisions.

use std::fmt;
use std::ops::Range;

use num_traits::{Signed, Zero};
use serde::{Deserialize, Serialize};
use statrs::distribution::{Continuous, ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::numeric::{to_f64, RatMatrix, Rational};

/// Response distribution.
///
/// All supported families have a monotone cumulant function b(θ). The normal
/// family, whose b(θ) = θ²/2 is not monotone, is deliberately absent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Family {
    /// Binomial with per-observation trial counts m_i.
    Binomial,
    /// Binary responses; kept distinct from `Binomial` with m_i = 1.
    #[serde(alias = "binary")]
    Bernoulli,
    Poisson,
}

impl Family {
    pub fn b_monotone(self) -> bool {
        match self {
            Family::Binomial | Family::Bernoulli | Family::Poisson => true,
        }
    }

    pub fn is_binomial_like(self) -> bool {
        matches!(self, Family::Binomial | Family::Bernoulli)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Family::Binomial => "binomial",
            Family::Bernoulli => "bernoulli",
            Family::Poisson => "poisson",
        };
        f.write_str(s)
    }
}

/// How many absolute moments of the latent variable δ ~ F are known to be finite.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "order")]
pub enum MomentOrder {
    All,
    Finite(f64),
    Undeclared,
}

impl MomentOrder {
    /// `Some(true)` if E|δ|^order is known finite, `Some(false)` if it is
    /// known only up to a smaller order, `None` when nothing is declared.
    pub fn covers(self, order: f64) -> Option<bool> {
        match self {
            MomentOrder::All => Some(true),
            MomentOrder::Finite(k) => Some(k >= order),
            MomentOrder::Undeclared => None,
        }
    }
}

/// Link between the linear predictor and the mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Link {
    Logit,
    Probit,
    Log,
    /// A user-supplied cdf F known only through its declared moment order.
    UserCdf {
        #[serde(default)]
        name: Option<String>,
        #[serde(default)]
        moment_order: Option<f64>,
    },
}

impl Link {
    pub fn all_moments_finite(&self) -> bool {
        matches!(self, Link::Logit | Link::Probit)
    }

    pub fn moment_order(&self) -> MomentOrder {
        match self {
            Link::Logit | Link::Probit | Link::Log => MomentOrder::All,
            Link::UserCdf { moment_order, .. } => match moment_order {
                Some(k) if k.is_infinite() && *k > 0.0 => MomentOrder::All,
                Some(k) => MomentOrder::Finite(*k),
                None => MomentOrder::Undeclared,
            },
        }
    }

    /// Inverse link for a single trial: F(η) for binomial links, e^η for log.
    /// `None` for user cdfs, which are not evaluable.
    pub fn inverse(&self, eta: f64) -> Option<f64> {
        match self {
            Link::Logit => Some(logistic(eta)),
            Link::Probit => Some(std_normal().cdf(eta)),
            Link::Log => Some(eta.exp()),
            Link::UserCdf { .. } => None,
        }
    }

    /// Derivative of the single-trial mean with respect to η.
    pub fn mean_derivative(&self, eta: f64) -> Option<f64> {
        match self {
            Link::Logit => {
                let p = logistic(eta);
                Some(p * (1.0 - p))
            }
            Link::Probit => Some(std_normal().pdf(eta)),
            Link::Log => Some(eta.exp()),
            Link::UserCdf { .. } => None,
        }
    }

    pub fn is_canonical_for(&self, family: Family) -> bool {
        match family {
            Family::Binomial | Family::Bernoulli => *self == Link::Logit,
            Family::Poisson => *self == Link::Log,
        }
    }

    fn supports(&self, family: Family) -> bool {
        match family {
            Family::Binomial | Family::Bernoulli => !matches!(self, Link::Log),
            Family::Poisson => matches!(self, Link::Log),
        }
    }
}

impl fmt::Display for Link {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Link::Logit => f.write_str("logit"),
            Link::Probit => f.write_str("probit"),
            Link::Log => f.write_str("log"),
            Link::UserCdf { name: Some(n), .. } => write!(f, "user_cdf({n})"),
            Link::UserCdf { name: None, .. } => f.write_str("user_cdf"),
        }
    }
}

pub(crate) fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

pub(crate) fn std_normal() -> Normal {
    Normal::standard()
}

/// Whether a block's prior on τ_j is gamma-type (b_j > 0) or power-type (b_j = 0).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PriorKind {
    Gamma,
    Power,
}

/// Prior π(τ_j) ∝ τ_j^{a_j - 1} exp(-b_j τ_j) on the precision of a block of
/// `q` random effects.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PriorBlock {
    pub q: usize,
    pub a: Rational,
    pub b: Rational,
}

impl PriorBlock {
    pub fn new(q: usize, a: Rational, b: Rational) -> Self {
        PriorBlock { q, a, b }
    }

    pub fn kind(&self) -> PriorKind {
        if self.b.is_zero() {
            PriorKind::Power
        } else {
            PriorKind::Gamma
        }
    }

    pub fn a_f64(&self) -> f64 {
        to_f64(&self.a)
    }

    pub fn b_f64(&self) -> f64 {
        to_f64(&self.b)
    }
}

/// An unvalidated GLMM. `m` is required for `Binomial` and ignored otherwise.
#[derive(Debug, Clone, PartialEq)]
pub struct GlmmModel {
    pub family: Family,
    pub link: Link,
    pub y: Vec<i64>,
    pub m: Option<Vec<i64>>,
    pub x: RatMatrix,
    pub z: RatMatrix,
    pub blocks: Vec<PriorBlock>,
}

/// A model whose invariants have been checked, with block column ranges resolved.
#[derive(Debug, Clone, PartialEq)]
pub struct ValidatedModel {
    model: GlmmModel,
    trials: Vec<i64>,
    offsets: Vec<Range<usize>>,
    x_f64: Vec<Vec<f64>>,
    z_f64: Vec<Vec<f64>>,
}

pub fn validate(model: GlmmModel) -> Result<ValidatedModel> {
    let n = model.y.len();
    if model.x.nrows() != n {
        return Err(Error::DimensionMismatch(format!(
            "X has {} rows but y has length {n}",
            model.x.nrows()
        )));
    }
    if model.z.nrows() != n {
        return Err(Error::DimensionMismatch(format!(
            "Z has {} rows but y has length {n}",
            model.z.nrows()
        )));
    }
    if model.x.ncols() == 0 {
        return Err(Error::DimensionMismatch("X has no columns".into()));
    }
    if model.blocks.is_empty() {
        return Err(Error::NoRandomEffects);
    }
    if !model.link.supports(model.family) {
        return Err(Error::UnsupportedLink {
            family: model.family.to_string(),
            link: model.link.to_string(),
        });
    }

    let mut offsets = Vec::with_capacity(model.blocks.len());
    let mut start = 0;
    for (j, block) in model.blocks.iter().enumerate() {
        if block.q == 0 {
            return Err(Error::EmptyBlock(j));
        }
        if block.b.is_negative() {
            return Err(Error::InvalidHyperparameter {
                block: j,
                reason: "b must be nonnegative".into(),
            });
        }
        offsets.push(start..start + block.q);
        start += block.q;
    }
    if start != model.z.ncols() {
        return Err(Error::DimensionMismatch(format!(
            "blocks cover {start} columns but Z has {}",
            model.z.ncols()
        )));
    }

    let trials = match model.family {
        Family::Binomial => {
            let m = model
                .m
                .as_ref()
                .ok_or_else(|| Error::DimensionMismatch("binomial model needs trial counts m".into()))?;
            if m.len() != n {
                return Err(Error::DimensionMismatch(format!(
                    "m has length {} but y has length {n}",
                    m.len()
                )));
            }
            for (i, (&yi, &mi)) in model.y.iter().zip(m).enumerate() {
                if mi < 1 {
                    return Err(Error::ResponseOutOfRange {
                        index: i,
                        reason: format!("trial count m = {mi} must be at least 1"),
                    });
                }
                if yi < 0 || yi > mi {
                    return Err(Error::ResponseOutOfRange {
                        index: i,
                        reason: format!("y = {yi} outside [0, {mi}]"),
                    });
                }
            }
            m.clone()
        }
        Family::Bernoulli => {
            for (i, &yi) in model.y.iter().enumerate() {
                if yi != 0 && yi != 1 {
                    return Err(Error::ResponseOutOfRange {
                        index: i,
                        reason: format!("binary response must be 0 or 1, got {yi}"),
                    });
                }
            }
            vec![1; n]
        }
        Family::Poisson => {
            for (i, &yi) in model.y.iter().enumerate() {
                if yi < 0 {
                    return Err(Error::ResponseOutOfRange {
                        index: i,
                        reason: format!("count must be nonnegative, got {yi}"),
                    });
                }
            }
            Vec::new()
        }
    };

    let x_f64 = model.x.to_f64_rows();
    let z_f64 = model.z.to_f64_rows();
    Ok(ValidatedModel {
        model,
        trials,
        offsets,
        x_f64,
        z_f64,
    })
}

impl ValidatedModel {
    pub fn model(&self) -> &GlmmModel {
        &self.model
    }

    pub fn into_model(self) -> GlmmModel {
        self.model
    }

    pub fn family(&self) -> Family {
        self.model.family
    }

    pub fn link(&self) -> &Link {
        &self.model.link
    }

    pub fn y(&self) -> &[i64] {
        &self.model.y
    }

    /// Trial counts; all ones for Bernoulli, empty for Poisson.
    pub fn trials(&self) -> &[i64] {
        &self.trials
    }

    pub fn x(&self) -> &RatMatrix {
        &self.model.x
    }

    pub fn z(&self) -> &RatMatrix {
        &self.model.z
    }

    pub fn x_rows(&self) -> &[Vec<f64>] {
        &self.x_f64
    }

    pub fn z_rows(&self) -> &[Vec<f64>] {
        &self.z_f64
    }

    pub fn blocks(&self) -> &[PriorBlock] {
        &self.model.blocks
    }

    /// Columns of Z owned by block `j`.
    pub fn block_columns(&self, j: usize) -> Range<usize> {
        self.offsets[j].clone()
    }

    pub fn n(&self) -> usize {
        self.model.y.len()
    }

    pub fn p(&self) -> usize {
        self.model.x.ncols()
    }

    pub fn q(&self) -> usize {
        self.model.z.ncols()
    }

    pub fn r(&self) -> usize {
        self.model.blocks.len()
    }

    /// Same data with different priors. Block dimensions must match.
    pub fn with_blocks(&self, blocks: Vec<PriorBlock>) -> Result<ValidatedModel> {
        let mut model = self.model.clone();
        model.blocks = blocks;
        validate(model)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numeric::{rat, ratio};

    fn oneway_binomial() -> GlmmModel {
        GlmmModel {
            family: Family::Binomial,
            link: Link::Logit,
            y: vec![0, 4, 2, 4, 3, 5],
            m: Some(vec![3, 4, 5, 4, 3, 5]),
            x: RatMatrix::from_decimal_rows(&[
                &["1", "2.9"],
                &["1", "1.7"],
                &["1", "2.6"],
                &["1", "3.1"],
                &["1", "3.8"],
                &["1", "4.2"],
            ])
            .unwrap(),
            z: RatMatrix::from_i64_rows(&[&[1, 0], &[1, 0], &[1, 0], &[0, 1], &[0, 1], &[0, 1]]),
            blocks: vec![PriorBlock::new(2, ratio(3, 2), ratio(1, 10))],
        }
    }

    #[test]
    fn oneway_binomial_is_valid() {
        let v = validate(oneway_binomial()).unwrap();
        assert_eq!((v.n(), v.p(), v.q(), v.r()), (6, 2, 2, 1));
        assert_eq!(v.block_columns(0), 0..2);
        assert_eq!(v.blocks()[0].kind(), PriorKind::Gamma);
    }

    #[test]
    fn validate_is_idempotent() {
        let once = validate(oneway_binomial()).unwrap();
        let twice = validate(once.clone().into_model()).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn bernoulli_rejects_two() {
        let mut m = oneway_binomial();
        m.family = Family::Bernoulli;
        m.y = vec![0, 2, 0, 1, 1, 0];
        assert!(matches!(
            validate(m),
            Err(Error::ResponseOutOfRange { index: 1, .. })
        ));
    }

    #[test]
    fn short_z_is_a_dimension_mismatch() {
        let mut m = oneway_binomial();
        m.z = RatMatrix::from_i64_rows(&[&[1, 0], &[1, 0], &[1, 0], &[0, 1], &[0, 1]]);
        assert!(matches!(validate(m), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn binomial_checks_counts() {
        let mut m = oneway_binomial();
        m.y[0] = 4;
        assert!(matches!(validate(m), Err(Error::ResponseOutOfRange { index: 0, .. })));

        let mut m = oneway_binomial();
        m.m.as_mut().unwrap()[2] = 0;
        m.y[2] = 0;
        assert!(matches!(validate(m), Err(Error::ResponseOutOfRange { index: 2, .. })));
    }

    #[test]
    fn empty_block_and_block_cover() {
        let mut m = oneway_binomial();
        m.blocks = vec![PriorBlock::new(2, rat(1), rat(1)), PriorBlock::new(0, rat(1), rat(1))];
        assert_eq!(validate(m), Err(Error::EmptyBlock(1)));

        let mut m = oneway_binomial();
        m.blocks = vec![PriorBlock::new(3, rat(1), rat(1))];
        assert!(matches!(validate(m), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn poisson_needs_log_link() {
        let mut m = oneway_binomial();
        m.family = Family::Poisson;
        assert!(matches!(validate(m), Err(Error::UnsupportedLink { .. })));
    }

    #[test]
    fn link_registry() {
        assert!(Link::Logit.all_moments_finite());
        assert!(Link::Probit.all_moments_finite());
        for link in [Link::Logit, Link::Probit, Link::Log] {
            for eta in [-30.0, -2.0, 0.0, 3.0, 20.0] {
                assert!(link.mean_derivative(eta).unwrap() > 0.0, "{link} at {eta}");
            }
        }
        let user = Link::UserCdf {
            name: None,
            moment_order: Some(1.0),
        };
        assert_eq!(user.moment_order().covers(2.0), Some(false));
        let undeclared = Link::UserCdf {
            name: None,
            moment_order: None,
        };
        assert_eq!(undeclared.moment_order().covers(1.0), None);
        assert!(Family::Poisson.b_monotone());
    }
}
