//! Posterior propriety for Bayesian generalized linear mixed models.
//!
//! Given a binomial, Bernoulli or Poisson GLMM with a flat prior on the
//! fixed effects and gamma or power priors on the random-effect precisions,
//! [`engine::verdict`] decides whether the joint posterior is proper,
//! improper, or not covered by any available result. The decision rests on
//! exact rank computations ([`linalg`]) and an exact positive-null-vector
//! feasibility test ([`lp`]) on signed design matrices ([`design`]).
//!
//! [`jeffreys`] builds an approximate independence Jeffreys prior for the
//! precisions and compares it with a closed-form reference prior;
//! [`oracle`] integrates truncated normalizing constants by quadrature to
//! corroborate verdicts numerically.

pub mod design;
pub mod engine;
pub mod error;
pub mod glm;
pub mod io;
pub mod jeffreys;
pub mod likelihood;
pub mod linalg;
pub mod lp;
pub mod model;
pub mod numeric;
pub mod oracle;
pub mod quadrature;
pub mod roots;

pub use design::{build_binary_star, build_bundle, partition_indices, poissonize, DesignBundle, Partition};
pub use engine::{verdict, ConditionReport, EngineOptions, Outcome, ResultId, Status, Verdict};
pub use error::{Error, Result};
pub use glm::{fit_glm, fit_model_glm, GlmFit};
pub use io::{model_to_json, parse_model_json, ModelDocument};
pub use jeffreys::{
    build_jeffreys, crossover_tau0, fisher_info_tau, jeffreys_density, jeffreys_envelope, nk_density, ClosedFormFamily, JeffreysPrior,
};
pub use linalg::{column_rank, RankMethod, RankResult};
pub use lp::{exists_positive_null, FeasibilityResult};
pub use model::{validate, Family, GlmmModel, Link, PriorBlock, PriorKind, ValidatedModel};
pub use numeric::{RatMatrix, Rational};
pub use oracle::{complete_loglik, fisher_fd_oracle, marginal_loglik, truncated_cy, CyConfig, QuadratureEstimate};
