//! Evaluates the sufficient and necessary propriety conditions for a
//! validated model and folds them into a [`Verdict`].
//!
//! Every condition is reported with its evidence: ranks and null vectors,
//! feasibility witnesses or certificates, and the hyperparameter values that
//! were compared. A condition that cannot be evaluated (an undeclared link
//! moment order, a degenerate Poisson sample, mixed prior kinds) is
//! `Unverifiable`, which never counts as a violation.

use num_traits::{Signed, Zero};
use serde::Serialize;

use crate::design::{build_binary_star, build_bundle, poissonize, DesignBundle};
use crate::error::{Error, Result};
use crate::linalg::{column_rank, NullVector, RankMethod, RankResult};
use crate::lp::{exists_positive_null, FeasibilityResult};
use crate::model::{Family, Link, MomentOrder, PriorBlock, PriorKind, ValidatedModel};
use crate::numeric::{format_rational, rat, ratio, to_f64, RatMatrix, Rational};

/// Which result a report evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ResultId {
    /// Binomial data, gamma priors: rank(X) = p with a positive null vector
    /// for X*△, a_j > p/2, b_j > 0, and E|δ|^p finite.
    BinomialGammaSufficient,
    /// Binary counterpart using X* with rows scaled by 1 - 2y_i.
    BinaryGammaSufficient,
    /// Poisson data with log link, reduced to a pseudo-binomial with m_i = max(y).
    PoissonGammaSufficient,
    /// Binomial data, power priors: full rank (X, Z) with a positive null
    /// vector for (X*△, Z*△), -q_j/2 < a_j < 0, and E|δ|^(p - 2Σa_j) finite.
    BinomialPowerSufficient,
    BinaryPowerSufficient,
    PoissonPowerSufficient,
    /// Some blocks are gamma and some are power: no sufficient result covers it.
    MixedPriorKinds,
    /// Binomial or binary data: rank(X) = p and a_j + q_j/2 > 0.
    BinomialNecessary,
    /// Binomial or binary data with full-rank Z: additionally a positive null
    /// vector for X*△ (X* for binary data).
    FullRankZNecessary,
    /// Any family with monotone b(θ) under a proper prior on the random-effect
    /// covariance: rank(X) = p.
    ExponentialFamilyRankNecessary,
}

impl ResultId {
    pub fn role(self) -> Role {
        match self {
            ResultId::BinomialNecessary | ResultId::FullRankZNecessary | ResultId::ExponentialFamilyRankNecessary => {
                Role::Necessary
            }
            _ => Role::Sufficient,
        }
    }

    pub fn describe(self) -> &'static str {
        match self {
            ResultId::BinomialGammaSufficient => "binomial GLMM, gamma priors (sufficient)",
            ResultId::BinaryGammaSufficient => "binary GLMM, gamma priors (sufficient)",
            ResultId::PoissonGammaSufficient => "Poisson GLMM with log link, gamma priors (sufficient)",
            ResultId::BinomialPowerSufficient => "binomial GLMM, power priors (sufficient)",
            ResultId::BinaryPowerSufficient => "binary GLMM, power priors (sufficient)",
            ResultId::PoissonPowerSufficient => "Poisson GLMM with log link, power priors (sufficient)",
            ResultId::MixedPriorKinds => "mixed gamma and power priors (no sufficient result)",
            ResultId::BinomialNecessary => "binomial/binary GLMM (necessary)",
            ResultId::FullRankZNecessary => "binomial/binary GLMM with full-rank Z (necessary)",
            ResultId::ExponentialFamilyRankNecessary => {
                "exponential-family GLMM with proper covariance prior (necessary)"
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    Sufficient,
    Necessary,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    Unverifiable,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Evidence {
    Rank {
        matrix: String,
        rank: usize,
        cols: usize,
        method: RankMethod,
        /// Direction β* with Mβ* = 0 when rank-deficient.
        null_vector: Option<Vec<String>>,
    },
    PositiveNull {
        matrix: String,
        rows: usize,
        exists: bool,
        witness_e: Option<Vec<String>>,
        certificate_h: Option<Vec<String>>,
    },
    Hyperparameters {
        block: usize,
        q: usize,
        a: String,
        b: String,
        requirement: String,
    },
    Moments {
        required_order: String,
        available: MomentOrder,
    },
    Note {
        text: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Subcondition {
    pub name: String,
    pub status: Status,
    pub evidence: Evidence,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ConditionReport {
    pub result: ResultId,
    pub role: Role,
    /// False when the result's hypotheses do not hold (e.g. Z rank-deficient
    /// for [`ResultId::FullRankZNecessary`]); such reports never decide a verdict.
    pub applicable: bool,
    pub subconditions: Vec<Subcondition>,
    pub notes: Vec<String>,
}

impl ConditionReport {
    fn new(result: ResultId) -> Self {
        ConditionReport {
            result,
            role: result.role(),
            applicable: true,
            subconditions: Vec::new(),
            notes: Vec::new(),
        }
    }

    fn push(&mut self, name: impl Into<String>, status: Status, evidence: Evidence) {
        self.subconditions.push(Subcondition {
            name: name.into(),
            status,
            evidence,
        });
    }

    /// All subconditions pass.
    pub fn satisfied(&self) -> bool {
        self.applicable && !self.subconditions.is_empty() && self.subconditions.iter().all(|s| s.status == Status::Pass)
    }

    /// For necessary results: at least one subcondition definitely fails.
    pub fn violated(&self) -> bool {
        self.applicable && self.subconditions.iter().any(|s| s.status == Status::Fail)
    }

    pub fn subcondition(&self, name: &str) -> Option<&Subcondition> {
        self.subconditions.iter().find(|s| s.name == name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Proper,
    Improper,
    Indeterminate,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub outcome: Outcome,
    pub basis: Vec<ConditionReport>,
}

impl Verdict {
    pub fn satisfied_sufficient(&self) -> impl Iterator<Item = &ConditionReport> {
        self.basis.iter().filter(|r| r.role == Role::Sufficient && r.satisfied())
    }

    pub fn violated_necessary(&self) -> impl Iterator<Item = &ConditionReport> {
        self.basis.iter().filter(|r| r.role == Role::Necessary && r.violated())
    }

    /// No satisfied sufficient result coexists with a violated necessary one.
    pub fn is_consistent(&self) -> bool {
        !(self.satisfied_sufficient().next().is_some() && self.violated_necessary().next().is_some())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct EngineOptions {
    /// The user asserts a proper prior on the random-effect covariance, which
    /// enables the exponential-family rank necessity check.
    pub assert_proper_psi: bool,
}

fn fmt_vec(v: &[Rational]) -> Vec<String> {
    v.iter().map(format_rational).collect()
}

fn rank_evidence(matrix: &str, r: &RankResult) -> Evidence {
    Evidence::Rank {
        matrix: matrix.into(),
        rank: r.rank,
        cols: r.cols,
        method: r.method,
        null_vector: r.null_vector.as_ref().map(|v| match v {
            NullVector::Exact(x) => fmt_vec(x),
            NullVector::Float(x) => x.iter().map(|f| format!("{f:e}")).collect(),
        }),
    }
}

fn lp_evidence(matrix: &str, rows: usize, r: &FeasibilityResult) -> Evidence {
    Evidence::PositiveNull {
        matrix: matrix.into(),
        rows,
        exists: r.exists,
        witness_e: r.witness_e.as_deref().map(fmt_vec),
        certificate_h: r.certificate_h.as_deref().map(fmt_vec),
    }
}

fn pass_if(ok: bool) -> Status {
    if ok {
        Status::Pass
    } else {
        Status::Fail
    }
}

fn require_all(model: &ValidatedModel, kind: PriorKind) -> Result<()> {
    if model.blocks().iter().all(|b| b.kind() == kind) {
        Ok(())
    } else {
        Err(Error::WrongPriorKind {
            expected: match kind {
                PriorKind::Gamma => "gamma (b > 0)",
                PriorKind::Power => "power (b = 0)",
            },
        })
    }
}

fn push_rank_and_lp(report: &mut ConditionReport, rank_name: &str, rank_matrix: &RatMatrix, lp_name: &str, lp_matrix: &RatMatrix) {
    let rank = column_rank(rank_matrix);
    report.push(
        format!("{rank_name}_full_column_rank"),
        pass_if(rank.full_column_rank()),
        rank_evidence(rank_name, &rank),
    );
    let lp = exists_positive_null(lp_matrix);
    report.push(
        format!("positive_null_{lp_name}"),
        pass_if(lp.exists),
        lp_evidence(lp_name, lp_matrix.nrows(), &lp),
    );
}

fn push_moment(report: &mut ConditionReport, link: &Link, order: &Rational) {
    let available = link.moment_order();
    let status = match available.covers(to_f64(order)) {
        Some(true) => Status::Pass,
        // Insufficient or undeclared: the result simply cannot be invoked.
        Some(false) | None => Status::Unverifiable,
    };
    report.push(
        "link_moment_order",
        status,
        Evidence::Moments {
            required_order: format_rational(order),
            available,
        },
    );
}

fn gamma_hyper(report: &mut ConditionReport, blocks: &[PriorBlock], p: usize) {
    let half_p = ratio(p as i64, 2);
    for (j, b) in blocks.iter().enumerate() {
        let ok = b.a > half_p && b.b.is_positive();
        report.push(
            format!("hyperparameters_block_{j}"),
            pass_if(ok),
            Evidence::Hyperparameters {
                block: j,
                q: b.q,
                a: format_rational(&b.a),
                b: format_rational(&b.b),
                requirement: format!("a > {} and b > 0", format_rational(&half_p)),
            },
        );
    }
}

fn power_hyper(report: &mut ConditionReport, blocks: &[PriorBlock]) {
    for (j, b) in blocks.iter().enumerate() {
        let lower = -ratio(b.q as i64, 2);
        let ok = b.a > lower && b.a.is_negative();
        report.push(
            format!("hyperparameters_block_{j}"),
            pass_if(ok),
            Evidence::Hyperparameters {
                block: j,
                q: b.q,
                a: format_rational(&b.a),
                b: format_rational(&b.b),
                requirement: format!("{} < a < 0", format_rational(&lower)),
            },
        );
    }
}

fn require_binomial_like(model: &ValidatedModel) -> Result<()> {
    if model.family().is_binomial_like() {
        Ok(())
    } else {
        Err(Error::WrongFamily {
            expected: "binomial or bernoulli".into(),
            actual: model.family().to_string(),
        })
    }
}

/// Gamma-prior sufficient conditions for binomial data (also accepts binary
/// data viewed as binomial with m_i = 1).
pub fn check_sufficient_binomial_gamma(model: &ValidatedModel, bundle: &DesignBundle) -> Result<ConditionReport> {
    require_binomial_like(model)?;
    require_all(model, PriorKind::Gamma)?;
    let mut report = ConditionReport::new(ResultId::BinomialGammaSufficient);
    push_rank_and_lp(&mut report, "x", model.x(), "x_star_aug", &bundle.x_star);
    gamma_hyper(&mut report, model.blocks(), model.p());
    push_moment(&mut report, model.link(), &rat(model.p() as i64));
    Ok(report)
}

pub fn check_sufficient_binary_gamma(model: &ValidatedModel) -> Result<ConditionReport> {
    let (x_star, _) = build_binary_star(model)?;
    require_all(model, PriorKind::Gamma)?;
    let mut report = ConditionReport::new(ResultId::BinaryGammaSufficient);
    push_rank_and_lp(&mut report, "x", model.x(), "x_star", &x_star);
    gamma_hyper(&mut report, model.blocks(), model.p());
    push_moment(&mut report, model.link(), &rat(model.p() as i64));
    Ok(report)
}

fn require_poisson_log(model: &ValidatedModel) -> Result<()> {
    if model.family() != Family::Poisson {
        return Err(Error::WrongFamily {
            expected: "poisson".into(),
            actual: model.family().to_string(),
        });
    }
    if *model.link() != Link::Log {
        return Err(Error::WrongLink);
    }
    Ok(())
}

/// Gamma-prior sufficient conditions for Poisson data. The moment condition
/// is automatic because the reduction uses the logistic cdf.
pub fn check_sufficient_poisson_gamma(model: &ValidatedModel) -> Result<ConditionReport> {
    require_poisson_log(model)?;
    require_all(model, PriorKind::Gamma)?;
    let pseudo = poissonize(model)?;
    let bundle = build_bundle(&pseudo)?;
    let mut report = ConditionReport::new(ResultId::PoissonGammaSufficient);
    push_rank_and_lp(&mut report, "x", pseudo.x(), "x_star_aug", &bundle.x_star);
    gamma_hyper(&mut report, model.blocks(), model.p());
    report.notes.push(format!(
        "pseudo-binomial reduction with m_i = max(y) = {}",
        pseudo.trials().first().copied().unwrap_or(0)
    ));
    Ok(report)
}

/// Power-prior sufficient conditions, dispatched on the family: binomial
/// uses (X*△, Z*△), binary uses (X*, Z*), Poisson goes through the
/// pseudo-binomial reduction with no moment condition.
pub fn check_sufficient_power(model: &ValidatedModel, bundle: Option<&DesignBundle>) -> Result<ConditionReport> {
    require_all(model, PriorKind::Power)?;
    let xz = model.x().hcat(model.z())?;
    let a_sum = model.blocks().iter().fold(Rational::zero(), |acc, b| acc + &b.a);
    let moment_order = rat(model.p() as i64) - rat(2) * a_sum;
    let report = match model.family() {
        Family::Bernoulli => {
            let (xs, zs) = build_binary_star(model)?;
            let mut report = ConditionReport::new(ResultId::BinaryPowerSufficient);
            push_rank_and_lp(&mut report, "xz", &xz, "xz_star", &xs.hcat(&zs)?);
            power_hyper(&mut report, model.blocks());
            push_moment(&mut report, model.link(), &moment_order);
            report
        }
        Family::Binomial => {
            let owned;
            let bundle = match bundle {
                Some(b) => b,
                None => {
                    owned = build_bundle(model)?;
                    &owned
                }
            };
            let mut report = ConditionReport::new(ResultId::BinomialPowerSufficient);
            push_rank_and_lp(&mut report, "xz", &xz, "xz_star_aug", &bundle.xz_star());
            power_hyper(&mut report, model.blocks());
            push_moment(&mut report, model.link(), &moment_order);
            report
        }
        Family::Poisson => {
            require_poisson_log(model)?;
            let pseudo = poissonize(model)?;
            let bundle = build_bundle(&pseudo)?;
            let mut report = ConditionReport::new(ResultId::PoissonPowerSufficient);
            push_rank_and_lp(&mut report, "xz", &xz, "xz_star_aug", &bundle.xz_star());
            power_hyper(&mut report, model.blocks());
            report.notes.push(format!(
                "pseudo-binomial reduction with m_i = max(y) = {}",
                pseudo.trials().first().copied().unwrap_or(0)
            ));
            report
        }
    };
    Ok(report)
}

/// Necessary conditions that apply to this model. The binomial results are
/// applied to gamma and power priors alike (any b_j >= 0).
pub fn check_necessary(model: &ValidatedModel, bundle: Option<&DesignBundle>, options: EngineOptions) -> Vec<ConditionReport> {
    let mut reports = Vec::new();
    let x_rank = column_rank(model.x());

    if model.family().is_binomial_like() {
        let mut report = ConditionReport::new(ResultId::BinomialNecessary);
        report.push("x_full_column_rank", pass_if(x_rank.full_column_rank()), rank_evidence("x", &x_rank));
        for (j, b) in model.blocks().iter().enumerate() {
            let margin = &b.a + ratio(b.q as i64, 2);
            report.push(
                format!("hyperparameters_block_{j}"),
                pass_if(margin.is_positive()),
                Evidence::Hyperparameters {
                    block: j,
                    q: b.q,
                    a: format_rational(&b.a),
                    b: format_rational(&b.b),
                    requirement: "a + q/2 > 0".into(),
                },
            );
        }
        report
            .notes
            .push("applied for gamma and power priors alike (b_j >= 0)".into());
        reports.push(report);

        let z_rank = column_rank(model.z());
        let mut report = ConditionReport::new(ResultId::FullRankZNecessary);
        if z_rank.full_column_rank() {
            let (name, x_star) = if model.family() == Family::Bernoulli {
                ("x_star", build_binary_star(model).expect("bernoulli").0)
            } else {
                let owned;
                let b = match bundle {
                    Some(b) => b,
                    None => {
                        owned = build_bundle(model).expect("binomial-like");
                        &owned
                    }
                };
                ("x_star_aug", b.x_star.clone())
            };
            let lp = exists_positive_null(&x_star);
            report.push(
                format!("positive_null_{name}"),
                pass_if(lp.exists),
                lp_evidence(name, x_star.nrows(), &lp),
            );
        } else {
            report.applicable = false;
            report.notes.push(format!(
                "Z has rank {} < {} columns; this result does not apply",
                z_rank.rank, z_rank.cols
            ));
            report.push(
                "z_full_column_rank",
                Status::Unverifiable,
                rank_evidence("z", &z_rank),
            );
        }
        reports.push(report);
    }

    if options.assert_proper_psi && model.family().b_monotone() {
        let mut report = ConditionReport::new(ResultId::ExponentialFamilyRankNecessary);
        report.push("x_full_column_rank", pass_if(x_rank.full_column_rank()), rank_evidence("x", &x_rank));
        report.notes.push("user asserted a proper prior on the random-effect covariance".into());
        reports.push(report);
    }
    reports
}

/// Report for a sufficient result that could not be evaluated.
fn unverifiable(result: ResultId, name: &str, why: String) -> ConditionReport {
    let mut report = ConditionReport::new(result);
    report.push(name, Status::Unverifiable, Evidence::Note { text: why });
    report
}

fn sufficient_reports(model: &ValidatedModel, bundle: Option<&DesignBundle>) -> Vec<ConditionReport> {
    let kinds: Vec<PriorKind> = model.blocks().iter().map(PriorBlock::kind).collect();
    let all_gamma = kinds.iter().all(|k| *k == PriorKind::Gamma);
    let all_power = kinds.iter().all(|k| *k == PriorKind::Power);
    let family = model.family();

    let outcome = if all_gamma {
        match family {
            Family::Binomial => {
                check_sufficient_binomial_gamma(model, bundle.expect("binomial bundle"))
                    .map_err(|e| (ResultId::BinomialGammaSufficient, e))
            }
            Family::Bernoulli => check_sufficient_binary_gamma(model).map_err(|e| (ResultId::BinaryGammaSufficient, e)),
            Family::Poisson => check_sufficient_poisson_gamma(model).map_err(|e| (ResultId::PoissonGammaSufficient, e)),
        }
    } else if all_power {
        let id = match family {
            Family::Binomial => ResultId::BinomialPowerSufficient,
            Family::Bernoulli => ResultId::BinaryPowerSufficient,
            Family::Poisson => ResultId::PoissonPowerSufficient,
        };
        check_sufficient_power(model, bundle).map_err(|e| (id, e))
    } else {
        Ok(unverifiable(
            ResultId::MixedPriorKinds,
            "uniform_prior_kind",
            "sufficient results cover only all-gamma or all-power priors".into(),
        ))
    };
    match outcome {
        Ok(r) => vec![r],
        Err((id, err)) => vec![unverifiable(id, "preconditions", err.to_string())],
    }
}

pub fn verdict(model: &ValidatedModel, options: EngineOptions) -> Verdict {
    let bundle = if model.family().is_binomial_like() {
        Some(build_bundle(model).expect("binomial-like family"))
    } else {
        None
    };
    let mut basis = check_necessary(model, bundle.as_ref(), options);
    basis.extend(sufficient_reports(model, bundle.as_ref()));

    let improper = basis.iter().any(|r| r.role == Role::Necessary && r.violated());
    let proper = basis.iter().any(|r| r.role == Role::Sufficient && r.satisfied());
    debug_assert!(!(improper && proper), "sufficient and necessary results disagree");
    let outcome = if improper {
        Outcome::Improper
    } else if proper {
        Outcome::Proper
    } else {
        Outcome::Indeterminate
    };
    Verdict { outcome, basis }
}

/// Verdict under the approximate Jeffreys prior on the precisions. The prior
/// is dominated by a power prior with a_j = -1/4, so the power-prior
/// sufficient conditions apply with those hyperparameters; no necessary
/// result covers this prior, so the outcome is never `Improper`.
pub fn jeffreys_verdict(model: &ValidatedModel) -> Result<Verdict> {
    let blocks = model
        .blocks()
        .iter()
        .map(|b| PriorBlock::new(b.q, ratio(-1, 4), Rational::zero()))
        .collect();
    let surrogate = model.with_blocks(blocks)?;
    let mut report = match check_sufficient_power(&surrogate, None) {
        Ok(r) => r,
        Err(e) => unverifiable(power_id(model.family()), "preconditions", e.to_string()),
    };
    if !model.link().is_canonical_for(model.family()) {
        report.push(
            "canonical_link",
            Status::Unverifiable,
            Evidence::Note {
                text: format!("the approximate Jeffreys prior assumes a canonical link, got {}", model.link()),
            },
        );
    }
    report
        .notes
        .push("approximate Jeffreys prior bounded by a power prior with a = -1/4".into());
    let outcome = if report.satisfied() {
        Outcome::Proper
    } else {
        Outcome::Indeterminate
    };
    Ok(Verdict {
        outcome,
        basis: vec![report],
    })
}

fn power_id(family: Family) -> ResultId {
    match family {
        Family::Binomial => ResultId::BinomialPowerSufficient,
        Family::Bernoulli => ResultId::BinaryPowerSufficient,
        Family::Poisson => ResultId::PoissonPowerSufficient,
    }
}
