//! `propriety-kit`: posterior propriety checks for GLMMs from the command line.
//!
//! `check` exits 0 for a proper posterior, 1 for improper and 2 when no
//! result decides. Every other subcommand exits 0 on success, and any error
//! exits 3.

mod input;
mod report;

use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use propriety_core::jeffreys::crossover_tau0_with;
use propriety_core::{build_jeffreys, fit_model_glm, truncated_cy, verdict, ClosedFormFamily, CyConfig, EngineOptions, Outcome};

use input::{FamilyArg, ModelArgs};
use report::{Format, Table};

const ERROR_EXIT: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "propriety-kit", version, about = "Posterior propriety checks for generalized linear mixed models")]
struct Cli {
    /// Report format.
    #[arg(long, value_enum, global = true, default_value = "text")]
    format: Format,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Decide posterior propriety from the sufficient and necessary conditions.
    Check {
        #[command(flatten)]
        model: ModelArgs,
        /// Assert a proper prior on the random-effect covariance.
        #[arg(long)]
        assert_proper_psi: bool,
    },
    /// Evaluate the approximate Jeffreys prior on a τ grid.
    Jeffreys {
        #[command(flatten)]
        model: ModelArgs,
        /// Comma-separated precisions.
        #[arg(long, value_delimiter = ',', default_value = "0.01,0.1,1,10,100,1000,10000")]
        tau_grid: Vec<f64>,
    },
    /// Precision where the Jeffreys prior and the closed-form reference prior cross.
    Crossover(CrossoverArgs),
    /// Quadrature estimates of the β-truncated normalizing constant.
    Oracle {
        #[command(flatten)]
        model: ModelArgs,
        /// Comma-separated β box half-widths, increasing.
        #[arg(long, value_delimiter = ',', default_value = "5,10,20,30,40,50")]
        boxes: Vec<f64>,
        /// Prior block whose hyperparameters define π(τ).
        #[arg(long = "prior-block", default_value_t = 0)]
        prior_block: usize,
        #[arg(long, default_value_t = CyConfig::default().rel_tol)]
        rel_tol: f64,
        #[arg(long, default_value_t = CyConfig::default().gh_nodes)]
        gh_nodes: usize,
        /// Restrict τ to `lo,hi` instead of (0, ∞).
        #[arg(long, value_delimiter = ',', num_args = 2)]
        tau_window: Option<Vec<f64>>,
    },
    /// Fit the fixed-effects GLM by Newton-IRLS.
    FitGlm {
        #[command(flatten)]
        model: ModelArgs,
    },
}

#[derive(Debug, Args)]
struct CrossoverArgs {
    #[command(flatten)]
    model: ModelArgs,
    /// Number of observations sharing the single level.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, allow_negative_numbers = true, default_value_t = 0.0)]
    beta_hat: f64,
    /// Relative tolerance on τ₀.
    #[arg(long, default_value_t = 1e-10)]
    tol_root: f64,
}

fn configure_threads() -> Result<()> {
    let Ok(value) = std::env::var("PROPRIETY_KIT_THREADS") else {
        return Ok(());
    };
    let threads: usize = value.trim().parse().ok().filter(|&n| n > 0).with_context(|| {
        format!("PROPRIETY_KIT_THREADS must be a positive integer, got {value:?}")
    })?;
    rayon::ThreadPoolBuilder::new().num_threads(threads).build_global()?;
    Ok(())
}

fn check_exit(outcome: Outcome) -> u8 {
    match outcome {
        Outcome::Proper => 0,
        Outcome::Improper => 1,
        Outcome::Indeterminate => 2,
    }
}

fn run(cli: Cli) -> Result<(String, u8)> {
    let format = cli.format;
    match cli.command {
        Command::Check { model, assert_proper_psi } => {
            if format == Format::Csv {
                bail!("csv output is not available for check; use text or json");
            }
            let model = model.load()?;
            let v = verdict(&model, EngineOptions { assert_proper_psi });
            Ok((report::verdict(&v, format), check_exit(v.outcome)))
        }
        Command::Jeffreys { model, tau_grid } => {
            let model = model.load()?;
            let jp = build_jeffreys(&model)?;
            let closed = ClosedFormFamily::from_model(&model).ok();
            let mut table = Table::new(["block", "tau", "fisher_info", "density", "envelope", "closed_form_density"]);
            for block in 0..jp.blocks() {
                for &tau in &tau_grid {
                    let nk = closed
                        .map(|(family, n)| propriety_core::nk_density(family, n, jp.beta_hat[0], tau))
                        .transpose()?;
                    table.push(vec![
                        block.into(),
                        tau.into(),
                        jp.fisher_info(block, tau)?.into(),
                        jp.density(block, tau)?.into(),
                        jp.envelope(block, tau)?.into(),
                        nk.into(),
                    ]);
                }
            }
            Ok((table.render(format), 0))
        }
        Command::Crossover(args) => {
            let (family, n, beta_hat) = if args.model.is_given() {
                let model = args.model.load()?;
                let (family, n) = ClosedFormFamily::from_model(&model)?;
                (family, n, fit_model_glm(&model)?.beta_hat[0])
            } else {
                let (Some(family), Some(n)) = (args.model.family, args.n) else {
                    bail!("crossover needs --model or both --family and --n");
                };
                let family = match family {
                    FamilyArg::Bernoulli => ClosedFormFamily::Binary,
                    FamilyArg::Poisson => ClosedFormFamily::Poisson,
                    FamilyArg::Binomial => bail!("no closed form for binomial data; use --family binary or poisson"),
                };
                (family, n, args.beta_hat)
            };
            let tau0 = crossover_tau0_with(family, n, beta_hat, args.tol_root)?;
            let mut table = Table::new(["family", "n", "beta_hat", "c", "tau0"]);
            table.push(vec![
                report::family_name(family).into(),
                n.into(),
                beta_hat.into(),
                family.constant(n, beta_hat).into(),
                tau0.into(),
            ]);
            Ok((table.render(format), 0))
        }
        Command::Oracle {
            model,
            boxes,
            prior_block,
            rel_tol,
            gh_nodes,
            tau_window,
        } => {
            let model = model.load()?;
            let prior = model
                .blocks()
                .get(prior_block)
                .with_context(|| format!("prior block {prior_block} does not exist"))?
                .clone();
            let cfg = CyConfig {
                rel_tol,
                gh_nodes,
                tau_window: tau_window.map(|w| (w[0], w[1])),
                ..CyConfig::default()
            };
            let estimates = truncated_cy(&model, &prior, &boxes, &cfg)?;
            let mut table = Table::new(["box", "value", "ratio", "log_value", "rel_error_est"]);
            for e in estimates {
                table.push(vec![e.half_width.into(), e.value.into(), e.ratio.into(), e.log_value.into(), e.rel_error_est.into()]);
            }
            Ok((table.render(format), 0))
        }
        Command::FitGlm { model } => {
            let model = model.load()?;
            let fit = fit_model_glm(&model)?;
            Ok((report::glm(&fit, format), 0))
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = configure_threads().and_then(|_| run(cli));
    match result {
        Ok((text, code)) => {
            print!("{text}");
            ExitCode::from(code)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(ERROR_EXIT)
        }
    }
}
