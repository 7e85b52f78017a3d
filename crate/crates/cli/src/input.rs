//! Model ingestion from a JSON document or from CSV matrices.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, ValueEnum};
use propriety_core::numeric::parse_rational;
use propriety_core::{parse_model_json, validate, Family, GlmmModel, Link, PriorBlock, RatMatrix, Rational, ValidatedModel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FamilyArg {
    Binomial,
    #[value(alias = "binary")]
    Bernoulli,
    Poisson,
}

impl From<FamilyArg> for Family {
    fn from(f: FamilyArg) -> Self {
        match f {
            FamilyArg::Binomial => Family::Binomial,
            FamilyArg::Bernoulli => Family::Bernoulli,
            FamilyArg::Poisson => Family::Poisson,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum LinkArg {
    Logit,
    Probit,
    Log,
}

impl From<LinkArg> for Link {
    fn from(l: LinkArg) -> Self {
        match l {
            LinkArg::Logit => Link::Logit,
            LinkArg::Probit => Link::Probit,
            LinkArg::Log => Link::Log,
        }
    }
}

/// Where the model comes from: `--model` or the CSV quartet.
#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    /// JSON model document.
    #[arg(long, conflicts_with_all = ["x", "z", "y", "m", "family", "link", "block"])]
    pub model: Option<PathBuf>,
    /// Fixed-effect design matrix as CSV.
    #[arg(long, requires_all = ["z", "y", "family", "block"])]
    pub x: Option<PathBuf>,
    /// Random-effect design matrix as CSV.
    #[arg(long)]
    pub z: Option<PathBuf>,
    /// Responses as CSV, one value per row.
    #[arg(long)]
    pub y: Option<PathBuf>,
    /// Trial counts as CSV, one value per row (binomial only).
    #[arg(long)]
    pub m: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub family: Option<FamilyArg>,
    /// Defaults to logit for binomial-like data and log for Poisson.
    #[arg(long, value_enum)]
    pub link: Option<LinkArg>,
    /// Prior block `q:a:b`, repeated in column order of Z.
    #[arg(long, value_parser = parse_block)]
    pub block: Vec<PriorBlock>,
}

fn parse_block(text: &str) -> std::result::Result<PriorBlock, String> {
    let parts: Vec<&str> = text.split(':').collect();
    let [q, a, b] = parts[..] else {
        return Err(format!("expected q:a:b, got {text:?}"));
    };
    let q: usize = q.trim().parse().map_err(|_| format!("block size {q:?} is not a positive integer"))?;
    let num = |s: &str| parse_rational(s.trim()).ok_or_else(|| format!("{s:?} is not a number or fraction"));
    Ok(PriorBlock::new(q, num(a)?, num(b)?))
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => anyhow!("file not found: {}", path.display()),
        _ => anyhow!("cannot read {}: {e}", path.display()),
    })
}

/// Reads a headerless or single-header CSV of exact numbers. A first row
/// that does not parse as numbers is taken as a header.
pub fn read_csv_matrix(path: &Path) -> Result<Vec<Vec<Rational>>> {
    let text = read(path)?;
    let mut reader = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).from_reader(text.as_bytes());
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.with_context(|| format!("parse error in {}", path.display()))?;
        let line = record.position().map_or(i as u64 + 1, |p| p.line());
        let parsed: Option<Vec<Rational>> = record.iter().map(parse_rational).collect();
        match parsed {
            Some(row) => rows.push(row),
            None if i == 0 => continue,
            None => {
                let (field, value) = record.iter().enumerate().find(|(_, v)| parse_rational(v).is_none()).unwrap();
                bail!(
                    "parse error in {} at line {line}, field {}: {value:?} is not a number",
                    path.display(),
                    field + 1
                );
            }
        }
    }
    Ok(rows)
}

fn read_csv_vector(path: &Path) -> Result<Vec<i64>> {
    read_csv_matrix(path)?
        .into_iter()
        .enumerate()
        .map(|(i, row)| match row.as_slice() {
            [v] if v.is_integer() => v.to_integer().try_into().map_err(|_| anyhow!("{}: row {} is out of range", path.display(), i + 1)),
            _ => bail!("{}: row {} must hold a single integer", path.display(), i + 1),
        })
        .collect()
}

fn matrix(path: &Path) -> Result<RatMatrix> {
    let rows = read_csv_matrix(path)?;
    RatMatrix::from_rows(rows).with_context(|| format!("in {}", path.display()))
}

impl ModelArgs {
    pub fn is_given(&self) -> bool {
        self.model.is_some() || self.x.is_some()
    }

    pub fn load(&self) -> Result<ValidatedModel> {
        let model = if let Some(path) = &self.model {
            parse_model_json(&read(path)?).with_context(|| format!("in {}", path.display()))?
        } else if let (Some(x), Some(z), Some(y), Some(family)) = (&self.x, &self.z, &self.y, self.family) {
            let family = Family::from(family);
            let link = self.link.map(Link::from).unwrap_or(match family {
                Family::Poisson => Link::Log,
                _ => Link::Logit,
            });
            GlmmModel {
                family,
                link,
                y: read_csv_vector(y)?,
                m: self.m.as_deref().map(read_csv_vector).transpose()?,
                x: matrix(x)?,
                z: matrix(z)?,
                blocks: self.block.clone(),
            }
        } else {
            bail!("a model is required: pass --model FILE or --x/--z/--y with --family and --block");
        };
        Ok(validate(model)?)
    }
}
