//! Report rendering. JSON keys follow struct declaration order, so identical
//! inputs produce byte-identical output.

use std::fmt::Write as _;

use clap::ValueEnum;
use propriety_core::engine::{Evidence, Role, Status};
use propriety_core::{ClosedFormFamily, GlmFit, Verdict};
use serde_json::{json, Map, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
    Csv,
}

pub fn family_name(family: ClosedFormFamily) -> &'static str {
    match family {
        ClosedFormFamily::Binary => "binary",
        ClosedFormFamily::Poisson => "poisson",
    }
}

fn pretty(value: &Value) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("reports always serialize");
    s.push('\n');
    s
}

/// A rectangular report with one header row.
pub struct Table {
    columns: Vec<&'static str>,
    rows: Vec<Vec<Value>>,
}

impl Table {
    pub fn new<const N: usize>(columns: [&'static str; N]) -> Self {
        Table {
            columns: columns.to_vec(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Value>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    fn cell(v: &Value) -> String {
        match v {
            Value::Null => String::new(),
            Value::String(s) => s.clone(),
            Value::Number(n) => match n.as_f64() {
                Some(f) if n.is_f64() => format!("{f:.10e}"),
                _ => n.to_string(),
            },
            other => other.to_string(),
        }
    }

    pub fn render(&self, format: Format) -> String {
        match format {
            Format::Json => {
                let rows: Vec<Value> = self
                    .rows
                    .iter()
                    .map(|r| Value::Object(self.columns.iter().map(|c| c.to_string()).zip(r.iter().cloned()).collect::<Map<_, _>>()))
                    .collect();
                pretty(&Value::Array(rows))
            }
            Format::Csv => {
                let mut w = csv::Writer::from_writer(Vec::new());
                w.write_record(&self.columns).expect("in-memory write");
                for r in &self.rows {
                    w.write_record(r.iter().map(Self::cell)).expect("in-memory write");
                }
                String::from_utf8(w.into_inner().expect("in-memory flush")).expect("csv output is utf-8")
            }
            Format::Text => {
                let cells: Vec<Vec<String>> = self.rows.iter().map(|r| r.iter().map(Self::cell).collect()).collect();
                let widths: Vec<usize> = (0..self.columns.len())
                    .map(|j| cells.iter().map(|r| r[j].len()).chain([self.columns[j].len()]).max().unwrap_or(0))
                    .collect();
                let mut out = String::new();
                let line = |out: &mut String, items: Vec<&str>| {
                    let parts: Vec<String> = items.iter().zip(&widths).map(|(s, w)| format!("{s:>w$}")).collect();
                    let _ = writeln!(out, "{}", parts.join("  ").trim_end());
                };
                line(&mut out, self.columns.clone());
                for r in &cells {
                    line(&mut out, r.iter().map(String::as_str).collect());
                }
                out
            }
        }
    }
}

fn status_word(s: Status) -> &'static str {
    match s {
        Status::Pass => "pass",
        Status::Fail => "FAIL",
        Status::Unverifiable => "unverifiable",
    }
}

fn evidence_summary(e: &Evidence) -> String {
    match e {
        Evidence::Rank {
            matrix, rank, cols, null_vector, ..
        } => {
            let mut s = format!("rank({matrix}) = {rank} of {cols}");
            if let Some(v) = null_vector {
                let _ = write!(s, ", null direction ({})", v.join(", "));
            }
            s
        }
        Evidence::PositiveNull {
            matrix,
            rows,
            exists,
            witness_e,
            certificate_h,
        } => {
            let mut s = format!("{matrix} ({rows} rows): strictly positive null combination {}", if *exists { "exists" } else { "does not exist" });
            if let Some(e) = witness_e {
                let _ = write!(s, ", witness e = ({})", e.join(", "));
            }
            if let Some(h) = certificate_h {
                let _ = write!(s, ", certificate h = ({})", h.join(", "));
            }
            s
        }
        Evidence::Hyperparameters { q, a, b, requirement, .. } => format!("q = {q}, a = {a}, b = {b}; requires {requirement}"),
        Evidence::Moments { required_order, available } => {
            format!("needs finite moments of order {required_order}, link provides {available:?}")
        }
        Evidence::Note { text } => text.clone(),
    }
}

pub fn verdict(v: &Verdict, format: Format) -> String {
    if format == Format::Json {
        return pretty(&json!({ "outcome": v.outcome, "consistent": v.is_consistent(), "basis": v.basis }));
    }
    let mut out = String::new();
    let outcome = serde_json::to_value(v.outcome).expect("outcome serializes");
    let _ = writeln!(out, "outcome: {}", outcome.as_str().unwrap_or_default());
    for r in v.satisfied_sufficient() {
        let _ = writeln!(out, "satisfied: {}", r.result.describe());
    }
    for r in v.violated_necessary() {
        let failed: Vec<&str> = r.subconditions.iter().filter(|s| s.status == Status::Fail).map(|s| s.name.as_str()).collect();
        let _ = writeln!(out, "violated: {} [{}]", r.result.describe(), failed.join(", "));
    }
    for r in &v.basis {
        let role = match r.role {
            Role::Sufficient => "sufficient",
            Role::Necessary => "necessary",
        };
        let state = if !r.applicable {
            "not applicable"
        } else if r.satisfied() {
            "satisfied"
        } else if r.violated() && r.role == Role::Necessary {
            "violated"
        } else {
            "not established"
        };
        let _ = writeln!(out, "\n[{role}] {}: {state}", r.result.describe());
        for s in &r.subconditions {
            let _ = writeln!(out, "  {:<12} {}: {}", status_word(s.status), s.name, evidence_summary(&s.evidence));
        }
        for n in &r.notes {
            let _ = writeln!(out, "  note: {n}");
        }
    }
    out
}

pub fn glm(fit: &GlmFit, format: Format) -> String {
    match format {
        Format::Json => pretty(&serde_json::to_value(fit).expect("fit serializes")),
        Format::Csv => {
            let mut t = Table::new(["index", "beta_hat"]);
            for (i, b) in fit.beta_hat.iter().enumerate() {
                t.push(vec![i.into(), (*b).into()]);
            }
            t.render(Format::Csv)
        }
        Format::Text => {
            let mut out = String::new();
            for (i, b) in fit.beta_hat.iter().enumerate() {
                let _ = writeln!(out, "beta[{i}] = {b:.10e}");
            }
            let _ = writeln!(out, "converged: {} after {} iterations", fit.converged, fit.iterations);
            let _ = writeln!(out, "separation: {}", fit.separation_flag);
            let _ = writeln!(out, "deviance: {:.10e}", fit.deviance);
            let _ = writeln!(out, "score norm: {:.3e}", fit.score_norm);
            out
        }
    }
}
