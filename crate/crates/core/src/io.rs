//! JSON model documents.
//!
//! ```json
//! {"family": "binomial", "link": "logit",
//!  "y": [0, 4], "m": [3, 4],
//!  "X": [[1, "2.9"], [1, "1.7"]], "Z": [[1], [1]],
//!  "blocks": [{"q": 1, "a": "3/2", "b": 0.1}]}
//! ```
//!
//! Matrix entries and hyperparameters may be JSON numbers, decimal strings,
//! or `"num/den"` strings; all are read exactly.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Family, GlmmModel, Link, PriorBlock};
use crate::numeric::{Exact, RatMatrix};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BlockSpec {
    pub q: usize,
    pub a: Exact,
    pub b: Exact,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDocument {
    pub family: Family,
    pub link: Link,
    pub y: Vec<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<Vec<i64>>,
    #[serde(rename = "X")]
    pub x: Vec<Vec<Exact>>,
    #[serde(rename = "Z")]
    pub z: Vec<Vec<Exact>>,
    pub blocks: Vec<BlockSpec>,
}

fn matrix(rows: Vec<Vec<Exact>>, name: &str, n: usize) -> Result<RatMatrix> {
    if rows.len() != n {
        return Err(Error::DimensionMismatch(format!("{name} has {} rows, y has {n} entries", rows.len())));
    }
    RatMatrix::from_rows(rows.into_iter().map(|r| r.into_iter().map(|e| e.0).collect()).collect())
}

impl ModelDocument {
    pub fn into_model(self) -> Result<GlmmModel> {
        let n = self.y.len();
        Ok(GlmmModel {
            family: self.family,
            link: self.link,
            m: self.m,
            x: matrix(self.x, "X", n)?,
            z: matrix(self.z, "Z", n)?,
            y: self.y,
            blocks: self.blocks.into_iter().map(|b| PriorBlock::new(b.q, b.a.0, b.b.0)).collect(),
        })
    }

    pub fn from_model(model: &GlmmModel) -> Self {
        let rows = |m: &RatMatrix| m.rows_iter().map(|r| r.iter().cloned().map(Exact).collect()).collect();
        ModelDocument {
            family: model.family,
            link: model.link.clone(),
            y: model.y.clone(),
            m: model.m.clone(),
            x: rows(&model.x),
            z: rows(&model.z),
            blocks: model
                .blocks
                .iter()
                .map(|b| BlockSpec {
                    q: b.q,
                    a: Exact(b.a.clone()),
                    b: Exact(b.b.clone()),
                })
                .collect(),
        }
    }
}

/// Parses a model document. Syntax and schema errors carry line and column.
pub fn parse_model_json(text: &str) -> Result<GlmmModel> {
    let doc: ModelDocument = serde_json::from_str(text)
        .map_err(|e| Error::parse(format!("line {} column {}", e.line(), e.column()), e.to_string()))?;
    doc.into_model()
}

pub fn model_to_json(model: &GlmmModel) -> String {
    serde_json::to_string_pretty(&ModelDocument::from_model(model)).expect("model documents always serialize")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::validate;
    use crate::numeric::ratio;

    const ONEWAY: &str = r#"{
        "family": "binomial", "link": "logit",
        "y": [0, 4, 2, 4, 3, 5], "m": [3, 4, 5, 4, 3, 5],
        "X": [[1, 2.9], [1, "1.7"], [1, 2.6], [1, 3.1], [1, 3.8], [1, 4.2]],
        "Z": [[1, 0], [1, 0], [1, 0], [0, 1], [0, 1], [0, 1]],
        "blocks": [{"q": 2, "a": "3/2", "b": 0.1}]
    }"#;

    #[test]
    fn parses_exactly() {
        let m = parse_model_json(ONEWAY).unwrap();
        assert_eq!(m.x[(0, 1)], ratio(29, 10));
        assert_eq!(m.x[(1, 1)], ratio(17, 10));
        assert_eq!(m.blocks[0].a, ratio(3, 2));
        assert_eq!(m.blocks[0].b, ratio(1, 10));
        validate(m).unwrap();
    }

    #[test]
    fn round_trips() {
        let m = parse_model_json(ONEWAY).unwrap();
        let again = parse_model_json(&model_to_json(&m)).unwrap();
        assert_eq!(m, again);
    }

    #[test]
    fn user_cdf_link() {
        let text = ONEWAY.replace(r#""link": "logit""#, r#""link": {"user_cdf": {"name": "t3", "moment_order": 2}}"#);
        let m = parse_model_json(&text).unwrap();
        assert_eq!(
            m.link,
            Link::UserCdf {
                name: Some("t3".into()),
                moment_order: Some(2.0)
            }
        );
    }

    #[test]
    fn errors_carry_position() {
        let err = parse_model_json("{\n  \"family\": \"gaussian\"\n}").unwrap_err();
        let Error::Parse { location, .. } = err else { panic!("{err:?}") };
        assert!(location.starts_with("line 2"), "{location}");
        assert!(matches!(parse_model_json(&ONEWAY.replace("[1, 3.8], ", "")), Err(Error::DimensionMismatch(_))));
    }
}
