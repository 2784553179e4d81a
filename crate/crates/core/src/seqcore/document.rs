//! JSON spec documents.
//!
//! ```json
//! {
//!   "sequence": { "kind": "geometric", "c": "2", "lambda": "1/3" },
//!   "digits": { "kind": "constant", "points": [["0"], ["1"]] },
//!   "separation_mode": "strict"
//! }
//! ```
//!
//! Numbers are decimal or fraction strings (JSON numbers are accepted too).
//! Unknown keys are rejected.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::digits::DigitSystem;
use super::sequence::{Geometric, LogExpression, SequenceSpec, Table};
use super::spec::{SeparationMode, SumSetSpec};
use crate::error::{Error, Result};
use crate::real::Real;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SpecDocument {
    pub sequence: SequenceDoc,
    pub digits: DigitsDoc,
    #[serde(default)]
    pub separation_mode: SeparationMode,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometricDoc {
    pub c: Real,
    pub lambda: Real,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SequenceDoc {
    Geometric {
        c: Real,
        lambda: Real,
    },
    Table {
        log_values: Vec<Real>,
        tail: GeometricDoc,
    },
    /// Expressions in the variable `n` (evalexpr syntax, e.g. `math::ln(2.0) - n * math::ln(3.0)`).
    LogExpression {
        log_s: String,
        log_tail: String,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DigitsDoc {
    Constant {
        points: Vec<Vec<Real>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        p: Option<usize>,
    },
    Cube {
        p: usize,
    },
    /// Either explicit `levels` (eventually periodic from `period_start`)
    /// or base `points` with an orthogonal `rotation` applied once per level.
    PerLevel {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        p: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        levels: Option<Vec<Vec<Vec<Real>>>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        period_start: Option<usize>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        points: Option<Vec<Vec<Real>>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        rotation: Option<Vec<Vec<Real>>>,
    },
}

fn to_points(points: &[Vec<Real>]) -> Vec<Vec<f64>> {
    points
        .iter()
        .map(|pt| pt.iter().map(Real::value).collect())
        .collect()
}

fn check_p(declared: Option<usize>, digits: &DigitSystem) -> Result<()> {
    match declared {
        Some(p) if p != digits.dim() => Err(Error::validation(format!(
            "declared p = {p} but digits live in R^{}",
            digits.dim()
        ))),
        _ => Ok(()),
    }
}

impl SequenceDoc {
    pub fn build(&self) -> Result<SequenceSpec> {
        Ok(match self {
            SequenceDoc::Geometric { c, lambda } => {
                SequenceSpec::Geometric(Geometric::new(*c, *lambda)?)
            }
            SequenceDoc::Table { log_values, tail } => SequenceSpec::Table(Table::new(
                log_values.iter().map(Real::value).collect(),
                Geometric::new(tail.c, tail.lambda)?,
            )?),
            SequenceDoc::LogExpression { log_s, log_tail } => {
                SequenceSpec::LogExpression(LogExpression::parse(log_s, log_tail)?)
            }
        })
    }
}

impl DigitsDoc {
    pub fn build(&self) -> Result<DigitSystem> {
        match self {
            DigitsDoc::Constant { points, p } => {
                let d = DigitSystem::constant(&to_points(points))?;
                check_p(*p, &d)?;
                Ok(d)
            }
            DigitsDoc::Cube { p } => DigitSystem::cube(*p),
            DigitsDoc::PerLevel {
                p,
                levels,
                period_start,
                points,
                rotation,
            } => {
                let d = match (levels, points, rotation) {
                    (Some(levels), None, None) => DigitSystem::periodic(
                        levels.iter().map(|l| to_points(l)).collect(),
                        period_start.unwrap_or(1),
                    )?,
                    (None, Some(points), Some(rotation)) => {
                        if period_start.is_some() {
                            return Err(Error::validation(
                                "period_start only applies to explicit levels",
                            ));
                        }
                        DigitSystem::rotating(&to_points(points), &to_points(rotation))?
                    }
                    _ => {
                        return Err(Error::validation(
                            "per-level digits need either \"levels\" or both \"points\" and \"rotation\"",
                        ))
                    }
                };
                check_p(*p, &d)?;
                Ok(d)
            }
        }
    }
}

impl SpecDocument {
    /// Parses a document, reporting the failing field path and line on error.
    pub fn from_json(text: &str) -> Result<SpecDocument> {
        let de = &mut serde_json::Deserializer::from_str(text);
        serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            Error::Parse(format!(
                "spec document, field `{path}` (line {}, column {}): {inner}",
                inner.line(),
                inner.column()
            ))
        })
    }

    pub fn build(&self) -> Result<SumSetSpec> {
        self.build_with_horizon(super::spec::DEFAULT_HORIZON)
    }

    pub fn build_with_horizon(&self, horizon: usize) -> Result<SumSetSpec> {
        SumSetSpec::with_horizon(
            self.sequence.build()?,
            self.digits.build()?,
            self.separation_mode,
            horizon,
        )
    }
}

/// Hex SHA-256 of the raw document bytes, embedded in every report.
pub fn spec_digest(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[cfg(test)]
mod tests {
    use super::*;

    const CANTOR: &str = r#"{
        "sequence": {"kind": "geometric", "c": "2", "lambda": "1/3"},
        "digits": {"kind": "constant", "points": [["0"], ["1"]], "p": 1},
        "separation_mode": "strict"
    }"#;

    #[test]
    fn cantor_document() {
        let spec = SpecDocument::from_json(CANTOR).unwrap().build().unwrap();
        assert_eq!(spec.m(), 0.5);
        assert_eq!(spec.n_digits(), 2);
    }

    #[test]
    fn unknown_key_rejected_with_path() {
        let bad = CANTOR.replace("\"lambda\"", "\"lamda\"");
        let err = SpecDocument::from_json(&bad).unwrap_err().to_string();
        assert!(err.contains("sequence"), "{err}");
        assert!(err.contains("line"), "{err}");
    }

    #[test]
    fn top_level_unknown_key() {
        let bad = CANTOR.replacen('{', "{\"extra\": 1,", 1);
        assert!(SpecDocument::from_json(&bad).is_err());
    }

    #[test]
    fn cube_and_table_documents() {
        let doc = r#"{
            "sequence": {"kind": "table", "log_values": ["-0.6931471805599453"],
                         "tail": {"c": "0.5", "lambda": "0.5"}},
            "digits": {"kind": "cube", "p": 2},
            "separation_mode": "cube-weak"
        }"#;
        let spec = SpecDocument::from_json(doc).unwrap().build().unwrap();
        assert_eq!(spec.n_digits(), 4);
        assert!(spec.separation().certified);
    }

    #[test]
    fn per_level_rotation_document() {
        let doc = r#"{
            "sequence": {"kind": "geometric", "c": "1", "lambda": "0.2"},
            "digits": {"kind": "per-level", "points": [["0","0"],["1","0"]],
                       "rotation": [["0.6","-0.8"],["0.8","0.6"]]}
        }"#;
        let spec = SpecDocument::from_json(doc).unwrap().build().unwrap();
        assert_eq!(spec.digits().kind(), "per-level");
        assert!(spec.separation().passed());
    }

    #[test]
    fn log_expression_document() {
        let doc = r#"{
            "sequence": {"kind": "log-expression",
                         "log_s": "math::ln(2.0) - n * math::ln(3.0)",
                         "log_tail": "-n * math::ln(3.0)"},
            "digits": {"kind": "constant", "points": [["0"], ["1"]]}
        }"#;
        let spec = SpecDocument::from_json(doc)
            .unwrap()
            .build_with_horizon(200)
            .unwrap();
        assert!((spec.m() - 0.5).abs() < 1e-12);
        assert!(!spec.separation().certified);
    }

    #[test]
    fn declared_dimension_mismatch() {
        let bad = CANTOR.replace("\"p\": 1", "\"p\": 2");
        let doc = SpecDocument::from_json(&bad).unwrap();
        assert!(doc.build().is_err());
    }

    #[test]
    fn digest_is_stable() {
        assert_eq!(spec_digest(b"abc").len(), 64);
        assert_eq!(
            spec_digest(CANTOR.as_bytes()),
            spec_digest(CANTOR.as_bytes())
        );
    }
}
