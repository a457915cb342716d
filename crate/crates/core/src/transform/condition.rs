use serde::{Deserialize, Serialize};

use super::EngineError;
use crate::model::{parse_float, Cell, Dataset};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CondOp {
    #[serde(rename = "eq")]
    Eq,
    #[serde(rename = "ne")]
    Ne,
    #[serde(rename = "lt")]
    Lt,
    #[serde(rename = "le")]
    Le,
    #[serde(rename = "gt")]
    Gt,
    #[serde(rename = "ge")]
    Ge,
    #[serde(rename = "contains")]
    Contains,
    #[serde(rename = "startsWith")]
    StartsWith,
    #[serde(rename = "isMissing")]
    IsMissing,
}

impl CondOp {
    pub fn is_ordering(self) -> bool {
        matches!(self, CondOp::Lt | CondOp::Le | CondOp::Gt | CondOp::Ge)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Conjunct {
    pub facet: String,
    pub op: CondOp,
    #[serde(default)]
    pub literal: String,
}

impl Conjunct {
    pub fn new(facet: impl Into<String>, op: CondOp, literal: impl Into<String>) -> Self {
        Self { facet: facet.into(), op, literal: literal.into() }
    }
}

/// A conjunction of per-facet tests. Missing cells satisfy only `isMissing`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowCondition {
    pub conjuncts: Vec<Conjunct>,
}

/// A condition checked against one dataset's schema.
pub struct BoundCondition {
    tests: Vec<(usize, CondOp, String, Option<f64>)>,
}

impl RowCondition {
    pub fn new(conjuncts: Vec<Conjunct>) -> Self {
        Self { conjuncts }
    }

    pub fn bind(&self, d: &Dataset) -> Result<BoundCondition, EngineError> {
        if self.conjuncts.is_empty() {
            return Err(EngineError::EmptyCondition);
        }
        let mut tests = Vec::with_capacity(self.conjuncts.len());
        for c in &self.conjuncts {
            let idx = d.facet_index(&c.facet).ok_or_else(|| EngineError::UnknownFacet(c.facet.clone()))?;
            let mut number = None;
            if c.op.is_ordering() {
                if !d.facets[idx].ftype.is_numeric() {
                    return Err(EngineError::OrderingOnNonNumeric(c.facet.clone()));
                }
                number = Some(parse_float(&c.literal).ok_or_else(|| EngineError::BadLiteral(c.literal.clone()))?);
            }
            tests.push((idx, c.op, c.literal.clone(), number));
        }
        Ok(BoundCondition { tests })
    }
}

impl BoundCondition {
    pub fn matches(&self, row: &[Cell]) -> bool {
        self.tests.iter().all(|(idx, op, literal, number)| {
            let Cell::Present(v) = &row[*idx] else { return *op == CondOp::IsMissing };
            match op {
                CondOp::Eq => v == literal,
                CondOp::Ne => v != literal,
                CondOp::Contains => v.contains(literal.as_str()),
                CondOp::StartsWith => v.starts_with(literal.as_str()),
                CondOp::IsMissing => false,
                ordering => {
                    let (Some(x), Some(y)) = (v.parse::<f64>().ok(), *number) else { return false };
                    match ordering {
                        CondOp::Lt => x < y,
                        CondOp::Le => x <= y,
                        CondOp::Gt => x > y,
                        _ => x >= y,
                    }
                }
            }
        })
    }
}
