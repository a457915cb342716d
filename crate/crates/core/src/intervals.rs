//! Interval structures over numeric facets.
//!
//! Intervals are half-open `[lo,hi)` except the last one of a level, which
//! is closed so the maximum is covered exactly once.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hierarchy::{TermKind, TermNode, TermTree};
use crate::model::{canonical_number, Cell, Dataset, FacetType};

/// Upper bound on the number of boundaries a single level may produce.
pub const MAX_BOUNDARIES: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum IntervalSpec {
    Linear { min: f64, max: f64, width: f64 },
    Logarithmic { min: f64, max: f64, base: f64 },
    Explicit { bounds: Vec<f64> },
}

/// Coarse-to-fine levels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalSpecChain {
    pub levels: Vec<IntervalSpec>,
}

impl IntervalSpecChain {
    pub fn single(spec: IntervalSpec) -> Self {
        Self { levels: vec![spec] }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum IntervalError {
    #[error("invalid interval spec: {0}")]
    InvalidSpec(String),
    #[error("interval spec yields fewer than two boundaries")]
    DegenerateSpec,
    #[error("interval spec yields more than {MAX_BOUNDARIES} boundaries")]
    TooManyBoundaries,
    #[error("interval chain has no levels")]
    EmptyChain,
    #[error("level {level}: boundary {boundary} is not a boundary of the next finer level")]
    BrokenNesting { level: usize, boundary: f64 },
    #[error("unknown facet {0:?}")]
    UnknownFacet(String),
    #[error("facet {0:?} is not integer or float typed")]
    NotNumericFacet(String),
    #[error("values outside the interval range: {}", format_offenders(.0))]
    ValueOutOfRange(Vec<(usize, String)>),
}

fn format_offenders(offenders: &[(usize, String)]) -> String {
    offenders.iter().map(|(row, v)| format!("row {row} = {v:?}")).collect::<Vec<_>>().join(", ")
}

fn finite(values: &[f64]) -> bool {
    values.iter().all(|v| v.is_finite())
}

/// Boundaries of one level, strictly increasing.
pub fn build_boundaries(spec: &IntervalSpec) -> Result<Vec<f64>, IntervalError> {
    let out = match spec {
        IntervalSpec::Linear { min, max, width } => {
            if !finite(&[*min, *max, *width]) || min >= max || *width <= 0.0 {
                return Err(IntervalError::InvalidSpec(format!(
                    "linear needs min < max and width > 0 (min={min}, max={max}, width={width})"
                )));
            }
            step_until(*max, |k| min + k as f64 * width)?
        }
        IntervalSpec::Logarithmic { min, max, base } => {
            if !finite(&[*min, *max, *base]) || *min <= 0.0 || min >= max || *base <= 1.0 {
                return Err(IntervalError::InvalidSpec(format!(
                    "logarithmic needs 0 < min < max and base > 1 (min={min}, max={max}, base={base})"
                )));
            }
            step_until(*max, |k| min * base.powi(k as i32))?
        }
        IntervalSpec::Explicit { bounds } => {
            if bounds.len() < 2 {
                return Err(IntervalError::DegenerateSpec);
            }
            if !finite(bounds) || bounds.windows(2).any(|w| w[0] >= w[1]) {
                return Err(IntervalError::InvalidSpec("explicit bounds must be finite and strictly increasing".into()));
            }
            bounds.clone()
        }
    };
    if out.len() < 2 {
        return Err(IntervalError::DegenerateSpec);
    }
    Ok(out)
}

fn step_until(max: f64, boundary: impl Fn(usize) -> f64) -> Result<Vec<f64>, IntervalError> {
    let mut out = Vec::new();
    for k in 0.. {
        if out.len() >= MAX_BOUNDARIES {
            return Err(IntervalError::TooManyBoundaries);
        }
        let b = boundary(k);
        if b >= max {
            out.push(max);
            break;
        }
        out.push(b);
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IntervalTerm {
    pub label: String,
    pub lo: f64,
    pub hi: f64,
    pub closed: bool,
}

impl IntervalTerm {
    pub fn contains(&self, v: f64) -> bool {
        self.lo <= v && (v < self.hi || (self.closed && v == self.hi))
    }
}

pub fn interval_label(lo: f64, hi: f64, closed: bool) -> String {
    format!("[{},{}{}", canonical_number(lo), canonical_number(hi), if closed { ']' } else { ')' })
}

/// One term per consecutive boundary pair, the last one closed.
pub fn intervals_from_boundaries(bounds: &[f64]) -> Vec<IntervalTerm> {
    let n = bounds.len();
    bounds
        .windows(2)
        .enumerate()
        .map(|(i, w)| {
            let closed = i + 2 == n;
            IntervalTerm { label: interval_label(w[0], w[1], closed), lo: w[0], hi: w[1], closed }
        })
        .collect()
}

fn close_enough(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

/// Resolved boundaries for every level of a chain, with fine boundaries
/// snapped onto the coarse ones they nest under.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalLayout {
    pub chain: IntervalSpecChain,
    pub levels: Vec<Vec<f64>>,
}

impl IntervalLayout {
    pub fn build(chain: &IntervalSpecChain) -> Result<Self, IntervalError> {
        if chain.levels.is_empty() {
            return Err(IntervalError::EmptyChain);
        }
        let mut levels: Vec<Vec<f64>> = chain.levels.iter().map(build_boundaries).collect::<Result<_, _>>()?;
        for level in 0..levels.len().saturating_sub(1) {
            let (coarse, fine) = levels.split_at_mut(level + 1);
            let coarse = &coarse[level];
            let fine = &mut fine[0];
            for &b in coarse {
                match fine.iter().position(|&f| close_enough(f, b)) {
                    Some(i) => fine[i] = b,
                    None => return Err(IntervalError::BrokenNesting { level, boundary: b }),
                }
            }
            if fine.first() != coarse.first() {
                return Err(IntervalError::BrokenNesting { level: level + 1, boundary: fine[0] });
            }
            if fine.last() != coarse.last() {
                return Err(IntervalError::BrokenNesting { level: level + 1, boundary: *fine.last().expect("non-empty") });
            }
        }
        Ok(Self { chain: chain.clone(), levels })
    }

    pub fn finest(&self) -> &[f64] {
        self.levels.last().expect("non-empty chain")
    }

    pub fn range(&self) -> (f64, f64) {
        let f = self.finest();
        (f[0], f[f.len() - 1])
    }

    pub fn terms(&self, level: usize) -> Vec<IntervalTerm> {
        intervals_from_boundaries(&self.levels[level])
    }

    pub fn finest_index(&self, v: f64) -> Option<usize> {
        let b = self.finest();
        if v.is_nan() || v < b[0] || v > b[b.len() - 1] {
            return None;
        }
        let idx = b.partition_point(|&x| x <= v);
        Some(idx.saturating_sub(1).min(b.len() - 2))
    }

    pub fn finest_label(&self, v: f64) -> Option<String> {
        let i = self.finest_index(v)?;
        let b = self.finest();
        Some(interval_label(b[i], b[i + 1], i + 2 == b.len()))
    }

    /// Term label for a cell's text, when it parses and lies in range.
    pub fn label_for_text(&self, text: &str) -> Option<String> {
        text.parse::<f64>().ok().and_then(|v| self.finest_label(v))
    }

    /// Interval terms of all levels; each finer term points at the coarser
    /// term that contains it. A fine interval identical to its coarse
    /// container is the same term.
    pub fn tree(&self) -> TermTree {
        let mut tree = TermTree::new();
        let mut previous: Vec<IntervalTerm> = Vec::new();
        for level in 0..self.levels.len() {
            let terms = self.terms(level);
            for term in &terms {
                if tree.contains(&term.label) {
                    continue;
                }
                let parent = previous
                    .iter()
                    .find(|p| p.lo <= term.lo && term.hi <= p.hi)
                    .map(|p| p.label.clone());
                tree.insert(term.label.clone(), TermNode { parent, kind: TermKind::IntervalTerm });
            }
            previous = terms;
        }
        tree
    }
}

/// Attaches an interval chain to a numeric facet, replacing any term
/// hierarchy. Cell values are unchanged.
pub fn apply_intervals(d: &Dataset, facet: &str, chain: &IntervalSpecChain) -> Result<Dataset, IntervalError> {
    let idx = d.facet_index(facet).ok_or_else(|| IntervalError::UnknownFacet(facet.to_string()))?;
    if !matches!(d.facets[idx].ftype, FacetType::Integer | FacetType::Float) {
        return Err(IntervalError::NotNumericFacet(facet.to_string()));
    }
    let layout = IntervalLayout::build(chain)?;
    let offenders: Vec<(usize, String)> = d
        .rows
        .iter()
        .enumerate()
        .filter_map(|(r, row)| match &row[idx] {
            Cell::Present(text) if layout.label_for_text(text).is_none() => Some((r, text.clone())),
            _ => None,
        })
        .collect();
    if !offenders.is_empty() {
        return Err(IntervalError::ValueOutOfRange(offenders));
    }
    let mut out = d.clone();
    out.facets[idx].hierarchy = None;
    out.facets[idx].intervals = Some(layout);
    Ok(out)
}
