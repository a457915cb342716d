//! The transformation vocabulary and its apply semantics.
//!
//! Every change to a dataset goes through [`apply`]. A rejected
//! transformation leaves the dataset untouched; the session layer turns such
//! rejections into skipped outcomes when a log is replayed.

mod condition;
mod session;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use condition::{BoundCondition, CondOp, Conjunct, RowCondition};
pub use session::{replay, LogEntry, Session};

use crate::expr::{derive_facet, DeriveError};
use crate::hierarchy::{HierarchyError, TermTree};
use crate::intervals::{apply_intervals, IntervalError, IntervalSpecChain};
use crate::model::{Cell, Dataset, FacetType, ModelError, Violation};

/// Addresses a row by identifier value or by position.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RowKey {
    Index(usize),
    Id(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", content = "params")]
pub enum Transformation {
    DeleteRows { cond: RowCondition },
    /// Cells in display order; empty text is a missing cell.
    AddRow { cells: Vec<String> },
    EditCell { row_key: RowKey, facet: String, new_value: String },
    ReplaceValue { facet: String, old: String, new: String },
    RenameFacet { old: String, new: String },
    SetFacetType { facet: String, ftype: FacetType },
    SetVisibility { facet: String, visible: bool },
    /// Every facet name exactly once, in the new display order.
    ReorderFacets { permutation: Vec<String> },
    DeleteFacet { facet: String },
    MoveFacet { facet: String, new_index: usize },
    AddParent { facet: String, children: Vec<String>, parent: String },
    MoveTerm { facet: String, term: String, new_parent: Option<String> },
    GroupByPrefix { facet: String, prefix: String },
    GroupByLetterRange { facet: String, from: char, to: char },
    DefineIntervals { facet: String, chain: IntervalSpecChain },
    DeriveFacet { name: String, expression: String },
    RemoveEmptyRows {},
    DeleteRowsWithMissing { facet: Option<String> },
}

impl Transformation {
    /// The `type` tag used on the wire.
    pub fn kind(&self) -> &'static str {
        match self {
            Transformation::DeleteRows { .. } => "DeleteRows",
            Transformation::AddRow { .. } => "AddRow",
            Transformation::EditCell { .. } => "EditCell",
            Transformation::ReplaceValue { .. } => "ReplaceValue",
            Transformation::RenameFacet { .. } => "RenameFacet",
            Transformation::SetFacetType { .. } => "SetFacetType",
            Transformation::SetVisibility { .. } => "SetVisibility",
            Transformation::ReorderFacets { .. } => "ReorderFacets",
            Transformation::DeleteFacet { .. } => "DeleteFacet",
            Transformation::MoveFacet { .. } => "MoveFacet",
            Transformation::AddParent { .. } => "AddParent",
            Transformation::MoveTerm { .. } => "MoveTerm",
            Transformation::GroupByPrefix { .. } => "GroupByPrefix",
            Transformation::GroupByLetterRange { .. } => "GroupByLetterRange",
            Transformation::DefineIntervals { .. } => "DefineIntervals",
            Transformation::DeriveFacet { .. } => "DeriveFacet",
            Transformation::RemoveEmptyRows {} => "RemoveEmptyRows",
            Transformation::DeleteRowsWithMissing { .. } => "DeleteRowsWithMissing",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "status")]
pub enum ApplyOutcome {
    Applied,
    SkippedWithWarning { reason: String },
}

impl ApplyOutcome {
    pub fn is_applied(&self) -> bool {
        matches!(self, ApplyOutcome::Applied)
    }
}

impl fmt::Display for ApplyOutcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ApplyOutcome::Applied => f.write_str("Applied"),
            ApplyOutcome::SkippedWithWarning { .. } => f.write_str("SkippedWithWarning"),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EngineError {
    #[error("unknown facet {0:?}")]
    UnknownFacet(String),
    #[error("facet {0:?} already exists")]
    DuplicateFacetName(String),
    #[error("facet name is empty")]
    EmptyFacetName,
    #[error("permutation must list every facet exactly once")]
    BadPermutation,
    #[error("facet index {index} is out of range (facet count {count})")]
    IndexOutOfRange { index: usize, count: usize },
    #[error("no row matches key {0}")]
    RowKeyNotFound(String),
    #[error("old value absent ({old:?} does not occur in facet {facet:?})")]
    OldValueAbsent { facet: String, old: String },
    #[error("new row has {found} cells, expected {expected}")]
    RowArity { expected: usize, found: usize },
    #[error("facet {facet:?}: {value:?} is not a valid {ftype} value")]
    InvalidValue { facet: String, value: String, ftype: FacetType },
    #[error("row condition has no conjuncts")]
    EmptyCondition,
    #[error("ordering comparison on non-numeric facet {0:?}")]
    OrderingOnNonNumeric(String),
    #[error("literal {0:?} is not a number")]
    BadLiteral(String),
    #[error("facet {0:?} has intervals; term hierarchies cannot be edited")]
    FacetHasIntervals(String),
    #[error("the result would break dataset invariants: {}", join_violations(.0))]
    Invariant(Vec<Violation>),
    #[error("nothing to undo")]
    NothingToUndo,
    #[error("nothing to redo")]
    NothingToRedo,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("facet {facet:?}: {source}")]
    Hierarchy { facet: String, source: HierarchyError },
    #[error(transparent)]
    Interval(#[from] IntervalError),
    #[error(transparent)]
    Derive(#[from] DeriveError),
}

fn join_violations(v: &[Violation]) -> String {
    v.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; ")
}

fn facet_idx(d: &Dataset, facet: &str) -> Result<usize, EngineError> {
    d.facet_index(facet).ok_or_else(|| EngineError::UnknownFacet(facet.to_string()))
}

fn typed_cell(d: &Dataset, idx: usize, value: &str) -> Result<Cell, EngineError> {
    if value.is_empty() {
        return Ok(Cell::Missing);
    }
    let f = &d.facets[idx];
    f.ftype.canonicalize(value).map(Cell::Present).ok_or_else(|| EngineError::InvalidValue {
        facet: f.name.clone(),
        value: value.to_string(),
        ftype: f.ftype,
    })
}

fn edit_tree(
    d: &Dataset,
    facet: &str,
    op: impl FnOnce(&TermTree, &std::collections::BTreeSet<String>) -> Result<TermTree, HierarchyError>,
) -> Result<Dataset, EngineError> {
    let idx = facet_idx(d, facet)?;
    if d.facets[idx].intervals.is_some() {
        return Err(EngineError::FacetHasIntervals(facet.to_string()));
    }
    let values = d.value_set(idx);
    let current = d.facets[idx].hierarchy.clone().unwrap_or_default();
    let tree = op(&current, &values).map_err(|source| EngineError::Hierarchy { facet: facet.to_string(), source })?;
    let mut out = d.clone();
    out.facets[idx].hierarchy = if tree.is_empty() { None } else { Some(tree) };
    Ok(out)
}

fn locate_row(d: &Dataset, key: &RowKey) -> Result<usize, EngineError> {
    match key {
        RowKey::Id(id) => d.find_row_by_identifier(id).ok_or_else(|| EngineError::RowKeyNotFound(format!("{id:?}"))),
        RowKey::Index(i) if *i < d.rows.len() => Ok(*i),
        RowKey::Index(i) => Err(EngineError::RowKeyNotFound(i.to_string())),
    }
}

/// Applies one transformation, returning the new dataset. The input is
/// never modified.
pub fn apply(d: &Dataset, t: &Transformation) -> Result<Dataset, EngineError> {
    let out = apply_unchecked(d, t)?;
    let violations = out.validate();
    if !violations.is_empty() {
        return Err(EngineError::Invariant(violations));
    }
    Ok(out)
}

fn apply_unchecked(d: &Dataset, t: &Transformation) -> Result<Dataset, EngineError> {
    use Transformation as T;
    Ok(match t {
        T::DeleteRows { cond } => {
            let bound = cond.bind(d)?;
            let mut out = d.clone();
            out.rows.retain(|r| !bound.matches(r));
            out
        }
        T::AddRow { cells } => {
            let order = d.display_order();
            if cells.len() != order.len() {
                return Err(EngineError::RowArity { expected: order.len(), found: cells.len() });
            }
            let mut row = vec![Cell::Missing; d.facets.len()];
            for (&idx, value) in order.iter().zip(cells) {
                row[idx] = typed_cell(d, idx, value)?;
            }
            let mut out = d.clone();
            out.rows.push(row);
            out
        }
        T::EditCell { row_key, facet, new_value } => {
            let idx = facet_idx(d, facet)?;
            let row = locate_row(d, row_key)?;
            let cell = typed_cell(d, idx, new_value)?;
            let mut out = d.clone();
            out.rows[row][idx] = cell;
            out
        }
        T::ReplaceValue { facet, old, new } => {
            let idx = facet_idx(d, facet)?;
            if !d.rows.iter().any(|r| r[idx].as_str() == Some(old.as_str())) {
                return Err(EngineError::OldValueAbsent { facet: facet.clone(), old: old.clone() });
            }
            let cell = typed_cell(d, idx, new)?;
            let mut out = d.clone();
            for row in out.rows.iter_mut() {
                if row[idx].as_str() == Some(old.as_str()) {
                    row[idx] = cell.clone();
                }
            }
            if let (Some(tree), Cell::Present(new)) = (out.facets[idx].hierarchy.as_mut(), &cell) {
                tree.rename(old, new);
            }
            out
        }
        T::RenameFacet { old, new } => {
            let idx = facet_idx(d, old)?;
            if new.is_empty() {
                return Err(EngineError::EmptyFacetName);
            }
            if new != old && d.facet_index(new).is_some() {
                return Err(EngineError::DuplicateFacetName(new.clone()));
            }
            let mut out = d.clone();
            out.facets[idx].name = new.clone();
            if out.identifier_facet.as_deref() == Some(old.as_str()) {
                out.identifier_facet = Some(new.clone());
            }
            out
        }
        T::SetFacetType { facet, ftype } => d.set_facet_type(facet, *ftype)?,
        T::SetVisibility { facet, visible } => {
            let idx = facet_idx(d, facet)?;
            let mut out = d.clone();
            out.facets[idx].visible = *visible;
            out
        }
        T::ReorderFacets { permutation } => {
            if permutation.len() != d.facets.len() {
                return Err(EngineError::BadPermutation);
            }
            let mut order = Vec::with_capacity(permutation.len());
            for name in permutation {
                let idx = d.facet_index(name).ok_or(EngineError::BadPermutation)?;
                if order.contains(&idx) {
                    return Err(EngineError::BadPermutation);
                }
                order.push(idx);
            }
            let mut out = d.clone();
            out.set_display_order(&order);
            out
        }
        T::DeleteFacet { facet } => {
            let idx = facet_idx(d, facet)?;
            let mut out = d.clone();
            let order: Vec<usize> = d.display_order().into_iter().filter(|&i| i != idx).map(|i| if i > idx { i - 1 } else { i }).collect();
            out.facets.remove(idx);
            for row in out.rows.iter_mut() {
                row.remove(idx);
            }
            out.set_display_order(&order);
            if out.identifier_facet.as_deref() == Some(facet.as_str()) {
                out.identifier_facet = None;
            }
            out
        }
        T::MoveFacet { facet, new_index } => {
            let idx = facet_idx(d, facet)?;
            if *new_index >= d.facets.len() {
                return Err(EngineError::IndexOutOfRange { index: *new_index, count: d.facets.len() });
            }
            let mut order = d.display_order();
            order.retain(|&i| i != idx);
            order.insert(*new_index, idx);
            let mut out = d.clone();
            out.set_display_order(&order);
            out
        }
        T::AddParent { facet, children, parent } => edit_tree(d, facet, |tree, values| tree.add_parent(children, parent, values))?,
        T::MoveTerm { facet, term, new_parent } => {
            edit_tree(d, facet, |tree, values| tree.move_term(term, new_parent.as_deref(), values))?
        }
        T::GroupByPrefix { facet, prefix } => edit_tree(d, facet, |tree, values| tree.group_by_prefix(values, prefix))?,
        T::GroupByLetterRange { facet, from, to } => {
            edit_tree(d, facet, |tree, values| tree.group_by_letter_range(values, *from, *to))?
        }
        T::DefineIntervals { facet, chain } => apply_intervals(d, facet, chain)?,
        T::DeriveFacet { name, expression } => derive_facet(d, name, expression)?,
        T::RemoveEmptyRows {} => {
            let mut out = d.clone();
            out.rows.retain(|r| r.iter().any(|c| !c.is_missing()));
            out
        }
        T::DeleteRowsWithMissing { facet } => {
            let mut out = d.clone();
            match facet {
                Some(name) => {
                    let idx = facet_idx(d, name)?;
                    out.rows.retain(|r| !r[idx].is_missing());
                }
                None => out.rows.retain(|r| r.iter().all(|c| !c.is_missing())),
            }
            out
        }
    })
}
