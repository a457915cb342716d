//! The in-memory faceted dataset.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hierarchy::{HierarchyError, TermTree};
use crate::intervals::IntervalLayout;
use crate::tabular::{parse_internal_path, HierarchyConfigEntry, RawTable, TabularError};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Cell {
    Present(String),
    Missing,
}

impl Cell {
    /// Empty text is the missing-value marker.
    pub fn from_text(text: impl Into<String>) -> Self {
        let text = text.into();
        if text.is_empty() {
            Cell::Missing
        } else {
            Cell::Present(text)
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Cell::Present(s) => Some(s),
            Cell::Missing => None,
        }
    }

    pub fn is_missing(&self) -> bool {
        matches!(self, Cell::Missing)
    }

    pub fn text(&self) -> &str {
        self.as_str().unwrap_or("")
    }
}

pub type Row = Vec<Cell>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum FacetType {
    #[default]
    String,
    Integer,
    Float,
    Boolean,
    Identifier,
    Latitude,
    Longitude,
}

impl FacetType {
    pub fn is_numeric(self) -> bool {
        matches!(self, FacetType::Integer | FacetType::Float | FacetType::Latitude | FacetType::Longitude)
    }

    pub fn is_geo(self) -> bool {
        matches!(self, FacetType::Latitude | FacetType::Longitude)
    }

    /// Canonical surface form of `text` under this type, or `None` when it
    /// does not parse.
    pub fn canonicalize(self, text: &str) -> Option<String> {
        match self {
            FacetType::String | FacetType::Identifier => Some(text.to_string()),
            FacetType::Integer => canonical_integer(text),
            FacetType::Float => parse_float(text).map(canonical_number),
            FacetType::Latitude => parse_float(text).filter(|v| (-90.0..=90.0).contains(v)).map(canonical_number),
            FacetType::Longitude => parse_float(text).filter(|v| (-180.0..=180.0).contains(v)).map(canonical_number),
            FacetType::Boolean => {
                if text.eq_ignore_ascii_case("true") {
                    Some("true".into())
                } else if text.eq_ignore_ascii_case("false") {
                    Some("false".into())
                } else {
                    None
                }
            }
        }
    }
}

impl fmt::Display for FacetType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).ok().and_then(|v| v.as_str().map(str::to_string)).unwrap_or_default();
        f.write_str(&s)
    }
}

fn canonical_integer(text: &str) -> Option<String> {
    let (neg, digits) = match text.as_bytes().first()? {
        b'+' => (false, &text[1..]),
        b'-' => (true, &text[1..]),
        _ => (false, text),
    };
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    let trimmed = digits.trim_start_matches('0');
    Some(match (trimmed.is_empty(), neg) {
        (true, _) => "0".to_string(),
        (false, true) => format!("-{trimmed}"),
        (false, false) => trimmed.to_string(),
    })
}

/// Decimal or scientific notation; no `inf`/`nan`.
pub fn parse_float(text: &str) -> Option<f64> {
    let b = text.as_bytes();
    let mut i = 0;
    if matches!(b.first(), Some(b'+' | b'-')) {
        i += 1;
    }
    let int_start = i;
    while i < b.len() && b[i].is_ascii_digit() {
        i += 1;
    }
    let mut mantissa_digits = i - int_start;
    if i < b.len() && b[i] == b'.' {
        i += 1;
        let frac_start = i;
        while i < b.len() && b[i].is_ascii_digit() {
            i += 1;
        }
        mantissa_digits += i - frac_start;
    }
    if mantissa_digits == 0 {
        return None;
    }
    if i < b.len() && (b[i] == b'e' || b[i] == b'E') {
        i += 1;
        if matches!(b.get(i), Some(b'+' | b'-')) {
            i += 1;
        }
        let exp_start = i;
        while i < b.len() && b[i].is_ascii_digit() {
            i += 1;
        }
        if i == exp_start {
            return None;
        }
    }
    if i != b.len() {
        return None;
    }
    text.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Shortest round-trip decimal; integral values print without a fraction.
pub fn canonical_number(v: f64) -> String {
    if v == 0.0 {
        return "0".into();
    }
    format!("{v}")
}

#[derive(Debug, Clone, PartialEq)]
pub struct Facet {
    pub name: String,
    pub ftype: FacetType,
    pub visible: bool,
    pub order_index: usize,
    pub hierarchy: Option<TermTree>,
    pub intervals: Option<IntervalLayout>,
    /// Source text of the deriving expression.
    pub derivation: Option<String>,
}

impl Facet {
    pub fn new(name: impl Into<String>, order_index: usize) -> Self {
        Self {
            name: name.into(),
            ftype: FacetType::String,
            visible: true,
            order_index,
            hierarchy: None,
            intervals: None,
            derivation: None,
        }
    }

    /// The term tree to show or export: interval terms or the hierarchy.
    pub fn term_tree(&self) -> Option<TermTree> {
        match (&self.intervals, &self.hierarchy) {
            (Some(layout), _) => Some(layout.tree()),
            (None, Some(tree)) => Some(tree.clone()),
            (None, None) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Dataset {
    pub facets: Vec<Facet>,
    pub rows: Vec<Row>,
    pub identifier_facet: Option<String>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("unknown facet {0:?}")]
    UnknownFacet(String),
    #[error("hierarchy configuration names unknown facet {0:?}")]
    UnknownFacetInConfig(String),
    #[error("facet {facet:?}: term {term:?} is given conflicting parents")]
    ConflictingHierarchy { facet: String, term: String },
    #[error("facet {facet:?}, row {row}: {value:?} is not a valid value for this type")]
    TypeViolation { facet: String, row: usize, value: String },
    #[error("identifier value {value:?} appears in rows {row_a} and {row_b}")]
    DuplicateIdentifier { value: String, row_a: usize, row_b: usize },
    #[error("row {0} has no identifier value")]
    MissingIdentifier(usize),
    #[error("facet {0:?} has intervals and must stay integer or float typed")]
    FacetHasIntervals(String),
    #[error(transparent)]
    Tabular(#[from] TabularError),
    #[error("facet {facet:?}: {source}")]
    Hierarchy { facet: String, source: HierarchyError },
}

#[derive(Debug, Clone, PartialEq)]
pub enum BuildWarning {
    /// An internal path and the configuration file disagree on a parent;
    /// the configuration file wins.
    ConflictingHierarchy { facet: String, term: String, internal: String, config: String },
}

impl fmt::Display for BuildWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BuildWarning::ConflictingHierarchy { facet, term, internal, config } => write!(
                f,
                "facet {facet:?}: term {term:?} has parent {internal:?} in the data and {config:?} in the configuration; using {config:?}"
            ),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct BuildOptions {
    /// Split slash-joined cells into leaf value plus hierarchy path.
    pub split_internal_paths: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ValueStats {
    pub value: String,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct DistinctValues {
    pub values: Vec<ValueStats>,
    pub missing: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind")]
pub enum Violation {
    DuplicateFacetName { name: String },
    EmptyFacetName { index: usize },
    RowArity { row: usize, expected: usize, found: usize },
    OrderNotPermutation,
    HierarchyWithIntervals { facet: String },
    IntervalsOnNonNumeric { facet: String },
    ValueOutOfInterval { facet: String, row: usize, value: String },
    TypeViolation { facet: String, row: usize, value: String },
    UnknownIdentifierFacet { name: String },
    IdentifierTypeMismatch { facet: String },
    DuplicateIdentifier { value: String, row_a: usize, row_b: usize },
    MissingIdentifier { row: usize },
    HierarchyCycle { facet: String },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::DuplicateFacetName { name } => write!(f, "duplicate facet name {name:?}"),
            Violation::EmptyFacetName { index } => write!(f, "facet {index} has an empty name"),
            Violation::RowArity { row, expected, found } => write!(f, "row {row} has {found} cells, expected {expected}"),
            Violation::OrderNotPermutation => write!(f, "facet order indices are not a permutation"),
            Violation::HierarchyWithIntervals { facet } => write!(f, "facet {facet:?} has both a hierarchy and intervals"),
            Violation::IntervalsOnNonNumeric { facet } => write!(f, "facet {facet:?} has intervals but is not numeric"),
            Violation::ValueOutOfInterval { facet, row, value } => {
                write!(f, "facet {facet:?}, row {row}: {value:?} lies outside the intervals")
            }
            Violation::TypeViolation { facet, row, value } => {
                write!(f, "facet {facet:?}, row {row}: {value:?} does not match the facet type")
            }
            Violation::UnknownIdentifierFacet { name } => write!(f, "identifier facet {name:?} does not exist"),
            Violation::IdentifierTypeMismatch { facet } => {
                write!(f, "facet {facet:?} type disagrees with the identifier setting")
            }
            Violation::DuplicateIdentifier { value, row_a, row_b } => {
                write!(f, "identifier {value:?} appears in rows {row_a} and {row_b}")
            }
            Violation::MissingIdentifier { row } => write!(f, "row {row} has no identifier"),
            Violation::HierarchyCycle { facet } => write!(f, "facet {facet:?} has a cyclic hierarchy"),
        }
    }
}

impl Dataset {
    /// One string facet per column in file order, no hierarchy processing.
    pub fn from_raw(raw: &RawTable) -> Self {
        let facets = raw.header.iter().enumerate().map(|(i, h)| Facet::new(h.clone(), i)).collect();
        let rows = raw.rows.iter().map(|r| r.iter().map(|c| Cell::from_text(c.clone())).collect()).collect();
        Dataset { facets, rows, identifier_facet: None }
    }

    pub fn facet_index(&self, name: &str) -> Option<usize> {
        self.facets.iter().position(|f| f.name == name)
    }

    pub fn facet(&self, name: &str) -> Option<&Facet> {
        self.facets.iter().find(|f| f.name == name)
    }

    pub fn row_count(&self) -> usize {
        self.rows.len()
    }

    /// Storage indices of facets sorted by display order.
    pub fn display_order(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.facets.len()).collect();
        idx.sort_by_key(|&i| (self.facets[i].order_index, i));
        idx
    }

    /// Reassigns order indices 0..n following `order` (storage indices).
    pub(crate) fn set_display_order(&mut self, order: &[usize]) {
        for (pos, &i) in order.iter().enumerate() {
            self.facets[i].order_index = pos;
        }
    }

    pub fn to_raw_table(&self) -> RawTable {
        let order = self.display_order();
        RawTable {
            header: order.iter().map(|&i| self.facets[i].name.clone()).collect(),
            rows: self.rows.iter().map(|r| order.iter().map(|&i| r[i].text().to_string()).collect()).collect(),
            delimiter: Default::default(),
        }
    }

    /// Distinct present values of a column.
    pub fn value_set(&self, facet_idx: usize) -> BTreeSet<String> {
        self.rows.iter().filter_map(|r| r[facet_idx].as_str().map(str::to_string)).collect()
    }

    pub fn identifier_index(&self) -> Option<usize> {
        self.identifier_facet.as_deref().and_then(|n| self.facet_index(n))
    }

    pub fn find_row_by_identifier(&self, id: &str) -> Option<usize> {
        let idx = self.identifier_index()?;
        self.rows.iter().position(|r| r[idx].as_str() == Some(id))
    }

    pub fn distinct_values(&self, facet: &str) -> Result<DistinctValues, ModelError> {
        let idx = self.facet_index(facet).ok_or_else(|| ModelError::UnknownFacet(facet.to_string()))?;
        let mut counts: BTreeMap<&str, usize> = BTreeMap::new();
        let mut missing = 0;
        for row in &self.rows {
            match &row[idx] {
                Cell::Present(v) => *counts.entry(v.as_str()).or_default() += 1,
                Cell::Missing => missing += 1,
            }
        }
        Ok(DistinctValues {
            values: counts.into_iter().map(|(value, count)| ValueStats { value: value.to_string(), count }).collect(),
            missing,
        })
    }

    /// Retypes a facet, canonicalizing every present cell.
    pub fn set_facet_type(&self, facet: &str, ftype: FacetType) -> Result<Dataset, ModelError> {
        let idx = self.facet_index(facet).ok_or_else(|| ModelError::UnknownFacet(facet.to_string()))?;
        if self.facets[idx].intervals.is_some() && !matches!(ftype, FacetType::Integer | FacetType::Float) {
            return Err(ModelError::FacetHasIntervals(facet.to_string()));
        }
        let mut renames: BTreeMap<String, String> = BTreeMap::new();
        let mut column = Vec::with_capacity(self.rows.len());
        for (r, row) in self.rows.iter().enumerate() {
            column.push(match &row[idx] {
                Cell::Present(text) => {
                    let canon = ftype.canonicalize(text).ok_or_else(|| ModelError::TypeViolation {
                        facet: facet.to_string(),
                        row: r,
                        value: text.clone(),
                    })?;
                    if &canon != text {
                        renames.insert(text.clone(), canon.clone());
                    }
                    Cell::Present(canon)
                }
                Cell::Missing if ftype == FacetType::Identifier => return Err(ModelError::MissingIdentifier(r)),
                Cell::Missing => Cell::Missing,
            });
        }
        if ftype == FacetType::Identifier {
            let mut seen: HashMap<&str, usize> = HashMap::new();
            for (r, cell) in column.iter().enumerate() {
                let v = cell.text();
                if let Some(&first) = seen.get(v) {
                    return Err(ModelError::DuplicateIdentifier { value: v.to_string(), row_a: first, row_b: r });
                }
                seen.insert(v, r);
            }
        }

        let mut out = self.clone();
        for (row, cell) in out.rows.iter_mut().zip(column) {
            row[idx] = cell;
        }
        if let Some(tree) = out.facets[idx].hierarchy.as_mut() {
            for (old, new) in &renames {
                tree.rename(old, new);
            }
        }
        if ftype == FacetType::Identifier {
            if let Some(prev) = out.identifier_index().filter(|&p| p != idx) {
                out.facets[prev].ftype = FacetType::String;
            }
            out.identifier_facet = Some(facet.to_string());
        } else if out.identifier_facet.as_deref() == Some(facet) {
            out.identifier_facet = None;
        }
        out.facets[idx].ftype = ftype;
        Ok(out)
    }

    /// Lists every broken invariant; empty when the dataset is consistent.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        let mut names = HashSet::new();
        for (i, f) in self.facets.iter().enumerate() {
            if f.name.is_empty() {
                out.push(Violation::EmptyFacetName { index: i });
            }
            if !names.insert(f.name.as_str()) {
                out.push(Violation::DuplicateFacetName { name: f.name.clone() });
            }
        }
        let n = self.facets.len();
        let mut order: Vec<usize> = self.facets.iter().map(|f| f.order_index).collect();
        order.sort_unstable();
        if order != (0..n).collect::<Vec<_>>() {
            out.push(Violation::OrderNotPermutation);
        }
        let mut arity_ok = true;
        for (r, row) in self.rows.iter().enumerate() {
            if row.len() != n {
                arity_ok = false;
                out.push(Violation::RowArity { row: r, expected: n, found: row.len() });
            }
        }
        for (i, f) in self.facets.iter().enumerate() {
            if f.hierarchy.is_some() && f.intervals.is_some() {
                out.push(Violation::HierarchyWithIntervals { facet: f.name.clone() });
            }
            if let Some(tree) = &f.hierarchy {
                if tree.check().is_err() {
                    out.push(Violation::HierarchyCycle { facet: f.name.clone() });
                }
            }
            if f.intervals.is_some() && !matches!(f.ftype, FacetType::Integer | FacetType::Float) {
                out.push(Violation::IntervalsOnNonNumeric { facet: f.name.clone() });
            }
            if f.ftype == FacetType::Identifier && self.identifier_facet.as_deref() != Some(f.name.as_str()) {
                out.push(Violation::IdentifierTypeMismatch { facet: f.name.clone() });
            }
            if !arity_ok {
                continue;
            }
            for (r, row) in self.rows.iter().enumerate() {
                let Cell::Present(text) = &row[i] else { continue };
                if f.ftype.canonicalize(text).as_deref() != Some(text.as_str()) {
                    out.push(Violation::TypeViolation { facet: f.name.clone(), row: r, value: text.clone() });
                    continue;
                }
                if let Some(layout) = &f.intervals {
                    if layout.label_for_text(text).is_none() {
                        out.push(Violation::ValueOutOfInterval { facet: f.name.clone(), row: r, value: text.clone() });
                    }
                }
            }
        }
        if let Some(name) = &self.identifier_facet {
            match self.facet_index(name) {
                None => out.push(Violation::UnknownIdentifierFacet { name: name.clone() }),
                Some(i) => {
                    if self.facets[i].ftype != FacetType::Identifier {
                        out.push(Violation::IdentifierTypeMismatch { facet: name.clone() });
                    }
                    if arity_ok {
                        let mut seen: HashMap<&str, usize> = HashMap::new();
                        for (r, row) in self.rows.iter().enumerate() {
                            match row[i].as_str() {
                                None => out.push(Violation::MissingIdentifier { row: r }),
                                Some(v) => {
                                    if let Some(&first) = seen.get(v) {
                                        out.push(Violation::DuplicateIdentifier {
                                            value: v.to_string(),
                                            row_a: first,
                                            row_b: r,
                                        });
                                    } else {
                                        seen.insert(v, r);
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

/// Builds a dataset from a single-file table plus optional hierarchy
/// configuration. Configuration entries win over conflicting internal paths.
pub fn build_dataset(
    raw: &RawTable,
    config: &[HierarchyConfigEntry],
    options: BuildOptions,
) -> Result<(Dataset, Vec<BuildWarning>), ModelError> {
    let mut dataset = Dataset::from_raw(raw);
    let mut internal: Vec<BTreeMap<String, String>> = vec![BTreeMap::new(); dataset.facets.len()];

    if options.split_internal_paths {
        for row in dataset.rows.iter_mut() {
            for (col, cell) in row.iter_mut().enumerate() {
                let Cell::Present(text) = cell else { continue };
                if !text.contains('/') {
                    continue;
                }
                let path = parse_internal_path(text)?;
                add_path(&mut internal[col], &path, &dataset.facets[col].name)?;
                *cell = Cell::Present(path[0].clone());
            }
        }
    }

    let mut configured: Vec<BTreeMap<String, String>> = vec![BTreeMap::new(); dataset.facets.len()];
    for entry in config {
        let col = dataset
            .facet_index(&entry.facet_name)
            .ok_or_else(|| ModelError::UnknownFacetInConfig(entry.facet_name.clone()))?;
        add_path(&mut configured[col], &entry.path, &entry.facet_name)?;
    }

    let mut warnings = Vec::new();
    for col in 0..dataset.facets.len() {
        let mut edges = std::mem::take(&mut internal[col]);
        for (child, parent) in std::mem::take(&mut configured[col]) {
            if let Some(existing) = edges.get(&child) {
                if *existing != parent {
                    warnings.push(BuildWarning::ConflictingHierarchy {
                        facet: dataset.facets[col].name.clone(),
                        term: child.clone(),
                        internal: existing.clone(),
                        config: parent.clone(),
                    });
                }
            }
            edges.insert(child, parent);
        }
        if edges.is_empty() {
            continue;
        }
        let values = dataset.value_set(col);
        let value_refs: HashSet<&str> = values.iter().map(String::as_str).collect();
        let tree = TermTree::from_edges(&edges, &value_refs)
            .map_err(|source| ModelError::Hierarchy { facet: dataset.facets[col].name.clone(), source })?;
        dataset.facets[col].hierarchy = Some(tree);
    }
    Ok((dataset, warnings))
}

fn add_path(edges: &mut BTreeMap<String, String>, path: &[String], facet: &str) -> Result<(), ModelError> {
    for pair in path.windows(2) {
        match edges.get(&pair[0]) {
            Some(existing) if *existing != pair[1] => {
                return Err(ModelError::ConflictingHierarchy { facet: facet.to_string(), term: pair[0].clone() });
            }
            _ => {
                edges.insert(pair[0].clone(), pair[1].clone());
            }
        }
    }
    Ok(())
}
