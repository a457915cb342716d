//! RDF export under a fixed vocabulary.
//!
//! With base namespace `B`:
//!
//! | resource                | IRI                         |
//! |-------------------------|-----------------------------|
//! | object (identifier set) | `B obj/<id-slug>`           |
//! | object (no identifier)  | `B obj/row<i>` (0-based)    |
//! | facet property          | `B prop/<facet-slug>`       |
//! | term                    | `B term/<facet-slug>/<slug>`|
//!
//! Predicates are `B broader` (child term to parent term), `B inInterval`
//! (value term to finest interval term), `B order` and `B visible`. Latitude
//! and longitude facets use the W3C Basic Geo `lat`/`long` predicates.
//! Classes `B Object` and `B Term` are declared once; every exported facet
//! property gets `rdf:type rdf:Property`, `rdfs:label`, `B order` and
//! `B visible`. Hidden and identifier facets emit nothing.
//!
//! Slugs percent-encode every byte outside `A-Z a-z 0-9 - . _ ~`.

use std::collections::BTreeSet;
use std::fmt::Write as _;

use thiserror::Error;

use crate::model::{Cell, Dataset, Facet, FacetType, Violation};

pub const DEFAULT_BASE: &str = "http://example.org/facetprep/";

const RDF_TYPE: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#type";
const RDF_PROPERTY: &str = "http://www.w3.org/1999/02/22-rdf-syntax-ns#Property";
const RDFS_CLASS: &str = "http://www.w3.org/2000/01/rdf-schema#Class";
const RDFS_LABEL: &str = "http://www.w3.org/2000/01/rdf-schema#label";
const GEO_LAT: &str = "http://www.w3.org/2003/01/geo/wgs84_pos#lat";
const GEO_LONG: &str = "http://www.w3.org/2003/01/geo/wgs84_pos#long";
const XSD: &str = "http://www.w3.org/2001/XMLSchema#";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RdfError {
    #[error("dataset is not valid: {}", .0.iter().map(|v| v.to_string()).collect::<Vec<_>>().join("; "))]
    ValidationFailed(Vec<Violation>),
    #[error("base namespace {0:?} is not an absolute IRI")]
    InvalidBase(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExportOptions {
    pub base: String,
}

impl Default for ExportOptions {
    fn default() -> Self {
        Self { base: DEFAULT_BASE.to_string() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Object {
    Iri(String),
    Literal { lexical: String, datatype: Option<String> },
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Triple {
    pub subject: String,
    pub predicate: String,
    pub object: Object,
}

pub fn slug(name: &str) -> String {
    let mut out = String::with_capacity(name.len());
    for b in name.bytes() {
        if b.is_ascii_alphanumeric() || matches!(b, b'-' | b'.' | b'_' | b'~') {
            out.push(b as char);
        } else {
            let _ = write!(out, "%{b:02X}");
        }
    }
    out
}

fn escape_literal(s: &str, out: &mut String) {
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '"' => out.push_str("\\\""),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            '\t' => out.push_str("\\t"),
            c if (c as u32) < 0x20 || c as u32 == 0x7F => {
                let _ = write!(out, "\\u{:04X}", c as u32);
            }
            c => out.push(c),
        }
    }
}

impl Object {
    fn write(&self, out: &mut String) {
        match self {
            Object::Iri(iri) => {
                out.push('<');
                out.push_str(iri);
                out.push('>');
            }
            Object::Literal { lexical, datatype } => {
                out.push('"');
                escape_literal(lexical, out);
                out.push('"');
                if let Some(dt) = datatype {
                    out.push_str("^^<");
                    out.push_str(dt);
                    out.push('>');
                }
            }
        }
    }
}

impl Triple {
    pub fn to_ntriples(&self) -> String {
        let mut line = format!("<{}> <{}> ", self.subject, self.predicate);
        self.object.write(&mut line);
        line.push_str(" .");
        line
    }
}

fn typed(lexical: &str, ftype: FacetType) -> Object {
    let datatype = match ftype {
        FacetType::Integer => Some(format!("{XSD}integer")),
        FacetType::Float | FacetType::Latitude | FacetType::Longitude => Some(format!("{XSD}decimal")),
        FacetType::Boolean => Some(format!("{XSD}boolean")),
        FacetType::String | FacetType::Identifier => None,
    };
    Object::Literal { lexical: lexical.to_string(), datatype }
}

fn is_exported(d: &Dataset, f: &Facet) -> bool {
    f.visible && f.ftype != FacetType::Identifier && d.identifier_facet.as_deref() != Some(f.name.as_str())
}

fn validate_base(base: &str) -> Result<(), RdfError> {
    let forbidden = |c: char| c.is_whitespace() || c.is_control() || "<>\"{}|^`\\".contains(c);
    match url::Url::parse(base) {
        Ok(_) if !base.contains(forbidden) => Ok(()),
        _ => Err(RdfError::InvalidBase(base.to_string())),
    }
}

struct Iris<'a> {
    base: &'a str,
}

impl Iris<'_> {
    fn v(&self, local: &str) -> String {
        format!("{}{local}", self.base)
    }
    fn prop(&self, facet: &str) -> String {
        format!("{}prop/{}", self.base, slug(facet))
    }
    fn term(&self, facet: &str, term: &str) -> String {
        format!("{}term/{}/{}", self.base, slug(facet), slug(term))
    }
}

/// All triples of the export, in canonical order.
pub fn triples(d: &Dataset, opts: &ExportOptions) -> Result<Vec<Triple>, RdfError> {
    validate_base(&opts.base)?;
    let violations = d.validate();
    if !violations.is_empty() {
        return Err(RdfError::ValidationFailed(violations));
    }
    let iris = Iris { base: &opts.base };
    let mut out = Vec::new();
    let mut push = |s: String, p: String, o: Object| out.push(Triple { subject: s, predicate: p, object: o });
    for class in ["Object", "Term"] {
        push(iris.v(class), RDF_TYPE.into(), Object::Iri(RDFS_CLASS.into()));
    }
    let id_idx = d.identifier_index();
    let subjects: Vec<String> = (0..d.rows.len())
        .map(|i| match id_idx {
            Some(k) => iris.v(&format!("obj/{}", slug(d.rows[i][k].text()))),
            None => iris.v(&format!("obj/row{i}")),
        })
        .collect();
    for (fi, f) in d.facets.iter().enumerate() {
        if !is_exported(d, f) {
            continue;
        }
        let predicate = match f.ftype {
            FacetType::Latitude => GEO_LAT.to_string(),
            FacetType::Longitude => GEO_LONG.to_string(),
            _ => {
                let p = iris.prop(&f.name);
                push(p.clone(), RDF_TYPE.into(), Object::Iri(RDF_PROPERTY.into()));
                push(p.clone(), RDFS_LABEL.into(), Object::Literal { lexical: f.name.clone(), datatype: None });
                push(p.clone(), iris.v("order"), typed(&f.order_index.to_string(), FacetType::Integer));
                push(p.clone(), iris.v("visible"), typed("true", FacetType::Boolean));
                p
            }
        };
        for (row, subject) in d.rows.iter().zip(&subjects) {
            if let Cell::Present(v) = &row[fi] {
                push(subject.clone(), predicate.clone(), typed(v, f.ftype));
            }
        }
        if let Some(tree) = f.term_tree() {
            for (child, parent) in tree.edges() {
                push(iris.term(&f.name, child), iris.v("broader"), Object::Iri(iris.term(&f.name, parent)));
            }
        }
        if let Some(layout) = &f.intervals {
            for v in d.value_set(fi) {
                if let Some(label) = layout.label_for_text(&v) {
                    push(iris.term(&f.name, &v), iris.v("inInterval"), Object::Iri(iris.term(&f.name, &label)));
                }
            }
        }
    }
    let mut lines: Vec<(String, Triple)> = out.into_iter().map(|t| (t.to_ntriples(), t)).collect();
    lines.sort_by(|a, b| a.0.as_bytes().cmp(b.0.as_bytes()));
    Ok(lines.into_iter().map(|(_, t)| t).collect())
}

/// Canonical N-Triples: one triple per line, lines sorted bytewise.
pub fn export_ntriples(d: &Dataset, opts: &ExportOptions) -> Result<Vec<u8>, RdfError> {
    let mut out = String::new();
    for t in triples(d, opts)? {
        out.push_str(&t.to_ntriples());
        out.push('\n');
    }
    Ok(out.into_bytes())
}

/// Turtle with the same triples, grouped by subject.
pub fn export_turtle(d: &Dataset, opts: &ExportOptions) -> Result<Vec<u8>, RdfError> {
    let ts = triples(d, opts)?;
    let mut out = String::new();
    let mut i = 0;
    while i < ts.len() {
        let subject = &ts[i].subject;
        let _ = write!(out, "<{subject}>");
        let mut first = true;
        while i < ts.len() && &ts[i].subject == subject {
            out.push_str(if first { " " } else { " ;\n    " });
            let _ = write!(out, "<{}> ", ts[i].predicate);
            ts[i].object.write(&mut out);
            first = false;
            i += 1;
        }
        out.push_str(" .\n");
    }
    Ok(out.into_bytes())
}

/// The number of triples [`export_ntriples`] emits, counted without
/// building them.
pub fn count_expected_triples(d: &Dataset) -> usize {
    let mut n = 2;
    for (fi, f) in d.facets.iter().enumerate() {
        if !is_exported(d, f) {
            continue;
        }
        if !f.ftype.is_geo() {
            n += 4;
        }
        n += d.rows.iter().filter(|r| !r[fi].is_missing()).count();
        n += f.term_tree().map_or(0, |t| t.edge_count());
        if let Some(layout) = &f.intervals {
            let distinct: BTreeSet<&str> = d.rows.iter().filter_map(|r| r[fi].as_str()).collect();
            n += distinct.iter().filter(|v| layout.label_for_text(v).is_some()).count();
        }
    }
    n
}
