//! Tabular input formats: delimited tables with a header row, slash-joined
//! hierarchy paths, hierarchy configuration files and multi-file folders.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Delimiter {
    #[default]
    Comma,
    Tab,
}

impl Delimiter {
    pub fn as_char(self) -> char {
        match self {
            Delimiter::Comma => ',',
            Delimiter::Tab => '\t',
        }
    }

    /// Picks tab for `.tsv`/`.tab` files, comma otherwise.
    pub fn from_path(path: &std::path::Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(ext) if ext.eq_ignore_ascii_case("tsv") || ext.eq_ignore_ascii_case("tab") => {
                Delimiter::Tab
            }
            _ => Delimiter::Comma,
        }
    }
}

impl fmt::Display for Delimiter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Delimiter::Comma => "comma",
            Delimiter::Tab => "tab",
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum TabularError {
    #[error("empty input")]
    EmptyInput,
    #[error("input is not valid UTF-8 (first invalid byte at offset {0})")]
    InvalidUtf8(usize),
    #[error("duplicate header name {0:?}")]
    DuplicateHeader(String),
    #[error("empty header name in column {0}")]
    EmptyHeader(usize),
    #[error("line {line}: expected {expected} fields, found {found}")]
    RaggedRow { line: usize, expected: usize, found: usize },
    #[error("line {0}: unterminated quoted field")]
    UnterminatedQuote(usize),
    #[error("line {line}: unexpected character after closing quote")]
    TrailingAfterQuote { line: usize },
    #[error("empty path segment at position {0}")]
    EmptyPathSegment(usize),
    #[error("line {0}: a hierarchy entry needs at least a term and a facet name")]
    TooFewSegments(usize),
    #[error("object id file must have exactly one column")]
    ObjectIdNotSingleColumn,
    #[error("duplicate object id {0:?}")]
    DuplicateObjectId(String),
    #[error("empty object id in row {0}")]
    EmptyObjectId(usize),
    #[error("dimension file {facet:?}: expected 2 columns on line {line}, found {found}")]
    DimensionArity { facet: String, line: usize, found: usize },
    #[error("object {object:?} has conflicting values for facet {facet:?}")]
    ConflictingValue { object: String, facet: String },
    #[error("term {term:?} has more than one parent in facet {facet:?}")]
    ConflictingParent { facet: String, term: String },
    #[error("hierarchy cycle in facet {facet:?} through term {term:?}")]
    HierarchyCycle { facet: String, term: String },
}

/// A parsed delimited table. Empty cells stand for missing values.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RawTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub delimiter: Delimiter,
}

impl RawTable {
    pub fn new(header: Vec<String>, rows: Vec<Vec<String>>, delimiter: Delimiter) -> Self {
        Self { header, rows, delimiter }
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.header.iter().position(|h| h == name)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct HierarchyConfigEntry {
    pub facet_name: String,
    /// Leaf first, root last.
    pub path: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DimensionFile {
    pub facet_name: String,
    pub pairs: Vec<(String, String)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TabularWarning {
    /// A first-column value that is an object id also appears as a parent
    /// term; it was read as a value assignment.
    AmbiguousObjectId { facet: String, id: String },
}

impl fmt::Display for TabularWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            TabularWarning::AmbiguousObjectId { facet, id } => write!(
                f,
                "facet {facet:?}: {id:?} is an object id and also a hierarchy term; read as a value"
            ),
        }
    }
}

fn decode_utf8(bytes: &[u8]) -> Result<&str, TabularError> {
    let text = std::str::from_utf8(bytes).map_err(|e| TabularError::InvalidUtf8(e.valid_up_to()))?;
    Ok(text.strip_prefix('\u{feff}').unwrap_or(text))
}

/// Splits text into records. Quoted fields (comma mode only) may span lines
/// and keep their content verbatim; unquoted fields are trimmed.
fn split_records(text: &str, delimiter: Delimiter) -> Result<Vec<(usize, Vec<String>)>, TabularError> {
    let quoting = delimiter == Delimiter::Comma;
    let delim = delimiter.as_char();
    let mut records = Vec::new();
    let mut fields: Vec<String> = Vec::new();
    let mut field = String::new();
    let mut quoted = false;
    let mut line = 1usize;
    let mut record_line = 1usize;
    let mut chars = text.chars().peekable();
    let mut at_field_start = true;
    let mut record_has_content = false;

    fn finish_field(fields: &mut Vec<String>, field: &mut String, quoted: bool) {
        let value = if quoted { std::mem::take(field) } else { field.trim().to_string() };
        field.clear();
        fields.push(value);
    }

    while let Some(c) = chars.next() {
        if quoting && at_field_start && c == '"' && field.trim().is_empty() {
            field.clear();
            quoted = true;
            at_field_start = false;
            record_has_content = true;
            loop {
                match chars.next() {
                    None => return Err(TabularError::UnterminatedQuote(record_line)),
                    Some('"') => {
                        if chars.peek() == Some(&'"') {
                            chars.next();
                            field.push('"');
                        } else {
                            break;
                        }
                    }
                    Some('\n') => {
                        line += 1;
                        field.push('\n');
                    }
                    Some(other) => field.push(other),
                }
            }
            // only whitespace may follow a closing quote
            while let Some(&next) = chars.peek() {
                if next == delim || next == '\n' || next == '\r' {
                    break;
                }
                if next == ' ' || next == '\t' {
                    chars.next();
                    continue;
                }
                return Err(TabularError::TrailingAfterQuote { line });
            }
            continue;
        }
        match c {
            '\r' if chars.peek() == Some(&'\n') => {}
            '\n' => {
                finish_field(&mut fields, &mut field, quoted);
                records.push((record_line, std::mem::take(&mut fields)));
                quoted = false;
                at_field_start = true;
                record_has_content = false;
                line += 1;
                record_line = line;
            }
            c if c == delim => {
                finish_field(&mut fields, &mut field, quoted);
                quoted = false;
                at_field_start = true;
                record_has_content = true;
            }
            other => {
                if !quoted {
                    field.push(other);
                }
                at_field_start = at_field_start && other.is_whitespace() && other != delim;
                record_has_content = true;
            }
        }
    }
    if record_has_content || !field.is_empty() || !fields.is_empty() {
        finish_field(&mut fields, &mut field, quoted);
        records.push((record_line, fields));
    }
    Ok(records)
}

/// Parses a delimited table whose first record is the header.
pub fn parse_table(bytes: &[u8], delimiter: Delimiter) -> Result<RawTable, TabularError> {
    let text = decode_utf8(bytes)?;
    let mut records = split_records(text, delimiter)?.into_iter();
    let (_, header) = records.next().ok_or(TabularError::EmptyInput)?;
    if header.len() == 1 && header[0].is_empty() {
        return Err(TabularError::EmptyInput);
    }
    let mut seen = HashSet::new();
    for (i, name) in header.iter().enumerate() {
        if name.is_empty() {
            return Err(TabularError::EmptyHeader(i));
        }
        if !seen.insert(name.as_str()) {
            return Err(TabularError::DuplicateHeader(name.clone()));
        }
    }
    let mut rows = Vec::new();
    for (line, fields) in records {
        // blank lines only carry meaning (one missing cell) in one-column tables
        if header.len() > 1 && fields.len() == 1 && fields[0].is_empty() {
            continue;
        }
        if fields.len() != header.len() {
            return Err(TabularError::RaggedRow { line, expected: header.len(), found: fields.len() });
        }
        rows.push(fields);
    }
    Ok(RawTable { header, rows, delimiter })
}

fn needs_quotes(cell: &str, delimiter: Delimiter) -> bool {
    cell.contains(delimiter.as_char())
        || cell.contains('"')
        || cell.contains('\n')
        || cell.contains('\r')
        || cell.trim() != cell
}

fn write_field(out: &mut String, cell: &str, delimiter: Delimiter) {
    match delimiter {
        Delimiter::Comma if needs_quotes(cell, delimiter) => {
            out.push('"');
            out.push_str(&cell.replace('"', "\"\""));
            out.push('"');
        }
        // tabs and newlines cannot be represented in TSV cells
        Delimiter::Tab => out.extend(cell.chars().map(|c| match c {
            '\t' | '\n' | '\r' => ' ',
            c => c,
        })),
        Delimiter::Comma => out.push_str(cell),
    }
}

fn write_record<'a>(out: &mut String, cells: impl IntoIterator<Item = &'a str>, delimiter: Delimiter) {
    for (i, cell) in cells.into_iter().enumerate() {
        if i > 0 {
            out.push(delimiter.as_char());
        }
        write_field(out, cell, delimiter);
    }
    out.push('\n');
}

/// Writes the header and rows, LF-terminated.
pub fn serialize_raw(table: &RawTable, delimiter: Delimiter) -> Vec<u8> {
    let mut out = String::new();
    write_record(&mut out, table.header.iter().map(String::as_str), delimiter);
    for row in &table.rows {
        write_record(&mut out, row.iter().map(String::as_str), delimiter);
    }
    out.into_bytes()
}

/// Writes a dataset in display order; missing cells become empty fields.
pub fn serialize_table(dataset: &crate::model::Dataset, delimiter: Delimiter) -> Vec<u8> {
    serialize_raw(&dataset.to_raw_table(), delimiter)
}

/// Splits a slash-joined leaf-to-root path.
pub fn parse_internal_path(cell: &str) -> Result<Vec<String>, TabularError> {
    cell.split('/')
        .enumerate()
        .map(|(i, seg)| {
            let seg = seg.trim();
            if seg.is_empty() {
                Err(TabularError::EmptyPathSegment(i + 1))
            } else {
                Ok(seg.to_string())
            }
        })
        .collect()
}

/// Parses `term/parent/.../root/Facet` lines. Blank lines are skipped.
pub fn parse_hierarchy_config(text: &str) -> Result<Vec<HierarchyConfigEntry>, TabularError> {
    let mut entries = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        let mut segments = parse_internal_path(line)?;
        if segments.len() < 2 {
            return Err(TabularError::TooFewSegments(i + 1));
        }
        let facet_name = segments.pop().expect("len >= 2");
        entries.push(HierarchyConfigEntry { facet_name, path: segments });
    }
    Ok(entries)
}

/// Reads a two-column dimension file (no header row).
pub fn parse_dimension_file(facet_name: &str, bytes: &[u8], delimiter: Delimiter) -> Result<DimensionFile, TabularError> {
    let text = decode_utf8(bytes)?;
    let mut pairs = Vec::new();
    for (line, mut fields) in split_records(text, delimiter)? {
        if fields.len() == 1 && fields[0].is_empty() {
            continue;
        }
        if fields.len() != 2 {
            return Err(TabularError::DimensionArity { facet: facet_name.to_string(), line, found: fields.len() });
        }
        let second = fields.pop().expect("2 fields");
        let first = fields.pop().expect("2 fields");
        pairs.push((first, second));
    }
    Ok(DimensionFile { facet_name: facet_name.to_string(), pairs })
}

/// Result of joining an object-id file with its dimension files.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MultiFileAssembly {
    pub table: RawTable,
    pub hierarchy: Vec<HierarchyConfigEntry>,
    pub warnings: Vec<TabularWarning>,
}

/// Joins dimension files onto the object id column. A pair whose first
/// element is an object id assigns a value; any other pair is a
/// child/parent hierarchy edge.
pub fn assemble_multifile(object_ids: &RawTable, dimensions: &[DimensionFile]) -> Result<MultiFileAssembly, TabularError> {
    if object_ids.header.len() != 1 {
        return Err(TabularError::ObjectIdNotSingleColumn);
    }
    let mut index: HashMap<&str, usize> = HashMap::new();
    for (i, row) in object_ids.rows.iter().enumerate() {
        let id = row[0].as_str();
        if id.is_empty() {
            return Err(TabularError::EmptyObjectId(i));
        }
        if index.insert(id, i).is_some() {
            return Err(TabularError::DuplicateObjectId(id.to_string()));
        }
    }

    let mut header = object_ids.header.clone();
    let mut rows: Vec<Vec<String>> = object_ids.rows.iter().map(|r| vec![r[0].clone()]).collect();
    let mut hierarchy = Vec::new();
    let mut warnings = Vec::new();

    for dim in dimensions {
        header.push(dim.facet_name.clone());
        let mut values: Vec<Option<&str>> = vec![None; rows.len()];
        let mut parents: BTreeMap<&str, &str> = BTreeMap::new();
        for (first, second) in &dim.pairs {
            if let Some(&row) = index.get(first.as_str()) {
                match values[row] {
                    Some(existing) if existing != second => {
                        return Err(TabularError::ConflictingValue {
                            object: first.clone(),
                            facet: dim.facet_name.clone(),
                        });
                    }
                    _ => values[row] = Some(second),
                }
            } else {
                match parents.get(first.as_str()) {
                    Some(&existing) if existing != second => {
                        return Err(TabularError::ConflictingParent {
                            facet: dim.facet_name.clone(),
                            term: first.clone(),
                        });
                    }
                    _ => {
                        parents.insert(first, second);
                    }
                }
            }
        }
        let mut ambiguous: Vec<&str> = parents.values().copied().filter(|p| index.contains_key(p)).collect();
        ambiguous.sort_unstable();
        ambiguous.dedup();
        warnings.extend(ambiguous.into_iter().map(|id| TabularWarning::AmbiguousObjectId {
            facet: dim.facet_name.clone(),
            id: id.to_string(),
        }));

        let parent_terms: HashSet<&str> = parents.values().copied().collect();
        for &child in parents.keys() {
            // cycle check from every child, bounded by the edge count
            let mut path = vec![child.to_string()];
            let mut visited = HashSet::from([child]);
            let mut cur = child;
            while let Some(&p) = parents.get(cur) {
                if !visited.insert(p) {
                    return Err(TabularError::HierarchyCycle { facet: dim.facet_name.clone(), term: p.to_string() });
                }
                path.push(p.to_string());
                cur = p;
            }
            if !parent_terms.contains(child) {
                hierarchy.push(HierarchyConfigEntry { facet_name: dim.facet_name.clone(), path });
            }
        }
        for (row, value) in rows.iter_mut().zip(values) {
            row.push(value.unwrap_or("").to_string());
        }
    }

    Ok(MultiFileAssembly { table: RawTable { header, rows, delimiter: object_ids.delimiter }, hierarchy, warnings })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(header: &[&str], rows: &[&[&str]]) -> RawTable {
        RawTable {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: rows.iter().map(|r| r.iter().map(|s| s.to_string()).collect()).collect(),
            delimiter: Delimiter::Comma,
        }
    }

    #[test]
    fn parses_tab_table() {
        let t = parse_table(b"A\tB\n1\t2", Delimiter::Tab).unwrap();
        assert_eq!(t.header, vec!["A", "B"]);
        assert_eq!(t.rows, vec![vec!["1", "2"]]);
    }

    #[test]
    fn ragged_row_reports_line() {
        assert_eq!(
            parse_table(b"A,B\n1", Delimiter::Comma),
            Err(TabularError::RaggedRow { line: 2, expected: 2, found: 1 })
        );
    }

    #[test]
    fn header_errors() {
        assert_eq!(parse_table(b"", Delimiter::Comma), Err(TabularError::EmptyInput));
        assert_eq!(parse_table(b"A, A\n", Delimiter::Comma), Err(TabularError::DuplicateHeader("A".into())));
        assert_eq!(parse_table(b"A,,B\n", Delimiter::Comma), Err(TabularError::EmptyHeader(1)));
        assert_eq!(parse_table(b"A,\xff\n", Delimiter::Comma), Err(TabularError::InvalidUtf8(2)));
    }

    #[test]
    fn quoted_fields_and_crlf() {
        let t = parse_table(b"Name,Note\r\n\"a,b\", plain \r\n\"say \"\"hi\"\"\",\"two\nlines\"\r\n", Delimiter::Comma).unwrap();
        assert_eq!(t.rows, vec![vec!["a,b", "plain"], vec!["say \"hi\"", "two\nlines"]]);
        assert_eq!(parse_table(b"A\n\"x", Delimiter::Comma), Err(TabularError::UnterminatedQuote(2)));
    }

    #[test]
    fn single_column_empty_line_is_missing_cell() {
        let t = parse_table(b"A\nx\n\ny\n", Delimiter::Comma).unwrap();
        assert_eq!(t.rows, vec![vec!["x"], vec![""], vec!["y"]]);
    }

    #[test]
    fn serialize_minimal_and_quoting() {
        assert_eq!(serialize_raw(&table(&["A"], &[&["x"]]), Delimiter::Comma), b"A\nx\n");
        assert_eq!(serialize_raw(&table(&["A"], &[&["a,b"]]), Delimiter::Comma), b"A\n\"a,b\"\n");
        let t = table(&["A", "B"], &[&["a,b", " pad"], &["q\"uote", "line\nbreak"]]);
        let back = parse_table(&serialize_raw(&t, Delimiter::Comma), Delimiter::Comma).unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn internal_paths() {
        assert_eq!(parse_internal_path("Mazda/Japanese/Asian").unwrap(), vec!["Mazda", "Japanese", "Asian"]);
        assert_eq!(parse_internal_path("Chania").unwrap(), vec!["Chania"]);
        assert_eq!(parse_internal_path("a//b"), Err(TabularError::EmptyPathSegment(2)));
    }

    #[test]
    fn hierarchy_config_lines() {
        let entries = parse_hierarchy_config("Mazda/Japanese/Asian/Manufacturer\n\nChania/Crete/Location\n").unwrap();
        assert_eq!(
            entries,
            vec![
                HierarchyConfigEntry { facet_name: "Manufacturer".into(), path: vec!["Mazda".into(), "Japanese".into(), "Asian".into()] },
                HierarchyConfigEntry { facet_name: "Location".into(), path: vec!["Chania".into(), "Crete".into()] },
            ]
        );
        assert_eq!(parse_hierarchy_config("Manufacturer"), Err(TabularError::TooFewSegments(1)));
    }

    fn dim(name: &str, pairs: &[(&str, &str)]) -> DimensionFile {
        DimensionFile {
            facet_name: name.into(),
            pairs: pairs.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect(),
        }
    }

    #[test]
    fn multifile_classifies_pairs() {
        let ids = table(&["Hotel"], &[&["h1"], &["h2"]]);
        let out = assemble_multifile(&ids, &[dim("Location", &[("h1", "Chania"), ("h2", "Iraklio"), ("Chania", "Crete")])]).unwrap();
        assert_eq!(out.table.header, vec!["Hotel", "Location"]);
        assert_eq!(out.table.rows, vec![vec!["h1", "Chania"], vec!["h2", "Iraklio"]]);
        assert_eq!(
            out.hierarchy,
            vec![HierarchyConfigEntry { facet_name: "Location".into(), path: vec!["Chania".into(), "Crete".into()] }]
        );
        assert!(out.warnings.is_empty());
    }

    #[test]
    fn multifile_chains_and_missing() {
        let ids = table(&["id"], &[&["h1"], &["h2"]]);
        let out = assemble_multifile(
            &ids,
            &[dim("Location", &[("Crete", "Greece"), ("h1", "Chania"), ("Chania", "Crete")]), dim("Stars", &[("h1", "5")])],
        )
        .unwrap();
        assert_eq!(out.table.rows, vec![vec!["h1", "Chania", "5"], vec!["h2", "", ""]]);
        assert_eq!(out.hierarchy.len(), 1);
        assert_eq!(out.hierarchy[0].path, vec!["Chania", "Crete", "Greece"]);
    }

    #[test]
    fn multifile_errors() {
        let ids = table(&["id"], &[&["h1"]]);
        assert!(matches!(
            assemble_multifile(&ids, &[dim("X", &[("a", "b"), ("b", "a")])]),
            Err(TabularError::HierarchyCycle { .. })
        ));
        assert!(matches!(
            assemble_multifile(&ids, &[dim("X", &[("h1", "a"), ("h1", "b")])]),
            Err(TabularError::ConflictingValue { .. })
        ));
        assert_eq!(
            assemble_multifile(&table(&["a", "b"], &[]), &[]),
            Err(TabularError::ObjectIdNotSingleColumn)
        );
        assert_eq!(
            assemble_multifile(&table(&["id"], &[&["h1"], &["h1"]]), &[]),
            Err(TabularError::DuplicateObjectId("h1".into()))
        );
        let single = assemble_multifile(&ids, &[dim("Stars", &[("h1", "5")])]).unwrap();
        assert_eq!(single.table.rows, vec![vec!["h1", "5"]]);
        assert!(single.hierarchy.is_empty());
    }

    #[test]
    fn multifile_warns_on_id_used_as_parent() {
        let ids = table(&["id"], &[&["h1"], &["h2"]]);
        let out = assemble_multifile(&ids, &[dim("X", &[("h1", "a"), ("sub", "h2")])]).unwrap();
        assert_eq!(out.warnings, vec![TabularWarning::AmbiguousObjectId { facet: "X".into(), id: "h2".into() }]);
    }

    #[test]
    fn dimension_file_parse() {
        let d = parse_dimension_file("Location", b"h1,Chania\nChania,Crete\n", Delimiter::Comma).unwrap();
        assert_eq!(d.pairs.len(), 2);
        assert!(matches!(
            parse_dimension_file("L", b"a,b,c\n", Delimiter::Comma),
            Err(TabularError::DimensionArity { .. })
        ));
    }
}
