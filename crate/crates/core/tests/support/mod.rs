#![allow(dead_code)]

use std::path::PathBuf;

use facetprep::cli::parse_record;
use facetprep::intervals::{IntervalSpec, IntervalSpecChain};
use facetprep::model::{build_dataset, BuildOptions, Dataset, FacetType};
use facetprep::tabular::{parse_table, Delimiter, RawTable};
use facetprep::transform::{CondOp, Conjunct, RowCondition, RowKey, Transformation};
use rand::rngs::StdRng;
use rand::seq::SliceRandom;
use rand::Rng;

pub fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests").join("fixtures").join(name)
}

pub fn hotels_csv() -> String {
    std::fs::read_to_string(fixture("hotels.csv")).unwrap()
}

pub fn hotels_log_text() -> String {
    std::fs::read_to_string(fixture("hotels.jsonl")).unwrap()
}

pub fn hotels_log() -> Vec<Transformation> {
    hotels_log_text().lines().filter(|l| !l.trim().is_empty()).map(|l| parse_record(l).unwrap()).collect()
}

pub fn dataset_from_csv(csv: &str) -> Dataset {
    let raw = parse_table(csv.as_bytes(), Delimiter::Comma).unwrap();
    build_dataset(&raw, &[], BuildOptions { split_internal_paths: true }).unwrap().0
}

/// Rows of the fixture whose Location is outside Greece, counted from the
/// file itself.
pub fn non_greek_rows(csv: &str) -> usize {
    let greek = ["Chania", "Iraklio", "Heraklion", "Rethymno", "Athens"];
    csv.lines().skip(1).filter(|l| !l.is_empty()).filter(|l| !greek.contains(&l.split(',').nth(1).unwrap())).count()
}

// ---------------------------------------------------------------- N-Triples

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum NtObject {
    Iri(String),
    Literal { value: String, datatype: Option<String>, lang: Option<String> },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NtTriple {
    pub subject: String,
    pub predicate: String,
    pub object: NtObject,
}

struct Cursor<'a> {
    s: &'a [u8],
    i: usize,
}

impl Cursor<'_> {
    fn ws(&mut self) {
        while self.i < self.s.len() && (self.s[self.i] == b' ' || self.s[self.i] == b'\t') {
            self.i += 1;
        }
    }

    fn eat(&mut self, b: u8) -> Result<(), String> {
        if self.s.get(self.i) == Some(&b) {
            self.i += 1;
            Ok(())
        } else {
            Err(format!("expected {:?} at byte {}", b as char, self.i))
        }
    }

    fn hex(&mut self, n: usize) -> Result<char, String> {
        let digits = std::str::from_utf8(self.s.get(self.i..self.i + n).ok_or("short escape")?).map_err(|e| e.to_string())?;
        self.i += n;
        let v = u32::from_str_radix(digits, 16).map_err(|e| e.to_string())?;
        char::from_u32(v).ok_or_else(|| "bad code point".to_string())
    }

    fn iri(&mut self) -> Result<String, String> {
        self.eat(b'<')?;
        let mut out = String::new();
        loop {
            let rest = std::str::from_utf8(&self.s[self.i..]).map_err(|e| e.to_string())?;
            let c = rest.chars().next().ok_or("unterminated IRI")?;
            self.i += c.len_utf8();
            match c {
                '>' => break,
                '\\' => {
                    let k = self.s.get(self.i).copied().ok_or("bad escape")?;
                    self.i += 1;
                    out.push(match k {
                        b'u' => self.hex(4)?,
                        b'U' => self.hex(8)?,
                        _ => return Err("bad IRI escape".into()),
                    });
                }
                c if (c as u32) <= 0x20 || "<\"{}|^`".contains(c) => return Err(format!("illegal IRI char {c:?}")),
                c => out.push(c),
            }
        }
        let scheme_end = out.find(':').ok_or("IRI is not absolute")?;
        let scheme = &out[..scheme_end];
        if scheme.is_empty()
            || !scheme.chars().next().unwrap().is_ascii_alphabetic()
            || !scheme.chars().all(|c| c.is_ascii_alphanumeric() || "+-.".contains(c))
        {
            return Err(format!("bad scheme in {out:?}"));
        }
        Ok(out)
    }

    fn literal(&mut self) -> Result<NtObject, String> {
        self.eat(b'"')?;
        let mut value = String::new();
        loop {
            let rest = std::str::from_utf8(&self.s[self.i..]).map_err(|e| e.to_string())?;
            let c = rest.chars().next().ok_or("unterminated literal")?;
            self.i += c.len_utf8();
            match c {
                '"' => break,
                '\\' => {
                    let k = self.s.get(self.i).copied().ok_or("bad escape")?;
                    self.i += 1;
                    value.push(match k {
                        b't' => '\t',
                        b'b' => '\u{8}',
                        b'n' => '\n',
                        b'r' => '\r',
                        b'f' => '\u{c}',
                        b'"' => '"',
                        b'\'' => '\'',
                        b'\\' => '\\',
                        b'u' => self.hex(4)?,
                        b'U' => self.hex(8)?,
                        _ => return Err("bad literal escape".into()),
                    });
                }
                '\n' | '\r' => return Err("raw line break in literal".into()),
                c => value.push(c),
            }
        }
        let (mut datatype, mut lang) = (None, None);
        if self.s[self.i..].starts_with(b"^^") {
            self.i += 2;
            datatype = Some(self.iri()?);
        } else if self.s.get(self.i) == Some(&b'@') {
            self.i += 1;
            let start = self.i;
            while self.i < self.s.len() && (self.s[self.i].is_ascii_alphanumeric() || self.s[self.i] == b'-') {
                self.i += 1;
            }
            lang = Some(String::from_utf8(self.s[start..self.i].to_vec()).unwrap());
        }
        Ok(NtObject::Literal { value, datatype, lang })
    }
}

/// A minimal N-Triples line parser, written separately from the exporter.
pub fn parse_nt_line(line: &str) -> Result<NtTriple, String> {
    let mut c = Cursor { s: line.as_bytes(), i: 0 };
    c.ws();
    let subject = c.iri()?;
    c.ws();
    let predicate = c.iri()?;
    c.ws();
    let object = match c.s.get(c.i) {
        Some(b'<') => NtObject::Iri(c.iri()?),
        Some(b'"') => c.literal()?,
        _ => return Err("expected object".into()),
    };
    c.ws();
    c.eat(b'.')?;
    c.ws();
    if c.i != c.s.len() {
        return Err("trailing content".into());
    }
    Ok(NtTriple { subject, predicate, object })
}

pub fn parse_nt(doc: &str) -> Result<Vec<NtTriple>, String> {
    if !doc.is_empty() && !doc.ends_with('\n') {
        return Err("document is not LF-terminated".into());
    }
    doc.lines().enumerate().map(|(i, l)| parse_nt_line(l).map_err(|e| format!("line {}: {e}", i + 1))).collect()
}

// ---------------------------------------------------------------- random data

const WORDS: [&str; 10] = ["alpha", "Beta", "gamma", "Delta", "eps", "Zeta", "eta", "theta", "Iota", "kappa"];

/// A small random table of strings and integers with unique headers.
pub fn random_table(rng: &mut StdRng) -> RawTable {
    let cols = rng.gen_range(2..=5);
    let rows = rng.gen_range(0..=8);
    let header: Vec<String> = (0..cols).map(|i| format!("F{i}")).collect();
    let numeric: Vec<bool> = (0..cols).map(|_| rng.gen_bool(0.4)).collect();
    let body = (0..rows)
        .map(|_| {
            (0..cols)
                .map(|c| {
                    if rng.gen_bool(0.1) {
                        String::new()
                    } else if numeric[c] {
                        rng.gen_range(0..100).to_string()
                    } else {
                        WORDS[rng.gen_range(0..WORDS.len())].to_string()
                    }
                })
                .collect()
        })
        .collect();
    RawTable::new(header, body, Delimiter::Comma)
}

pub fn dataset_from_raw(raw: &RawTable) -> Dataset {
    build_dataset(raw, &[], BuildOptions::default()).unwrap().0
}

fn pick<'a>(rng: &mut StdRng, items: &'a [String]) -> Option<&'a String> {
    items.choose(rng)
}

/// A random transformation shaped by `d`; about one in five will be
/// rejected by the engine.
pub fn random_op(rng: &mut StdRng, d: &Dataset) -> Transformation {
    let names: Vec<String> = d.facets.iter().map(|f| f.name.clone()).collect();
    let facet = pick(rng, &names).cloned().unwrap_or_else(|| "F0".into());
    let idx = d.facet_index(&facet);
    let values: Vec<String> = idx.map(|i| d.value_set(i).into_iter().collect()).unwrap_or_default();
    let value = pick(rng, &values).cloned().unwrap_or_else(|| "alpha".into());
    let word = WORDS[rng.gen_range(0..WORDS.len())].to_string();
    match rng.gen_range(0..18) {
        0 => Transformation::DeleteRows {
            cond: RowCondition::new(vec![Conjunct::new(facet, [CondOp::Eq, CondOp::Ne, CondOp::StartsWith][rng.gen_range(0..3)], value)]),
        },
        1 => Transformation::AddRow {
            cells: (0..d.facets.len()).map(|_| if rng.gen_bool(0.5) { rng.gen_range(0..100).to_string() } else { word.clone() }).collect(),
        },
        2 => Transformation::EditCell {
            row_key: RowKey::Index(rng.gen_range(0..d.rows.len().max(1) + 1)),
            facet,
            new_value: rng.gen_range(0..100).to_string(),
        },
        3 => Transformation::ReplaceValue { facet, old: value, new: word },
        4 => Transformation::RenameFacet { old: facet, new: format!("R{}", rng.gen_range(0..50)) },
        5 => Transformation::SetFacetType {
            facet,
            ftype: [FacetType::Integer, FacetType::Float, FacetType::String, FacetType::Identifier][rng.gen_range(0..4)],
        },
        6 => Transformation::SetVisibility { facet, visible: rng.gen_bool(0.5) },
        7 => {
            let mut perm = names.clone();
            perm.shuffle(rng);
            Transformation::ReorderFacets { permutation: perm }
        }
        8 if d.facets.len() > 1 => Transformation::DeleteFacet { facet },
        9 => Transformation::MoveFacet { facet, new_index: rng.gen_range(0..names.len().max(1)) },
        10 => {
            let n = rng.gen_range(1..=2);
            let children: Vec<String> = values.choose_multiple(rng, n).cloned().collect();
            Transformation::AddParent { facet, children, parent: format!("G{}", rng.gen_range(0..4)) }
        }
        11 => Transformation::MoveTerm { facet, term: value, new_parent: if rng.gen_bool(0.5) { None } else { Some(format!("G{}", rng.gen_range(0..4))) } },
        12 => Transformation::GroupByPrefix { facet, prefix: value.chars().take(1).collect() },
        13 => Transformation::GroupByLetterRange { facet, from: 'A', to: ['F', 'M', 'Z'][rng.gen_range(0..3)] },
        14 => {
            let width = [10.0, 25.0, 50.0][rng.gen_range(0..3)];
            Transformation::DefineIntervals {
                facet,
                chain: IntervalSpecChain { levels: vec![IntervalSpec::Linear { min: 0.0, max: 100.0, width: 50.0 }, IntervalSpec::Linear { min: 0.0, max: 100.0, width }] },
            }
        }
        15 => Transformation::DeriveFacet {
            name: format!("D{}", rng.gen_range(0..50)),
            expression: format!("{{{facet}}} ++ \"-\" ++ upper({{{}}})", pick(rng, &names).cloned().unwrap_or_default()),
        },
        16 => Transformation::RemoveEmptyRows {},
        _ => Transformation::DeleteRowsWithMissing { facet: if rng.gen_bool(0.5) { Some(facet) } else { None } },
    }
}

/// Drops, edits and appends rows of a source table.
pub fn perturb(rng: &mut StdRng, raw: &RawTable) -> RawTable {
    let mut out = raw.clone();
    if !out.rows.is_empty() && rng.gen_bool(0.5) {
        let i = rng.gen_range(0..out.rows.len());
        out.rows.remove(i);
    }
    for row in out.rows.iter_mut() {
        for cell in row.iter_mut() {
            if rng.gen_bool(0.15) {
                *cell = WORDS[rng.gen_range(0..WORDS.len())].to_string();
            }
        }
    }
    if rng.gen_bool(0.5) {
        let cols = out.header.len();
        out.rows.push((0..cols).map(|_| rng.gen_range(0..100).to_string()).collect());
    }
    if rng.gen_bool(0.2) {
        let c = rng.gen_range(0..out.header.len());
        out.header[c] = format!("X{c}");
    }
    out
}
