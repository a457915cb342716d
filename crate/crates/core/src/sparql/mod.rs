//! SPARQL SELECT ingestion.

mod favourites;
pub mod mock;
mod results;

use std::io::Read;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use favourites::{Favourite, FavouritesError, FavouritesStore};
pub use results::{parse_results, ResultsDocument};

use crate::tabular::{Delimiter, RawTable};

/// Queries longer than this many bytes are sent as a POST form.
pub const GET_LENGTH_LIMIT: usize = 2048;

pub const RESULTS_MEDIA_TYPE: &str = "application/sparql-results+json";

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SparqlError {
    #[error("network error: {0}")]
    NetworkError(String),
    #[error("endpoint answered with HTTP status {0}")]
    HttpStatus(u16),
    #[error("malformed results document: {0}")]
    MalformedResults(String),
    #[error("query is not a SELECT query")]
    NotSelectQuery,
    #[error("request timed out")]
    Timeout,
    #[error("invalid endpoint URL {0:?}")]
    InvalidEndpoint(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SparqlSource {
    pub endpoint_url: String,
    pub query: String,
}

impl SparqlSource {
    pub fn new(endpoint_url: impl Into<String>, query: impl Into<String>) -> Result<Self, SparqlError> {
        let src = Self { endpoint_url: endpoint_url.into(), query: query.into() };
        src.validate()?;
        Ok(src)
    }

    pub fn validate(&self) -> Result<(), SparqlError> {
        match url::Url::parse(&self.endpoint_url) {
            Ok(u) if matches!(u.scheme(), "http" | "https") && u.has_host() => {}
            _ => return Err(SparqlError::InvalidEndpoint(self.endpoint_url.clone())),
        }
        select_projection(&self.query).map(|_| ())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Token<'a> {
    Word(&'a str),
    Iri,
    Str,
    Punct(char),
}

fn tokens(q: &str) -> Vec<Token<'_>> {
    let mut out = Vec::new();
    let bytes = q.as_bytes();
    let mut i = 0;
    while i < bytes.len() {
        let c = q[i..].chars().next().unwrap();
        if c.is_whitespace() {
            i += c.len_utf8();
        } else if c == '#' {
            while i < bytes.len() && bytes[i] != b'\n' {
                i += 1;
            }
        } else if c == '<' {
            let rest = &q[i + 1..];
            match rest.find(|ch: char| ch == '>' || ch.is_whitespace()) {
                Some(end) if rest[end..].starts_with('>') => {
                    out.push(Token::Iri);
                    i += end + 2;
                }
                _ => {
                    out.push(Token::Punct('<'));
                    i += 1;
                }
            }
        } else if c == '"' || c == '\'' {
            let quote = bytes[i];
            i += 1;
            while i < bytes.len() && bytes[i] != quote {
                i += if bytes[i] == b'\\' { 2 } else { 1 };
            }
            i += 1;
            out.push(Token::Str);
        } else if c.is_alphanumeric() || matches!(c, '?' | '$' | '_' | ':') {
            let start = i;
            while i < bytes.len() {
                let ch = q[i..].chars().next().unwrap();
                if ch.is_alphanumeric() || matches!(ch, '?' | '$' | '_' | ':' | '-' | '.') {
                    i += ch.len_utf8();
                } else {
                    break;
                }
            }
            out.push(Token::Word(q[start..i].trim_end_matches('.')));
        } else {
            out.push(Token::Punct(c));
            i += c.len_utf8();
        }
    }
    out
}

/// Returns the explicit projection of a SELECT query, or `None` for
/// `SELECT *`.
pub fn select_projection(query: &str) -> Result<Option<Vec<String>>, SparqlError> {
    let toks = tokens(query);
    let mut i = 0;
    loop {
        match toks.get(i) {
            Some(Token::Word(w)) if w.eq_ignore_ascii_case("BASE") => i += 2,
            Some(Token::Word(w)) if w.eq_ignore_ascii_case("PREFIX") => i += 3,
            Some(Token::Word(w)) if w.eq_ignore_ascii_case("SELECT") => break,
            _ => return Err(SparqlError::NotSelectQuery),
        }
    }
    i += 1;
    if let Some(Token::Word(w)) = toks.get(i) {
        if w.eq_ignore_ascii_case("DISTINCT") || w.eq_ignore_ascii_case("REDUCED") {
            i += 1;
        }
    }
    let mut vars: Vec<String> = Vec::new();
    let mut push = |v: &str| {
        let name = v[1..].to_string();
        if !name.is_empty() && !vars.contains(&name) {
            vars.push(name);
        }
    };
    let mut depth = 0usize;
    let mut last_in_group: Option<&str> = None;
    while let Some(t) = toks.get(i) {
        match t {
            Token::Punct('*') if depth == 0 => return Ok(None),
            Token::Punct('(') => depth += 1,
            Token::Punct(')') => {
                depth = depth.saturating_sub(1);
                if depth == 0 {
                    if let Some(v) = last_in_group.take() {
                        push(v);
                    }
                }
            }
            Token::Punct('{') => break,
            Token::Word(w) if depth == 0 && (w.eq_ignore_ascii_case("WHERE") || w.eq_ignore_ascii_case("FROM")) => break,
            Token::Word(w) if w.starts_with(['?', '$']) => {
                if depth == 0 {
                    push(w);
                } else if matches!(toks.get(i.wrapping_sub(1)), Some(Token::Word(a)) if a.eq_ignore_ascii_case("AS")) {
                    last_in_group = Some(w);
                }
            }
            _ => {}
        }
        i += 1;
    }
    Ok(Some(vars))
}

fn is_timeout(err: &(dyn std::error::Error + 'static)) -> bool {
    let mut cur: Option<&(dyn std::error::Error + 'static)> = Some(err);
    while let Some(e) = cur {
        if let Some(io) = e.downcast_ref::<std::io::Error>() {
            if matches!(io.kind(), std::io::ErrorKind::TimedOut | std::io::ErrorKind::WouldBlock) {
                return true;
            }
        }
        cur = e.source();
    }
    false
}

fn map_ureq(err: ureq::Error) -> SparqlError {
    match err {
        ureq::Error::Status(code, _) => SparqlError::HttpStatus(code),
        ureq::Error::Transport(t) => {
            if is_timeout(&t) || t.to_string().contains("timed out") {
                SparqlError::Timeout
            } else {
                SparqlError::NetworkError(t.to_string())
            }
        }
    }
}

/// Runs a SELECT query and returns its solutions as a table. Columns follow
/// the SELECT clause; `SELECT *` uses the document's variable list.
pub fn execute_select(src: &SparqlSource, timeout: Duration) -> Result<RawTable, SparqlError> {
    src.validate()?;
    let projection = select_projection(&src.query)?;
    let agent = ureq::AgentBuilder::new().timeout(timeout).build();
    let response = if src.query.len() <= GET_LENGTH_LIMIT {
        agent.get(&src.endpoint_url).query("query", &src.query).set("Accept", RESULTS_MEDIA_TYPE).call()
    } else {
        agent.post(&src.endpoint_url).set("Accept", RESULTS_MEDIA_TYPE).send_form(&[("query", src.query.as_str())])
    }
    .map_err(map_ureq)?;
    let mut body = Vec::new();
    response.into_reader().read_to_end(&mut body).map_err(|e| {
        if is_timeout(&e) {
            SparqlError::Timeout
        } else {
            SparqlError::NetworkError(e.to_string())
        }
    })?;
    let doc = parse_results(&body)?;
    Ok(doc.into_table(projection.as_deref()))
}

impl ResultsDocument {
    /// Lays the solutions out under `projection`, or under the document's
    /// own variables when no projection is given.
    pub fn into_table(self, projection: Option<&[String]>) -> RawTable {
        let header: Vec<String> = match projection {
            Some(p) if !p.is_empty() => p.to_vec(),
            _ => self.vars.clone(),
        };
        let rows = self
            .bindings
            .into_iter()
            .map(|mut b| header.iter().map(|v| b.remove(v).unwrap_or_default()).collect())
            .collect();
        RawTable::new(header, rows, Delimiter::Comma)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn proj(q: &str) -> Option<Vec<String>> {
        select_projection(q).unwrap()
    }

    #[test]
    fn projection_order() {
        assert_eq!(proj("SELECT ?Speed ?Price ?Weight WHERE { ?s ?p ?o }").unwrap(), vec!["Speed", "Price", "Weight"]);
        assert_eq!(
            proj("PREFIX ex: <http://ex.org/#a>\n# note\nselect distinct $a (str(?b) AS ?c) { ?a ex:p ?b }").unwrap(),
            vec!["a", "c"]
        );
        assert_eq!(proj("BASE <http://x/> SELECT * WHERE {}"), None);
    }

    #[test]
    fn rejects_other_forms() {
        assert_eq!(select_projection("CONSTRUCT { ?s ?p ?o } WHERE { ?s ?p ?o }"), Err(SparqlError::NotSelectQuery));
        assert_eq!(select_projection("# SELECT\nASK { ?s ?p ?o }"), Err(SparqlError::NotSelectQuery));
        assert_eq!(select_projection(""), Err(SparqlError::NotSelectQuery));
    }

    #[test]
    fn endpoint_must_be_http() {
        assert!(matches!(SparqlSource::new("ftp://x/sparql", "SELECT ?a {}"), Err(SparqlError::InvalidEndpoint(_))));
        assert!(matches!(SparqlSource::new("not a url", "SELECT ?a {}"), Err(SparqlError::InvalidEndpoint(_))));
        assert!(SparqlSource::new("https://dbpedia.org/sparql", "SELECT ?a {}").is_ok());
    }
}
