use std::collections::HashMap;

use serde_json::Value;

use super::SparqlError;

/// A parsed SPARQL JSON results document with every term rendered as text.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ResultsDocument {
    pub vars: Vec<String>,
    pub bindings: Vec<HashMap<String, String>>,
}

fn malformed(detail: impl Into<String>) -> SparqlError {
    SparqlError::MalformedResults(detail.into())
}

fn render_term(var: &str, term: &Value) -> Result<String, SparqlError> {
    let obj = term.as_object().ok_or_else(|| malformed(format!("binding for {var:?} is not an object")))?;
    let kind = obj.get("type").and_then(Value::as_str).ok_or_else(|| malformed(format!("binding for {var:?} has no type")))?;
    let value = obj.get("value").and_then(Value::as_str).ok_or_else(|| malformed(format!("binding for {var:?} has no value")))?;
    match kind {
        "uri" | "literal" | "typed-literal" => Ok(value.to_string()),
        "bnode" => Ok(format!("_:{value}")),
        other => Err(malformed(format!("unsupported term type {other:?}"))),
    }
}

pub fn parse_results(bytes: &[u8]) -> Result<ResultsDocument, SparqlError> {
    let doc: Value = serde_json::from_slice(bytes).map_err(|e| malformed(e.to_string()))?;
    if doc.get("boolean").is_some() {
        return Err(malformed("boolean result where solutions were expected"));
    }
    let vars = doc
        .pointer("/head/vars")
        .and_then(Value::as_array)
        .ok_or_else(|| malformed("missing head.vars"))?
        .iter()
        .map(|v| v.as_str().map(str::to_string).ok_or_else(|| malformed("non-string variable name")))
        .collect::<Result<Vec<_>, _>>()?;
    let raw = doc
        .pointer("/results/bindings")
        .and_then(Value::as_array)
        .ok_or_else(|| malformed("missing results.bindings"))?;
    let mut bindings = Vec::with_capacity(raw.len());
    for b in raw {
        let obj = b.as_object().ok_or_else(|| malformed("solution is not an object"))?;
        let mut row = HashMap::with_capacity(obj.len());
        for (var, term) in obj {
            row.insert(var.clone(), render_term(var, term)?);
        }
        bindings.push(row);
    }
    Ok(ResultsDocument { vars, bindings })
}

#[cfg(test)]
mod tests {
    use super::*;

    const DOC: &str = r#"{
      "head": {"vars": ["Speed", "Price", "Weight"]},
      "results": {"bindings": [
        {"Speed": {"type": "literal", "value": "200", "datatype": "http://www.w3.org/2001/XMLSchema#integer"},
         "Price": {"type": "literal", "value": "30000", "xml:lang": "en"},
         "Weight": {"type": "uri", "value": "http://ex.org/w"}},
        {"Speed": {"type": "bnode", "value": "b0"},
         "Weight": {"type": "typed-literal", "value": "1.5", "datatype": "http://www.w3.org/2001/XMLSchema#decimal"}}
      ]}
    }"#;

    #[test]
    fn renders_terms_and_unbound() {
        let doc = parse_results(DOC.as_bytes()).unwrap();
        let table = doc.into_table(None);
        assert_eq!(table.header, vec!["Speed", "Price", "Weight"]);
        assert_eq!(table.rows[0], vec!["200", "30000", "http://ex.org/w"]);
        assert_eq!(table.rows[1], vec!["_:b0", "", "1.5"]);
    }

    #[test]
    fn zero_bindings() {
        let doc = parse_results(br#"{"head":{"vars":["a","b","c"]},"results":{"bindings":[]}}"#).unwrap();
        let t = doc.into_table(None);
        assert_eq!(t.header.len(), 3);
        assert!(t.rows.is_empty());
    }

    #[test]
    fn malformed_documents() {
        for bad in [&b"not json"[..], br#"{"head":{}}"#, br#"{"head":{"vars":["a"]},"boolean":true}"#, br#"{"head":{"vars":["a"]},"results":{"bindings":[{"a":{"value":"x"}}]}}"#] {
            assert!(matches!(parse_results(bad), Err(SparqlError::MalformedResults(_))));
        }
    }
}
