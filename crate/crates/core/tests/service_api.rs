mod support;

use std::net::SocketAddr;
use std::path::Path;
use std::time::Duration;

use facetprep::project::{LoadContext, ProjectSession, LOG_FILE};
use facetprep::rdf::{export_ntriples, ExportOptions};
use facetprep::service::{spawn, ServiceConfig, ServiceHandle};
use facetprep::sparql::mock::{MockEndpoint, MockResponse};
use serde_json::{json, Value};
use support::*;

fn start(root: &Path) -> ServiceHandle {
    spawn(ServiceConfig {
        listen: SocketAddr::from(([127, 0, 0, 1], 0)),
        root: root.to_path_buf(),
        sparql_timeout: Duration::from_secs(2),
        idle_timeout: Duration::from_secs(600),
    })
    .unwrap()
}

fn call(req: ureq::Request, body: Option<Value>) -> (u16, String) {
    let res = match body {
        Some(b) => req.set("content-type", "application/json").send_string(&b.to_string()),
        None => req.call(),
    };
    match res {
        Ok(r) => (r.status(), r.into_string().unwrap()),
        Err(ureq::Error::Status(code, r)) => (code, r.into_string().unwrap()),
        Err(e) => panic!("transport error: {e}"),
    }
}

fn get(h: &ServiceHandle, path: &str) -> (u16, Value) {
    let (s, b) = call(ureq::get(&h.url(path)), None);
    (s, serde_json::from_str(&b).unwrap_or(Value::String(b)))
}

fn post(h: &ServiceHandle, path: &str, body: Value) -> (u16, Value) {
    let (s, b) = call(ureq::post(&h.url(path)), Some(body));
    (s, serde_json::from_str(&b).unwrap())
}

fn create_hotels(h: &ServiceHandle, name: &str) -> String {
    let src = fixture("hotels.csv");
    let (status, body) = post(h, "/projects", json!({"name": name, "source": {"kind": "single-file", "path": src}}));
    assert_eq!(status, 201, "{body}");
    body["session_id"].as_str().unwrap().to_string()
}

fn file_bytes(p: &Path) -> Vec<u8> {
    std::fs::read(p).unwrap_or_default()
}

#[test]
fn replace_value_then_values_reflect_it() {
    let tmp = tempfile::tempdir().unwrap();
    let h = start(tmp.path());
    let sid = create_hotels(&h, "hotels");

    let (status, body) = get(&h, &format!("/sessions/{sid}/facets/Location/values"));
    assert_eq!(status, 200);
    assert_eq!(body["values"].as_array().unwrap().len(), 6);

    let t = json!({"type": "ReplaceValue", "params": {"facet": "Location", "old": "Iraklio", "new": "Heraklion"}});
    let (status, body) = post(&h, &format!("/sessions/{sid}/transform"), t);
    assert_eq!(status, 200, "{body}");
    assert_eq!(body["outcome"]["status"], "Applied");
    assert_eq!(body["entry"]["seq"], 1);

    let (_, body) = get(&h, &format!("/sessions/{sid}/facets/Location/values"));
    let values: Vec<&str> = body["values"].as_array().unwrap().iter().map(|v| v["value"].as_str().unwrap_or_else(|| v.as_str().unwrap())).collect();
    assert_eq!(values.len(), 5);
    assert!(!values.contains(&"Iraklio"));
}

#[test]
fn rejected_transform_is_not_logged() {
    let tmp = tempfile::tempdir().unwrap();
    let h = start(tmp.path());
    let sid = create_hotels(&h, "hotels");
    let log_path = tmp.path().join("hotels").join(LOG_FILE);
    let before = file_bytes(&log_path);

    let t = json!({"type": "ReplaceValue", "params": {"facet": "Location", "old": "Atlantis", "new": "X"}});
    let (status, body) = post(&h, &format!("/sessions/{sid}/transform"), t);
    assert_eq!(status, 422);
    assert_eq!(body["error"], "OldValueAbsent");

    let (status, body) = post(&h, &format!("/sessions/{sid}/transform"), json!({"type": "Nope", "params": {}}));
    assert_eq!(status, 422, "{body}");

    assert_eq!(file_bytes(&log_path), before);
    let (_, log) = get(&h, &format!("/sessions/{sid}/log"));
    assert!(log["log"].as_array().unwrap().is_empty());
}

#[test]
fn undo_on_empty_log_is_422() {
    let tmp = tempfile::tempdir().unwrap();
    let h = start(tmp.path());
    let sid = create_hotels(&h, "hotels");
    let (status, body) = post(&h, &format!("/sessions/{sid}/undo"), json!({}));
    assert_eq!(status, 422);
    assert_eq!(body["error"], "NothingToUndo");
    let (status, body) = post(&h, &format!("/sessions/{sid}/redo"), json!({}));
    assert_eq!(status, 422);
    assert_eq!(body["error"], "NothingToRedo");
}

#[test]
fn reads_do_not_touch_the_log() {
    let tmp = tempfile::tempdir().unwrap();
    let h = start(tmp.path());
    let sid = create_hotels(&h, "hotels");
    for t in hotels_log().into_iter().take(6) {
        let (status, body) = post(&h, &format!("/sessions/{sid}/transform"), serde_json::to_value(&t).unwrap());
        assert_eq!(status, 200, "{body}");
    }
    let dir = tmp.path().join("hotels");
    let before = (file_bytes(&dir.join(LOG_FILE)), file_bytes(&dir.join("project.json")));
    for path in ["facets", "facets/Location/values", "rows", "rows?offset=2&limit=3", "log", "export", "export?format=turtle", "export?format=csv"] {
        let (status, _) = call(ureq::get(&h.url(&format!("/sessions/{sid}/{path}"))), None);
        assert_eq!(status, 200, "{path}");
    }
    let (status, _) = get(&h, "/projects");
    assert_eq!(status, 200);
    assert_eq!((file_bytes(&dir.join(LOG_FILE)), file_bytes(&dir.join("project.json"))), before);
}

#[test]
fn log_wire_format_matches_disk() {
    let tmp = tempfile::tempdir().unwrap();
    let h = start(tmp.path());
    let sid = create_hotels(&h, "hotels");
    for t in hotels_log() {
        let (status, body) = post(&h, &format!("/sessions/{sid}/transform"), serde_json::to_value(&t).unwrap());
        assert_eq!(status, 200, "{body}");
    }
    let (_, body) = get(&h, &format!("/sessions/{sid}/log"));
    let wire: Vec<Value> = body["log"]
        .as_array()
        .unwrap()
        .iter()
        .map(|e| {
            let mut e = e.clone();
            e.as_object_mut().unwrap().remove("outcome");
            e
        })
        .collect();
    let disk: Vec<Value> = std::fs::read_to_string(tmp.path().join("hotels").join(LOG_FILE))
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(wire, disk);
    assert_eq!(wire.len(), hotels_log().len());

    let (_, export) = call(ureq::get(&h.url(&format!("/sessions/{sid}/export"))), None);
    let snapshot = ProjectSession::snapshot(&tmp.path().join("hotels"), LoadContext::default()).unwrap();
    let expected = export_ntriples(snapshot.dataset(), &ExportOptions::default()).unwrap();
    assert_eq!(export.as_bytes(), expected.as_slice());
}

#[test]
fn undo_redo_over_http() {
    let tmp = tempfile::tempdir().unwrap();
    let h = start(tmp.path());
    let sid = create_hotels(&h, "hotels");
    let t = json!({"type": "SetVisibility", "params": {"facet": "Rooms", "visible": false}});
    post(&h, &format!("/sessions/{sid}/transform"), t);
    let (status, body) = post(&h, &format!("/sessions/{sid}/undo"), json!({}));
    assert_eq!(status, 200);
    assert_eq!(body["undone"]["type"], "SetVisibility");
    let (_, log) = get(&h, &format!("/sessions/{sid}/log"));
    assert!(log["log"].as_array().unwrap().is_empty());
    assert_eq!(log["redo"].as_array().unwrap().len(), 1);
    let (status, body) = post(&h, &format!("/sessions/{sid}/redo"), json!({}));
    assert_eq!(status, 200);
    assert_eq!(body["outcome"]["status"], "Applied");
    let lines = std::fs::read_to_string(tmp.path().join("hotels").join(LOG_FILE)).unwrap();
    assert_eq!(lines.lines().count(), 1);
}

#[test]
fn not_found_and_conflict() {
    let tmp = tempfile::tempdir().unwrap();
    let h = start(tmp.path());
    assert_eq!(get(&h, "/sessions/nope/facets").0, 404);
    assert_eq!(post(&h, "/projects/missing/open", json!({})).0, 404);
    let sid = create_hotels(&h, "hotels");
    assert_eq!(get(&h, &format!("/sessions/{sid}/facets/Nope/values")).0, 404);
    let src = fixture("hotels.csv");
    let (status, body) = post(&h, "/projects", json!({"name": "hotels", "source": {"kind": "single-file", "path": src}}));
    assert_eq!(status, 409, "{body}");
    let (status, body) = post(&h, "/projects/hotels/open", json!({}));
    assert_eq!(status, 200);
    assert_eq!(body["session_id"], sid.as_str());
}

#[test]
fn reopen_after_close_replays_log() {
    let tmp = tempfile::tempdir().unwrap();
    let h = start(tmp.path());
    let sid = create_hotels(&h, "hotels");
    let t = json!({"type": "DeleteRows", "params": {"cond": {"conjuncts": [{"facet": "Location", "op": "eq", "literal": "Rome"}]}}});
    let (status, body) = post(&h, &format!("/sessions/{sid}/transform"), t);
    assert_eq!(status, 200, "{body}");
    let (status, _) = call(ureq::delete(&h.url(&format!("/sessions/{sid}"))), None);
    assert_eq!(status, 200);
    let (status, body) = post(&h, "/projects/hotels/open", json!({}));
    assert_eq!(status, 200);
    assert_eq!(body["log"][0]["outcome"]["status"], "Applied");
    let sid = body["session_id"].as_str().unwrap();
    let (_, rows) = get(&h, &format!("/sessions/{sid}/rows"));
    assert_eq!(rows["total"], 8);
}

#[test]
fn favourites_lifecycle() {
    let tmp = tempfile::tempdir().unwrap();
    let h = start(tmp.path());
    let fav = json!({"label": "cars", "source": {"endpoint_url": "http://example.org/sparql", "query": "SELECT ?s WHERE { ?s ?p ?o }"}});
    let (status, body) = post(&h, "/favourites", fav.clone());
    assert_eq!(status, 201, "{body}");
    assert_eq!(post(&h, "/favourites", fav).0, 409);
    let (_, list) = get(&h, "/favourites");
    assert_eq!(list.as_array().unwrap().len(), 1);
    let (status, _) = call(ureq::delete(&h.url("/favourites?label=cars")), None);
    assert_eq!(status, 200);
    let (status, _) = call(ureq::delete(&h.url("/favourites/cars")), None);
    assert_eq!(status, 404);
    let bad = json!({"label": "x", "source": {"endpoint_url": "ftp://example.org", "query": "SELECT ?s WHERE {}"}});
    assert_eq!(post(&h, "/favourites", bad).0, 422);
}

#[test]
fn previews() {
    let tmp = tempfile::tempdir().unwrap();
    let h = start(tmp.path());
    let chain = json!({"chain": {"levels": [{"kind": "linear", "min": 0.0, "max": 10.0, "width": 5.0}]}});
    let (status, body) = post(&h, "/intervals/preview", chain);
    assert_eq!(status, 200, "{body}");
    assert_eq!(body["levels"][0]["labels"], json!(["[0,5)", "[5,10]"]));

    let (status, body) = post(&h, "/expressions/parse", json!({"expression": "{Price} * 2"}));
    assert_eq!(status, 200, "{body}");
    assert_eq!(body["facet_refs"], json!(["Price"]));
    assert_eq!(post(&h, "/expressions/parse", json!({"expression": "{Price} *"})).0, 422);

    let results = r#"{"head":{"vars":["a"]},"results":{"bindings":[{"a":{"type":"literal","value":"1"}},{}]}}"#;
    let endpoint = MockEndpoint::fixed(MockResponse::results(results)).unwrap();
    let (status, body) = post(&h, "/sparql/preview", json!({"endpoint_url": endpoint.url(), "query": "SELECT ?a WHERE {}"}));
    assert_eq!(status, 200, "{body}");
    assert_eq!(body["header"], json!(["a"]));
    assert_eq!(body["rows"], json!([["1"], [null]]));

    let failing = MockEndpoint::fixed(MockResponse::status(500)).unwrap();
    let (status, _) = post(&h, "/sparql/preview", json!({"endpoint_url": failing.url(), "query": "SELECT ?a WHERE {}"}));
    assert_eq!(status, 502);
}
