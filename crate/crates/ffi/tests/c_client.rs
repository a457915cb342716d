use std::path::{Path, PathBuf};
use std::process::Command;

const PROGRAM: &str = r#"
#include <stdio.h>
#include <string.h>
#include "facetprep.h"

int main(void) {
    FpSession *s = NULL;
    if (fp_session_from_text("Name,Rooms\nA,10\nB,20\n", 0, &s) != FP_OK) return 10;
    if (fp_session_apply(s, "{\"type\":\"SetVisibility\",\"params\":{\"facet\":\"Rooms\",\"visible\":false}}", NULL) != FP_OK) return 11;
    if (fp_session_apply(s, "{\"type\":\"DeleteFacet\",\"params\":{\"facet\":\"Nope\"}}", NULL) != FP_REJECTED) return 12;
    if (fp_last_error() == NULL) return 13;
    char *nt = NULL;
    if (fp_session_export(s, "ntriples", &nt) != FP_OK) return 14;
    if (strstr(nt, "Rooms") != NULL) return 15;
    size_t rows = 0;
    fp_session_row_count(s, &rows);
    printf("%zu\n", rows);
    fp_string_free(nt);
    fp_session_free(s);
    return 0;
}
"#;

fn header_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("include")
}

fn have_cc() -> bool {
    Command::new("cc").arg("--version").output().is_ok_and(|o| o.status.success())
}

#[test]
fn header_compiles_as_c_and_cpp() {
    if !have_cc() {
        eprintln!("cc not found; skipping");
        return;
    }
    let tmp = tempfile::tempdir().unwrap();
    let src = tmp.path().join("client.c");
    std::fs::write(&src, PROGRAM).unwrap();
    let status = Command::new("cc").args(["-std=c99", "-Wall", "-Werror", "-fsyntax-only", "-I"]).arg(header_dir()).arg(&src).status().unwrap();
    assert!(status.success());
    let cpp = tmp.path().join("client.cpp");
    std::fs::write(&cpp, PROGRAM).unwrap();
    if Command::new("c++").arg("--version").output().is_ok_and(|o| o.status.success()) {
        let status = Command::new("c++").args(["-fsyntax-only", "-I"]).arg(header_dir()).arg(&cpp).status().unwrap();
        assert!(status.success());
    }
}

#[test]
fn static_library_links_and_runs() {
    let target = Path::new(env!("CARGO_TARGET_TMPDIR")).parent().unwrap().to_path_buf();
    let lib = ["debug", "debug/deps", "release", "release/deps"].iter().map(|p| target.join(p).join("libfacetprep_ffi.a")).find(|p| p.is_file());
    if !have_cc() {
        eprintln!("cc not found; skipping");
        return;
    }
    let lib = lib.expect("libfacetprep_ffi.a not built");
    let tmp = tempfile::tempdir().unwrap();
    let src = tmp.path().join("client.c");
    let exe = tmp.path().join("client");
    std::fs::write(&src, PROGRAM).unwrap();
    let status = Command::new("cc")
        .arg("-I")
        .arg(header_dir())
        .arg(&src)
        .arg(&lib)
        .args(["-lpthread", "-ldl", "-lm", "-o"])
        .arg(&exe)
        .status()
        .unwrap();
    assert!(status.success());
    let out = Command::new(&exe).output().unwrap();
    assert!(out.status.success(), "exit {:?}", out.status.code());
    assert_eq!(String::from_utf8_lossy(&out.stdout).trim(), "2");
}
