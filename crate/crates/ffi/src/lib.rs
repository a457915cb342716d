//! C ABI over the facetprep engine.
//!
//! Sessions are opaque `FpSession` handles. Every function returns an
//! `FpStatus`; on failure `fp_last_error` describes the problem. Strings
//! handed out by the library must be released with `fp_string_free`.
//! Transformations, outcomes and facet summaries travel as JSON text.

use std::cell::RefCell;
use std::ffi::{c_char, c_int, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::ptr;

use facetprep::model::{build_dataset, BuildOptions};
use facetprep::project::{LoadContext, ProjectError, ProjectSession};
use facetprep::service::{export_bytes, facet_summaries};
use facetprep::tabular::{parse_table, Delimiter};
use facetprep::transform::{ApplyOutcome, EngineError, LogEntry, Session, Transformation};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FpStatus {
    FpOk = 0,
    FpNullArgument = 1,
    FpInvalidUtf8 = 2,
    FpInvalidJson = 3,
    FpRejected = 4,
    FpNothingToUndo = 5,
    FpNothingToRedo = 6,
    FpSourceError = 7,
    FpLocked = 8,
    FpIoError = 9,
    FpExportError = 10,
    FpPanic = 11,
}

#[allow(clippy::large_enum_variant)]
enum Backing {
    Memory(Session),
    Project(ProjectSession),
}

/// An editing session, either in memory or bound to a project folder.
pub struct FpSession {
    backing: Backing,
}

impl FpSession {
    fn session(&self) -> &Session {
        match &self.backing {
            Backing::Memory(s) => s,
            Backing::Project(p) => p.session(),
        }
    }
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = msg.into().replace('\0', " ");
    LAST_ERROR.with(|e| *e.borrow_mut() = CString::new(msg).ok());
}

struct Fail(FpStatus, String);

impl From<EngineError> for Fail {
    fn from(e: EngineError) -> Self {
        let status = match e {
            EngineError::NothingToUndo => FpStatus::FpNothingToUndo,
            EngineError::NothingToRedo => FpStatus::FpNothingToRedo,
            _ => FpStatus::FpRejected,
        };
        Fail(status, e.to_string())
    }
}

impl From<ProjectError> for Fail {
    fn from(e: ProjectError) -> Self {
        match e {
            ProjectError::Engine(e) => e.into(),
            ProjectError::Locked(_) => Fail(FpStatus::FpLocked, e.to_string()),
            ProjectError::Io(_) => Fail(FpStatus::FpIoError, e.to_string()),
            other => Fail(FpStatus::FpSourceError, other.to_string()),
        }
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> FpStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            FpStatus::FpOk
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            FpStatus::FpPanic
        }
    }
}

unsafe fn text<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail(FpStatus::FpNullArgument, format!("{what} is null")));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Fail(FpStatus::FpInvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn handle<'a>(s: *const FpSession) -> Result<&'a FpSession, Fail> {
    s.as_ref().ok_or_else(|| Fail(FpStatus::FpNullArgument, "session is null".into()))
}

unsafe fn handle_mut<'a>(s: *mut FpSession) -> Result<&'a mut FpSession, Fail> {
    s.as_mut().ok_or_else(|| Fail(FpStatus::FpNullArgument, "session is null".into()))
}

unsafe fn put_string(out: *mut *mut c_char, s: String) -> Result<(), Fail> {
    if out.is_null() {
        return Ok(());
    }
    let c = CString::new(s).map_err(|_| Fail(FpStatus::FpExportError, "output contains NUL".into()))?;
    *out = c.into_raw();
    Ok(())
}

unsafe fn put_session(out: *mut *mut FpSession, backing: Backing) -> Result<(), Fail> {
    if out.is_null() {
        return Err(Fail(FpStatus::FpNullArgument, "out is null".into()));
    }
    *out = Box::into_raw(Box::new(FpSession { backing }));
    Ok(())
}

fn entry_json(entry: &LogEntry, outcome: &ApplyOutcome) -> String {
    let mut v = serde_json::to_value(entry).expect("log entries serialize");
    v["outcome"] = serde_json::to_value(outcome).expect("outcomes serialize");
    v.to_string()
}

/// Message for the last failed call on this thread, or NULL. The pointer
/// stays valid until the next library call on the same thread.
#[no_mangle]
pub extern "C" fn fp_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |c| c.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn fp_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

/// # Safety
/// `s` must be NULL or a string returned by this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn fp_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Creates an in-memory session from CSV (`tab == 0`) or TSV text.
///
/// # Safety
/// `text_in` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fp_session_from_text(text_in: *const c_char, tab: c_int, out: *mut *mut FpSession) -> FpStatus {
    guard(|| {
        let src = text(text_in, "text")?;
        let delim = if tab != 0 { Delimiter::Tab } else { Delimiter::Comma };
        let raw = parse_table(src.as_bytes(), delim).map_err(|e| Fail(FpStatus::FpSourceError, e.to_string()))?;
        let (d, _) = build_dataset(&raw, &[], BuildOptions { split_internal_paths: true })
            .map_err(|e| Fail(FpStatus::FpSourceError, e.to_string()))?;
        put_session(out, Backing::Memory(Session::new(d)))
    })
}

/// Opens a project folder for writing; mutations are persisted.
///
/// # Safety
/// `dir` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn fp_session_open(dir: *const c_char, out: *mut *mut FpSession) -> FpStatus {
    guard(|| {
        let dir = text(dir, "dir")?;
        let ps = ProjectSession::open(Path::new(dir), LoadContext::default())?;
        put_session(out, Backing::Project(ps))
    })
}

/// # Safety
/// `s` must be NULL or a handle from this library, freed once.
#[no_mangle]
pub unsafe extern "C" fn fp_session_free(s: *mut FpSession) {
    if !s.is_null() {
        let _ = catch_unwind(AssertUnwindSafe(|| drop(Box::from_raw(s))));
    }
}

/// Applies one transformation given as `{"type":..,"params":..}` JSON. On
/// success `outcome_out` (if not NULL) receives the logged record.
///
/// # Safety
/// `s` must be a live handle; `json` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn fp_session_apply(s: *mut FpSession, json: *const c_char, outcome_out: *mut *mut c_char) -> FpStatus {
    guard(|| {
        let s = handle_mut(s)?;
        let t: Transformation =
            serde_json::from_str(text(json, "json")?).map_err(|e| Fail(FpStatus::FpInvalidJson, e.to_string()))?;
        let entry = match &mut s.backing {
            Backing::Memory(m) => m.apply(t)?.clone(),
            Backing::Project(p) => p.apply(t)?,
        };
        put_string(outcome_out, entry_json(&entry, &ApplyOutcome::Applied))
    })
}

/// # Safety
/// `s` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn fp_session_undo(s: *mut FpSession) -> FpStatus {
    guard(|| {
        match &mut handle_mut(s)?.backing {
            Backing::Memory(m) => {
                m.undo()?;
            }
            Backing::Project(p) => {
                p.undo()?;
            }
        }
        Ok(())
    })
}

/// # Safety
/// `s` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn fp_session_redo(s: *mut FpSession) -> FpStatus {
    guard(|| {
        match &mut handle_mut(s)?.backing {
            Backing::Memory(m) => {
                m.redo()?;
            }
            Backing::Project(p) => {
                p.redo()?;
            }
        }
        Ok(())
    })
}

/// # Safety
/// `s` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fp_session_row_count(s: *const FpSession, out: *mut usize) -> FpStatus {
    guard(|| {
        let s = handle(s)?;
        if out.is_null() {
            return Err(Fail(FpStatus::FpNullArgument, "out is null".into()));
        }
        *out = s.session().dataset().rows.len();
        Ok(())
    })
}

/// Facet summaries in display order as a JSON array.
///
/// # Safety
/// `s` must be a live handle; `out` writable.
#[no_mangle]
pub unsafe extern "C" fn fp_session_facets_json(s: *const FpSession, out: *mut *mut c_char) -> FpStatus {
    guard(|| {
        let s = handle(s)?;
        put_string(out, facet_summaries(s.session().dataset()).to_string())
    })
}

/// Exports the current dataset as `ntriples`, `turtle`, `csv` or `tsv`.
///
/// # Safety
/// `s` must be a live handle; `format` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn fp_session_export(s: *const FpSession, format: *const c_char, out: *mut *mut c_char) -> FpStatus {
    guard(|| {
        let s = handle(s)?;
        let format = text(format, "format")?;
        let (bytes, _) = export_bytes(s.session().dataset(), format, None).map_err(|e| Fail(FpStatus::FpExportError, e))?;
        let text = String::from_utf8(bytes).map_err(|e| Fail(FpStatus::FpExportError, e.to_string()))?;
        put_string(out, text)
    })
}
