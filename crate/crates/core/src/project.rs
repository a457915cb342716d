//! On-disk projects.
//!
//! ```text
//! <root>/<name>/
//!   project.json          name, format_version, source descriptor
//!   transformations.jsonl one log record per line
//!   favourites.json       saved SPARQL sources
//!   .lock                 present while a writer holds the project
//! ```
//!
//! Source data is referenced by path and never copied or modified.

use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{build_dataset, BuildOptions, Dataset, FacetType, ModelError};
use crate::sparql::{execute_select, FavouritesError, FavouritesStore, SparqlError, SparqlSource};
use crate::tabular::{
    assemble_multifile, parse_dimension_file, parse_hierarchy_config, parse_table, Delimiter, TabularError,
};
use crate::transform::{ApplyOutcome, EngineError, LogEntry, Session, Transformation};

pub const FORMAT_VERSION: u32 = 1;
pub const PROJECT_FILE: &str = "project.json";
pub const LOG_FILE: &str = "transformations.jsonl";
pub const FAVOURITES_FILE: &str = "favourites.json";
pub const LOCK_FILE: &str = ".lock";

#[derive(Debug, Error)]
pub enum ProjectError {
    #[error("io error: {0}")]
    Io(String),
    #[error("missing file {0}")]
    MissingFile(String),
    #[error("unsupported project format version {0}")]
    FormatVersionUnsupported(u32),
    #[error("corrupt log line {line}: {detail}")]
    CorruptLogLine { line: usize, detail: String },
    #[error("corrupt project file: {0}")]
    CorruptProjectFile(String),
    #[error("invalid project name {0:?}")]
    InvalidName(String),
    #[error("project {0:?} already exists")]
    AlreadyExists(String),
    #[error("project is locked by another writer ({0})")]
    Locked(String),
    #[error("source kind {expected} cannot be replaced by {found}")]
    KindMismatch { expected: &'static str, found: &'static str },
    #[error("source: {0}")]
    Tabular(#[from] TabularError),
    #[error("source: {0}")]
    Model(#[from] ModelError),
    #[error("source: {0}")]
    Sparql(#[from] SparqlError),
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Favourites(#[from] FavouritesError),
}

impl From<std::io::Error> for ProjectError {
    fn from(e: std::io::Error) -> Self {
        ProjectError::Io(e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum SourceDescriptor {
    SingleFile {
        path: PathBuf,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        delimiter: Option<Delimiter>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        hierarchy_config: Option<PathBuf>,
    },
    MultiFile {
        folder: PathBuf,
        object_id_file: String,
    },
    Sparql {
        endpoint_url: String,
        query: String,
    },
}

impl SourceDescriptor {
    pub fn kind(&self) -> &'static str {
        match self {
            SourceDescriptor::SingleFile { .. } => "single-file",
            SourceDescriptor::MultiFile { .. } => "multi-file",
            SourceDescriptor::Sparql { .. } => "sparql",
        }
    }

    /// Makes relative paths absolute against `base`.
    pub fn anchored(mut self, base: &Path) -> Self {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        match &mut self {
            SourceDescriptor::SingleFile { path, hierarchy_config, .. } => {
                fix(path);
                if let Some(h) = hierarchy_config {
                    fix(h);
                }
            }
            SourceDescriptor::MultiFile { folder, .. } => fix(folder),
            SourceDescriptor::Sparql { .. } => {}
        }
        self
    }
}

#[derive(Debug, Clone, Copy)]
pub struct LoadContext {
    pub sparql_timeout: Duration,
}

impl Default for LoadContext {
    fn default() -> Self {
        Self { sparql_timeout: Duration::from_secs(30) }
    }
}

fn read_file(path: &Path) -> Result<Vec<u8>, ProjectError> {
    fs::read(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => ProjectError::MissingFile(path.display().to_string()),
        _ => ProjectError::Io(format!("{}: {e}", path.display())),
    })
}

/// Loads a source into a dataset, returning load warnings alongside.
pub fn load_source(desc: &SourceDescriptor, ctx: &LoadContext) -> Result<(Dataset, Vec<String>), ProjectError> {
    match desc {
        SourceDescriptor::SingleFile { path, delimiter, hierarchy_config } => {
            let delim = delimiter.unwrap_or_else(|| Delimiter::from_path(path));
            let raw = parse_table(&read_file(path)?, delim)?;
            let config = match hierarchy_config {
                Some(p) => {
                    let bytes = read_file(p)?;
                    let text = String::from_utf8(bytes).map_err(|e| TabularError::InvalidUtf8(e.utf8_error().valid_up_to()))?;
                    parse_hierarchy_config(&text)?
                }
                None => Vec::new(),
            };
            let (d, warnings) = build_dataset(&raw, &config, BuildOptions { split_internal_paths: true })?;
            Ok((d, warnings.iter().map(|w| w.to_string()).collect()))
        }
        SourceDescriptor::MultiFile { folder, object_id_file } => {
            let id_path = folder.join(object_id_file);
            let ids = parse_table(&read_file(&id_path)?, Delimiter::from_path(&id_path))?;
            let mut entries: Vec<PathBuf> = fs::read_dir(folder)
                .map_err(|e| ProjectError::Io(format!("{}: {e}", folder.display())))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.is_file() && p.file_name().is_some_and(|n| n != object_id_file.as_str()))
                .filter(|p| !p.file_name().unwrap().to_string_lossy().starts_with('.'))
                .filter(|p| matches!(p.extension().and_then(|e| e.to_str()), Some("csv" | "tsv" | "tab" | "txt")))
                .collect();
            entries.sort();
            let mut dims = Vec::with_capacity(entries.len());
            for p in &entries {
                let facet = p.file_stem().unwrap().to_string_lossy();
                dims.push(parse_dimension_file(&facet, &read_file(p)?, Delimiter::from_path(p))?);
            }
            let assembly = assemble_multifile(&ids, &dims)?;
            let (d, build_warnings) = build_dataset(&assembly.table, &assembly.hierarchy, BuildOptions::default())?;
            let d = d.set_facet_type(&assembly.table.header[0], FacetType::Identifier)?;
            let mut warnings: Vec<String> = assembly.warnings.iter().map(|w| w.to_string()).collect();
            warnings.extend(build_warnings.iter().map(|w| w.to_string()));
            Ok((d, warnings))
        }
        SourceDescriptor::Sparql { endpoint_url, query } => {
            let src = SparqlSource::new(endpoint_url.clone(), query.clone())?;
            let raw = execute_select(&src, ctx.sparql_timeout)?;
            let (d, _) = build_dataset(&raw, &[], BuildOptions::default())?;
            Ok((d, Vec::new()))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct ProjectFile {
    format_version: u32,
    name: String,
    source: SourceDescriptor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Project {
    pub name: String,
    pub source: SourceDescriptor,
    pub log: Vec<LogEntry>,
    pub favourites: FavouritesStore,
}

impl Project {
    pub fn new(name: impl Into<String>, source: SourceDescriptor) -> Self {
        Self { name: name.into(), source, log: Vec::new(), favourites: FavouritesStore::default() }
    }
}

pub fn validate_name(name: &str) -> Result<(), ProjectError> {
    let bad = name.is_empty()
        || name.starts_with('.')
        || name.len() > 255
        || name.chars().any(|c| matches!(c, '/' | '\\' | ':' | '\0') || c.is_control());
    if bad {
        Err(ProjectError::InvalidName(name.to_string()))
    } else {
        Ok(())
    }
}

static TMP_COUNTER: AtomicU64 = AtomicU64::new(0);

/// Writes `bytes` to a sibling temporary file and renames it into place.
pub fn atomic_write(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    let tmp = dir.join(format!(".{name}.tmp-{}-{}", std::process::id(), TMP_COUNTER.fetch_add(1, Ordering::Relaxed)));
    let result = (|| {
        let mut f = File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    })();
    if result.is_err() {
        let _ = fs::remove_file(&tmp);
    }
    result
}

pub fn log_line(entry: &LogEntry) -> String {
    serde_json::to_string(entry).expect("log entries always serialize")
}

fn log_bytes(log: &[LogEntry]) -> Vec<u8> {
    let mut out = String::new();
    for e in log {
        out.push_str(&log_line(e));
        out.push('\n');
    }
    out.into_bytes()
}

/// Parses a JSON-Lines log. Blank lines are ignored; seq must increase.
pub fn parse_log(text: &str) -> Result<Vec<LogEntry>, ProjectError> {
    let mut out: Vec<LogEntry> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let entry: LogEntry =
            serde_json::from_str(line).map_err(|e| ProjectError::CorruptLogLine { line: i + 1, detail: e.to_string() })?;
        if out.last().is_some_and(|prev| prev.seq >= entry.seq) {
            return Err(ProjectError::CorruptLogLine { line: i + 1, detail: format!("seq {} does not increase", entry.seq) });
        }
        out.push(entry);
    }
    Ok(out)
}

fn write_project_file(dir: &Path, p: &Project) -> Result<(), ProjectError> {
    let file = ProjectFile { format_version: FORMAT_VERSION, name: p.name.clone(), source: p.source.clone() };
    let mut bytes = serde_json::to_vec_pretty(&file).expect("project file serializes");
    bytes.push(b'\n');
    atomic_write(&dir.join(PROJECT_FILE), &bytes)?;
    Ok(())
}

/// Writes the whole project under `root/<name>`, returning the folder.
pub fn save_project(p: &Project, root: &Path) -> Result<PathBuf, ProjectError> {
    validate_name(&p.name)?;
    let dir = root.join(&p.name);
    fs::create_dir_all(&dir)?;
    write_project_file(&dir, p)?;
    atomic_write(&dir.join(LOG_FILE), &log_bytes(&p.log))?;
    p.favourites.save(&dir.join(FAVOURITES_FILE))?;
    Ok(dir)
}

/// Reads a project folder without loading its source.
pub fn open_project(dir: &Path) -> Result<Project, ProjectError> {
    let meta_path = dir.join(PROJECT_FILE);
    if !meta_path.is_file() {
        return Err(ProjectError::MissingFile(PROJECT_FILE.into()));
    }
    let raw: serde_json::Value =
        serde_json::from_slice(&fs::read(&meta_path)?).map_err(|e| ProjectError::CorruptProjectFile(e.to_string()))?;
    let version = raw.get("format_version").and_then(|v| v.as_u64()).unwrap_or(0) as u32;
    if version != FORMAT_VERSION {
        return Err(ProjectError::FormatVersionUnsupported(version));
    }
    let meta: ProjectFile = serde_json::from_value(raw).map_err(|e| ProjectError::CorruptProjectFile(e.to_string()))?;
    let log_path = dir.join(LOG_FILE);
    if !log_path.is_file() {
        return Err(ProjectError::MissingFile(LOG_FILE.into()));
    }
    let text = String::from_utf8(fs::read(&log_path)?)
        .map_err(|e| ProjectError::CorruptLogLine { line: 0, detail: e.to_string() })?;
    let log = parse_log(&text)?;
    let favourites = FavouritesStore::load(&dir.join(FAVOURITES_FILE))?;
    Ok(Project { name: meta.name, source: meta.source, log, favourites })
}

/// Exclusive writer lock on a project folder, released on drop.
#[derive(Debug)]
pub struct ProjectLock {
    path: PathBuf,
}

fn holder_alive(contents: &str) -> bool {
    let Ok(pid) = contents.trim().parse::<u32>() else { return true };
    if cfg!(target_os = "linux") {
        Path::new("/proc").join(pid.to_string()).exists()
    } else {
        true
    }
}

impl ProjectLock {
    pub fn acquire(dir: &Path) -> Result<Self, ProjectError> {
        let path = dir.join(LOCK_FILE);
        for _ in 0..2 {
            match OpenOptions::new().write(true).create_new(true).open(&path) {
                Ok(mut f) => {
                    writeln!(f, "{}", std::process::id())?;
                    return Ok(Self { path });
                }
                Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                    let holder = fs::read_to_string(&path).unwrap_or_default();
                    if holder_alive(&holder) {
                        return Err(ProjectError::Locked(format!("pid {}", holder.trim())));
                    }
                    let _ = fs::remove_file(&path);
                }
                Err(e) => return Err(e.into()),
            }
        }
        Err(ProjectError::Locked(path.display().to_string()))
    }
}

impl Drop for ProjectLock {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.path);
    }
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

/// A project with its source loaded and log replayed. Writable sessions hold
/// the folder lock and persist every mutation immediately.
#[derive(Debug)]
pub struct ProjectSession {
    dir: PathBuf,
    project: Project,
    session: Session,
    warnings: Vec<String>,
    ctx: LoadContext,
    lock: Option<ProjectLock>,
}

impl ProjectSession {
    /// Creates `root/<name>` from a source. The source is loaded first so a
    /// broken source leaves nothing behind.
    pub fn create(root: &Path, name: &str, source: SourceDescriptor, ctx: LoadContext) -> Result<Self, ProjectError> {
        validate_name(name)?;
        let dir = root.join(name);
        if dir.join(PROJECT_FILE).exists() {
            return Err(ProjectError::AlreadyExists(name.to_string()));
        }
        let (dataset, warnings) = load_source(&source, &ctx)?;
        let project = Project::new(name, source);
        save_project(&project, root)?;
        let lock = ProjectLock::acquire(&dir)?;
        Ok(Self { dir, project, session: Session::new(dataset), warnings, ctx, lock: Some(lock) })
    }

    /// Opens for writing, taking the folder lock.
    pub fn open(dir: &Path, ctx: LoadContext) -> Result<Self, ProjectError> {
        let lock = ProjectLock::acquire(dir)?;
        let mut s = Self::snapshot(dir, ctx)?;
        s.lock = Some(lock);
        Ok(s)
    }

    /// Opens without the lock; mutations are refused.
    pub fn snapshot(dir: &Path, ctx: LoadContext) -> Result<Self, ProjectError> {
        let project = open_project(dir)?;
        let (dataset, warnings) = load_source(&project.source, &ctx)?;
        let session = Session::from_log(dataset, project.log.clone());
        Ok(Self { dir: dir.to_path_buf(), project, session, warnings, ctx, lock: None })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn project(&self) -> &Project {
        &self.project
    }

    pub fn session(&self) -> &Session {
        &self.session
    }

    pub fn dataset(&self) -> &Dataset {
        self.session.dataset()
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn is_writable(&self) -> bool {
        self.lock.is_some()
    }

    fn require_lock(&self) -> Result<(), ProjectError> {
        if self.lock.is_none() {
            return Err(ProjectError::Locked("session was opened read-only".into()));
        }
        Ok(())
    }

    fn append(&self, entry: &LogEntry) -> Result<(), ProjectError> {
        let mut f = OpenOptions::new().append(true).create(true).open(self.dir.join(LOG_FILE))?;
        f.write_all(format!("{}\n", log_line(entry)).as_bytes())?;
        f.sync_data()?;
        Ok(())
    }

    fn rewrite_log(&self) -> Result<(), ProjectError> {
        atomic_write(&self.dir.join(LOG_FILE), &log_bytes(&self.project.log))?;
        Ok(())
    }

    /// Applies and appends one transformation. A rejected transformation is
    /// neither applied nor logged.
    pub fn apply(&mut self, t: Transformation) -> Result<LogEntry, ProjectError> {
        self.require_lock()?;
        self.session.apply(t)?;
        self.session.stamp_last(now());
        let entry = self.session.log().last().cloned().expect("entry was just applied");
        self.append(&entry)?;
        self.project.log.push(entry.clone());
        Ok(entry)
    }

    pub fn undo(&mut self) -> Result<LogEntry, ProjectError> {
        self.require_lock()?;
        let entry = self.session.undo()?.clone();
        self.project.log.pop();
        self.rewrite_log()?;
        Ok(entry)
    }

    pub fn redo(&mut self) -> Result<(LogEntry, ApplyOutcome), ProjectError> {
        self.require_lock()?;
        let (entry, outcome) = self.session.redo()?;
        let (entry, outcome) = (entry.clone(), outcome.clone());
        self.append(&entry)?;
        self.project.log.push(entry.clone());
        Ok((entry, outcome))
    }

    /// Reloads the source, optionally from a new descriptor of the same
    /// kind, and replays the full log over it.
    pub fn refresh(&mut self, new_source: Option<SourceDescriptor>) -> Result<Vec<ApplyOutcome>, ProjectError> {
        self.require_lock()?;
        let source = new_source.unwrap_or_else(|| self.project.source.clone());
        if source.kind() != self.project.source.kind() {
            return Err(ProjectError::KindMismatch { expected: self.project.source.kind(), found: source.kind() });
        }
        let (dataset, warnings) = load_source(&source, &self.ctx)?;
        let outcomes = self.session.replace_source(dataset).to_vec();
        self.warnings = warnings;
        if source != self.project.source {
            self.project.source = source;
            write_project_file(&self.dir, &self.project)?;
        }
        Ok(outcomes)
    }

    /// Rewrites every project file from memory.
    pub fn save(&self) -> Result<(), ProjectError> {
        self.require_lock()?;
        let root = self.dir.parent().unwrap_or(Path::new("."));
        save_project(&self.project, root)?;
        Ok(())
    }

    pub fn favourites(&self) -> &FavouritesStore {
        &self.project.favourites
    }

    pub fn update_favourites<T>(
        &mut self,
        f: impl FnOnce(&mut FavouritesStore) -> Result<T, FavouritesError>,
    ) -> Result<T, ProjectError> {
        self.require_lock()?;
        let mut store = self.project.favourites.clone();
        let out = f(&mut store)?;
        store.save(&self.dir.join(FAVOURITES_FILE))?;
        self.project.favourites = store;
        Ok(out)
    }
}
