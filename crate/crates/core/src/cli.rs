//! Batch command-line driver.
//!
//! Exit codes: 0 success, 1 validation or apply failure, 2 usage error.
//! Per-record reports are `seq<TAB>status<TAB>detail`.

use std::ffi::OsString;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Parser, Subcommand, ValueEnum};

use crate::project::{atomic_write, LoadContext, ProjectSession, SourceDescriptor};
use crate::service::{export_bytes, ServiceConfig};
use crate::tabular::Delimiter;
use crate::transform::{ApplyOutcome, Transformation};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "facetprep", version, about = "Prepare faceted datasets through a replayable transformation log")]
pub struct Cli {
    /// Seconds to wait for SPARQL endpoints.
    #[arg(long, global = true, env = "FACETPREP_SPARQL_TIMEOUT", default_value_t = 30)]
    pub sparql_timeout: u64,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Kind {
    Single,
    Multi,
    Sparql,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Ntriples,
    Turtle,
    Csv,
    Tsv,
}

impl Format {
    fn name(self) -> &'static str {
        match self {
            Format::Ntriples => "ntriples",
            Format::Turtle => "turtle",
            Format::Csv => "csv",
            Format::Tsv => "tsv",
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Create a project folder from a source.
    New {
        #[arg(long, value_enum)]
        kind: Kind,
        /// File path, folder, or `ENDPOINT+QUERYFILE`.
        #[arg(long)]
        source: String,
        #[arg(long)]
        name: String,
        #[arg(long)]
        root: PathBuf,
        /// Object-id file name inside the folder (multi).
        #[arg(long)]
        object_ids: Option<String>,
        /// Hierarchy configuration file (single).
        #[arg(long)]
        hierarchy_config: Option<PathBuf>,
        /// Overrides the extension-based delimiter (single).
        #[arg(long, value_enum)]
        delimiter: Option<DelimiterArg>,
        /// Query file, when not given as part of --source (sparql).
        #[arg(long)]
        query_file: Option<PathBuf>,
    },
    /// Append and apply each record of a JSON-Lines log.
    Apply {
        #[arg(long)]
        project: PathBuf,
        #[arg(long)]
        log: PathBuf,
    },
    /// Reload the source and replay the log.
    Refresh {
        #[arg(long)]
        project: PathBuf,
        #[arg(long)]
        source: Option<String>,
    },
    Export {
        #[arg(long)]
        project: PathBuf,
        #[arg(long, value_enum)]
        format: Format,
        #[arg(long)]
        out: PathBuf,
        /// Base namespace for RDF formats.
        #[arg(long)]
        base: Option<String>,
    },
    /// Report dataset invariant violations.
    Validate {
        #[arg(long)]
        project: PathBuf,
    },
    /// Run the HTTP service.
    Serve {
        #[arg(long, env = "FACETPREP_LISTEN", default_value = "127.0.0.1:8080")]
        listen: SocketAddr,
        #[arg(long, env = "FACETPREP_ROOT")]
        root: PathBuf,
        /// Seconds of inactivity before a session is closed.
        #[arg(long, env = "FACETPREP_IDLE_TIMEOUT", default_value_t = 1800)]
        idle_timeout: u64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DelimiterArg {
    Comma,
    Tab,
}

struct Failure {
    code: i32,
    message: String,
}

impl Failure {
    fn usage(message: impl Into<String>) -> Self {
        Self { code: EXIT_USAGE, message: message.into() }
    }
    fn failed(message: impl std::fmt::Display) -> Self {
        Self { code: EXIT_FAILURE, message: message.to_string() }
    }
}

fn absolute(p: &Path) -> PathBuf {
    std::path::absolute(p).unwrap_or_else(|_| p.to_path_buf())
}

/// Splits `ENDPOINT+QUERYFILE` at the last `+`.
fn split_sparql(source: &str) -> Option<(&str, &str)> {
    source.rsplit_once('+').filter(|(a, b)| !a.is_empty() && !b.is_empty())
}

fn sparql_descriptor(source: &str, query_file: Option<&Path>) -> Result<SourceDescriptor, Failure> {
    let (endpoint, file) = match (query_file, split_sparql(source)) {
        (Some(q), _) => (source.to_string(), q.to_path_buf()),
        (None, Some((e, q))) => (e.to_string(), PathBuf::from(q)),
        (None, None) => return Err(Failure::usage("sparql sources need ENDPOINT+QUERYFILE or --query-file")),
    };
    let query = std::fs::read_to_string(&file).map_err(|e| Failure::failed(format!("{}: {e}", file.display())))?;
    Ok(SourceDescriptor::Sparql { endpoint_url: endpoint, query })
}

fn descriptor_like(current: &SourceDescriptor, source: &str) -> Result<SourceDescriptor, Failure> {
    Ok(match current {
        SourceDescriptor::SingleFile { delimiter, hierarchy_config, .. } => SourceDescriptor::SingleFile {
            path: absolute(Path::new(source)),
            delimiter: *delimiter,
            hierarchy_config: hierarchy_config.clone(),
        },
        SourceDescriptor::MultiFile { object_id_file, .. } => {
            SourceDescriptor::MultiFile { folder: absolute(Path::new(source)), object_id_file: object_id_file.clone() }
        }
        SourceDescriptor::Sparql { query, .. } => match split_sparql(source) {
            Some(_) => sparql_descriptor(source, None)?,
            None => SourceDescriptor::Sparql { endpoint_url: source.to_string(), query: query.clone() },
        },
    })
}

/// Accepts a full log record or a bare `{type, params}` transformation.
pub fn parse_record(line: &str) -> Result<Transformation, String> {
    let mut v: serde_json::Value = serde_json::from_str(line).map_err(|e| e.to_string())?;
    if let Some(map) = v.as_object_mut() {
        map.remove("seq");
        map.remove("recorded_at");
    }
    serde_json::from_value(v).map_err(|e| e.to_string())
}

fn report(out: &mut dyn Write, seq: impl std::fmt::Display, outcome: &ApplyOutcome, detail: &str) {
    let detail = match outcome {
        ApplyOutcome::Applied => detail.to_string(),
        ApplyOutcome::SkippedWithWarning { reason } => reason.clone(),
    };
    let _ = writeln!(out, "{seq}\t{outcome}\t{detail}");
}

fn run_command(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, Failure> {
    let ctx = LoadContext { sparql_timeout: Duration::from_secs(cli.sparql_timeout) };
    match cli.command {
        Command::New { kind, source, name, root, object_ids, hierarchy_config, delimiter, query_file } => {
            let desc = match kind {
                Kind::Single => SourceDescriptor::SingleFile {
                    path: absolute(Path::new(&source)),
                    delimiter: delimiter.map(|d| match d {
                        DelimiterArg::Comma => Delimiter::Comma,
                        DelimiterArg::Tab => Delimiter::Tab,
                    }),
                    hierarchy_config: hierarchy_config.as_deref().map(absolute),
                },
                Kind::Multi => SourceDescriptor::MultiFile {
                    folder: absolute(Path::new(&source)),
                    object_id_file: object_ids.ok_or_else(|| Failure::usage("multi-file projects need --object-ids"))?,
                },
                Kind::Sparql => sparql_descriptor(&source, query_file.as_deref())?,
            };
            let ps = ProjectSession::create(&root, &name, desc, ctx).map_err(Failure::failed)?;
            for w in ps.warnings() {
                let _ = writeln!(err, "warning: {w}");
            }
            let d = ps.dataset();
            let _ = writeln!(out, "{}\t{} rows\t{} facets", ps.dir().display(), d.rows.len(), d.facets.len());
            Ok(EXIT_OK)
        }
        Command::Apply { project, log } => {
            let text = std::fs::read_to_string(&log).map_err(|e| Failure::failed(format!("{}: {e}", log.display())))?;
            let mut records = Vec::new();
            for (i, line) in text.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                match parse_record(line) {
                    Ok(t) => records.push(t),
                    Err(e) => return Err(Failure::failed(format!("line {}: {e}", i + 1))),
                }
            }
            let mut ps = ProjectSession::open(&project, ctx).map_err(Failure::failed)?;
            for t in records {
                let kind = t.kind();
                let seq = ps.session().next_seq();
                match ps.apply(t) {
                    Ok(entry) => report(out, entry.seq, &ApplyOutcome::Applied, kind),
                    Err(e) => {
                        let _ = writeln!(out, "{seq}\tRejected\t{e}");
                        return Ok(EXIT_FAILURE);
                    }
                }
            }
            Ok(EXIT_OK)
        }
        Command::Refresh { project, source } => {
            let mut ps = ProjectSession::open(&project, ctx).map_err(Failure::failed)?;
            let new_source = source.map(|s| descriptor_like(&ps.project().source, &s)).transpose()?;
            let outcomes = ps.refresh(new_source).map_err(Failure::failed)?;
            for w in ps.warnings() {
                let _ = writeln!(err, "warning: {w}");
            }
            for (entry, outcome) in ps.session().log().iter().zip(&outcomes) {
                report(out, entry.seq, outcome, entry.transformation.kind());
            }
            Ok(EXIT_OK)
        }
        Command::Export { project, format, out: path, base } => {
            let ps = ProjectSession::snapshot(&project, ctx).map_err(Failure::failed)?;
            let (bytes, _) = export_bytes(ps.dataset(), format.name(), base.as_deref()).map_err(Failure::failed)?;
            atomic_write(&path, &bytes).map_err(|e| Failure::failed(format!("{}: {e}", path.display())))?;
            Ok(EXIT_OK)
        }
        Command::Validate { project } => {
            let ps = ProjectSession::snapshot(&project, ctx).map_err(Failure::failed)?;
            let violations = ps.dataset().validate();
            for (entry, outcome) in ps.session().log().iter().zip(ps.session().outcomes()) {
                if !outcome.is_applied() {
                    report(err, entry.seq, outcome, "");
                }
            }
            for v in &violations {
                let _ = writeln!(out, "{v}");
            }
            if violations.is_empty() {
                let _ = writeln!(out, "ok");
                Ok(EXIT_OK)
            } else {
                Ok(EXIT_FAILURE)
            }
        }
        Command::Serve { listen, root, idle_timeout } => {
            let config = ServiceConfig {
                listen,
                root,
                sparql_timeout: Duration::from_secs(cli.sparql_timeout),
                idle_timeout: Duration::from_secs(idle_timeout),
            };
            let rt = tokio::runtime::Runtime::new().map_err(Failure::failed)?;
            rt.block_on(async move {
                let listener = tokio::net::TcpListener::bind(config.listen).await?;
                let _ = writeln!(err, "listening on {}", listener.local_addr()?);
                crate::service::serve(listener, config, async {
                    let _ = tokio::signal::ctrl_c().await;
                })
                .await
            })
            .map_err(Failure::failed)?;
            Ok(EXIT_OK)
        }
    }
}

/// Runs the CLI over `args` (including the program name) and returns the
/// exit code.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            if e.use_stderr() {
                let _ = write!(err, "{e}");
                return EXIT_USAGE;
            }
            let _ = write!(out, "{e}");
            return EXIT_OK;
        }
    };
    match run_command(cli, out, err) {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "error: {}", f.message);
            f.code
        }
    }
}
