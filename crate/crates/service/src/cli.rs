//! Command-line front end. Each subcommand opens the data directory, runs
//! one [`Service`] operation and prints the same document the HTTP API
//! would return.

use std::io::Read as _;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use canvas_core::canvas::{Preferences, TimelineDensity};
use canvas_core::credibility::{ContentRef, EvidenceAssessment, NarrativeAnalysis, ProfileCoordinates, Source, SourceKind};
use canvas_core::graph::{Dimension, EntryUpdate, NewEntry};
use canvas_core::pathways::{Interaction, NodeId, Recipient, Relation, VersionRef};
use canvas_core::persist::{self, Clock, FixedClock, Store, SystemClock};
use canvas_core::report::render_markdown;
use canvas_core::{AuthorId, Canvas, Command, DimensionalConstraint, EntryId, SessionId, SourceId};
use chrono::{DateTime, Utc};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::Serialize;
use serde_json::Value;

use crate::api::{router, AppState};
use crate::config::{ServiceConfig, CONFIG_FILE};
use crate::error::ApiError;
use crate::service::{parse_window, ReportInput, Service, Viewer};

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Json,
    Table,
}

#[derive(Debug, Parser)]
#[command(name = "canvas", version, about = "Knowledge canvas store, API server and tools")]
pub struct Cli {
    /// Data directory holding store.ndjson and store.wal.
    #[arg(long, env = persist::DATA_DIR_ENV, default_value = "canvas-data", global = true)]
    pub data_dir: PathBuf,
    #[arg(long, value_enum, default_value_t = Format::Json, global = true)]
    pub format: Format,
    /// Stamp mutations with this RFC 3339 instant instead of the system clock.
    #[arg(long, global = true)]
    pub at: Option<DateTime<Utc>>,
    #[command(subcommand)]
    pub command: Cmd,
}

#[derive(Debug, Subcommand)]
pub enum Cmd {
    /// Run the HTTP API.
    Serve {
        /// Listen address; overrides the config file.
        #[arg(long)]
        bind: Option<String>,
        /// Config file; defaults to canvas.toml in the data directory.
        #[arg(long)]
        config: Option<PathBuf>,
    },
    /// Load the bundled seed corpus into an empty data directory.
    Init {
        /// Replace existing contents.
        #[arg(long)]
        force: bool,
    },
    /// Replace the store with a canonical store file ("-" reads stdin).
    Import { file: PathBuf },
    /// Write the canonical store to a file, or stdout.
    Export { file: Option<PathBuf> },
    /// Rewrite the snapshot and reset the log.
    Compact,
    /// Re-check every invariant of the stored data.
    Validate,
    /// Print the store digest.
    Digest,
    /// Resolve a free-text query, seeding an entry if nothing matches.
    Query {
        text: String,
        #[arg(long)]
        session: Option<String>,
    },
    /// Zoom into an entry along one dimension.
    Zoom {
        entry: String,
        dimension: Dimension,
        /// START..END dates or years, END may be `ongoing`.
        #[arg(long)]
        window: Option<String>,
        #[arg(long)]
        session: Option<String>,
    },
    /// Derive a constrained entry.
    Derive {
        entry: String,
        #[arg(long = "region")]
        regions: Vec<String>,
        #[arg(long)]
        window: Option<String>,
        #[arg(long = "facet")]
        facets: Vec<String>,
    },
    #[command(subcommand)]
    Entry(EntryCmd),
    #[command(subcommand)]
    Source(SourceCmd),
    #[command(subcommand)]
    Session(SessionCmd),
    #[command(subcommand)]
    Pathway(PathwayCmd),
    /// Most frequent next interactions after the given signature.
    Suggest { signature: String },
    #[command(subcommand)]
    Preferences(PreferencesCmd),
    /// List curated questions.
    Questions,
    /// Apply one raw command document.
    Apply { command: String },
}

/// A JSON document given inline or as a file ("-" reads stdin).
#[derive(Debug, Args)]
pub struct JsonInput {
    #[arg(long, conflicts_with = "file")]
    json: Option<String>,
    #[arg(long)]
    file: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum EntryCmd {
    Show {
        id: String,
        #[arg(long)]
        session: Option<String>,
    },
    /// Create an entry from a NewEntry document.
    Create(JsonInput),
    /// Apply an EntryUpdate document.
    Update {
        id: String,
        #[command(flatten)]
        input: JsonInput,
    },
    AddChild { parent: String, child: String },
    Reference { a: String, b: String },
}

#[derive(Debug, Subcommand)]
pub enum SourceCmd {
    List,
    Show { id: String },
    Add {
        id: String,
        #[arg(long)]
        name: String,
        #[arg(long, value_parser = parse_enum::<SourceKind>)]
        kind: SourceKind,
        #[arg(long = "affiliation")]
        affiliations: Vec<String>,
        /// Five comma-separated starting profile coordinates.
        #[arg(long, value_parser = parse_five)]
        initial: Option<[f64; 5]>,
    },
    /// Submit a credibility report about one block.
    Report {
        source: String,
        #[arg(long)]
        entry: String,
        #[arg(long)]
        block: String,
        /// consensus,verification,cross_reference,correction_hygiene,methodology_transparency
        #[arg(long, value_parser = parse_five)]
        evidence: [f64; 5],
        /// fact_balance,objectivity,emotional_neutrality,contextual_completeness,framing_neutrality
        #[arg(long, value_parser = parse_five)]
        narrative: [f64; 5],
    },
    Reports { source: String },
}

#[derive(Debug, Subcommand)]
pub enum SessionCmd {
    Start {
        #[arg(long)]
        author: String,
    },
    Show { id: String },
    /// Record an Interaction document.
    Record {
        id: String,
        #[command(flatten)]
        input: JsonInput,
        #[arg(long, value_parser = parse_enum::<Relation>)]
        relation: Option<Relation>,
    },
    Exclude {
        id: String,
        source: String,
        #[arg(long)]
        note: String,
    },
    Archive { id: String },
}

#[derive(Debug, Subcommand)]
pub enum PathwayCmd {
    List {
        #[arg(long)]
        author: Option<String>,
    },
    Show { pathway: VersionRef },
    Branch {
        pathway: VersionRef,
        node: u64,
        #[arg(long)]
        author: String,
    },
    Resume {
        pathway: VersionRef,
        #[arg(long)]
        author: String,
    },
    Share {
        pathway: VersionRef,
        #[arg(long)]
        author: String,
        #[arg(long, conflicts_with = "public", required_unless_present = "public")]
        to: Option<String>,
        #[arg(long)]
        public: bool,
    },
    Report {
        pathway: VersionRef,
        #[arg(long)]
        markdown: bool,
    },
}

#[derive(Debug, Subcommand)]
pub enum PreferencesCmd {
    Show {
        #[arg(long)]
        author: String,
    },
    Set {
        #[arg(long)]
        author: String,
        #[arg(long)]
        dimension: Option<Dimension>,
        #[arg(long, value_parser = parse_enum::<TimelineDensity>)]
        density: Option<TimelineDensity>,
    },
}

fn parse_enum<T: DeserializeOwned>(s: &str) -> Result<T, String> {
    serde_json::from_value(Value::String(s.to_owned())).map_err(|e| e.to_string())
}

fn parse_five(s: &str) -> Result<[f64; 5], String> {
    let parts: Vec<f64> = s
        .split(',')
        .map(|p| p.trim().parse::<f64>().map_err(|e| format!("`{p}`: {e}")))
        .collect::<Result<_, _>>()?;
    parts.try_into().map_err(|v: Vec<f64>| format!("expected 5 values, got {}", v.len()))
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Api(#[from] ApiError),
    #[error("{0}")]
    Usage(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Config(#[from] crate::config::ConfigError),
}

impl From<canvas_core::persist::PersistError> for CliError {
    fn from(e: canvas_core::persist::PersistError) -> Self {
        CliError::Api(e.into())
    }
}

impl CliError {
    fn exit_code(&self) -> i32 {
        match self {
            CliError::Api(e) => e.exit_code(),
            _ => 1,
        }
    }

    fn code(&self) -> &'static str {
        match self {
            CliError::Api(e) => e.code(),
            CliError::Usage(_) => "Usage",
            CliError::Io(_) => "IoError",
            CliError::Config(_) => "InvalidConfig",
        }
    }
}

fn read_input<T: DeserializeOwned>(input: &JsonInput) -> Result<T, CliError> {
    let text = match (&input.json, &input.file) {
        (Some(j), _) => j.clone(),
        (None, Some(f)) => read_file(f)?,
        (None, None) => return Err(CliError::Usage("provide --json or --file".into())),
    };
    serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("bad input document: {e}")))
}

fn read_file(path: &Path) -> Result<String, CliError> {
    if path.as_os_str() == "-" {
        let mut s = String::new();
        std::io::stdin().read_to_string(&mut s)?;
        Ok(s)
    } else {
        Ok(std::fs::read_to_string(path)?)
    }
}

/// Parses arguments and runs; returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error [{}]: {e}", e.code());
            e.exit_code()
        }
    }
}

fn open(cli: &Cli) -> Result<Service, CliError> {
    let store = Store::open(&cli.data_dir)?;
    let clock: Arc<dyn Clock> = match cli.at {
        Some(at) => Arc::new(FixedClock(at)),
        None => Arc::new(SystemClock),
    };
    let config = ServiceConfig::load(&cli.data_dir.join(CONFIG_FILE))?;
    Ok(Service::new(store, clock, config.server.compact_every))
}

fn print<T: Serialize>(format: Format, value: &T) -> Result<(), CliError> {
    let value = serde_json::to_value(value).expect("outputs serialize");
    match format {
        Format::Json => println!("{}", serde_json::to_string_pretty(&value).expect("values serialize")),
        Format::Table => print!("{}", render_table(&value)),
    }
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Cmd::Serve { bind, config } = &cli.command {
        return serve(&cli, bind.clone(), config.clone());
    }
    let mut svc = open(&cli)?;
    let f = cli.format;
    match cli.command {
        Cmd::Serve { .. } => unreachable!("handled above"),
        Cmd::Init { force } => {
            let empty = persist::export_string(svc.canvas()) == persist::export_string(&Canvas::default());
            if !empty && !force {
                return Err(CliError::Usage("data directory is not empty; pass --force to replace it".into()));
            }
            svc.import(canvas_core::corpus::load_seed()?)?;
            print(f, &serde_json::json!({ "digest": svc.digest() }))
        }
        Cmd::Import { file } => {
            let canvas = persist::load_str(&read_file(&file)?)?;
            svc.import(canvas)?;
            print(f, &serde_json::json!({ "digest": svc.digest() }))
        }
        Cmd::Export { file } => {
            let text = svc.export();
            match file {
                Some(path) => persist::write_atomic(&path, text.as_bytes())?,
                None => print!("{text}"),
            }
            Ok(())
        }
        Cmd::Compact => {
            svc.compact()?;
            print(f, &serde_json::json!({ "digest": svc.digest() }))
        }
        Cmd::Validate => {
            svc.canvas().validate().map_err(|e| ApiError::Core(canvas_core::persist::PersistError::InvariantViolation(e).into()))?;
            print(f, &serde_json::json!({ "valid": true, "digest": svc.digest() }))
        }
        Cmd::Digest => print(f, &serde_json::json!({ "digest": svc.digest() })),
        Cmd::Query { text, session } => {
            let out = svc.query(&text, session.map(SessionId::new).as_ref())?;
            print(f, &out)
        }
        Cmd::Zoom { entry, dimension, window, session } => {
            let window = window.as_deref().map(parse_window).transpose()?;
            let out = svc.zoom(&EntryId::new(entry), dimension, window.as_ref(), session.map(SessionId::new).as_ref())?;
            print(f, &out)
        }
        Cmd::Derive { entry, regions, window, facets } => {
            let mut c = DimensionalConstraint { temporal: None, regions: None, facets: None };
            if !regions.is_empty() {
                c = c.and_regions(regions);
            }
            if let Some(w) = window {
                c = c.and_temporal(parse_window(&w)?);
            }
            if !facets.is_empty() {
                c.facets = Some(facets.into_iter().collect());
            }
            print(f, &svc.derive(&EntryId::new(entry), c)?)
        }
        Cmd::Entry(cmd) => match cmd {
            EntryCmd::Show { id, session } => {
                print(f, &svc.entry_view(&EntryId::new(id), session.map(SessionId::new).as_ref())?)
            }
            EntryCmd::Create(input) => {
                let entry: NewEntry = read_input(&input)?;
                print(f, &svc.create_entry(entry)?)
            }
            EntryCmd::Update { id, input } => {
                let update: EntryUpdate = read_input(&input)?;
                print(f, &svc.update_entry(&EntryId::new(id), update)?)
            }
            EntryCmd::AddChild { parent, child } => {
                print(f, &svc.add_containment(&EntryId::new(parent), &EntryId::new(child))?)
            }
            EntryCmd::Reference { a, b } => print(f, &svc.add_reference(&EntryId::new(a), &EntryId::new(b))?),
        },
        Cmd::Source(cmd) => match cmd {
            SourceCmd::List => print(f, &svc.sources()),
            SourceCmd::Show { id } => print(f, &svc.source(&SourceId::new(id))?),
            SourceCmd::Add { id, name, kind, affiliations, initial } => {
                let source = Source { affiliations, ..Source::new(&id, &name, kind) };
                print(f, &svc.add_source(source, initial.map(ProfileCoordinates::from_array))?)
            }
            SourceCmd::Report { source, entry, block, evidence, narrative } => {
                let input = ReportInput {
                    content: ContentRef::new(&entry, &block),
                    evidence: EvidenceAssessment::from_array(evidence),
                    narrative: NarrativeAnalysis::from_array(narrative),
                };
                print(f, &svc.submit_report(&SourceId::new(source), input)?)
            }
            SourceCmd::Reports { source } => print(f, &svc.reports(&SourceId::new(source))?),
        },
        Cmd::Session(cmd) => match cmd {
            SessionCmd::Start { author } => print(f, &svc.start_session(&AuthorId::new(author))?),
            SessionCmd::Show { id } => print(f, svc.session(&SessionId::new(id))?),
            SessionCmd::Record { id, input, relation } => {
                let interaction: Interaction = read_input(&input)?;
                print(f, &svc.record(&SessionId::new(id), interaction, relation)?)
            }
            SessionCmd::Exclude { id, source, note } => {
                print(f, &svc.exclude(&SessionId::new(id), &SourceId::new(source), &note)?)
            }
            SessionCmd::Archive { id } => print(f, &svc.archive(&SessionId::new(id))?),
        },
        Cmd::Pathway(cmd) => match cmd {
            PathwayCmd::List { author } => {
                print(f, &svc.pathways(&Viewer::Operator, author.map(AuthorId::new).as_ref()))
            }
            PathwayCmd::Show { pathway } => print(f, svc.pathway(&pathway, &Viewer::Operator)?),
            PathwayCmd::Branch { pathway, node, author } => {
                print(f, &svc.branch(&pathway, NodeId(node), &AuthorId::new(author))?)
            }
            PathwayCmd::Resume { pathway, author } => print(f, &svc.resume(&pathway, &AuthorId::new(author))?),
            PathwayCmd::Share { pathway, author, to, public } => {
                let recipient = match (to, public) {
                    (_, true) => Recipient::Public,
                    (Some(a), false) => Recipient::Author(AuthorId::new(a)),
                    (None, false) => return Err(CliError::Usage("give --to AUTHOR or --public".into())),
                };
                print(f, &svc.share(&pathway, recipient, &AuthorId::new(author))?)
            }
            PathwayCmd::Report { pathway, markdown } => {
                let report = svc.report(&pathway, &Viewer::Operator)?;
                if markdown {
                    print!("{}", render_markdown(&report));
                    Ok(())
                } else {
                    print(f, &report)
                }
            }
        },
        Cmd::Suggest { signature } => print(f, &svc.suggest(&signature)),
        Cmd::Preferences(cmd) => match cmd {
            PreferencesCmd::Show { author } => print(f, &svc.preferences(&AuthorId::new(author))),
            PreferencesCmd::Set { author, dimension, density } => {
                let prefs = Preferences { author: AuthorId::new(author), default_dimension: dimension, timeline_density: density };
                print(f, &svc.set_preferences(prefs)?)
            }
        },
        Cmd::Questions => print(f, &svc.questions()),
        Cmd::Apply { command } => {
            let cmd: Command =
                serde_json::from_str(&command).map_err(|e| CliError::Usage(format!("bad command document: {e}")))?;
            print(f, &svc.apply(cmd)?)
        }
    }
}

fn serve(cli: &Cli, bind: Option<String>, config: Option<PathBuf>) -> Result<(), CliError> {
    let config_path = config.unwrap_or_else(|| cli.data_dir.join(CONFIG_FILE));
    let config = ServiceConfig::load(&config_path)?;
    let tokens = config.tokens()?;
    if tokens.is_empty() {
        tracing::warn!("no authors configured; every mutation will be rejected");
    }
    let svc = open(cli)?;
    let bind = bind.unwrap_or(config.server.bind);
    let runtime = tokio::runtime::Runtime::new()?;
    runtime.block_on(async move {
        let state = AppState::new(svc, tokens);
        let listener = tokio::net::TcpListener::bind(&bind).await?;
        tracing::info!(addr = %listener.local_addr()?, data_dir = %cli.data_dir.display(), "listening");
        axum::serve(listener, router(state.clone()))
            .with_graceful_shutdown(async {
                let _ = tokio::signal::ctrl_c().await;
                tracing::info!("shutting down");
            })
            .await?;
        state.service.write().await.compact()?;
        Ok(())
    })
}

fn cell(v: &Value) -> String {
    match v {
        Value::String(s) => s.clone(),
        Value::Null => String::new(),
        Value::Array(items) if items.iter().all(|i| !i.is_object() && !i.is_array()) => {
            items.iter().map(cell).collect::<Vec<_>>().join(", ")
        }
        other => other.to_string(),
    }
}

fn grid(rows: Vec<Vec<String>>) -> String {
    let widths: Vec<usize> = (0..rows[0].len())
        .map(|c| rows.iter().map(|r| r[c].chars().count()).max().unwrap_or(0))
        .collect();
    let mut out = String::new();
    for row in rows {
        let line: Vec<String> = row.iter().zip(&widths).map(|(s, w)| format!("{s:<w$}")).collect();
        out.push_str(line.join("  ").trim_end());
        out.push('\n');
    }
    out
}

/// Plain-text table for a JSON document: one row per element for arrays
/// of objects, key/value rows for objects.
pub fn render_table(v: &Value) -> String {
    match v {
        Value::Array(items) if !items.is_empty() && items.iter().all(Value::is_object) => {
            let mut columns: Vec<String> = Vec::new();
            for item in items {
                for k in item.as_object().expect("checked").keys() {
                    if !columns.contains(k) {
                        columns.push(k.clone());
                    }
                }
            }
            let mut rows = vec![columns.iter().map(|c| c.to_uppercase()).collect::<Vec<_>>()];
            for item in items {
                rows.push(columns.iter().map(|c| item.get(c).map(cell).unwrap_or_default()).collect());
            }
            grid(rows)
        }
        Value::Array(items) if items.is_empty() => "(none)\n".into(),
        Value::Object(map) => grid(map.iter().map(|(k, v)| vec![k.clone(), cell(v)]).collect()),
        other => format!("{}\n", cell(other)),
    }
}
