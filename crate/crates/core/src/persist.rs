//! On-disk format: a canonical NDJSON snapshot (`store.ndjson`) plus an
//! append-only command log (`store.wal`) replayed on top of it.

use std::fs::{self, File, OpenOptions};
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicI64, Ordering};

use chrono::{DateTime, Duration, Utc};
use serde::{de::DeserializeOwned, Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::canonical;
use crate::canvas::{Canvas, CanvasConfig, Command, Outcome, Preferences};
use crate::credibility::{CredibilityReport, CredibilityStore, Source, SourceProfile};
use crate::graph::{Graph, KnowledgeEntry, Relationship};
use crate::pathways::{Pathway, PathwayStore, Session, Share};
use crate::query::{CuratedQuestion, Taxonomy, TaxonomyNode};
use crate::region::{Region, RegionTable};

pub const SCHEMA_VERSION: u32 = 1;
pub const SNAPSHOT_FILE: &str = "store.ndjson";
pub const WAL_FILE: &str = "store.wal";
pub const LOCK_FILE: &str = "store.lock";
pub const DATA_DIR_ENV: &str = "CANVAS_DATA_DIR";

#[derive(Debug, Error)]
pub enum PersistError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("line {line}: unsupported schema version {version}")]
    UnsupportedSchema { line: usize, version: u64 },
    #[error("invariant violation: {0}")]
    InvariantViolation(String),
    #[error("store at {0} is locked by another process")]
    Locked(PathBuf),
    #[error("write-ahead log line {line}: {message}")]
    Replay { line: usize, message: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecordKind {
    Config,
    Entry,
    Pathway,
    Preference,
    Profile,
    Question,
    Region,
    Relationship,
    Report,
    Session,
    Share,
    Source,
    TaxonomyNode,
}

impl RecordKind {
    pub fn as_str(self) -> &'static str {
        match self {
            RecordKind::Config => "config",
            RecordKind::Entry => "entry",
            RecordKind::Pathway => "pathway",
            RecordKind::Preference => "preference",
            RecordKind::Profile => "profile",
            RecordKind::Question => "question",
            RecordKind::Region => "region",
            RecordKind::Relationship => "relationship",
            RecordKind::Report => "report",
            RecordKind::Session => "session",
            RecordKind::Share => "share",
            RecordKind::Source => "source",
            RecordKind::TaxonomyNode => "taxonomy_node",
        }
    }
}

/// One line of a store file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoreRecord {
    pub kind: RecordKind,
    pub body: Value,
    pub schema_version: u32,
}

struct Keyed {
    kind: RecordKind,
    id: String,
    line: String,
}

fn keyed<T: Serialize>(kind: RecordKind, id: String, body: &T) -> Keyed {
    let record = StoreRecord { kind, body: canonical::to_value(body), schema_version: SCHEMA_VERSION };
    Keyed { kind, id, line: canonical::to_string(&record) }
}

/// Canonical serialization: one record per line, sorted by (kind, id),
/// keys sorted, LF endings.
pub fn export_string(canvas: &Canvas) -> String {
    let mut records = vec![keyed(RecordKind::Config, "canvas".into(), canvas.config())];
    records.extend(canvas.regions().iter().map(|r| keyed(RecordKind::Region, r.code.clone(), r)));
    records.extend(canvas.graph().entries().map(|e| keyed(RecordKind::Entry, e.id.to_string(), e)));
    records.extend(
        canvas.graph().relationships().iter().map(|r| keyed(RecordKind::Relationship, r.record_id(), r)),
    );
    let cred = canvas.credibility();
    records.extend(cred.sources().map(|s| keyed(RecordKind::Source, s.id.to_string(), s)));
    records.extend(cred.profiles().map(|p| keyed(RecordKind::Profile, p.source_id.to_string(), p)));
    records.extend(cred.reports().map(|r| keyed(RecordKind::Report, format!("{:012}", r.seq), r)));
    records.extend(canvas.taxonomy().nodes().map(|n| keyed(RecordKind::TaxonomyNode, n.id.to_string(), n)));
    records.extend(canvas.questions().map(|q| keyed(RecordKind::Question, q.id.clone(), q)));
    records.extend(canvas.all_preferences().map(|p| keyed(RecordKind::Preference, p.author.to_string(), p)));
    let pw = canvas.pathways();
    records.extend(pw.sessions().map(|s| keyed(RecordKind::Session, s.id.to_string(), s)));
    records.extend(
        pw.archived().map(|p| keyed(RecordKind::Pathway, format!("{}@{:010}", p.id, p.version), p)),
    );
    records.extend(pw.shares().map(|s| keyed(RecordKind::Share, s.token.clone(), s)));
    records.sort_by(|a, b| (a.kind.as_str(), &a.id).cmp(&(b.kind.as_str(), &b.id)));
    let mut out = String::new();
    for r in records {
        out.push_str(&r.line);
        out.push('\n');
    }
    out
}

pub fn digest(canvas: &Canvas) -> String {
    canonical::sha256_hex(export_string(canvas).as_bytes())
}

#[derive(Default)]
struct Parts {
    config: Option<CanvasConfig>,
    regions: Vec<Region>,
    entries: Vec<KnowledgeEntry>,
    relationships: Vec<Relationship>,
    sources: Vec<Source>,
    profiles: Vec<SourceProfile>,
    reports: Vec<CredibilityReport>,
    taxonomy: Vec<TaxonomyNode>,
    questions: Vec<CuratedQuestion>,
    preferences: Vec<Preferences>,
    sessions: Vec<Session>,
    pathways: Vec<Pathway>,
    shares: Vec<Share>,
}

fn body<T: DeserializeOwned>(line: usize, value: Value) -> Result<T, PersistError> {
    serde_json::from_value(value).map_err(|e| PersistError::Parse { line, message: e.to_string() })
}

fn invariant(e: impl ToString) -> PersistError {
    PersistError::InvariantViolation(e.to_string())
}

/// Parses and validates a snapshot. An empty text is an empty store over
/// the standard region table.
pub fn load_str(text: &str) -> Result<Canvas, PersistError> {
    let mut parts = Parts::default();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let value: Value =
            serde_json::from_str(raw).map_err(|e| PersistError::Parse { line, message: e.to_string() })?;
        let version = value.get("schema_version").and_then(Value::as_u64);
        match version {
            Some(v) if v == u64::from(SCHEMA_VERSION) => {}
            Some(v) => return Err(PersistError::UnsupportedSchema { line, version: v }),
            None => return Err(PersistError::Parse { line, message: "missing schema_version".into() }),
        }
        let record: StoreRecord = body(line, value)?;
        let b = record.body;
        match record.kind {
            RecordKind::Config => {
                if parts.config.replace(body(line, b)?).is_some() {
                    return Err(PersistError::Parse { line, message: "second config record".into() });
                }
            }
            RecordKind::Region => parts.regions.push(body(line, b)?),
            RecordKind::Entry => parts.entries.push(body(line, b)?),
            RecordKind::Relationship => parts.relationships.push(body(line, b)?),
            RecordKind::Source => parts.sources.push(body(line, b)?),
            RecordKind::Profile => parts.profiles.push(body(line, b)?),
            RecordKind::Report => parts.reports.push(body(line, b)?),
            RecordKind::TaxonomyNode => parts.taxonomy.push(body(line, b)?),
            RecordKind::Question => parts.questions.push(body(line, b)?),
            RecordKind::Preference => parts.preferences.push(body(line, b)?),
            RecordKind::Session => parts.sessions.push(body(line, b)?),
            RecordKind::Pathway => parts.pathways.push(body(line, b)?),
            RecordKind::Share => parts.shares.push(body(line, b)?),
        }
    }
    assemble(parts)
}

fn assemble(parts: Parts) -> Result<Canvas, PersistError> {
    let config = parts.config.unwrap_or_default();
    let regions = if parts.regions.is_empty() {
        RegionTable::standard()
    } else {
        let mut table = RegionTable::new();
        for r in parts.regions {
            if table.contains_code(&r.code) {
                return Err(invariant(format!("duplicate region `{}`", r.code)));
            }
            table.insert(r);
        }
        table
    };
    let mut canvas = Canvas::new(config.clone(), RegionTable::new()).map_err(invariant)?;
    canvas.graph = Graph::from_parts(regions, parts.entries, parts.relationships).map_err(invariant)?;
    canvas.credibility =
        CredibilityStore::from_parts(config.credibility, parts.sources, parts.profiles, parts.reports)
            .map_err(invariant)?;
    canvas.taxonomy = Taxonomy::from_nodes(parts.taxonomy).map_err(invariant)?;
    for q in parts.questions {
        let id = q.id.clone();
        if canvas.questions.insert(id.clone(), q).is_some() {
            return Err(invariant(format!("duplicate curated question `{id}`")));
        }
    }
    for p in parts.preferences {
        let author = p.author.clone();
        if canvas.preferences.insert(author.clone(), p).is_some() {
            return Err(invariant(format!("duplicate preferences for `{author}`")));
        }
    }
    canvas.pathways = PathwayStore::from_parts(parts.sessions, parts.pathways, parts.shares).map_err(invariant)?;
    canvas.validate().map_err(invariant)?;
    Ok(canvas)
}

pub fn load_path(path: &Path) -> Result<Canvas, PersistError> {
    load_str(&fs::read_to_string(path)?)
}

/// Writes `contents` to `path` through a temporary file and a rename.
pub fn write_atomic(path: &Path, contents: &[u8]) -> io::Result<()> {
    let tmp = path.with_extension("tmp");
    {
        let mut f = File::create(&tmp)?;
        f.write_all(contents)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)
}

pub fn export_path(canvas: &Canvas, path: &Path) -> io::Result<()> {
    write_atomic(path, export_string(canvas).as_bytes())
}

/// Source of timestamps for mutations.
pub trait Clock: Send + Sync {
    fn now(&self) -> DateTime<Utc>;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now(&self) -> DateTime<Utc> {
        Utc::now()
    }
}

/// Always the same instant.
#[derive(Debug, Clone, Copy)]
pub struct FixedClock(pub DateTime<Utc>);

impl Clock for FixedClock {
    fn now(&self) -> DateTime<Utc> {
        self.0
    }
}

/// Advances by `step` on every reading, starting at `start`.
#[derive(Debug)]
pub struct SteppingClock {
    start: DateTime<Utc>,
    step: Duration,
    ticks: AtomicI64,
}

impl SteppingClock {
    pub fn new(start: DateTime<Utc>, step: Duration) -> Self {
        Self { start, step, ticks: AtomicI64::new(0) }
    }
}

impl Clock for SteppingClock {
    fn now(&self) -> DateTime<Utc> {
        let n = self.ticks.fetch_add(1, Ordering::SeqCst);
        self.start + self.step * n as i32
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct WalHeader {
    wal: u32,
    snapshot: String,
}

/// One logged mutation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WalEntry {
    pub at: DateTime<Utc>,
    pub cmd: Command,
}

#[derive(Debug)]
struct LockGuard(PathBuf);

impl LockGuard {
    fn acquire(dir: &Path) -> Result<Self, PersistError> {
        let path = dir.join(LOCK_FILE);
        for _ in 0..2 {
            match OpenOptions::new().write(true).create_new(true).open(&path) {
                Ok(mut f) => {
                    writeln!(f, "{}", std::process::id())?;
                    return Ok(Self(path));
                }
                Err(e) if e.kind() == io::ErrorKind::AlreadyExists => {
                    if lock_is_stale(&path) {
                        fs::remove_file(&path)?;
                        continue;
                    }
                    return Err(PersistError::Locked(dir.to_owned()));
                }
                Err(e) => return Err(e.into()),
            }
        }
        Err(PersistError::Locked(dir.to_owned()))
    }
}

/// A lock left behind by a process that no longer exists. Only detectable
/// where `/proc` is available; elsewhere locks are never considered stale.
fn lock_is_stale(path: &Path) -> bool {
    let Ok(text) = fs::read_to_string(path) else { return false };
    let Ok(pid) = text.trim().parse::<u32>() else { return false };
    let proc = Path::new("/proc");
    proc.is_dir() && pid != std::process::id() && !proc.join(pid.to_string()).exists()
}

impl Drop for LockGuard {
    fn drop(&mut self) {
        let _ = fs::remove_file(&self.0);
    }
}

/// Replays `wal` text onto `canvas`. A header whose snapshot digest does
/// not match means the log predates the snapshot and is skipped. A final
/// line without its newline is an interrupted append and is ignored.
/// Returns the number of applied entries.
pub fn replay_wal(canvas: &mut Canvas, snapshot_digest: &str, wal: &str) -> Result<usize, PersistError> {
    let complete = match wal.rfind('\n') {
        Some(i) => &wal[..=i],
        None => "",
    };
    let mut lines = complete.lines().enumerate();
    let Some((_, header)) = lines.next() else { return Ok(0) };
    let header: WalHeader = match serde_json::from_str(header) {
        Ok(h) => h,
        Err(e) => return Err(PersistError::Replay { line: 1, message: e.to_string() }),
    };
    if header.wal != SCHEMA_VERSION {
        return Err(PersistError::UnsupportedSchema { line: 1, version: header.wal.into() });
    }
    if header.snapshot != snapshot_digest {
        return Ok(0);
    }
    let mut applied = 0;
    for (i, raw) in lines {
        let line = i + 1;
        let entry: WalEntry =
            serde_json::from_str(raw).map_err(|e| PersistError::Replay { line, message: e.to_string() })?;
        canvas
            .execute(&entry.cmd, entry.at)
            .map_err(|e| PersistError::Replay { line, message: e.to_string() })?;
        applied += 1;
    }
    Ok(applied)
}

fn wal_header(snapshot_digest: &str) -> String {
    let mut s = canonical::to_string(&WalHeader { wal: SCHEMA_VERSION, snapshot: snapshot_digest.to_owned() });
    s.push('\n');
    s
}

/// Did executing `cmd` change anything worth logging?
fn changed(cmd: &Command, outcome: &Outcome) -> bool {
    match (cmd, outcome) {
        (Command::Query { .. }, Outcome::Query(q)) => q.resolution.seeded || q.node.is_some(),
        _ => true,
    }
}

/// A data directory owned by this process.
#[derive(Debug)]
pub struct Store {
    dir: PathBuf,
    canvas: Canvas,
    wal: File,
    logged: usize,
    _lock: LockGuard,
}

impl Store {
    /// Opens (creating if needed) the store in `dir`: loads the snapshot,
    /// replays the log, re-validates everything and truncates any torn
    /// final log line.
    pub fn open(dir: &Path) -> Result<Self, PersistError> {
        fs::create_dir_all(dir)?;
        let lock = LockGuard::acquire(dir)?;
        let snap_path = dir.join(SNAPSHOT_FILE);
        let snapshot = match fs::read_to_string(&snap_path) {
            Ok(s) => s,
            Err(e) if e.kind() == io::ErrorKind::NotFound => String::new(),
            Err(e) => return Err(e.into()),
        };
        let snap_digest = canonical::sha256_hex(snapshot.as_bytes());
        let mut canvas = load_str(&snapshot)?;
        let wal_path = dir.join(WAL_FILE);
        let wal_text = match fs::read_to_string(&wal_path) {
            Ok(s) => s,
            Err(e) if e.kind() == io::ErrorKind::NotFound => String::new(),
            Err(e) => return Err(e.into()),
        };
        let logged = replay_wal(&mut canvas, &snap_digest, &wal_text)?;
        if logged > 0 {
            canvas.validate().map_err(invariant)?;
        }
        // Rewrite the log so it holds exactly the header plus the applied entries.
        let keep: String = if logged > 0 {
            wal_text.split_inclusive('\n').take(logged + 1).collect()
        } else {
            wal_header(&snap_digest)
        };
        if keep != wal_text {
            write_atomic(&wal_path, keep.as_bytes())?;
        }
        let wal = OpenOptions::new().append(true).open(&wal_path)?;
        Ok(Self { dir: dir.to_owned(), canvas, wal, logged, _lock: lock })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn canvas(&self) -> &Canvas {
        &self.canvas
    }

    /// Entries appended since the last compaction.
    pub fn logged(&self) -> usize {
        self.logged
    }

    pub fn digest(&self) -> String {
        digest(&self.canvas)
    }

    /// Applies a command in memory and makes it durable in the log. If the
    /// log write fails the in-memory state is rebuilt from disk.
    pub fn apply(&mut self, cmd: &Command, at: DateTime<Utc>) -> Result<Outcome, crate::Error> {
        let outcome = self.canvas.execute(cmd, at)?;
        if changed(cmd, &outcome) {
            let mut line = canonical::to_string(&WalEntry { at, cmd: cmd.clone() });
            line.push('\n');
            let written = self.wal.write_all(line.as_bytes()).and_then(|_| self.wal.sync_data());
            if let Err(e) = written {
                self.reload()?;
                return Err(PersistError::Io(e).into());
            }
            self.logged += 1;
        }
        Ok(outcome)
    }

    fn reload(&mut self) -> Result<(), PersistError> {
        let snapshot = fs::read_to_string(self.dir.join(SNAPSHOT_FILE)).unwrap_or_default();
        let mut canvas = load_str(&snapshot)?;
        let wal = fs::read_to_string(self.dir.join(WAL_FILE)).unwrap_or_default();
        self.logged = replay_wal(&mut canvas, &canonical::sha256_hex(snapshot.as_bytes()), &wal)?;
        self.canvas = canvas;
        Ok(())
    }

    /// Rewrites the canonical snapshot and resets the log.
    pub fn compact(&mut self) -> Result<(), PersistError> {
        let text = export_string(&self.canvas);
        write_atomic(&self.dir.join(SNAPSHOT_FILE), text.as_bytes())?;
        let wal_path = self.dir.join(WAL_FILE);
        write_atomic(&wal_path, wal_header(&canonical::sha256_hex(text.as_bytes())).as_bytes())?;
        self.wal = OpenOptions::new().append(true).open(&wal_path)?;
        self.logged = 0;
        Ok(())
    }

    /// Replaces the whole model (after validation) and compacts.
    pub fn replace(&mut self, canvas: Canvas) -> Result<(), PersistError> {
        canvas.validate().map_err(invariant)?;
        self.canvas = canvas;
        self.compact()
    }
}
