//! Operations shared by the HTTP handlers and the CLI. Every mutation is a
//! [`Command`] applied through the store, so both front ends leave identical
//! logs and digests behind.

use std::sync::Arc;

use canvas_core::canvas::{EntryView, Preferences, QueryOutcome, TimelineDensity, ZoomResult};
use canvas_core::credibility::{
    ContentRef, CredibilityReport, EvidenceAssessment, NarrativeAnalysis, NewReport, ProfileCoordinates, Source,
    SourceProfile,
};
use canvas_core::graph::{Dimension, EntryUpdate, KnowledgeEntry, NewEntry};
use canvas_core::pathways::{
    Interaction, InteractionNode, NodeId, Pathway, Recipient, Relation, Session, Share, Suggestion, VersionRef,
};
use canvas_core::persist::{self, Clock, Store, SCHEMA_VERSION};
use canvas_core::query::CuratedQuestion;
use canvas_core::region::Region;
use canvas_core::report::{self, PathwayReport};
use canvas_core::{
    AuthorId, Canvas, Command, DimensionalConstraint, EntryId, Error, Interval, Outcome, ReportId, SessionId, SourceId,
};
use chrono::{DateTime, NaiveDate, Utc};
use serde::{Deserialize, Serialize};

use crate::error::ApiError;

pub const API_VERSION: &str = "1";

/// Who is asking. The local operator (CLI) reads everything.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Viewer {
    Operator,
    Author(AuthorId),
    Anonymous,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Meta {
    pub api_version: String,
    pub schema_version: u32,
    pub dimensions: Vec<Dimension>,
    pub timeline_densities: Vec<TimelineDensity>,
    pub regions: Vec<Region>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceView {
    pub source: Source,
    pub profile: SourceProfile,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Touched {
    pub touched: Vec<EntryId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathwaySummary {
    pub pathway: VersionRef,
    pub author: AuthorId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent_version: Option<VersionRef>,
    pub query: String,
    pub nodes: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub archived_at: Option<DateTime<Utc>>,
}

impl From<&Pathway> for PathwaySummary {
    fn from(p: &Pathway) -> Self {
        let query = match p.root().map(|n| &n.interaction) {
            Some(Interaction::Query { text, .. }) => text.clone(),
            _ => String::new(),
        };
        Self {
            pathway: p.version_ref(),
            author: p.author.clone(),
            parent_version: p.parent_version.clone(),
            query,
            nodes: p.nodes.len(),
            archived_at: p.archived_at,
        }
    }
}

/// Report submission; the source comes from the URL or CLI argument.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportInput {
    pub content: ContentRef,
    pub evidence: EvidenceAssessment,
    pub narrative: NarrativeAnalysis,
}

/// Parses a zoom window: `START..END` dates (END may be `ongoing`) or the
/// year shorthand `2015..2018`, with the end year excluded.
pub fn parse_window(s: &str) -> Result<Interval, ApiError> {
    if let Ok(i) = s.parse::<Interval>() {
        return Ok(i);
    }
    let bad = || ApiError::BadRequest(format!("bad window `{s}`: expected START..END"));
    let (a, b) = s.split_once("..").ok_or_else(bad)?;
    let year = |t: &str| t.trim().parse::<i32>().ok().and_then(|y| NaiveDate::from_ymd_opt(y, 1, 1));
    let start = year(a).ok_or_else(bad)?;
    if b.trim().eq_ignore_ascii_case("ongoing") {
        return Ok(Interval::ongoing_from(start));
    }
    let end = year(b).ok_or_else(bad)?;
    Interval::new(start, canvas_core::End::Date(end)).map_err(|e| ApiError::Core(e.into()))
}

pub struct Service {
    store: Store,
    clock: Arc<dyn Clock>,
    compact_every: usize,
}

impl Service {
    pub fn new(store: Store, clock: Arc<dyn Clock>, compact_every: usize) -> Self {
        Self { store, clock, compact_every: compact_every.max(1) }
    }

    pub fn store(&self) -> &Store {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut Store {
        &mut self.store
    }

    pub fn canvas(&self) -> &Canvas {
        self.store.canvas()
    }

    pub fn digest(&self) -> String {
        self.store.digest()
    }

    /// Applies one command at the clock's current time, compacting when the
    /// log has grown past the configured size.
    pub fn apply(&mut self, cmd: Command) -> Result<Outcome, ApiError> {
        let at = self.clock.now();
        let outcome = self.store.apply(&cmd, at)?;
        tracing::debug!(op = ?std::mem::discriminant(&cmd), "applied");
        if self.store.logged() >= self.compact_every {
            if let Err(e) = self.store.compact() {
                tracing::warn!(error = %e, "compaction failed; the log keeps growing");
            }
        }
        Ok(outcome)
    }

    pub fn compact(&mut self) -> Result<(), ApiError> {
        Ok(self.store.compact()?)
    }

    // Reads.

    pub fn meta(&self) -> Meta {
        Meta {
            api_version: API_VERSION.into(),
            schema_version: SCHEMA_VERSION,
            dimensions: vec![Dimension::Logical, Dimension::Temporal, Dimension::Geographical],
            timeline_densities: vec![TimelineDensity::Compact, TimelineDensity::Comfortable],
            regions: self.canvas().regions().iter().cloned().collect(),
        }
    }

    pub fn entry_view(&self, id: &EntryId, session: Option<&SessionId>) -> Result<EntryView, ApiError> {
        Ok(self.canvas().entry_view(id, session)?)
    }

    pub fn zoom(
        &self,
        id: &EntryId,
        dimension: Dimension,
        window: Option<&Interval>,
        session: Option<&SessionId>,
    ) -> Result<ZoomResult, ApiError> {
        Ok(self.canvas().zoom(id, dimension, window, session)?)
    }

    pub fn sources(&self) -> Vec<SourceView> {
        let c = self.canvas().credibility();
        c.sources()
            .map(|s| SourceView { source: s.clone(), profile: c.profile(&s.id).expect("every source has a profile").clone() })
            .collect()
    }

    pub fn source(&self, id: &SourceId) -> Result<SourceView, ApiError> {
        let c = self.canvas().credibility();
        Ok(SourceView { source: c.source(id).map_err(Error::from)?.clone(), profile: c.profile(id).map_err(Error::from)?.clone() })
    }

    pub fn reports(&self, id: &SourceId) -> Result<Vec<CredibilityReport>, ApiError> {
        let c = self.canvas().credibility();
        c.source(id).map_err(Error::from)?;
        let mut out: Vec<_> = c.reports_for_source(id).cloned().collect();
        out.sort_by_key(|r| r.seq);
        Ok(out)
    }

    pub fn session(&self, id: &SessionId) -> Result<&Session, ApiError> {
        Ok(self.canvas().pathways().session(id).map_err(Error::from)?)
    }

    /// Fails unless `viewer` may act on the session.
    pub fn owned_session(&self, id: &SessionId, viewer: &Viewer) -> Result<&Session, ApiError> {
        let s = self.session(id)?;
        match viewer {
            Viewer::Operator => Ok(s),
            Viewer::Author(a) if *a == s.author => Ok(s),
            Viewer::Author(a) => Err(ApiError::Forbidden(format!("session `{id}` belongs to another author than `{a}`"))),
            Viewer::Anonymous => Err(ApiError::Unauthorized),
        }
    }

    fn can_read(&self, p: &Pathway, viewer: &Viewer) -> bool {
        let store = self.canvas().pathways();
        match viewer {
            Viewer::Operator => true,
            Viewer::Author(a) => store.can_read(p, a),
            Viewer::Anonymous => {
                let r = p.version_ref();
                store.shares().any(|s| s.pathway == r && s.recipient == Recipient::Public)
            }
        }
    }

    /// Archived versions visible to `viewer`, optionally by one author.
    pub fn pathways(&self, viewer: &Viewer, author: Option<&AuthorId>) -> Vec<PathwaySummary> {
        self.canvas()
            .pathways()
            .archived()
            .filter(|p| author.is_none_or(|a| p.author == *a))
            .filter(|p| self.can_read(p, viewer))
            .map(PathwaySummary::from)
            .collect()
    }

    pub fn pathway(&self, r: &VersionRef, viewer: &Viewer) -> Result<&Pathway, ApiError> {
        let p = self.canvas().pathways().pathway(r).map_err(Error::from)?;
        if !self.can_read(p, viewer) {
            return Err(match viewer {
                Viewer::Anonymous => ApiError::Unauthorized,
                _ => ApiError::Forbidden(format!("pathway {r} is not shared with you")),
            });
        }
        Ok(p)
    }

    pub fn report(&self, r: &VersionRef, viewer: &Viewer) -> Result<PathwayReport, ApiError> {
        self.pathway(r, viewer)?;
        Ok(report::export_pathway_report(self.canvas(), r)?)
    }

    pub fn suggest(&self, signature: &str) -> Vec<Suggestion> {
        self.canvas().suggest(signature)
    }

    pub fn preferences(&self, author: &AuthorId) -> Preferences {
        self.canvas().preferences(author).cloned().unwrap_or(Preferences {
            author: author.clone(),
            default_dimension: None,
            timeline_density: None,
        })
    }

    pub fn questions(&self) -> Vec<CuratedQuestion> {
        self.canvas().questions().cloned().collect()
    }

    pub fn export(&self) -> String {
        persist::export_string(self.canvas())
    }

    fn node(&self, session: &SessionId, id: NodeId) -> Result<InteractionNode, ApiError> {
        let p = self.canvas().pathways().session_pathway(session).map_err(Error::from)?;
        Ok(p.node(id).expect("node was just recorded").clone())
    }

    fn entry(&self, id: &EntryId) -> Result<KnowledgeEntry, ApiError> {
        Ok(self.canvas().graph().entry(id).map_err(Error::from)?.clone())
    }

    // Mutations.

    pub fn query(&mut self, text: &str, session: Option<&SessionId>) -> Result<QueryOutcome, ApiError> {
        let cmd = Command::Query { text: text.to_owned(), session: session.cloned() };
        match self.apply(cmd)? {
            Outcome::Query(q) => Ok(*q),
            other => unreachable!("query produced {other:?}"),
        }
    }

    pub fn create_entry(&mut self, entry: NewEntry) -> Result<KnowledgeEntry, ApiError> {
        match self.apply(Command::CreateEntry { entry })? {
            Outcome::Entry { id } => self.entry(&id),
            other => unreachable!("create produced {other:?}"),
        }
    }

    pub fn add_containment(&mut self, parent: &EntryId, child: &EntryId) -> Result<EntryView, ApiError> {
        self.apply(Command::AddContainment { parent: parent.clone(), child: child.clone() })?;
        self.entry_view(parent, None)
    }

    pub fn add_reference(&mut self, a: &EntryId, b: &EntryId) -> Result<EntryView, ApiError> {
        self.apply(Command::AddCrossReference { a: a.clone(), b: b.clone() })?;
        self.entry_view(a, None)
    }

    pub fn derive(&mut self, base: &EntryId, constraint: DimensionalConstraint) -> Result<KnowledgeEntry, ApiError> {
        match self.apply(Command::Derive { base: base.clone(), constraint })? {
            Outcome::Entry { id } => self.entry(&id),
            other => unreachable!("derive produced {other:?}"),
        }
    }

    pub fn update_entry(&mut self, id: &EntryId, update: EntryUpdate) -> Result<Touched, ApiError> {
        match self.apply(Command::UpdateEntry { id: id.clone(), update })? {
            Outcome::Updated { touched } => Ok(Touched { touched: touched.into_iter().collect() }),
            other => unreachable!("update produced {other:?}"),
        }
    }

    pub fn add_source(&mut self, source: Source, initial: Option<ProfileCoordinates>) -> Result<SourceView, ApiError> {
        match self.apply(Command::AddSource { source, initial })? {
            Outcome::Source { id } => self.source(&id),
            other => unreachable!("add source produced {other:?}"),
        }
    }

    pub fn submit_report(&mut self, source: &SourceId, input: ReportInput) -> Result<CredibilityReport, ApiError> {
        let report = NewReport {
            source_id: source.clone(),
            content: input.content,
            evidence: input.evidence,
            narrative: input.narrative,
        };
        match self.apply(Command::SubmitReport { report })? {
            Outcome::Report { id } => Ok(self.report_by_id(&id)),
            other => unreachable!("report produced {other:?}"),
        }
    }

    fn report_by_id(&self, id: &ReportId) -> CredibilityReport {
        self.canvas().credibility().report(id).expect("report was just stored").clone()
    }

    pub fn start_session(&mut self, author: &AuthorId) -> Result<Session, ApiError> {
        self.session_outcome(Command::StartSession { author: author.clone() })
    }

    fn session_outcome(&mut self, cmd: Command) -> Result<Session, ApiError> {
        match self.apply(cmd)? {
            Outcome::Session { id } => Ok(self.session(&id)?.clone()),
            other => unreachable!("expected a session, got {other:?}"),
        }
    }

    pub fn record(
        &mut self,
        session: &SessionId,
        interaction: Interaction,
        relation: Option<Relation>,
    ) -> Result<InteractionNode, ApiError> {
        match self.apply(Command::Record { session: session.clone(), interaction, relation })? {
            Outcome::Node { id } => self.node(session, id),
            other => unreachable!("record produced {other:?}"),
        }
    }

    pub fn exclude(&mut self, session: &SessionId, source: &SourceId, note: &str) -> Result<InteractionNode, ApiError> {
        let cmd = Command::ExcludeSource { session: session.clone(), source_id: source.clone(), note: note.to_owned() };
        match self.apply(cmd)? {
            Outcome::Node { id } => self.node(session, id),
            other => unreachable!("exclude produced {other:?}"),
        }
    }

    pub fn archive(&mut self, session: &SessionId) -> Result<Pathway, ApiError> {
        match self.apply(Command::Archive { session: session.clone() })? {
            Outcome::Pathway(p) => Ok(*p),
            other => unreachable!("archive produced {other:?}"),
        }
    }

    pub fn branch(&mut self, r: &VersionRef, node: NodeId, author: &AuthorId) -> Result<Session, ApiError> {
        self.session_outcome(Command::Branch { pathway: r.clone(), node, author: author.clone() })
    }

    pub fn resume(&mut self, r: &VersionRef, author: &AuthorId) -> Result<Session, ApiError> {
        self.session_outcome(Command::Resume { pathway: r.clone(), author: author.clone() })
    }

    pub fn share(&mut self, r: &VersionRef, recipient: Recipient, by: &AuthorId) -> Result<Share, ApiError> {
        match self.apply(Command::Share { pathway: r.clone(), recipient, by: by.clone() })? {
            Outcome::Share(s) => Ok(s),
            other => unreachable!("share produced {other:?}"),
        }
    }

    pub fn set_preferences(&mut self, preferences: Preferences) -> Result<Preferences, ApiError> {
        let author = preferences.author.clone();
        self.apply(Command::SetPreferences { preferences })?;
        Ok(self.preferences(&author))
    }

    /// Replaces the whole model with `canvas` after validating it.
    pub fn import(&mut self, canvas: Canvas) -> Result<(), ApiError> {
        Ok(self.store.replace(canvas)?)
    }
}
