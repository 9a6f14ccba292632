//! The combined model: graph, credibility, taxonomy and pathways behind one
//! command interface. Every mutation is a [`Command`] so the same values
//! drive the HTTP API, the CLI and the write-ahead log.

use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::credibility::{
    Badge, ContentRef, CredibilityConfig, CredibilityError, CredibilityStore, NewReport, ProfileCoordinates,
    Source,
};
use crate::graph::{
    Dimension, EntryUpdate, Graph, KnowledgeEntry, LogicalItem, MilestoneItem,
    NewEntry, RegionalMap,
};
use crate::ids::{AuthorId, EntryId, ReportId, SessionId, SourceId};
use crate::interval::Interval;
use crate::par::Execution;
use crate::pathways::{
    Interaction, NodeId, Pathway, PathwayError, PathwayStore, Recipient, Relation, Share, Suggestion, VersionRef,
};
use crate::query::{self, CuratedQuestion, ParsedQuery, QueryConfig, Resolution, Taxonomy, TaxonomyNode};
use crate::region::RegionTable;
use crate::scope::DimensionalConstraint;
use crate::Error;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CanvasConfig {
    #[serde(default)]
    pub credibility: CredibilityConfig,
    #[serde(default)]
    pub query: QueryConfig,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TimelineDensity {
    Compact,
    Comfortable,
}

/// Per-author display settings kept for the explorer.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Preferences {
    pub author: AuthorId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default_dimension: Option<Dimension>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timeline_density: Option<TimelineDensity>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum Command {
    CreateEntry {
        entry: NewEntry,
    },
    AddContainment {
        parent: EntryId,
        child: EntryId,
    },
    AddCrossReference {
        a: EntryId,
        b: EntryId,
    },
    Derive {
        base: EntryId,
        constraint: DimensionalConstraint,
    },
    UpdateEntry {
        id: EntryId,
        update: EntryUpdate,
    },
    AddSource {
        source: Source,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        initial: Option<ProfileCoordinates>,
    },
    SubmitReport {
        report: NewReport,
    },
    AddTaxonomyNode {
        node: TaxonomyNode,
    },
    AddQuestion {
        question: CuratedQuestion,
    },
    SetPreferences {
        preferences: Preferences,
    },
    Query {
        text: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        session: Option<SessionId>,
    },
    StartSession {
        author: AuthorId,
    },
    Record {
        session: SessionId,
        interaction: Interaction,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        relation: Option<Relation>,
    },
    ExcludeSource {
        session: SessionId,
        source_id: SourceId,
        note: String,
    },
    Archive {
        session: SessionId,
    },
    Branch {
        pathway: VersionRef,
        node: NodeId,
        author: AuthorId,
    },
    Resume {
        pathway: VersionRef,
        author: AuthorId,
    },
    Share {
        pathway: VersionRef,
        recipient: Recipient,
        by: AuthorId,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryOutcome {
    pub parsed: ParsedQuery,
    pub resolution: Resolution,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub curated: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub node: Option<NodeId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "result", rename_all = "snake_case")]
pub enum Outcome {
    Entry { id: EntryId },
    Updated { touched: BTreeSet<EntryId> },
    Source { id: SourceId },
    Report { id: ReportId },
    Query(Box<QueryOutcome>),
    Session { id: SessionId },
    Node { id: NodeId },
    Pathway(Box<Pathway>),
    Share(Share),
    Done,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "dimension", rename_all = "snake_case")]
pub enum ZoomResult {
    Logical { items: Vec<LogicalItem> },
    Temporal { items: Vec<MilestoneItem> },
    Geographical { regions: RegionalMap },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EntryView {
    pub entry: KnowledgeEntry,
    pub parents: Vec<EntryId>,
    pub children: Vec<EntryId>,
    pub references: Vec<EntryId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub derived_from: Option<EntryId>,
    pub derived: Vec<EntryId>,
    /// Badge per block id, for blocks that have a report from a citing source.
    pub badges: BTreeMap<String, Badge>,
}

#[derive(Debug, Clone)]
pub struct Canvas {
    pub(crate) config: CanvasConfig,
    pub(crate) graph: Graph,
    pub(crate) credibility: CredibilityStore,
    pub(crate) taxonomy: Taxonomy,
    pub(crate) questions: BTreeMap<String, CuratedQuestion>,
    pub(crate) preferences: BTreeMap<AuthorId, Preferences>,
    pub(crate) pathways: PathwayStore,
}

impl Default for Canvas {
    fn default() -> Self {
        Self::new(CanvasConfig::default(), RegionTable::standard()).expect("default config is valid")
    }
}

impl Canvas {
    pub fn new(config: CanvasConfig, regions: RegionTable) -> Result<Self, Error> {
        Ok(Self {
            credibility: CredibilityStore::new(config.credibility.clone())?,
            config,
            graph: Graph::new(regions),
            taxonomy: Taxonomy::new(),
            questions: BTreeMap::new(),
            preferences: BTreeMap::new(),
            pathways: PathwayStore::new(),
        })
    }

    pub fn config(&self) -> &CanvasConfig {
        &self.config
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn regions(&self) -> &RegionTable {
        self.graph.regions()
    }

    pub fn credibility(&self) -> &CredibilityStore {
        &self.credibility
    }

    pub fn taxonomy(&self) -> &Taxonomy {
        &self.taxonomy
    }

    pub fn questions(&self) -> impl Iterator<Item = &CuratedQuestion> {
        self.questions.values()
    }

    pub fn preferences(&self, author: &AuthorId) -> Option<&Preferences> {
        self.preferences.get(author)
    }

    pub fn all_preferences(&self) -> impl Iterator<Item = &Preferences> {
        self.preferences.values()
    }

    pub fn pathways(&self) -> &PathwayStore {
        &self.pathways
    }

    pub fn execute(&mut self, cmd: &Command, at: DateTime<Utc>) -> Result<Outcome, Error> {
        Ok(match cmd {
            Command::CreateEntry { entry } => Outcome::Entry { id: self.create_entry(entry.clone(), at)? },
            Command::AddContainment { parent, child } => {
                self.graph.add_containment(parent, child)?;
                Outcome::Done
            }
            Command::AddCrossReference { a, b } => {
                self.graph.add_cross_reference(a, b)?;
                Outcome::Done
            }
            Command::Derive { base, constraint } => Outcome::Entry { id: self.graph.derive_constrained(base, constraint, at)? },
            Command::UpdateEntry { id, update } => Outcome::Updated { touched: self.update_entry(id, update, at)? },
            Command::AddSource { source, initial } => {
                Outcome::Source { id: self.credibility.add_source(source.clone(), *initial, at)? }
            }
            Command::SubmitReport { report } => Outcome::Report { id: self.submit_report(report.clone(), at)? },
            Command::AddTaxonomyNode { node } => {
                self.add_taxonomy_node(node.clone())?;
                Outcome::Done
            }
            Command::AddQuestion { question } => {
                self.add_question(question.clone())?;
                Outcome::Done
            }
            Command::SetPreferences { preferences } => {
                if preferences.author.as_str().trim().is_empty() {
                    return Err(PathwayError::EmptyAuthor.into());
                }
                self.preferences.insert(preferences.author.clone(), preferences.clone());
                Outcome::Done
            }
            Command::Query { text, session } => Outcome::Query(Box::new(self.query(text, session.as_ref(), at)?)),
            Command::StartSession { author } => Outcome::Session { id: self.pathways.start_session(author, at)? },
            Command::Record { session, interaction, relation } => {
                Outcome::Node { id: self.record(session, interaction.clone(), *relation, at)? }
            }
            Command::ExcludeSource { session, source_id, note } => {
                Outcome::Node { id: self.exclude_source(session, source_id, note, at)? }
            }
            Command::Archive { session } => {
                let r = self.pathways.archive(session, at)?;
                Outcome::Pathway(Box::new(self.pathways.pathway(&r)?.clone()))
            }
            Command::Branch { pathway, node, author } => {
                Outcome::Session { id: self.pathways.branch(pathway, *node, author, at)? }
            }
            Command::Resume { pathway, author } => Outcome::Session { id: self.pathways.resume(pathway, author, at)? },
            Command::Share { pathway, recipient, by } => {
                Outcome::Share(self.pathways.share(pathway, recipient.clone(), by, at)?)
            }
        })
    }

    fn check_citations<'a>(&self, sources: impl IntoIterator<Item = &'a SourceId>) -> Result<(), Error> {
        for s in sources {
            self.credibility.source(s)?;
        }
        Ok(())
    }

    pub fn create_entry(&mut self, entry: NewEntry, at: DateTime<Utc>) -> Result<EntryId, Error> {
        self.check_citations(entry.blocks.iter().flat_map(|b| &b.citations))?;
        Ok(self.graph.create_entry(entry, at)?)
    }

    pub fn update_entry(
        &mut self,
        id: &EntryId,
        update: &EntryUpdate,
        at: DateTime<Utc>,
    ) -> Result<BTreeSet<EntryId>, Error> {
        self.check_citations(update.edits.iter().flat_map(|e| match e {
            crate::graph::BlockEdit::Upsert { block } => block.citations.as_slice(),
            crate::graph::BlockEdit::Remove { .. } => &[],
        }))?;
        // Removing a block that reports point at would orphan them.
        let entry = self.graph.entry(id)?;
        for edit in &update.edits {
            if let crate::graph::BlockEdit::Remove { block_id } = edit {
                let content = ContentRef { entry_id: id.clone(), block_id: block_id.clone() };
                if entry.block(block_id).is_some() && self.credibility.reports().any(|r| r.content == content) {
                    return Err(Error::Conflict(format!("block `{block_id}` of `{id}` has credibility reports")));
                }
            }
        }
        Ok(self.graph.update_entry(id, update, at)?)
    }

    pub fn submit_report(&mut self, report: NewReport, at: DateTime<Utc>) -> Result<ReportId, Error> {
        let entry = self.graph.entry(&report.content.entry_id)?;
        if entry.block(&report.content.block_id).is_none() {
            return Err(crate::graph::GraphError::UnknownBlock {
                entry: entry.id.clone(),
                block: report.content.block_id.clone(),
            }
            .into());
        }
        Ok(self.credibility.submit_report(report, at)?)
    }

    pub fn add_taxonomy_node(&mut self, node: TaxonomyNode) -> Result<(), Error> {
        if let Some(e) = &node.entry {
            self.graph.entry(e)?;
        }
        Ok(self.taxonomy.insert(node)?)
    }

    pub fn add_question(&mut self, question: CuratedQuestion) -> Result<(), Error> {
        if question.id.trim().is_empty() || question.text.trim().is_empty() {
            return Err(Error::Invalid("curated question id and text must be non-empty".into()));
        }
        self.graph.entry(&question.resolution.target)?;
        if self.questions.contains_key(&question.id) {
            return Err(Error::Conflict(format!("curated question `{}` already exists", question.id)));
        }
        if self.curated(&question.text).is_some() {
            return Err(Error::Conflict(format!("curated question text `{}` already exists", question.text.trim())));
        }
        self.questions.insert(question.id.clone(), question);
        Ok(())
    }

    /// A curated question whose text equals `text` after trimming.
    pub fn curated(&self, text: &str) -> Option<&CuratedQuestion> {
        let text = text.trim();
        self.questions.values().find(|q| q.text.trim() == text)
    }

    pub fn parse(&self, text: &str) -> Result<ParsedQuery, Error> {
        Ok(query::parse_query(text, &self.taxonomy, self.graph.regions())?)
    }

    /// Read-only resolution; `None` when the query would seed a new entry.
    pub fn preview_query(&self, text: &str) -> Result<Option<Resolution>, Error> {
        if let Some(q) = self.curated(text) {
            return Ok(Some(q.resolution.clone()));
        }
        let parsed = self.parse(text)?;
        Ok(query::resolve_existing(&parsed, &self.taxonomy, &self.graph)?)
    }

    /// Resolves a query (seeding if needed) and, with a session, records it
    /// as a query interaction.
    pub fn query(&mut self, text: &str, session: Option<&SessionId>, at: DateTime<Utc>) -> Result<QueryOutcome, Error> {
        if let Some(s) = session {
            self.check_recordable(s, at)?;
        }
        let parsed = self.parse(text)?;
        let (resolution, curated) = match self.curated(text) {
            Some(q) => (q.resolution.clone(), Some(q.id.clone())),
            None => {
                let r = query::resolve(&parsed, &mut self.taxonomy, &mut self.graph, &self.config.query, at)?;
                (r, None)
            }
        };
        let node = match session {
            Some(s) => {
                let interaction = Interaction::Query { text: text.trim().to_owned(), target: Some(resolution.target.clone()) };
                Some(self.pathways.record(s, interaction, None, at)?)
            }
            None => None,
        };
        Ok(QueryOutcome { parsed, resolution, curated, node })
    }

    fn check_recordable(&self, session: &SessionId, at: DateTime<Utc>) -> Result<(), Error> {
        let s = self.pathways.session(session)?;
        let Some(p) = &s.live else {
            return Err(PathwayError::ImmutablePathway(s.pathway.clone()).into());
        };
        if let Some(latest) = p.nodes.iter().map(|n| n.timestamp).max() {
            if at < latest {
                return Err(PathwayError::TimestampRegression { at, latest }.into());
            }
        }
        Ok(())
    }

    fn check_references(&self, interaction: &Interaction) -> Result<(), Error> {
        match interaction {
            Interaction::Query { target: Some(e), .. } | Interaction::Zoom { entry_id: e, .. } => {
                self.graph.entry(e)?;
            }
            Interaction::ContentView { entry_id, block_id } => {
                let entry = self.graph.entry(entry_id)?;
                if let Some(b) = block_id {
                    if entry.block(b).is_none() {
                        return Err(crate::graph::GraphError::UnknownBlock { entry: entry_id.clone(), block: b.clone() }.into());
                    }
                }
            }
            Interaction::SourceEvaluation { source_id, report_id } => {
                self.credibility.source(source_id)?;
                if let Some(r) = report_id {
                    let report = self.credibility.report(r).ok_or_else(|| Error::NotFound(format!("unknown report `{r}`")))?;
                    if report.source_id != *source_id {
                        return Err(Error::Invalid(format!("report `{r}` is not about source `{source_id}`")));
                    }
                }
            }
            Interaction::SourceExclusion { source_id, .. } => {
                self.credibility.source(source_id)?;
            }
            Interaction::Query { target: None, .. } | Interaction::Annotation { .. } => {}
        }
        Ok(())
    }

    pub fn record(
        &mut self,
        session: &SessionId,
        interaction: Interaction,
        relation: Option<Relation>,
        at: DateTime<Utc>,
    ) -> Result<NodeId, Error> {
        self.pathways.session(session)?;
        self.check_references(&interaction)?;
        Ok(self.pathways.record(session, interaction, relation, at)?)
    }

    /// Adds a source to the session's exclusion set, recorded as an
    /// exclusion interaction carrying the note.
    pub fn exclude_source(
        &mut self,
        session: &SessionId,
        source: &SourceId,
        note: &str,
        at: DateTime<Utc>,
    ) -> Result<NodeId, Error> {
        let s = self.pathways.session(session)?;
        if !s.active {
            return Err(PathwayError::InactiveSession(session.clone()).into());
        }
        self.credibility.source(source)?;
        if note.trim().is_empty() {
            return Err(CredibilityError::EmptyNote.into());
        }
        let interaction = Interaction::SourceExclusion { source_id: source.clone(), note: note.to_owned() };
        Ok(self.pathways.record(session, interaction, None, at)?)
    }

    fn exclusions(&self, session: Option<&SessionId>) -> Result<BTreeSet<SourceId>, Error> {
        match session {
            Some(s) => Ok(self.pathways.session_exclusions(s)?),
            None => Ok(BTreeSet::new()),
        }
    }

    pub fn zoom(
        &self,
        id: &EntryId,
        dimension: Dimension,
        window: Option<&Interval>,
        session: Option<&SessionId>,
    ) -> Result<ZoomResult, Error> {
        let excluded = self.exclusions(session)?;
        Ok(match dimension {
            Dimension::Logical => ZoomResult::Logical { items: self.graph.zoom_logical(id, &excluded)? },
            Dimension::Temporal => ZoomResult::Temporal { items: self.graph.zoom_temporal(id, window, &excluded)? },
            Dimension::Geographical => ZoomResult::Geographical { regions: self.graph.zoom_geographical(id, &excluded)? },
        })
    }

    pub fn badge(&self, entry: &EntryId, block: &str) -> Result<Badge, Error> {
        let e = self.graph.entry(entry)?;
        let b = e.block(block).ok_or_else(|| crate::graph::GraphError::UnknownBlock {
            entry: entry.clone(),
            block: block.to_owned(),
        })?;
        let content = ContentRef { entry_id: entry.clone(), block_id: block.to_owned() };
        Ok(self.credibility.badge(&content, &b.citations)?)
    }

    /// An entry with its neighbourhood and badges. Blocks whose citations
    /// are all excluded in `session` are left out.
    pub fn entry_view(&self, id: &EntryId, session: Option<&SessionId>) -> Result<EntryView, Error> {
        let excluded = self.exclusions(session)?;
        let mut entry = self.graph.entry(id)?.clone();
        entry.blocks.retain(|b| b.visible_under(&excluded));
        let badges = entry
            .blocks
            .iter()
            .filter_map(|b| self.badge(id, &b.block_id).ok().map(|badge| (b.block_id.clone(), badge)))
            .collect();
        Ok(EntryView {
            parents: self.graph.parents(id).cloned().collect(),
            children: self.graph.children(id).cloned().collect(),
            references: self.graph.references(id)?.into_iter().collect(),
            derived_from: self.graph.derivation_of(id).map(|(b, _)| b.clone()),
            derived: self.graph.derived_from(id).cloned().collect(),
            entry,
            badges,
        })
    }

    pub fn suggest(&self, signature: &str) -> Vec<Suggestion> {
        self.pathways.suggest_next(signature, Execution::default())
    }

    /// Every invariant of every store plus cross-store referential closure.
    pub fn validate(&self) -> Result<(), String> {
        self.config.credibility.validate().map_err(|e| e.to_string())?;
        self.graph.validate()?;
        self.credibility.validate()?;
        self.pathways.validate(Execution::default())?;
        for e in self.graph.entries() {
            for b in &e.blocks {
                for c in &b.citations {
                    if self.credibility.source(c).is_err() {
                        return Err(format!("block `{}` of `{}` cites unknown source `{c}`", b.block_id, e.id));
                    }
                }
            }
        }
        for r in self.credibility.reports() {
            let ok = self.graph.entry(&r.content.entry_id).is_ok_and(|e| e.block(&r.content.block_id).is_some());
            if !ok {
                return Err(format!(
                    "report `{}` points at missing block `{}/{}`",
                    r.id, r.content.entry_id, r.content.block_id
                ));
            }
        }
        for n in self.taxonomy.nodes() {
            if let Some(e) = &n.entry {
                if !self.graph.contains_entry(e) {
                    return Err(format!("taxonomy node `{}` links unknown entry `{e}`", n.id));
                }
            }
        }
        let mut texts = BTreeSet::new();
        for q in self.questions.values() {
            if !self.graph.contains_entry(&q.resolution.target) {
                return Err(format!("curated question `{}` targets unknown entry `{}`", q.id, q.resolution.target));
            }
            if !texts.insert(q.text.trim()) {
                return Err(format!("curated question text of `{}` is duplicated", q.id));
            }
        }
        let pathways = self.pathways.archived().chain(self.pathways.sessions().filter_map(|s| s.live.as_ref()));
        for p in pathways {
            for n in &p.nodes {
                self.check_references(&n.interaction)
                    .map_err(|e| format!("pathway `{}` node {}: {e}", p.version_ref(), n.id))?;
            }
        }
        Ok(())
    }
}
