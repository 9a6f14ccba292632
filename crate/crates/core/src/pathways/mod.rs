//! Exploration pathways: session recording, archiving, branching, sharing
//! and next-step suggestions mined from archived pathways.

mod model;

use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, Utc};
use thiserror::Error;

pub use model::{
    Attribution, Edge, Interaction, InteractionNode, NodeId, NodeKind, Pathway, PathwayStatus, Recipient, Relation,
    Session, SessionEvent, Share, Suggestion, VersionRef,
};

use crate::canonical;
use crate::ids::{AuthorId, PathwayId, SessionId, SourceId};
use crate::par::{self, Execution};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PathwayError {
    #[error("unknown session `{0}`")]
    UnknownSession(SessionId),
    #[error("unknown pathway `{0}`")]
    UnknownPathway(VersionRef),
    #[error("node {node} is not part of pathway `{pathway}`")]
    UnknownNode { pathway: VersionRef, node: NodeId },
    #[error("pathway `{0}` is archived and cannot change")]
    ImmutablePathway(VersionRef),
    #[error("session `{0}` has no interactions to archive")]
    EmptySession(SessionId),
    #[error("session `{0}` is no longer active")]
    InactiveSession(SessionId),
    #[error("timestamp {at} precedes the latest interaction at {latest}")]
    TimestampRegression { at: DateTime<Utc>, latest: DateTime<Utc> },
    #[error("invalid interaction: {0}")]
    InvalidPayload(String),
    #[error("`{reader}` may not read pathway `{pathway}`")]
    AccessDenied { pathway: VersionRef, reader: AuthorId },
    #[error("only the author of `{0}` may share it")]
    NotAuthor(VersionRef),
    #[error("author id must be non-empty")]
    EmptyAuthor,
}

/// Sessions, archived pathway versions and shares.
#[derive(Debug, Clone, Default)]
pub struct PathwayStore {
    sessions: BTreeMap<SessionId, Session>,
    archived: BTreeMap<VersionRef, Pathway>,
    shares: BTreeMap<String, Share>,
}

fn share_token(pathway: &VersionRef, recipient: &Recipient) -> String {
    let key = canonical::to_string(&(pathway, recipient));
    canonical::sha256_hex(key.as_bytes())[..16].to_owned()
}

fn attribution(p: &Pathway) -> Attribution {
    Attribution { author: p.author.clone(), pathway: p.id.clone(), version: p.version }
}

fn numeric_suffix(id: &str) -> u64 {
    id.rsplit('-').next().and_then(|s| s.parse().ok()).unwrap_or(0)
}

impl PathwayStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn session(&self, id: &SessionId) -> Result<&Session, PathwayError> {
        self.sessions.get(id).ok_or_else(|| PathwayError::UnknownSession(id.clone()))
    }

    pub fn sessions(&self) -> impl Iterator<Item = &Session> {
        self.sessions.values()
    }

    pub fn archived(&self) -> impl Iterator<Item = &Pathway> {
        self.archived.values()
    }

    pub fn shares(&self) -> impl Iterator<Item = &Share> {
        self.shares.values()
    }

    pub fn pathway(&self, r: &VersionRef) -> Result<&Pathway, PathwayError> {
        if let Some(p) = self.archived.get(r) {
            return Ok(p);
        }
        self.sessions
            .values()
            .filter_map(|s| s.live.as_ref())
            .find(|p| p.version_ref() == *r)
            .ok_or_else(|| PathwayError::UnknownPathway(r.clone()))
    }

    /// The pathway a session writes to (or wrote to, once archived).
    pub fn session_pathway(&self, id: &SessionId) -> Result<&Pathway, PathwayError> {
        let s = self.session(id)?;
        match &s.live {
            Some(p) => Ok(p),
            None => self.pathway(&s.pathway),
        }
    }

    pub fn session_exclusions(&self, id: &SessionId) -> Result<BTreeSet<SourceId>, PathwayError> {
        Ok(self.session_pathway(id)?.exclusions.keys().cloned().collect())
    }

    pub fn can_read(&self, p: &Pathway, reader: &AuthorId) -> bool {
        if p.author == *reader {
            return true;
        }
        let r = p.version_ref();
        self.shares.values().any(|s| {
            s.pathway == r
                && match &s.recipient {
                    Recipient::Public => true,
                    Recipient::Author(a) => a == reader,
                }
        })
    }

    pub fn readable(&self, r: &VersionRef, reader: &AuthorId) -> Result<&Pathway, PathwayError> {
        let p = self.pathway(r)?;
        if self.can_read(p, reader) {
            Ok(p)
        } else {
            Err(PathwayError::AccessDenied { pathway: r.clone(), reader: reader.clone() })
        }
    }

    fn next_session_id(&self) -> SessionId {
        let n = self.sessions.keys().map(|k| numeric_suffix(k.as_str())).max().unwrap_or(0) + 1;
        SessionId::new(format!("s-{n:06}"))
    }

    fn families(&self) -> impl Iterator<Item = &PathwayId> {
        self.archived.keys().map(|r| &r.pathway).chain(self.sessions.values().map(|s| &s.pathway.pathway))
    }

    fn next_version(&self, family: &PathwayId) -> u32 {
        self.archived
            .keys()
            .chain(self.sessions.values().map(|s| &s.pathway))
            .filter(|r| r.pathway == *family)
            .map(|r| r.version)
            .max()
            .unwrap_or(0)
            + 1
    }

    fn open(&mut self, author: AuthorId, pathway: Pathway, current: Option<NodeId>, pending: Option<Relation>) -> SessionId {
        let id = self.next_session_id();
        let session = Session {
            id: id.clone(),
            author,
            pathway: pathway.version_ref(),
            active: true,
            current,
            pending_relation: pending,
            events: Vec::new(),
            live: Some(pathway),
        };
        self.sessions.insert(id.clone(), session);
        id
    }

    /// Opens a session on a fresh pathway family.
    pub fn start_session(&mut self, author: &AuthorId, at: DateTime<Utc>) -> Result<SessionId, PathwayError> {
        if author.as_str().trim().is_empty() {
            return Err(PathwayError::EmptyAuthor);
        }
        let n = self.families().map(|f| numeric_suffix(f.as_str())).max().unwrap_or(0) + 1;
        let pathway = Pathway {
            id: PathwayId::new(format!("pw-{n:06}")),
            version: 1,
            parent_version: None,
            branch_point: None,
            author: author.clone(),
            lineage: Vec::new(),
            nodes: Vec::new(),
            edges: BTreeSet::new(),
            status: PathwayStatus::Live,
            exclusions: BTreeMap::new(),
            created_at: at,
            archived_at: None,
        };
        Ok(self.open(author.clone(), pathway, None, None))
    }

    /// Appends an interaction after the session's current node. The edge
    /// relation is `relation` if given, else the pending one set by a
    /// branch, else `followed_by`.
    pub fn record(
        &mut self,
        session: &SessionId,
        interaction: Interaction,
        relation: Option<Relation>,
        at: DateTime<Utc>,
    ) -> Result<NodeId, PathwayError> {
        let s = self.sessions.get_mut(session).ok_or_else(|| PathwayError::UnknownSession(session.clone()))?;
        let Some(p) = s.live.as_mut() else {
            return Err(PathwayError::ImmutablePathway(s.pathway.clone()));
        };
        interaction.validate()?;
        if p.nodes.is_empty() && interaction.kind() != NodeKind::Query {
            return Err(PathwayError::InvalidPayload("the first interaction of a session must be a query".into()));
        }
        if let Some(latest) = p.nodes.iter().map(|n| n.timestamp).max() {
            if at < latest {
                return Err(PathwayError::TimestampRegression { at, latest });
            }
        }
        let id = NodeId(p.nodes.iter().map(|n| n.id.0).max().unwrap_or(0) + 1);
        let pending = s.pending_relation.take();
        if let Some(prev) = s.current {
            let relation = relation.or(pending).unwrap_or(Relation::FollowedBy);
            p.edges.insert(Edge { from: prev, to: id, relation });
        }
        if let Interaction::SourceExclusion { source_id, note } = &interaction {
            p.exclusions.insert(source_id.clone(), note.clone());
        }
        p.nodes.push(InteractionNode { id, timestamp: at, interaction: interaction.clone() });
        s.events.push(SessionEvent { at, relation, interaction });
        s.current = Some(id);
        Ok(id)
    }

    /// Freezes the session's pathway as an immutable version.
    pub fn archive(&mut self, session: &SessionId, at: DateTime<Utc>) -> Result<VersionRef, PathwayError> {
        let s = self.sessions.get_mut(session).ok_or_else(|| PathwayError::UnknownSession(session.clone()))?;
        let Some(p) = s.live.as_ref() else {
            return Err(PathwayError::InactiveSession(session.clone()));
        };
        if p.nodes.is_empty() {
            return Err(PathwayError::EmptySession(session.clone()));
        }
        let r = p.version_ref();
        if self.archived.contains_key(&r) {
            return Err(PathwayError::ImmutablePathway(r));
        }
        let mut p = s.live.take().expect("checked above");
        p.status = PathwayStatus::Archived;
        p.archived_at = Some(at.max(p.created_at));
        s.active = false;
        self.archived.insert(r.clone(), p);
        Ok(r)
    }

    fn derive_version(
        &mut self,
        from: &VersionRef,
        node: NodeId,
        author: &AuthorId,
        at: DateTime<Utc>,
        pending: Option<Relation>,
    ) -> Result<SessionId, PathwayError> {
        if author.as_str().trim().is_empty() {
            return Err(PathwayError::EmptyAuthor);
        }
        let parent = self
            .archived
            .get(from)
            .ok_or_else(|| PathwayError::UnknownPathway(from.clone()))?;
        if !self.can_read(parent, author) {
            return Err(PathwayError::AccessDenied { pathway: from.clone(), reader: author.clone() });
        }
        if parent.node(node).is_none() {
            return Err(PathwayError::UnknownNode { pathway: from.clone(), node });
        }
        let keep = parent.ancestors_inclusive(node);
        let nodes: Vec<_> = parent.nodes.iter().filter(|n| keep.contains(&n.id)).cloned().collect();
        let edges = parent
            .edges
            .iter()
            .filter(|e| keep.contains(&e.from) && keep.contains(&e.to))
            .copied()
            .collect();
        let mut lineage = parent.lineage.clone();
        lineage.push(attribution(parent));
        let pathway = Pathway {
            id: from.pathway.clone(),
            version: self.next_version(&from.pathway),
            parent_version: Some(from.clone()),
            branch_point: Some(node),
            author: author.clone(),
            lineage,
            exclusions: Pathway::exclusions_from_nodes(&nodes),
            nodes,
            edges,
            status: PathwayStatus::Live,
            created_at: at,
            archived_at: None,
        };
        Ok(self.open(author.clone(), pathway, Some(node), pending))
    }

    /// New live version holding `node` and its ancestors; the first
    /// interaction recorded next is linked with `branch_of`.
    pub fn branch(
        &mut self,
        from: &VersionRef,
        node: NodeId,
        author: &AuthorId,
        at: DateTime<Utc>,
    ) -> Result<SessionId, PathwayError> {
        self.derive_version(from, node, author, at, Some(Relation::BranchOf))
    }

    /// Branch at the terminal node: the new session continues exactly where
    /// the archived one stopped.
    pub fn resume(&mut self, from: &VersionRef, author: &AuthorId, at: DateTime<Utc>) -> Result<SessionId, PathwayError> {
        let terminal = self
            .archived
            .get(from)
            .ok_or_else(|| PathwayError::UnknownPathway(from.clone()))?
            .terminal()
            .map(|n| n.id)
            .expect("archived pathways are non-empty");
        self.derive_version(from, terminal, author, at, Some(Relation::BranchOf))
    }

    /// Grants read access on an archived version. Sharing the same version
    /// with the same recipient again returns the existing share.
    pub fn share(
        &mut self,
        r: &VersionRef,
        recipient: Recipient,
        by: &AuthorId,
        at: DateTime<Utc>,
    ) -> Result<Share, PathwayError> {
        let p = self.archived.get(r).ok_or_else(|| PathwayError::UnknownPathway(r.clone()))?;
        if p.author != *by {
            return Err(PathwayError::NotAuthor(r.clone()));
        }
        if let Recipient::Author(a) = &recipient {
            if a.as_str().trim().is_empty() {
                return Err(PathwayError::EmptyAuthor);
            }
        }
        let token = share_token(r, &recipient);
        let share = self
            .shares
            .entry(token.clone())
            .or_insert_with(|| Share { token, pathway: r.clone(), recipient, granted_by: by.clone(), created_at: at });
        Ok(share.clone())
    }

    /// Successors of interactions matching `signature` across archived
    /// pathways, counted per `followed_by` edge, most frequent first.
    pub fn suggest_next(&self, signature: &str, mode: Execution) -> Vec<Suggestion> {
        let pathways: Vec<&Pathway> = self.archived.values().collect();
        suggest_from(&pathways, signature, mode)
    }

    pub fn from_parts(
        sessions: impl IntoIterator<Item = Session>,
        archived: impl IntoIterator<Item = Pathway>,
        shares: impl IntoIterator<Item = Share>,
    ) -> Result<Self, String> {
        let mut store = Self::new();
        for s in sessions {
            let id = s.id.clone();
            if store.sessions.insert(id.clone(), s).is_some() {
                return Err(format!("duplicate session `{id}`"));
            }
        }
        for p in archived {
            let r = p.version_ref();
            if store.archived.insert(r.clone(), p).is_some() {
                return Err(format!("duplicate pathway version `{r}`"));
            }
        }
        for s in shares {
            let token = s.token.clone();
            if store.shares.insert(token.clone(), s).is_some() {
                return Err(format!("duplicate share `{token}`"));
            }
        }
        Ok(store)
    }

    pub fn validate(&self, mode: Execution) -> Result<(), String> {
        let mut all: Vec<&Pathway> = self.archived.values().collect();
        let mut live_refs = BTreeSet::new();
        for s in self.sessions.values() {
            match (&s.live, s.active) {
                (Some(p), true) => {
                    if p.status != PathwayStatus::Live || p.version_ref() != s.pathway {
                        return Err(format!("session `{}` holds a mismatched live pathway", s.id));
                    }
                    if p.author != s.author {
                        return Err(format!("session `{}` author differs from its pathway", s.id));
                    }
                    if let Some(c) = s.current {
                        if p.node(c).is_none() {
                            return Err(format!("session `{}` points at missing node {c}", s.id));
                        }
                    }
                    if self.archived.contains_key(&s.pathway) || !live_refs.insert(s.pathway.clone()) {
                        return Err(format!("pathway version `{}` is claimed twice", s.pathway));
                    }
                    all.push(p);
                }
                (None, false) => {
                    if !self.archived.contains_key(&s.pathway) {
                        return Err(format!("archived session `{}` lost pathway `{}`", s.id, s.pathway));
                    }
                }
                _ => return Err(format!("session `{}` active flag disagrees with its pathway", s.id)),
            }
        }
        for (r, p) in &self.archived {
            if p.version_ref() != *r || p.status != PathwayStatus::Archived {
                return Err(format!("pathway `{r}` is stored under the wrong key or status"));
            }
        }
        let results = par::map(mode, &all, |p| p.validate().and_then(|_| self.check_lineage(p)));
        results.into_iter().collect::<Result<Vec<_>, _>>()?;
        for (token, s) in &self.shares {
            if !self.archived.contains_key(&s.pathway) {
                return Err(format!("share `{token}` points at unknown pathway `{}`", s.pathway));
            }
            if share_token(&s.pathway, &s.recipient) != *token {
                return Err(format!("share `{token}` has a mismatched token"));
            }
        }
        Ok(())
    }

    fn check_lineage(&self, p: &Pathway) -> Result<(), String> {
        let r = p.version_ref();
        let Some(parent_ref) = &p.parent_version else {
            return if p.lineage.is_empty() && p.branch_point.is_none() {
                Ok(())
            } else {
                Err(format!("root pathway `{r}` carries lineage"))
            };
        };
        let parent = self
            .archived
            .get(parent_ref)
            .ok_or_else(|| format!("pathway `{r}` derives from unknown `{parent_ref}`"))?;
        if parent_ref.pathway != p.id || parent_ref.version == p.version {
            return Err(format!("pathway `{r}` has an invalid parent `{parent_ref}`"));
        }
        let mut expected = parent.lineage.clone();
        expected.push(attribution(parent));
        if expected != p.lineage {
            return Err(format!("pathway `{r}` lineage does not extend its parent's"));
        }
        let bp = p.branch_point.ok_or_else(|| format!("pathway `{r}` lacks a branch point"))?;
        for id in parent.ancestors_inclusive(bp) {
            if parent.node(id) != p.node(id) {
                return Err(format!("pathway `{r}` does not preserve ancestor node {id}"));
            }
        }
        // Parent chains terminate because every step strictly goes to an
        // archived version that existed first; guard anyway.
        let mut seen = BTreeSet::from([r.clone()]);
        let mut cur = Some(parent_ref.clone());
        while let Some(c) = cur {
            if !seen.insert(c.clone()) {
                return Err(format!("pathway `{r}` has a cyclic lineage"));
            }
            cur = self.archived.get(&c).and_then(|q| q.parent_version.clone());
        }
        Ok(())
    }
}

/// Counting core shared by the store and the benches.
pub fn suggest_from(pathways: &[&Pathway], signature: &str, mode: Execution) -> Vec<Suggestion> {
    let counts = par::count(mode, pathways, |p| {
        let sigs: BTreeMap<NodeId, String> = p.nodes.iter().map(|n| (n.id, n.interaction.signature())).collect();
        p.edges
            .iter()
            .filter(|e| e.relation == Relation::FollowedBy && sigs.get(&e.from).map(String::as_str) == Some(signature))
            .filter_map(|e| sigs.get(&e.to).cloned())
            .collect::<Vec<_>>()
    });
    let mut out: Vec<Suggestion> = counts
        .into_iter()
        .map(|(signature, count)| {
            let interaction = serde_json::from_str(&signature).expect("signature is a serialized interaction");
            Suggestion { signature, interaction, count }
        })
        .collect();
    out.sort_by(|a, b| b.count.cmp(&a.count).then_with(|| a.signature.cmp(&b.signature)));
    out
}
