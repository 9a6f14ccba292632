use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::PathwayError;
use crate::canonical;
use crate::graph::Dimension;
use crate::ids::{AuthorId, EntryId, PathwayId, ReportId, SourceId};
use crate::interval::Interval;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct NodeId(pub u64);

impl fmt::Display for NodeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NodeKind {
    Query,
    ContentView,
    Zoom,
    SourceEvaluation,
    SourceExclusion,
    Annotation,
}

/// What happened at an interaction point; the payload shape follows the kind.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Interaction {
    Query {
        text: String,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        target: Option<EntryId>,
    },
    ContentView {
        entry_id: EntryId,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        block_id: Option<String>,
    },
    Zoom {
        entry_id: EntryId,
        dimension: Dimension,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        window: Option<Interval>,
    },
    SourceEvaluation {
        source_id: SourceId,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        report_id: Option<ReportId>,
    },
    SourceExclusion {
        source_id: SourceId,
        note: String,
    },
    Annotation {
        text: String,
    },
}

impl Interaction {
    pub fn kind(&self) -> NodeKind {
        match self {
            Interaction::Query { .. } => NodeKind::Query,
            Interaction::ContentView { .. } => NodeKind::ContentView,
            Interaction::Zoom { .. } => NodeKind::Zoom,
            Interaction::SourceEvaluation { .. } => NodeKind::SourceEvaluation,
            Interaction::SourceExclusion { .. } => NodeKind::SourceExclusion,
            Interaction::Annotation { .. } => NodeKind::Annotation,
        }
    }

    pub fn zoom(entry: &str, dimension: Dimension) -> Self {
        Interaction::Zoom { entry_id: EntryId::new(entry), dimension, window: None }
    }

    /// Kind plus payload, without any timestamp: the key used to match
    /// similar interactions across pathways.
    pub fn signature(&self) -> String {
        canonical::to_string(self)
    }

    pub fn validate(&self) -> Result<(), PathwayError> {
        let blank = |s: &str| s.trim().is_empty();
        let bad = match self {
            Interaction::Query { text, .. } => blank(text),
            Interaction::ContentView { entry_id, block_id } => {
                blank(entry_id.as_str()) || block_id.as_deref().is_some_and(blank)
            }
            Interaction::Zoom { entry_id, .. } => blank(entry_id.as_str()),
            Interaction::SourceEvaluation { source_id, .. } => blank(source_id.as_str()),
            Interaction::SourceExclusion { source_id, note } => blank(source_id.as_str()) || blank(note),
            Interaction::Annotation { text } => blank(text),
        };
        if bad {
            Err(PathwayError::InvalidPayload(format!("{:?} payload has an empty field", self.kind())))
        } else {
            Ok(())
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InteractionNode {
    pub id: NodeId,
    pub timestamp: DateTime<Utc>,
    #[serde(flatten)]
    pub interaction: Interaction,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Relation {
    FollowedBy,
    BranchOf,
    Refines,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Edge {
    pub from: NodeId,
    pub to: NodeId,
    pub relation: Relation,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PathwayStatus {
    Live,
    Archived,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct VersionRef {
    pub pathway: PathwayId,
    pub version: u32,
}

impl fmt::Display for VersionRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}@{}", self.pathway, self.version)
    }
}

/// Parses `id@version`.
impl std::str::FromStr for VersionRef {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let (id, v) = s.rsplit_once('@').ok_or_else(|| format!("expected `pathway@version`, got `{s}`"))?;
        let version = v.parse().map_err(|_| format!("bad version in `{s}`"))?;
        if id.trim().is_empty() {
            return Err(format!("missing pathway id in `{s}`"));
        }
        Ok(VersionRef { pathway: PathwayId::new(id), version })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Attribution {
    pub author: AuthorId,
    pub pathway: PathwayId,
    pub version: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Pathway {
    pub id: PathwayId,
    pub version: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent_version: Option<VersionRef>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub branch_point: Option<NodeId>,
    pub author: AuthorId,
    /// Authors of every ancestor version, oldest first.
    #[serde(default)]
    pub lineage: Vec<Attribution>,
    pub nodes: Vec<InteractionNode>,
    pub edges: BTreeSet<Edge>,
    pub status: PathwayStatus,
    /// Excluded sources and the note explaining each exclusion.
    #[serde(default)]
    pub exclusions: BTreeMap<SourceId, String>,
    pub created_at: DateTime<Utc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub archived_at: Option<DateTime<Utc>>,
}

impl Pathway {
    pub fn version_ref(&self) -> VersionRef {
        VersionRef { pathway: self.id.clone(), version: self.version }
    }

    pub fn node(&self, id: NodeId) -> Option<&InteractionNode> {
        self.nodes.iter().find(|n| n.id == id)
    }

    pub fn digest(&self) -> String {
        canonical::digest(self)
    }

    /// Digest of what a reader sees: nodes, edges and exclusions, without
    /// version metadata.
    pub fn state_digest(&self) -> String {
        canonical::digest(&(&self.nodes, &self.edges, &self.exclusions))
    }

    pub fn root(&self) -> Option<&InteractionNode> {
        let targets: BTreeSet<NodeId> = self.edges.iter().map(|e| e.to).collect();
        self.nodes.iter().find(|n| !targets.contains(&n.id))
    }

    /// Latest timestamp; ties go to the highest node id.
    pub fn terminal(&self) -> Option<&InteractionNode> {
        self.nodes.iter().max_by(|a, b| a.timestamp.cmp(&b.timestamp).then(a.id.cmp(&b.id)))
    }

    /// Nodes ordered by (timestamp, id).
    pub fn chronological(&self) -> Vec<&InteractionNode> {
        let mut nodes: Vec<_> = self.nodes.iter().collect();
        nodes.sort_by_key(|n| (n.timestamp, n.id));
        nodes
    }

    pub fn kind_sequence(&self) -> Vec<NodeKind> {
        self.chronological().into_iter().map(|n| n.interaction.kind()).collect()
    }

    /// `node` and everything with a path to it.
    pub fn ancestors_inclusive(&self, node: NodeId) -> BTreeSet<NodeId> {
        let mut incoming: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
        for e in &self.edges {
            incoming.entry(e.to).or_default().push(e.from);
        }
        let mut out = BTreeSet::new();
        let mut stack = vec![node];
        while let Some(n) = stack.pop() {
            if out.insert(n) {
                stack.extend(incoming.get(&n).into_iter().flatten());
            }
        }
        out
    }

    pub(crate) fn exclusions_from_nodes(nodes: &[InteractionNode]) -> BTreeMap<SourceId, String> {
        nodes
            .iter()
            .filter_map(|n| match &n.interaction {
                Interaction::SourceExclusion { source_id, note } => Some((source_id.clone(), note.clone())),
                _ => None,
            })
            .collect()
    }

    /// Structural invariants: unique ids, closed edges, a DAG with a single
    /// query root, non-decreasing timestamps along edges, and exclusions
    /// that match the recorded exclusion nodes.
    pub fn validate(&self) -> Result<(), String> {
        let ctx = self.version_ref();
        if self.version == 0 {
            return Err(format!("pathway {ctx}: version must be positive"));
        }
        let mut by_id = BTreeMap::new();
        for n in &self.nodes {
            if by_id.insert(n.id, n).is_some() {
                return Err(format!("pathway {ctx}: duplicate node {}", n.id));
            }
            n.interaction.validate().map_err(|e| format!("pathway {ctx}: node {}: {e}", n.id))?;
        }
        let mut indegree: BTreeMap<NodeId, usize> = by_id.keys().map(|k| (*k, 0)).collect();
        let mut outgoing: BTreeMap<NodeId, Vec<NodeId>> = BTreeMap::new();
        for e in &self.edges {
            let (Some(from), Some(to)) = (by_id.get(&e.from), by_id.get(&e.to)) else {
                return Err(format!("pathway {ctx}: edge {} -> {} has a missing endpoint", e.from, e.to));
            };
            if to.timestamp < from.timestamp {
                return Err(format!("pathway {ctx}: edge {} -> {} goes back in time", e.from, e.to));
            }
            *indegree.get_mut(&e.to).expect("endpoint exists") += 1;
            outgoing.entry(e.from).or_default().push(e.to);
        }
        if !self.nodes.is_empty() {
            let roots: Vec<_> = indegree.iter().filter(|(_, d)| **d == 0).map(|(k, _)| *k).collect();
            if roots.len() != 1 {
                return Err(format!("pathway {ctx}: expected one root, found {}", roots.len()));
            }
            if by_id[&roots[0]].interaction.kind() != NodeKind::Query {
                return Err(format!("pathway {ctx}: root node is not a query"));
            }
            // Kahn's algorithm: every node must be released.
            let mut remaining = indegree.clone();
            let mut ready = roots;
            let mut released = 0;
            while let Some(n) = ready.pop() {
                released += 1;
                for m in outgoing.get(&n).into_iter().flatten() {
                    let d = remaining.get_mut(m).expect("endpoint exists");
                    *d -= 1;
                    if *d == 0 {
                        ready.push(*m);
                    }
                }
            }
            if released != self.nodes.len() {
                return Err(format!("pathway {ctx}: edges contain a cycle"));
            }
        }
        if Self::exclusions_from_nodes(&self.nodes) != self.exclusions {
            return Err(format!("pathway {ctx}: exclusion set differs from exclusion nodes"));
        }
        match (self.status, self.archived_at) {
            (PathwayStatus::Archived, None) | (PathwayStatus::Live, Some(_)) => {
                return Err(format!("pathway {ctx}: status and archive time disagree"))
            }
            _ => {}
        }
        if let Some(bp) = self.branch_point {
            if self.parent_version.is_none() || !by_id.contains_key(&bp) {
                return Err(format!("pathway {ctx}: dangling branch point {bp}"));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SessionEvent {
    pub at: DateTime<Utc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub relation: Option<Relation>,
    pub interaction: Interaction,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Session {
    pub id: crate::ids::SessionId,
    pub author: AuthorId,
    pub pathway: VersionRef,
    pub active: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub current: Option<NodeId>,
    /// Relation for the next recorded edge (set after a branch).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pending_relation: Option<Relation>,
    /// Ordered record calls accepted by this session.
    #[serde(default)]
    pub events: Vec<SessionEvent>,
    /// The live pathway; absent once archived.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub live: Option<Pathway>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Recipient {
    Author(AuthorId),
    Public,
}

impl fmt::Display for Recipient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Recipient::Author(a) => write!(f, "author:{a}"),
            Recipient::Public => f.write_str("public"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Share {
    pub token: String,
    pub pathway: VersionRef,
    pub recipient: Recipient,
    pub granted_by: AuthorId,
    pub created_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Suggestion {
    pub signature: String,
    pub interaction: Interaction,
    pub count: usize,
}
