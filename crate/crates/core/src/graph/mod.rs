//! Knowledge entries and the relationships between them: containment (a
//! DAG), symmetric cross-references, and constraint derivation.

mod entry;
mod zoom;

use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, Utc};
use thiserror::Error;

pub use entry::{
    BlockEdit, BlockKind, ContentBlock, EntryStatus, EntryUpdate, KnowledgeEntry, NewEntry,
    Relationship, RelationshipKind,
};
pub use zoom::{Dimension, LogicalItem, MilestoneItem, RegionalItem, RegionalMap};

use crate::ids::{slugify, EntryId};
use crate::interval::Interval;
use crate::region::RegionTable;
use crate::scope::{DimensionalConstraint, Scope};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("unknown entry `{0}`")]
    UnknownEntry(EntryId),
    #[error("entry id `{0}` already exists")]
    DuplicateId(EntryId),
    #[error("entry title must be non-empty")]
    EmptyTitle,
    #[error("invalid scope: {0}")]
    InvalidScope(String),
    #[error("invalid block `{block}`: {reason}")]
    InvalidBlock { block: String, reason: String },
    #[error("invalid entry: {0}")]
    InvalidEntry(String),
    #[error("containment {parent} -> {child} would close a cycle")]
    CycleDetected { parent: EntryId, child: EntryId },
    #[error("containment {parent} -> {child} already exists")]
    DuplicateEdge { parent: EntryId, child: EntryId },
    #[error("an entry cannot reference itself")]
    SelfReference,
    #[error("constraint does not intersect the scope of `{0}`")]
    EmptyIntersection(EntryId),
    #[error("invalid constraint: {0}")]
    InvalidConstraint(String),
    #[error("invalid interval: {0}")]
    InvalidInterval(String),
    #[error("`{0}` is derived by constraint; edit its base entry instead")]
    DerivedEntry(EntryId),
    #[error("entry `{entry}` has no block `{block}`")]
    UnknownBlock { entry: EntryId, block: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Derivation {
    base: EntryId,
    constraint: DimensionalConstraint,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Ancestors,
    Descendants,
}

/// In-memory entry store. Every mutation validates before it commits, so
/// a rejected call leaves the graph untouched.
#[derive(Debug, Clone, Default)]
pub struct Graph {
    regions: RegionTable,
    entries: BTreeMap<EntryId, KnowledgeEntry>,
    children: BTreeMap<EntryId, BTreeSet<EntryId>>,
    parents: BTreeMap<EntryId, BTreeSet<EntryId>>,
    xrefs: BTreeMap<EntryId, BTreeSet<EntryId>>,
    derivations: BTreeMap<EntryId, Derivation>,
    derived_index: BTreeMap<(EntryId, DimensionalConstraint), EntryId>,
}

impl Graph {
    pub fn new(regions: RegionTable) -> Self {
        Self { regions, ..Self::default() }
    }

    pub fn regions(&self) -> &RegionTable {
        &self.regions
    }

    pub fn entry(&self, id: &EntryId) -> Result<&KnowledgeEntry, GraphError> {
        self.entries.get(id).ok_or_else(|| GraphError::UnknownEntry(id.clone()))
    }

    pub fn contains_entry(&self, id: &EntryId) -> bool {
        self.entries.contains_key(id)
    }

    pub fn entries(&self) -> impl Iterator<Item = &KnowledgeEntry> {
        self.entries.values()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn find_by_title(&self, title: &str) -> Option<&KnowledgeEntry> {
        self.entries.values().find(|e| e.title == title)
    }

    fn require(&self, id: &EntryId) -> Result<(), GraphError> {
        self.entry(id).map(|_| ())
    }

    fn fresh_id(&self, title: &str) -> EntryId {
        let base = slugify(title);
        if !self.entries.contains_key(base.as_str()) {
            return EntryId::new(base);
        }
        (2..)
            .map(|n| format!("{base}-{n}"))
            .find(|candidate| !self.entries.contains_key(candidate.as_str()))
            .map(EntryId::new)
            .expect("unbounded suffix search")
    }

    pub fn create_entry(&mut self, new: NewEntry, at: DateTime<Utc>) -> Result<EntryId, GraphError> {
        let id = match new.id {
            Some(id) if self.entries.contains_key(&id) => return Err(GraphError::DuplicateId(id)),
            Some(id) => id,
            None => self.fresh_id(&new.title),
        };
        let entry = KnowledgeEntry {
            id: id.clone(),
            title: new.title,
            summary: new.summary,
            scope: new.scope,
            blocks: new.blocks,
            status: new.status,
            created_at: at,
            updated_at: at,
        };
        entry.validate(&self.regions)?;
        self.entries.insert(id.clone(), entry);
        Ok(id)
    }

    pub fn add_containment(&mut self, parent: &EntryId, child: &EntryId) -> Result<(), GraphError> {
        self.require(parent)?;
        self.require(child)?;
        if self.children.get(parent).is_some_and(|c| c.contains(child)) {
            return Err(GraphError::DuplicateEdge { parent: parent.clone(), child: child.clone() });
        }
        if parent == child || self.reachable(child, parent) {
            return Err(GraphError::CycleDetected { parent: parent.clone(), child: child.clone() });
        }
        self.children.entry(parent.clone()).or_default().insert(child.clone());
        self.parents.entry(child.clone()).or_default().insert(parent.clone());
        Ok(())
    }

    fn reachable(&self, from: &EntryId, to: &EntryId) -> bool {
        let mut stack = vec![from];
        let mut seen = BTreeSet::new();
        while let Some(node) = stack.pop() {
            if node == to {
                return true;
            }
            if seen.insert(node) {
                stack.extend(self.children.get(node).into_iter().flatten());
            }
        }
        false
    }

    /// Idempotent; the link is stored once and visible from both ends.
    pub fn add_cross_reference(&mut self, a: &EntryId, b: &EntryId) -> Result<(), GraphError> {
        if a == b {
            return Err(GraphError::SelfReference);
        }
        self.require(a)?;
        self.require(b)?;
        self.xrefs.entry(a.clone()).or_default().insert(b.clone());
        self.xrefs.entry(b.clone()).or_default().insert(a.clone());
        Ok(())
    }

    pub fn references(&self, id: &EntryId) -> Result<BTreeSet<EntryId>, GraphError> {
        self.require(id)?;
        Ok(self.xrefs.get(id).cloned().unwrap_or_default())
    }

    pub fn children(&self, id: &EntryId) -> impl Iterator<Item = &EntryId> {
        self.children.get(id).into_iter().flatten()
    }

    pub fn parents(&self, id: &EntryId) -> impl Iterator<Item = &EntryId> {
        self.parents.get(id).into_iter().flatten()
    }

    /// Transitive closure over containment, excluding `id` itself.
    pub fn closure(&self, id: &EntryId, direction: Direction) -> Result<BTreeSet<EntryId>, GraphError> {
        self.require(id)?;
        let adjacency = match direction {
            Direction::Ancestors => &self.parents,
            Direction::Descendants => &self.children,
        };
        let mut out = BTreeSet::new();
        let mut stack: Vec<&EntryId> = adjacency.get(id).into_iter().flatten().collect();
        while let Some(node) = stack.pop() {
            if out.insert(node.clone()) {
                stack.extend(adjacency.get(node).into_iter().flatten());
            }
        }
        out.remove(id);
        Ok(out)
    }

    pub fn derivation_of(&self, id: &EntryId) -> Option<(&EntryId, &DimensionalConstraint)> {
        self.derivations.get(id).map(|d| (&d.base, &d.constraint))
    }

    pub fn derived_from<'a>(&'a self, base: &'a EntryId) -> impl Iterator<Item = &'a EntryId> + 'a {
        self.derivations.iter().filter(move |(_, d)| &d.base == base).map(|(id, _)| id)
    }

    pub fn is_derived(&self, id: &EntryId) -> bool {
        self.derivations.contains_key(id)
    }

    fn materialize(&self, base: &KnowledgeEntry, derived_scope: &Scope) -> Vec<ContentBlock> {
        base.blocks
            .iter()
            .filter(|b| b.passes(&base.scope, derived_scope, &self.regions))
            .map(|b| b.narrowed(derived_scope, &self.regions))
            .collect()
    }

    /// Narrows `base` by `constraint` into a materialized entry. Re-deriving
    /// the same canonical constraint returns the existing entry.
    pub fn derive_constrained(
        &mut self,
        base_id: &EntryId,
        constraint: &DimensionalConstraint,
        at: DateTime<Utc>,
    ) -> Result<EntryId, GraphError> {
        let base = self.entry(base_id)?;
        constraint.validate(&self.regions).map_err(GraphError::InvalidConstraint)?;
        if let Some(existing) = self.derived_index.get(&(base_id.clone(), constraint.clone())) {
            return Ok(existing.clone());
        }
        let scope = base
            .scope
            .intersect(constraint, &self.regions)
            .ok_or_else(|| GraphError::EmptyIntersection(base_id.clone()))?;
        let title = format!("{} {}", base.title, constraint.render(&self.regions));
        let entry = KnowledgeEntry {
            id: self.fresh_id(&title),
            title,
            summary: base.summary.clone(),
            blocks: self.materialize(base, &scope),
            scope,
            status: base.status,
            created_at: at,
            updated_at: at,
        };
        entry.validate(&self.regions)?;
        let id = entry.id.clone();
        self.entries.insert(id.clone(), entry);
        self.derivations
            .insert(id.clone(), Derivation { base: base_id.clone(), constraint: constraint.clone() });
        self.derived_index.insert((base_id.clone(), constraint.clone()), id.clone());
        Ok(id)
    }

    /// Applies block edits to a base entry and re-syncs every entry derived
    /// from it (transitively). Derived entries whose blocks do not change
    /// are left untouched.
    pub fn update_entry(
        &mut self,
        id: &EntryId,
        update: &EntryUpdate,
        at: DateTime<Utc>,
    ) -> Result<BTreeSet<EntryId>, GraphError> {
        if self.is_derived(id) {
            self.require(id)?;
            return Err(GraphError::DerivedEntry(id.clone()));
        }
        let mut edited = self.entry(id)?.clone();
        if let Some(summary) = &update.summary {
            edited.summary = summary.clone();
        }
        for edit in &update.edits {
            match edit {
                BlockEdit::Upsert { block } => {
                    match edited.blocks.iter_mut().find(|b| b.block_id == block.block_id) {
                        Some(slot) => *slot = block.clone(),
                        None => edited.blocks.push(block.clone()),
                    }
                }
                BlockEdit::Remove { block_id } => {
                    let before = edited.blocks.len();
                    edited.blocks.retain(|b| &b.block_id != block_id);
                    if edited.blocks.len() == before {
                        return Err(GraphError::UnknownBlock { entry: id.clone(), block: block_id.clone() });
                    }
                }
            }
        }
        edited.status = EntryStatus::Curated;
        edited.updated_at = at.max(edited.updated_at);
        edited.validate(&self.regions)?;

        let mut staged: BTreeMap<EntryId, KnowledgeEntry> = BTreeMap::new();
        staged.insert(id.clone(), edited);
        let mut queue = vec![id.clone()];
        while let Some(base_id) = queue.pop() {
            let derived: Vec<EntryId> = self.derived_from(&base_id).cloned().collect();
            for derived_id in derived {
                let base = staged.get(&base_id).unwrap_or(&self.entries[&base_id]);
                let current = &self.entries[&derived_id];
                let blocks = self.materialize(base, &current.scope);
                if blocks != current.blocks {
                    let mut next = current.clone();
                    next.blocks = blocks;
                    next.updated_at = at.max(next.updated_at);
                    staged.insert(derived_id.clone(), next);
                    queue.push(derived_id);
                }
            }
        }
        let touched = staged.keys().cloned().collect();
        self.entries.extend(staged);
        Ok(touched)
    }

    pub fn relationships(&self) -> Vec<Relationship> {
        let mut out = Vec::new();
        for (parent, kids) in &self.children {
            for child in kids {
                out.push(Relationship {
                    kind: RelationshipKind::Contains,
                    a: parent.clone(),
                    b: child.clone(),
                    constraint: None,
                });
            }
        }
        for (a, others) in &self.xrefs {
            for b in others.iter().filter(|b| a < *b) {
                out.push(Relationship {
                    kind: RelationshipKind::CrossReference,
                    a: a.clone(),
                    b: b.clone(),
                    constraint: None,
                });
            }
        }
        for (derived, d) in &self.derivations {
            out.push(Relationship {
                kind: RelationshipKind::DerivedByConstraint,
                a: d.base.clone(),
                b: derived.clone(),
                constraint: Some(d.constraint.clone()),
            });
        }
        out
    }

    /// Rebuilds a graph from persisted parts and re-checks every invariant.
    pub fn from_parts(
        regions: RegionTable,
        entries: Vec<KnowledgeEntry>,
        relationships: Vec<Relationship>,
    ) -> Result<Self, String> {
        regions.validate()?;
        let mut graph = Graph::new(regions);
        for entry in entries {
            if graph.entries.contains_key(&entry.id) {
                return Err(format!("duplicate entry id `{}`", entry.id));
            }
            graph.entries.insert(entry.id.clone(), entry);
        }
        for rel in relationships {
            for end in [&rel.a, &rel.b] {
                if !graph.entries.contains_key(end) {
                    return Err(format!("relationship {} references unknown entry `{end}`", rel.record_id()));
                }
            }
            match rel.kind {
                RelationshipKind::Contains => {
                    graph.children.entry(rel.a.clone()).or_default().insert(rel.b.clone());
                    graph.parents.entry(rel.b).or_default().insert(rel.a);
                }
                RelationshipKind::CrossReference => {
                    if rel.a == rel.b {
                        return Err(format!("cross-reference of `{}` to itself", rel.a));
                    }
                    graph.xrefs.entry(rel.a.clone()).or_default().insert(rel.b.clone());
                    graph.xrefs.entry(rel.b).or_default().insert(rel.a);
                }
                RelationshipKind::DerivedByConstraint => {
                    let constraint = rel
                        .constraint
                        .ok_or_else(|| format!("derivation {} -> {} lacks a constraint", rel.a, rel.b))?;
                    if graph.derivations.contains_key(&rel.b) {
                        return Err(format!("entry `{}` derived more than once", rel.b));
                    }
                    let key = (rel.a.clone(), constraint.clone());
                    if graph.derived_index.insert(key, rel.b.clone()).is_some() {
                        return Err(format!("duplicate derivation of `{}` under one constraint", rel.a));
                    }
                    graph.derivations.insert(rel.b, Derivation { base: rel.a, constraint });
                }
            }
        }
        graph.validate()?;
        Ok(graph)
    }

    /// Full invariant check: entry/block validity, acyclic containment,
    /// derived scopes and materialized blocks.
    pub fn validate(&self) -> Result<(), String> {
        let checks = crate::par::map(crate::par::Execution::default(), &self.entries.values().collect::<Vec<_>>(), |e| {
            e.validate(&self.regions).map_err(|err| format!("entry `{}`: {err}", e.id))
        });
        checks.into_iter().collect::<Result<Vec<_>, _>>()?;
        if let Some((a, b)) = self.find_containment_cycle() {
            return Err(format!("containment cycle through edge {a} -> {b}"));
        }
        for (derived_id, d) in &self.derivations {
            let base = &self.entries[&d.base];
            let derived = &self.entries[derived_id];
            d.constraint.validate(&self.regions)?;
            let expected = base.scope.intersect(&d.constraint, &self.regions);
            if expected.as_ref() != Some(&derived.scope) {
                return Err(format!("derived entry `{derived_id}` scope differs from base ∩ constraint"));
            }
            if self.materialize(base, &derived.scope) != derived.blocks {
                return Err(format!("derived entry `{derived_id}` blocks are out of sync with `{}`", d.base));
            }
        }
        let mut derived_chain = BTreeSet::new();
        for start in self.derivations.keys() {
            derived_chain.clear();
            let mut cur = start;
            while let Some(d) = self.derivations.get(cur) {
                if !derived_chain.insert(cur) {
                    return Err(format!("derivation cycle through `{start}`"));
                }
                cur = &d.base;
            }
        }
        Ok(())
    }

    /// Returns an edge that closes a directed cycle, if any.
    pub fn find_containment_cycle(&self) -> Option<(EntryId, EntryId)> {
        #[derive(Clone, Copy, PartialEq)]
        enum Mark {
            Open,
            Done,
        }
        let mut marks: BTreeMap<&EntryId, Mark> = BTreeMap::new();
        for root in self.children.keys() {
            if marks.contains_key(root) {
                continue;
            }
            let mut stack: Vec<(&EntryId, Vec<&EntryId>)> =
                vec![(root, self.children(root).collect())];
            marks.insert(root, Mark::Open);
            while let Some((node, pending)) = stack.last_mut() {
                let node = *node;
                match pending.pop() {
                    Some(next) => match marks.get(next) {
                        Some(Mark::Open) => return Some((node.clone(), next.clone())),
                        Some(Mark::Done) => {}
                        None => {
                            marks.insert(next, Mark::Open);
                            stack.push((next, self.children(next).collect()));
                        }
                    },
                    None => {
                        marks.insert(node, Mark::Done);
                        stack.pop();
                    }
                }
            }
        }
        None
    }

    // Zooms. `excluded` hides blocks whose every citation is excluded.

    pub fn zoom_logical(
        &self,
        id: &EntryId,
        excluded: &BTreeSet<crate::ids::SourceId>,
    ) -> Result<Vec<LogicalItem>, GraphError> {
        zoom::logical(self, id, excluded)
    }

    pub fn zoom_temporal(
        &self,
        id: &EntryId,
        window: Option<&Interval>,
        excluded: &BTreeSet<crate::ids::SourceId>,
    ) -> Result<Vec<MilestoneItem>, GraphError> {
        zoom::temporal(self, id, window, excluded)
    }

    pub fn zoom_geographical(
        &self,
        id: &EntryId,
        excluded: &BTreeSet<crate::ids::SourceId>,
    ) -> Result<RegionalMap, GraphError> {
        zoom::geographical(self, id, excluded)
    }
}
