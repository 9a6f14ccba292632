//! Free-text query resolution against the taxonomy and the entry graph.

mod parse;
mod taxonomy;

use std::collections::BTreeSet;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use parse::{is_stopword, parse_query, ParsedQuery, Span, TermMatch};
pub use taxonomy::{Taxonomy, TaxonomyNode};

use crate::graph::{BlockKind, Dimension, Direction, EntryStatus, Graph, GraphError, NewEntry};
use crate::ids::EntryId;
use crate::scope::Scope;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum QueryError {
    #[error("query is empty")]
    EmptyQuery,
    #[error("no taxonomy label matches the query")]
    NoMatch,
    #[error("seeding new entries is disabled")]
    SeedingDisabled,
    #[error("invalid taxonomy: {0}")]
    InvalidTaxonomy(String),
    #[error(transparent)]
    Graph(#[from] GraphError),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryConfig {
    pub seeding_enabled: bool,
}

impl Default for QueryConfig {
    fn default() -> Self {
        Self { seeding_enabled: true }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Resolution {
    pub target: EntryId,
    pub target_title: String,
    pub target_status: EntryStatus,
    pub matched_label: String,
    pub suggested_zooms: BTreeSet<Dimension>,
    /// True only when this resolution created the target.
    pub seeded: bool,
}

/// A question from the curated list, answered with a stored resolution.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CuratedQuestion {
    pub id: String,
    pub text: String,
    pub resolution: Resolution,
}

/// The most specific linked match: deepest taxonomy node, ties broken by
/// canonical label.
pub fn most_specific<'a>(parsed: &'a ParsedQuery, taxonomy: &'a Taxonomy) -> Option<(&'a TermMatch, &'a EntryId)> {
    parsed
        .object_terms
        .iter()
        .filter_map(|term| {
            let node = taxonomy.node(&term.node)?;
            node.entry.as_ref().map(|entry| (term, entry, taxonomy.depth(&node.id)))
        })
        .min_by(|a, b| b.2.cmp(&a.2).then_with(|| a.0.label.cmp(&b.0.label)))
        .map(|(term, entry, _)| (term, entry))
}

fn zooms_for(parsed: &ParsedQuery, graph: &Graph, target: &EntryId) -> Result<BTreeSet<Dimension>, GraphError> {
    let mut ids = vec![target.clone()];
    ids.extend(graph.closure(target, Direction::Descendants)?);
    let has = |kind| ids.iter().any(|id| graph.entry(id).is_ok_and(|e| e.blocks_of(kind).next().is_some()));
    let mut zooms = BTreeSet::from([Dimension::Logical]);
    if parsed.temporal_hint.is_some() || has(BlockKind::Milestone) {
        zooms.insert(Dimension::Temporal);
    }
    if !parsed.region_hints.is_empty() || has(BlockKind::RegionalView) {
        zooms.insert(Dimension::Geographical);
    }
    Ok(zooms)
}

fn resolution(
    parsed: &ParsedQuery,
    graph: &Graph,
    target: &EntryId,
    label: &str,
    seeded: bool,
) -> Result<Resolution, QueryError> {
    let entry = graph.entry(target)?;
    Ok(Resolution {
        target: target.clone(),
        target_title: entry.title.clone(),
        target_status: entry.status,
        matched_label: label.to_owned(),
        suggested_zooms: zooms_for(parsed, graph, target)?,
        seeded,
    })
}

/// Resolves without mutating anything; `None` means a seed is needed.
pub fn resolve_existing(
    parsed: &ParsedQuery,
    taxonomy: &Taxonomy,
    graph: &Graph,
) -> Result<Option<Resolution>, QueryError> {
    match most_specific(parsed, taxonomy) {
        Some((term, entry)) => resolution(parsed, graph, entry, &term.label, false).map(Some),
        None => Ok(None),
    }
}

/// Resolves the query, seeding a new entry when no matched label links to
/// one and seeding is enabled.
pub fn resolve(
    parsed: &ParsedQuery,
    taxonomy: &mut Taxonomy,
    graph: &mut Graph,
    config: &QueryConfig,
    at: DateTime<Utc>,
) -> Result<Resolution, QueryError> {
    if let Some(found) = resolve_existing(parsed, taxonomy, graph)? {
        return Ok(found);
    }
    if !config.seeding_enabled {
        return Err(QueryError::NoMatch);
    }
    let (id, created) = seed_entry(parsed, taxonomy, graph, config, at)?;
    let title = graph.entry(&id)?.title.clone();
    resolution(parsed, graph, &id, &title, created)
}

fn title_case(word: &str) -> String {
    let mut chars = word.chars();
    match chars.next() {
        Some(first) => first.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

/// Title a seed entry would receive: matched labels then meaningful
/// residual terms, title-cased.
pub fn seed_title(parsed: &ParsedQuery) -> String {
    parsed
        .object_terms
        .iter()
        .map(|t| t.label.clone())
        .chain(parsed.content_terms().map(title_case))
        .collect::<Vec<_>>()
        .join(" ")
}

/// Creates (or finds, for a repeated query) the seed entry for an
/// unresolved query. Returns the entry id and whether it was created now.
pub fn seed_entry(
    parsed: &ParsedQuery,
    taxonomy: &mut Taxonomy,
    graph: &mut Graph,
    config: &QueryConfig,
    at: DateTime<Utc>,
) -> Result<(EntryId, bool), QueryError> {
    if !config.seeding_enabled {
        return Err(QueryError::SeedingDisabled);
    }
    let title = seed_title(parsed);
    if title.trim().is_empty() {
        return Err(QueryError::NoMatch);
    }
    let existing = taxonomy.find_label(&title).cloned();
    if let Some(entry) = existing.as_ref().and_then(|n| n.entry.clone()) {
        return Ok((entry, false));
    }
    let scope = Scope {
        facets: Default::default(),
        temporal: parsed.temporal_hint,
        regions: (!parsed.region_hints.is_empty()).then(|| parsed.region_hints.clone()),
    };
    let new = NewEntry::new(&title).scope(scope).status(EntryStatus::Seed);
    let node = match existing {
        Some(node) => node,
        None => {
            let parent = parsed
                .object_terms
                .iter()
                .max_by(|a, b| taxonomy.depth(&a.node).cmp(&taxonomy.depth(&b.node)).then(b.label.cmp(&a.label)))
                .map(|t| t.node.clone());
            TaxonomyNode { parent, ..TaxonomyNode::new(taxonomy.fresh_id(&title).as_str(), &title) }
        }
    };
    // Stage both mutations so a failure leaves neither store changed.
    let mut staged_taxonomy = taxonomy.clone();
    if staged_taxonomy.node(&node.id).is_none() {
        staged_taxonomy.insert(node.clone())?;
    }
    let id = graph.create_entry(new, at)?;
    staged_taxonomy.link(&node.id, id.clone());
    *taxonomy = staged_taxonomy;
    Ok((id, true))
}

#[cfg(test)]
mod tests;
