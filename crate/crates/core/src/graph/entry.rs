use std::collections::BTreeSet;

use chrono::{DateTime, NaiveDate, Utc};
use serde::{Deserialize, Serialize};

use crate::ids::{EntryId, SourceId};
use crate::region::{RegionSet, RegionTable};
use crate::scope::{DimensionalConstraint, Scope};

use super::GraphError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EntryStatus {
    /// Machine-initialised by query resolution, not yet operator-edited.
    Seed,
    Curated,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockKind {
    Concept,
    Milestone,
    RegionalView,
    Narrative,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ContentBlock {
    pub block_id: String,
    pub kind: BlockKind,
    /// Card title for concept blocks; falls back to the first line of `text`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub heading: Option<String>,
    pub text: String,
    /// Restrictions relative to the owning entry's scope.
    #[serde(default, skip_serializing_if = "Scope::is_unrestricted")]
    pub dimension_tags: Scope,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub citations: Vec<SourceId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub milestone_date: Option<NaiveDate>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region: Option<String>,
}

impl ContentBlock {
    fn bare(block_id: &str, kind: BlockKind, text: &str) -> Self {
        Self {
            block_id: block_id.to_owned(),
            kind,
            heading: None,
            text: text.to_owned(),
            dimension_tags: Scope::global(),
            citations: Vec::new(),
            milestone_date: None,
            region: None,
        }
    }

    pub fn concept(block_id: &str, heading: &str, text: &str) -> Self {
        Self { heading: Some(heading.to_owned()), ..Self::bare(block_id, BlockKind::Concept, text) }
    }

    pub fn milestone(block_id: &str, date: NaiveDate, text: &str) -> Self {
        Self { milestone_date: Some(date), ..Self::bare(block_id, BlockKind::Milestone, text) }
    }

    pub fn regional(block_id: &str, region: &str, text: &str) -> Self {
        let mut block = Self::bare(block_id, BlockKind::RegionalView, text);
        block.region = Some(region.to_owned());
        block.dimension_tags = Scope::global().with_regions([region]);
        block
    }

    pub fn narrative(block_id: &str, text: &str) -> Self {
        Self::bare(block_id, BlockKind::Narrative, text)
    }

    pub fn cite(mut self, source: impl Into<SourceId>) -> Self {
        self.citations.push(source.into());
        self
    }

    pub fn tagged(mut self, tags: Scope) -> Self {
        self.dimension_tags = tags;
        self
    }

    pub fn title(&self) -> &str {
        match &self.heading {
            Some(h) => h,
            None => self.text.lines().next().unwrap_or(""),
        }
    }

    /// Hidden only when every citation is excluded.
    pub fn visible_under(&self, excluded: &BTreeSet<SourceId>) -> bool {
        self.citations.is_empty() || self.citations.iter().any(|c| !excluded.contains(c))
    }

    pub(crate) fn validate(&self, entry_scope: &Scope, regions: &RegionTable) -> Result<(), GraphError> {
        let invalid = |msg: String| GraphError::InvalidBlock { block: self.block_id.clone(), reason: msg };
        let out_of_scope = |msg: String| GraphError::InvalidScope(format!("block `{}`: {msg}", self.block_id));
        if self.block_id.trim().is_empty() {
            return Err(invalid("block id is empty".into()));
        }
        match (self.kind, self.milestone_date.is_some()) {
            (BlockKind::Milestone, false) => return Err(invalid("milestone without a date".into())),
            (k, true) if k != BlockKind::Milestone => return Err(invalid("date on a non-milestone".into())),
            _ => {}
        }
        match (self.kind, self.region.is_some()) {
            (BlockKind::RegionalView, false) => return Err(invalid("regional view without a region".into())),
            (k, true) if k != BlockKind::RegionalView => {
                return Err(invalid("region on a non-regional block".into()))
            }
            _ => {}
        }
        self.dimension_tags.validate(regions).map_err(out_of_scope)?;
        if !self.dimension_tags.restrictions_within(entry_scope, regions) {
            return Err(out_of_scope("tags fall outside the entry scope".into()));
        }
        let effective = self.dimension_tags.inherit(entry_scope);
        if let Some(date) = self.milestone_date {
            if effective.temporal.is_some_and(|t| !t.contains_date(date)) {
                return Err(out_of_scope(format!("milestone {date} outside the temporal scope")));
            }
        }
        if let Some(region) = &self.region {
            if !regions.contains_code(region) {
                return Err(out_of_scope(format!("unknown region `{region}`")));
            }
            let single: RegionSet = [region.clone()].into();
            if !regions.set_within(Some(&single), effective.regions.as_ref()) {
                return Err(out_of_scope(format!("region `{region}` outside the region scope")));
            }
        }
        Ok(())
    }

    /// Whether the block survives narrowing `base` to `derived`.
    pub fn passes(&self, base: &Scope, derived: &Scope, regions: &RegionTable) -> bool {
        let effective = self.dimension_tags.inherit(base);
        if !effective.overlaps(derived, regions) {
            return false;
        }
        if let (Some(date), Some(window)) = (self.milestone_date, derived.temporal) {
            if !window.contains_date(date) {
                return false;
            }
        }
        if let Some(region) = &self.region {
            let single: RegionSet = [region.clone()].into();
            if !regions.set_within(Some(&single), derived.regions.as_ref()) {
                return false;
            }
        }
        true
    }

    pub(crate) fn narrowed(&self, derived: &Scope, regions: &RegionTable) -> Self {
        Self { dimension_tags: self.dimension_tags.narrow_restrictions(derived, regions), ..self.clone() }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct KnowledgeEntry {
    pub id: EntryId,
    pub title: String,
    pub summary: String,
    pub scope: Scope,
    pub blocks: Vec<ContentBlock>,
    pub status: EntryStatus,
    pub created_at: DateTime<Utc>,
    pub updated_at: DateTime<Utc>,
}

impl KnowledgeEntry {
    pub fn block(&self, block_id: &str) -> Option<&ContentBlock> {
        self.blocks.iter().find(|b| b.block_id == block_id)
    }

    pub fn blocks_of(&self, kind: BlockKind) -> impl Iterator<Item = &ContentBlock> {
        self.blocks.iter().filter(move |b| b.kind == kind)
    }

    pub(crate) fn validate(&self, regions: &RegionTable) -> Result<(), GraphError> {
        if self.id.as_str().trim().is_empty() {
            return Err(GraphError::InvalidEntry("entry id is empty".into()));
        }
        if self.title.trim().is_empty() {
            return Err(GraphError::EmptyTitle);
        }
        self.scope
            .validate(regions)
            .map_err(|e| GraphError::InvalidScope(format!("entry `{}`: {e}", self.id)))?;
        let mut seen = BTreeSet::new();
        for block in &self.blocks {
            if !seen.insert(block.block_id.as_str()) {
                return Err(GraphError::InvalidBlock {
                    block: block.block_id.clone(),
                    reason: "duplicate block id".into(),
                });
            }
            block.validate(&self.scope, regions)?;
        }
        if self.updated_at < self.created_at {
            return Err(GraphError::InvalidEntry(format!("entry `{}` updated before it was created", self.id)));
        }
        Ok(())
    }
}

/// Input for [`super::Graph::create_entry`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NewEntry {
    /// Explicit id for imports; generated from the title otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<EntryId>,
    pub title: String,
    #[serde(default)]
    pub summary: String,
    #[serde(default)]
    pub scope: Scope,
    #[serde(default)]
    pub blocks: Vec<ContentBlock>,
    #[serde(default = "curated")]
    pub status: EntryStatus,
}

fn curated() -> EntryStatus {
    EntryStatus::Curated
}

impl NewEntry {
    pub fn new(title: &str) -> Self {
        Self {
            id: None,
            title: title.to_owned(),
            summary: String::new(),
            scope: Scope::global(),
            blocks: Vec::new(),
            status: EntryStatus::Curated,
        }
    }

    pub fn with_id(mut self, id: &str) -> Self {
        self.id = Some(EntryId::new(id));
        self
    }

    pub fn summary(mut self, summary: &str) -> Self {
        self.summary = summary.to_owned();
        self
    }

    pub fn scope(mut self, scope: Scope) -> Self {
        self.scope = scope;
        self
    }

    pub fn block(mut self, block: ContentBlock) -> Self {
        self.blocks.push(block);
        self
    }

    pub fn blocks(mut self, blocks: impl IntoIterator<Item = ContentBlock>) -> Self {
        self.blocks.extend(blocks);
        self
    }

    pub fn status(mut self, status: EntryStatus) -> Self {
        self.status = status;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
pub enum BlockEdit {
    /// Replaces the block with the same id, or appends it.
    Upsert { block: ContentBlock },
    Remove { block_id: String },
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EntryUpdate {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summary: Option<String>,
    #[serde(default)]
    pub edits: Vec<BlockEdit>,
}

impl EntryUpdate {
    pub fn upsert(block: ContentBlock) -> Self {
        Self { summary: None, edits: vec![BlockEdit::Upsert { block }] }
    }

    pub fn remove(block_id: &str) -> Self {
        Self { summary: None, edits: vec![BlockEdit::Remove { block_id: block_id.to_owned() }] }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelationshipKind {
    Contains,
    CrossReference,
    DerivedByConstraint,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Relationship {
    pub kind: RelationshipKind,
    pub a: EntryId,
    pub b: EntryId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub constraint: Option<DimensionalConstraint>,
}

impl Relationship {
    pub fn record_id(&self) -> String {
        let kind = match self.kind {
            RelationshipKind::Contains => "contains",
            RelationshipKind::CrossReference => "cross_reference",
            RelationshipKind::DerivedByConstraint => "derived_by_constraint",
        };
        format!("{kind}:{}:{}", self.a, self.b)
    }
}
