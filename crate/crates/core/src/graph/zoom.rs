use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use super::{BlockKind, Direction, EntryStatus, Graph, GraphError};
use crate::ids::{EntryId, SourceId};
use crate::interval::Interval;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dimension {
    Logical,
    Temporal,
    Geographical,
}

impl Dimension {
    pub const ALL: [Dimension; 3] = [Dimension::Logical, Dimension::Temporal, Dimension::Geographical];

    pub fn as_str(self) -> &'static str {
        match self {
            Dimension::Logical => "logical",
            Dimension::Temporal => "temporal",
            Dimension::Geographical => "geographical",
        }
    }
}

impl fmt::Display for Dimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Dimension {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Dimension::ALL
            .into_iter()
            .find(|d| d.as_str() == s)
            .ok_or_else(|| format!("unknown dimension `{s}`"))
    }
}

/// A sub-concept card: a contained entry, a concept block, or both when a
/// concept block's heading names a child entry.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LogicalItem {
    pub title: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entry_id: Option<EntryId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub block_id: Option<String>,
    pub summary: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub status: Option<EntryStatus>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MilestoneItem {
    pub date: NaiveDate,
    /// `"YYYY: text"`.
    pub label: String,
    pub text: String,
    pub entry_id: EntryId,
    pub block_id: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub citations: Vec<SourceId>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegionalItem {
    pub text: String,
    pub entry_id: EntryId,
    pub block_id: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub citations: Vec<SourceId>,
}

pub type RegionalMap = BTreeMap<String, Vec<RegionalItem>>;

fn sort_key(item: &LogicalItem) -> (String, String) {
    let id = item
        .entry_id
        .as_ref()
        .map(|e| e.to_string())
        .or_else(|| item.block_id.clone())
        .unwrap_or_default();
    (item.title.clone(), id)
}

pub(super) fn logical(
    graph: &Graph,
    id: &EntryId,
    excluded: &BTreeSet<SourceId>,
) -> Result<Vec<LogicalItem>, GraphError> {
    let entry = graph.entry(id)?;
    let mut items: Vec<LogicalItem> = graph
        .children(id)
        .map(|child| {
            let child = &graph.entries[child];
            LogicalItem {
                title: child.title.clone(),
                entry_id: Some(child.id.clone()),
                block_id: None,
                summary: child.summary.clone(),
                status: Some(child.status),
            }
        })
        .collect();
    for block in entry.blocks_of(BlockKind::Concept).filter(|b| b.visible_under(excluded)) {
        let title = block.title();
        match items
            .iter_mut()
            .find(|i| i.block_id.is_none() && i.entry_id.is_some() && i.title.eq_ignore_ascii_case(title))
        {
            Some(card) => {
                card.block_id = Some(block.block_id.clone());
                if card.summary.is_empty() {
                    card.summary = block.text.clone();
                }
            }
            None => items.push(LogicalItem {
                title: title.to_owned(),
                entry_id: None,
                block_id: Some(block.block_id.clone()),
                summary: block.text.clone(),
                status: None,
            }),
        }
    }
    items.sort_by_key(sort_key);
    Ok(items)
}

fn with_descendants(graph: &Graph, id: &EntryId) -> Result<Vec<EntryId>, GraphError> {
    let mut ids = vec![id.clone()];
    ids.extend(graph.closure(id, Direction::Descendants)?);
    Ok(ids)
}

pub(super) fn temporal(
    graph: &Graph,
    id: &EntryId,
    window: Option<&Interval>,
    excluded: &BTreeSet<SourceId>,
) -> Result<Vec<MilestoneItem>, GraphError> {
    let mut items = Vec::new();
    for entry_id in with_descendants(graph, id)? {
        let entry = &graph.entries[&entry_id];
        for block in entry.blocks_of(BlockKind::Milestone).filter(|b| b.visible_under(excluded)) {
            let date = block.milestone_date.expect("validated milestone has a date");
            if window.is_some_and(|w| !w.contains_date(date)) {
                continue;
            }
            items.push(MilestoneItem {
                date,
                label: format!("{}: {}", date.year(), block.text),
                text: block.text.clone(),
                entry_id: entry_id.clone(),
                block_id: block.block_id.clone(),
                citations: block.citations.clone(),
            });
        }
    }
    items.sort_by(|a, b| {
        (a.date, &a.text, &a.entry_id, &a.block_id).cmp(&(b.date, &b.text, &b.entry_id, &b.block_id))
    });
    Ok(items)
}

pub(super) fn geographical(
    graph: &Graph,
    id: &EntryId,
    excluded: &BTreeSet<SourceId>,
) -> Result<RegionalMap, GraphError> {
    let mut map = RegionalMap::new();
    for entry_id in with_descendants(graph, id)? {
        let entry = &graph.entries[&entry_id];
        for block in entry.blocks_of(BlockKind::RegionalView).filter(|b| b.visible_under(excluded)) {
            let region = block.region.clone().expect("validated regional view has a region");
            map.entry(region).or_default().push(RegionalItem {
                text: block.text.clone(),
                entry_id: entry_id.clone(),
                block_id: block.block_id.clone(),
                citations: block.citations.clone(),
            });
        }
    }
    for items in map.values_mut() {
        items.sort_by(|a, b| (&a.text, &a.entry_id, &a.block_id).cmp(&(&b.text, &b.entry_id, &b.block_id)));
    }
    Ok(map)
}
