//! The shareable summary document for an archived pathway.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::canvas::{Canvas, ZoomResult};
use crate::credibility::{Badge, CredibilityReport, Source, SourceProfile};
use crate::graph::Dimension;
use crate::ids::{AuthorId, EntryId, SourceId};
use crate::interval::Interval;
use crate::pathways::{Attribution, Interaction, InteractionNode, NodeId, PathwayError, PathwayStatus, VersionRef};
use crate::Error;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportQuery {
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<EntryId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_title: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZoomSnapshot {
    pub node: NodeId,
    pub entry_id: EntryId,
    pub entry_title: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<Interval>,
    pub result: ZoomResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceEvaluation {
    pub node: NodeId,
    pub source: Source,
    pub profile: SourceProfile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<CredibilityReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Exclusion {
    pub source_id: SourceId,
    pub source_name: String,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathwayReport {
    pub pathway: VersionRef,
    pub author: AuthorId,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent_version: Option<VersionRef>,
    pub lineage: Vec<Attribution>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub archived_at: Option<DateTime<Utc>>,
    pub query: ReportQuery,
    /// Interactions in (timestamp, id) order.
    pub interactions: Vec<InteractionNode>,
    pub logical: Vec<ZoomSnapshot>,
    pub timelines: Vec<ZoomSnapshot>,
    pub regional: Vec<ZoomSnapshot>,
    pub evaluations: Vec<SourceEvaluation>,
    /// Badges of the query target's blocks, per block id.
    pub badges: BTreeMap<String, Badge>,
    pub exclusions: Vec<Exclusion>,
    pub annotations: Vec<String>,
}

/// Builds the report for an archived pathway version. Zoom snapshots are
/// taken under the pathway's own exclusions.
pub fn export_pathway_report(canvas: &Canvas, r: &VersionRef) -> Result<PathwayReport, Error> {
    let p = canvas.pathways().pathway(r)?;
    if p.status != PathwayStatus::Archived {
        return Err(PathwayError::UnknownPathway(r.clone()).into());
    }
    let excluded: BTreeSet<SourceId> = p.exclusions.keys().cloned().collect();
    let graph = canvas.graph();
    let root = p.root().expect("archived pathways have a root");
    let query = match &root.interaction {
        Interaction::Query { text, target } => ReportQuery {
            text: text.clone(),
            target: target.clone(),
            target_title: target.as_ref().and_then(|t| graph.entry(t).ok()).map(|e| e.title.clone()),
        },
        _ => unreachable!("validated pathways start with a query"),
    };
    let interactions: Vec<InteractionNode> = p.chronological().into_iter().cloned().collect();
    let mut report = PathwayReport {
        pathway: r.clone(),
        author: p.author.clone(),
        parent_version: p.parent_version.clone(),
        lineage: p.lineage.clone(),
        archived_at: p.archived_at,
        query,
        interactions: Vec::new(),
        logical: Vec::new(),
        timelines: Vec::new(),
        regional: Vec::new(),
        evaluations: Vec::new(),
        badges: BTreeMap::new(),
        exclusions: Vec::new(),
        annotations: Vec::new(),
    };
    for node in &interactions {
        match &node.interaction {
            Interaction::Zoom { entry_id, dimension, window } => {
                let title = graph.entry(entry_id)?.title.clone();
                let result = match dimension {
                    Dimension::Logical => ZoomResult::Logical { items: graph.zoom_logical(entry_id, &excluded)? },
                    Dimension::Temporal => ZoomResult::Temporal {
                        items: graph.zoom_temporal(entry_id, window.as_ref(), &excluded)?,
                    },
                    Dimension::Geographical => {
                        ZoomResult::Geographical { regions: graph.zoom_geographical(entry_id, &excluded)? }
                    }
                };
                let snap = ZoomSnapshot { node: node.id, entry_id: entry_id.clone(), entry_title: title, window: *window, result };
                match dimension {
                    Dimension::Logical => report.logical.push(snap),
                    Dimension::Temporal => report.timelines.push(snap),
                    Dimension::Geographical => report.regional.push(snap),
                }
            }
            Interaction::SourceEvaluation { source_id, report_id } => {
                let cred = canvas.credibility();
                report.evaluations.push(SourceEvaluation {
                    node: node.id,
                    source: cred.source(source_id)?.clone(),
                    profile: cred.profile(source_id)?.clone(),
                    report: report_id.as_ref().and_then(|id| cred.report(id)).cloned(),
                });
            }
            Interaction::Annotation { text } => report.annotations.push(text.clone()),
            _ => {}
        }
    }
    if let Some(target) = &report.query.target {
        let entry = graph.entry(target)?;
        for b in entry.blocks.iter().filter(|b| b.visible_under(&excluded)) {
            if let Ok(badge) = canvas.badge(target, &b.block_id) {
                report.badges.insert(b.block_id.clone(), badge);
            }
        }
    }
    for (source_id, note) in &p.exclusions {
        report.exclusions.push(Exclusion {
            source_id: source_id.clone(),
            source_name: canvas.credibility().source(source_id)?.name.clone(),
            note: note.clone(),
        });
    }
    report.interactions = interactions;
    Ok(report)
}

fn describe(i: &Interaction) -> String {
    match i {
        Interaction::Query { text, .. } => format!("query \"{text}\""),
        Interaction::ContentView { entry_id, block_id: Some(b) } => format!("view {entry_id}#{b}"),
        Interaction::ContentView { entry_id, block_id: None } => format!("view {entry_id}"),
        Interaction::Zoom { entry_id, dimension, window: Some(w) } => format!("zoom {dimension} {entry_id} {w}"),
        Interaction::Zoom { entry_id, dimension, window: None } => format!("zoom {dimension} {entry_id}"),
        Interaction::SourceEvaluation { source_id, .. } => format!("check source {source_id}"),
        Interaction::SourceExclusion { source_id, note } => format!("exclude {source_id}: {note}"),
        Interaction::Annotation { text } => format!("note: {text}"),
    }
}

/// Plain-text rendering of a report.
pub fn render_markdown(report: &PathwayReport) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# Pathway {} by {}", report.pathway, report.author);
    let _ = writeln!(out);
    let _ = writeln!(out, "Query: {}", report.query.text);
    if let Some(t) = &report.query.target_title {
        let _ = writeln!(out, "Resolved to: {t}");
    }
    if !report.lineage.is_empty() {
        let chain: Vec<String> =
            report.lineage.iter().map(|a| format!("{} ({}@{})", a.author, a.pathway, a.version)).collect();
        let _ = writeln!(out, "Builds on: {}", chain.join(" > "));
    }
    let _ = writeln!(out, "\n## Interactions\n");
    for n in &report.interactions {
        let _ = writeln!(out, "{}. {} {}", n.id, n.timestamp.format("%Y-%m-%d %H:%M:%S"), describe(&n.interaction));
    }
    let _ = writeln!(out, "\n## Sub-concepts\n");
    for s in &report.logical {
        if let ZoomResult::Logical { items } = &s.result {
            for i in items {
                let _ = writeln!(out, "- {}", i.title);
            }
        }
    }
    let _ = writeln!(out, "\n## Timeline\n");
    for s in &report.timelines {
        if let ZoomResult::Temporal { items } = &s.result {
            for i in items {
                let _ = writeln!(out, "- {}", i.label);
            }
        }
    }
    let _ = writeln!(out, "\n## Regional perspectives\n");
    for s in &report.regional {
        if let ZoomResult::Geographical { regions } = &s.result {
            for (region, items) in regions {
                let texts: Vec<&str> = items.iter().map(|i| i.text.as_str()).collect();
                let _ = writeln!(out, "- {region}: {}", texts.join("; "));
            }
        }
    }
    let _ = writeln!(out, "\n## Source credibility\n");
    for e in &report.evaluations {
        match &e.report {
            Some(r) => {
                let _ = writeln!(out, "- {}: combined {:.3} (content {:.3})", e.source.name, r.combined_score, r.content_score);
            }
            None => {
                let _ = writeln!(out, "- {}: profile mean {:.3}", e.source.name, e.profile.coordinates.mean());
            }
        }
    }
    let _ = writeln!(out, "\n## Excluded sources\n");
    for x in &report.exclusions {
        let _ = writeln!(out, "- {}: {}", x.source_name, x.note);
    }
    if !report.annotations.is_empty() {
        let _ = writeln!(out, "\n## Notes\n");
        for a in &report.annotations {
            let _ = writeln!(out, "- {a}");
        }
    }
    out
}
