//! Source credibility: per-content evaluation, per-source profiles that
//! evolve with every report, and the combined score shown on badges.

mod score;

use std::collections::{BTreeMap, BTreeSet};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use score::{
    profile_signal, CredibilityConfig, EvidenceAssessment, NarrativeAnalysis, ProfileCoordinates,
    RawNarrative,
};

use crate::ids::{EntryId, ReportId, SourceId};
use crate::par::{self, Execution};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CredibilityError {
    #[error("{component} = {value} lies outside [0, 1]")]
    OutOfRange { component: &'static str, value: f64 },
    #[error("unknown source `{0}`")]
    UnknownSource(SourceId),
    #[error("source `{0}` already exists")]
    DuplicateSource(SourceId),
    #[error("report for `{report}` applied to the profile of `{profile}`")]
    SourceMismatch { report: SourceId, profile: SourceId },
    #[error("no credibility report covers block `{block}` of `{entry}`")]
    NoReport { entry: EntryId, block: String },
    #[error("exclusion note must be non-empty")]
    EmptyNote,
    #[error("invalid source: {0}")]
    InvalidSource(String),
    #[error("invalid credibility configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SourceKind {
    Institution,
    Individual,
    Publication,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Source {
    pub id: SourceId,
    pub name: String,
    pub kind: SourceKind,
    #[serde(default)]
    pub affiliations: Vec<String>,
}

impl Source {
    pub fn new(id: &str, name: &str, kind: SourceKind) -> Self {
        Self { id: SourceId::new(id), name: name.to_owned(), kind, affiliations: Vec::new() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceProfile {
    pub source_id: SourceId,
    /// Coordinates before any report was applied.
    pub baseline: ProfileCoordinates,
    pub coordinates: ProfileCoordinates,
    pub report_count: u64,
    pub last_updated: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ContentRef {
    pub entry_id: EntryId,
    pub block_id: String,
}

impl ContentRef {
    pub fn new(entry: &str, block: &str) -> Self {
        Self { entry_id: EntryId::new(entry), block_id: block.to_owned() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CredibilityReport {
    pub id: ReportId,
    /// Ingestion order; profiles are replayed in this order.
    pub seq: u64,
    pub source_id: SourceId,
    pub content: ContentRef,
    pub evidence: EvidenceAssessment,
    pub narrative: NarrativeAnalysis,
    pub content_score: f64,
    /// Source coordinates the combined score was computed against.
    pub profile_basis: ProfileCoordinates,
    pub combined_score: f64,
    pub created_at: DateTime<Utc>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NewReport {
    pub source_id: SourceId,
    pub content: ContentRef,
    pub evidence: EvidenceAssessment,
    pub narrative: NarrativeAnalysis,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Badge {
    pub combined_score: f64,
    pub source: Source,
    pub report: CredibilityReport,
    pub profile: SourceProfile,
}

/// Moves every coordinate toward the report's signal by one EWMA step.
pub fn update_source_profile(
    profile: &SourceProfile,
    report: &CredibilityReport,
    smoothing: f64,
) -> Result<SourceProfile, CredibilityError> {
    if profile.source_id != report.source_id {
        return Err(CredibilityError::SourceMismatch {
            report: report.source_id.clone(),
            profile: profile.source_id.clone(),
        });
    }
    let signal = profile_signal(report.content_score, &report.evidence, &report.narrative);
    Ok(SourceProfile {
        coordinates: profile.coordinates.smoothed_toward(&signal, smoothing),
        report_count: profile.report_count + 1,
        last_updated: report.created_at.max(profile.last_updated),
        ..profile.clone()
    })
}

#[derive(Debug, Clone, Default)]
pub struct CredibilityStore {
    config: CredibilityConfig,
    sources: BTreeMap<SourceId, Source>,
    profiles: BTreeMap<SourceId, SourceProfile>,
    reports: BTreeMap<ReportId, CredibilityReport>,
    by_content: BTreeMap<ContentRef, Vec<ReportId>>,
}

impl CredibilityStore {
    pub fn new(config: CredibilityConfig) -> Result<Self, CredibilityError> {
        config.validate()?;
        Ok(Self { config, ..Self::default() })
    }

    pub fn config(&self) -> &CredibilityConfig {
        &self.config
    }

    pub fn source(&self, id: &SourceId) -> Result<&Source, CredibilityError> {
        self.sources.get(id).ok_or_else(|| CredibilityError::UnknownSource(id.clone()))
    }

    pub fn sources(&self) -> impl Iterator<Item = &Source> {
        self.sources.values()
    }

    pub fn profile(&self, id: &SourceId) -> Result<&SourceProfile, CredibilityError> {
        self.profiles.get(id).ok_or_else(|| CredibilityError::UnknownSource(id.clone()))
    }

    pub fn profiles(&self) -> impl Iterator<Item = &SourceProfile> {
        self.profiles.values()
    }

    pub fn report(&self, id: &ReportId) -> Option<&CredibilityReport> {
        self.reports.get(id)
    }

    pub fn reports(&self) -> impl Iterator<Item = &CredibilityReport> {
        self.reports.values()
    }

    pub fn reports_for_source<'a>(&'a self, id: &'a SourceId) -> impl Iterator<Item = &'a CredibilityReport> {
        self.reports.values().filter(move |r| &r.source_id == id)
    }

    pub fn add_source(
        &mut self,
        source: Source,
        initial: Option<ProfileCoordinates>,
        at: DateTime<Utc>,
    ) -> Result<SourceId, CredibilityError> {
        if source.id.as_str().trim().is_empty() || source.name.trim().is_empty() {
            return Err(CredibilityError::InvalidSource("source id and name must be non-empty".into()));
        }
        if self.sources.contains_key(&source.id) {
            return Err(CredibilityError::DuplicateSource(source.id));
        }
        let baseline = initial.unwrap_or_default();
        baseline.validate()?;
        let id = source.id.clone();
        self.profiles.insert(
            id.clone(),
            SourceProfile {
                source_id: id.clone(),
                baseline,
                coordinates: baseline,
                report_count: 0,
                last_updated: at,
            },
        );
        self.sources.insert(id.clone(), source);
        Ok(id)
    }

    fn next_seq(&self) -> u64 {
        self.reports.values().map(|r| r.seq).max().unwrap_or(0) + 1
    }

    /// Scores the content, records the report against the source's current
    /// profile, then advances that profile.
    pub fn submit_report(&mut self, new: NewReport, at: DateTime<Utc>) -> Result<ReportId, CredibilityError> {
        let profile = self.profile(&new.source_id)?;
        let content_score = self.config.evaluate_content(&new.evidence, &new.narrative)?;
        let combined_score = self.config.combined(content_score, &profile.coordinates)?;
        let seq = self.next_seq();
        let report = CredibilityReport {
            id: ReportId::new(format!("rpt-{seq:06}")),
            seq,
            source_id: new.source_id,
            content: new.content,
            evidence: new.evidence,
            narrative: new.narrative,
            content_score,
            profile_basis: profile.coordinates,
            combined_score,
            created_at: at,
        };
        let updated = update_source_profile(profile, &report, self.config.smoothing)?;
        let id = report.id.clone();
        self.profiles.insert(updated.source_id.clone(), updated);
        self.by_content.entry(report.content.clone()).or_default().push(id.clone());
        self.reports.insert(id.clone(), report);
        Ok(id)
    }

    /// Highest combined score among reports on this block from one of its
    /// citing sources; ties go to the earliest report.
    pub fn badge(&self, content: &ContentRef, citations: &[SourceId]) -> Result<Badge, CredibilityError> {
        let best = self
            .by_content
            .get(content)
            .into_iter()
            .flatten()
            .map(|id| &self.reports[id])
            .filter(|r| citations.contains(&r.source_id))
            .max_by(|a, b| {
                a.combined_score.total_cmp(&b.combined_score).then_with(|| b.seq.cmp(&a.seq))
            })
            .ok_or_else(|| CredibilityError::NoReport {
                entry: content.entry_id.clone(),
                block: content.block_id.clone(),
            })?;
        Ok(Badge {
            combined_score: best.combined_score,
            source: self.sources[&best.source_id].clone(),
            report: best.clone(),
            profile: self.profiles[&best.source_id].clone(),
        })
    }

    /// Recomputes a stored report's scores from its stored components.
    pub fn audit(&self, report: &CredibilityReport) -> Result<(f64, f64), CredibilityError> {
        let content = self.config.evaluate_content(&report.evidence, &report.narrative)?;
        let combined = self.config.combined(content, &report.profile_basis)?;
        Ok((content, combined))
    }

    pub fn from_parts(
        config: CredibilityConfig,
        sources: Vec<Source>,
        profiles: Vec<SourceProfile>,
        reports: Vec<CredibilityReport>,
    ) -> Result<Self, String> {
        let mut store = Self::new(config).map_err(|e| e.to_string())?;
        for s in sources {
            if store.sources.insert(s.id.clone(), s).is_some() {
                return Err("duplicate source id".into());
            }
        }
        for p in profiles {
            if store.profiles.insert(p.source_id.clone(), p).is_some() {
                return Err("duplicate source profile".into());
            }
        }
        for r in reports {
            store.by_content.entry(r.content.clone()).or_default().push(r.id.clone());
            if store.reports.insert(r.id.clone(), r).is_some() {
                return Err("duplicate report id".into());
            }
        }
        for ids in store.by_content.values_mut() {
            ids.sort_by_key(|id| store.reports[id].seq);
        }
        store.validate()?;
        Ok(store)
    }

    /// Replays every profile from its baseline and checks each report's
    /// stored scores and basis against the replay, bit for bit.
    pub fn validate(&self) -> Result<(), String> {
        self.config.validate().map_err(|e| e.to_string())?;
        for id in self.sources.keys() {
            if !self.profiles.contains_key(id) {
                return Err(format!("source `{id}` has no profile"));
            }
        }
        let mut seqs = BTreeSet::new();
        for r in self.reports.values() {
            if !self.sources.contains_key(&r.source_id) {
                return Err(format!("report `{}` cites unknown source `{}`", r.id, r.source_id));
            }
            if !seqs.insert(r.seq) {
                return Err(format!("report sequence {} used twice", r.seq));
            }
        }
        let profiles: Vec<&SourceProfile> = self.profiles.values().collect();
        let results = par::map(Execution::default(), &profiles, |p| self.replay_profile(p));
        results.into_iter().collect()
    }

    fn replay_profile(&self, profile: &SourceProfile) -> Result<(), String> {
        let id = &profile.source_id;
        if !self.sources.contains_key(id) {
            return Err(format!("profile for unknown source `{id}`"));
        }
        profile.baseline.validate().map_err(|e| format!("profile `{id}`: {e}"))?;
        let mut reports: Vec<&CredibilityReport> = self.reports_for_source(id).collect();
        reports.sort_by_key(|r| r.seq);
        let mut running = SourceProfile {
            coordinates: profile.baseline,
            report_count: 0,
            ..profile.clone()
        };
        for r in reports {
            let (content, combined) = self.audit(r).map_err(|e| format!("report `{}`: {e}", r.id))?;
            if content != r.content_score || combined != r.combined_score {
                return Err(format!("report `{}` scores do not recompute", r.id));
            }
            if r.profile_basis != running.coordinates {
                return Err(format!("report `{}` basis differs from the replayed profile", r.id));
            }
            running = update_source_profile(&running, r, self.config.smoothing).map_err(|e| e.to_string())?;
        }
        if running.coordinates != profile.coordinates || running.report_count != profile.report_count {
            return Err(format!("profile `{id}` does not match a replay of its reports"));
        }
        Ok(())
    }

    /// Content scores for a batch of assessments.
    pub fn score_batch(
        &self,
        mode: Execution,
        items: &[(EvidenceAssessment, NarrativeAnalysis)],
    ) -> Vec<Result<f64, CredibilityError>> {
        par::map(mode, items, |(e, n)| self.config.evaluate_content(e, n))
    }
}
