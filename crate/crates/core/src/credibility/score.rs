//! Pure scoring functions: weighted content evaluation, EWMA profile
//! evolution and the content/profile convex combination.

use serde::{Deserialize, Serialize};

use super::CredibilityError;

pub(crate) fn check_unit(name: &'static str, value: f64) -> Result<f64, CredibilityError> {
    if (0.0..=1.0).contains(&value) {
        Ok(value)
    } else {
        Err(CredibilityError::OutOfRange { component: name, value })
    }
}

fn clamp_unit(x: f64) -> f64 {
    x.clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvidenceAssessment {
    pub consensus: f64,
    pub verification: f64,
    pub cross_reference: f64,
    pub correction_hygiene: f64,
    pub methodology_transparency: f64,
}

impl EvidenceAssessment {
    pub fn uniform(v: f64) -> Self {
        Self::from_array([v; 5])
    }

    pub fn from_array(a: [f64; 5]) -> Self {
        Self {
            consensus: a[0],
            verification: a[1],
            cross_reference: a[2],
            correction_hygiene: a[3],
            methodology_transparency: a[4],
        }
    }

    pub fn to_array(&self) -> [f64; 5] {
        [
            self.consensus,
            self.verification,
            self.cross_reference,
            self.correction_hygiene,
            self.methodology_transparency,
        ]
    }

    pub fn validate(&self) -> Result<(), CredibilityError> {
        const NAMES: [&str; 5] =
            ["consensus", "verification", "cross_reference", "correction_hygiene", "methodology_transparency"];
        for (name, v) in NAMES.into_iter().zip(self.to_array()) {
            check_unit(name, v)?;
        }
        Ok(())
    }
}

/// Stored with "higher = more credible" polarity throughout.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NarrativeAnalysis {
    pub fact_balance: f64,
    pub objectivity: f64,
    pub emotional_neutrality: f64,
    pub contextual_completeness: f64,
    pub framing_neutrality: f64,
}

impl NarrativeAnalysis {
    pub fn uniform(v: f64) -> Self {
        Self::from_array([v; 5])
    }

    pub fn from_array(a: [f64; 5]) -> Self {
        Self {
            fact_balance: a[0],
            objectivity: a[1],
            emotional_neutrality: a[2],
            contextual_completeness: a[3],
            framing_neutrality: a[4],
        }
    }

    pub fn to_array(&self) -> [f64; 5] {
        [
            self.fact_balance,
            self.objectivity,
            self.emotional_neutrality,
            self.contextual_completeness,
            self.framing_neutrality,
        ]
    }

    pub fn validate(&self) -> Result<(), CredibilityError> {
        const NAMES: [&str; 5] =
            ["fact_balance", "objectivity", "emotional_neutrality", "contextual_completeness", "framing_neutrality"];
        for (name, v) in NAMES.into_iter().zip(self.to_array()) {
            check_unit(name, v)?;
        }
        Ok(())
    }
}

/// Narrative signals as observed, where sensationalism, emotional language
/// and framing bias count against credibility.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RawNarrative {
    pub fact_balance: f64,
    pub sensationalism: f64,
    pub emotional_language: f64,
    pub contextual_completeness: f64,
    pub framing_bias: f64,
}

impl TryFrom<RawNarrative> for NarrativeAnalysis {
    type Error = CredibilityError;

    fn try_from(raw: RawNarrative) -> Result<Self, Self::Error> {
        Ok(Self {
            fact_balance: check_unit("fact_balance", raw.fact_balance)?,
            objectivity: 1.0 - check_unit("sensationalism", raw.sensationalism)?,
            emotional_neutrality: 1.0 - check_unit("emotional_language", raw.emotional_language)?,
            contextual_completeness: check_unit("contextual_completeness", raw.contextual_completeness)?,
            framing_neutrality: 1.0 - check_unit("framing_bias", raw.framing_bias)?,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProfileCoordinates {
    pub track_record: f64,
    pub expertise: f64,
    pub publication_pattern: f64,
    pub affiliation_neutrality: f64,
    pub correction_responsiveness: f64,
}

impl Default for ProfileCoordinates {
    fn default() -> Self {
        Self::uniform(0.5)
    }
}

impl ProfileCoordinates {
    pub fn uniform(v: f64) -> Self {
        Self::from_array([v; 5])
    }

    pub fn from_array(a: [f64; 5]) -> Self {
        Self {
            track_record: a[0],
            expertise: a[1],
            publication_pattern: a[2],
            affiliation_neutrality: a[3],
            correction_responsiveness: a[4],
        }
    }

    pub fn to_array(&self) -> [f64; 5] {
        [
            self.track_record,
            self.expertise,
            self.publication_pattern,
            self.affiliation_neutrality,
            self.correction_responsiveness,
        ]
    }

    pub fn mean(&self) -> f64 {
        self.to_array().iter().sum::<f64>() / 5.0
    }

    pub fn validate(&self) -> Result<(), CredibilityError> {
        const NAMES: [&str; 5] = [
            "track_record",
            "expertise",
            "publication_pattern",
            "affiliation_neutrality",
            "correction_responsiveness",
        ];
        for (name, v) in NAMES.into_iter().zip(self.to_array()) {
            check_unit(name, v)?;
        }
        Ok(())
    }

    /// One EWMA step toward `signal`: `old + alpha * (signal - old)`.
    pub fn smoothed_toward(&self, signal: &ProfileCoordinates, alpha: f64) -> ProfileCoordinates {
        let old = self.to_array();
        let target = signal.to_array();
        let mut next = [0.0; 5];
        for i in 0..5 {
            next[i] = clamp_unit(old[i] + alpha * (target[i] - old[i]));
        }
        ProfileCoordinates::from_array(next)
    }
}

/// Weights, smoothing factor and content share used by every score.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CredibilityConfig {
    pub evidence_weights: [f64; 5],
    pub narrative_weights: [f64; 5],
    /// EWMA factor for profile updates.
    pub smoothing: f64,
    /// Share of the content score in the combined score.
    pub content_weight: f64,
}

impl Default for CredibilityConfig {
    fn default() -> Self {
        Self { evidence_weights: [1.0; 5], narrative_weights: [1.0; 5], smoothing: 0.3, content_weight: 0.6 }
    }
}

impl CredibilityConfig {
    pub fn validate(&self) -> Result<(), CredibilityError> {
        let weights = self.evidence_weights.iter().chain(&self.narrative_weights);
        if weights.clone().any(|w| !w.is_finite() || *w < 0.0) || weights.sum::<f64>() <= 0.0 {
            return Err(CredibilityError::InvalidConfig("weights must be non-negative with a positive sum".into()));
        }
        if !(self.smoothing > 0.0 && self.smoothing <= 1.0) {
            return Err(CredibilityError::InvalidConfig("smoothing must lie in (0, 1]".into()));
        }
        if !(0.0..=1.0).contains(&self.content_weight) {
            return Err(CredibilityError::InvalidConfig("content weight must lie in [0, 1]".into()));
        }
        Ok(())
    }

    /// Weighted mean of the ten evidence and narrative components.
    pub fn evaluate_content(
        &self,
        evidence: &EvidenceAssessment,
        narrative: &NarrativeAnalysis,
    ) -> Result<f64, CredibilityError> {
        evidence.validate()?;
        narrative.validate()?;
        let pairs = self
            .evidence_weights
            .iter()
            .zip(evidence.to_array())
            .chain(self.narrative_weights.iter().zip(narrative.to_array()));
        let (weighted, total) = pairs.fold((0.0, 0.0), |(s, t), (w, x)| (s + w * x, t + w));
        Ok(clamp_unit(weighted / total))
    }

    pub fn combined(&self, content_score: f64, profile: &ProfileCoordinates) -> Result<f64, CredibilityError> {
        check_unit("content_score", content_score)?;
        profile.validate()?;
        let beta = self.content_weight;
        Ok(clamp_unit(beta * content_score + (1.0 - beta) * profile.mean()))
    }
}

/// Per-coordinate signal a report contributes to its source's profile:
/// track record follows the content score, expertise the verification and
/// methodology evidence, publication pattern methodology and fact balance,
/// affiliation neutrality the framing and objectivity readings, correction
/// responsiveness the correction hygiene.
pub fn profile_signal(
    content_score: f64,
    evidence: &EvidenceAssessment,
    narrative: &NarrativeAnalysis,
) -> ProfileCoordinates {
    ProfileCoordinates {
        track_record: content_score,
        expertise: (evidence.verification + evidence.methodology_transparency) / 2.0,
        publication_pattern: (evidence.methodology_transparency + narrative.fact_balance) / 2.0,
        affiliation_neutrality: (narrative.framing_neutrality + narrative.objectivity) / 2.0,
        correction_responsiveness: evidence.correction_hygiene,
    }
}
