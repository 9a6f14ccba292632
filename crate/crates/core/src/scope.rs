//! The three-dimensional scope of an entry (logical facets, time, regions)
//! and the constraints that narrow it.
//!
//! Each dimension is a restriction: an empty facet set, a missing interval
//! or a missing region set leaves that dimension unrestricted.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::interval::Interval;
use crate::region::{RegionSet, RegionTable};

pub type FacetSet = BTreeSet<String>;

#[derive(Debug, Clone, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Scope {
    #[serde(default)]
    pub facets: FacetSet,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temporal: Option<Interval>,
    /// `None` = global.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regions: Option<RegionSet>,
}

impl Scope {
    pub fn global() -> Self {
        Self::default()
    }

    pub fn with_facets<I: IntoIterator<Item = S>, S: Into<String>>(mut self, facets: I) -> Self {
        self.facets = facets.into_iter().map(Into::into).collect();
        self
    }

    pub fn with_temporal(mut self, interval: Interval) -> Self {
        self.temporal = Some(interval);
        self
    }

    pub fn with_regions<I: IntoIterator<Item = S>, S: Into<String>>(mut self, regions: I) -> Self {
        self.regions = Some(regions.into_iter().map(Into::into).collect());
        self
    }

    pub fn is_unrestricted(&self) -> bool {
        self.facets.is_empty() && self.temporal.is_none() && self.regions.is_none()
    }

    pub fn validate(&self, regions: &RegionTable) -> Result<(), String> {
        if self.facets.iter().any(|f| f.trim().is_empty()) {
            return Err("facet labels must be non-empty".into());
        }
        if let Some(set) = &self.regions {
            if set.is_empty() {
                return Err("region set must be absent (global) or non-empty".into());
            }
            if let Some(bad) = set.iter().find(|c| !regions.contains_code(c)) {
                return Err(format!("unknown region code `{bad}`"));
            }
        }
        Ok(())
    }

    /// Dimension-wise `self ⊆ outer`.
    pub fn within(&self, outer: &Scope, regions: &RegionTable) -> bool {
        facets_within(&self.facets, &outer.facets)
            && match (&self.temporal, &outer.temporal) {
                (_, None) => true,
                (None, Some(_)) => false,
                (Some(i), Some(o)) => o.contains(i),
            }
            && regions.set_within(self.regions.as_ref(), outer.regions.as_ref())
    }

    /// Only the dimensions `self` actually restricts are checked; the rest
    /// are inherited from `outer`.
    pub fn restrictions_within(&self, outer: &Scope, regions: &RegionTable) -> bool {
        (self.facets.is_empty() || facets_within(&self.facets, &outer.facets))
            && match (&self.temporal, &outer.temporal) {
                (None, _) | (_, None) => true,
                (Some(i), Some(o)) => o.contains(i),
            }
            && (self.regions.is_none()
                || regions.set_within(self.regions.as_ref(), outer.regions.as_ref()))
    }

    /// Scope obtained by applying `self`'s restrictions on top of `outer`.
    pub fn inherit(&self, outer: &Scope) -> Scope {
        Scope {
            facets: if self.facets.is_empty() { outer.facets.clone() } else { self.facets.clone() },
            temporal: self.temporal.or(outer.temporal),
            regions: self.regions.clone().or_else(|| outer.regions.clone()),
        }
    }

    pub fn overlaps(&self, other: &Scope, regions: &RegionTable) -> bool {
        facets_overlap(&self.facets, &other.facets)
            && match (&self.temporal, &other.temporal) {
                (Some(a), Some(b)) => a.overlaps(b),
                _ => true,
            }
            && regions.overlaps(self.regions.as_ref(), other.regions.as_ref())
    }

    /// `None` when any dimension becomes empty.
    pub fn intersect(&self, constraint: &DimensionalConstraint, regions: &RegionTable) -> Option<Scope> {
        let facets = match &constraint.facets {
            None => self.facets.clone(),
            Some(c) if self.facets.is_empty() => c.clone(),
            Some(c) => {
                let f: FacetSet = self.facets.intersection(c).cloned().collect();
                if f.is_empty() {
                    return None;
                }
                f
            }
        };
        let temporal = match (&self.temporal, &constraint.temporal) {
            (t, None) => *t,
            (None, c) => *c,
            (Some(a), Some(b)) => Some(a.intersect(b)?),
        };
        let region_set = match &constraint.regions {
            None => self.regions.clone(),
            Some(c) => {
                let r = regions.intersect(self.regions.as_ref(), Some(c));
                if r.as_ref().is_some_and(BTreeSet::is_empty) {
                    return None;
                }
                r
            }
        };
        Some(Scope { facets, temporal, regions: region_set })
    }

    /// Restriction of `self` (a block's own tags) to `outer`; dimensions
    /// `self` leaves open stay open.
    pub(crate) fn narrow_restrictions(&self, outer: &Scope, regions: &RegionTable) -> Scope {
        let facets = if self.facets.is_empty() || outer.facets.is_empty() {
            self.facets.clone()
        } else {
            self.facets.intersection(&outer.facets).cloned().collect()
        };
        let temporal = match (&self.temporal, &outer.temporal) {
            (Some(a), Some(b)) => a.intersect(b).or(Some(*a)),
            (t, _) => *t,
        };
        let region_set = match &self.regions {
            Some(r) => regions.intersect(Some(r), outer.regions.as_ref()),
            None => None,
        };
        Scope { facets, temporal, regions: region_set }
    }
}

fn facets_within(inner: &FacetSet, outer: &FacetSet) -> bool {
    outer.is_empty() || (!inner.is_empty() && inner.is_subset(outer))
}

fn facets_overlap(a: &FacetSet, b: &FacetSet) -> bool {
    a.is_empty() || b.is_empty() || a.intersection(b).next().is_some()
}

/// A narrowing filter. Sets are ordered, so equal constraints compare and
/// serialize equal.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DimensionalConstraint {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temporal: Option<Interval>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regions: Option<RegionSet>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub facets: Option<FacetSet>,
}

impl DimensionalConstraint {
    pub fn temporal(interval: Interval) -> Self {
        Self { temporal: Some(interval), regions: None, facets: None }
    }

    pub fn regions<I: IntoIterator<Item = S>, S: Into<String>>(codes: I) -> Self {
        Self { temporal: None, regions: Some(codes.into_iter().map(Into::into).collect()), facets: None }
    }

    pub fn facets<I: IntoIterator<Item = S>, S: Into<String>>(facets: I) -> Self {
        Self { temporal: None, regions: None, facets: Some(facets.into_iter().map(Into::into).collect()) }
    }

    pub fn and_temporal(mut self, interval: Interval) -> Self {
        self.temporal = Some(interval);
        self
    }

    pub fn and_regions<I: IntoIterator<Item = S>, S: Into<String>>(mut self, codes: I) -> Self {
        self.regions = Some(codes.into_iter().map(Into::into).collect());
        self
    }

    /// The constraint that reproduces a whole scope.
    pub fn from_scope(scope: &Scope) -> Option<Self> {
        let c = Self {
            temporal: scope.temporal,
            regions: scope.regions.clone(),
            facets: (!scope.facets.is_empty()).then(|| scope.facets.clone()),
        };
        c.validate_shape().ok().map(|_| c)
    }

    pub fn as_scope(&self) -> Scope {
        Scope {
            facets: self.facets.clone().unwrap_or_default(),
            temporal: self.temporal,
            regions: self.regions.clone(),
        }
    }

    pub(crate) fn validate_shape(&self) -> Result<(), String> {
        if self.temporal.is_none() && self.regions.is_none() && self.facets.is_none() {
            return Err("constraint must restrict at least one dimension".into());
        }
        if self.regions.as_ref().is_some_and(BTreeSet::is_empty) {
            return Err("constraint region set is empty".into());
        }
        if self.facets.as_ref().is_some_and(|f| f.is_empty() || f.iter().any(|x| x.trim().is_empty())) {
            return Err("constraint facet set is empty".into());
        }
        Ok(())
    }

    pub fn validate(&self, regions: &RegionTable) -> Result<(), String> {
        self.validate_shape()?;
        if let Some(bad) = self.regions.iter().flatten().find(|c| !regions.contains_code(c)) {
            return Err(format!("unknown region code `{bad}`"));
        }
        Ok(())
    }

    /// Suffix appended to the base title: regions, then time, then facets.
    pub fn render(&self, regions: &RegionTable) -> String {
        let mut parts = Vec::new();
        if let Some(r) = &self.regions {
            parts.push(format!("in {}", regions.render_set(r)));
        }
        if let Some(t) = &self.temporal {
            parts.push(t.title_fragment());
        }
        if let Some(f) = &self.facets {
            parts.push(format!("on {}", f.iter().cloned().collect::<Vec<_>>().join(", ")));
        }
        parts.join(" ")
    }
}
