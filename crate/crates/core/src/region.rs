//! Store-level region vocabulary: ISO 3166-1 alpha-2 countries plus named
//! macro-regions that expand to member sets for containment tests.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

pub type RegionSet = BTreeSet<String>;

const ISO_3166: &str = include_str!("../data/iso3166.tsv");

pub const EU_MEMBERS: [&str; 27] = [
    "AT", "BE", "BG", "CY", "CZ", "DE", "DK", "EE", "ES", "FI", "FR", "GR", "HR", "HU", "IE", "IT",
    "LT", "LU", "LV", "MT", "NL", "PL", "PT", "RO", "SE", "SI", "SK",
];

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Region {
    pub code: String,
    pub name: String,
    /// Phrase used when the region appears in a derived title ("the EU").
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<String>,
    /// Member codes; empty for atomic regions.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub members: Vec<String>,
    /// Extra names recognised in free-text queries.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub aliases: Vec<String>,
}

impl Region {
    pub fn atomic(code: &str, name: &str) -> Self {
        Self {
            code: code.to_owned(),
            name: name.to_owned(),
            label: None,
            members: Vec::new(),
            aliases: Vec::new(),
        }
    }

    pub fn title_label(&self) -> &str {
        self.label.as_deref().unwrap_or(&self.name)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RegionTable {
    regions: BTreeMap<String, Region>,
}

impl RegionTable {
    pub fn new() -> Self {
        Self::default()
    }

    /// Every ISO 3166-1 alpha-2 country plus the `EU` macro-region.
    pub fn standard() -> Self {
        let mut table = Self::new();
        for line in ISO_3166.lines().filter(|l| !l.trim().is_empty()) {
            let (code, name) = line.split_once('\t').expect("iso table is tab separated");
            table.insert(Region::atomic(code, name));
        }
        table.insert(Region {
            code: "EU".into(),
            name: "European Union".into(),
            label: Some("the EU".into()),
            members: EU_MEMBERS.iter().map(|c| c.to_string()).collect(),
            aliases: vec!["european union".into(), "europe".into(), "eu".into()],
        });
        if let Some(us) = table.regions.get_mut("US") {
            us.label = Some("the US".into());
            us.aliases = vec!["united states of america".into(), "usa".into(), "america".into()];
        }
        if let Some(gb) = table.regions.get_mut("GB") {
            gb.label = Some("the UK".into());
            gb.aliases = vec!["uk".into(), "britain".into(), "great britain".into()];
        }
        table
    }

    pub fn insert(&mut self, region: Region) {
        self.regions.insert(region.code.clone(), region);
    }

    pub fn get(&self, code: &str) -> Option<&Region> {
        self.regions.get(code)
    }

    pub fn contains_code(&self, code: &str) -> bool {
        self.regions.contains_key(code)
    }

    pub fn iter(&self) -> impl Iterator<Item = &Region> {
        self.regions.values()
    }

    pub fn len(&self) -> usize {
        self.regions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regions.is_empty()
    }

    /// Atomic member codes of `code`; an atomic region expands to itself.
    pub fn expand(&self, code: &str) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        let mut stack = vec![code.to_owned()];
        let mut seen = BTreeSet::new();
        while let Some(c) = stack.pop() {
            if !seen.insert(c.clone()) {
                continue;
            }
            match self.regions.get(&c) {
                Some(r) if !r.members.is_empty() => stack.extend(r.members.iter().cloned()),
                _ => {
                    out.insert(c);
                }
            }
        }
        out
    }

    pub fn expand_set(&self, set: &RegionSet) -> BTreeSet<String> {
        set.iter().flat_map(|c| self.expand(c)).collect()
    }

    /// `inner ⊆ outer`, where `None` means global.
    pub fn set_within(&self, inner: Option<&RegionSet>, outer: Option<&RegionSet>) -> bool {
        match (inner, outer) {
            (_, None) => true,
            (None, Some(_)) => false,
            (Some(inner), Some(outer)) => self.expand_set(inner).is_subset(&self.expand_set(outer)),
        }
    }

    pub fn overlaps(&self, a: Option<&RegionSet>, b: Option<&RegionSet>) -> bool {
        match (a, b) {
            (None, _) | (_, None) => true,
            (Some(a), Some(b)) => {
                let b = self.expand_set(b);
                self.expand_set(a).iter().any(|c| b.contains(c))
            }
        }
    }

    /// Intersection of two region restrictions, expressed with the coarsest
    /// codes that lie entirely inside both sides. `None` is global; an empty
    /// result means the regions are disjoint.
    pub fn intersect(&self, a: Option<&RegionSet>, b: Option<&RegionSet>) -> Option<RegionSet> {
        let (a, b) = match (a, b) {
            (None, None) => return None,
            (Some(x), None) | (None, Some(x)) => return Some(self.minimize(x.clone())),
            (Some(a), Some(b)) => (a, b),
        };
        let ea = self.expand_set(a);
        let eb = self.expand_set(b);
        let mut kept: RegionSet = a
            .iter()
            .filter(|c| self.expand(c).is_subset(&eb))
            .chain(b.iter().filter(|c| self.expand(c).is_subset(&ea)))
            .cloned()
            .collect();
        let covered = self.expand_set(&kept);
        kept.extend(ea.intersection(&eb).filter(|c| !covered.contains(*c)).cloned());
        Some(self.minimize(kept))
    }

    /// Drops codes already covered by another code in the set.
    fn minimize(&self, set: RegionSet) -> RegionSet {
        let expanded: Vec<(String, BTreeSet<String>)> =
            set.iter().map(|c| (c.clone(), self.expand(c))).collect();
        expanded
            .iter()
            .filter(|(code, mine)| {
                !expanded.iter().any(|(other, theirs)| {
                    other != code
                        && mine.is_subset(theirs)
                        && (mine.len() < theirs.len() || other < code)
                })
            })
            .map(|(code, _)| code.clone())
            .collect()
    }

    /// "the EU", "France and Germany", "A, B and C".
    pub fn render_set(&self, set: &RegionSet) -> String {
        let labels: Vec<&str> = set
            .iter()
            .map(|c| self.get(c).map(Region::title_label).unwrap_or(c.as_str()))
            .collect();
        match labels.as_slice() {
            [] => String::new(),
            [one] => (*one).to_owned(),
            [init @ .., last] => format!("{} and {last}", init.join(", ")),
        }
    }

    /// Checks member references and rejects macro-region cycles.
    pub fn validate(&self) -> Result<(), String> {
        for region in self.regions.values() {
            if region.code.trim().is_empty() || region.name.trim().is_empty() {
                return Err(format!("region `{}` has an empty code or name", region.code));
            }
            for m in &region.members {
                if !self.regions.contains_key(m) {
                    return Err(format!("region `{}` lists unknown member `{m}`", region.code));
                }
            }
            if self.reaches(&region.code, &region.code) {
                return Err(format!("region `{}` contains itself", region.code));
            }
        }
        Ok(())
    }

    fn reaches(&self, from: &str, target: &str) -> bool {
        let mut stack: Vec<&str> = self.regions[from].members.iter().map(String::as_str).collect();
        let mut seen = BTreeSet::new();
        while let Some(c) = stack.pop() {
            if c == target {
                return true;
            }
            if seen.insert(c) {
                if let Some(r) = self.regions.get(c) {
                    stack.extend(r.members.iter().map(String::as_str));
                }
            }
        }
        false
    }
}

pub fn set_of<I: IntoIterator<Item = S>, S: Into<String>>(codes: I) -> RegionSet {
    codes.into_iter().map(Into::into).collect()
}
