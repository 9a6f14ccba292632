use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::parse::phrase_key;
use super::QueryError;
use crate::ids::{slugify, EntryId, TaxonomyNodeId};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TaxonomyNode {
    pub id: TaxonomyNodeId,
    pub label: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub synonyms: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub parent: Option<TaxonomyNodeId>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entry: Option<EntryId>,
}

impl TaxonomyNode {
    pub fn new(id: &str, label: &str) -> Self {
        Self { id: TaxonomyNodeId::new(id), label: label.to_owned(), synonyms: Vec::new(), parent: None, entry: None }
    }

    pub fn synonyms(mut self, synonyms: &[&str]) -> Self {
        self.synonyms = synonyms.iter().map(|s| s.to_string()).collect();
        self
    }

    pub fn under(mut self, parent: &str) -> Self {
        self.parent = Some(TaxonomyNodeId::new(parent));
        self
    }

    pub fn linked(mut self, entry: &str) -> Self {
        self.entry = Some(EntryId::new(entry));
        self
    }

    fn phrases(&self) -> impl Iterator<Item = &String> {
        std::iter::once(&self.label).chain(&self.synonyms)
    }
}

/// Concept tree with a phrase index over canonical labels and synonyms.
#[derive(Debug, Clone, Default)]
pub struct Taxonomy {
    nodes: BTreeMap<TaxonomyNodeId, TaxonomyNode>,
    phrases: BTreeMap<String, TaxonomyNodeId>,
    longest_phrase: usize,
}

impl Taxonomy {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_nodes(nodes: impl IntoIterator<Item = TaxonomyNode>) -> Result<Self, QueryError> {
        let mut t = Self::new();
        for node in nodes {
            t.insert_unchecked(node)?;
        }
        t.validate_tree()?;
        Ok(t)
    }

    fn insert_unchecked(&mut self, node: TaxonomyNode) -> Result<(), QueryError> {
        if node.id.as_str().trim().is_empty() || node.label.trim().is_empty() {
            return Err(QueryError::InvalidTaxonomy("node id and label must be non-empty".into()));
        }
        if self.nodes.contains_key(&node.id) {
            return Err(QueryError::InvalidTaxonomy(format!("duplicate node `{}`", node.id)));
        }
        let mut keys = BTreeSet::new();
        for phrase in node.phrases() {
            let key = phrase_key(phrase);
            if key.is_empty() {
                return Err(QueryError::InvalidTaxonomy(format!("node `{}` has an empty label", node.id)));
            }
            if let Some(owner) = self.phrases.get(&key) {
                return Err(QueryError::InvalidTaxonomy(format!(
                    "label `{phrase}` of `{}` collides with `{owner}`",
                    node.id
                )));
            }
            keys.insert(key);
        }
        for key in keys {
            self.longest_phrase = self.longest_phrase.max(key.split(' ').count());
            self.phrases.insert(key, node.id.clone());
        }
        self.nodes.insert(node.id.clone(), node);
        Ok(())
    }

    fn validate_tree(&self) -> Result<(), QueryError> {
        for node in self.nodes.values() {
            if let Some(parent) = &node.parent {
                if !self.nodes.contains_key(parent) {
                    return Err(QueryError::InvalidTaxonomy(format!(
                        "node `{}` has unknown parent `{parent}`",
                        node.id
                    )));
                }
            }
            let mut seen = BTreeSet::new();
            let mut cur = Some(&node.id);
            while let Some(id) = cur {
                if !seen.insert(id) {
                    return Err(QueryError::InvalidTaxonomy(format!("cycle through node `{}`", node.id)));
                }
                cur = self.nodes[id].parent.as_ref();
            }
        }
        Ok(())
    }

    /// Adds a node; the tree is re-checked and nothing changes on error.
    pub fn insert(&mut self, node: TaxonomyNode) -> Result<(), QueryError> {
        let mut next = self.clone();
        next.insert_unchecked(node)?;
        next.validate_tree()?;
        *self = next;
        Ok(())
    }

    pub fn node(&self, id: &TaxonomyNodeId) -> Option<&TaxonomyNode> {
        self.nodes.get(id)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &TaxonomyNode> {
        self.nodes.values()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub(crate) fn lookup_phrase(&self, key: &str) -> Option<&TaxonomyNode> {
        self.phrases.get(key).map(|id| &self.nodes[id])
    }

    pub(crate) fn longest_phrase(&self) -> usize {
        self.longest_phrase
    }

    pub fn find_label(&self, label: &str) -> Option<&TaxonomyNode> {
        self.lookup_phrase(&phrase_key(label))
    }

    /// Number of ancestors; roots have depth 0.
    pub fn depth(&self, id: &TaxonomyNodeId) -> usize {
        let mut depth = 0;
        let mut cur = self.nodes.get(id).and_then(|n| n.parent.as_ref());
        while let Some(p) = cur {
            depth += 1;
            cur = self.nodes.get(p).and_then(|n| n.parent.as_ref());
        }
        depth
    }

    pub fn path_to_root(&self, id: &TaxonomyNodeId) -> Vec<TaxonomyNodeId> {
        let mut out = Vec::new();
        let mut cur = self.nodes.get(id);
        while let Some(n) = cur {
            out.push(n.id.clone());
            cur = n.parent.as_ref().and_then(|p| self.nodes.get(p));
        }
        out
    }

    pub(crate) fn link(&mut self, id: &TaxonomyNodeId, entry: EntryId) {
        if let Some(n) = self.nodes.get_mut(id) {
            n.entry = Some(entry);
        }
    }

    pub(crate) fn fresh_id(&self, label: &str) -> TaxonomyNodeId {
        let base = format!("tx-{}", slugify(label));
        if !self.nodes.contains_key(base.as_str()) {
            return TaxonomyNodeId::new(base);
        }
        (2..)
            .map(|n| format!("{base}-{n}"))
            .find(|c| !self.nodes.contains_key(c.as_str()))
            .map(TaxonomyNodeId::new)
            .expect("unbounded suffix search")
    }
}
