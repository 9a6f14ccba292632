//! Deterministic query parsing: tokenize, then scan left to right taking
//! temporal phrases first and otherwise the longest taxonomy or region
//! phrase at each position.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::taxonomy::Taxonomy;
use super::QueryError;
use crate::ids::TaxonomyNodeId;
use crate::interval::{jan1, End, Interval};
use crate::region::RegionTable;

/// Two-letter codes that are ordinary English words or common acronyms.
/// They only match through a region name or alias, never as a bare code.
const AMBIGUOUS_CODES: &[&str] = &[
    "AI", "AM", "AR", "AS", "BE", "CC", "CV", "GO", "ID", "IN", "IS", "IT", "ME", "ML", "MY", "NO",
    "PR", "PS", "SO", "TO", "TV", "UM",
];

const STOPWORDS: &[&str] = &[
    "a", "about", "across", "an", "and", "any", "are", "as", "associated", "at", "be", "between",
    "by", "can", "could", "did", "do", "does", "for", "from", "how", "in", "into", "is", "it", "its",
    "me", "of", "on", "or", "should", "tell", "that", "the", "their", "there", "these", "this", "to",
    "was", "were", "what", "when", "where", "which", "who", "why", "will", "with", "would",
];

#[derive(Debug, Clone, PartialEq, Eq)]
pub(crate) struct Token {
    pub text: String,
    pub upper: bool,
}

/// Lowercase, punctuation-stripped tokens. Apostrophes vanish; hyphens
/// inside a token survive so `post-2020` stays one token.
pub(crate) fn tokenize(text: &str) -> Vec<Token> {
    let mut tokens = Vec::new();
    let mut current = String::new();
    let flush = |current: &mut String, tokens: &mut Vec<Token>| {
        let trimmed = current.trim_matches('-');
        if !trimmed.is_empty() {
            let upper = trimmed.chars().any(char::is_alphabetic)
                && trimmed.chars().all(|c| !c.is_alphabetic() || c.is_uppercase());
            tokens.push(Token { text: trimmed.to_lowercase(), upper });
        }
        current.clear();
    };
    for c in text.chars() {
        if c.is_alphanumeric() || c == '-' {
            current.push(c);
        } else if c == '\'' || c == '\u{2019}' {
            continue;
        } else {
            flush(&mut current, &mut tokens);
        }
    }
    flush(&mut current, &mut tokens);
    tokens
}

pub(crate) fn phrase_key(text: &str) -> String {
    tokenize(text).into_iter().map(|t| t.text).collect::<Vec<_>>().join(" ")
}

pub fn is_stopword(term: &str) -> bool {
    STOPWORDS.binary_search(&term).is_ok()
}

/// Half-open token range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Span {
    pub start: usize,
    pub end: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TermMatch {
    /// Canonical label of the matched node.
    pub label: String,
    pub node: TaxonomyNodeId,
    pub span: Span,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParsedQuery {
    pub raw: String,
    /// Tokens joined by single spaces; matched region codes upper-case.
    pub normalized: String,
    pub object_terms: Vec<TermMatch>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub temporal_hint: Option<Interval>,
    #[serde(default)]
    pub region_hints: BTreeSet<String>,
    #[serde(default)]
    pub residual_terms: Vec<String>,
}

impl ParsedQuery {
    /// Equality ignoring the raw text.
    pub fn same_structure(&self, other: &ParsedQuery) -> bool {
        self.normalized == other.normalized
            && self.object_terms == other.object_terms
            && self.temporal_hint == other.temporal_hint
            && self.region_hints == other.region_hints
            && self.residual_terms == other.residual_terms
    }

    /// Residual terms that carry meaning, in query order.
    pub fn content_terms(&self) -> impl Iterator<Item = &str> {
        self.residual_terms.iter().map(String::as_str).filter(|t| !is_stopword(t))
    }
}

fn year_of(token: &str) -> Option<i32> {
    (token.len() == 4 && token.bytes().all(|b| b.is_ascii_digit()))
        .then(|| token.parse().ok())
        .flatten()
        .filter(|y| (1000..=2999).contains(y))
}

fn ordinal_number(token: &str) -> Option<i32> {
    let digits = token.trim_end_matches(|c: char| c.is_ascii_alphabetic());
    let suffix = &token[digits.len()..];
    (matches!(suffix, "st" | "nd" | "rd" | "th") && !digits.is_empty())
        .then(|| digits.parse().ok())
        .flatten()
}

fn century(n: i32) -> Option<Interval> {
    if !(1..=29).contains(&n) {
        return None;
    }
    let start = jan1((n - 1) * 100 + 1).ok()?;
    // The current century stays open-ended.
    if n >= 21 {
        Some(Interval::ongoing_from(start))
    } else {
        Interval::new(start, End::Date(jan1(n * 100 + 1).ok()?)).ok()
    }
}

fn before(year: i32) -> Option<Interval> {
    Interval::new(jan1(1).ok()?, End::Date(jan1(year).ok()?)).ok()
}

/// Recognises a temporal phrase at `i`; returns the interval and the number
/// of tokens it spans.
fn temporal_at(tokens: &[Token], i: usize) -> Option<(Interval, usize)> {
    let tok = tokens[i].text.as_str();
    let next = tokens.get(i + 1).map(|t| t.text.as_str());
    if let Some(n) = ordinal_number(tok) {
        if next == Some("century") {
            return century(n).map(|iv| (iv, 2));
        }
    }
    if let Some(n) = tok.strip_suffix("-century").and_then(ordinal_number) {
        return century(n).map(|iv| (iv, 1));
    }
    for (prefix, after) in [("post-", true), ("pre-", false)] {
        if let Some(y) = tok.strip_prefix(prefix).and_then(year_of) {
            let iv = if after { jan1(y + 1).ok().map(Interval::ongoing_from) } else { before(y) };
            return iv.map(|iv| (iv, 1));
        }
    }
    if let Some(y) = next.and_then(year_of) {
        let iv = match tok {
            "post" | "after" => jan1(y + 1).ok().map(Interval::ongoing_from),
            "since" => jan1(y).ok().map(Interval::ongoing_from),
            "before" | "pre" => before(y),
            _ => None,
        };
        if let Some(iv) = iv {
            return Some((iv, 2));
        }
    }
    if let Some(y) = tok.strip_suffix('s').and_then(year_of).filter(|y| y % 10 == 0) {
        return Interval::years(y, y + 10).ok().map(|iv| (iv, 1));
    }
    year_of(tok).and_then(|y| Interval::year(y).ok()).map(|iv| (iv, 1))
}

struct RegionLexicon {
    phrases: BTreeMap<String, String>,
    longest: usize,
}

impl RegionLexicon {
    fn new(regions: &RegionTable) -> Self {
        let mut phrases = BTreeMap::new();
        for r in regions.iter() {
            for name in std::iter::once(&r.name).chain(&r.aliases) {
                let key = phrase_key(name);
                if !key.is_empty() {
                    phrases.entry(key).or_insert_with(|| r.code.clone());
                }
            }
        }
        let longest = phrases.keys().map(|k| k.split(' ').count()).max().unwrap_or(0);
        Self { phrases, longest }
    }
}

pub fn parse_query(text: &str, taxonomy: &Taxonomy, regions: &RegionTable) -> Result<ParsedQuery, QueryError> {
    let tokens = tokenize(text);
    if tokens.is_empty() {
        return Err(QueryError::EmptyQuery);
    }
    let lexicon = RegionLexicon::new(regions);
    let longest = taxonomy.longest_phrase().max(lexicon.longest).max(1);

    let mut rendered: Vec<String> = tokens.iter().map(|t| t.text.clone()).collect();
    let mut parsed = ParsedQuery {
        raw: text.to_owned(),
        normalized: String::new(),
        object_terms: Vec::new(),
        temporal_hint: None,
        region_hints: BTreeSet::new(),
        residual_terms: Vec::new(),
    };

    let mut i = 0;
    'scan: while i < tokens.len() {
        if let Some((interval, len)) = temporal_at(&tokens, i) {
            parsed.temporal_hint = match parsed.temporal_hint {
                None => Some(interval),
                Some(first) => Some(first.intersect(&interval).unwrap_or(first)),
            };
            i += len;
            continue;
        }
        for len in (1..=longest.min(tokens.len() - i)).rev() {
            let key = tokens[i..i + len].iter().map(|t| t.text.as_str()).collect::<Vec<_>>().join(" ");
            if let Some(node) = taxonomy.lookup_phrase(&key) {
                parsed.object_terms.push(TermMatch {
                    label: node.label.clone(),
                    node: node.id.clone(),
                    span: Span { start: i, end: i + len },
                });
                i += len;
                continue 'scan;
            }
            if let Some(code) = lexicon.phrases.get(&key) {
                if key == code.to_lowercase() {
                    rendered[i] = code.clone();
                }
                parsed.region_hints.insert(code.clone());
                i += len;
                continue 'scan;
            }
        }
        let tok = &tokens[i];
        let code = tok.text.to_uppercase();
        if tok.upper && regions.contains_code(&code) && !AMBIGUOUS_CODES.contains(&code.as_str()) {
            parsed.region_hints.insert(code.clone());
            rendered[i] = code;
        } else {
            parsed.residual_terms.push(tok.text.clone());
        }
        i += 1;
    }
    parsed.normalized = rendered.join(" ");
    Ok(parsed)
}
