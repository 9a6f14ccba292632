//! The shipped seed corpus: the AI Safety walkthrough content.
//!
//! [`build_seed`] constructs it through the public API; the canonical
//! export lives in `corpus/seed.ndjson` and the two are kept identical by
//! a test.

use chrono::{DateTime, Duration, NaiveDate, Utc};

use crate::canvas::Canvas;
use crate::credibility::{ContentRef, EvidenceAssessment, NarrativeAnalysis, NewReport, Source, SourceKind};
use crate::graph::{ContentBlock, NewEntry};
use crate::ids::EntryId;
use crate::persist::{self, PersistError};
use crate::query::{self, CuratedQuestion, TaxonomyNode};
use crate::scope::Scope;

pub const SEED_NDJSON: &str = include_str!("../corpus/seed.ndjson");

pub const ALEX_QUERY: &str =
    "What are the global risks and governance challenges associated with AI safety in the 21st century?";

pub fn seed_time() -> DateTime<Utc> {
    DateTime::parse_from_rfc3339("2024-01-01T00:00:00Z").expect("valid literal").with_timezone(&Utc)
}

fn date(y: i32, m: u32, d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, d).expect("valid literal date")
}

/// (block id, date, text, region tag, citations)
pub type Milestone = (&'static str, (i32, u32, u32), &'static str, Option<&'static str>, &'static [&'static str]);

pub const MILESTONES: [Milestone; 11] = [
    ("m-2013-superintelligence", (2013, 7, 1), "Nick Bostrom's \"Superintelligence\" published", None, &["peer-reviewed"]),
    ("m-2015-open-letter", (2015, 1, 10), "Open Letter on AI Safety signed by prominent researchers", None, &["fli", "stuart-russell"]),
    ("m-2015-openai", (2015, 12, 11), "OpenAI founded with explicit focus on beneficial AI", Some("US"), &["peer-reviewed"]),
    ("m-2016-alphago", (2016, 3, 15), "AlphaGo beats Lee Sedol", Some("KR"), &["deepmind"]),
    ("m-2017-asilomar", (2017, 1, 6), "Asilomar AI Principles established", Some("US"), &["fli"]),
    ("m-2018-google-principles", (2018, 6, 7), "Google's AI Principles published", Some("US"), &["peer-reviewed"]),
    ("m-2019-gpt2", (2019, 2, 14), "GPT-2 release delayed due to misuse concerns", None, &["peer-reviewed", "dario-amodei"]),
    ("m-2022-chatgpt", (2022, 11, 30), "ChatGPT release sparks widespread AI safety discussions", None, &["peer-reviewed"]),
    ("m-2023-pause-letter", (2023, 3, 22), "\"AI Pause Letter\" signed by tech leaders", None, &["fli"]),
    ("m-2023-constitutional-ai", (2023, 5, 9), "Anthropic's Constitutional AI approach", None, &["dario-amodei"]),
    ("m-2023-bletchley", (2023, 11, 1), "AI Safety Summit at Bletchley Park", Some("GB"), &["peer-reviewed"]),
];

/// (region, text, citations)
pub const REGIONAL_VIEWS: [(&str, &str, &[&str]); 3] = [
    ("US", "Corporate-led initiatives", &["peer-reviewed"]),
    ("EU", "Regulation-first strategies", &["peer-reviewed", "fli"]),
    ("CN", "State-aligned frameworks", &["peer-reviewed"]),
];

pub const SUB_CONCEPTS: [&str; 3] = ["Value Alignment", "Robustness", "Ethics and Governance"];

/// (id, name, kind, evidence, narrative)
type SeedSource = (&'static str, &'static str, SourceKind, [f64; 5], [f64; 5]);

const SOURCES: [SeedSource; 6] = [
    ("fli", "Future of Life Institute", SourceKind::Institution, [0.85, 0.8, 0.85, 0.75, 0.8], [0.8, 0.75, 0.8, 0.8, 0.75]),
    ("deepmind", "DeepMind", SourceKind::Institution, [0.8, 0.9, 0.8, 0.7, 0.75], [0.8, 0.8, 0.85, 0.75, 0.8]),
    ("stuart-russell", "Stuart Russell", SourceKind::Individual, [0.85, 0.8, 0.85, 0.8, 0.85], [0.85, 0.8, 0.8, 0.8, 0.8]),
    ("dario-amodei", "Dario Amodei", SourceKind::Individual, [0.75, 0.75, 0.7, 0.75, 0.8], [0.75, 0.7, 0.8, 0.75, 0.7]),
    ("peer-reviewed", "Peer-reviewed articles", SourceKind::Publication, [0.9, 0.9, 0.9, 0.85, 0.9], [0.9, 0.85, 0.9, 0.85, 0.85]),
    ("daily-buzz", "The Daily Buzz", SourceKind::Publication, [0.2, 0.15, 0.2, 0.1, 0.1], [0.2, 0.15, 0.1, 0.25, 0.2]),
];

fn cite(mut block: ContentBlock, sources: &[&str]) -> ContentBlock {
    for s in sources {
        block = block.cite(*s);
    }
    block
}

fn concept(id: &str, heading: &str, text: &str, sources: &[&str]) -> ContentBlock {
    cite(ContentBlock::concept(id, heading, text), sources)
}

fn ai_safety() -> NewEntry {
    let mut blocks = vec![
        concept(
            "c-value-alignment",
            "Value Alignment",
            "Ensuring AI systems pursue goals that match human values and intentions.",
            &["stuart-russell", "dario-amodei"],
        ),
        concept(
            "c-robustness",
            "Robustness",
            "Keeping AI systems reliable under distribution shift, adversarial pressure and misuse.",
            &["deepmind", "peer-reviewed"],
        ),
        concept(
            "c-ethics-and-governance",
            "Ethics and Governance",
            "Norms, institutions and regulation that shape how AI is built and deployed.",
            &["fli", "peer-reviewed"],
        ),
    ];
    for (id, (y, m, d), text, region, sources) in MILESTONES {
        let mut b = cite(ContentBlock::milestone(id, date(y, m, d), text), sources);
        if let Some(r) = region {
            b = b.tagged(Scope::global().with_regions([r]));
        }
        blocks.push(b);
    }
    for (region, text, sources) in REGIONAL_VIEWS {
        blocks.push(cite(ContentBlock::regional(&format!("r-{}", region.to_lowercase()), region, text), sources));
    }
    blocks.push(cite(
        ContentBlock::narrative("n-takeover", "Superintelligent machines will wipe out humanity within five years."),
        &["daily-buzz"],
    ));
    NewEntry::new("AI Safety")
        .with_id("ai-safety")
        .summary(
            "The study and practice of keeping artificial intelligence systems safe: aligned with human \
             values, robust in deployment and governed responsibly.",
        )
        .blocks(blocks)
}

fn children() -> Vec<NewEntry> {
    vec![
        NewEntry::new("Value Alignment")
            .with_id("value-alignment")
            .summary("How to make AI systems pursue the goals their designers and users actually intend.")
            .block(concept(
                "c-reward-specification",
                "Reward Specification",
                "Objectives written down for a system rarely capture everything people care about.",
                &["stuart-russell"],
            ))
            .block(concept(
                "c-constitutional-training",
                "Training from Principles",
                "Models can be trained to critique and revise their outputs against written principles.",
                &["dario-amodei"],
            )),
        NewEntry::new("Robustness")
            .with_id("robustness")
            .summary("Reliability of AI systems under unusual inputs, adversaries and shifting conditions.")
            .block(concept(
                "c-adversarial-examples",
                "Adversarial Examples",
                "Small crafted perturbations can flip a model's predictions.",
                &["deepmind", "peer-reviewed"],
            )),
        NewEntry::new("Ethics and Governance")
            .with_id("ethics-and-governance")
            .summary(
                "How ethics and governance influence AI safety: accountability, transparency and oversight \
                 of the organisations that build AI.",
            )
            .block(concept(
                "c-accountability",
                "Accountability",
                "Someone must answer for the behaviour of deployed systems.",
                &["fli"],
            ))
            .block(concept(
                "c-transparency",
                "Transparency",
                "Disclosure of capabilities, limits and incidents lets others check safety claims.",
                &["fli", "peer-reviewed"],
            )),
        NewEntry::new("AI Alignment Research in China")
            .with_id("ai-alignment-research-in-china")
            .summary("Alignment work carried out by Chinese labs and universities.")
            .scope(Scope::global().with_regions(["CN"]))
            .block(concept(
                "c-overview",
                "Research Landscape",
                "University groups and industry labs publish on alignment and evaluation benchmarks.",
                &["peer-reviewed"],
            )),
        NewEntry::new("AI Governance")
            .with_id("ai-governance")
            .summary("Rules, institutions and agreements that steer the development and use of AI.")
            .block(concept(
                "c-international-coordination",
                "International Coordination",
                "Summits and shared principles aim to align national approaches.",
                &["fli"],
            )),
        NewEntry::new("Policy Making")
            .with_id("policy-making")
            .summary("How public policy is formed, from agenda setting to implementation.")
            .block(concept(
                "c-evidence-based-policy",
                "Evidence-Based Policy",
                "Policy choices grounded in research findings and evaluation.",
                &["peer-reviewed"],
            )),
    ]
}

fn taxonomy() -> Vec<TaxonomyNode> {
    vec![
        TaxonomyNode::new("tx-ai-safety", "AI Safety")
            .synonyms(&["safety of ai", "ai risk", "ai risks", "artificial intelligence safety", "safe ai"])
            .linked("ai-safety"),
        TaxonomyNode::new("tx-value-alignment", "Value Alignment")
            .synonyms(&["ai alignment", "alignment", "value learning"])
            .under("tx-ai-safety")
            .linked("value-alignment"),
        TaxonomyNode::new("tx-ai-alignment-research-in-china", "AI Alignment Research in China")
            .synonyms(&["alignment research in china", "chinese alignment research"])
            .under("tx-value-alignment")
            .linked("ai-alignment-research-in-china"),
        TaxonomyNode::new("tx-robustness", "Robustness")
            .synonyms(&["adversarial robustness", "reliability"])
            .under("tx-ai-safety")
            .linked("robustness"),
        TaxonomyNode::new("tx-ethics-and-governance", "Ethics and Governance")
            .synonyms(&["ai ethics", "ethics"])
            .under("tx-ai-safety")
            .linked("ethics-and-governance"),
        TaxonomyNode::new("tx-ai-governance", "AI Governance")
            .synonyms(&["governance of ai", "ai regulation", "ai policy"])
            .linked("ai-governance"),
        TaxonomyNode::new("tx-policy-making", "Policy Making")
            .synonyms(&["policymaking", "policy"])
            .linked("policy-making"),
        TaxonomyNode::new("tx-machine-learning", "Machine Learning").synonyms(&["ml"]),
    ]
}

pub const CURATED_QUESTIONS: [(&str, &str); 5] = [
    ("q-alex", ALEX_QUERY),
    ("q-eu-regulation", "How is AI safety regulated in the EU?"),
    ("q-milestones", "Which milestones shaped AI safety since 2013?"),
    ("q-value-alignment", "What is value alignment?"),
    ("q-governance", "Who shapes AI governance?"),
];

/// Builds the seed corpus from scratch.
pub fn build_seed() -> Canvas {
    let at = seed_time();
    let mut c = Canvas::default();
    for (id, name, kind, _, _) in SOURCES {
        c.credibility.add_source(Source::new(id, name, kind), None, at).expect("seed source");
    }
    c.create_entry(ai_safety(), at).expect("seed entry");
    for e in children() {
        c.create_entry(e, at).expect("seed entry");
    }
    let safety = EntryId::new("ai-safety");
    for child in ["value-alignment", "robustness", "ethics-and-governance"] {
        c.graph.add_containment(&safety, &child.into()).expect("seed containment");
    }
    c.graph
        .add_containment(&"value-alignment".into(), &"ai-alignment-research-in-china".into())
        .expect("seed containment");
    c.graph.add_cross_reference(&"ai-governance".into(), &safety).expect("seed reference");
    c.graph.add_cross_reference(&"ai-governance".into(), &"policy-making".into()).expect("seed reference");

    // One report per (block, citing source), in entry then block order.
    let mut n = 0;
    let entries: Vec<_> = c.graph.entries().cloned().collect();
    for entry in &entries {
        for block in &entry.blocks {
            for source in &block.citations {
                let (_, _, _, evidence, narrative) =
                    SOURCES.iter().find(|s| s.0 == source.as_str()).expect("seed citation names a seed source");
                let report = NewReport {
                    source_id: source.clone(),
                    content: ContentRef { entry_id: entry.id.clone(), block_id: block.block_id.clone() },
                    evidence: EvidenceAssessment::from_array(*evidence),
                    narrative: NarrativeAnalysis::from_array(*narrative),
                };
                c.submit_report(report, at + Duration::seconds(n)).expect("seed report");
                n += 1;
            }
        }
    }

    for node in taxonomy() {
        c.add_taxonomy_node(node).expect("seed taxonomy");
    }
    for (id, text) in CURATED_QUESTIONS {
        let parsed = c.parse(text).expect("curated question parses");
        let resolution = query::resolve_existing(&parsed, &c.taxonomy, &c.graph)
            .expect("curated question resolves")
            .expect("curated question targets a seed entry");
        c.add_question(CuratedQuestion { id: id.into(), text: text.into(), resolution }).expect("seed question");
    }
    c
}

/// Loads the shipped seed file.
pub fn load_seed() -> Result<Canvas, PersistError> {
    persist::load_str(SEED_NDJSON)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_file_matches_builder() {
        let built = persist::export_string(&build_seed());
        if std::env::var_os("CANVAS_BLESS_SEED").is_some() {
            std::fs::write(concat!(env!("CARGO_MANIFEST_DIR"), "/corpus/seed.ndjson"), &built).unwrap();
            return;
        }
        assert!(built == SEED_NDJSON, "seed.ndjson is stale; rerun with CANVAS_BLESS_SEED=1");
    }

    #[test]
    fn seed_loads_and_validates() {
        let c = load_seed().unwrap();
        let safety = c.graph().entry(&"ai-safety".into()).unwrap();
        assert_eq!(safety.blocks_of(crate::graph::BlockKind::Milestone).count(), 11);
        assert_eq!(persist::export_string(&c), SEED_NDJSON);
    }
}
