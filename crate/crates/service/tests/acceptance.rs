//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion and
//! exits non-zero if any fails.

mod common;

use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::time::{Duration as StdDuration, Instant};

use canvas_core::canonical;
use canvas_core::corpus::{build_seed, load_seed, seed_time, ALEX_QUERY, SEED_NDJSON};
use canvas_core::credibility::{
    profile_signal, ContentRef, CredibilityConfig, CredibilityStore, EvidenceAssessment, NarrativeAnalysis, NewReport,
    ProfileCoordinates, Source, SourceKind,
};
use canvas_core::graph::{BlockKind, ContentBlock, Direction, EntryUpdate, Graph, KnowledgeEntry, NewEntry};
use canvas_core::pathways::{Interaction, NodeId, Pathway, Recipient, Relation, VersionRef};
use canvas_core::persist::{self, Store, SNAPSHOT_FILE, WAL_FILE};
use canvas_core::query::Resolution;
use canvas_core::{
    AuthorId, Canvas, Command, DimensionalConstraint, End, EntryId, Interval, RegionTable, Scope, SessionId, SourceId,
};
use chrono::{DateTime, Duration, NaiveDate, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

type Check = fn() -> Result<String, String>;

fn main() {
    let checks: [(&str, Check); 7] = [
        ("scenario replay", scenario_replay),
        ("graph invariants", graph_invariants),
        ("derivation chain", derivation_chain),
        ("credibility", credibility),
        ("pathways", pathways),
        ("persistence", persistence),
        ("query determinism", query_determinism),
    ];
    let mut failed = 0;
    for (name, check) in checks {
        let started = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_else(|| "panic".into());
            Err(msg)
        });
        let secs = started.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("PASS {name} ({detail}; {secs:.2}s)"),
            Err(why) => {
                failed += 1;
                println!("FAIL {name}: {why}");
            }
        }
    }
    if failed > 0 {
        std::process::exit(1);
    }
}

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if $cond {
        } else {
            return Err(format!($($fmt)+));
        }
    };
}

fn t(secs: i64) -> DateTime<Utc> {
    seed_time() + Duration::seconds(secs)
}

fn ymd(y: i32, m: u32, d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, d).unwrap()
}

fn entry_hash(e: &KnowledgeEntry) -> String {
    canonical::sha256_hex(canonical::to_string(e).as_bytes())
}

// Scenario -------------------------------------------------------------------

const EXPECTED_MILESTONES: [(i32, &str); 11] = [
    (2013, "Nick Bostrom's \"Superintelligence\" published"),
    (2015, "Open Letter on AI Safety signed by prominent researchers"),
    (2015, "OpenAI founded with explicit focus on beneficial AI"),
    (2016, "AlphaGo beats Lee Sedol"),
    (2017, "Asilomar AI Principles established"),
    (2018, "Google's AI Principles published"),
    (2019, "GPT-2 release delayed due to misuse concerns"),
    (2022, "ChatGPT release sparks widespread AI safety discussions"),
    (2023, "\"AI Pause Letter\" signed by tech leaders"),
    (2023, "Anthropic's Constitutional AI approach"),
    (2023, "AI Safety Summit at Bletchley Park"),
];

const EXPECTED_REGIONS: [(&str, &str); 3] =
    [("CN", "State-aligned frameworks"), ("EU", "Regulation-first strategies"), ("US", "Corporate-led initiatives")];

fn scenario_replay() -> Result<String, String> {
    let dir = tempfile::tempdir().map_err(|e| e.to_string())?;
    let runtime = tokio::runtime::Builder::new_current_thread().enable_all().build().map_err(|e| e.to_string())?;
    let started = Instant::now();
    let run = runtime.block_on(async {
        let app = common::seeded_app(dir.path());
        common::run_scenario(&app).await
    });
    let elapsed = started.elapsed();
    ensure!(elapsed < StdDuration::from_secs(5), "scenario took {elapsed:?}");

    ensure!(run.resolution["target"] == "ai-safety", "resolved to {}", run.resolution["target"]);
    ensure!(run.resolution["target_title"] == "AI Safety", "title {}", run.resolution["target_title"]);

    let titles: BTreeSet<&str> =
        run.logical["items"].as_array().unwrap().iter().map(|i| i["title"].as_str().unwrap()).collect();
    let want: BTreeSet<&str> = ["Value Alignment", "Robustness", "Ethics and Governance"].into();
    ensure!(titles == want && run.logical["items"].as_array().unwrap().len() == 3, "logical zoom {titles:?}");

    let milestones: Vec<(i32, String)> = run.temporal["items"]
        .as_array()
        .unwrap()
        .iter()
        .map(|i| (i["date"].as_str().unwrap()[..4].parse().unwrap(), i["text"].as_str().unwrap().to_owned()))
        .collect();
    let expected: Vec<(i32, String)> = EXPECTED_MILESTONES.iter().map(|(y, s)| (*y, s.to_string())).collect();
    ensure!(milestones == expected, "temporal zoom {milestones:?}");
    let dates: Vec<&str> = run.temporal["items"].as_array().unwrap().iter().map(|i| i["date"].as_str().unwrap()).collect();
    ensure!(dates.windows(2).all(|w| w[0] <= w[1]), "milestones out of order {dates:?}");

    let regions: Vec<(String, String)> = run.geographical["regions"]
        .as_object()
        .unwrap()
        .iter()
        .map(|(code, items)| {
            let texts: Vec<&str> = items.as_array().unwrap().iter().map(|i| i["text"].as_str().unwrap()).collect();
            (code.clone(), texts.join("|"))
        })
        .collect();
    let expected: Vec<(String, String)> = EXPECTED_REGIONS.iter().map(|(c, s)| (c.to_string(), s.to_string())).collect();
    ensure!(regions == expected, "geographical zoom {regions:?}");

    let kinds: Vec<&str> =
        run.pathway["nodes"].as_array().unwrap().iter().map(|n| n["kind"].as_str().unwrap()).collect();
    ensure!(kinds == common::SCENARIO_KINDS, "pathway kinds {kinds:?}");
    ensure!(run.pathway["status"] == "archived", "pathway not archived");
    Ok(format!("{} pathway nodes in {:.0} ms", kinds.len(), elapsed.as_secs_f64() * 1000.0))
}

// Graph invariants -------------------------------------------------------------

const GRAPH_CASES: usize = 1000;
const POOL: [&str; 8] = ["US", "CN", "EU", "FR", "DE", "GB", "KR", "NL"];

fn has_path(edges: &BTreeSet<(usize, usize)>, from: usize, to: usize) -> bool {
    let mut seen = BTreeSet::new();
    let mut stack = vec![from];
    while let Some(n) = stack.pop() {
        if n == to {
            return true;
        }
        if seen.insert(n) {
            stack.extend(edges.iter().filter(|(a, _)| *a == n).map(|(_, b)| *b));
        }
    }
    false
}

/// Half-open date range; `None` end means ongoing.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Span(NaiveDate, Option<NaiveDate>);

impl Span {
    fn of(i: &Interval) -> Self {
        Span(i.start(), match i.end() {
            End::Ongoing => None,
            End::Date(d) => Some(d),
        })
    }

    fn holds(&self, d: NaiveDate) -> bool {
        d >= self.0 && self.1.is_none_or(|e| d < e)
    }

    fn meet(&self, other: &Span) -> Option<Span> {
        let start = self.0.max(other.0);
        let end = match (self.1, other.1) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        };
        (end.is_none_or(|e| start < e)).then_some(Span(start, end))
    }

    fn covers(&self, inner: &Span) -> bool {
        inner.0 >= self.0
            && match (self.1, inner.1) {
                (None, _) => true,
                (Some(_), None) => false,
                (Some(a), Some(b)) => b <= a,
            }
    }
}

/// Plain-set view of a scope: atomic region codes and a date span.
#[derive(Debug, Clone, PartialEq)]
struct Flat {
    regions: Option<BTreeSet<String>>,
    span: Option<Span>,
}

fn flat(s: &Scope, table: &RegionTable) -> Flat {
    Flat {
        regions: s.regions.as_ref().map(|r| r.iter().flat_map(|c| table.expand(c)).collect()),
        span: s.temporal.as_ref().map(Span::of),
    }
}

fn regions_meet(a: &Option<BTreeSet<String>>, b: &Option<BTreeSet<String>>) -> bool {
    match (a, b) {
        (Some(a), Some(b)) => !a.is_disjoint(b),
        _ => true,
    }
}

/// Independent statement of which blocks survive narrowing `base` to `derived`.
fn keeps(block: &ContentBlock, base: &Flat, derived: &Flat, table: &RegionTable) -> bool {
    let tags = flat(&block.dimension_tags, table);
    let regions = tags.regions.or_else(|| base.regions.clone());
    let span = tags.span.or(base.span);
    if !regions_meet(&regions, &derived.regions) {
        return false;
    }
    if let (Some(a), Some(b)) = (span, derived.span) {
        if a.meet(&b).is_none() {
            return false;
        }
    }
    if let (Some(date), Some(w)) = (block.milestone_date, derived.span) {
        if !w.holds(date) {
            return false;
        }
    }
    if let (Some(r), Some(allowed)) = (&block.region, &derived.regions) {
        if !table.expand(r).is_subset(allowed) {
            return false;
        }
    }
    true
}

/// Expected derived scope, or `None` when some dimension becomes empty.
fn narrowed(base: &Flat, c: &DimensionalConstraint, table: &RegionTable) -> Option<Flat> {
    let want = flat(&c.as_scope(), table);
    let regions = match (&base.regions, &want.regions) {
        (r, None) => r.clone(),
        (None, c) => c.clone(),
        (Some(a), Some(b)) => {
            let both: BTreeSet<String> = a.intersection(b).cloned().collect();
            if both.is_empty() {
                return None;
            }
            Some(both)
        }
    };
    let span = match (base.span, want.span) {
        (s, None) => s,
        (None, c) => c,
        (Some(a), Some(b)) => Some(a.meet(&b)?),
    };
    Some(Flat { regions, span })
}

fn random_regions(rng: &mut ChaCha8Rng) -> Vec<String> {
    let n = rng.random_range(1..=2);
    (0..n).map(|_| POOL[rng.random_range(0..POOL.len())].to_owned()).collect()
}

fn random_years(rng: &mut ChaCha8Rng) -> Interval {
    let start = rng.random_range(2008..2024);
    if rng.random_bool(0.3) {
        Interval::ongoing_from(ymd(start, 1, 1))
    } else {
        Interval::years(start, rng.random_range(start + 1..=2026)).unwrap()
    }
}

fn random_scope(rng: &mut ChaCha8Rng) -> Scope {
    let mut s = Scope::global();
    if rng.random_bool(0.5) {
        s = s.with_regions(random_regions(rng));
    }
    if rng.random_bool(0.5) {
        s = s.with_temporal(random_years(rng));
    }
    s
}

fn random_constraint(rng: &mut ChaCha8Rng) -> DimensionalConstraint {
    match rng.random_range(0..3) {
        0 => DimensionalConstraint::regions(random_regions(rng)),
        1 => DimensionalConstraint::temporal(random_years(rng)),
        _ => DimensionalConstraint::regions(random_regions(rng)).and_temporal(random_years(rng)),
    }
}

/// A block valid inside `scope`.
fn random_block(rng: &mut ChaCha8Rng, id: &str, scope: &Flat, table: &RegionTable) -> ContentBlock {
    let atoms: Vec<String> = match &scope.regions {
        Some(r) => r.iter().cloned().collect(),
        None => POOL.iter().flat_map(|c| table.expand(c)).collect::<BTreeSet<_>>().into_iter().collect(),
    };
    let pick = |rng: &mut ChaCha8Rng| atoms[rng.random_range(0..atoms.len())].clone();
    match rng.random_range(0..3) {
        0 => {
            let (lo, hi) = match scope.span {
                Some(Span(s, e)) => (s, e.unwrap_or(ymd(2026, 1, 1))),
                None => (ymd(2005, 1, 1), ymd(2026, 1, 1)),
            };
            let date = lo + Duration::days(rng.random_range(0..(hi - lo).num_days()));
            let mut b = ContentBlock::milestone(id, date, &format!("event {id}"));
            if rng.random_bool(0.4) {
                b = b.tagged(Scope::global().with_regions([pick(rng)]));
            }
            b
        }
        1 => ContentBlock::regional(id, &pick(rng), &format!("view {id}")),
        _ => {
            let mut b = ContentBlock::concept(id, &format!("Idea {id}"), "text");
            if rng.random_bool(0.3) {
                b = b.tagged(Scope::global().with_regions([pick(rng)]));
            }
            b
        }
    }
}

fn graph_invariants() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x6a7a);
    let table = RegionTable::standard();
    let (mut derivations, mut empties, mut edits) = (0, 0, 0);
    for case in 0..GRAPH_CASES {
        let mut g = Graph::new(table.clone());
        let n = rng.random_range(2..10);
        let ids: Vec<EntryId> = (0..n).map(|i| g.create_entry(NewEntry::new(&format!("N{i}")), t(0)).unwrap()).collect();

        // Containment against a DFS oracle.
        let mut oracle = BTreeSet::new();
        for _ in 0..rng.random_range(0..3 * n) {
            let (a, b) = (rng.random_range(0..n), rng.random_range(0..n));
            let expect = a != b && !oracle.contains(&(a, b)) && !has_path(&oracle, b, a);
            let got = g.add_containment(&ids[a], &ids[b]).is_ok();
            ensure!(got == expect, "case {case}: containment {a}->{b} accepted={got}, oracle={expect}");
            if expect {
                oracle.insert((a, b));
            }
        }
        ensure!(g.find_containment_cycle().is_none(), "case {case}: cycle present");
        for (i, id) in ids.iter().enumerate() {
            let want: BTreeSet<EntryId> =
                (0..n).filter(|j| *j != i && has_path(&oracle, i, *j)).map(|j| ids[j].clone()).collect();
            ensure!(g.closure(id, Direction::Descendants).unwrap() == want, "case {case}: closure of {id}");
        }

        // Cross-reference symmetry.
        for _ in 0..rng.random_range(0..2 * n) {
            let _ = g.add_cross_reference(&ids[rng.random_range(0..n)], &ids[rng.random_range(0..n)]);
        }
        for a in &ids {
            for b in g.references(a).unwrap() {
                ensure!(g.references(&b).unwrap().contains(a), "case {case}: {a}~{b} not symmetric");
            }
        }

        // Derivation: scope subsetting, filtered blocks, idempotence.
        let base_scope = random_scope(&mut rng);
        let base_flat = flat(&base_scope, &table);
        let blocks: Vec<ContentBlock> =
            (0..rng.random_range(1..8)).map(|i| random_block(&mut rng, &format!("b{i}"), &base_flat, &table)).collect();
        let base = g
            .create_entry(NewEntry::new("Base").scope(base_scope).blocks(blocks), t(0))
            .map_err(|e| format!("case {case}: generated base rejected: {e}"))?;
        let mut derived: Vec<(EntryId, Flat)> = Vec::new();
        for _ in 0..rng.random_range(1..4) {
            let c = random_constraint(&mut rng);
            let expect = narrowed(&base_flat, &c, &table);
            let before = g.len();
            match (g.derive_constrained(&base, &c, t(1)), expect) {
                (Ok(id), Some(want)) => {
                    let e = g.entry(&id).unwrap().clone();
                    let got = flat(&e.scope, &table);
                    ensure!(got == want, "case {case}: derived scope {got:?}, oracle {want:?}");
                    ensure!(
                        base_flat.regions.as_ref().is_none_or(|b| got.regions.as_ref().is_some_and(|r| r.is_subset(b)))
                            && base_flat.span.is_none_or(|b| got.span.is_some_and(|s| b.covers(&s))),
                        "case {case}: derived scope escapes its base"
                    );
                    let base_entry = g.entry(&base).unwrap();
                    let kept: Vec<&str> = base_entry
                        .blocks
                        .iter()
                        .filter(|b| keeps(b, &base_flat, &want, &table))
                        .map(|b| b.block_id.as_str())
                        .collect();
                    let have: Vec<&str> = e.blocks.iter().map(|b| b.block_id.as_str()).collect();
                    ensure!(kept == have, "case {case}: derived blocks {have:?}, oracle {kept:?}");
                    let again = g.derive_constrained(&base, &c, t(2)).unwrap();
                    ensure!(again == id && g.entry(&id).unwrap() == &e, "case {case}: derivation not idempotent");
                    if !derived.iter().any(|(d, _)| *d == id) {
                        derived.push((id, want));
                    }
                    derivations += 1;
                }
                (Err(canvas_core::graph::GraphError::EmptyIntersection(_)), None) => {
                    ensure!(g.len() == before, "case {case}: failed derivation changed the graph");
                    empties += 1;
                }
                (got, want) => return Err(format!("case {case}: derive gave {got:?}, oracle {want:?}")),
            }
        }

        // Update locality: only derived entries the edit reaches change.
        let hashes: BTreeMap<EntryId, String> =
            derived.iter().map(|(id, _)| (id.clone(), entry_hash(g.entry(id).unwrap()))).collect();
        let old = g.entry(&base).unwrap().blocks.clone();
        let (block, previous) = if rng.random_bool(0.5) {
            (random_block(&mut rng, "fresh", &base_flat, &table), None)
        } else {
            let target = old[rng.random_range(0..old.len())].clone();
            let mut b = target.clone();
            b.text = format!("{} (revised)", b.text);
            (b, Some(target))
        };
        let touched = g.update_entry(&base, &EntryUpdate::upsert(block.clone()), t(3)).unwrap();
        edits += 1;
        for (id, scope) in &derived {
            let reached = keeps(&block, &base_flat, scope, &table)
                || previous.as_ref().is_some_and(|p| keeps(p, &base_flat, scope, &table));
            let now = g.entry(id).unwrap();
            if reached {
                ensure!(touched.contains(id), "case {case}: {id} should be re-synced");
                let base_entry = g.entry(&base).unwrap();
                let kept: Vec<&str> = base_entry
                    .blocks
                    .iter()
                    .filter(|b| keeps(b, &base_flat, scope, &table))
                    .map(|b| b.block_id.as_str())
                    .collect();
                let have: Vec<&str> = now.blocks.iter().map(|b| b.block_id.as_str()).collect();
                ensure!(kept == have, "case {case}: re-synced {id} has {have:?}, oracle {kept:?}");
                let texts_match = now
                    .blocks
                    .iter()
                    .all(|b| base_entry.block(&b.block_id).is_some_and(|src| src.text == b.text));
                ensure!(texts_match, "case {case}: {id} carries stale text");
            } else {
                ensure!(!touched.contains(id), "case {case}: {id} touched by an out-of-scope edit");
                ensure!(entry_hash(now) == hashes[id], "case {case}: {id} changed by an out-of-scope edit");
            }
        }
        g.validate().map_err(|e| format!("case {case}: {e}"))?;
    }
    Ok(format!("{GRAPH_CASES} cases, {derivations} derivations, {empties} empty intersections, {edits} edits"))
}

// Derivation chain ---------------------------------------------------------------

fn derivation_chain() -> Result<String, String> {
    let mut g = build_seed().graph().clone();
    let table = g.regions().clone();
    let safety = EntryId::new("ai-safety");
    let base = g.entry(&safety).unwrap().clone();
    ensure!(base.title == "AI Safety", "seed title {}", base.title);
    let base_flat = flat(&base.scope, &table);

    let eu_c = DimensionalConstraint::regions(["EU"]);
    let eu = g.derive_constrained(&safety, &eu_c, t(1)).map_err(|e| e.to_string())?;
    let eu_entry = g.entry(&eu).unwrap().clone();
    ensure!(eu_entry.title == "AI Safety in the EU", "title {}", eu_entry.title);
    let members: BTreeSet<String> = canvas_core::region::EU_MEMBERS.iter().map(|s| s.to_string()).collect();
    let eu_flat = flat(&eu_entry.scope, &table);
    ensure!(eu_flat == Flat { regions: Some(members.clone()), span: None }, "EU scope {eu_flat:?}");

    let post_c = DimensionalConstraint::temporal(Interval::ongoing_from(ymd(2020, 1, 1)));
    let post = g.derive_constrained(&eu, &post_c, t(2)).map_err(|e| e.to_string())?;
    let post_entry = g.entry(&post).unwrap().clone();
    ensure!(post_entry.title == "AI Safety in the EU post-2020", "title {}", post_entry.title);
    let post_flat = flat(&post_entry.scope, &table);
    let want_post = Flat { regions: Some(members), span: Some(Span(ymd(2020, 1, 1), None)) };
    ensure!(post_flat == want_post, "post-2020 scope {post_flat:?}");

    // Brute force over the base blocks: both filters applied in turn.
    let stage1: Vec<&ContentBlock> = base.blocks.iter().filter(|b| keeps(b, &base_flat, &eu_flat, &table)).collect();
    let stage2: Vec<&ContentBlock> = stage1.iter().copied().filter(|b| keeps(b, &eu_flat, &post_flat, &table)).collect();
    let ids = |bs: &[&ContentBlock]| bs.iter().map(|b| b.block_id.clone()).collect::<Vec<_>>();
    let have1: Vec<String> = eu_entry.blocks.iter().map(|b| b.block_id.clone()).collect();
    let have2: Vec<String> = post_entry.blocks.iter().map(|b| b.block_id.clone()).collect();
    ensure!(have1 == ids(&stage1), "EU blocks {have1:?}, oracle {:?}", ids(&stage1));
    ensure!(have2 == ids(&stage2), "post-2020 blocks {have2:?}, oracle {:?}", ids(&stage2));

    let count = |e: &KnowledgeEntry, k: BlockKind| e.blocks_of(k).count();
    ensure!(count(&eu_entry, BlockKind::Milestone) == 6, "EU milestones {}", count(&eu_entry, BlockKind::Milestone));
    ensure!(count(&post_entry, BlockKind::Milestone) == 3, "post-2020 milestones");
    let regional: Vec<&str> = post_entry.blocks_of(BlockKind::RegionalView).filter_map(|b| b.region.as_deref()).collect();
    ensure!(regional == ["EU"], "post-2020 regional views {regional:?}");
    Ok(format!("{} -> {} -> {} blocks", base.blocks.len(), have1.len(), have2.len()))
}

// Credibility --------------------------------------------------------------------

const METRIC_CASES: usize = 2000;

fn unit(rng: &mut ChaCha8Rng) -> f64 {
    match rng.random_range(0..10) {
        0 => 0.0,
        1 => 1.0,
        _ => rng.random::<f64>(),
    }
}

fn five(rng: &mut ChaCha8Rng) -> [f64; 5] {
    std::array::from_fn(|_| unit(rng))
}

/// Equal weights: the plain mean of the ten readings.
fn oracle_content(e: &[f64; 5], n: &[f64; 5]) -> f64 {
    (e.iter().sum::<f64>() + n.iter().sum::<f64>()) / 10.0
}

fn oracle_combined(content: f64, profile: &[f64; 5]) -> f64 {
    0.6 * content + 0.4 * profile.iter().sum::<f64>() / 5.0
}

fn credibility() -> Result<String, String> {
    let cfg = CredibilityConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(0xc7ed);
    for case in 0..METRIC_CASES {
        let (e, n, p) = (five(&mut rng), five(&mut rng), five(&mut rng));
        let ev = EvidenceAssessment::from_array(e);
        let na = NarrativeAnalysis::from_array(n);
        let content = cfg.evaluate_content(&ev, &na).map_err(|x| x.to_string())?;
        let combined = cfg.combined(content, &ProfileCoordinates::from_array(p)).map_err(|x| x.to_string())?;
        ensure!((0.0..=1.0).contains(&content) && (0.0..=1.0).contains(&combined), "case {case}: out of bounds");
        ensure!((content - oracle_content(&e, &n)).abs() < 1e-12, "case {case}: content {content}");
        ensure!((combined - oracle_combined(content, &p)).abs() < 1e-12, "case {case}: combined {combined}");

        let i = rng.random_range(0..15);
        let r = rng.random::<f64>();
        let bump = |x: f64| (x + r * (1.0 - x)).min(1.0);
        let (mut e2, mut n2, mut p2) = (e, n, p);
        match i {
            0..5 => e2[i] = bump(e2[i]),
            5..10 => n2[i - 5] = bump(n2[i - 5]),
            _ => p2[i - 10] = bump(p2[i - 10]),
        }
        let content2 = cfg
            .evaluate_content(&EvidenceAssessment::from_array(e2), &NarrativeAnalysis::from_array(n2))
            .map_err(|x| x.to_string())?;
        let combined2 = cfg.combined(content2, &ProfileCoordinates::from_array(p2)).map_err(|x| x.to_string())?;
        ensure!(content2 >= content && combined2 >= combined, "case {case}: raising component {i} lowered a score");
    }

    // EWMA replay against an oracle.
    let mut store = CredibilityStore::new(cfg.clone()).map_err(|e| e.to_string())?;
    let initial = five(&mut rng);
    let src = SourceId::new("replayed");
    store
        .add_source(Source::new("replayed", "Replayed", SourceKind::Individual), Some(ProfileCoordinates::from_array(initial)), t(0))
        .map_err(|e| e.to_string())?;
    let mut profile = initial;
    for k in 0..100 {
        let (e, n) = (five(&mut rng), five(&mut rng));
        let at = t(k + 1);
        let id = store
            .submit_report(
                NewReport {
                    source_id: src.clone(),
                    content: ContentRef::new("ai-safety", "c-robustness"),
                    evidence: EvidenceAssessment::from_array(e),
                    narrative: NarrativeAnalysis::from_array(n),
                },
                at,
            )
            .map_err(|e| e.to_string())?;
        let report = store.report(&id).unwrap();
        let c = oracle_content(&e, &n);
        let basis = report.profile_basis.to_array();
        ensure!((0..5).all(|j| (basis[j] - profile[j]).abs() <= 1e-12), "report {k}: basis differs from oracle profile");
        ensure!((report.combined_score - oracle_combined(c, &profile)).abs() < 1e-12, "report {k}: combined");
        let signal = [c, (e[1] + e[4]) / 2.0, (e[4] + n[0]) / 2.0, (n[4] + n[1]) / 2.0, e[3]];
        for j in 0..5 {
            profile[j] += 0.3 * (signal[j] - profile[j]);
        }
        let got = store.profile(&src).unwrap().coordinates.to_array();
        for j in 0..5 {
            ensure!((got[j] - profile[j]).abs() <= 1e-12, "report {k}: coordinate {j} {} vs {}", got[j], profile[j]);
        }
    }

    // Every stored report, seed ones included, re-derives from its inputs.
    let seed = build_seed();
    let mut audited = 0;
    for s in [seed.credibility(), &store] {
        for r in s.reports() {
            let (content, combined) = s.audit(r).map_err(|e| e.to_string())?;
            ensure!(content == r.content_score && combined == r.combined_score, "audit of {} differs", r.id);
            audited += 1;
        }
        // Replaying reports in order from each baseline reproduces every basis and the final profile.
        for source in s.sources() {
            let profile = s.profile(&source.id).unwrap();
            let mut coords = profile.baseline;
            let mut reports: Vec<_> = s.reports_for_source(&source.id).collect();
            reports.sort_by_key(|r| r.seq);
            for r in reports {
                ensure!(r.profile_basis == coords, "{}: basis not reproducible", r.id);
                coords = coords.smoothed_toward(&profile_signal(r.content_score, &r.evidence, &r.narrative), 0.3);
            }
            ensure!(coords == profile.coordinates, "{}: profile not reproducible", source.id);
        }
    }
    Ok(format!("{METRIC_CASES} metric vectors, 100-report replay within 1e-12, {audited} audits"))
}

// Pathways -------------------------------------------------------------------------

const AUTHORS: [&str; 3] = ["alex", "jordan", "sam"];

fn random_interaction(rng: &mut ChaCha8Rng) -> Interaction {
    use canvas_core::graph::Dimension;
    let entries = ["ai-safety", "value-alignment", "robustness", "ethics-and-governance"];
    let entry = entries[rng.random_range(0..entries.len())];
    match rng.random_range(0..6) {
        0 => Interaction::zoom(entry, Dimension::Logical),
        1 => Interaction::zoom(entry, Dimension::Temporal),
        2 => Interaction::zoom(entry, Dimension::Geographical),
        3 => Interaction::ContentView { entry_id: EntryId::new(entry), block_id: None },
        4 => Interaction::SourceEvaluation { source_id: SourceId::new("fli"), report_id: None },
        _ => Interaction::Annotation { text: format!("note {}", rng.random_range(0..3)) },
    }
}

/// Pathway-focused commands over the current state, or `None` when the
/// chosen kind has nothing to act on.
fn pathway_command(rng: &mut ChaCha8Rng, c: &Canvas) -> Option<Command> {
    let author = |rng: &mut ChaCha8Rng| AuthorId::new(AUTHORS[rng.random_range(0..AUTHORS.len())]);
    let active: Vec<SessionId> = c.pathways().sessions().filter(|s| s.active).map(|s| s.id.clone()).collect();
    let archived: Vec<&Pathway> = c.pathways().archived().collect();
    let queries = ["ai safety", "value alignment", "robustness", "policy", "ai governance"];
    Some(match rng.random_range(0..10) {
        0 => Command::StartSession { author: author(rng) },
        1 if !active.is_empty() => {
            let session = active[rng.random_range(0..active.len())].clone();
            Command::Query { text: queries[rng.random_range(0..queries.len())].into(), session: Some(session) }
        }
        2..=4 if !active.is_empty() => Command::Record {
            session: active[rng.random_range(0..active.len())].clone(),
            interaction: random_interaction(rng),
            relation: rng.random_bool(0.1).then_some(Relation::Refines),
        },
        5 if !active.is_empty() => Command::ExcludeSource {
            session: active[rng.random_range(0..active.len())].clone(),
            source_id: SourceId::new("daily-buzz"),
            note: "unreliable".into(),
        },
        6 | 7 if !active.is_empty() => Command::Archive { session: active[rng.random_range(0..active.len())].clone() },
        8 if !archived.is_empty() => {
            let p = archived[rng.random_range(0..archived.len())];
            Command::Branch {
                pathway: p.version_ref(),
                node: NodeId(rng.random_range(1..=p.nodes.len() as u64)),
                author: p.author.clone(),
            }
        }
        9 if !archived.is_empty() => {
            let p = archived[rng.random_range(0..archived.len())];
            if rng.random_bool(0.5) {
                Command::Resume { pathway: p.version_ref(), author: p.author.clone() }
            } else {
                let recipient = if rng.random_bool(0.5) { Recipient::Public } else { Recipient::Author(author(rng)) };
                Command::Share { pathway: p.version_ref(), recipient, by: p.author.clone() }
            }
        }
        _ => return None,
    })
}

fn archived_set(c: &Canvas) -> BTreeMap<VersionRef, String> {
    c.pathways().archived().map(|p| (p.version_ref(), p.digest())).collect()
}

fn suggest_oracle(c: &Canvas, signature: &str) -> BTreeMap<String, usize> {
    let mut counts = BTreeMap::new();
    for p in c.pathways().archived() {
        for e in p.edges.iter().filter(|e| e.relation == Relation::FollowedBy) {
            if p.node(e.from).unwrap().interaction.signature() == signature {
                *counts.entry(p.node(e.to).unwrap().interaction.signature()).or_insert(0) += 1;
            }
        }
    }
    counts
}

fn pathways() -> Result<String, String> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x9a71);
    let seed = load_seed().map_err(|e| e.to_string())?;
    let (mut total, mut branched, mut probes) = (0, 0, 0);
    for case in 0..30 {
        let target = 1 + (case * 7) % 100;
        let target = if case == 0 { 100 } else { target };
        let mut c = seed.clone();
        let mut log: Vec<(DateTime<Utc>, Command)> = Vec::new();
        let mut frozen: BTreeMap<VersionRef, (String, Pathway)> = BTreeMap::new();
        let mut clock = 0;
        while c.pathways().archived().count() < target {
            let Some(cmd) = pathway_command(&mut rng, &c) else { continue };
            clock += 1;
            if c.execute(&cmd, t(clock)).is_ok() {
                log.push((t(clock), cmd));
            }
            // Archived versions never change afterwards.
            for p in c.pathways().archived() {
                let (_, snapshot) = frozen.entry(p.version_ref()).or_insert_with(|| (p.digest(), p.clone()));
                ensure!(snapshot == p, "case {case}: {} changed after archiving", p.version_ref());
            }
        }
        for (r, (digest, _)) in &frozen {
            ensure!(c.pathways().pathway(r).unwrap().digest() == *digest, "case {case}: hash of {r} changed");
        }
        c.pathways().validate(canvas_core::Execution::Sequential).map_err(|e| format!("case {case}: {e}"))?;

        // Replaying the command log yields the same archived set.
        let mut replayed = seed.clone();
        for (at, cmd) in &log {
            replayed.execute(cmd, *at).map_err(|e| format!("case {case}: replay failed: {e}"))?;
        }
        ensure!(archived_set(&replayed) == archived_set(&c), "case {case}: replay diverged");

        // Lineage forms trees rooted at version 1 of each pathway id.
        for p in c.pathways().archived() {
            let mut chain = Vec::new();
            let mut cur = p;
            while let Some(parent) = &cur.parent_version {
                let up = c.pathways().pathway(parent).map_err(|e| e.to_string())?;
                ensure!(up.id == cur.id && up.version < cur.version, "case {case}: bad parent of {}", cur.version_ref());
                chain.push(up.author.clone());
                cur = up;
                ensure!(chain.len() <= 1000, "case {case}: lineage loop");
            }
            ensure!(cur.version == 1, "case {case}: root of {} is not version 1", p.version_ref());
            chain.reverse();
            let recorded: Vec<AuthorId> = p.lineage.iter().map(|a| a.author.clone()).collect();
            ensure!(recorded == chain, "case {case}: lineage of {} is {recorded:?}, walk gives {chain:?}", p.version_ref());
            if p.parent_version.is_some() {
                branched += 1;
            }
        }

        // Suggestions equal brute-force counting, in both execution modes.
        let mut signatures: BTreeSet<String> = BTreeSet::new();
        for p in c.pathways().archived() {
            signatures.extend(p.nodes.iter().map(|n| n.interaction.signature()));
        }
        for sig in &signatures {
            let got = c.suggest(sig);
            let par = c.pathways().suggest_next(sig, canvas_core::Execution::Parallel);
            ensure!(got == par, "case {case}: parallel suggestions differ");
            let counts: BTreeMap<String, usize> = got.iter().map(|s| (s.signature.clone(), s.count)).collect();
            ensure!(counts == suggest_oracle(&c, sig), "case {case}: suggestions for {sig} differ from oracle");
            ensure!(
                got.windows(2).all(|w| (std::cmp::Reverse(w[0].count), &w[0].signature) < (std::cmp::Reverse(w[1].count), &w[1].signature)),
                "case {case}: suggestions not ordered"
            );
            probes += 1;
        }
        total += target;
    }
    Ok(format!("30 forests, {total} archived versions ({branched} branched), {probes} suggestion probes"))
}

// Persistence --------------------------------------------------------------------

/// Any command kind, built against the current state. Failures are fine:
/// the caller only keeps what succeeds.
fn random_command(rng: &mut ChaCha8Rng, c: &Canvas, n: usize) -> Option<Command> {
    let entries: Vec<EntryId> = c.graph().entries().map(|e| e.id.clone()).collect();
    let bases: Vec<EntryId> = entries.iter().filter(|e| !c.graph().is_derived(e)).cloned().collect();
    let pick = |rng: &mut ChaCha8Rng, v: &[EntryId]| v[rng.random_range(0..v.len())].clone();
    let sources: Vec<SourceId> = c.credibility().sources().map(|s| s.id.clone()).collect();
    Some(match rng.random_range(0..12) {
        0 => Command::CreateEntry {
            entry: NewEntry::new(&format!("Topic {n}"))
                .summary("generated")
                .block(ContentBlock::milestone("m", ymd(2010 + (n % 15) as i32, 3, 1), "happened").cite("fli")),
        },
        1 => Command::AddContainment { parent: pick(rng, &bases), child: pick(rng, &bases) },
        2 => Command::AddCrossReference { a: pick(rng, &entries), b: pick(rng, &entries) },
        3 => {
            let mut g = ChaCha8Rng::seed_from_u64(n as u64);
            Command::Derive { base: pick(rng, &entries), constraint: random_constraint(&mut g) }
        }
        4 => Command::UpdateEntry {
            id: pick(rng, &bases),
            update: EntryUpdate::upsert(ContentBlock::concept(&format!("c{}", n % 4), "Added", &format!("rev {n}"))),
        },
        5 => Command::AddSource {
            source: Source::new(&format!("src-{n}"), "Generated", SourceKind::Publication),
            initial: rng.random_bool(0.5).then(|| ProfileCoordinates::from_array(five(rng))),
        },
        6 => {
            let entry = c.graph().entry(&pick(rng, &entries)).ok()?;
            let block = entry.blocks.first()?;
            Command::SubmitReport {
                report: NewReport {
                    source_id: sources[rng.random_range(0..sources.len())].clone(),
                    content: ContentRef::new(entry.id.as_str(), &block.block_id),
                    evidence: EvidenceAssessment::from_array(five(rng)),
                    narrative: NarrativeAnalysis::from_array(five(rng)),
                },
            }
        }
        7 => Command::SetPreferences {
            preferences: canvas_core::canvas::Preferences {
                author: AuthorId::new(AUTHORS[rng.random_range(0..3)]),
                default_dimension: Some(canvas_core::graph::Dimension::ALL[rng.random_range(0..3)]),
                timeline_density: None,
            },
        },
        8 => {
            let texts = ["ai safety", "quantum watermarking", "ml audits in the EU", "policy since 2019", "robustness"];
            Command::Query { text: texts[rng.random_range(0..texts.len())].into(), session: None }
        }
        _ => return pathway_command(rng, c),
    })
}

fn mutated(rng: &mut ChaCha8Rng, steps: usize) -> (Canvas, Vec<(DateTime<Utc>, Command)>) {
    let mut c = load_seed().unwrap();
    let mut log = Vec::new();
    for n in 0..steps {
        if let Some(cmd) = random_command(rng, &c, n) {
            if c.execute(&cmd, t(n as i64 + 1)).is_ok() {
                log.push((t(n as i64 + 1), cmd));
            }
        }
    }
    (c, log)
}

fn round_trips(text: &str) -> Result<(), String> {
    let loaded = persist::load_str(text).map_err(|e| e.to_string())?;
    let again = persist::export_string(&loaded);
    ensure!(again == text, "export after load differs");
    Ok(())
}

fn copy_with_wal(src: &Path, dst: &Path, wal: &str) {
    std::fs::create_dir_all(dst).unwrap();
    std::fs::copy(src.join(SNAPSHOT_FILE), dst.join(SNAPSHOT_FILE)).unwrap();
    std::fs::write(dst.join(WAL_FILE), wal).unwrap();
}

fn persistence() -> Result<String, String> {
    let seed_text = persist::export_string(&load_seed().map_err(|e| e.to_string())?);
    ensure!(seed_text == SEED_NDJSON, "seed export differs from the shipped corpus");
    round_trips(&seed_text)?;

    let mut rng = ChaCha8Rng::seed_from_u64(0x5701);
    let mut applied = 0;
    for case in 0..100 {
        let (c, log) = mutated(&mut rng, 40);
        c.validate().map_err(|e| format!("store {case}: {e}"))?;
        round_trips(&persist::export_string(&c)).map_err(|e| format!("store {case}: {e}"))?;
        applied += log.len();
    }

    // Crash consistency: cut the log at every line boundary and inside
    // every line; reopening recovers exactly the complete entries.
    let root = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut cuts = 0;
    for case in 0..3 {
        let dir = root.path().join(format!("live-{case}"));
        let (_, log) = mutated(&mut rng, 60);
        let mut digests = Vec::new();
        {
            let mut store = Store::open(&dir).map_err(|e| e.to_string())?;
            store.replace(load_seed().unwrap()).map_err(|e| e.to_string())?;
            digests.push(store.digest());
            for (at, cmd) in &log {
                store.apply(cmd, *at).map_err(|e| format!("wal {case}: {e}"))?;
                if store.logged() == digests.len() {
                    digests.push(store.digest());
                }
            }
        }
        let wal = std::fs::read_to_string(dir.join(WAL_FILE)).unwrap();
        let lines: Vec<&str> = wal.split_inclusive('\n').collect();
        ensure!(lines.len() == digests.len(), "wal {case}: {} lines for {} states", lines.len(), digests.len());
        let mut offset = 0;
        for (i, line) in lines.iter().enumerate() {
            for cut in [offset, offset + line.len() / 2] {
                let trial = root.path().join(format!("cut-{case}-{cut}"));
                copy_with_wal(&dir, &trial, &wal[..cut]);
                let store = Store::open(&trial).map_err(|e| format!("wal {case} cut {cut}: {e}"))?;
                store.canvas().validate().map_err(|e| format!("wal {case} cut {cut}: {e}"))?;
                let complete = i.saturating_sub(1);
                ensure!(store.digest() == digests[complete], "wal {case} cut {cut}: wrong state");
                drop(store);
                std::fs::remove_dir_all(&trial).unwrap();
                cuts += 1;
            }
            offset += line.len();
        }
        let store = Store::open(&dir).map_err(|e| e.to_string())?;
        ensure!(store.digest() == *digests.last().unwrap(), "wal {case}: full log does not restore the final state");
    }
    Ok(format!("seed + 100 mutated stores ({applied} commands) round-trip; {cuts} log cuts recovered"))
}

// Query determinism --------------------------------------------------------------

#[derive(Debug, Serialize, Deserialize, PartialEq)]
struct Golden {
    query: String,
    resolution: Resolution,
}

const GOLDEN: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/golden/queries.json");

/// Rewrites the golden resolutions from the current resolver. Review the
/// diff before committing.
fn bless(seed: &Canvas) -> Result<(), String> {
    let text = std::fs::read_to_string(GOLDEN).map_err(|e| e.to_string())?;
    let entries: Vec<serde_json::Value> = serde_json::from_str(&text).map_err(|e| e.to_string())?;
    let mut out = Vec::new();
    for e in entries {
        let query = e["query"].as_str().ok_or("golden entry without query")?.to_owned();
        let resolution = seed.clone().query(&query, None, t(1)).map_err(|e| format!("{query:?}: {e}"))?.resolution;
        out.push(Golden { query, resolution });
    }
    let mut text = serde_json::to_string_pretty(&out).map_err(|e| e.to_string())?;
    text.push('\n');
    std::fs::write(GOLDEN, text).map_err(|e| e.to_string())
}

const UNRESOLVABLE: [&str; 5] = [
    "quantum watermarking",
    "machine learning audits in the EU",
    "neuromorphic chip supply chains",
    "ml interpretability tooling since 2021",
    "ocean carbon sequestration",
];

fn query_determinism() -> Result<String, String> {
    let seed = load_seed().map_err(|e| e.to_string())?;
    if std::env::var_os("CANVAS_BLESS").is_some() {
        bless(&seed)?;
    }
    let golden: Vec<Golden> = serde_json::from_str(&std::fs::read_to_string(GOLDEN).map_err(|e| e.to_string())?)
        .map_err(|e| e.to_string())?;
    ensure!(golden.len() >= 50, "only {} golden queries", golden.len());
    ensure!(golden.iter().any(|g| g.query == ALEX_QUERY), "golden set lacks the walkthrough query");
    for g in &golden {
        for _ in 0..2 {
            let mut c = seed.clone();
            let got = c.query(&g.query, None, t(1)).map_err(|e| format!("{:?}: {e}", g.query))?;
            ensure!(got.resolution == g.resolution, "{:?} resolved to {:?}", g.query, got.resolution);
            ensure!(c.graph().len() == seed.graph().len(), "{:?} changed the graph", g.query);
        }
    }

    let mut c = seed.clone();
    for text in UNRESOLVABLE {
        let before = c.graph().len();
        let first = c.query(text, None, t(2)).map_err(|e| format!("{text:?}: {e}"))?.resolution;
        ensure!(first.seeded && c.graph().len() == before + 1, "{text:?} did not seed exactly one entry");
        let second = c.query(text, None, t(3)).map_err(|e| format!("{text:?}: {e}"))?.resolution;
        ensure!(!second.seeded && second.target == first.target, "{text:?} seeded twice");
        ensure!(c.graph().len() == before + 1, "{text:?} grew the graph on repeat");
        let mut fresh = seed.clone();
        let elsewhere = fresh.query(text, None, t(9)).map_err(|e| e.to_string())?.resolution;
        ensure!(elsewhere.target == first.target, "{text:?} seeds different ids on different runs");
    }
    Ok(format!("{} golden queries, {} seeding probes", golden.len(), UNRESOLVABLE.len()))
}
