//! Acceptance suite: one PASS/FAIL/SKIP line per criterion, non-zero exit
//! if any criterion fails. Run with `cargo test --test acceptance`.

#[path = "../../core/tests/common/mod.rs"]
mod common;

use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::{Duration, Instant};

use kgconcept_core::conceptualize::{identify_conceptualizations, probe_spans, SubstitutionCandidate, TextMode};
use kgconcept_core::metrics::{
    compute_diversity, compute_novelty, GenerationRecord, GenerationSet, MetricsReport, StructuralWords,
};
use kgconcept_core::parse::{ParseIndex, ParsedNode};
use kgconcept_core::sampler::{
    build_dataset, corrupt_ec_with, draw_weighted, example_rng, measure_ec_coverage, SamplerConfig, Side, Source,
};
use kgconcept_core::store::{
    CkgFormat, ConceptGraph, ConceptLoadOptions, Direction, ErrorPolicy, Triple, TripleStore, TripleStoreBuilder,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use common::{brute_force, dfs_span, graph_of, random_case};

enum Outcome {
    Pass(String),
    Fail(String),
    Skip(String),
}

type Check = fn() -> Outcome;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Outcome::Pass(detail)
    } else {
        Outcome::Fail(detail)
    }
}

fn fixture(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(rel)
}

fn oracle_equivalence() -> Outcome {
    let started = Instant::now();
    let trees = 500;
    let mut candidates = 0;
    for seed in 0..trees {
        let (node, edges) = random_case(seed);
        let got: BTreeMap<String, u64> = identify_conceptualizations(&node, &graph_of(&edges), TextMode::Lemmatized)
            .into_iter()
            .map(|c| (c.new_text, c.frequency))
            .collect();
        let expected = brute_force(&node, &edges);
        if got != expected {
            return Outcome::Fail(format!("tree {seed}: {got:?} != {expected:?}"));
        }
        candidates += got.len();
    }
    let elapsed = started.elapsed();
    check(
        elapsed < Duration::from_secs(10),
        format!("{trees} random trees, {candidates} candidates, exact match in {elapsed:.2?}"),
    )
}

fn span_count_law() -> Outcome {
    let mut roots = 0;
    for seed in 0..2000 {
        let (node, _) = random_case(seed);
        for t in node.tokens().iter().filter(|t| t.is_nominal()) {
            let k = t.index;
            let (lo, hi) = dfs_span(&node, k);
            let probed = probe_spans(&node).filter(|&(root, _, _)| root == k).count();
            if probed != (k - lo + 1) * (hi - k + 1) {
                return Outcome::Fail(format!("tree {seed}, root {k}: probed {probed}"));
            }
            roots += 1;
        }
    }
    Outcome::Pass(format!("{roots} noun roots over 2000 random trees"))
}

fn candidate(text: &str, frequency: u64) -> SubstitutionCandidate {
    SubstitutionCandidate {
        new_text: text.into(),
        root: 1,
        span: (1, 1),
        original_phrase: "milk".into(),
        replacement_phrase: text.into(),
        direction: Direction::Abstraction,
        frequency,
    }
}

fn categorical_draws() -> Outcome {
    let n = 10_000;
    let cands = [candidate("beverage", 30), candidate("dairy", 10)];
    let mut rng = example_rng(2024, 0);
    let mut counts = [0f64; 2];
    for _ in 0..n {
        counts[draw_weighted(&cands, &mut rng).unwrap()] += 1.0;
    }
    let expected = [0.75 * n as f64, 0.25 * n as f64];
    let stat: f64 = counts.iter().zip(expected).map(|(o, e)| (o - e).powi(2) / e).sum();
    let p = 1.0 - ChiSquared::new(1.0).unwrap().cdf(stat);

    let t = Triple::new("PersonX buys milk", "xWant", "PersonX drinks milk");
    let heads = [candidate("PersonX buys beverage", 30)];
    let tails = [candidate("PersonX drinks dairy", 10)];
    let mut head_side = 0;
    for i in 0..n {
        let mut rng = example_rng(99, i);
        let c = corrupt_ec_with(&t, &heads, &tails, &mut rng).unwrap();
        head_side += usize::from(c.provenance.side == Side::Head);
    }
    let frac = head_side as f64 / n as f64;
    check(
        p > 0.01 && (frac - 0.5).abs() <= 0.02,
        format!("counts {counts:?}, chi-square p = {p:.3}; head side {frac:.4}"),
    )
}

fn atomic(rows: &[(String, String)]) -> TripleStore {
    TripleStore::from_triples(CkgFormat::AtomicTsv, rows.iter().map(|(h, t)| (h.as_str(), "xWant", t.as_str()))).unwrap()
}

fn svo(text: &str) -> ParsedNode {
    let w: Vec<&str> = text.split(' ').collect();
    ParsedNode::from_words(&[(w[0], "PROPN", 2), (w[1], "VERB", 0), (w[2], "NOUN", 2)]).unwrap()
}

// Heads "PersonX sees dog{a}", tails "PersonX gets cat{b}"; the graph
// links dog{a} to dog{a+1}, so EC rewrites land on other heads and
// collide with positives about half the time, as NS draws do.
fn dense_fixture(positives: usize, held_out: usize, seed: u64) -> (TripleStore, TripleStore, ConceptGraph, ParseIndex) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs: Vec<(usize, usize)> = (0..100).flat_map(|a| (0..100).map(move |b| (a, b))).collect();
    pairs.shuffle(&mut rng);
    let row = |&(a, b): &(usize, usize)| (format!("PersonX sees dog{a}"), format!("PersonX gets cat{b}"));
    let train: Vec<(String, String)> = pairs[..positives].iter().map(row).collect();
    let rest: Vec<(String, String)> = pairs[positives..positives + held_out].iter().map(row).collect();
    let dogs: Vec<(String, String)> = (0..100).map(|a| (format!("dog{a}"), format!("dog{}", (a + 1) % 100))).collect();
    let graph = ConceptGraph::from_edges(dogs.iter().map(|(x, y)| (x.as_str(), y.as_str(), 1 + rng.gen_range(0..20))));
    let parses = (0..100)
        .flat_map(|i| [svo(&format!("PersonX sees dog{i}")), svo(&format!("PersonX gets cat{i}"))])
        .collect();
    (atomic(&train), atomic(&rest), graph, parses)
}

fn filtered_setting() -> Outcome {
    let (train, held_out, graph, parses) = dense_fixture(6000, 2000, 5);
    let full = TripleStore::union([&train, &held_out]).unwrap();
    let mut report = Vec::new();
    for ec_ratio in [0.0, 0.5, 1.0] {
        let config = SamplerConfig {
            ec_ratio,
            seed: 17,
            ..Default::default()
        };
        let ds = build_dataset(&train, &full, &graph, &parses, &config).unwrap();
        let negatives: Vec<&Triple> = ds.examples.iter().filter(|e| e.label == 0).map(|e| &e.triple).collect();
        let leaked = negatives.iter().filter(|t| full.contains(t)).count();
        if leaked > 0 || ds.examples.len() < 10_000 {
            return Outcome::Fail(format!("ec_ratio {ec_ratio}: {} examples, {leaked} negatives are positives", ds.examples.len()));
        }
        report.push(format!(
            "ec_ratio {ec_ratio}: {} examples, {} draws rejected",
            ds.examples.len(),
            ds.stats.filtered_rejections
        ));
    }
    Outcome::Pass(format!("no negative in the full positive store; {}", report.join("; ")))
}

fn ec_ratio_fidelity() -> Outcome {
    let n = 10_000;
    let heads: Vec<String> = (0..n).map(|i| format!("PersonX sees dog{i}")).collect();
    let tails: Vec<String> = (0..n).map(|i| format!("PersonX gets cat{i}")).collect();
    let rows: Vec<(String, String)> = heads.iter().cloned().zip(tails.iter().cloned()).collect();
    let store = atomic(&rows);
    let nouns: Vec<String> = (0..n).flat_map(|i| [format!("dog{i}"), format!("cat{i}")]).collect();
    let graph = ConceptGraph::from_edges(nouns.iter().map(|w| (w.as_str(), "animal", 3)));
    let parses: ParseIndex = heads.iter().chain(&tails).map(|t| svo(t)).collect();

    let mut shares = Vec::new();
    let mut ok = true;
    for ratio in [0.5, 0.75, 0.875] {
        let config = SamplerConfig {
            ec_ratio: ratio,
            seed: 31,
            ..Default::default()
        };
        let ds = build_dataset(&store, &store, &graph, &parses, &config).unwrap();
        let negatives = ds.examples.iter().filter(|e| e.label == 0).count();
        let ec = ds.examples.iter().filter(|e| e.source == Source::Ec).count();
        let share = ec as f64 / negatives as f64;
        ok &= negatives == n && (share - ratio).abs() <= 0.02;
        shares.push(format!("{ratio} -> {share:.4}"));
    }
    check(ok, format!("EC share over {n} negatives: {}", shares.join(", ")))
}

fn run_cli(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_kgconcept"))
        .args(args)
        .env_remove("KGCONCEPT_TMPDIR")
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!("{args:?}: {}", String::from_utf8_lossy(&out.stderr)))
    }
}

fn snapshot(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    let mut files = BTreeMap::new();
    for entry in walk(dir) {
        files.insert(entry.strip_prefix(dir).unwrap().display().to_string(), fs::read(&entry).unwrap());
    }
    files
}

fn walk(dir: &Path) -> Vec<PathBuf> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).unwrap() {
        let p = entry.unwrap().path();
        if p.is_dir() {
            out.extend(walk(&p));
        } else {
            out.push(p);
        }
    }
    out
}

fn determinism() -> Outcome {
    let toy = |f: &str| fixture(&format!("toy/{f}")).display().to_string();
    let (store, concepts, parses) = (toy("atomic.tsv"), toy("concepts.tsv"), toy("parses.conllu"));
    let dir = tempfile::tempdir().unwrap();
    let out = |name: &str| dir.path().join(name).display().to_string();
    let stages: Vec<Vec<String>> = vec![
        vec!["split", "--input", &store, "--format", "atomic-tsv", "--ratios", "8:1:1", "--seed", "42", "--out-dir", &out("split")],
        vec![
            "emit-dataset", "--positives", &store, "--format", "atomic-tsv", "--concepts", &concepts, "--parses", &parses,
            "--ec-ratio", "0.75", "--seed", "7", "--out", &out("dataset.jsonl"),
        ],
        vec![
            "generate", "--seeds", &store, "--format", "atomic-tsv", "--concepts", &concepts, "--parses", &parses,
            "--threshold", "0.5", "--scorer", "stub", "--out", &out("accepted.tsv"),
        ],
    ]
    .into_iter()
    .map(|v| v.into_iter().map(String::from).collect())
    .collect();

    let mut runs = Vec::new();
    for workers in ["1", "4"] {
        for stage in &stages {
            let mut args = vec!["--workers", workers];
            args.extend(stage.iter().map(String::as_str));
            if let Err(e) = run_cli(&args) {
                return Outcome::Fail(e);
            }
        }
        runs.push(snapshot(dir.path()));
    }
    let expected = [
        "accepted.tsv",
        "accepted.tsv.generations.tsv",
        "accepted.tsv.provenance.jsonl",
        "dataset.jsonl",
        "split/dev.tsv",
        "split/test.tsv",
        "split/train.tsv",
    ];
    let missing: Vec<&str> = expected.iter().copied().filter(|f| !runs[0].contains_key(*f)).collect();
    let files = runs[0].len();
    let differing: Vec<&String> = runs[0].keys().filter(|k| runs[0].get(*k) != runs[1].get(*k)).collect();
    check(
        differing.is_empty() && missing.is_empty() && runs[0].keys().eq(runs[1].keys()),
        format!("split, emit-dataset, generate (stub): {files} output files byte-identical across two runs; differing: {differing:?}; missing: {missing:?}"),
    )
}

fn records(nodes: &[&str]) -> GenerationSet {
    GenerationSet::new(
        nodes
            .iter()
            .map(|n| GenerationRecord {
                seed: Triple::new("s", "xWant", "t"),
                side: Side::Tail,
                generated: n.to_string(),
            })
            .collect(),
    )
}

fn metrics_exactness() -> Outcome {
    let d = compute_diversity(&records(&["a b", "a c", "a b"])).unwrap();
    let diversity_ok = (d.dist_n, d.dist_1, d.dist_2) == (2.0 / 3.0, 1.0, 2.0 / 3.0);
    let train: HashSet<String> = ["y".to_string()].into();
    let nov = compute_novelty(&records(&["x", "x", "y"]), &train).unwrap();
    let novelty_ok = (nov.n_t, nov.n_u) == (2.0 / 3.0, 0.5);
    let same = compute_diversity(&records(&["w"; 5])).unwrap();
    let trivial_ok = (same.dist_n, same.dist_1) == (0.2, 0.2);

    let structural = StructuralWords::builtin();
    let pool = ["he", "the", "it", "dog", "gets", "never", "a", "cat", "one", "not"];
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut violations = 0;
    for _ in 0..100 {
        let nodes: Vec<String> = (0..rng.gen_range(1..60))
            .map(|_| (0..rng.gen_range(1..5)).map(|_| *pool.choose(&mut rng).unwrap()).collect::<Vec<_>>().join(" "))
            .collect();
        let refs: Vec<&str> = nodes.iter().map(String::as_str).collect();
        let r = MetricsReport::compute(&records(&refs), &HashSet::new(), &structural).unwrap();
        violations += usize::from(r.dist_n_norm > r.dist_n);
    }
    check(
        diversity_ok && novelty_ok && trivial_ok && violations == 0,
        format!(
            "(dist_n, dist_1, dist_2) = ({:.4}, {:.4}, {:.4}); (n_t, n_u) = ({:.4}, {:.4}); normalized > raw on {violations}/100 random sets",
            d.dist_n, d.dist_1, d.dist_2, nov.n_t, nov.n_u
        ),
    )
}

fn pruning() -> Outcome {
    let mut builder = TripleStoreBuilder::new(CkgFormat::AserTsv);
    for node in fs::read_to_string(fixture("aser/nodes.txt")).unwrap().lines() {
        builder.add_node(node).unwrap();
    }
    let rows = fs::read(fixture("aser/core.tsv")).unwrap();
    builder.read_tsv(rows.as_slice(), ErrorPolicy::Abort).unwrap();
    let store = builder.build();
    let pruned = store.prune(&["Co_Occurrence"], true).unwrap();
    let kept = store.prune(&["Co_Occurrence"], false).unwrap();
    let identity = store.prune(&[], false).unwrap();
    // 7 rows with one duplicate; 3 co-occurrence edges; "it rain" only
    // co-occurs and "he cry" never appears in a triple.
    let counts = [
        (store.len(), store.node_count()),
        (pruned.len(), pruned.node_count()),
        (kept.len(), kept.node_count()),
    ];
    check(
        counts == [(6, 7), (3, 5), (3, 7)] && identity == store,
        format!("(edges, nodes): loaded {:?}, pruned {:?}, pruned keeping isolated {:?}", counts[0], counts[1], counts[2]),
    )
}

// Needs the public ATOMIC dev+test triples, their parses and a Probase
// dump, named by environment variables.
fn atomic_coverage() -> Outcome {
    let vars = ["KGCONCEPT_ATOMIC_DEVTEST", "KGCONCEPT_ATOMIC_PARSES", "KGCONCEPT_PROBASE"];
    let values: Vec<Option<String>> = vars.iter().map(|v| std::env::var(v).ok()).collect();
    let [Some(triples), Some(parses), Some(probase)] = &values[..] else {
        return Outcome::Skip(format!("set {} to run", vars.join(", ")));
    };
    let (store, _) = match TripleStore::load(triples, CkgFormat::AtomicTsv, ErrorPolicy::Skip) {
        Ok(s) => s,
        Err(e) => return Outcome::Fail(e.to_string()),
    };
    let graph = match ConceptGraph::open(probase, &ConceptLoadOptions::default()) {
        Ok((g, _)) => g,
        Err(e) => return Outcome::Fail(e.to_string()),
    };
    let parses = match ParseIndex::load(parses, false) {
        Ok(p) => p,
        Err(e) => return Outcome::Fail(e.to_string()),
    };
    let r = measure_ec_coverage(&store, &graph, &parses, TextMode::Surface);
    check(
        (0.75..=0.85).contains(&r.fraction),
        format!("coverage {:.4} over {} triples ({} nodes without parse)", r.fraction, r.triples, r.nodes_without_parse),
    )
}

fn main() {
    let criteria: [(&str, Check); 9] = [
        ("conceptualization matches brute-force join", oracle_equivalence),
        ("span-count law", span_count_law),
        ("weighted candidate draw and side choice", categorical_draws),
        ("filtered setting", filtered_setting),
        ("EC ratio fidelity", ec_ratio_fidelity),
        ("determinism of split/emit-dataset/generate", determinism),
        ("metrics exactness", metrics_exactness),
        ("pruning counts", pruning),
        ("EC coverage on ATOMIC + Probase", atomic_coverage),
    ];
    panic::set_hook(Box::new(|_| {}));
    let mut failed = 0;
    for (name, run) in criteria {
        let outcome = panic::catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|e| {
            let msg = e
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Outcome::Fail(format!("panicked: {msg}"))
        });
        match outcome {
            Outcome::Pass(d) => println!("PASS  {name}: {d}"),
            Outcome::Skip(d) => println!("SKIP  {name}: {d}"),
            Outcome::Fail(d) => {
                failed += 1;
                println!("FAIL  {name}: {d}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
