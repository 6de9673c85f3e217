use std::collections::HashSet;
use std::fmt;
use std::fs::{self, File};
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::thread;
use std::time::{Duration, Instant};

use anyhow::Context as _;
use log::{info, warn};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use kgconcept_core::conceptualize::{identify_conceptualizations, TextMode};
use kgconcept_core::generate::{
    run_generation, score_all, ExpansionLimits, HttpScorer, Scorer, ScorerEndpoint, StubScorer,
};
use kgconcept_core::metrics::{load_node_set, GenerationSet, MetricsReport, StructuralWords};
use kgconcept_core::parse::{ConlluReader, ParseIndex, ParsedNode};
use kgconcept_core::sampler::{build_dataset, measure_ec_coverage, NsMode, SamplerConfig};
use kgconcept_core::store::{
    split_triples, ConceptGraph, ConceptLoadOptions, ErrorPolicy, LoadError, RowOrientation, SplitRatios, Triple,
    TripleStore, TripleStoreBuilder,
};

use crate::args::*;
use crate::output::{sidecar, write_atomic, write_json, write_manifest};

/// A request the arguments allow but the stage cannot honour.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

pub fn run(command: Command) -> anyhow::Result<()> {
    match command {
        Command::BuildIndex(a) => build_index(a),
        Command::IngestCkg(a) => ingest(a),
        Command::Split(a) => split(a),
        Command::Identify(a) => identify(a),
        Command::EmitDataset(a) => emit_dataset(a),
        Command::Coverage(a) => coverage(a),
        Command::Generate(a) => generate(a),
        Command::Score(a) => score(a),
        Command::Metrics(a) => metrics(a),
    }
}

fn load_store(path: &Path, format: Format) -> anyhow::Result<TripleStore> {
    let (store, report) = TripleStore::load(path, format.core(), ErrorPolicy::Abort)
        .with_context(|| format!("loading {}", path.display()))?;
    info!("{}: {} triples ({} duplicate rows)", path.display(), store.len(), report.rows_ignored);
    Ok(store)
}

fn load_graph(path: &Path, options: &ConceptLoadOptions) -> anyhow::Result<ConceptGraph> {
    let (graph, report) = ConceptGraph::open(path, options).with_context(|| format!("loading {}", path.display()))?;
    if report.rows_skipped > 0 {
        warn!("{}: skipped {} malformed rows", path.display(), report.rows_skipped);
    }
    info!("{}: {} phrases, {} IsA edges", path.display(), graph.phrase_count(), graph.edge_count());
    Ok(graph)
}

#[derive(Debug, Default, Serialize)]
struct ParseStats {
    nodes: usize,
    duplicate_texts: usize,
    dropped_sentences: usize,
}

fn read_parses(path: &Path, mode: TextMode) -> anyhow::Result<(Vec<ParsedNode>, usize)> {
    let mut reader = ConlluReader::open(path, mode == TextMode::Lemmatized)?;
    let nodes = reader
        .by_ref()
        .collect::<Result<Vec<_>, _>>()
        .with_context(|| format!("reading {}", path.display()))?;
    Ok((nodes, reader.dropped_sentences()))
}

fn load_parses(path: &Path, mode: TextMode) -> anyhow::Result<(ParseIndex, ParseStats)> {
    let (nodes, dropped_sentences) = read_parses(path, mode)?;
    let mut stats = ParseStats {
        nodes: nodes.len(),
        dropped_sentences,
        ..Default::default()
    };
    let mut index = ParseIndex::new();
    for node in nodes {
        stats.duplicate_texts += usize::from(!index.insert(node));
    }
    info!("{}: {} parsed nodes", path.display(), index.len());
    Ok((index, stats))
}

fn build_index(a: BuildIndexArgs) -> anyhow::Result<()> {
    let path = &a.concepts.concepts;
    let (graph, report) = ConceptGraph::load(path, &a.concepts.options()).with_context(|| format!("loading {}", path.display()))?;
    write_atomic(&a.out, |w| graph.write_index(w).map_err(std::io::Error::other))?;
    write_json(
        &sidecar(&a.out, ".stats.json"),
        &json!({ "load": report, "phrases": graph.phrase_count(), "edges": graph.edge_count() }),
    )?;
    write_manifest(&sidecar(&a.out, ".manifest.json"), "build-index", &a, &[path], &[&a.out])?;
    println!("phrases={} edges={}", graph.phrase_count(), graph.edge_count());
    Ok(())
}

fn ingest(a: IngestArgs) -> anyhow::Result<()> {
    let mut builder = TripleStoreBuilder::new(a.format.core());
    let mut inputs: Vec<&Path> = vec![&a.input];
    if let Some(nodes) = &a.nodes {
        let file = File::open(nodes).with_context(|| format!("cannot open {}", nodes.display()))?;
        for (i, line) in BufReader::new(file).lines().enumerate() {
            let line = line?;
            builder
                .add_node(&line)
                .map_err(|reason| LoadError::Malformed { line: i + 1, reason })
                .with_context(|| format!("reading {}", nodes.display()))?;
        }
        inputs.push(nodes);
    }
    let file = File::open(&a.input).with_context(|| format!("cannot open {}", a.input.display()))?;
    let report = builder
        .read_tsv(BufReader::new(file), a.on_error.core())
        .with_context(|| format!("reading {}", a.input.display()))?;
    let store = builder.build();
    let excluded: Vec<&str> = a.exclude.iter().map(String::as_str).collect();
    let pruned = store.prune(&excluded, a.drop_isolated).map_err(|e| usage(e.to_string()))?;

    write_atomic(&a.out, |w| pruned.write_tsv(w))?;
    let counts = |s: &TripleStore| json!({ "triples": s.len(), "nodes": s.node_count() });
    write_json(
        &sidecar(&a.out, ".stats.json"),
        &json!({ "load": report, "before": counts(&store), "after": counts(&pruned) }),
    )?;
    write_manifest(&sidecar(&a.out, ".manifest.json"), "ingest-ckg", &a, &inputs, &[&a.out])?;
    println!(
        "triples={} nodes={} (before pruning: {} / {})",
        pruned.len(),
        pruned.node_count(),
        store.len(),
        store.node_count()
    );
    Ok(())
}

fn split(a: SplitArgs) -> anyhow::Result<()> {
    let ratios: SplitRatios = a.ratios.parse().map_err(usage)?;
    let store = load_store(&a.input, a.format)?;
    let parts = split_triples(&store, ratios, a.seed);
    fs::create_dir_all(&a.out_dir).with_context(|| format!("cannot create {}", a.out_dir.display()))?;
    let paths: Vec<PathBuf> = ["train.tsv", "dev.tsv", "test.tsv"].iter().map(|n| a.out_dir.join(n)).collect();
    for (part, path) in parts.iter().zip(&paths) {
        write_atomic(path, |w| part.write_tsv(w))?;
    }
    let sizes: Vec<usize> = parts.iter().map(TripleStore::len).collect();
    write_json(&a.out_dir.join("stats.json"), &json!({ "total": store.len(), "train": sizes[0], "dev": sizes[1], "test": sizes[2] }))?;
    let outputs: Vec<&Path> = paths.iter().map(PathBuf::as_path).collect();
    write_manifest(&a.out_dir.join("manifest.json"), "split", &a, &[&a.input], &outputs)?;
    println!("train={} dev={} test={}", sizes[0], sizes[1], sizes[2]);
    Ok(())
}

fn identify(a: IdentifyArgs) -> anyhow::Result<()> {
    let mode = a.text_mode.core();
    let graph = load_graph(&a.concepts.concepts, &a.concepts.options())?;
    let (nodes, dropped_sentences) = read_parses(&a.parses, mode)?;
    let candidates: Vec<_> = nodes
        .par_iter()
        .map(|node| identify_conceptualizations(node, &graph, mode))
        .collect();

    write_atomic(&a.out, |w| {
        for (node, list) in nodes.iter().zip(&candidates) {
            let id = node.id.as_deref().unwrap_or(node.text());
            for c in list {
                writeln!(w, "{}", c.to_tsv_row(id))?;
            }
        }
        Ok(())
    })?;
    let total: usize = candidates.iter().map(Vec::len).sum();
    let covered = candidates.iter().filter(|c| !c.is_empty()).count();
    write_json(
        &sidecar(&a.out, ".stats.json"),
        &json!({ "nodes": nodes.len(), "nodes_with_candidates": covered, "candidates": total, "dropped_sentences": dropped_sentences }),
    )?;
    write_manifest(&sidecar(&a.out, ".manifest.json"), "identify", &a, &[&a.parses, &a.concepts.concepts], &[&a.out])?;
    println!("nodes={} with_candidates={covered} candidates={total}", nodes.len());
    Ok(())
}

fn emit_dataset(a: EmitArgs) -> anyhow::Result<()> {
    let text_mode = a.text_mode.map_or(a.format.default_text_mode(), Mode::core);
    let ns_mode = match a.ns_mode {
        Some(Ns::Constrained) => NsMode::Constrained,
        Some(Ns::Unconstrained) => NsMode::Unconstrained,
        None => a.format.default_ns_mode(),
    };
    let config = SamplerConfig {
        ec_ratio: a.ec_ratio,
        ns_mode,
        seed: a.seed,
        max_retries: a.max_retries,
        strict_ec: a.strict_ec,
        text_mode,
    };
    config.validate()?;

    let positives = load_store(&a.positives, a.format)?;
    let filters = a.filter.iter().map(|p| load_store(p, a.format)).collect::<anyhow::Result<Vec<_>>>()?;
    let full = TripleStore::union(std::iter::once(&positives).chain(&filters)).expect("at least one store");

    let mut inputs: Vec<&Path> = vec![&a.positives];
    inputs.extend(a.filter.iter().map(PathBuf::as_path));
    let (graph, parses, parse_stats) = if a.ec_ratio > 0.0 {
        let (Some(concepts), Some(parses)) = (&a.concepts, &a.parses) else {
            return Err(usage("--ec-ratio above 0 needs --concepts and --parses"));
        };
        let options = ConceptLoadOptions {
            min_frequency: a.min_frequency,
            orientation: match a.orientation {
                Orientation::HyperHypo => RowOrientation::HyperHypo,
                Orientation::HypoHyper => RowOrientation::HypoHyper,
            },
            on_error: ErrorPolicy::Abort,
        };
        inputs.extend([concepts.as_path(), parses.as_path()]);
        let graph = load_graph(concepts, &options)?;
        let (parses, stats) = load_parses(parses, text_mode)?;
        (graph, parses, stats)
    } else {
        (ConceptGraph::default(), ParseIndex::new(), ParseStats::default())
    };

    let dataset = build_dataset(&positives, &full, &graph, &parses, &config)?;
    write_atomic(&a.out, |w| {
        for example in &dataset.examples {
            serde_json::to_writer(&mut *w, example)?;
            writeln!(w)?;
        }
        Ok(())
    })?;
    let s = &dataset.stats;
    write_json(
        &sidecar(&a.out, ".stats.json"),
        &json!({ "config": config, "sampler": s, "parses": parse_stats, "filter_triples": full.len() }),
    )?;
    write_manifest(&sidecar(&a.out, ".manifest.json"), "emit-dataset", &a, &inputs, &[&a.out])?;
    println!(
        "examples={} ec={} ns={} skipped={}",
        dataset.examples.len(),
        s.ec_negatives,
        s.ns_negatives,
        s.positives - s.emitted_pairs
    );
    Ok(())
}

fn coverage(a: CoverageArgs) -> anyhow::Result<()> {
    let mode = a.text_mode.map_or(a.format.default_text_mode(), Mode::core);
    let store = load_store(&a.input, a.format)?;
    let graph = load_graph(&a.concepts.concepts, &a.concepts.options())?;
    let (parses, _) = load_parses(&a.parses, mode)?;
    let report = measure_ec_coverage(&store, &graph, &parses, mode);
    match &a.out {
        Some(out) => {
            write_json(out, &report)?;
            write_manifest(&sidecar(out, ".manifest.json"), "coverage", &a, &[&a.input, &a.parses, &a.concepts.concepts], &[out])?;
            println!("coverage={:.4} ({} of {})", report.fraction, report.covered, report.triples);
        }
        None => println!("{}", serde_json::to_string_pretty(&report)?),
    }
    Ok(())
}

// Polls /health until the service reports "ok" or the timeout passes.
fn wait_until_ready(scorer: &HttpScorer, timeout: Duration) -> anyhow::Result<()> {
    let started = Instant::now();
    loop {
        let status = scorer.health()?;
        if status == "ok" {
            return Ok(());
        }
        if started.elapsed() >= timeout {
            warn!("scorer still reports `{status}`; continuing");
            return Ok(());
        }
        info!("scorer reports `{status}`, waiting");
        thread::sleep(Duration::from_millis(500));
    }
}

fn make_scorer(a: &ScorerArgs) -> anyhow::Result<Box<dyn Scorer>> {
    match a.scorer {
        ScorerKind::Stub => {
            if !(0.0..=1.0).contains(&a.stub_score) {
                return Err(usage(format!("--stub-score {} is outside [0, 1]", a.stub_score)));
            }
            Ok(Box::new(StubScorer { value: a.stub_score }))
        }
        ScorerKind::Http => {
            let url = a
                .scorer_url
                .clone()
                .ok_or_else(|| usage(format!("--scorer http needs --scorer-url or {SCORER_URL_ENV}")))?;
            let timeout = Duration::from_secs(a.timeout_secs);
            let scorer = HttpScorer::new(ScorerEndpoint {
                timeout,
                batch_size: a.batch_size as usize,
                retries: a.retries,
                ..ScorerEndpoint::new(url)
            })?;
            wait_until_ready(&scorer, timeout)?;
            Ok(Box::new(scorer))
        }
    }
}

fn generate(a: GenerateArgs) -> anyhow::Result<()> {
    if !(0.0..=1.0).contains(&a.threshold) {
        return Err(usage(format!("--threshold {} is outside [0, 1]", a.threshold)));
    }
    let mode = a.text_mode.map_or(a.format.default_text_mode(), Mode::core);
    let seeds = load_store(&a.seeds, a.format)?;
    let extra = a.known.iter().map(|p| load_store(p, a.format)).collect::<anyhow::Result<Vec<_>>>()?;
    let known = TripleStore::union(std::iter::once(&seeds).chain(&extra)).expect("at least one store");
    let graph = load_graph(&a.concepts.concepts, &a.concepts.options())?;
    let (parses, _) = load_parses(&a.parses, mode)?;
    let scorer = make_scorer(&a.scorer)?;
    let limits = ExpansionLimits {
        per_side_cap: a.per_side_cap,
        min_frequency: a.candidate_min_frequency,
    };

    let output = run_generation(&seeds, &known, &graph, &parses, &limits, mode, scorer.as_ref(), a.threshold)?;

    let provenance = sidecar(&a.out, ".provenance.jsonl");
    let generations = sidecar(&a.out, ".generations.tsv");
    write_atomic(&a.out, |w| {
        for s in &output.accepted {
            writeln!(w, "{}", s.expanded.triple.to_tsv())?;
        }
        Ok(())
    })?;
    write_atomic(&provenance, |w| {
        for s in &output.accepted {
            serde_json::to_writer(&mut *w, s)?;
            writeln!(w)?;
        }
        Ok(())
    })?;
    write_atomic(&generations, |w| {
        for s in &output.accepted {
            writeln!(w, "{}", s.expanded.generation_row())?;
        }
        Ok(())
    })?;
    write_json(&sidecar(&a.out, ".stats.json"), &output.stats)?;
    let mut inputs: Vec<&Path> = vec![&a.seeds];
    inputs.extend(a.known.iter().map(PathBuf::as_path));
    inputs.extend([a.concepts.concepts.as_path(), a.parses.as_path()]);
    write_manifest(
        &sidecar(&a.out, ".manifest.json"),
        "generate",
        &a,
        &inputs,
        &[&a.out, &provenance, &generations],
    )?;
    let st = &output.stats;
    println!(
        "seeds={} expanded={} candidates={} accepted={}",
        st.seeds, st.seeds_expanded, st.candidates, st.accepted
    );
    Ok(())
}

fn score(a: ScoreArgs) -> anyhow::Result<()> {
    let store = load_store(&a.input, a.format)?;
    let scorer = make_scorer(&a.scorer)?;
    let triples: Vec<Triple> = store.iter().map(|t| t.to_owned()).collect();
    let scores = score_all(scorer.as_ref(), &triples)?;
    write_atomic(&a.out, |w| {
        for (t, s) in triples.iter().zip(&scores) {
            writeln!(w, "{}\t{s}", t.to_tsv())?;
        }
        Ok(())
    })?;
    write_manifest(&sidecar(&a.out, ".manifest.json"), "score", &a, &[&a.input], &[&a.out])?;
    println!("scored={}", scores.len());
    Ok(())
}

fn metrics(a: MetricsArgs) -> anyhow::Result<()> {
    let mut generations = GenerationSet::load(&a.generations)?;
    if let Some(total) = a.total_seeds {
        generations = generations.with_total_seeds(total);
    }
    let train: HashSet<String> = load_node_set(&a.train_nodes)?;
    let structural = match &a.structural_words {
        Some(p) => StructuralWords::load(p).with_context(|| format!("cannot read {}", p.display()))?,
        None => StructuralWords::builtin(),
    };
    let report = MetricsReport::compute(&generations, &train, &structural)?;
    let text = if a.json {
        let value = json!({ "report": report, "structural_words_version": structural.version() });
        format!("{}\n", serde_json::to_string_pretty(&value)?)
    } else {
        report.to_string()
    };
    print!("{text}");
    if let Some(out) = &a.out {
        write_atomic(out, |w| w.write_all(text.as_bytes()))?;
    }
    Ok(())
}
