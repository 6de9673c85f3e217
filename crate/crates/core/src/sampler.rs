//! Negative sampling by node substitution (NS) and entity
//! conceptualization (EC), and assembly of balanced labeled datasets.
//!
//! Every positive gets its own ChaCha stream keyed by `(seed, index)`, so a
//! dataset is identical whatever the worker count.

use std::fmt;
use std::str::FromStr;

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::conceptualize::{identify_conceptualizations, SubstitutionCandidate, TextMode};
use crate::parse::{ParseIndex, ParsedNode};
use crate::store::{ConceptGraph, Triple, TripleStore};

/// EC shares used for the reported models.
pub const EC_RATIO_PRESETS: [f64; 3] = [0.5, 0.75, 0.875];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Head,
    Tail,
}

impl Side {
    pub fn other(self) -> Side {
        match self {
            Side::Head => Side::Tail,
            Side::Tail => Side::Head,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Side::Head => "head",
            Side::Tail => "tail",
        }
    }

    fn draw(rng: &mut impl Rng) -> Side {
        if rng.gen_bool(0.5) {
            Side::Head
        } else {
            Side::Tail
        }
    }
}

impl fmt::Display for Side {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Side {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "head" => Ok(Side::Head),
            "tail" => Ok(Side::Tail),
            other => Err(format!("unknown side `{other}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Positive,
    Ns,
    Ec,
}

/// Where NS draws replacement nodes from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum NsMode {
    /// Heads from heads, tails from tails of the same relation.
    Constrained,
    /// Any node of the store.
    Unconstrained,
}

impl FromStr for NsMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "constrained" => Ok(NsMode::Constrained),
            "unconstrained" => Ok(NsMode::Unconstrained),
            other => Err(format!("unknown NS mode `{other}`")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    /// Fraction of negatives built by EC; the rest use NS.
    pub ec_ratio: f64,
    pub ns_mode: NsMode,
    pub seed: u64,
    /// Draws per negative before giving up on filtered collisions.
    pub max_retries: u32,
    /// Skip instead of falling back to NS when EC has no usable candidate.
    pub strict_ec: bool,
    pub text_mode: TextMode,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            ec_ratio: 0.5,
            ns_mode: NsMode::Constrained,
            seed: 0,
            max_retries: 10,
            strict_ec: false,
            text_mode: TextMode::Surface,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("ec_ratio {0} is outside [0, 1]")]
    EcRatio(f64),
    #[error("max_retries must be at least 1")]
    Retries,
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        if !(0.0..=1.0).contains(&self.ec_ratio) {
            return Err(ConfigError::EcRatio(self.ec_ratio));
        }
        if self.max_retries == 0 {
            return Err(ConfigError::Retries);
        }
        Ok(())
    }
}

/// The RNG stream for the `index`-th positive.
pub fn example_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

/// Why no negative could be produced.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Error)]
pub enum Skip {
    #[error("no replacement node available")]
    NoNsCandidate,
    #[error("neither node can be conceptualized")]
    NoEcCandidate,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub side: Side,
    pub original_node: String,
    pub replacement_node: String,
    /// EC only: the replaced phrase and what replaced it.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub original_phrase: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub replacement_phrase: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub frequency: Option<u64>,
    /// Index drawn from the candidate pool.
    pub draw: u64,
    pub attempts: u32,
}

/// A triple with its binary label.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledExample {
    #[serde(flatten)]
    pub triple: Triple,
    pub label: u8,
    pub source: Source,
    pub provenance: Option<Provenance>,
}

/// A negative before filtering.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Corruption {
    pub triple: Triple,
    pub provenance: Provenance,
    /// The first side drawn had no candidate and the other side was used.
    pub side_fallback: bool,
}

fn replace_side(triple: &Triple, side: Side, node: &str) -> Triple {
    let mut out = triple.clone();
    match side {
        Side::Head => out.head = node.to_string(),
        Side::Tail => out.tail = node.to_string(),
    }
    out
}

fn side_text(triple: &Triple, side: Side) -> &str {
    match side {
        Side::Head => &triple.head,
        Side::Tail => &triple.tail,
    }
}

enum Pool<'a> {
    Ids(&'a [u32]),
    All(u32),
}

impl Pool<'_> {
    fn len(&self) -> usize {
        match self {
            Pool::Ids(ids) => ids.len(),
            Pool::All(n) => *n as usize,
        }
    }

    fn position(&self, id: u32) -> Option<usize> {
        match self {
            Pool::Ids(ids) => ids.binary_search(&id).ok(),
            Pool::All(n) => (id < *n).then_some(id as usize),
        }
    }

    fn at(&self, i: usize) -> u32 {
        match self {
            Pool::Ids(ids) => ids[i],
            Pool::All(_) => i as u32,
        }
    }
}

fn ns_pool<'a>(store: &'a TripleStore, relation: Option<u16>, side: Side, mode: NsMode) -> Pool<'a> {
    match (mode, side) {
        (NsMode::Unconstrained, _) => Pool::All(store.node_count() as u32),
        (NsMode::Constrained, Side::Head) => Pool::Ids(store.head_nodes()),
        (NsMode::Constrained, Side::Tail) => match relation {
            Some(r) => Pool::Ids(store.tail_nodes(r)),
            None => Pool::Ids(&[]),
        },
    }
}

/// Replaces the head or the tail (0.5 each) with a uniformly drawn
/// different node. A side with no alternative falls back to the other.
pub fn corrupt_ns(
    triple: &Triple,
    store: &TripleStore,
    mode: NsMode,
    rng: &mut impl Rng,
) -> Result<Corruption, Skip> {
    let relation = store.relation_id(&triple.relation);
    let first = Side::draw(rng);
    for side in [first, first.other()] {
        let pool = ns_pool(store, relation, side, mode);
        let current = side_text(triple, side);
        let excluded = store.node_id(current).and_then(|id| pool.position(id));
        let available = pool.len() - usize::from(excluded.is_some());
        if available == 0 {
            continue;
        }
        let mut draw = rng.gen_range(0..available);
        if excluded.is_some_and(|pos| draw >= pos) {
            draw += 1;
        }
        let replacement = store.node(pool.at(draw));
        return Ok(Corruption {
            triple: replace_side(triple, side, replacement),
            provenance: Provenance {
                side,
                original_node: current.to_string(),
                replacement_node: replacement.to_string(),
                original_phrase: None,
                replacement_phrase: None,
                frequency: None,
                draw: draw as u64,
                attempts: 1,
            },
            side_fallback: side != first,
        });
    }
    Err(Skip::NoNsCandidate)
}

/// Draws index `k` with probability `F_k / ΣF`.
pub fn draw_weighted(candidates: &[SubstitutionCandidate], rng: &mut impl Rng) -> Option<usize> {
    let dist = WeightedIndex::new(candidates.iter().map(|c| c.frequency)).ok()?;
    Some(dist.sample(rng))
}

/// EC corruption from precomputed candidate lists of the two nodes.
pub fn corrupt_ec_with(
    triple: &Triple,
    head_candidates: &[SubstitutionCandidate],
    tail_candidates: &[SubstitutionCandidate],
    rng: &mut impl Rng,
) -> Result<Corruption, Skip> {
    let first = Side::draw(rng);
    for side in [first, first.other()] {
        let candidates = match side {
            Side::Head => head_candidates,
            Side::Tail => tail_candidates,
        };
        let Some(k) = draw_weighted(candidates, rng) else {
            continue;
        };
        let c = &candidates[k];
        return Ok(Corruption {
            triple: replace_side(triple, side, &c.new_text),
            provenance: Provenance {
                side,
                original_node: side_text(triple, side).to_string(),
                replacement_node: c.new_text.clone(),
                original_phrase: Some(c.original_phrase.clone()),
                replacement_phrase: Some(c.replacement_phrase.clone()),
                frequency: Some(c.frequency),
                draw: k as u64,
                attempts: 1,
            },
            side_fallback: side != first,
        });
    }
    Err(Skip::NoEcCandidate)
}

/// Conceptualizes one side (0.5 each, falling back to the other side) and
/// substitutes a candidate drawn by frequency weight.
pub fn corrupt_ec(
    triple: &Triple,
    parses: (Option<&ParsedNode>, Option<&ParsedNode>),
    graph: &ConceptGraph,
    mode: TextMode,
    rng: &mut impl Rng,
) -> Result<Corruption, Skip> {
    let cands = |p: Option<&ParsedNode>| {
        p.map(|n| identify_conceptualizations(n, graph, mode))
            .unwrap_or_default()
    };
    corrupt_ec_with(triple, &cands(parses.0), &cands(parses.1), rng)
}

/// Skip and fallback counters written next to every dataset.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SamplerStats {
    pub positives: usize,
    pub emitted_pairs: usize,
    pub ec_negatives: usize,
    pub ns_negatives: usize,
    /// Positives whose first draw chose EC.
    pub ec_requested: usize,
    pub ec_side_fallbacks: usize,
    pub ec_fallback_to_ns: usize,
    pub filtered_rejections: usize,
    pub skipped_no_ec_candidate: usize,
    pub skipped_no_ns_candidate: usize,
    pub skipped_retries_exhausted: usize,
    pub nodes_without_parse: usize,
}

impl SamplerStats {
    fn merge(&mut self, o: &SamplerStats) {
        self.positives += o.positives;
        self.emitted_pairs += o.emitted_pairs;
        self.ec_negatives += o.ec_negatives;
        self.ns_negatives += o.ns_negatives;
        self.ec_requested += o.ec_requested;
        self.ec_side_fallbacks += o.ec_side_fallbacks;
        self.ec_fallback_to_ns += o.ec_fallback_to_ns;
        self.filtered_rejections += o.filtered_rejections;
        self.skipped_no_ec_candidate += o.skipped_no_ec_candidate;
        self.skipped_no_ns_candidate += o.skipped_no_ns_candidate;
        self.skipped_retries_exhausted += o.skipped_retries_exhausted;
    }
}

/// Conceptualization candidates for every node of a store, by node id.
/// `None` marks a node with no parse.
pub struct CandidateTable {
    per_node: Vec<Option<Vec<SubstitutionCandidate>>>,
}

impl CandidateTable {
    pub fn build(store: &TripleStore, graph: &ConceptGraph, parses: &ParseIndex, mode: TextMode) -> Self {
        let texts: Vec<&str> = store.nodes().collect();
        let per_node = texts
            .par_iter()
            .map(|text| {
                parses
                    .get(text)
                    .map(|node| identify_conceptualizations(node, graph, mode))
            })
            .collect();
        Self { per_node }
    }

    pub fn get(&self, id: u32) -> &[SubstitutionCandidate] {
        self.per_node[id as usize].as_deref().unwrap_or(&[])
    }

    pub fn has_parse(&self, id: u32) -> bool {
        self.per_node[id as usize].is_some()
    }

    pub fn missing_parses(&self) -> usize {
        self.per_node.iter().filter(|c| c.is_none()).count()
    }
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub examples: Vec<LabeledExample>,
    pub stats: SamplerStats,
}

/// Emits `positive, negative` pairs for every triple of `positives`.
///
/// A negative is built by EC with probability `ec_ratio`, else by NS; any
/// negative found in `filter` (the full positive store) is redrawn, up to
/// `max_retries` draws. Positives whose negative cannot be built are left
/// out, keeping the output exactly balanced.
pub fn build_dataset(
    positives: &TripleStore,
    filter: &TripleStore,
    graph: &ConceptGraph,
    parses: &ParseIndex,
    config: &SamplerConfig,
) -> Result<Dataset, ConfigError> {
    config.validate()?;
    let table = (config.ec_ratio > 0.0)
        .then(|| CandidateTable::build(positives, graph, parses, config.text_mode));

    let results: Vec<(Option<[LabeledExample; 2]>, SamplerStats)> = (0..positives.len())
        .into_par_iter()
        .map(|i| sample_one(i, positives, filter, table.as_ref(), config))
        .collect();

    let mut stats = SamplerStats {
        nodes_without_parse: table.as_ref().map_or(0, |t| t.missing_parses()),
        ..Default::default()
    };
    let mut examples = Vec::with_capacity(results.len() * 2);
    for (pair, local) in results {
        stats.merge(&local);
        if let Some(pair) = pair {
            examples.extend(pair);
        }
    }
    Ok(Dataset { examples, stats })
}

fn sample_one(
    index: usize,
    positives: &TripleStore,
    filter: &TripleStore,
    table: Option<&CandidateTable>,
    config: &SamplerConfig,
) -> (Option<[LabeledExample; 2]>, SamplerStats) {
    let mut stats = SamplerStats {
        positives: 1,
        ..Default::default()
    };
    let mut rng = example_rng(config.seed, index as u64);
    let positive = positives.get(index).to_owned();
    let (head_id, _, tail_id) = positives.ids(index);

    let mut negative = None;
    let mut try_ns = true;
    if rng.gen_bool(config.ec_ratio) {
        stats.ec_requested += 1;
        let table = table.expect("candidate table exists when ec_ratio > 0");
        let (heads, tails) = (table.get(head_id), table.get(tail_id));
        match draw_filtered(config.max_retries, [filter, positives], &mut stats, |rng| {
            corrupt_ec_with(&positive, heads, tails, rng)
        }, &mut rng)
        {
            Draw::Accepted(c) => {
                negative = Some((c, Source::Ec));
                try_ns = false;
            }
            outcome if config.strict_ec => {
                match outcome {
                    Draw::NoCandidate => stats.skipped_no_ec_candidate += 1,
                    _ => stats.skipped_retries_exhausted += 1,
                }
                try_ns = false;
            }
            _ => stats.ec_fallback_to_ns += 1,
        }
    }
    if try_ns {
        match draw_filtered(config.max_retries, [filter, positives], &mut stats, |rng| {
            corrupt_ns(&positive, positives, config.ns_mode, rng)
        }, &mut rng)
        {
            Draw::Accepted(c) => negative = Some((c, Source::Ns)),
            Draw::NoCandidate => stats.skipped_no_ns_candidate += 1,
            Draw::Exhausted => stats.skipped_retries_exhausted += 1,
        }
    }

    let Some((corruption, source)) = negative else {
        return (None, stats);
    };
    if source == Source::Ec {
        stats.ec_negatives += 1;
        stats.ec_side_fallbacks += usize::from(corruption.side_fallback);
    } else {
        stats.ns_negatives += 1;
    }
    stats.emitted_pairs += 1;
    let pair = [
        LabeledExample {
            triple: positive,
            label: 1,
            source: Source::Positive,
            provenance: None,
        },
        LabeledExample {
            triple: corruption.triple,
            label: 0,
            source,
            provenance: Some(corruption.provenance),
        },
    ];
    (Some(pair), stats)
}

enum Draw {
    Accepted(Corruption),
    NoCandidate,
    Exhausted,
}

// Redraws until the corruption is not a known positive.
fn draw_filtered<R: Rng>(
    max_retries: u32,
    known: [&TripleStore; 2],
    stats: &mut SamplerStats,
    mut corrupt: impl FnMut(&mut R) -> Result<Corruption, Skip>,
    rng: &mut R,
) -> Draw {
    for attempt in 1..=max_retries {
        match corrupt(rng) {
            Ok(mut c) => {
                if known.iter().any(|s| s.contains(&c.triple)) {
                    stats.filtered_rejections += 1;
                    continue;
                }
                c.provenance.attempts = attempt;
                return Draw::Accepted(c);
            }
            Err(_) => return Draw::NoCandidate,
        }
    }
    Draw::Exhausted
}

/// Triples with at least one conceptualizable side.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CoverageReport {
    pub triples: usize,
    pub covered: usize,
    pub head_covered: usize,
    pub tail_covered: usize,
    pub nodes_without_parse: usize,
    pub fraction: f64,
}

pub fn measure_ec_coverage(
    store: &TripleStore,
    graph: &ConceptGraph,
    parses: &ParseIndex,
    mode: TextMode,
) -> CoverageReport {
    let table = CandidateTable::build(store, graph, parses, mode);
    let mut report = CoverageReport {
        triples: store.len(),
        nodes_without_parse: table.missing_parses(),
        ..Default::default()
    };
    for i in 0..store.len() {
        let (h, _, t) = store.ids(i);
        let head = !table.get(h).is_empty();
        let tail = !table.get(t).is_empty();
        report.head_covered += usize::from(head);
        report.tail_covered += usize::from(tail);
        report.covered += usize::from(head || tail);
    }
    report.fraction = if report.triples == 0 {
        0.0
    } else {
        report.covered as f64 / report.triples as f64
    };
    report
}
