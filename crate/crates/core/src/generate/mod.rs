//! Knowledge construction from seed triples: enumerate every
//! conceptualization of either node, score the rewritten triples, and keep
//! those the scorer accepts.

mod scorer;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use scorer::{check_scores, score_all, HttpScorer, Scorer, ScorerEndpoint, ScorerError, StubScorer};

use crate::conceptualize::{identify_conceptualizations, SubstitutionCandidate, TextMode};
use crate::parse::{ParseIndex, ParsedNode};
use crate::sampler::Side;
use crate::store::{ConceptGraph, Direction, Triple, TripleStore};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpansionLimits {
    /// Most candidates kept per side, by frequency.
    pub per_side_cap: usize,
    pub min_frequency: u64,
}

impl Default for ExpansionLimits {
    fn default() -> Self {
        Self {
            per_side_cap: 10,
            min_frequency: 1,
        }
    }
}

/// How an expanded triple was derived from its seed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Origin {
    pub seed: Triple,
    pub side: Side,
    pub original_phrase: String,
    pub replacement_phrase: String,
    pub direction: Direction,
    pub frequency: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExpandedTriple {
    pub triple: Triple,
    pub origin: Origin,
    /// False when the triple already exists in the CKG.
    pub novel: bool,
}

impl ExpandedTriple {
    /// The rewritten node.
    pub fn generated_node(&self) -> &str {
        match self.origin.side {
            Side::Head => &self.triple.head,
            Side::Tail => &self.triple.tail,
        }
    }

    /// `seed_head \t relation \t seed_tail \t side \t generated_node`
    pub fn generation_row(&self) -> String {
        let s = &self.origin.seed;
        format!("{}\t{}\t{}\t{}\t{}", s.head, s.relation, s.tail, self.origin.side, self.generated_node())
    }
}

fn ranked(mut candidates: Vec<SubstitutionCandidate>, limits: &ExpansionLimits) -> Vec<SubstitutionCandidate> {
    candidates.retain(|c| c.frequency >= limits.min_frequency);
    candidates.sort_by(|a, b| b.frequency.cmp(&a.frequency));
    candidates.truncate(limits.per_side_cap);
    candidates
}

/// All triples obtained by conceptualizing one node of `seed`, head side
/// first. Each side keeps at most `per_side_cap` candidates of frequency
/// at least `min_frequency`, highest frequency first.
pub fn expand_seed(
    seed: &Triple,
    parses: (Option<&ParsedNode>, Option<&ParsedNode>),
    graph: &ConceptGraph,
    limits: &ExpansionLimits,
    mode: TextMode,
    known: Option<&TripleStore>,
) -> Vec<ExpandedTriple> {
    let mut out = Vec::new();
    for (side, parse) in [(Side::Head, parses.0), (Side::Tail, parses.1)] {
        let Some(node) = parse else { continue };
        for c in ranked(identify_conceptualizations(node, graph, mode), limits) {
            let mut triple = seed.clone();
            match side {
                Side::Head => triple.head = c.new_text,
                Side::Tail => triple.tail = c.new_text,
            }
            let novel = !known.is_some_and(|k| k.contains(&triple));
            out.push(ExpandedTriple {
                triple,
                origin: Origin {
                    seed: seed.clone(),
                    side,
                    original_phrase: c.original_phrase,
                    replacement_phrase: c.replacement_phrase,
                    direction: c.direction,
                    frequency: c.frequency,
                },
                novel,
            });
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredTriple {
    #[serde(flatten)]
    pub expanded: ExpandedTriple,
    pub score: f64,
}

/// Keeps triples scoring at least `threshold`, highest score first; ties
/// keep their input order.
pub fn accept_by_threshold(scored: &[ScoredTriple], threshold: f64) -> Vec<ScoredTriple> {
    let mut kept: Vec<ScoredTriple> = scored.iter().filter(|s| s.score >= threshold).cloned().collect();
    kept.sort_by(|a, b| b.score.total_cmp(&a.score));
    kept
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationStats {
    pub seeds: usize,
    pub seeds_expanded: usize,
    pub seeds_without_parse: usize,
    pub candidates: usize,
    pub non_novel: usize,
    pub accepted: usize,
}

#[derive(Debug, Clone)]
pub struct GenerationOutput {
    pub scored: Vec<ScoredTriple>,
    pub accepted: Vec<ScoredTriple>,
    pub stats: GenerationStats,
}

/// Expands every seed, scores all candidates and applies the threshold.
#[allow(clippy::too_many_arguments)]
pub fn run_generation(
    seeds: &TripleStore,
    known: &TripleStore,
    graph: &ConceptGraph,
    parses: &ParseIndex,
    limits: &ExpansionLimits,
    mode: TextMode,
    scorer: &dyn Scorer,
    threshold: f64,
) -> Result<GenerationOutput, ScorerError> {
    if !(0.0..=1.0).contains(&threshold) {
        return Err(ScorerError::Config(format!("threshold {threshold} is outside [0, 1]")));
    }
    let per_seed: Vec<(Vec<ExpandedTriple>, bool)> = (0..seeds.len())
        .into_par_iter()
        .map(|i| {
            let seed = seeds.get(i);
            let head = parses.get(seed.head);
            let tail = parses.get(seed.tail);
            let missing = head.is_none() && tail.is_none();
            let expanded = expand_seed(&seed.to_owned(), (head, tail), graph, limits, mode, Some(known));
            (expanded, missing)
        })
        .collect();

    let mut stats = GenerationStats {
        seeds: seeds.len(),
        ..Default::default()
    };
    let mut expanded = Vec::new();
    for (list, missing) in per_seed {
        stats.seeds_without_parse += usize::from(missing);
        stats.seeds_expanded += usize::from(!list.is_empty());
        expanded.extend(list);
    }
    stats.candidates = expanded.len();
    stats.non_novel = expanded.iter().filter(|e| !e.novel).count();

    let triples: Vec<Triple> = expanded.iter().map(|e| e.triple.clone()).collect();
    let scores = score_all(scorer, &triples)?;
    let scored: Vec<ScoredTriple> = expanded
        .into_iter()
        .zip(scores)
        .map(|(expanded, score)| ScoredTriple { expanded, score })
        .collect();
    let accepted = accept_by_threshold(&scored, threshold);
    stats.accepted = accepted.len();
    Ok(GenerationOutput {
        scored,
        accepted,
        stats,
    })
}
