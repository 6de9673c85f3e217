//! Entity identification and substitution over a parsed node.
//!
//! Every noun or proper noun `k` roots a family of candidate entity spans:
//! all contiguous `(l, r)` with `L ≤ l ≤ k ≤ r ≤ R`, where `[L, R]` are the
//! bounds of `k`'s dependency subtree. Each span is looked up in the concept
//! graph in both directions and every hit becomes one rewritten node text:
//! the tokens before `l`, the replacement, then the tokens after `r`.

mod grammar;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

pub use grammar::{indefinite_article, is_plural, pluralize, repair_grammar, span_head, TextMode};

use crate::parse::ParsedNode;
use crate::store::{ConceptGraph, Direction};
use crate::text::normalize_phrase;

/// One conceptualized rewrite of a node.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SubstitutionCandidate {
    pub new_text: String,
    /// The noun whose subtree produced the span.
    pub root: usize,
    /// Replaced token range, 1-based and inclusive.
    pub span: (usize, usize),
    /// Replaced text as it appears in the node.
    pub original_phrase: String,
    pub replacement_phrase: String,
    pub direction: Direction,
    pub frequency: u64,
}

impl SubstitutionCandidate {
    /// `node_id \t l \t r \t direction \t original \t replacement \t frequency \t new_text`
    pub fn to_tsv_row(&self, node_id: &str) -> String {
        format!(
            "{node_id}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
            self.span.0,
            self.span.1,
            self.direction,
            self.original_phrase,
            self.replacement_phrase,
            self.frequency,
            self.new_text
        )
    }
}

/// Every `(k, l, r)` probed, in probe order: `k` ascending over nominal
/// tokens, then `l`, then `r`.
pub fn probe_spans(node: &ParsedNode) -> impl Iterator<Item = (usize, usize, usize)> + '_ {
    node.tokens()
        .iter()
        .filter(|t| t.is_nominal())
        .flat_map(move |t| {
            let k = t.index;
            let (lo, hi) = node.subtree_spans()[k - 1];
            (lo..=k).flat_map(move |l| (k..=hi).map(move |r| (k, l, r)))
        })
}

/// Concept-graph key for tokens `l..=r`: forms, except that a nominal
/// span head contributes its lemma, lowercased and space-joined.
pub fn lookup_key(node: &ParsedNode, l: usize, r: usize) -> String {
    let head = span_head(node, l, r);
    let words: Vec<&str> = (l..=r)
        .map(|i| {
            let t = node.token(i);
            if i == head && t.is_nominal() {
                t.lemma.as_str()
            } else {
                t.form.as_str()
            }
        })
        .collect();
    normalize_phrase(&words.join(" "))
}

/// All conceptualizations of `node`.
///
/// Candidates come out in probe order, then direction (abstraction
/// first), then graph rank. Candidates that produce the same text are
/// merged into the first slot, keeping the record with the highest
/// frequency. Replacements equal to the probed phrase are discarded.
pub fn identify_conceptualizations(
    node: &ParsedNode,
    graph: &ConceptGraph,
    mode: TextMode,
) -> Vec<SubstitutionCandidate> {
    let mut out: Vec<SubstitutionCandidate> = Vec::new();
    let mut slot_of: HashMap<String, usize> = HashMap::new();
    if graph.is_empty() {
        return out;
    }
    for (k, l, r) in probe_spans(node) {
        let key = lookup_key(node, l, r);
        for direction in Direction::BOTH {
            for (replacement, frequency) in graph.lookup(&key, direction) {
                if replacement == key {
                    continue;
                }
                let new_text = repair_grammar(node, (l, r), replacement, mode);
                if new_text == node.text() {
                    continue;
                }
                let candidate = || {
                    let (start, end) = node.byte_range(l, r);
                    SubstitutionCandidate {
                        new_text: new_text.clone(),
                        root: k,
                        span: (l, r),
                        original_phrase: node.text()[start..end].to_string(),
                        replacement_phrase: replacement.to_string(),
                        direction,
                        frequency,
                    }
                };
                match slot_of.get(&new_text) {
                    Some(&i) => {
                        if frequency > out[i].frequency {
                            out[i] = candidate();
                        }
                    }
                    None => {
                        slot_of.insert(new_text.clone(), out.len());
                        out.push(candidate());
                    }
                }
            }
        }
    }
    out
}
