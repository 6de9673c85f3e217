//! Random dependency trees, toy concept graphs and brute-force oracles
//! shared by the property and acceptance tests.
#![allow(dead_code)]

use std::collections::{BTreeMap, HashMap};

use kgconcept_core::parse::ParsedNode;
use kgconcept_core::store::ConceptGraph;
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub const VOCAB: [&str; 10] = ["dog", "cat", "big", "red", "house", "team", "player", "the", "food", "eats"];
const TAGS: [&str; 6] = ["NOUN", "NOUN", "PROPN", "ADJ", "DET", "VERB"];

/// A node of 1–10 tokens over [`VOCAB`] with a uniformly shaped random
/// tree (non-projective arcs included).
pub fn random_node(rng: &mut impl Rng) -> ParsedNode {
    let n = rng.gen_range(1..=10);
    let mut order: Vec<usize> = (1..=n).collect();
    order.shuffle(rng);
    let mut heads = vec![0; n];
    for i in 1..n {
        heads[order[i] - 1] = order[rng.gen_range(0..i)];
    }
    let words: Vec<(&str, &str, usize)> = (0..n)
        .map(|i| (*VOCAB.choose(rng).unwrap(), *TAGS.choose(rng).unwrap(), heads[i]))
        .collect();
    ParsedNode::from_words(&words).unwrap()
}

fn random_phrase(rng: &mut impl Rng) -> String {
    let len = rng.gen_range(1..=3);
    (0..len).map(|_| *VOCAB.choose(rng).unwrap()).collect::<Vec<_>>().join(" ")
}

/// Raw `(hypo, hyper, frequency)` rows; duplicates and self-loops allowed.
pub fn random_edges(rng: &mut impl Rng) -> Vec<(String, String, u64)> {
    let n = rng.gen_range(0..=25);
    (0..n)
        .map(|_| (random_phrase(rng), random_phrase(rng), rng.gen_range(1..=50)))
        .collect()
}

pub fn random_case(seed: u64) -> (ParsedNode, Vec<(String, String, u64)>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let node = random_node(&mut rng);
    let edges = random_edges(&mut rng);
    (node, edges)
}

pub fn graph_of(edges: &[(String, String, u64)]) -> ConceptGraph {
    ConceptGraph::from_edges(edges.iter().map(|(a, b, f)| (a.as_str(), b.as_str(), *f)))
}

/// Subtree bounds by explicit DFS over child lists.
pub fn dfs_span(node: &ParsedNode, k: usize) -> (usize, usize) {
    let mut children: HashMap<usize, Vec<usize>> = HashMap::new();
    for t in node.tokens() {
        children.entry(t.head).or_default().push(t.index);
    }
    let (mut lo, mut hi) = (k, k);
    let mut stack = vec![k];
    while let Some(j) = stack.pop() {
        lo = lo.min(j);
        hi = hi.max(j);
        stack.extend(children.get(&j).into_iter().flatten());
    }
    (lo, hi)
}

/// `new_text -> max frequency` from enumerating every `(l, k, r)` and
/// scanning the raw rows, for nodes whose lemmas equal their forms and
/// with verbatim insertion.
pub fn brute_force(node: &ParsedNode, edges: &[(String, String, u64)]) -> BTreeMap<String, u64> {
    let mut merged: BTreeMap<(&str, &str), u64> = BTreeMap::new();
    for (hypo, hyper, f) in edges {
        if hypo != hyper {
            *merged.entry((hypo.as_str(), hyper.as_str())).or_default() += f;
        }
    }
    let forms: Vec<String> = node.tokens().iter().map(|t| t.form.to_lowercase()).collect();
    let mut out: BTreeMap<String, u64> = BTreeMap::new();
    for t in node.tokens() {
        if t.upos != "NOUN" && t.upos != "PROPN" {
            continue;
        }
        let k = t.index;
        let (lo, hi) = dfs_span(node, k);
        for l in lo..=k {
            for r in k..=hi {
                let key = forms[l - 1..r].join(" ");
                for (&(hypo, hyper), &f) in &merged {
                    let replacement = if hypo == key {
                        hyper
                    } else if hyper == key {
                        hypo
                    } else {
                        continue;
                    };
                    let forms: Vec<&str> = node.tokens().iter().map(|t| t.form.as_str()).collect();
                    let text = [&forms[..l - 1], &[replacement][..], &forms[r..]].concat().join(" ");
                    if text == node.text() {
                        continue;
                    }
                    let slot = out.entry(text).or_default();
                    *slot = (*slot).max(f);
                }
            }
        }
    }
    out
}
