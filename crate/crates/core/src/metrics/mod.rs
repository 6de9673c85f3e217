//! Diversity and novelty of generated nodes, raw and after removing
//! structural words.
//!
//! All ratios divide by the number of produced nodes, so sets of different
//! sizes stay comparable. Distinct counts are pooled over every seed and
//! relation in a generation set.

mod structural;

use std::collections::HashSet;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use structural::{normalize_node, StructuralWords};

use crate::sampler::Side;
use crate::store::Triple;
use crate::text::words;

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("generation set is empty")]
    Empty,
    #[error("cannot open {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("read failed: {0}")]
    Read(#[source] std::io::Error),
    #[error("line {line}: {reason}")]
    Malformed { line: usize, reason: String },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenerationRecord {
    pub seed: Triple,
    pub side: Side,
    pub generated: String,
}

/// Generated nodes grouped by the seed triple they came from.
#[derive(Debug, Clone, Default)]
pub struct GenerationSet {
    records: Vec<GenerationRecord>,
    seeds: HashSet<Triple>,
    extra_seeds: usize,
}

impl GenerationSet {
    pub fn new(records: Vec<GenerationRecord>) -> Self {
        let seeds = records.iter().map(|r| r.seed.clone()).collect();
        Self {
            records,
            seeds,
            extra_seeds: 0,
        }
    }

    /// Counts seeds that produced nothing towards N/Seed.
    pub fn with_total_seeds(mut self, total: usize) -> Self {
        self.extra_seeds = total.saturating_sub(self.seeds.len());
        self
    }

    pub fn records(&self) -> &[GenerationRecord] {
        &self.records
    }

    pub fn seed_count(&self) -> usize {
        self.seeds.len() + self.extra_seeds
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Reads `seed_head \t relation \t seed_tail \t side \t generated_node`.
    pub fn from_reader(mut reader: impl BufRead) -> Result<Self, MetricsError> {
        let mut records = Vec::new();
        let mut line = String::new();
        let mut line_no = 0;
        loop {
            line.clear();
            if reader.read_line(&mut line).map_err(MetricsError::Read)? == 0 {
                break;
            }
            line_no += 1;
            let row = line.trim_end_matches(['\n', '\r']);
            if row.is_empty() {
                continue;
            }
            let cols: Vec<&str> = row.split('\t').collect();
            if cols.len() != 5 {
                return Err(MetricsError::Malformed {
                    line: line_no,
                    reason: format!("expected 5 columns, found {}", cols.len()),
                });
            }
            let side = cols[3].parse().map_err(|reason| MetricsError::Malformed {
                line: line_no,
                reason,
            })?;
            records.push(GenerationRecord {
                seed: Triple::new(cols[0], cols[1], cols[2]),
                side,
                generated: cols[4].to_string(),
            });
        }
        Ok(Self::new(records))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, MetricsError> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|source| MetricsError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_reader(BufReader::new(file))
    }

    fn nodes(&self) -> impl Iterator<Item = &str> + '_ {
        self.records.iter().map(|r| r.generated.as_str())
    }
}

/// Reads one node per line.
pub fn load_node_set(path: impl AsRef<Path>) -> Result<HashSet<String>, MetricsError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| MetricsError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut nodes = HashSet::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(MetricsError::Read)?;
        if !line.is_empty() {
            nodes.insert(line);
        }
    }
    Ok(nodes)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Diversity {
    pub dist_1: f64,
    pub dist_2: f64,
    pub dist_n: f64,
    pub n_per_seed: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Novelty {
    /// Novel produced nodes over all produced nodes.
    pub n_t: f64,
    /// Novel distinct nodes over distinct nodes.
    pub n_u: f64,
}

fn ratio(num: usize, den: usize) -> f64 {
    num as f64 / den as f64
}

pub fn compute_diversity(generations: &GenerationSet) -> Result<Diversity, MetricsError> {
    if generations.is_empty() {
        return Err(MetricsError::Empty);
    }
    let total = generations.len();
    let mut unigrams = HashSet::new();
    let mut bigrams = HashSet::new();
    let mut nodes = HashSet::new();
    for node in generations.nodes() {
        let tokens: Vec<&str> = words(node).collect();
        unigrams.extend(tokens.iter().copied());
        bigrams.extend(tokens.windows(2).map(|w| (w[0], w[1])));
        nodes.insert(node);
    }
    Ok(Diversity {
        dist_1: ratio(unigrams.len(), total),
        dist_2: ratio(bigrams.len(), total),
        dist_n: ratio(nodes.len(), total),
        n_per_seed: ratio(total, generations.seed_count().max(1)),
    })
}

fn novelty_of<'a>(produced: impl Iterator<Item = &'a str>, train: &HashSet<String>) -> Result<Novelty, MetricsError> {
    let mut total = 0;
    let mut novel = 0;
    let mut distinct: HashSet<&str> = HashSet::new();
    for node in produced {
        total += 1;
        novel += usize::from(!train.contains(node));
        distinct.insert(node);
    }
    if total == 0 {
        return Err(MetricsError::Empty);
    }
    let novel_distinct = distinct.iter().filter(|n| !train.contains(**n)).count();
    Ok(Novelty {
        n_t: ratio(novel, total),
        n_u: ratio(novel_distinct, distinct.len()),
    })
}

pub fn compute_novelty(generations: &GenerationSet, train_nodes: &HashSet<String>) -> Result<Novelty, MetricsError> {
    novelty_of(generations.nodes(), train_nodes)
}

/// Every row of the diversity/novelty table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub n_per_seed: f64,
    pub dist_n: f64,
    pub dist_1: f64,
    pub dist_2: f64,
    pub novel_per_total: f64,
    pub novel_per_unique: f64,
    pub dist_n_norm: f64,
    pub novel_per_total_norm: f64,
    pub novel_per_unique_norm: f64,
}

impl MetricsReport {
    pub fn compute(
        generations: &GenerationSet,
        train_nodes: &HashSet<String>,
        structural: &StructuralWords,
    ) -> Result<Self, MetricsError> {
        let diversity = compute_diversity(generations)?;
        let novelty = compute_novelty(generations, train_nodes)?;

        let normalized: Vec<String> = generations
            .nodes()
            .map(|n| normalize_node(n, structural))
            .collect();
        let normalized_train: HashSet<String> = train_nodes
            .iter()
            .map(|n| normalize_node(n, structural))
            .collect();
        let distinct_norm = normalized.iter().collect::<HashSet<_>>().len();
        let novelty_norm = novelty_of(normalized.iter().map(String::as_str), &normalized_train)?;

        Ok(Self {
            n_per_seed: diversity.n_per_seed,
            dist_n: diversity.dist_n,
            dist_1: diversity.dist_1,
            dist_2: diversity.dist_2,
            novel_per_total: novelty.n_t,
            novel_per_unique: novelty.n_u,
            dist_n_norm: ratio(distinct_norm, normalized.len()),
            novel_per_total_norm: novelty_norm.n_t,
            novel_per_unique_norm: novelty_norm.n_u,
        })
    }

    /// `(row name, value, is_percentage)` in table order.
    pub fn rows(&self) -> [(&'static str, f64, bool); 9] {
        [
            ("N/Seed", self.n_per_seed, false),
            ("Dist-N", self.dist_n, true),
            ("Dist-1", self.dist_1, true),
            ("Dist-2", self.dist_2, true),
            ("N/T N", self.novel_per_total, true),
            ("N/U N", self.novel_per_unique, true),
            ("Dist-N-Norm", self.dist_n_norm, true),
            ("N/T N-Norm", self.novel_per_total_norm, true),
            ("N/U N-Norm", self.novel_per_unique_norm, true),
        ]
    }
}

impl fmt::Display for MetricsReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{:<12} {:>10}", "Metric", "Value")?;
        for (name, value, pct) in self.rows() {
            if pct {
                writeln!(f, "{name:<12} {:>9.2}%", value * 100.0)?;
            } else {
                writeln!(f, "{name:<12} {value:>10.2}")?;
            }
        }
        Ok(())
    }
}
