//! The IsA concept graph: ⟨hypo, IsA, hyper, frequency⟩ tuples indexed in
//! both directions.
//!
//! Phrases are interned once and every edge is stored twice, as a
//! compressed adjacency row in the forward (hypo → hypers) and the inverse
//! (hyper → hypos) index. Rows are pre-sorted by frequency descending and
//! then by phrase, so lookups never sort.

use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;
use std::str::FromStr;

use indexmap::IndexSet;
use serde::{Deserialize, Serialize};

use super::{ErrorPolicy, LoadError, LoadReport};
use crate::text::normalize_phrase;

/// Which way an IsA lookup walks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    /// Phrase → its hypernyms (instance to concept).
    Abstraction,
    /// Phrase → its hyponyms (concept to instance).
    Instantiation,
}

impl Direction {
    pub const BOTH: [Direction; 2] = [Direction::Abstraction, Direction::Instantiation];

    pub fn as_str(self) -> &'static str {
        match self {
            Direction::Abstraction => "abstraction",
            Direction::Instantiation => "instantiation",
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Direction {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "abstraction" => Ok(Direction::Abstraction),
            "instantiation" => Ok(Direction::Instantiation),
            other => Err(format!("unknown direction `{other}`")),
        }
    }
}

/// Column order of a concept-graph TSV row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RowOrientation {
    /// `hyper \t hypo \t frequency`, the layout of the public Probase dump.
    #[default]
    HyperHypo,
    /// `hypo \t hyper \t frequency`.
    HypoHyper,
}

/// One IsA tuple.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ConceptEdge {
    pub hypo: String,
    pub hyper: String,
    pub frequency: u64,
}

#[derive(Debug, Clone)]
pub struct ConceptLoadOptions {
    pub min_frequency: u64,
    pub orientation: RowOrientation,
    pub on_error: ErrorPolicy,
}

impl Default for ConceptLoadOptions {
    fn default() -> Self {
        Self {
            min_frequency: 1,
            orientation: RowOrientation::HyperHypo,
            on_error: ErrorPolicy::Abort,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
struct Adjacency {
    offsets: Vec<u64>,
    targets: Vec<u32>,
    frequencies: Vec<u64>,
}

impl Adjacency {
    fn row(&self, id: u32) -> std::ops::Range<usize> {
        let id = id as usize;
        self.offsets[id] as usize..self.offsets[id + 1] as usize
    }
}

/// Immutable, bidirectionally indexed IsA graph.
#[derive(Debug, Clone, Default)]
pub struct ConceptGraph {
    phrases: IndexSet<Box<str>>,
    forward: Adjacency,
    inverse: Adjacency,
}

impl PartialEq for ConceptGraph {
    fn eq(&self, other: &Self) -> bool {
        self.phrases.iter().eq(other.phrases.iter())
            && self.forward == other.forward
            && self.inverse == other.inverse
    }
}

impl Eq for ConceptGraph {}

/// Accumulates raw rows; duplicates are merged when [`build`](Self::build)
/// runs.
#[derive(Debug, Default)]
pub struct ConceptGraphBuilder {
    phrases: IndexSet<Box<str>>,
    rows: Vec<(u32, u32, u64)>,
}

impl ConceptGraphBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    fn intern(&mut self, phrase: String) -> u32 {
        let (id, _) = self.phrases.insert_full(phrase.into_boxed_str());
        id as u32
    }

    /// Adds one edge. Phrases are normalized; self-loops and empty phrases
    /// are ignored and reported as `false`.
    pub fn add(&mut self, hypo: &str, hyper: &str, frequency: u64) -> bool {
        let hypo = normalize_phrase(hypo);
        let hyper = normalize_phrase(hyper);
        if hypo.is_empty() || hyper.is_empty() || hypo == hyper || frequency == 0 {
            return false;
        }
        let hypo = self.intern(hypo);
        let hyper = self.intern(hyper);
        self.rows.push((hypo, hyper, frequency));
        true
    }

    /// Merges duplicates by summing, drops edges whose merged frequency is
    /// below `min_frequency`, and builds both indexes.
    pub fn build(self, min_frequency: u64) -> (ConceptGraph, usize) {
        let Self { phrases, mut rows } = self;
        rows.sort_unstable_by_key(|&(hypo, hyper, _)| (hypo, hyper));
        let before = rows.len();
        let mut merged: Vec<(u32, u32, u64)> = Vec::with_capacity(rows.len());
        for (hypo, hyper, f) in rows {
            match merged.last_mut() {
                Some(last) if last.0 == hypo && last.1 == hyper => {
                    last.2 = last.2.saturating_add(f)
                }
                _ => merged.push((hypo, hyper, f)),
            }
        }
        let duplicates = before - merged.len();
        merged.retain(|&(_, _, f)| f >= min_frequency);

        // Compact the phrase table to phrases that still carry an edge,
        // preserving first-seen order.
        let mut used = vec![false; phrases.len()];
        for &(hypo, hyper, _) in &merged {
            used[hypo as usize] = true;
            used[hyper as usize] = true;
        }
        let mut remap = vec![u32::MAX; phrases.len()];
        let mut compact = IndexSet::with_capacity(used.iter().filter(|u| **u).count());
        for (old, phrase) in phrases.into_iter().enumerate() {
            if used[old] {
                remap[old] = compact.insert_full(phrase).0 as u32;
            }
        }
        for row in &mut merged {
            row.0 = remap[row.0 as usize];
            row.1 = remap[row.1 as usize];
        }

        let forward = build_adjacency(&compact, merged.iter().map(|&(h, t, f)| (h, t, f)));
        let inverse = build_adjacency(&compact, merged.iter().map(|&(h, t, f)| (t, h, f)));
        (
            ConceptGraph {
                phrases: compact,
                forward,
                inverse,
            },
            duplicates,
        )
    }
}

fn build_adjacency(
    phrases: &IndexSet<Box<str>>,
    edges: impl Iterator<Item = (u32, u32, u64)> + Clone,
) -> Adjacency {
    let n = phrases.len();
    let mut offsets = vec![0u64; n + 1];
    for (src, _, _) in edges.clone() {
        offsets[src as usize + 1] += 1;
    }
    for i in 0..n {
        offsets[i + 1] += offsets[i];
    }
    let total = offsets[n] as usize;
    let mut cursor: Vec<u64> = offsets[..n].to_vec();
    let mut targets = vec![0u32; total];
    let mut frequencies = vec![0u64; total];
    for (src, dst, f) in edges {
        let slot = cursor[src as usize] as usize;
        cursor[src as usize] += 1;
        targets[slot] = dst;
        frequencies[slot] = f;
    }
    for i in 0..n {
        let range = offsets[i] as usize..offsets[i + 1] as usize;
        if range.len() < 2 {
            continue;
        }
        let mut row: Vec<(u32, u64)> = range
            .clone()
            .map(|j| (targets[j], frequencies[j]))
            .collect();
        row.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| phrases[a.0 as usize].cmp(&phrases[b.0 as usize])));
        for (j, (t, f)) in range.zip(row) {
            targets[j] = t;
            frequencies[j] = f;
        }
    }
    Adjacency {
        offsets,
        targets,
        frequencies,
    }
}

/// Iterator over `(phrase, frequency)` hits of one lookup.
#[derive(Debug, Clone)]
pub struct IsaHits<'a> {
    graph: &'a ConceptGraph,
    adjacency: &'a Adjacency,
    range: std::ops::Range<usize>,
}

impl<'a> Iterator for IsaHits<'a> {
    type Item = (&'a str, u64);

    fn next(&mut self) -> Option<Self::Item> {
        let j = self.range.next()?;
        let target = self.adjacency.targets[j] as usize;
        Some((&self.graph.phrases[target], self.adjacency.frequencies[j]))
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        self.range.size_hint()
    }
}

impl ExactSizeIterator for IsaHits<'_> {}

const INDEX_MAGIC: &[u8; 8] = b"KGCISA\0\0";
const INDEX_VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
struct IndexPayload {
    phrases: Vec<String>,
    forward: Adjacency,
    inverse: Adjacency,
}

impl ConceptGraph {
    /// Loads a concept-graph TSV.
    pub fn load(
        path: impl AsRef<Path>,
        options: &ConceptLoadOptions,
    ) -> Result<(Self, LoadReport), LoadError> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|source| LoadError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_reader(BufReader::new(file), options)
    }

    pub fn from_reader(
        mut reader: impl BufRead,
        options: &ConceptLoadOptions,
    ) -> Result<(Self, LoadReport), LoadError> {
        let mut builder = ConceptGraphBuilder::new();
        let mut report = LoadReport::default();
        let mut line = String::new();
        let mut line_no = 0usize;
        loop {
            line.clear();
            if reader.read_line(&mut line).map_err(LoadError::Read)? == 0 {
                break;
            }
            line_no += 1;
            let row = line.trim_end_matches(['\n', '\r']);
            if row.trim().is_empty() {
                continue;
            }
            report.rows_read += 1;
            match parse_concept_row(row, options.orientation) {
                Ok((hypo, hyper, f)) => {
                    if builder.add(hypo, hyper, f) {
                        report.rows_accepted += 1;
                    } else {
                        report.rows_ignored += 1;
                    }
                }
                Err(reason) => {
                    let err = LoadError::Malformed {
                        line: line_no,
                        reason,
                    };
                    match options.on_error {
                        ErrorPolicy::Abort => return Err(err),
                        ErrorPolicy::Skip => report.record_skip(&err),
                    }
                }
            }
        }
        let (graph, duplicates) = builder.build(options.min_frequency.max(1));
        report.duplicates_merged = duplicates;
        Ok((graph, report))
    }

    /// Builds a graph straight from edges, mostly for fixtures.
    pub fn from_edges<'a>(edges: impl IntoIterator<Item = (&'a str, &'a str, u64)>) -> Self {
        let mut builder = ConceptGraphBuilder::new();
        for (hypo, hyper, f) in edges {
            builder.add(hypo, hyper, f);
        }
        builder.build(1).0
    }

    /// Number of distinct phrases that carry at least one edge.
    pub fn phrase_count(&self) -> usize {
        self.phrases.len()
    }

    /// Number of distinct (hypo, hyper) edges.
    pub fn edge_count(&self) -> usize {
        self.forward.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.edge_count() == 0
    }

    /// Lookup on an already normalized key.
    pub fn lookup(&self, key: &str, direction: Direction) -> IsaHits<'_> {
        let adjacency = match direction {
            Direction::Abstraction => &self.forward,
            Direction::Instantiation => &self.inverse,
        };
        let range = match self.phrases.get_index_of(key) {
            Some(id) => adjacency.row(id as u32),
            None => 0..0,
        };
        IsaHits {
            graph: self,
            adjacency,
            range,
        }
    }

    /// Hypernyms (abstraction) or hyponyms (instantiation) of `phrase`,
    /// ordered by frequency descending, then lexicographically.
    pub fn query_isa(&self, phrase: &str, direction: Direction) -> Vec<(String, u64)> {
        let key = normalize_phrase(phrase);
        self.lookup(&key, direction)
            .map(|(p, f)| (p.to_owned(), f))
            .collect()
    }

    pub fn contains_phrase(&self, phrase: &str) -> bool {
        self.phrases.contains(phrase)
    }

    /// All edges in forward-index order.
    pub fn edges(&self) -> impl Iterator<Item = ConceptEdge> + '_ {
        (0..self.phrases.len() as u32).flat_map(move |id| {
            self.forward.row(id).map(move |j| ConceptEdge {
                hypo: self.phrases[id as usize].to_string(),
                hyper: self.phrases[self.forward.targets[j] as usize].to_string(),
                frequency: self.forward.frequencies[j],
            })
        })
    }

    /// Writes the versioned binary index.
    pub fn write_index(&self, mut writer: impl Write) -> Result<(), LoadError> {
        writer.write_all(INDEX_MAGIC).map_err(LoadError::Read)?;
        writer
            .write_all(&INDEX_VERSION.to_le_bytes())
            .map_err(LoadError::Read)?;
        let payload = IndexPayload {
            phrases: self.phrases.iter().map(|p| p.to_string()).collect(),
            forward: self.forward.clone(),
            inverse: self.inverse.clone(),
        };
        bincode::serialize_into(&mut writer, &payload)
            .map_err(|e| LoadError::Index(e.to_string()))?;
        writer.flush().map_err(LoadError::Read)
    }

    pub fn read_index(mut reader: impl Read) -> Result<Self, LoadError> {
        let mut header = [0u8; 12];
        reader.read_exact(&mut header).map_err(LoadError::Read)?;
        if &header[..8] != INDEX_MAGIC {
            return Err(LoadError::Index("not a concept-graph index".into()));
        }
        let version = u32::from_le_bytes(header[8..12].try_into().unwrap());
        if version != INDEX_VERSION {
            return Err(LoadError::Index(format!(
                "index version {version}, expected {INDEX_VERSION}"
            )));
        }
        let payload: IndexPayload =
            bincode::deserialize_from(reader).map_err(|e| LoadError::Index(e.to_string()))?;
        let n = payload.phrases.len();
        let phrases: IndexSet<Box<str>> = payload
            .phrases
            .into_iter()
            .map(String::into_boxed_str)
            .collect();
        for adjacency in [&payload.forward, &payload.inverse] {
            let ok = phrases.len() == n
                && adjacency.offsets.len() == n + 1
                && adjacency.targets.len() == adjacency.frequencies.len()
                && adjacency.offsets.last().copied() == Some(adjacency.targets.len() as u64)
                && adjacency.targets.iter().all(|&t| (t as usize) < n);
            if !ok {
                return Err(LoadError::Index("corrupt index payload".into()));
            }
        }
        Ok(Self {
            phrases,
            forward: payload.forward,
            inverse: payload.inverse,
        })
    }

    /// True when the file starts with the binary index magic.
    pub fn is_index_file(path: impl AsRef<Path>) -> bool {
        let mut magic = [0u8; 8];
        File::open(path)
            .and_then(|mut f| f.read_exact(&mut magic))
            .map(|_| &magic == INDEX_MAGIC)
            .unwrap_or(false)
    }

    /// Opens either a binary index or a TSV, detected by magic bytes.
    pub fn open(
        path: impl AsRef<Path>,
        options: &ConceptLoadOptions,
    ) -> Result<(Self, LoadReport), LoadError> {
        let path = path.as_ref();
        if Self::is_index_file(path) {
            let file = File::open(path).map_err(|source| LoadError::Io {
                path: path.to_path_buf(),
                source,
            })?;
            let graph = Self::read_index(BufReader::new(file))?;
            Ok((graph, LoadReport::default()))
        } else {
            Self::load(path, options)
        }
    }
}

fn parse_concept_row(
    row: &str,
    orientation: RowOrientation,
) -> Result<(&str, &str, u64), String> {
    let cols: Vec<&str> = row.split('\t').collect();
    if cols.len() != 3 {
        return Err(format!("expected 3 columns, found {}", cols.len()));
    }
    let frequency: u64 = cols[2]
        .trim()
        .parse()
        .map_err(|_| format!("frequency `{}` is not a non-negative integer", cols[2]))?;
    if frequency == 0 {
        return Err("frequency must be at least 1".into());
    }
    let (hypo, hyper) = match orientation {
        RowOrientation::HyperHypo => (cols[1], cols[0]),
        RowOrientation::HypoHyper => (cols[0], cols[1]),
    };
    if hypo.trim().is_empty() || hyper.trim().is_empty() {
        return Err("empty phrase".into());
    }
    Ok((hypo, hyper, frequency))
}
