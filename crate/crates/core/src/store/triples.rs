//! Commonsense triple store with interned node text.

use std::collections::HashSet;
use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;
use std::str::FromStr;

use indexmap::IndexSet;
use serde::{Deserialize, Serialize};

use super::{ErrorPolicy, LoadError, LoadReport};

const ATOMIC_RELATIONS: [&str; 9] = [
    "oEffect", "oReact", "oWant", "xAttr", "xEffect", "xIntent", "xNeed", "xReact", "xWant",
];

const ASER_RELATIONS: [&str; 15] = [
    "Precedence",
    "Succession",
    "Synchronous",
    "Reason",
    "Result",
    "Condition",
    "Contrast",
    "Concession",
    "Conjunction",
    "Instantiation",
    "Restatement",
    "ChosenAlternative",
    "Alternative",
    "Exception",
    "Co_Occurrence",
];

/// Source KG of a triple file; fixes the relation vocabulary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CkgFormat {
    AtomicTsv,
    AserTsv,
}

impl CkgFormat {
    pub fn relations(self) -> &'static [&'static str] {
        match self {
            CkgFormat::AtomicTsv => &ATOMIC_RELATIONS,
            CkgFormat::AserTsv => &ASER_RELATIONS,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            CkgFormat::AtomicTsv => "atomic-tsv",
            CkgFormat::AserTsv => "aser-tsv",
        }
    }

    /// ASER stores lemmatized node text.
    pub fn is_lemmatized(self) -> bool {
        matches!(self, CkgFormat::AserTsv)
    }
}

impl fmt::Display for CkgFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for CkgFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "atomic-tsv" | "atomic" => Ok(CkgFormat::AtomicTsv),
            "aser-tsv" | "aser" => Ok(CkgFormat::AserTsv),
            other => Err(format!("unknown CKG format `{other}`")),
        }
    }
}

/// One owned ⟨head, relation, tail⟩ edge.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Triple {
    pub head: String,
    pub relation: String,
    pub tail: String,
}

impl Triple {
    pub fn new(head: impl Into<String>, relation: impl Into<String>, tail: impl Into<String>) -> Self {
        Triple {
            head: head.into(),
            relation: relation.into(),
            tail: tail.into(),
        }
    }

    pub fn to_tsv(&self) -> String {
        format!("{}\t{}\t{}", self.head, self.relation, self.tail)
    }
}

/// Borrowed view of a stored triple.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct TripleRef<'a> {
    pub head: &'a str,
    pub relation: &'a str,
    pub tail: &'a str,
}

impl TripleRef<'_> {
    pub fn to_owned(self) -> Triple {
        Triple::new(self.head, self.relation, self.tail)
    }
}

type Key = (u32, u16, u32);

#[derive(Debug, Clone)]
pub struct TripleStoreBuilder {
    format: CkgFormat,
    nodes: IndexSet<Box<str>>,
    triples: Vec<Key>,
    membership: HashSet<Key>,
}

impl TripleStoreBuilder {
    pub fn new(format: CkgFormat) -> Self {
        Self {
            format,
            nodes: IndexSet::new(),
            triples: Vec::new(),
            membership: HashSet::new(),
        }
    }

    fn intern(&mut self, text: &str) -> u32 {
        if let Some(id) = self.nodes.get_index_of(text) {
            return id as u32;
        }
        self.nodes.insert_full(text.into()).0 as u32
    }

    /// Registers a node that may end up with no triples.
    pub fn add_node(&mut self, text: &str) -> Result<(), String> {
        if text.trim().is_empty() {
            return Err("empty node text".into());
        }
        self.intern(text);
        Ok(())
    }

    /// Adds a triple. Returns `Ok(false)` for an exact duplicate.
    pub fn add(&mut self, head: &str, relation: &str, tail: &str) -> Result<bool, String> {
        let rel = self
            .format
            .relations()
            .iter()
            .position(|r| *r == relation)
            .ok_or_else(|| format!("unknown relation `{relation}` for {}", self.format))?;
        if head.trim().is_empty() || tail.trim().is_empty() {
            return Err("empty node text".into());
        }
        let key = (self.intern(head), rel as u16, self.intern(tail));
        if self.membership.insert(key) {
            self.triples.push(key);
            Ok(true)
        } else {
            Ok(false)
        }
    }

    pub fn build(self) -> TripleStore {
        let relation_count = self.format.relations().len();
        let mut heads: Vec<u32> = self.triples.iter().map(|k| k.0).collect();
        heads.sort_unstable();
        heads.dedup();
        let mut tails_by_relation = vec![Vec::new(); relation_count];
        for &(_, r, t) in &self.triples {
            tails_by_relation[r as usize].push(t);
        }
        for tails in &mut tails_by_relation {
            tails.sort_unstable();
            tails.dedup();
        }
        TripleStore {
            format: self.format,
            nodes: self.nodes,
            triples: self.triples,
            membership: self.membership,
            heads,
            tails_by_relation,
        }
    }
}

/// Deduplicated set of triples with a membership index, the head-node set
/// and per-relation tail sets. Immutable once built.
#[derive(Debug, Clone)]
pub struct TripleStore {
    format: CkgFormat,
    nodes: IndexSet<Box<str>>,
    triples: Vec<Key>,
    membership: HashSet<Key>,
    heads: Vec<u32>,
    tails_by_relation: Vec<Vec<u32>>,
}

impl PartialEq for TripleStore {
    fn eq(&self, other: &Self) -> bool {
        self.format == other.format
            && self.nodes.iter().eq(other.nodes.iter())
            && self.triples == other.triples
    }
}

impl Eq for TripleStore {}

impl TripleStore {
    pub fn load(
        path: impl AsRef<Path>,
        format: CkgFormat,
        on_error: ErrorPolicy,
    ) -> Result<(Self, LoadReport), LoadError> {
        let path = path.as_ref();
        let file = File::open(path).map_err(|source| LoadError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_reader(BufReader::new(file), format, on_error)
    }

    pub fn from_reader(
        reader: impl BufRead,
        format: CkgFormat,
        on_error: ErrorPolicy,
    ) -> Result<(Self, LoadReport), LoadError> {
        let mut builder = TripleStoreBuilder::new(format);
        let report = read_rows_into(&mut builder, reader, on_error)?;
        Ok((builder.build(), report))
    }

    pub fn from_triples<'a>(
        format: CkgFormat,
        triples: impl IntoIterator<Item = (&'a str, &'a str, &'a str)>,
    ) -> Result<Self, LoadError> {
        let mut builder = TripleStoreBuilder::new(format);
        for (h, r, t) in triples {
            builder
                .add(h, r, t)
                .map_err(|reason| LoadError::Malformed { line: 0, reason })?;
        }
        Ok(builder.build())
    }

    pub fn format(&self) -> CkgFormat {
        self.format
    }

    pub fn len(&self) -> usize {
        self.triples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triples.is_empty()
    }

    /// Number of nodes, including any registered without triples.
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn relations(&self) -> &'static [&'static str] {
        self.format.relations()
    }

    pub fn node(&self, id: u32) -> &str {
        &self.nodes[id as usize]
    }

    pub fn node_id(&self, text: &str) -> Option<u32> {
        self.nodes.get_index_of(text).map(|i| i as u32)
    }

    pub fn nodes(&self) -> impl ExactSizeIterator<Item = &str> + '_ {
        self.nodes.iter().map(|n| &**n)
    }

    pub fn relation_id(&self, relation: &str) -> Option<u16> {
        self.relations()
            .iter()
            .position(|r| *r == relation)
            .map(|i| i as u16)
    }

    pub fn get(&self, index: usize) -> TripleRef<'_> {
        let (h, r, t) = self.triples[index];
        TripleRef {
            head: self.node(h),
            relation: self.relations()[r as usize],
            tail: self.node(t),
        }
    }

    /// Interned ids `(head, relation, tail)` of the triple at `index`.
    pub fn ids(&self, index: usize) -> (u32, u16, u32) {
        self.triples[index]
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = TripleRef<'_>> + '_ {
        (0..self.len()).map(move |i| self.get(i))
    }

    pub fn contains_parts(&self, head: &str, relation: &str, tail: &str) -> bool {
        match (self.node_id(head), self.relation_id(relation), self.node_id(tail)) {
            (Some(h), Some(r), Some(t)) => self.membership.contains(&(h, r, t)),
            _ => false,
        }
    }

    pub fn contains(&self, triple: &Triple) -> bool {
        self.contains_parts(&triple.head, &triple.relation, &triple.tail)
    }

    /// Sorted ids of every node that appears as a head.
    pub fn head_nodes(&self) -> &[u32] {
        &self.heads
    }

    /// Sorted ids of every node that appears as a tail of `relation`.
    pub fn tail_nodes(&self, relation: u16) -> &[u32] {
        &self.tails_by_relation[relation as usize]
    }

    /// Drops every triple whose relation is excluded; with `drop_isolated`,
    /// also drops nodes left without a triple.
    pub fn prune(&self, excluded_relations: &[&str], drop_isolated: bool) -> Result<Self, LoadError> {
        let mut excluded = vec![false; self.relations().len()];
        for name in excluded_relations {
            let id = self
                .relation_id(name)
                .ok_or_else(|| LoadError::UnknownRelation((*name).to_string()))?;
            excluded[id as usize] = true;
        }
        let mut builder = TripleStoreBuilder::new(self.format);
        if !drop_isolated {
            for node in self.nodes() {
                builder.intern(node);
            }
        }
        for &(h, r, t) in &self.triples {
            if !excluded[r as usize] {
                builder
                    .add(self.node(h), self.relations()[r as usize], self.node(t))
                    .expect("stored triples are valid");
            }
        }
        Ok(builder.build())
    }

    /// A new store holding the triples at `indices`, in the given order.
    pub fn subset(&self, indices: &[usize]) -> Self {
        let mut builder = TripleStoreBuilder::new(self.format);
        for &i in indices {
            let t = self.get(i);
            builder
                .add(t.head, t.relation, t.tail)
                .expect("stored triples are valid");
        }
        builder.build()
    }

    /// Union of several stores of the same format, first-seen order.
    pub fn union<'a>(stores: impl IntoIterator<Item = &'a TripleStore>) -> Option<Self> {
        let mut stores = stores.into_iter().peekable();
        let mut builder = TripleStoreBuilder::new(stores.peek()?.format);
        for store in stores {
            for t in store.iter() {
                builder
                    .add(t.head, t.relation, t.tail)
                    .expect("formats agree");
            }
        }
        Some(builder.build())
    }

    /// Writes `head \t relation \t tail` rows.
    pub fn write_tsv(&self, mut writer: impl std::io::Write) -> std::io::Result<()> {
        for t in self.iter() {
            writeln!(writer, "{}\t{}\t{}", t.head, t.relation, t.tail)?;
        }
        Ok(())
    }
}

fn read_rows_into(
    builder: &mut TripleStoreBuilder,
    mut reader: impl BufRead,
    on_error: ErrorPolicy,
) -> Result<LoadReport, LoadError> {
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
        if row.is_empty() {
            continue;
        }
        report.rows_read += 1;
        let cols: Vec<&str> = row.split('\t').collect();
        let outcome = if cols.len() != 3 {
            Err(format!("expected 3 columns, found {}", cols.len()))
        } else {
            builder.add(cols[0], cols[1], cols[2])
        };
        match outcome {
            Ok(true) => report.rows_accepted += 1,
            Ok(false) => report.rows_ignored += 1,
            Err(reason) => {
                let err = LoadError::Malformed {
                    line: line_no,
                    reason,
                };
                match on_error {
                    ErrorPolicy::Abort => return Err(err),
                    ErrorPolicy::Skip => report.record_skip(&err),
                }
            }
        }
    }
    Ok(report)
}

impl TripleStoreBuilder {
    /// Reads TSV rows into this builder.
    pub fn read_tsv(&mut self, reader: impl BufRead, on_error: ErrorPolicy) -> Result<LoadReport, LoadError> {
        read_rows_into(self, reader, on_error)
    }
}
