//! Loading and indexing of the two graphs the toolkit works over: the IsA
//! concept graph and the commonsense triple store.

mod concept;
mod split;
mod triples;

use std::path::PathBuf;

use serde::Serialize;
use thiserror::Error;

pub use concept::{
    ConceptEdge, ConceptGraph, ConceptGraphBuilder, ConceptLoadOptions, Direction, IsaHits,
    RowOrientation,
};
pub use split::{split_sizes, split_triples, SplitRatios};
pub use triples::{CkgFormat, Triple, TripleRef, TripleStore, TripleStoreBuilder};

/// What a loader does with a row it cannot parse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ErrorPolicy {
    #[default]
    Abort,
    /// Skip the row and count it in the [`LoadReport`].
    Skip,
}

#[derive(Debug, Error)]
pub enum LoadError {
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
    #[error("binary index: {0}")]
    Index(String),
    #[error("unknown relation `{0}`")]
    UnknownRelation(String),
}

/// Row counters produced by every loader.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct LoadReport {
    pub rows_read: usize,
    pub rows_accepted: usize,
    /// Rows that parsed but carried nothing new (self-loops, exact
    /// duplicate triples).
    pub rows_ignored: usize,
    pub rows_skipped: usize,
    pub duplicates_merged: usize,
    /// The first few skip diagnostics, for the stats file.
    pub sample_errors: Vec<String>,
}

const MAX_SAMPLE_ERRORS: usize = 20;

impl LoadReport {
    fn record_skip(&mut self, err: &LoadError) {
        self.rows_skipped += 1;
        if self.sample_errors.len() < MAX_SAMPLE_ERRORS {
            self.sample_errors.push(err.to_string());
        }
    }
}
