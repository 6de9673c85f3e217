//! Expanding commonsense knowledge graphs by conceptualization.
//!
//! Entities mentioned in node text are found over the dependency parse,
//! replaced by their IsA abstractions or instantiations, and the rewritten
//! triples are used both as hard negatives for a triple discriminator and
//! as candidate new knowledge.
//!
//! * [`store`]: concept graph and triple store loading, pruning, splitting
//! * [`parse`]: CoNLL-U ingestion and subtree spans
//! * [`conceptualize`]: entity spans, lookup, grammar repair
//! * [`sampler`]: NS/EC negatives and balanced datasets
//! * [`metrics`]: diversity and novelty of generated nodes
//! * [`generate`]: seed expansion, scoring and acceptance

pub mod conceptualize;
pub mod generate;
pub mod metrics;
pub mod parse;
pub mod sampler;
pub mod store;
pub mod text;
