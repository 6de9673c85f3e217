use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use kgconcept_core::conceptualize::TextMode;
use kgconcept_core::sampler::NsMode;
use kgconcept_core::store::{CkgFormat, ErrorPolicy, RowOrientation, SplitRatios};
use serde::Serialize;

pub const SCORER_URL_ENV: &str = "KGCONCEPT_SCORER_URL";

#[derive(Debug, Parser)]
#[command(name = "kgconcept", version, about = "Expand commonsense knowledge graphs by IsA conceptualization")]
pub struct Cli {
    /// Worker threads for data-parallel stages (default: all cores).
    #[arg(long, global = true)]
    pub workers: Option<usize>,

    /// More log output; repeat for debug.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compile a concept-graph TSV into the binary index.
    BuildIndex(BuildIndexArgs),
    /// Load, deduplicate and prune a CKG triple file.
    IngestCkg(IngestArgs),
    /// Split a CKG into train/dev/test.
    Split(SplitArgs),
    /// Dump every conceptualization candidate of parsed nodes.
    Identify(IdentifyArgs),
    /// Build a labeled positive/negative dataset.
    EmitDataset(EmitArgs),
    /// Fraction of triples with a conceptualizable node.
    Coverage(CoverageArgs),
    /// Expand seed triples by conceptualization, score and filter them.
    Generate(GenerateArgs),
    /// Score a triple file with the scorer service.
    Score(ScoreArgs),
    /// Diversity and novelty of generated nodes.
    Metrics(MetricsArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Format {
    AtomicTsv,
    AserTsv,
}

impl Format {
    pub fn core(self) -> CkgFormat {
        match self {
            Format::AtomicTsv => CkgFormat::AtomicTsv,
            Format::AserTsv => CkgFormat::AserTsv,
        }
    }

    /// ASER nodes are lemmatized; ATOMIC nodes are surface text.
    pub fn default_text_mode(self) -> TextMode {
        match self {
            Format::AtomicTsv => TextMode::Surface,
            Format::AserTsv => TextMode::Lemmatized,
        }
    }

    pub fn default_ns_mode(self) -> NsMode {
        match self {
            Format::AtomicTsv => NsMode::Constrained,
            Format::AserTsv => NsMode::Unconstrained,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Surface,
    Lemmatized,
}

impl Mode {
    pub fn core(self) -> TextMode {
        match self {
            Mode::Surface => TextMode::Surface,
            Mode::Lemmatized => TextMode::Lemmatized,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Ns {
    Constrained,
    Unconstrained,
}

#[derive(Debug, Clone, Copy, Default, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum OnError {
    #[default]
    Abort,
    Skip,
}

impl OnError {
    pub fn core(self) -> ErrorPolicy {
        match self {
            OnError::Abort => ErrorPolicy::Abort,
            OnError::Skip => ErrorPolicy::Skip,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Orientation {
    /// `hyper \t hypo \t frequency`, as in the public Probase dump.
    #[default]
    HyperHypo,
    HypoHyper,
}

#[derive(Debug, Args, Serialize)]
pub struct ConceptArgs {
    /// Concept graph: a binary index or a TSV.
    #[arg(long)]
    pub concepts: PathBuf,
    /// Drop IsA edges below this (merged) frequency; TSV input only.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub min_frequency: u64,
    #[arg(long, value_enum, default_value_t = Orientation::HyperHypo)]
    pub orientation: Orientation,
    #[arg(long, value_enum, default_value_t = OnError::Abort)]
    pub on_error: OnError,
}

impl ConceptArgs {
    pub fn options(&self) -> kgconcept_core::store::ConceptLoadOptions {
        kgconcept_core::store::ConceptLoadOptions {
            min_frequency: self.min_frequency,
            orientation: match self.orientation {
                Orientation::HyperHypo => RowOrientation::HyperHypo,
                Orientation::HypoHyper => RowOrientation::HypoHyper,
            },
            on_error: self.on_error.core(),
        }
    }
}

#[derive(Debug, Args, Serialize)]
pub struct BuildIndexArgs {
    #[command(flatten)]
    pub concepts: ConceptArgs,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct IngestArgs {
    /// `head \t relation \t tail` rows.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum)]
    pub format: Format,
    /// Extra node texts, one per line, registered even without triples.
    #[arg(long)]
    pub nodes: Option<PathBuf>,
    /// Relation to remove (repeatable), e.g. Co_Occurrence.
    #[arg(long)]
    pub exclude: Vec<String>,
    /// Also remove nodes left without any triple.
    #[arg(long)]
    pub drop_isolated: bool,
    #[arg(long, value_enum, default_value_t = OnError::Abort)]
    pub on_error: OnError,
    #[arg(long)]
    pub out: PathBuf,
}

fn parse_ratios(s: &str) -> Result<String, String> {
    s.parse::<SplitRatios>().map(|r| r.to_string())
}

#[derive(Debug, Args, Serialize)]
pub struct SplitArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum)]
    pub format: Format,
    /// `train:dev:test` weights.
    #[arg(long, default_value = "8:1:1", value_parser = parse_ratios)]
    pub ratios: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Receives train.tsv, dev.tsv and test.tsv.
    #[arg(long)]
    pub out_dir: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct IdentifyArgs {
    /// CoNLL-U parses of the nodes.
    #[arg(long)]
    pub parses: PathBuf,
    #[command(flatten)]
    pub concepts: ConceptArgs,
    #[arg(long, value_enum, default_value_t = Mode::Surface)]
    pub text_mode: Mode,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct EmitArgs {
    /// Triples to build examples from (usually the train split).
    #[arg(long)]
    pub positives: PathBuf,
    /// Further known positives no negative may equal (repeatable);
    /// pass the dev and test splits here.
    #[arg(long)]
    pub filter: Vec<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Format,
    /// Required when --ec-ratio is above 0.
    #[arg(long)]
    pub concepts: Option<PathBuf>,
    #[arg(long)]
    pub parses: Option<PathBuf>,
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u64).range(1..))]
    pub min_frequency: u64,
    #[arg(long, value_enum, default_value_t = Orientation::HyperHypo)]
    pub orientation: Orientation,
    /// Share of negatives built by conceptualization.
    #[arg(long, default_value_t = 0.5)]
    pub ec_ratio: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Default: constrained for ATOMIC, unconstrained for ASER.
    #[arg(long, value_enum)]
    pub ns_mode: Option<Ns>,
    #[arg(long, default_value_t = 10)]
    pub max_retries: u32,
    /// Skip positives whose EC negative fails instead of using NS.
    #[arg(long)]
    pub strict_ec: bool,
    /// Default: surface for ATOMIC, lemmatized for ASER.
    #[arg(long, value_enum)]
    pub text_mode: Option<Mode>,
    /// JSON lines, one example each.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct CoverageArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum)]
    pub format: Format,
    #[arg(long)]
    pub parses: PathBuf,
    #[command(flatten)]
    pub concepts: ConceptArgs,
    #[arg(long, value_enum)]
    pub text_mode: Option<Mode>,
    /// JSON report; printed to stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScorerKind {
    /// Constant score, for dry runs and tests.
    Stub,
    Http,
}

#[derive(Debug, Args, Serialize)]
pub struct ScorerArgs {
    #[arg(long, value_enum, default_value_t = ScorerKind::Http)]
    pub scorer: ScorerKind,
    /// Base URL of the scoring service.
    #[arg(long, env = SCORER_URL_ENV)]
    pub scorer_url: Option<String>,
    #[arg(long, default_value_t = 0.5)]
    pub stub_score: f64,
    #[arg(long, default_value_t = 64, value_parser = clap::value_parser!(u64).range(1..))]
    pub batch_size: u64,
    #[arg(long, default_value_t = 30)]
    pub timeout_secs: u64,
    #[arg(long, default_value_t = 2)]
    pub retries: u32,
}

#[derive(Debug, Args, Serialize)]
pub struct GenerateArgs {
    /// Seed triples, e.g. the test split.
    #[arg(long)]
    pub seeds: PathBuf,
    /// Triples already in the CKG, for novelty marking (repeatable;
    /// default: the seeds).
    #[arg(long)]
    pub known: Vec<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Format,
    #[arg(long)]
    pub parses: PathBuf,
    #[command(flatten)]
    pub concepts: ConceptArgs,
    #[arg(long, value_enum)]
    pub text_mode: Option<Mode>,
    /// Keep triples scoring at least this.
    #[arg(long)]
    pub threshold: f64,
    /// Most candidates per seed side, by frequency.
    #[arg(long, default_value_t = 10)]
    pub per_side_cap: usize,
    /// Least IsA frequency of a candidate.
    #[arg(long, default_value_t = 1)]
    pub candidate_min_frequency: u64,
    #[command(flatten)]
    pub scorer: ScorerArgs,
    /// Accepted triples as CKG TSV; provenance and generation rows are
    /// written next to it.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct ScoreArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum)]
    pub format: Format,
    #[command(flatten)]
    pub scorer: ScorerArgs,
    /// `head \t relation \t tail \t score` rows.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct MetricsArgs {
    /// `seed_head \t relation \t seed_tail \t side \t generated_node` rows.
    #[arg(long)]
    pub generations: PathBuf,
    /// Training-set nodes, one per line.
    #[arg(long)]
    pub train_nodes: PathBuf,
    /// Replaces the shipped structural-word list.
    #[arg(long)]
    pub structural_words: Option<PathBuf>,
    /// Seeds that were expanded, including those that produced nothing.
    #[arg(long)]
    pub total_seeds: Option<usize>,
    #[arg(long)]
    pub json: bool,
    /// Also write the report here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}
