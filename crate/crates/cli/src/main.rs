//! `parafilter`: curate paraphrase corpora from the command line.
//!
//! Exit status is 0 on success, 1 when the input data is bad and 2 when
//! the invocation itself is wrong (unknown flags, out-of-range thresholds,
//! missing embedding store).

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use parafilter_core::corpus::{CorpusFormat, DedupKey, SplitRatios};
use parafilter_core::embed::MockMode;
use parafilter_core::sweep::SweepMetric;

#[derive(Debug, Parser)]
#[command(
    name = "parafilter",
    version,
    about = "Paraphrase corpus curation and scoring"
)]
struct Cli {
    /// Worker threads for per-pair work. Defaults to all cores.
    #[arg(long, global = true, env = "PARAFILTER_JOBS")]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Per-pair metrics as JSON-lines plus corpus averages.
    Score(ScoreArgs),
    /// Run the four-stage filter and keep the passing pairs.
    Filter(FilterArgs),
    /// Yield curve of one metric over a threshold grid, as CSV.
    Sweep(SweepArgs),
    /// Histogram of one metric, as CSV.
    Hist(HistArgs),
    /// Seeded train/validation/test split.
    Split(SplitArgs),
    /// Drop pairs whose normalized key was already seen.
    Dedup(DedupArgs),
    /// Emit mask-fill requests for POS-tagged sentences.
    AugmentPlan(AugmentPlanArgs),
    /// Merge mask fills into augmented pairs.
    AugmentMerge(AugmentMergeArgs),
    /// Keep back-translations whose two similarities clear a threshold.
    SelectCandidates(SelectArgs),
    /// Write a hash-based embedding store for testing without a model.
    MockEmbed(MockEmbedArgs),
}

#[derive(Debug, Args)]
struct CorpusIn {
    /// Input corpus.
    #[arg(short, long)]
    input: PathBuf,
    /// Corpus format; inferred from the extension when omitted.
    #[arg(long, value_parser = parse_format)]
    format: Option<CorpusFormat>,
}

#[derive(Debug, Args)]
struct StoreArgs {
    /// Embedding store holding `{id}:src` and `{id}:cand` matrices.
    #[arg(long, conflicts_with = "no_embeddings")]
    store: Option<PathBuf>,
    /// Skip every embedding-based metric.
    #[arg(long)]
    no_embeddings: bool,
}

#[derive(Debug, Args)]
struct ScoreArgs {
    #[command(flatten)]
    corpus: CorpusIn,
    #[command(flatten)]
    store: StoreArgs,
    /// Per-pair JSON-lines report; stdout when omitted.
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Also write the corpus summary as JSON.
    #[arg(long)]
    summary: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Preset {
    /// Main pipeline thresholds.
    Main,
    /// Re-filter thresholds for mask-filled pairs.
    Augment,
}

#[derive(Debug, Args)]
struct FilterFlags {
    /// Threshold preset the flags below override.
    #[arg(long, value_enum, default_value = "main")]
    preset: Preset,
    /// Minimum PINC, inclusive.
    #[arg(long)]
    pinc_min: Option<f64>,
    /// Lower edge of the BERTScore F1 band, inclusive.
    #[arg(long)]
    bert_min: Option<f64>,
    /// Upper edge of the BERTScore F1 band, inclusive.
    #[arg(long)]
    bert_max: Option<f64>,
    /// Reject candidates repeating any n-gram of this length.
    #[arg(long)]
    repeat_n: Option<usize>,
    /// Do not require a sentence terminator at the end of the candidate.
    #[arg(long)]
    no_punctuation: bool,
}

#[derive(Debug, Args)]
struct FilterArgs {
    #[command(flatten)]
    corpus: CorpusIn,
    #[command(flatten)]
    store: StoreArgs,
    #[command(flatten)]
    flags: FilterFlags,
    /// Passing pairs, in input order.
    #[arg(short, long)]
    output: PathBuf,
    /// Per-pair outcomes as JSON-lines.
    #[arg(long)]
    outcomes: Option<PathBuf>,
    /// Pipeline counts as JSON.
    #[arg(long)]
    stats: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    corpus: CorpusIn,
    /// Embedding store, needed for every metric except pinc.
    #[arg(long)]
    store: Option<PathBuf>,
    /// pinc, bertscore_f1 or sentence_similarity.
    #[arg(long, default_value = "pinc")]
    metric: SweepMetric,
    /// Comma-separated, strictly ascending.
    #[arg(long, value_delimiter = ',', default_value = "0.65,0.76,0.80")]
    thresholds: Vec<f64>,
    /// CSV destination; stdout when omitted.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct HistArgs {
    #[command(flatten)]
    corpus: CorpusIn,
    #[arg(long)]
    store: Option<PathBuf>,
    #[arg(long, default_value = "pinc")]
    metric: SweepMetric,
    /// Comma-separated bin edges, strictly ascending.
    #[arg(long, value_delimiter = ',', conflicts_with = "bins")]
    edges: Option<Vec<f64>>,
    /// Number of equal-width bins over --range.
    #[arg(long, default_value_t = 20)]
    bins: usize,
    /// Low and high edge for --bins.
    #[arg(long, value_delimiter = ',', num_args = 2, default_values_t = [0.0, 1.0])]
    range: Vec<f64>,
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SplitArgs {
    #[command(flatten)]
    corpus: CorpusIn,
    /// train:validation:test, as percentages or fractions.
    #[arg(long, default_value = "80:10:10", value_parser = parse_ratios)]
    ratios: SplitRatios,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Directory receiving train, validation and test files.
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Debug, Args)]
struct DedupArgs {
    #[command(flatten)]
    corpus: CorpusIn,
    /// source, candidate or pair.
    #[arg(long, default_value = "pair")]
    key: DedupKey,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Debug, Args)]
struct PosOrder {
    /// Comma-separated POS tags in masking order.
    #[arg(long, value_delimiter = ',')]
    pos_order: Option<Vec<String>>,
}

#[derive(Debug, Args)]
struct AugmentPlanArgs {
    /// Tagged sentences as JSON-lines `{"id","tokens","tags"}`.
    #[arg(long)]
    tagged: PathBuf,
    #[command(flatten)]
    pos: PosOrder,
    /// Fills received so far. When given, only the next request of each
    /// unfinished plan is written, with earlier fills applied.
    #[arg(long)]
    fills: Option<PathBuf>,
    /// Request JSON-lines; stdout when omitted.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct AugmentMergeArgs {
    /// Original pairs; ids match the tagged sentences.
    #[command(flatten)]
    corpus: CorpusIn,
    #[arg(long)]
    tagged: PathBuf,
    #[command(flatten)]
    pos: PosOrder,
    /// Fill JSON-lines `{"plan_id","step","token"}`.
    #[arg(long)]
    fills: PathBuf,
    /// Emit each augmented pair this many times.
    #[arg(long, default_value_t = 1, value_parser = clap::value_parser!(u32).range(1..))]
    repeat: u32,
    /// Re-filter the merged pairs with the augmentation preset.
    #[arg(long)]
    refilter: bool,
    #[command(flatten)]
    store: StoreArgs,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Debug, Args)]
struct SelectArgs {
    /// Candidate groups as JSON-lines
    /// `{"id","source","candidates":[{"text","sim_src_back","sim_src_pivot"}]}`.
    #[arg(short, long)]
    input: PathBuf,
    /// Both similarities must be strictly greater than this.
    #[arg(long, default_value_t = 0.7)]
    threshold: f64,
    #[arg(short, long)]
    output: PathBuf,
}

#[derive(Debug, Args)]
struct MockEmbedArgs {
    #[command(flatten)]
    corpus: CorpusIn,
    #[arg(long, default_value_t = 32)]
    dim: usize,
    /// tokens or sentence.
    #[arg(long, default_value = "tokens")]
    mode: MockMode,
    #[arg(short, long)]
    output: PathBuf,
}

fn parse_format(s: &str) -> Result<CorpusFormat, String> {
    s.parse()
}

fn parse_ratios(s: &str) -> Result<SplitRatios, String> {
    s.parse()
        .map_err(|e: parafilter_core::corpus::CorpusError| e.to_string())
}

/// Marks an error as the caller's fault (exit status 2).
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

pub fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn run(cli: Cli) -> anyhow::Result<()> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(usage("--jobs must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()?;
    }
    match cli.command {
        Command::Score(a) => commands::score(a),
        Command::Filter(a) => commands::filter(a),
        Command::Sweep(a) => commands::sweep(a),
        Command::Hist(a) => commands::hist(a),
        Command::Split(a) => commands::split(a),
        Command::Dedup(a) => commands::dedup(a),
        Command::AugmentPlan(a) => commands::augment_plan(a),
        Command::AugmentMerge(a) => commands::augment_merge(a),
        Command::SelectCandidates(a) => commands::select(a),
        Command::MockEmbed(a) => commands::mock_embed(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
