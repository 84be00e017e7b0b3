//! `gicurate`: ingest, harmonize, split, audit and score endoscopy image
//! collections. Exit codes: 0 success, 1 data or validation failure, 2 usage.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "gicurate", version, about)]
struct Cli {
    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Ingest every dataset of a collection config into per-dataset manifests.
    Ingest(IngestArgs),
    /// Merge manifests into one, recording input digests.
    Merge(MergeArgs),
    /// Project raw labels onto the profile's canonical classes.
    Map(MapArgs),
    /// Dataset × class distribution table.
    Summarize(SummarizeArgs),
    /// Patient-grouped stratified shuffle split.
    Split(SplitArgs),
    /// Patient-grouped stratified k-fold assignment.
    Kfold(KfoldArgs),
    /// Move whole groups between two splits to reach a target fraction.
    Rebalance(RebalanceArgs),
    /// Impose a filename-keyed external split.
    EnforceSplit(EnforceArgs),
    /// Check that no group spans several splits.
    Audit(AuditArgs),
    /// Report filename overlap between two manifests.
    Overlap(OverlapArgs),
    /// Class-balanced sampling weights.
    Weights(WeightsArgs),
    /// Score a prediction file against ground truth.
    Evaluate(EvaluateArgs),
    /// Generate a synthetic fixture collection.
    Fixtures(FixturesArgs),
}

#[derive(Debug, Args)]
struct ManifestInput {
    /// Input manifest (JSONL); repeat to merge several.
    #[arg(long = "manifest", required = true)]
    manifests: Vec<PathBuf>,
}

#[derive(Debug, Args)]
struct GroupingArgs {
    /// Group key fallback chain, e.g. `patient_id,video_id,record_id`.
    #[arg(long = "group-chain", default_value = "patient_id,video_id,record_id")]
    group_chain: String,
}

#[derive(Debug, Args)]
struct IngestArgs {
    #[arg(long)]
    collection: PathBuf,
    /// Output directory; one `<dataset_id>.jsonl` per dataset.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct MergeArgs {
    #[command(flatten)]
    input: ManifestInput,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct MapArgs {
    #[command(flatten)]
    input: ManifestInput,
    #[arg(long)]
    taxonomy: PathBuf,
    #[arg(long)]
    profile: PathBuf,
    /// Projected manifest; a `.summary.json` is written next to it.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct SummarizeArgs {
    #[command(flatten)]
    input: ManifestInput,
    /// Take the column order from this profile's target classes.
    #[arg(long)]
    profile: Option<PathBuf>,
    /// CSV output; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SplitArgs {
    #[command(flatten)]
    input: ManifestInput,
    /// Comma-separated split ratios summing to 1.
    #[arg(long)]
    ratios: String,
    #[arg(long)]
    seed: u64,
    #[command(flatten)]
    grouping: GroupingArgs,
    /// Weight of the split-size term in the cost.
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    /// Split names, one per ratio (default train,val[,test]).
    #[arg(long = "split-name")]
    split_names: Vec<String>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct KfoldArgs {
    #[command(flatten)]
    input: ManifestInput,
    #[arg(long)]
    k: usize,
    #[arg(long)]
    seed: u64,
    #[command(flatten)]
    grouping: GroupingArgs,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct RebalanceArgs {
    #[command(flatten)]
    input: ManifestInput,
    /// Assignment CSV; its JSON sidecar is read when present.
    #[arg(long)]
    assignment: PathBuf,
    #[arg(long)]
    from: String,
    #[arg(long)]
    to: String,
    /// Target fraction of all records left in `--from`.
    #[arg(long)]
    target: f64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Unmatched {
    Error,
    Passthrough,
}

#[derive(Debug, Args)]
struct EnforceArgs {
    #[command(flatten)]
    input: ManifestInput,
    /// CSV with header `match_key,split`.
    #[arg(long)]
    external: PathBuf,
    #[arg(long, value_enum, default_value = "error")]
    unmatched: Unmatched,
    #[arg(long)]
    case_insensitive: bool,
    #[command(flatten)]
    grouping: GroupingArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct AuditArgs {
    #[command(flatten)]
    input: ManifestInput,
    /// Assignment CSV; repeat to audit the union of several files.
    #[arg(long = "assignment", required = true)]
    assignments: Vec<PathBuf>,
    #[command(flatten)]
    grouping: GroupingArgs,
    /// Report JSON; stdout when absent.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct OverlapArgs {
    /// Exactly two manifests, `a` then `b`.
    #[arg(long = "manifest", required = true, num_args = 1)]
    manifests: Vec<PathBuf>,
    #[arg(long)]
    case_insensitive: bool,
    /// Exit with status 1 when any overlap is found.
    #[arg(long)]
    strict: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct SplitFilterArgs {
    /// Assignment CSV used with `--split-name`.
    #[arg(long, requires = "split_name")]
    assignment: Option<PathBuf>,
    /// Restrict to records of this split.
    #[arg(long = "split-name", requires = "assignment")]
    split_name: Option<String>,
}

#[derive(Debug, Args)]
struct WeightsArgs {
    #[command(flatten)]
    input: ManifestInput,
    #[command(flatten)]
    filter: SplitFilterArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct EvaluateArgs {
    #[arg(long)]
    pred: PathBuf,
    #[command(flatten)]
    input: ManifestInput,
    #[command(flatten)]
    filter: SplitFilterArgs,
    /// Require the prediction columns to follow this profile's class order.
    #[arg(long)]
    profile: Option<PathBuf>,
    #[arg(long)]
    match_by_filename: bool,
    #[arg(long)]
    case_insensitive: bool,
    /// Output directory for report.json, confusion.csv and ROC curves.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct FixturesArgs {
    /// endoextend24, tiny, planted-leak or planted-overlap.
    #[arg(long)]
    preset: String,
    #[arg(long, default_value_t = 24)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

/// Print a clap-style usage error and exit with status 2.
pub(crate) fn usage_error(message: String) -> ! {
    use clap::CommandFactory;
    Cli::command()
        .error(clap::error::ErrorKind::WrongNumberOfValues, message)
        .exit()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        _ => log::LevelFilter::Debug,
    };
    env_logger::Builder::new()
        .filter_level(level)
        .format_timestamp(None)
        .init();

    match commands::run(cli.command) {
        Ok(commands::Outcome::Success) => ExitCode::SUCCESS,
        Ok(commands::Outcome::Failed) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
