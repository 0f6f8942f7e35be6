use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use kitgi_core::{GenerationCondition, Timestamp};

use crate::config::CONFIG_ENV;

#[derive(Debug, Parser)]
#[command(
    name = "kitgi",
    version,
    about = "Knowledge-ablation workbench for constrained commonsense generation"
)]
pub struct Cli {
    /// TOML config file; flags override its keys.
    #[arg(long, global = true, env = CONFIG_ENV)]
    pub config: Option<PathBuf>,

    /// Dataset JSONL file the pipeline reads and updates.
    #[arg(short, long, global = true)]
    pub dataset: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Create a dataset from a CommonGen concept-set file.
    Import(ImportArgs),
    /// Retrieve top-k relations per concept and attach them to each record.
    FetchKnowledge(FetchArgs),
    /// Write the prompt for every record under one condition.
    BuildPrompts(PromptArgs),
    /// Generate one sentence per record under one condition.
    Generate(GenerateArgs),
    /// List relations that lexically point at another concept of the set.
    SuggestFilters(SuggestArgs),
    /// Record human keep/remove verdicts and recompute filtered knowledge.
    ApplyDecisions(DecisionArgs),
    /// Run the annotation service.
    Serve(ServeArgs),
    /// Relation accounting, distributions, matrices and failure tallies.
    Report(ReportArgs),
    /// Write the finished records (both annotated sentences present).
    ExportKitgi(ExportArgs),
    /// Ids of records wrong without knowledge and right with it.
    SelectImproved(SelectArgs),
    /// Check every record and the dataset round trip.
    Validate(ValidateArgs),
    /// Print the stemmer rule table.
    StemRules,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ConditionArg {
    None,
    Full,
    Filtered,
}

impl From<ConditionArg> for GenerationCondition {
    fn from(c: ConditionArg) -> Self {
        match c {
            ConditionArg::None => GenerationCondition::NoKnowledge,
            ConditionArg::Full => GenerationCondition::FullKnowledge,
            ConditionArg::Filtered => GenerationCondition::FilteredKnowledge,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum BackendArg {
    Stub,
    Http,
    Subprocess,
}

#[derive(Debug, Args)]
pub struct ImportArgs {
    /// CommonGen file: one concept set per line.
    pub input: PathBuf,
    /// Replace an existing dataset holding different records.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct FetchArgs {
    /// Relations kept per concept (1-5).
    #[arg(long)]
    pub limit: Option<usize>,
    /// ConceptNet API root.
    #[arg(long)]
    pub base_url: Option<String>,
    #[arg(long)]
    pub cache_dir: Option<PathBuf>,
    /// Offline mode: read `<dir>/<lang>/<concept>.json` instead of the API.
    #[arg(long)]
    pub fixture_dir: Option<PathBuf>,
    #[arg(long)]
    pub concurrency: Option<usize>,
    /// Refetch records that already have knowledge, discarding their decisions.
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Args)]
pub struct TemplateArgs {
    /// Prompt template TOML.
    #[arg(long)]
    pub template: Option<PathBuf>,
    /// Render ranks as stored instead of renumbering from 0.
    #[arg(long)]
    pub no_renumber: bool,
}

#[derive(Debug, Args)]
pub struct PromptArgs {
    #[arg(long, value_enum)]
    pub condition: ConditionArg,
    /// JSONL output; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub template: TemplateArgs,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    #[arg(long, value_enum)]
    pub condition: ConditionArg,
    #[arg(long, value_enum)]
    pub backend: Option<BackendArg>,
    /// Completion URL for the http backend.
    #[arg(long)]
    pub endpoint: Option<String>,
    /// Shell command for the subprocess backend; reads the prompt on stdin.
    #[arg(long)]
    pub command: Option<String>,
    #[arg(long)]
    pub model: Option<String>,
    #[arg(long)]
    pub temperature: Option<f64>,
    #[arg(long)]
    pub max_tokens: Option<u32>,
    /// Sampling seed passed to the backend.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub concurrency: Option<usize>,
    #[arg(long)]
    pub timeout_secs: Option<u64>,
    /// Creation time stamped on every sentence, e.g. 2025-01-01T00:00:00Z.
    #[arg(long)]
    pub timestamp: Option<Timestamp>,
    /// Regenerate sentences that already exist, dropping their labels.
    #[arg(long)]
    pub force: bool,
    /// Generate filtered sentences before every record has filter decisions.
    #[arg(long)]
    pub allow_undecided: bool,
    #[command(flatten)]
    pub template: TemplateArgs,
}

#[derive(Debug, Args)]
pub struct SuggestArgs {
    /// JSONL output; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DecisionArgs {
    /// JSONL lines of `{record_id, relation_id, verdict, annotator_id, rationale?}`.
    pub decisions: PathBuf,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    /// Listen address; port 0 picks a free port.
    #[arg(long)]
    pub addr: Option<String>,
    /// Holds the service corpus and event log; seeded from the dataset on first start.
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
    /// Built UI bundle served under /ui.
    #[arg(long)]
    pub ui_dir: Option<PathBuf>,
    #[arg(long)]
    pub lease_secs: Option<i64>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    #[arg(long)]
    pub out_dir: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExportArgs {
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    /// One id per line; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// Also require both annotated sentences on every record.
    #[arg(long)]
    pub complete: bool,
}
