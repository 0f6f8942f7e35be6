//! The `kitgi` command line: each subcommand is one pipeline step over a
//! dataset JSONL file.

/// `println!` that ends the process quietly when stdout is a closed pipe,
/// as in `kitgi report | head`.
#[macro_export]
macro_rules! say {
    ($($arg:tt)*) => {{
        use std::io::Write as _;
        if let Err(e) = writeln!(std::io::stdout(), $($arg)*) {
            if e.kind() == std::io::ErrorKind::BrokenPipe {
                std::process::exit(0);
            }
        }
    }};
}

pub mod args;
pub mod config;
pub mod failure;
pub mod output;
pub mod pipeline;
pub mod serve;

use args::{Cli, Command};
use config::Config;
use failure::Failure;

pub async fn run(cli: Cli) -> Result<(), Failure> {
    let config = Config::load(cli.config.as_deref())?;
    let dataset = pipeline::resolve_dataset(cli.dataset.as_ref(), &config);
    match &cli.command {
        Command::Import(a) => pipeline::import(&dataset, a),
        Command::FetchKnowledge(a) => pipeline::fetch_knowledge(&dataset, &config, a).await,
        Command::BuildPrompts(a) => pipeline::build_prompts(&dataset, &config, a),
        Command::Generate(a) => pipeline::generate(&dataset, &config, a).await,
        Command::SuggestFilters(a) => pipeline::suggest_filters(&dataset, a),
        Command::ApplyDecisions(a) => pipeline::apply_decision_file(&dataset, a),
        Command::Serve(a) => serve::run(&dataset, &config, a).await,
        Command::Report(a) => output::report(&dataset, &config, a),
        Command::ExportKitgi(a) => output::export_kitgi(&dataset, a),
        Command::SelectImproved(a) => output::select(&dataset, a),
        Command::Validate(a) => output::validate(&dataset, a),
        Command::StemRules => {
            output::stem_rules();
            Ok(())
        }
    }
}
