//! Command-line driver for the orthobench pipeline and its stages.

pub mod cli;
pub mod commands;
pub mod config;
pub mod error;
pub mod pipeline;

pub use cli::{Cli, Command};
pub use config::{Overrides, RunConfig};
pub use error::{CliError, ExitKind, Stage};
pub use pipeline::{run_pipeline, PipelineOutcome};

/// Dispatches a parsed command line and returns the process exit code.
pub fn run(cli: &Cli) -> u8 {
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
        {
            log::warn!("could not size the thread pool: {e}");
        }
    }
    let result = match &cli.command {
        Command::Pipeline(a) => commands::pipeline(a),
        Command::SampleSize(a) => commands::sample_size(a),
        Command::Filter(a) => commands::filter(a),
        Command::Reduce(a) => commands::reduce(a),
        Command::Cluster(a) => commands::cluster(a),
        Command::Grid(a) => commands::grid(a),
        Command::Label(a) => commands::label(a),
        Command::Report(a) => commands::report(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.code()
        }
    }
}
