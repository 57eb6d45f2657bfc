use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;

use omit_cli::run::EXIT_UNSTABLE;
use omit_cli::{parse, run, write_artifacts, RunError};

/// Run an OMIT cooling simulation described by a JSON config.
#[derive(Debug, Parser)]
#[command(version, about)]
struct Args {
    /// Path to the run configuration (a previous manifest.json also works).
    #[arg(long)]
    config: PathBuf,
    /// Output directory; overrides the config's `output` entry.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads for parallel evaluation.
    #[arg(long, env = "OMIT_COOL_WORKERS")]
    workers: Option<usize>,
    /// Log progress to stderr.
    #[arg(long)]
    verbose: bool,
}

fn main() -> ExitCode {
    let args = Args::parse();
    let level = if args.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let code = match execute(&args) {
        Ok(None) => 0,
        Ok(Some(msg)) => {
            eprintln!("instability: {msg}");
            EXIT_UNSTABLE
        }
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    };
    ExitCode::from(code as u8)
}

fn execute(args: &Args) -> Result<Option<String>, RunError> {
    let text = std::fs::read_to_string(&args.config)
        .map_err(|e| RunError::Config(format!("cannot read {}: {e}", args.config.display())))?;
    let config = parse(&text).map_err(RunError::Config)?;
    let out = args
        .out
        .clone()
        .or_else(|| config.output.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("out"));
    if args.workers == Some(0) {
        return Err(RunError::Config("--workers must be at least 1".into()));
    }
    let outcome = omit_core::sweep::with_workers(args.workers, || run(&config))
        .map_err(RunError::from)??;
    write_artifacts(&out, &outcome.artifacts)?;
    log::info!("wrote {} artifact(s) to {}", outcome.artifacts.len(), out.display());
    Ok(outcome.instability)
}
