use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use toprel::io::Manifest;
use toprel::pipeline::{self, RunConfig};
use toprel::Error;

/// Replicated LDA topic models and their reliability.
#[derive(Debug, Parser)]
#[command(name = "toprel", version)]
struct Cli {
    /// JSON run configuration; defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed, overriding the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory, overriding the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write the configured corpus and any ground truth.
    Generate,
    /// Fit the replication set for every K.
    Fit,
    /// Align replications to the reference and write similarities.
    Align,
    /// Score the reliability coefficients for every K.
    Reliability,
    /// Run the word-removal sensitivity study.
    Perturb,
    /// Fit per-replication logistic models and word weights.
    Downstream,
}

fn run(cli: Cli) -> Result<Manifest, Error> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(out) = cli.out {
        config.out = out;
    }
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(Error::Config("--jobs must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .map_err(|e| Error::Config(e.to_string()))?;
    }
    match cli.command {
        Command::Generate => pipeline::cmd_generate(&config),
        Command::Fit => pipeline::cmd_fit(&config),
        Command::Align => pipeline::cmd_align(&config),
        Command::Reliability => pipeline::cmd_reliability(&config),
        Command::Perturb => pipeline::cmd_perturb(&config),
        Command::Downstream => pipeline::cmd_downstream(&config),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match run(cli) {
        Ok(manifest) if manifest.failures.is_empty() => ExitCode::SUCCESS,
        Ok(manifest) => {
            for f in &manifest.failures {
                eprintln!("error: {f}");
            }
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}
