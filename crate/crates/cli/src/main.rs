mod commands;
mod config;
mod error;
mod output;

use clap::{Parser, Subcommand};
use commands::{data, evaluate, inspect, train};
use error::{CliError, Result};
use std::path::PathBuf;
use std::process::ExitCode;

/// Face image quality assessment: synthesize data, train the recognizer and
/// tinyFQnet, label, sample, score, select and evaluate.
#[derive(Debug, Parser)]
#[command(name = "fqa", version)]
struct Cli {
    /// Run seed; every random choice derives from it.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for training, scoring and extraction.
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// JSON file of subcommand options; flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Render a synthetic identity dataset with graded degradations.
    Synth(data::SynthArgs),
    /// Train the reference recognizer on an identity-labelled manifest.
    TrainRecognizer(train::RecognizerArgs),
    /// Add recognition-based quality labels to a manifest.
    Label(data::LabelArgs),
    /// Filter identities and flatten the quality-score histogram.
    Sample(data::SampleArgs),
    /// Train tinyFQnet on a labelled manifest.
    TrainFqnet(train::FqnetArgs),
    /// Score images with tinyFQnet or a baseline scorer.
    Score(evaluate::ScoreArgs),
    /// Pick the best-scoring image of each template.
    Select(evaluate::SelectArgs),
    /// Template verification with the selected images.
    Evaluate(evaluate::EvaluateArgs),
    /// Print a network's shape trace, parameters and MACs.
    Inspect(inspect::InspectArgs),
    /// Apply one degradation to an image.
    Degrade(data::DegradeArgs),
}

pub struct Globals {
    pub seed: Option<u64>,
    pub config: Option<PathBuf>,
}

fn configure_jobs(jobs: Option<usize>) -> Result<()> {
    let Some(n) = jobs else { return Ok(()) };
    if n == 0 {
        return Err(CliError::Usage("--jobs must be >= 1".into()));
    }
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Usage(format!("--jobs: {e}")))?;
    #[cfg(not(feature = "parallel"))]
    log::info!("built without the parallel feature; --jobs {n} is ignored");
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    configure_jobs(cli.jobs)?;
    let g = Globals {
        seed: cli.seed,
        config: cli.config,
    };
    match cli.command {
        Command::Synth(a) => data::synth(&g, a),
        Command::TrainRecognizer(a) => train::recognizer(&g, a),
        Command::Label(a) => data::label(&g, a),
        Command::Sample(a) => data::sample(&g, a),
        Command::TrainFqnet(a) => train::fqnet(&g, a),
        Command::Score(a) => evaluate::score(&g, a),
        Command::Select(a) => evaluate::select(&g, a),
        Command::Evaluate(a) => evaluate::evaluate(&g, a),
        Command::Inspect(a) => inspect::inspect(&g, a),
        Command::Degrade(a) => data::degrade(&g, a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("FQA_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
