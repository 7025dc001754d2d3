//! `pubcast`: ingest publication records, train the creativity matrix, simulate
//! trajectories and score them against ground truth.

mod commands;
mod config;
mod error;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use commands::InputFormat;
use config::RunConfig;
use error::CliError;

#[derive(Debug, Parser)]
#[command(name = "pubcast", version, about = "Cohort-based forecasting of researchers' publication counts")]
struct Cli {
    /// TOML run configuration (defaults to the Set-6 setup).
    #[arg(long, global = true, conflicts_with = "preset")]
    config: Option<PathBuf>,
    /// Bundled configuration: set6 or set5.
    #[arg(long, global = true)]
    preset: Option<String>,
    /// Cap on worker threads.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Directory for artifacts without an explicit path.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Artifacts {
    /// Flat counts corpus (training corpus for `train`).
    #[arg(long)]
    corpus: Option<PathBuf>,
    /// Model JSON.
    #[arg(long)]
    model: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Normalize a dblp XML export or a counts file into the flat counts format.
    Ingest {
        input: PathBuf,
        #[arg(long, value_enum, default_value = "auto")]
        format: InputFormat,
        /// First year kept.
        #[arg(long)]
        from: Option<i32>,
        /// Last year kept.
        #[arg(long)]
        to: Option<i32>,
        /// dblp venue key to keep (repeatable).
        #[arg(long = "venue")]
        venues: Vec<String>,
        /// Output counts file.
        #[arg(long)]
        corpus: Option<PathBuf>,
    },
    /// Fit the four-zone creativity matrix and write the model file.
    Train {
        #[command(flatten)]
        artifacts: Artifacts,
    },
    /// Simulate trajectories from t_X to t_Y.
    Predict {
        #[command(flatten)]
        artifacts: Artifacts,
        /// Corpus holding the test researchers' histories (defaults to --corpus).
        #[arg(long)]
        truth: Option<PathBuf>,
        /// One researcher id per line.
        #[arg(long)]
        researchers: Option<PathBuf>,
        /// Trajectories per researcher.
        #[arg(long)]
        replicates: Option<usize>,
        /// Simulation seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output trajectories CSV.
        #[arg(long)]
        predictions: Option<PathBuf>,
    },
    /// Score predictions against the ground-truth corpus.
    Evaluate {
        #[command(flatten)]
        artifacts: Artifacts,
        /// Ground-truth corpus (defaults to --corpus).
        #[arg(long)]
        truth: Option<PathBuf>,
        /// Trajectories CSV written by `predict`.
        #[arg(long)]
        predictions: Option<PathBuf>,
    },
    /// Generate a synthetic corpus from a known rate surface.
    Synth {
        /// Number of researchers.
        #[arg(long)]
        population: Option<usize>,
        /// Generator seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output counts file.
        #[arg(long)]
        corpus: Option<PathBuf>,
    },
}

fn load_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut config = match (&cli.config, &cli.preset) {
        (Some(path), _) => RunConfig::load(path)?,
        (None, Some(name)) => RunConfig::preset(name)?,
        (None, None) => RunConfig::default(),
    };
    if let Some(out) = &cli.out {
        config.paths.output = out.clone();
    }
    let set = |slot: &mut Option<PathBuf>, value: &Option<PathBuf>| {
        if value.is_some() {
            slot.clone_from(value);
        }
    };
    let paths = &mut config.paths;
    match &cli.command {
        Command::Ingest {
            from,
            to,
            venues,
            corpus,
            ..
        } => {
            set(&mut paths.corpus, corpus);
            config.ingest.from = from.unwrap_or(config.ingest.from);
            config.ingest.to = to.unwrap_or(config.ingest.to);
            if !venues.is_empty() {
                config.ingest.venues.clone_from(venues);
            }
        }
        Command::Train { artifacts } => {
            set(&mut paths.corpus, &artifacts.corpus);
            set(&mut paths.model, &artifacts.model);
        }
        Command::Predict {
            artifacts,
            truth,
            researchers,
            replicates,
            seed,
            predictions,
        } => {
            set(&mut paths.corpus, &artifacts.corpus);
            set(&mut paths.model, &artifacts.model);
            set(&mut paths.truth, truth);
            set(&mut paths.predictions, predictions);
            set(&mut config.prediction.researchers, researchers);
            config.prediction.replicates = replicates.unwrap_or(config.prediction.replicates);
            config.prediction.seed = seed.unwrap_or(config.prediction.seed);
        }
        Command::Evaluate {
            artifacts,
            truth,
            predictions,
        } => {
            set(&mut paths.corpus, &artifacts.corpus);
            set(&mut paths.model, &artifacts.model);
            set(&mut paths.truth, truth);
            set(&mut paths.predictions, predictions);
        }
        Command::Synth {
            population,
            seed,
            corpus,
        } => {
            set(&mut paths.corpus, corpus);
            config.synth.population = population.unwrap_or(config.synth.population);
            config.synth.seed = seed.unwrap_or(config.synth.seed);
        }
    }
    config.validate()?;
    Ok(config)
}

fn run(cli: Cli) -> Result<(), CliError> {
    if let Some(threads) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| CliError::Internal(e.to_string()))?;
    }
    let config = load_config(&cli)?;
    match &cli.command {
        Command::Ingest { input, format, .. } => commands::ingest(&config, input, *format).map(drop),
        Command::Train { .. } => commands::train_model(&config).map(drop),
        Command::Predict { .. } => commands::run_predict(&config).map(drop),
        Command::Evaluate { .. } => commands::evaluate(&config).map(drop),
        Command::Synth { .. } => commands::synth(&config),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("pubcast: {e}");
            e.exit_code()
        }
    }
}
