//! `velotrace`: trip analytics and demand forecasting from GPS traces.

mod commands;
mod config;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use velotrace::features::SplitRatio;
use velotrace::models::ModelKind;
use velotrace::timeutil::{self, Instant};

use crate::commands::TrainArgs;
use crate::config::{Overrides, RunConfig};
use crate::error::CliError;

#[derive(Parser, Debug)]
#[command(name = "velotrace", version, about = "Cycling trip analytics and short-term demand forecasting")]
struct Cli {
    /// TOML run configuration; relative paths inside it resolve against its directory.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory, also the default location of every input file.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Local time offset from UTC in minutes.
    #[arg(long, global = true, allow_negative_numbers = true)]
    utc_offset_min: Option<i32>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModelChoice {
    Linear,
    Forest,
    Boost,
    Lstm,
    All,
}

impl ModelChoice {
    fn kinds(self) -> Vec<ModelKind> {
        match self {
            ModelChoice::Linear => vec![ModelKind::Linear],
            ModelChoice::Forest => vec![ModelKind::Forest],
            ModelChoice::Boost => vec![ModelKind::Boost],
            ModelChoice::Lstm => vec![ModelKind::Lstm],
            ModelChoice::All => ModelKind::ALL.to_vec(),
        }
    }
}

fn parse_width(s: &str) -> Result<u32, String> {
    match s {
        "30" => Ok(30),
        "60" => Ok(60),
        _ => Err("slot width must be 30 or 60".into()),
    }
}

fn parse_split(s: &str) -> Result<SplitRatio, String> {
    s.parse().map_err(|e: velotrace::Error| e.to_string())
}

fn parse_kind(s: &str) -> Result<ModelKind, String> {
    s.parse().map_err(|e: velotrace::Error| e.to_string())
}

fn parse_instant(s: &str) -> Result<Instant, String> {
    timeutil::parse_timestamp(s).ok_or_else(|| format!("expected YYYY-MM-DDTHH:MM:SSZ, got {s:?}"))
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Assemble GPS points into trips.
    Ingest,
    /// Trip histograms, temporal profiles and monthly change.
    Describe,
    /// Usage density grids and hub destination spread.
    Spatial,
    /// Weather correlations, week contrast and calendar impact.
    Covariates,
    /// Slot counts, feature table and split plan.
    Features {
        #[arg(long, value_parser = parse_width)]
        width: Option<u32>,
    },
    /// Fit and evaluate forecasting models on features.csv.
    Train {
        #[arg(long, value_parser = parse_width)]
        width: Option<u32>,
        #[arg(long, value_parser = parse_split)]
        split: Option<SplitRatio>,
        #[arg(long, value_enum)]
        model: Option<ModelChoice>,
        /// Skip blocked cross-validation.
        #[arg(long)]
        no_cv: bool,
        /// Column group to ablate; repeatable.
        #[arg(long)]
        ablate: Vec<String>,
    },
    /// Predict one slot with a trained model.
    Predict {
        #[arg(long, value_parser = parse_kind)]
        model: ModelKind,
        /// Slot width of the model to use.
        #[arg(long, value_parser = parse_width)]
        horizon: Option<u32>,
        /// Slot start to predict; defaults to the last feature row.
        #[arg(long, value_parser = parse_instant)]
        at: Option<Instant>,
    },
    /// Write a synthetic dataset with known ground truth.
    Synth,
}

fn init_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("VELOTRACE_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::param(format!("VELOTRACE_THREADS must be a positive integer, got {raw:?}")))?;
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::param(format!("cannot size thread pool: {e}")))?;
    #[cfg(not(feature = "parallel"))]
    let _ = n;
    Ok(())
}

fn run(cli: Cli) -> Result<(), CliError> {
    init_threads()?;
    let cfg = RunConfig::resolve(&Overrides {
        config: cli.config,
        out: cli.out,
        seed: cli.seed,
        utc_offset_min: cli.utc_offset_min,
    })?;
    match cli.command {
        Command::Ingest => commands::ingest(&cfg),
        Command::Describe => commands::describe(&cfg),
        Command::Spatial => commands::spatial(&cfg),
        Command::Covariates => commands::covariates(&cfg),
        Command::Features { width } => commands::features(&cfg, width),
        Command::Train {
            width,
            split,
            model,
            no_cv,
            ablate,
        } => commands::train(
            &cfg,
            TrainArgs {
                width,
                split,
                models: model.map(ModelChoice::kinds),
                no_cv,
                ablate,
            },
        ),
        Command::Predict { model, horizon, at } => commands::predict(&cfg, model, horizon, at),
        Command::Synth => commands::synth(&cfg),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{}", e.to_json());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
