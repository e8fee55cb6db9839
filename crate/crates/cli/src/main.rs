use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::Parser;
use iabrate_cli::{load_config, run, write_outputs, CaseName, CliError, Command, ModeName, RunConfig, StrategyName};

/// Rate coverage of a two-tier mmWave network with integrated access and
/// backhaul.
#[derive(Debug, Parser)]
#[command(name = "iabrate", version)]
struct Args {
    #[arg(value_enum)]
    command: Command,
    /// JSON config; omitted keys take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    /// CSV destination. A `.manifest.json` is written next to it.
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long, value_enum)]
    mode: Option<ModeName>,
    #[arg(long, value_enum)]
    strategy: Option<StrategyName>,
    #[arg(long, value_enum)]
    case: Option<CaseName>,
}

fn resolve(args: &Args) -> Result<RunConfig, CliError> {
    let mut cfg = match &args.config {
        Some(path) => load_config(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(trials) = args.trials {
        cfg.trials = trials;
    }
    if let Some(mode) = args.mode {
        cfg.mode = mode;
    }
    if let Some(strategy) = args.strategy {
        cfg.strategy = strategy;
    }
    if let Some(case) = args.case {
        cfg.case = case;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn main_inner(args: &Args) -> Result<Option<String>, CliError> {
    let cfg = resolve(args)?;
    let start = Instant::now();
    let outcome = run(args.command, &cfg)?;
    write_outputs(args.command, &cfg, &outcome.table, args.out.as_deref(), start.elapsed().as_secs_f64())?;
    for note in &outcome.notes {
        eprintln!("{note}");
    }
    Ok(outcome.unattainable)
}

fn main() -> ExitCode {
    let args = Args::parse();
    match main_inner(&args) {
        Ok(None) => ExitCode::SUCCESS,
        Ok(Some(msg)) => {
            let err = CliError::Unattainable(msg);
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(err.exit_code() as u8)
        }
    }
}
