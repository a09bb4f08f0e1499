//! `stablelab` — batch driver for the verification batteries.
//!
//! One experiment per invocation: parse a flat `key = value` config, run
//! the named battery, write `record.txt` (full diagnostics) and
//! `reports.csv` (frozen schema) into the output directory. Exit status:
//! 0 on success, 2 for configuration problems, 3 when a run leaves its
//! estimate's validity regime, 4 for internal failures. Fixed seeds give
//! byte-identical CSV output; thread count (honoring `RAYON_NUM_THREADS`)
//! never affects the numbers.

mod config;
mod experiments;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};

use config::{parse_config, Experiment, ExperimentConfig};
use experiments::{dispatch, exit_code_for, reports_to_csv, run_record_text, write_outputs};

#[derive(Parser)]
#[command(
    name = "stablelab",
    version,
    about = "Numerical verification batteries for damped nonlocal parabolic equations and the jump processes behind them"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment named in the config and write record + CSV.
    Run {
        /// Path to a flat key = value config file.
        #[arg(long)]
        config: PathBuf,
        /// Override the config's random seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override the config's output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List every experiment name with a one-line description.
    ListExperiments,
    /// Parse and validate a config file without running anything.
    Validate {
        /// Path to a flat key = value config file.
        #[arg(long)]
        config: PathBuf,
    },
}

fn load_config(path: &PathBuf) -> Result<ExperimentConfig, (i32, String)> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| (2, format!("cannot read config {}: {e}", path.display())))?;
    let cfg = parse_config(&text).map_err(|e| (2, format!("config error: {e}")))?;
    Ok(cfg)
}

fn run(config: PathBuf, seed: Option<u64>, out: Option<PathBuf>) -> Result<(), (i32, String)> {
    let mut cfg = load_config(&config)?;
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    if let Some(out) = out {
        cfg.out_path = out.to_string_lossy().into_owned();
    }
    cfg.validate().map_err(|e| (2, format!("config error: {e}")))?;

    let start = Instant::now();
    let reports =
        dispatch(&cfg).map_err(|e| (exit_code_for(&e), format!("experiment failed: {e}")))?;
    let wall_ms = start.elapsed().as_millis();

    let record = run_record_text(&cfg, &reports, wall_ms);
    let csv = reports_to_csv(&reports);
    let out_dir = PathBuf::from(&cfg.out_path);
    let (record_path, csv_path) = write_outputs(&out_dir, &record, &csv)
        .map_err(|e| (4, format!("cannot write outputs under {}: {e}", out_dir.display())))?;

    for report in &reports {
        println!("{}", report.summary_line());
    }
    println!("wrote {}", record_path.display());
    println!("wrote {}", csv_path.display());

    if reports.iter().any(|r| !r.regime_ok) {
        return Err((
            3,
            "one or more rows ran out of regime (see reports.csv, column regime_ok)".to_string(),
        ));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome: Result<(), (i32, String)> = match cli.command {
        Command::Run { config, seed, out } => run(config, seed, out),
        Command::ListExperiments => {
            for e in Experiment::ALL {
                println!("{:<20} {}", e.name(), e.blurb());
            }
            Ok(())
        }
        Command::Validate { config } => load_config(&config).and_then(|cfg| {
            cfg.validate().map_err(|e| (2, format!("config error: {e}")))?;
            println!("config ok: experiment = {}", cfg.experiment);
            Ok(())
        }),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err((code, message)) => {
            eprintln!("error: {message}");
            ExitCode::from(code as u8)
        }
    }
}
