//! `mops`: run, sweep and check split-training experiments.
//!
//! Exit codes: 0 success, 1 failed checks or other errors, 2 bad input
//! (config, flags, missing or corrupted artifacts), 3 numeric failure.

mod commands;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};
use mops_core::MopsError;

use commands::{Axis, Overrides};

/// Bad user input; maps to exit code 2.
#[derive(Debug)]
pub struct InputError(pub String);

impl std::fmt::Display for InputError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for InputError {}

#[derive(Parser)]
#[command(name = "mops", version, about = "Multi-agent split-model training experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train once and write metrics.csv and summary.json.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        metrics_every: Option<usize>,
    },
    /// One run per value of a config axis.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// T, beta, eta, D, scheme or algorithm.
        #[arg(long)]
        axis: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        values: Vec<String>,
        /// With `--axis T`, set beta = C / sqrt(T).
        #[arg(long, value_name = "C")]
        rate_schedule: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        metrics_every: Option<usize>,
    },
    /// Check the artifacts in an output directory, then run the acceptance checks.
    Verify {
        #[arg(long)]
        out: PathBuf,
        /// Comma-separated check ids; all when omitted.
        #[arg(long, value_delimiter = ',')]
        checks: Vec<u8>,
    },
    /// Rate slopes and fitted bound curves for a sweep directory.
    Rates {
        #[arg(long)]
        out: PathBuf,
    },
}

fn threads() -> Result<usize> {
    match std::env::var("MOPS_THREADS") {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(n),
            _ => Err(InputError(format!("MOPS_THREADS must be a positive integer, got {v:?}")).into()),
        },
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

fn run(cli: Cli) -> Result<bool> {
    let threads = threads()?;
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build()?;
    match cli.command {
        Command::Run {
            config,
            seed,
            out,
            metrics_every,
        } => {
            let cfg = commands::load_config(&config, &Overrides { seed, metrics_every })?;
            let s = commands::cmd_run(cfg, &out)?;
            println!("{}", commands::summary_line(&s.runs[0]));
            Ok(true)
        }
        Command::Sweep {
            config,
            axis,
            values,
            rate_schedule,
            seed,
            out,
            metrics_every,
        } => {
            let axis = Axis::parse(&axis)?;
            let cfg = commands::load_config(&config, &Overrides { seed, metrics_every })?;
            let s = pool.install(|| commands::cmd_sweep(&cfg, axis, &values, rate_schedule, &out))?;
            for r in &s.runs {
                println!("{}", commands::summary_line(r));
            }
            if let Some(sl) = &s.slopes {
                if let Some(o) = sl.o_err {
                    println!("O-error log-log slope vs {}: {o:.4}", axis.name());
                }
            }
            Ok(true)
        }
        Command::Verify { out, checks } => {
            let (text, passed) = commands::cmd_verify(&out, &checks, threads)?;
            print!("{text}");
            Ok(passed)
        }
        Command::Rates { out } => {
            print!("{}", commands::cmd_rates(&out)?);
            Ok(true)
        }
    }
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.downcast_ref::<InputError>().is_some() || cause.downcast_ref::<clap::Error>().is_some() {
            return 2;
        }
        if let Some(e) = cause.downcast_ref::<MopsError>() {
            return match e.root() {
                MopsError::InvalidArgument(_) => 2,
                MopsError::NumericFailure(_) => 3,
                _ => 1,
            };
        }
    }
    1
}

/// The error chain joined by ": ", skipping causes already spelled out by their parent.
fn message(err: &anyhow::Error) -> String {
    let mut out = String::new();
    for cause in err.chain() {
        let text = cause.to_string();
        if !out.ends_with(&text) {
            if !out.is_empty() {
                out.push_str(": ");
            }
            out.push_str(&text);
        }
    }
    out
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {}", message(&e));
            ExitCode::from(exit_code(&e))
        }
    }
}
