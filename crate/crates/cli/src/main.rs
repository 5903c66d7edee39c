use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod ranges;

#[derive(Parser, Debug)]
#[command(
    name = "ilm",
    version,
    about = "Iterated learning experiments with neural agents"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run one experiment; writes records.csv, losses.csv, plots and a manifest.
    Run {
        #[command(flatten)]
        common: Common,
        /// Load naive-agent baselines from a file written by `baseline`.
        #[arg(long)]
        baseline: Option<PathBuf>,
    },
    /// Bottleneck-size study: generations to e-good per (n, bottleneck).
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Lengths to sweep, e.g. `4-8` or `4,6,8`.
        #[arg(long, default_value = "4-8")]
        ns: String,
        /// Bottleneck sizes, `lo-hi[:step]` or a list; clipped to [1, 2^n].
        #[arg(long, default_value = "2-60")]
        sizes: String,
        /// Independent auto set of this many times the bottleneck; 0 keeps
        /// the config's auto mode.
        #[arg(long, default_value_t = 3)]
        auto_factor: usize,
    },
    /// Estimate the naive-agent baselines and store them.
    Baseline {
        #[command(flatten)]
        common: Common,
    },
    /// Generations until every corrected metric first exceeds lambda.
    Until {
        #[command(flatten)]
        common: Common,
    },
    /// Re-render plots from CSV output.
    Plot {
        /// A run directory, or a records CSV file.
        input: PathBuf,
        /// Output directory (for a run directory) or SVG file.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Divisor for the autoencoder loss; read from the manifest when omitted.
        #[arg(long)]
        divisor: Option<f64>,
    },
}

#[derive(Args, Debug)]
struct Common {
    /// Config file of key=value lines.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a config key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Worker threads; 0 uses all cores.
    #[arg(long)]
    workers: Option<usize>,
    /// Record wall-clock durations and timestamps (outputs are then no
    /// longer byte-reproducible).
    #[arg(long)]
    timing: bool,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match commands::dispatch(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
