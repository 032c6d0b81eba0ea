//! `dsi` — synthesize phantom cohorts, extract lesion features, train and
//! evaluate malignancy scorers, and render disease-specific overlays.
//!
//! Exit codes: 0 success, 1 domain error, 2 I/O error.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dsi_core::Scorer;

#[derive(Debug, Parser)]
#[command(
    name = "dsi",
    version,
    about = "Disease-specific imaging pipeline for ultrasound RF frames"
)]
pub struct Cli {
    /// Pipeline configuration (JSON); missing fields take their defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads for parallel stages (default: all cores).
    #[arg(long, global = true)]
    pub jobs: Option<usize>,
    /// Skip lesions that fail to load or analyze instead of aborting.
    #[arg(long, global = true)]
    pub lenient: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic phantom cohort.
    Synth {
        /// Output directory (created if missing).
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        benign: Option<usize>,
        #[arg(long)]
        malignant: Option<usize>,
    },
    /// Extract the ten lesion features of every manifest entry.
    Extract {
        /// Cohort directory or manifest file.
        #[arg(long)]
        cohort: Option<PathBuf>,
        /// Output CSV.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Select a feature subset and train the scorers.
    Train {
        /// Feature table CSV.
        #[arg(long)]
        features_csv: Option<PathBuf>,
        /// Output model file.
        #[arg(long)]
        out: Option<PathBuf>,
        /// `auto` (exhaustive selection as configured), `all` (the five
        /// default features, no selection) or a comma-separated list.
        #[arg(long, default_value = "auto")]
        features: String,
    },
    /// Repeated-split evaluation over scorers, categories and size thresholds.
    Eval {
        #[arg(long)]
        features_csv: Option<PathBuf>,
        /// Trained model; its feature subset is used for every split.
        #[arg(long)]
        model: Option<PathBuf>,
        /// Output directory for report.json and report.csv.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render a DSI overlay for one frame.
    Render {
        /// RF payload (sidecar JSON next to it).
        #[arg(long)]
        frame: PathBuf,
        /// Lesion mask (PGM).
        #[arg(long)]
        mask: PathBuf,
        #[arg(long)]
        model: Option<PathBuf>,
        /// Output PNG; provenance is written next to it as JSON.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        scorer: Option<Scorer>,
    },
    /// Inspect the configuration.
    Config {
        /// Print the complete default configuration.
        #[arg(long)]
        print_defaults: bool,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code())
        }
    }
}
