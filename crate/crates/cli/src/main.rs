//! `pidq`: partial information decomposition, synergy bounds and model
//! selection from the command line.

mod commands;
mod formats;
mod output;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

/// Exit status for malformed input, failed validation and usage errors.
pub const EXIT_INVALID: u8 = 2;
/// Exit status when an optimizer stopped before converging; the report is
/// still printed.
pub const EXIT_NOT_CONVERGED: u8 = 3;

#[derive(Debug, Parser)]
#[command(name = "pidq", version, about = "Quantify redundant, unique and synergistic information")]
pub struct Cli {
    /// Seed for every random choice (clustering, solver perturbations).
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// Significant digits of printed numbers.
    #[arg(long, global = true, default_value_t = 6, value_parser = clap::value_parser!(u8).range(1..=17))]
    pub precision: u8,
    /// Suppress warnings on standard error.
    #[arg(long, global = true)]
    pub quiet: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Exact PID of a distribution file or a sample table.
    Pid(PidArgs),
    /// Synergy and accuracy bounds from pairwise marginals.
    Bounds(BoundsArgs),
    /// Pick models for a dataset by its nearest library profile.
    Select(SelectArgs),
    /// Turn a sample table into a distribution file.
    Discretize(DiscretizeArgs),
    /// Extract pairwise marginals from a distribution file or sample table.
    Marginals(MarginalsArgs),
    /// Write the built-in synthetic model library.
    Library(LibraryArgs),
}

#[derive(Debug, Args)]
pub struct SolverArgs {
    /// Stop when a sweep improves the objective by less than this (bits).
    #[arg(long)]
    pub tol: Option<f64>,
    /// Maximum optimizer sweeps.
    #[arg(long)]
    pub max_iters: Option<usize>,
}

#[derive(Debug, Args)]
pub struct BinningArgs {
    /// Histogram bins per feature: `auto` (cube root of the sample count) or a count.
    #[arg(long, conflicts_with = "clusters")]
    pub bins: Option<String>,
    /// Cluster each modality with k-means into this many categories.
    #[arg(long)]
    pub clusters: Option<usize>,
}

#[derive(Debug, Args)]
pub struct PidArgs {
    /// Distribution file (`.json`) or sample table (`.csv`, `.tsv`).
    #[arg(long)]
    pub input: PathBuf,
    #[command(flatten)]
    pub binning: BinningArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Args)]
pub struct BoundsArgs {
    /// Marginals file with `m1y`, `m2y` and optionally `m12`.
    #[arg(long)]
    pub marginals: PathBuf,
    /// Scale of the disagreement term in the uniqueness-based lower bound.
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Args)]
pub struct SelectArgs {
    /// Distribution file (`.json`) or sample table (`.csv`, `.tsv`).
    #[arg(long)]
    pub target: PathBuf,
    /// Model library file.
    #[arg(long)]
    pub library: PathBuf,
    /// Number of ranked models to report.
    #[arg(long, default_value_t = 3)]
    pub top_k: usize,
    #[command(flatten)]
    pub binning: BinningArgs,
    #[command(flatten)]
    pub solver: SolverArgs,
}

#[derive(Debug, Args)]
pub struct DiscretizeArgs {
    /// Sample table (`.csv`, `.tsv`).
    #[arg(long)]
    pub input: PathBuf,
    /// Distribution file to write.
    #[arg(long)]
    pub output: PathBuf,
    /// Where to write bin edges or centroids; defaults to `<output stem>.meta.json`.
    #[arg(long)]
    pub metadata: Option<PathBuf>,
    #[command(flatten)]
    pub binning: BinningArgs,
}

#[derive(Debug, Args)]
pub struct MarginalsArgs {
    /// Distribution file (`.json`) or sample table (`.csv`, `.tsv`).
    #[arg(long)]
    pub input: PathBuf,
    /// Marginals file to write.
    #[arg(long)]
    pub output: PathBuf,
    /// Leave out p(x1,x2), as when no unlabeled multimodal data exists.
    #[arg(long)]
    pub without_m12: bool,
    #[command(flatten)]
    pub binning: BinningArgs,
}

#[derive(Debug, Args)]
pub struct LibraryArgs {
    /// Library file to write.
    #[arg(long)]
    pub output: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(outcome) => {
            // a closed pipe (`pidq ... | head`) is not an error
            let _ = writeln!(std::io::stdout().lock(), "{}", outcome.report);
            if !cli.quiet {
                for w in &outcome.warnings {
                    eprintln!("warning: {w}");
                }
            }
            if outcome.converged {
                ExitCode::SUCCESS
            } else {
                if !cli.quiet {
                    eprintln!("warning: the optimizer stopped before converging");
                }
                ExitCode::from(EXIT_NOT_CONVERGED)
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_INVALID)
        }
    }
}
