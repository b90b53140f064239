//! `wbrm`: NPT widths of Wigner-band random matrices from the command line.
//!
//! Exit codes: 0 success, 2 invalid input or config, 3 resonance guard,
//! 4 runtime failure or an invariant violated during a run.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "wbrm", version, about = "NPT region widths and ensemble studies for Wigner-band random matrices")]
pub struct Cli {
    /// Worker threads; defaults to the available parallelism. Results do not
    /// depend on this value.
    #[arg(long, global = true, env = "NPT_WORKERS")]
    pub workers: Option<usize>,

    /// Timing and progress diagnostics on stderr.
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    pub verbose: u8,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// NPT region of a single eigenstate, as JSON on stdout.
    Npt(NptArgs),
    /// Run an ensemble experiment described by a TOML config.
    Experiment {
        #[arg(value_enum)]
        kind: ExperimentKind,
        #[command(flatten)]
        args: ExperimentArgs,
    },
    /// Averaged eigenfunction or LDOS profile, as CSV.
    Shapes(ShapesArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Oracle,
    Iterative,
    Both,
}

#[derive(Debug, Args)]
pub struct NptArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub b: usize,
    #[arg(long)]
    pub lambda: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// 0-based eigenstate index; defaults to `n / 2`.
    #[arg(long)]
    pub alpha_index: Option<usize>,
    #[arg(long, value_enum, default_value_t = MethodArg::Iterative)]
    pub method: MethodArg,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ExperimentKind {
    Confirm,
    Sweep,
    Compare,
    Dist,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides `output_dir`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overrides `master_seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides `realizations`.
    #[arg(long)]
    pub realizations: Option<usize>,
    /// Overrides `states_per_realization`.
    #[arg(long)]
    pub states: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ShapeArg {
    Ef,
    Ldos,
}

#[derive(Debug, Args)]
pub struct ShapesArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub b: usize,
    #[arg(long)]
    pub lambda: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 4)]
    pub realizations: usize,
    #[arg(long, value_enum, default_value_t = ShapeArg::Ef)]
    pub kind: ShapeArg,
    #[arg(long, default_value_t = 1.0)]
    pub bin_width: f64,
    /// CSV destination; stdout when absent.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            ExitCode::from(e.code)
        }
    }
}
