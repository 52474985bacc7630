//! `manu`: run the unlearning pipeline end to end or one stage at a time.
//!
//! Every subcommand reads the same JSON config (`--config`, defaults
//! otherwise) and works inside one output directory (`--out`, defaulting to
//! the config's `output_dir`). Stage commands read and write fixed paths in
//! that directory, so `generate`, `train`, `capture`, `importance`, `mask`,
//! `prune` and `eval` chain without extra arguments.
//!
//! Exit codes: 0 ok, 2 config error, 3 numeric failure, 4 I/O failure.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use manu_core::{ManuError, Scope};

#[derive(Debug, Parser)]
#[command(name = "manu", version, about = "Modality-aware neuron unlearning")]
pub struct Cli {
    /// JSON pipeline config; unknown keys are rejected
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory (overrides the config's output_dir)
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Reference seed (overrides the config's seed)
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Worker threads (overrides the config's threads)
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ScopeArg {
    Global,
    PerTower,
}

impl From<ScopeArg> for Scope {
    fn from(s: ScopeArg) -> Self {
        match s {
            ScopeArg::Global => Scope::Global,
            ScopeArg::PerTower => Scope::PerTower,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write the synthetic dataset description to dataset.json
    Generate,
    /// Train the vanilla model: vanilla.ckpt, training.json
    Train,
    /// Capture the four activation traces into traces/
    Capture {
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Compute forget and retain importance maps into importance/
    Importance {
        #[arg(long)]
        traces: Option<PathBuf>,
    },
    /// Score neurons and write the top-alpha% prune mask
    Mask {
        /// Pruning ratio in percent
        #[arg(long)]
        alpha: f64,
        #[arg(long, value_enum)]
        scope: Option<ScopeArg>,
        #[arg(long)]
        importance: Option<PathBuf>,
    },
    /// Apply a prune mask to a checkpoint
    Prune {
        #[arg(long)]
        mask: PathBuf,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Gradient-ascent baseline on the multimodal forget set
    UnlearnGa {
        #[arg(long)]
        steps: usize,
        #[arg(long)]
        lr: Option<f64>,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Gradient-difference baseline (ascend forget, descend retain)
    UnlearnGd {
        #[arg(long)]
        steps: usize,
        #[arg(long)]
        lr: Option<f64>,
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Evaluate a checkpoint on every split, modality and task
    Eval {
        #[arg(long)]
        model: Option<PathBuf>,
        /// Method label used in the CSV (defaults to the checkpoint name)
        #[arg(long)]
        label: Option<String>,
    },
    /// Full pipeline over the configured alphas with baselines
    Sweep,
    /// Importance-function ablation at the configured ablation alpha
    Ablate,
    /// Heatmap CSVs from a run's retention profiles
    Report {
        /// Run directory produced by `sweep`
        #[arg(long)]
        run: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &ManuError) -> u8 {
    e.exit_class().code() as u8
}
