//! `bsda`: dataset synthesis, regression-target generation, training with
//! ablations, evaluation, and autodiff self-checks, over bit-exact file
//! formats.
//!
//! Exit codes: 0 success, 1 failed self-check, 2 I/O, 3 bad masks,
//! 4 bad configuration, 5 checkpoint/model mismatch. Every command is
//! deterministic given `--seed`.

mod config;
mod error;
mod eval_cmd;
mod gradcheck_cmd;
mod synth_cmd;
mod targets_cmd;
mod train_cmd;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "bsda", version, about = "Boundary-aware segmentation workbench")]
struct Cli {
    /// Overrides the config seed wherever randomness is drawn.
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a synthetic shape dataset (images, masks, manifest).
    Synth {
        /// JSON run configuration; defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Output dataset directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Compute signed-distance and boundary-heatmap targets for masks.
    Targets {
        /// Directory of .pgm masks.
        #[arg(long)]
        masks: PathBuf,
        /// Output directory for .bsdt tensors.
        #[arg(long)]
        out: PathBuf,
        /// Gaussian bandwidth of the boundary heatmap, in pixels.
        #[arg(long, default_value_t = 2.0)]
        sigma: f64,
        /// Heatmap cutoff below which values clamp to zero.
        #[arg(long, default_value_t = 1e-3)]
        floor: f64,
        /// Also recompute each distance map by brute force and report the
        /// largest disagreement.
        #[arg(long)]
        oracle: bool,
    },
    /// Train the segmentation network and classifier.
    Train {
        /// JSON run configuration; defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Dataset directory (overrides the config's "data" path).
        #[arg(long)]
        data: Option<PathBuf>,
        /// Output directory for model.bsdc and history.csv.
        #[arg(long)]
        out: PathBuf,
        /// Drop branches: no-b, no-d, no-cls, or single-task, comma separable.
        #[arg(long)]
        ablate: Option<String>,
    },
    /// Score a checkpoint on one dataset split.
    Eval {
        /// Trained model.bsdc (not needed with --oracle-gt).
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Dataset directory.
        #[arg(long)]
        data: PathBuf,
        /// Output directory for metric CSVs.
        #[arg(long)]
        out: PathBuf,
        /// Which split to score: train, val, or test.
        #[arg(long, default_value = "test")]
        split: String,
        /// Evaluation batch size (defaults to the checkpoint's).
        #[arg(long)]
        batch: Option<usize>,
        /// Score ground truth against itself instead of running a model;
        /// verifies the metric pipeline end to end.
        #[arg(long)]
        oracle_gt: bool,
    },
    /// Check every autodiff op against central finite differences.
    Gradcheck {
        /// Independent random restarts per op.
        #[arg(long, default_value_t = 10)]
        seeds: usize,
        /// Damage the named op's backward pass first; the run must then
        /// fail. Exists to prove the harness can catch a bad gradient.
        #[arg(long, hide = true)]
        corrupt: Option<String>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.cmd {
        Cmd::Synth { config, out } => synth_cmd::run(config.as_deref(), out, cli.seed),
        Cmd::Targets { masks, out, sigma, floor, oracle } => {
            targets_cmd::run(masks, out, *sigma, *floor, *oracle)
        }
        Cmd::Train { config, data, out, ablate } => {
            train_cmd::run(config.as_deref(), data.as_deref(), out, ablate.as_deref(), cli.seed)
        }
        Cmd::Eval { checkpoint, data, out, split, batch, oracle_gt } => {
            eval_cmd::run(checkpoint.as_deref(), data, out, split, *batch, *oracle_gt)
        }
        Cmd::Gradcheck { seeds, corrupt } => {
            gradcheck_cmd::run(cli.seed, *seeds, corrupt.as_deref())
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
