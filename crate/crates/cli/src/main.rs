//! `gaze`: train, evaluate and analyze active-vision RL agents on the
//! built-in toy environments.

#[global_allocator]
static GLOBAL: mimalloc::MiMalloc = mimalloc::MiMalloc;

mod commands;

use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand};

use gaze_core::config::{Preset, RunConfig};

#[derive(Parser)]
#[command(name = "gaze", version, about = "Active-vision RL workbench")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ConfigArgs {
    /// Run-config file (INI-style); defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Default bundle: `desk` (scaled-down) or `paper` (published values).
    #[arg(long)]
    preset: Option<String>,
    /// Seed(s), repeatable; overrides `run.seeds`.
    #[arg(long = "seed")]
    seeds: Vec<u64>,
    /// Output directory; overrides `run.out`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Train one agent per seed, writing learning curves and checkpoints.
    Train(ConfigArgs),
    /// Greedy evaluation of a trained checkpoint.
    Eval {
        #[command(flatten)]
        common: ConfigArgs,
        /// Online-network checkpoint produced by `train`.
        #[arg(long)]
        checkpoint: PathBuf,
        /// Episodes per seed; overrides `eval.episodes`.
        #[arg(long)]
        episodes: Option<usize>,
        /// Also dump the first N full frames of one episode as PGM files.
        #[arg(long, default_value_t = 0)]
        dump_frames: usize,
    },
    /// Heatmaps and KL statistics from sensory trace files.
    Analyze {
        /// Trace CSV files produced by `eval`.
        traces: Vec<PathBuf>,
        #[arg(long, default_value = "runs")]
        out: PathBuf,
    },
    /// The incremental ablation table (reward sign, joint learning, memory,
    /// reward balance).
    Ablate {
        #[command(flatten)]
        common: ConfigArgs,
        /// Override `run.total_steps` for every row.
        #[arg(long)]
        steps: Option<usize>,
    },
    /// Finite-difference verification of every layer and the full networks.
    Gradcheck {
        /// Random parameters to probe per check.
        #[arg(long, default_value_t = 120)]
        samples: usize,
        /// Maximum allowed relative error.
        #[arg(long, default_value_t = 1e-3)]
        tolerance: f64,
    },
    /// Quick throughput readout (env stepping, forward/backward, parallel
    /// versus sequential).
    Bench {
        #[arg(long, default_value_t = 2000)]
        steps: usize,
    },
}

fn resolve_config(args: &ConfigArgs) -> Result<RunConfig> {
    let preset = match args.preset.as_deref() {
        Some(name) => Some(
            Preset::parse(name)
                .ok_or_else(|| anyhow::anyhow!("unknown preset `{name}` (desk|paper)"))?,
        ),
        None => None,
    };
    let mut cfg = match &args.config {
        Some(path) => RunConfig::from_file(path, preset)?,
        None => RunConfig::defaults(preset.unwrap_or(Preset::Desk)),
    };
    if !args.seeds.is_empty() {
        cfg.seeds = args.seeds.clone();
    }
    if let Some(out) = &args.out {
        cfg.out_dir = out.clone();
    }
    Ok(cfg)
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Train(args) => {
            let cfg = resolve_config(&args)?;
            commands::train(&cfg)
        }
        Command::Eval { common, checkpoint, episodes, dump_frames } => {
            let mut cfg = resolve_config(&common)?;
            if let Some(episodes) = episodes {
                if episodes == 0 {
                    bail!("--episodes must be positive");
                }
                cfg.eval_episodes = episodes;
            }
            commands::eval(&cfg, &checkpoint, dump_frames)
        }
        Command::Analyze { traces, out } => {
            if traces.is_empty() {
                bail!("analyze needs at least one trace file");
            }
            commands::analyze(&traces, &out)
        }
        Command::Ablate { common, steps } => {
            let mut cfg = resolve_config(&common)?;
            if let Some(steps) = steps {
                cfg.total_steps = steps;
            }
            commands::ablate(&cfg)
        }
        Command::Gradcheck { samples, tolerance } => commands::gradcheck(samples, tolerance),
        Command::Bench { steps } => commands::bench(steps),
    }
}
