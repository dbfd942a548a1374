use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use crate::commands::{self, Run};
use crate::config::ExperimentConfig;
use crate::error::{LabError, Result};

#[derive(Debug, Parser)]
#[command(name = "smdl", version, about = "Singular MDL laboratory: LLC estimation, volume laws, compression sweeps and two-part codes")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Experiment config (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides the config's `seed`.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the config's `output_dir`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overrides the config's `epsilons`, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub epsilon: Option<Vec<f64>>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train the toy MLP and write checkpoints.
    TrainToy(Common),
    /// Estimate λ̂ at every checkpoint.
    EstimateLlc(Common),
    /// Sublevel volume curves and scaling-law fits on analytic landscapes.
    VolumeFit(Common),
    /// Quantization ΔLoss grid and critical n_q per checkpoint.
    QuantizeSweep(Common),
    /// Low-rank factorization ΔLoss grid and critical compression fraction.
    FactorizeSweep(Common),
    /// Gaussian-noise ΔLoss grid and critical σ.
    NoiseSweep(Common),
    /// Hidden-unit pruning with retraining.
    PruneSweep(Common),
    /// Two-part code redundancy on the singular Bernoulli model.
    MdlRedundancy(Common),
    /// Randomized audits of the divergence inequalities.
    LemmaAudit(Common),
    /// Fit critical values against λ̂.
    Analyze(Common),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::TrainToy(_) => "train-toy",
            Command::EstimateLlc(_) => "estimate-llc",
            Command::VolumeFit(_) => "volume-fit",
            Command::QuantizeSweep(_) => "quantize-sweep",
            Command::FactorizeSweep(_) => "factorize-sweep",
            Command::NoiseSweep(_) => "noise-sweep",
            Command::PruneSweep(_) => "prune-sweep",
            Command::MdlRedundancy(_) => "mdl-redundancy",
            Command::LemmaAudit(_) => "lemma-audit",
            Command::Analyze(_) => "analyze",
        }
    }

    fn common(&self) -> &Common {
        match self {
            Command::TrainToy(c)
            | Command::EstimateLlc(c)
            | Command::VolumeFit(c)
            | Command::QuantizeSweep(c)
            | Command::FactorizeSweep(c)
            | Command::NoiseSweep(c)
            | Command::PruneSweep(c)
            | Command::MdlRedundancy(c)
            | Command::LemmaAudit(c)
            | Command::Analyze(c) => c,
        }
    }
}

/// Loads the config and applies command-line overrides.
pub fn effective_config(common: &Common) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(&common.config)?;
    if let Some(s) = common.seed {
        cfg.seed = s;
    }
    if let Some(o) = &common.out {
        cfg.output_dir = o.clone();
    }
    if let Some(e) = &common.epsilon {
        cfg.epsilons = e.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn run(command: &Command) -> Result<()> {
    let cfg = effective_config(command.common())?;
    let run = Run {
        cfg: &cfg,
        command: command.name(),
    };
    std::fs::create_dir_all(run.out()).map_err(|e| LabError::io(run.out(), e))?;
    match command {
        Command::TrainToy(_) => commands::train_toy(&run),
        Command::EstimateLlc(_) => commands::estimate_llc_cmd(&run),
        Command::VolumeFit(_) => commands::volume_fit(&run),
        Command::QuantizeSweep(_) => commands::quantize_sweep(&run),
        Command::FactorizeSweep(_) => commands::factorize_sweep(&run),
        Command::NoiseSweep(_) => commands::noise_sweep(&run),
        Command::PruneSweep(_) => commands::prune_sweep(&run),
        Command::MdlRedundancy(_) => commands::mdl_redundancy(&run),
        Command::LemmaAudit(_) => commands::lemma_audit(&run),
        Command::Analyze(_) => commands::analyze(&run),
    }
}

/// Runs the parsed command line and returns the process exit code.
pub fn main_with(cli: Cli) -> i32 {
    match run(&cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("smdl {}: {e}", cli.command.name());
            e.exit_code()
        }
    }
}
