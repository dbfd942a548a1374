//! Experiment configuration: one JSON document, every section optional
//! until a subcommand needs it.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use smdl_core::compress::{CriticalNqConfig, LayerSelection, NoiseMode, RetrainConfig, SigmaSearchConfig};
use smdl_core::llc::LlcConfig;
use smdl_core::mdl::NetConfig;
use smdl_core::volume::{FitWindowConfig, MultiplicityMode};
use smdl_core::zoo::{LossKind, TeacherTask};

use crate::error::{LabError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Loss tolerances for the critical-threshold searches.
    #[serde(default = "default_epsilons")]
    pub epsilons: Vec<f64>,
    #[serde(default)]
    pub model: Option<ModelConfig>,
    #[serde(default)]
    pub training: Option<TrainingConfig>,
    #[serde(default)]
    pub llc: Option<LlcConfig>,
    #[serde(default)]
    pub quantize: Option<QuantizeConfig>,
    #[serde(default)]
    pub factorize: Option<FactorizeConfig>,
    #[serde(default)]
    pub noise: Option<NoiseConfig>,
    #[serde(default)]
    pub prune: Option<PruneConfig>,
    #[serde(default)]
    pub volume: Option<VolumeConfig>,
    #[serde(default)]
    pub mdl: Option<MdlConfig>,
    #[serde(default)]
    pub audit: Option<AuditConfig>,
    #[serde(default)]
    pub analysis: Option<AnalysisConfig>,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

fn default_epsilons() -> Vec<f64> {
    vec![0.25, 0.5, 1.0]
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub layers: Vec<usize>,
    pub loss: LossKind,
    pub task: TaskConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskConfig {
    pub samples: usize,
    pub teacher_layers: Vec<usize>,
    pub teacher_scale: f64,
    pub noise: f64,
    pub seed: u64,
}

impl ModelConfig {
    pub fn teacher(&self) -> TeacherTask {
        TeacherTask {
            samples: self.task.samples,
            teacher_layers: self.task.teacher_layers.clone(),
            teacher_scale: self.task.teacher_scale,
            noise: self.task.noise,
            loss: self.loss,
            seed: self.task.seed,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainingConfig {
    pub steps: u64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub init_scale: f64,
    pub checkpoints: Vec<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QuantizeConfig {
    /// `n_q` values whose ΔLoss is tabulated.
    pub grid: Vec<u32>,
    #[serde(default)]
    pub search: CriticalNqConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FactorizeConfig {
    /// Keep fractions whose ΔLoss is tabulated.
    pub grid: Vec<f64>,
    #[serde(default = "hidden_layers")]
    pub selection: LayerSelection,
}

fn hidden_layers() -> LayerSelection {
    LayerSelection::Hidden
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    /// σ values whose mean ΔLoss is tabulated.
    pub grid: Vec<f64>,
    pub mode: NoiseMode,
    #[serde(default)]
    pub search: SigmaSearchConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PruneConfig {
    /// Keep fractions; the critical value is the smallest one within ε.
    pub grid: Vec<f64>,
    pub retrain: RetrainConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum LandscapeConfig {
    Quadratic {
        name: String,
        lo: Vec<f64>,
        hi: Vec<f64>,
    },
    NormalCrossing {
        name: String,
        exponents: Vec<u32>,
        #[serde(default)]
        active: Option<Vec<bool>>,
        lo: Vec<f64>,
        hi: Vec<f64>,
    },
    BernoulliKl {
        name: String,
        lo: Vec<f64>,
        hi: Vec<f64>,
        m_simplex: f64,
    },
}

impl LandscapeConfig {
    pub fn name(&self) -> &str {
        match self {
            LandscapeConfig::Quadratic { name, .. }
            | LandscapeConfig::NormalCrossing { name, .. }
            | LandscapeConfig::BernoulliKl { name, .. } => name,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VolumeConfig {
    pub landscapes: Vec<LandscapeConfig>,
    /// `[lo, hi]`: the ladder `2^-lo … 2^-hi`.
    pub ladder: [i32; 2],
    pub samples: usize,
    #[serde(default = "select_by_fit")]
    pub multiplicity: MultiplicityMode,
    #[serde(default)]
    pub window: FitWindowConfig,
}

fn select_by_fit() -> MultiplicityMode {
    MultiplicityMode::SelectByFit
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BernoulliConfig {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub m_simplex: f64,
}

impl Default for BernoulliConfig {
    fn default() -> Self {
        Self {
            lo: vec![-0.5, -0.5],
            hi: vec![0.5, 0.5],
            m_simplex: 0.2,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MdlConfig {
    /// Constants in `ε_n = a/n`.
    pub a: Vec<f64>,
    pub n: Vec<u64>,
    /// Independent data draws per `(a, n)`.
    pub trials: u64,
    #[serde(default)]
    pub net: NetConfig,
    #[serde(default)]
    pub model: BernoulliConfig,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AuditConfig {
    pub instances: usize,
    pub outcomes: usize,
    pub m_simplex: f64,
    #[serde(default)]
    pub fluctuation: FluctuationAudit,
    #[serde(default)]
    pub inclusion: InclusionAudit,
}

impl Default for AuditConfig {
    fn default() -> Self {
        Self {
            instances: 10_000,
            outcomes: 3,
            m_simplex: 0.2,
            fluctuation: FluctuationAudit::default(),
            inclusion: InclusionAudit::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FluctuationAudit {
    pub instances: usize,
    pub n: u64,
    pub trials: usize,
}

impl Default for FluctuationAudit {
    fn default() -> Self {
        Self {
            instances: 100,
            n: 1000,
            trials: 2000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InclusionAudit {
    pub instances: usize,
    pub mc_samples: usize,
    #[serde(default)]
    pub model: BernoulliConfig,
}

impl Default for InclusionAudit {
    fn default() -> Self {
        Self {
            instances: 20,
            mc_samples: 200_000,
            model: BernoulliConfig::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Quantize,
    Factorize,
    Noise,
    Prune,
}

impl Scheme {
    pub fn name(self) -> &'static str {
        match self {
            Scheme::Quantize => "quantize",
            Scheme::Factorize => "factorize",
            Scheme::Noise => "noise",
            Scheme::Prune => "prune",
        }
    }

    pub fn sweep_file(self) -> String {
        format!("sweep_{}.csv", self.name())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalysisConfig {
    pub scheme: Scheme,
    /// Checkpoint steps left out of the fit.
    #[serde(default)]
    pub exclude_steps: Vec<u64>,
    #[serde(default)]
    pub gnuplot: bool,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            let inner = e.into_inner();
            if path == "." {
                LabError::Config(inner.to_string())
            } else {
                LabError::Config(format!("at `{path}`: {inner}"))
            }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| LabError::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        if self.epsilons.is_empty() || self.epsilons.iter().any(|&e| !(e > 0.0 && e.is_finite())) {
            return Err(LabError::Config("`epsilons` must be a non-empty list of positive numbers".into()));
        }
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, ignoring the output directory.
    pub fn sha256(&self) -> String {
        let mut c = self.clone();
        c.output_dir = PathBuf::new();
        let bytes = serde_json::to_vec(&c).expect("config serializes");
        Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn require<'a, T>(section: &'a Option<T>, key: &str) -> Result<&'a T> {
        section
            .as_ref()
            .ok_or_else(|| LabError::Config(format!("missing key `{key}`")))
    }
}
