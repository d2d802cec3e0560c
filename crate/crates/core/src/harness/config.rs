//! Experiment configuration, read from a TOML file.
//!
//! ```toml
//! schema_version = 1
//!
//! [model]
//! family = "categorical"    # bernoulli | categorical | softmax | overparam-softmax
//! classes = 3
//! inputs = 4                # |𝒳| for categorical tables
//! features = 2              # m for the softmax families
//!
//! [truth]
//! theta = [0.8473]          # explicit θ₀, or:
//! seed = 7                  # seeded N(0, scale²) draw
//! scale = 1.0
//!
//! [region]
//! schedule = "berry-esseen" # fixed | fisher-scaled | berry-esseen | plug-in
//! radius = 0.1              # fixed
//! epsilon = 0.1             # fisher-scaled
//! per_query = true          # fisher-scaled: one ball per query x, else one from the first x
//! delta = 0.05              # berry-esseen
//! c = 0.0
//! sigma_min = "oracle"      # oracle | plug-in
//!
//! [experiment]
//! n = [100, 1000, 10000]
//! replications = 200
//! seed = 42
//! panel_size = 32           # evaluation inputs when 𝒳 is infinite
//! fisher_samples = 4096     # inputs averaged for σ_min when 𝒳 is infinite
//! n0_epsilon = 0.05         # optional: report the empirical n₀
//!
//! [optimizer]               # optional, see OptimizerConfig
//! restarts = 8
//!
//! [output]
//! dir = "out"
//! export_datasets = false
//!
//! [tolerance]
//! inequality = 1e-8
//! ```
//!
//! Unknown keys are rejected.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::bounds::INEQUALITY_TOL;
use crate::error::{Error, Result};
use crate::optim::OptimizerConfig;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    Bernoulli,
    Categorical,
    Softmax,
    OverparamSoftmax,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub family: Family,
    #[serde(default = "default_classes")]
    pub classes: usize,
    #[serde(default = "one")]
    pub inputs: usize,
    #[serde(default = "one")]
    pub features: usize,
    /// Marginal weights of the categorical input cells; uniform if absent.
    #[serde(default)]
    pub input_weights: Option<Vec<f64>>,
}

fn default_classes() -> usize {
    2
}

fn one() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TruthSection {
    #[serde(default)]
    pub theta: Option<Vec<f64>>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default = "unit")]
    pub scale: f64,
}

fn unit() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScheduleKind {
    Fixed,
    FisherScaled,
    BerryEsseen,
    PlugIn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SigmaMinMode {
    /// `σ_min(θ₀)` from the true parameter.
    Oracle,
    /// `σ_min(θ̂)` from each fitted parameter.
    PlugIn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegionSection {
    pub schedule: ScheduleKind,
    #[serde(default)]
    pub radius: Option<f64>,
    #[serde(default)]
    pub epsilon: Option<f64>,
    #[serde(default = "yes")]
    pub per_query: bool,
    #[serde(default)]
    pub delta: Option<f64>,
    #[serde(default)]
    pub c: f64,
    #[serde(default = "oracle")]
    pub sigma_min: SigmaMinMode,
}

fn yes() -> bool {
    true
}

fn oracle() -> SigmaMinMode {
    SigmaMinMode::Oracle
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSection {
    pub n: Vec<usize>,
    #[serde(default = "one")]
    pub replications: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_panel")]
    pub panel_size: usize,
    #[serde(default = "default_fisher_samples")]
    pub fisher_samples: usize,
    #[serde(default)]
    pub n0_epsilon: Option<f64>,
}

fn default_panel() -> usize {
    32
}

fn default_fisher_samples() -> usize {
    4096
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    #[serde(default)]
    pub dir: Option<PathBuf>,
    #[serde(default)]
    pub export_datasets: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceSection {
    #[serde(default = "default_tol")]
    pub inequality: f64,
}

fn default_tol() -> f64 {
    INEQUALITY_TOL
}

impl Default for ToleranceSection {
    fn default() -> Self {
        Self {
            inequality: INEQUALITY_TOL,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    pub model: ModelSection,
    pub truth: TruthSection,
    pub region: RegionSection,
    pub experiment: RunSection,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default = "default_output")]
    pub output: OutputSection,
    #[serde(default)]
    pub tolerance: ToleranceSection,
}

fn default_output() -> OutputSection {
    OutputSection {
        dir: None,
        export_datasets: false,
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.schema_version != SCHEMA_VERSION {
            return bad(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            ));
        }
        if self.experiment.replications == 0 {
            return bad("replications must be at least 1".into());
        }
        if self.experiment.n.is_empty() || self.experiment.n.windows(2).any(|w| w[0] >= w[1]) {
            return bad("n grid must be non-empty and strictly increasing".into());
        }
        if self.experiment.n[0] == 0 {
            return bad("n grid entries must be positive".into());
        }
        if self.experiment.panel_size == 0 || self.experiment.fisher_samples == 0 {
            return bad("panel_size and fisher_samples must be positive".into());
        }
        if self.model.classes < 2 {
            return bad("model.classes must be at least 2".into());
        }
        if self.model.family == Family::Bernoulli
            && (self.model.classes != 2 || self.model.inputs != 1)
        {
            return bad("bernoulli family has 2 classes and a single input".into());
        }
        if let Some(w) = &self.model.input_weights {
            if w.len() != self.model.inputs || w.iter().any(|v| !(*v > 0.0)) {
                return bad("input_weights needs one positive weight per input cell".into());
            }
        }
        if self.truth.theta.is_none() && self.truth.seed.is_none() {
            return bad("truth needs either `theta` or `seed`".into());
        }
        let r = &self.region;
        match r.schedule {
            ScheduleKind::Fixed if !r.radius.is_some_and(|v| v > 0.0) => {
                bad("fixed schedule needs a positive `radius`".into())
            }
            ScheduleKind::FisherScaled if !r.epsilon.is_some_and(|v| v > 0.0) => {
                bad("fisher-scaled schedule needs a positive `epsilon`".into())
            }
            ScheduleKind::BerryEsseen if !r.delta.is_some_and(|v| v > 0.0 && v < 1.0) => {
                bad("berry-esseen schedule needs `delta` in (0, 1)".into())
            }
            _ => Ok(()),
        }
    }

    /// Output directory: explicit override, then the config, then
    /// `$METANML_OUT_DIR`, then `./out`.
    pub fn resolve_out_dir(&self, cli_override: Option<&Path>) -> PathBuf {
        cli_override
            .map(Path::to_path_buf)
            .or_else(|| self.output.dir.clone())
            .or_else(|| std::env::var_os(super::OUT_DIR_ENV).map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("out"))
    }

    /// The preset Berry-Esseen decay study on a Bernoulli model.
    pub fn decay_preset(seed: u64) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            model: ModelSection {
                family: Family::Bernoulli,
                classes: 2,
                inputs: 1,
                features: 1,
                input_weights: None,
            },
            truth: TruthSection {
                theta: Some(vec![(0.7f64 / 0.3).ln()]),
                seed: None,
                scale: 1.0,
            },
            region: RegionSection {
                schedule: ScheduleKind::BerryEsseen,
                radius: None,
                epsilon: None,
                per_query: true,
                delta: Some(0.05),
                c: 0.0,
                sigma_min: SigmaMinMode::Oracle,
            },
            experiment: RunSection {
                n: vec![100, 1000, 10_000],
                replications: 200,
                seed,
                panel_size: 32,
                fisher_samples: 4096,
                n0_epsilon: None,
            },
            optimizer: OptimizerConfig::default(),
            output: default_output(),
            tolerance: ToleranceSection::default(),
        }
    }

    /// Over-parameterized three-class softmax with the Fisher-scaled radius rule.
    pub fn overparam_preset(seed: u64, replications: usize) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            model: ModelSection {
                family: Family::OverparamSoftmax,
                classes: 3,
                inputs: 1,
                features: 2,
                input_weights: None,
            },
            truth: TruthSection {
                theta: Some(vec![1.0, 0.5, -0.5, 1.0, 0.0, -1.0]),
                seed: None,
                scale: 1.0,
            },
            region: RegionSection {
                schedule: ScheduleKind::FisherScaled,
                radius: None,
                epsilon: Some(0.1),
                per_query: true,
                delta: None,
                c: 0.0,
                sigma_min: SigmaMinMode::Oracle,
            },
            experiment: RunSection {
                n: vec![100, 10_000],
                replications,
                seed,
                panel_size: 32,
                fisher_samples: 4096,
                n0_epsilon: None,
            },
            optimizer: OptimizerConfig::default(),
            output: default_output(),
            tolerance: ToleranceSection::default(),
        }
    }
}
