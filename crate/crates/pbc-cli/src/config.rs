//! Run configuration: one TOML file per experiment, command-scoped sections.
//!
//! Every section a command uses is embedded, fully resolved, in the run
//! report, so a report always names the exact hyperparameters that produced
//! it — including values the config file left to defaults.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use pbc::clustering::PbcConfig;
use pbc::data::LossKind;
use pbc::datagen::SyntheticConfig;
use pbc::learners::RegressorSpec;
use pbc::pipeline::FeatureSpec;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Global seed; the `--seed` flag overrides it.
    #[serde(default)]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub data: Option<DataSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub features: Option<FeatureSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<SplitSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub clustering: Option<ClusteringSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regressor: Option<RegressorSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stream: Option<StreamSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub synthetic: Option<SyntheticSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bench: Option<BenchSection>,
}

/// Input locations. Paths are resolved relative to the config file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    /// Wide CSV: feature columns `x1..xd`, target `y`, optional `label`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dataset: Option<PathBuf>,
    /// Long CSV (`series_id,timestamp,value`), turned into lag features.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub series: Option<PathBuf>,
    /// Model bundle consumed by `stream`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub models: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClusteringSection {
    pub k_hat: usize,
    #[serde(default = "default_loss")]
    pub loss: LossKind,
    #[serde(default = "default_zeta")]
    pub zeta: f64,
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
    #[serde(default = "default_init_fraction")]
    pub init_fraction: f64,
    #[serde(default)]
    pub soft_assignment: bool,
}

impl ClusteringSection {
    /// Assembles the library configuration for a given cluster count; the
    /// bench command substitutes its own `k_hat` per table row.
    pub fn to_pbc_config(&self, k_hat: usize, regressor: RegressorSpec, seed: u64) -> PbcConfig {
        PbcConfig {
            k_hat,
            loss: self.loss,
            regressor,
            zeta: self.zeta,
            max_iterations: self.max_iterations,
            init_fraction: self.init_fraction,
            soft_assignment: self.soft_assignment,
            seed,
        }
    }
}

impl Default for ClusteringSection {
    fn default() -> Self {
        Self {
            k_hat: 1,
            loss: default_loss(),
            zeta: default_zeta(),
            max_iterations: default_max_iterations(),
            init_fraction: default_init_fraction(),
            soft_assignment: false,
        }
    }
}

/// Contiguous train/validation/test fractions for series inputs.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SplitSection {
    pub train: f64,
    pub validation: f64,
    pub test: f64,
}

impl SplitSection {
    pub fn fractions(&self) -> (f64, f64, f64) {
        (self.train, self.validation, self.test)
    }
}

impl Default for SplitSection {
    fn default() -> Self {
        Self {
            train: 0.8,
            validation: 0.1,
            test: 0.1,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StreamSection {
    pub batch_size: usize,
    pub learning_rate: f64,
    /// Project weights onto the probability simplex after each update.
    #[serde(default)]
    pub project_weights: bool,
}

/// Mirror of the library's synthetic-mixture parameters minus the seed,
/// which the commands derive from the global seed (per replicate for the
/// bench command).
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticSection {
    pub n_points: usize,
    pub n_relations: usize,
    #[serde(default = "default_dimension")]
    pub dimension: usize,
    #[serde(default = "default_coefficient_low")]
    pub coefficient_low: f64,
    #[serde(default = "default_coefficient_high")]
    pub coefficient_high: f64,
    #[serde(default = "default_noise_std")]
    pub noise_std: f64,
}

impl SyntheticSection {
    pub fn to_config(&self, seed: u64) -> SyntheticConfig {
        SyntheticConfig {
            n_points: self.n_points,
            n_relations: self.n_relations,
            dimension: self.dimension,
            coefficient_low: self.coefficient_low,
            coefficient_high: self.coefficient_high,
            noise_std: self.noise_std,
            seed,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchSection {
    /// Cluster counts to evaluate, one table row each.
    pub k_hat_list: Vec<usize>,
    #[serde(default = "default_replicates")]
    pub replicates: usize,
}

fn default_loss() -> LossKind {
    LossKind::SquaredError
}

fn default_zeta() -> f64 {
    0.01
}

fn default_max_iterations() -> usize {
    50
}

fn default_init_fraction() -> f64 {
    0.3
}

fn default_dimension() -> usize {
    3
}

fn default_coefficient_low() -> f64 {
    -3.0
}

fn default_coefficient_high() -> f64 {
    3.0
}

fn default_noise_std() -> f64 {
    0.1
}

fn default_replicates() -> usize {
    25
}

/// Reads and parses a config file, applies the seed override, and resolves
/// input paths relative to the config file's directory.
pub fn load(path: &Path, seed_override: Option<u64>) -> Result<RunConfig> {
    let text = fs::read_to_string(path)
        .with_context(|| format!("reading config {}", path.display()))?;
    let mut config: RunConfig =
        toml::from_str(&text).with_context(|| format!("parsing config {}", path.display()))?;
    if let Some(seed) = seed_override {
        config.seed = seed;
    }
    let base = match path.parent() {
        Some(parent) if !parent.as_os_str().is_empty() => parent.to_path_buf(),
        _ => PathBuf::from("."),
    };
    if let Some(data) = &mut config.data {
        for input in [&mut data.dataset, &mut data.series, &mut data.models]
            .into_iter()
            .flatten()
        {
            if input.is_relative() {
                *input = base.join(&*input);
            }
        }
    }
    Ok(config)
}

impl RunConfig {
    pub fn require_data(&self, command: &str) -> Result<&DataSection> {
        self.data
            .as_ref()
            .with_context(|| format!("config is missing the [data] section required by {command}"))
    }

    pub fn require_clustering(&self, command: &str) -> Result<&ClusteringSection> {
        self.clustering.as_ref().with_context(|| {
            format!("config is missing the [clustering] section required by {command}")
        })
    }

    pub fn require_regressor(&self, command: &str) -> Result<&RegressorSpec> {
        self.regressor.as_ref().with_context(|| {
            format!("config is missing the [regressor] section required by {command}")
        })
    }

    pub fn require_stream(&self, command: &str) -> Result<&StreamSection> {
        self.stream.as_ref().with_context(|| {
            format!("config is missing the [stream] section required by {command}")
        })
    }

    pub fn require_synthetic(&self, command: &str) -> Result<&SyntheticSection> {
        self.synthetic.as_ref().with_context(|| {
            format!("config is missing the [synthetic] section required by {command}")
        })
    }

    pub fn require_bench(&self, command: &str) -> Result<&BenchSection> {
        self.bench.as_ref().with_context(|| {
            format!("config is missing the [bench] section required by {command}")
        })
    }
}
