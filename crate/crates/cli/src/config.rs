use std::path::{Path, PathBuf};

use rmtkd::data::{CsvSchema, PlantedTaskSpec};
use rmtkd::distill::DistillConfig;
use rmtkd::reducer::{CompressionPlan, DEFAULT_QUANTILE_GRID};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// One experiment, read from a single JSON document. Unknown keys anywhere
/// are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub task: TaskConfig,
    #[serde(default)]
    pub split: SplitConfig,
    pub network: NetworkConfig,
    #[serde(default)]
    pub distill: DistillConfig,
    #[serde(default)]
    pub plan: CompressionPlan,
    #[serde(default)]
    pub ablation: AblationConfig,
    #[serde(default)]
    pub seed: u64,
    /// Where outputs go unless `--out` is given.
    #[serde(default)]
    pub output_dir: Option<PathBuf>,
    /// Existing checkpoint for `spectrum`; without one the freshly
    /// initialised network is analysed.
    #[serde(default)]
    pub checkpoint: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum TaskConfig {
    Synthetic(SyntheticTask),
    Csv(CsvTask),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticTask {
    pub input_dim: usize,
    pub intrinsic_dim: usize,
    pub num_classes: usize,
    pub samples: usize,
    #[serde(default = "default_noise_sigma")]
    pub noise_sigma: f64,
    #[serde(default)]
    pub margin: f64,
}

fn default_noise_sigma() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CsvTask {
    pub path: PathBuf,
    #[serde(default)]
    pub features: Option<Vec<String>>,
    #[serde(default = "default_label")]
    pub label: String,
}

fn default_label() -> String {
    "label".into()
}

impl CsvTask {
    pub fn schema(&self) -> CsvSchema {
        CsvSchema {
            features: self.features.clone(),
            label: self.label.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitConfig {
    pub train_fraction: f64,
    pub val_fraction: f64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            train_fraction: 0.8,
            val_fraction: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NetworkConfig {
    pub hidden: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AblationConfig {
    pub quantiles: Vec<f64>,
    /// Seeds for the per-quantile medians; empty means the run seed only.
    pub seeds: Vec<u64>,
}

impl Default for AblationConfig {
    fn default() -> Self {
        Self {
            quantiles: DEFAULT_QUANTILE_GRID.to_vec(),
            seeds: Vec::new(),
        }
    }
}

fn invalid(key: &str, why: impl std::fmt::Display) -> CliError {
    CliError::Config(format!("{key}: {why}"))
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: Self = serde_json::from_str(text)
            .map_err(|e| CliError::Config(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("config: cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Every nested constraint that can be checked without loading data.
    pub fn validate(&self) -> Result<(), CliError> {
        match &self.task {
            TaskConfig::Synthetic(t) => {
                if t.input_dim == 0 {
                    return Err(invalid("task.synthetic.input_dim", "must be positive"));
                }
                if t.intrinsic_dim == 0 || t.intrinsic_dim > t.input_dim {
                    return Err(invalid("task.synthetic.intrinsic_dim", "must be in 1..=input_dim"));
                }
                if t.num_classes < 2 {
                    return Err(invalid("task.synthetic.num_classes", "must be at least 2"));
                }
                if t.samples < t.num_classes {
                    return Err(invalid("task.synthetic.samples", "need at least one per class"));
                }
                if !(t.noise_sigma.is_finite() && t.noise_sigma >= 0.0) {
                    return Err(invalid("task.synthetic.noise_sigma", "must be non-negative"));
                }
                if !(t.margin.is_finite() && t.margin >= 0.0) {
                    return Err(invalid("task.synthetic.margin", "must be non-negative"));
                }
            }
            TaskConfig::Csv(t) => {
                if t.label.is_empty() {
                    return Err(invalid("task.csv.label", "must not be empty"));
                }
            }
        }
        let s = &self.split;
        if !(s.train_fraction > 0.0 && s.train_fraction < 1.0) {
            return Err(invalid("split.train_fraction", "must be in (0, 1)"));
        }
        if !(s.val_fraction > 0.0 && s.val_fraction < 1.0) {
            return Err(invalid("split.val_fraction", "must be in (0, 1)"));
        }
        if s.train_fraction + s.val_fraction > 1.0 + 1e-12 {
            return Err(invalid("split.val_fraction", "train_fraction + val_fraction exceeds 1"));
        }
        if self.network.hidden.contains(&0) {
            return Err(invalid("network.hidden", "widths must be positive"));
        }
        self.distill
            .validate()
            .map_err(|e| invalid("distill", strip_kind(&e)))?;
        self.plan.validate().map_err(|e| invalid("plan", strip_kind(&e)))?;
        if let Some(i) = self
            .plan
            .layer_order
            .iter()
            .position(|&id| id >= self.network.hidden.len())
        {
            return Err(invalid(
                "plan.layer_order",
                format!("entry {i} is not a hidden layer id"),
            ));
        }
        if self.ablation.quantiles.is_empty() {
            return Err(invalid("ablation.quantiles", "must not be empty"));
        }
        if self.ablation.quantiles.iter().any(|q| !(0.0..=1.0).contains(q)) {
            return Err(invalid("ablation.quantiles", "values must be in [0, 1]"));
        }
        Ok(())
    }

    pub fn input_dim_hint(&self) -> Option<usize> {
        match &self.task {
            TaskConfig::Synthetic(t) => Some(t.input_dim),
            TaskConfig::Csv(_) => None,
        }
    }

    pub fn planted_spec(&self) -> Option<PlantedTaskSpec> {
        match &self.task {
            TaskConfig::Synthetic(t) => Some(PlantedTaskSpec {
                input_dim: t.input_dim,
                intrinsic_dim: t.intrinsic_dim,
                num_classes: t.num_classes,
                samples: t.samples,
                noise_sigma: t.noise_sigma,
                margin: t.margin,
                seed: rmtkd::rng::derive_seed(self.seed, "task"),
            }),
            TaskConfig::Csv(_) => None,
        }
    }
}

/// Core validation errors read "invalid input: field: reason"; keep
/// "field: reason" so it can be prefixed with the section name.
fn strip_kind(e: &rmtkd::Error) -> String {
    match e {
        rmtkd::Error::InvalidInput(msg) => msg.clone(),
        other => other.to_string(),
    }
}

/// Comma-separated quantile list from the command line.
pub fn parse_quantiles(text: &str) -> Result<Vec<f64>, CliError> {
    let values: Vec<f64> = text
        .split(',')
        .map(|s| s.trim())
        .filter(|s| !s.is_empty())
        .map(|s| {
            s.parse::<f64>()
                .map_err(|_| CliError::Config(format!("--quantiles: '{s}' is not a number")))
        })
        .collect::<Result<_, _>>()?;
    if values.is_empty() {
        return Err(CliError::Config("--quantiles: list is empty".into()));
    }
    if let Some(q) = values.iter().find(|q| !(0.0..=1.0).contains(*q)) {
        return Err(CliError::Config(format!("--quantiles: {q} is outside [0, 1]")));
    }
    Ok(values)
}
