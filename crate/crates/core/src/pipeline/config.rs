use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{ManuError, Result};
use crate::importance::ImportanceConfig;
use crate::selection::{check_alpha, Scope};
use crate::toymodel::{AttributeSpec, DatasetSpec, ModelTopology, TrainHyperparams};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetParams {
    pub count: usize,
    pub image_dim: usize,
    pub noise_level: f64,
    /// Percentage of profiles to forget: 5, 10 or 15.
    pub forget_fraction: f64,
    pub attributes: Vec<AttributeSpec>,
}

impl Default for DatasetParams {
    fn default() -> Self {
        let d = DatasetSpec::default();
        Self {
            count: d.count,
            image_dim: d.image_dim,
            noise_level: d.noise_level,
            forget_fraction: d.forget_fraction,
            attributes: d.attributes,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelParams {
    pub vision_widths: Vec<usize>,
    pub embed_dim: usize,
    pub language_widths: Vec<usize>,
}

impl Default for ModelParams {
    fn default() -> Self {
        Self {
            vision_widths: vec![128, 128],
            embed_dim: 16,
            language_widths: vec![128, 128],
        }
    }
}

/// Gradient-ascent style baselines are stepped until their mean forget
/// accuracy drop reaches the one MANU achieved at the same alpha, or until
/// `max_steps`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineParams {
    pub lr: f64,
    pub max_steps: usize,
}

impl Default for BaselineParams {
    fn default() -> Self {
        Self { lr: 0.05, max_steps: 200 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub dataset: DatasetParams,
    pub model: ModelParams,
    pub training: TrainHyperparams,
    pub importance: ImportanceConfig,
    /// Pruning ratios in percent.
    pub alphas: Vec<f64>,
    pub scope: Scope,
    pub baselines: BaselineParams,
    /// Pruning ratio used by the importance-function ablation.
    pub ablation_alpha: f64,
    /// Worker threads; `None` uses the global rayon pool.
    pub threads: Option<usize>,
    pub output_dir: PathBuf,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 7,
            dataset: DatasetParams::default(),
            model: ModelParams::default(),
            training: TrainHyperparams::default(),
            importance: ImportanceConfig::default(),
            alphas: vec![2.0, 5.0, 10.0],
            scope: Scope::Global,
            baselines: BaselineParams::default(),
            ablation_alpha: 5.0,
            threads: None,
            output_dir: PathBuf::from("runs"),
        }
    }
}

impl PipelineConfig {
    /// Parses and validates a JSON config. Unknown keys are rejected.
    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text).map_err(|e| ManuError::InvalidConfig(format!("config: {e}")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| ManuError::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn dataset_spec(&self) -> DatasetSpec {
        DatasetSpec {
            seed: self.seed,
            count: self.dataset.count,
            image_dim: self.dataset.image_dim,
            attributes: self.dataset.attributes.clone(),
            noise_level: self.dataset.noise_level,
            forget_fraction: self.dataset.forget_fraction,
        }
    }

    /// Model shape implied by the dataset and model parameters.
    pub fn model_topology(&self) -> ModelTopology {
        let attrs = &self.dataset.attributes;
        ModelTopology {
            image_dim: self.dataset.image_dim,
            vision_widths: self.model.vision_widths.clone(),
            token_vocab: 1 + attrs.len() + self.dataset.count,
            embed_dim: self.model.embed_dim,
            language_widths: self.model.language_widths.clone(),
            answer_vocab: attrs.iter().map(|a| a.options.len()).sum(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.dataset_spec().validate()?;
        self.model_topology().validate()?;
        self.training.validate()?;
        self.importance.validate()?;
        if self.alphas.is_empty() {
            return Err(ManuError::InvalidConfig("alphas must not be empty".into()));
        }
        for &a in &self.alphas {
            check_alpha(a)?;
        }
        if self.alphas.windows(2).any(|w| w[0] >= w[1]) {
            return Err(ManuError::InvalidConfig("alphas must be strictly increasing".into()));
        }
        check_alpha(self.ablation_alpha)?;
        if !(self.baselines.lr > 0.0 && self.baselines.lr.is_finite()) {
            return Err(ManuError::InvalidConfig("baseline lr must be positive".into()));
        }
        if self.threads == Some(0) {
            return Err(ManuError::InvalidConfig("threads must be at least 1".into()));
        }
        Ok(())
    }
}
