//! Per-neuron importance functions contrasting multimodal and text-only
//! activations on a single dataset.
//!
//! Each function takes the neuron's per-sample activations under the two
//! modalities. `Z̄` below is the mean of *absolute* activations.
//!
//! | name   | value                                              |
//! |--------|----------------------------------------------------|
//! | `abs`  | `|Z̄m − Z̄t| / (Z̄m + Z̄t + ε)`                         |
//! | `freq` | `|Nm − Nt| / (Nm + Nt + ε)`, `N = #{|z| > τ}`        |
//! | `var`  | `sqrt(Var_m + Var_t)`, `Var = mean((z − Z̄)²)`       |
//! | `rms`  | `sqrt(|Σz²_m − Σz²_t| / (Σz²_m + Σz²_t + ε))`       |
//!
//! The aggregate is the weighted sum of the four; the default weights are all 1.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ManuError, Result};
use crate::trace::{ActivationTrace, DatasetTag, Modality, NeuronId};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImportanceWeights {
    pub abs: f64,
    pub freq: f64,
    pub var: f64,
    pub rms: f64,
}

impl Default for ImportanceWeights {
    fn default() -> Self {
        Self {
            abs: 1.0,
            freq: 1.0,
            var: 1.0,
            rms: 1.0,
        }
    }
}

impl ImportanceWeights {
    pub fn as_array(&self) -> [f64; 4] {
        [self.abs, self.freq, self.var, self.rms]
    }

    /// The default weights with one function switched off.
    pub fn without(component: ImportanceComponent) -> Self {
        let mut w = Self::default();
        match component {
            ImportanceComponent::Abs => w.abs = 0.0,
            ImportanceComponent::Freq => w.freq = 0.0,
            ImportanceComponent::Var => w.var = 0.0,
            ImportanceComponent::Rms => w.rms = 0.0,
        }
        w
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ImportanceComponent {
    Abs,
    Freq,
    Var,
    Rms,
}

impl ImportanceComponent {
    pub const ALL: [ImportanceComponent; 4] = [
        ImportanceComponent::Abs,
        ImportanceComponent::Freq,
        ImportanceComponent::Var,
        ImportanceComponent::Rms,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ImportanceComponent::Abs => "abs",
            ImportanceComponent::Freq => "freq",
            ImportanceComponent::Var => "var",
            ImportanceComponent::Rms => "rms",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImportanceConfig {
    pub epsilon: f64,
    pub tau: f64,
    pub weights: ImportanceWeights,
}

impl Default for ImportanceConfig {
    fn default() -> Self {
        Self {
            epsilon: 1e-8,
            tau: 0.1,
            weights: ImportanceWeights::default(),
        }
    }
}

impl ImportanceConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(ManuError::InvalidConfig(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if !(self.tau >= 0.0 && self.tau.is_finite()) {
            return Err(ManuError::InvalidConfig(format!(
                "tau must be non-negative, got {}",
                self.tau
            )));
        }
        let w = self.weights.as_array();
        if w.iter().any(|x| !(x.is_finite() && *x >= 0.0)) {
            return Err(ManuError::InvalidConfig(
                "importance weights must be finite and non-negative".into(),
            ));
        }
        if w.iter().all(|&x| x == 0.0) {
            return Err(ManuError::InvalidConfig(
                "at least one importance weight must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Shifted by the first value so a constant column returns that value exactly.
fn mean_abs(xs: &[f64]) -> f64 {
    let a0 = xs[0].abs();
    a0 + xs.iter().map(|x| x.abs() - a0).sum::<f64>() / xs.len() as f64
}

fn require_both(multi: &[f64], text: &[f64]) -> Result<()> {
    if multi.is_empty() {
        return Err(ManuError::EmptyInput("multimodal activations"));
    }
    if text.is_empty() {
        return Err(ManuError::EmptyInput("text-only activations"));
    }
    Ok(())
}

pub fn abs_importance(multi: &[f64], text: &[f64], epsilon: f64) -> Result<f64> {
    require_both(multi, text)?;
    let (zm, zt) = (mean_abs(multi), mean_abs(text));
    Ok((zm - zt).abs() / (zm + zt + epsilon))
}

pub fn freq_importance(multi: &[f64], text: &[f64], tau: f64, epsilon: f64) -> Result<f64> {
    require_both(multi, text)?;
    let count = |xs: &[f64]| xs.iter().filter(|x| x.abs() > tau).count() as f64;
    let (nm, nt) = (count(multi), count(text));
    Ok((nm - nt).abs() / (nm + nt + epsilon))
}

/// Deviations are taken from the mean of absolute values, not the signed mean.
pub fn var_importance(multi: &[f64], text: &[f64]) -> Result<f64> {
    require_both(multi, text)?;
    let spread = |xs: &[f64]| {
        let center = mean_abs(xs);
        xs.iter().map(|x| (x - center).powi(2)).sum::<f64>() / xs.len() as f64
    };
    Ok((spread(multi) + spread(text)).sqrt())
}

pub fn rms_importance(multi: &[f64], text: &[f64], epsilon: f64) -> Result<f64> {
    require_both(multi, text)?;
    let sq = |xs: &[f64]| xs.iter().map(|x| x * x).sum::<f64>();
    let (m, t) = (sq(multi), sq(text));
    Ok(((m - t).abs() / (m + t + epsilon)).sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeuronImportance {
    #[serde(flatten)]
    pub neuron: NeuronId,
    pub i_abs: f64,
    pub i_freq: f64,
    pub i_var: f64,
    pub i_rms: f64,
    pub aggregate: f64,
}

impl NeuronImportance {
    /// Evaluates all four functions for one neuron's activation columns.
    pub fn compute(neuron: NeuronId, multi: &[f64], text: &[f64], config: &ImportanceConfig) -> Result<Self> {
        let i_abs = abs_importance(multi, text, config.epsilon)?;
        let i_freq = freq_importance(multi, text, config.tau, config.epsilon)?;
        let i_var = var_importance(multi, text)?;
        let i_rms = rms_importance(multi, text, config.epsilon)?;
        let w = &config.weights;
        let aggregate = w.abs * i_abs + w.freq * i_freq + w.var * i_var + w.rms * i_rms;
        Ok(Self {
            neuron,
            i_abs,
            i_freq,
            i_var,
            i_rms,
            aggregate,
        })
    }
}

/// Importance of every neuron for one dataset, sorted by `NeuronId`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImportanceMap {
    pub dataset_tag: DatasetTag,
    pub config: ImportanceConfig,
    pub neurons: Vec<NeuronImportance>,
}

impl ImportanceMap {
    pub fn get(&self, neuron: NeuronId) -> Option<&NeuronImportance> {
        self.neurons
            .binary_search_by(|n| n.neuron.cmp(&neuron))
            .ok()
            .map(|i| &self.neurons[i])
    }

    pub fn neuron_ids(&self) -> impl Iterator<Item = NeuronId> + '_ {
        self.neurons.iter().map(|n| n.neuron)
    }
}

pub fn compute_importance_map(
    multi_trace: &ActivationTrace,
    text_trace: &ActivationTrace,
    config: &ImportanceConfig,
) -> Result<ImportanceMap> {
    config.validate()?;
    if multi_trace.modality != Modality::Multimodal || text_trace.modality != Modality::TextOnly {
        return Err(ManuError::TagMismatch(format!(
            "expected (multimodal, text_only) traces, got ({}, {})",
            multi_trace.modality.as_str(),
            text_trace.modality.as_str()
        )));
    }
    if multi_trace.dataset_tag != text_trace.dataset_tag {
        return Err(ManuError::TagMismatch(format!(
            "multimodal trace is {} but text-only trace is {}",
            multi_trace.dataset_tag.as_str(),
            text_trace.dataset_tag.as_str()
        )));
    }
    if multi_trace.topology != text_trace.topology {
        return Err(ManuError::TopologyMismatch(
            "multimodal and text-only traces disagree on layers".into(),
        ));
    }

    let jobs: Vec<(usize, u32)> = multi_trace
        .topology
        .layers
        .iter()
        .enumerate()
        .flat_map(|(li, l)| (0..l.width).map(move |u| (li, u)))
        .collect();
    let mut neurons = jobs
        .par_iter()
        .map(|&(li, unit)| {
            let layer = &multi_trace.topology.layers[li];
            let id = NeuronId::new(layer.tower, layer.layer_index, unit);
            let multi = multi_trace.layer_column(li, unit as usize);
            let text = text_trace.layer_column(li, unit as usize);
            NeuronImportance::compute(id, &multi, &text, config)
        })
        .collect::<Result<Vec<_>>>()?;
    neurons.sort_by_key(|n| n.neuron);

    Ok(ImportanceMap {
        dataset_tag: multi_trace.dataset_tag,
        config: *config,
        neurons,
    })
}
