//! Forget/retain scoring, top-α% neuron selection and pruning masks.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{ManuError, Result};
use crate::importance::{ImportanceMap, ImportanceWeights};
use crate::trace::{DatasetTag, NeuronId, Topology, Tower};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeuronScore {
    #[serde(flatten)]
    pub neuron: NeuronId,
    pub score: f64,
}

/// `S_n` for every neuron, sorted by `NeuronId`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreMap {
    pub epsilon: f64,
    pub scores: Vec<NeuronScore>,
}

impl ScoreMap {
    pub fn from_pairs(epsilon: f64, pairs: impl IntoIterator<Item = (NeuronId, f64)>) -> Self {
        let mut scores: Vec<NeuronScore> = pairs
            .into_iter()
            .map(|(neuron, score)| NeuronScore { neuron, score })
            .collect();
        scores.sort_by_key(|s| s.neuron);
        Self { epsilon, scores }
    }

    pub fn get(&self, neuron: NeuronId) -> Option<f64> {
        self.scores
            .binary_search_by(|s| s.neuron.cmp(&neuron))
            .ok()
            .map(|i| self.scores[i].score)
    }
}

/// `S_n = I(forget, n) / (I(retain, n) + ε)`.
pub fn score_neurons(forget: &ImportanceMap, retain: &ImportanceMap, epsilon: f64) -> Result<ScoreMap> {
    if forget.dataset_tag != DatasetTag::Forget || retain.dataset_tag != DatasetTag::Retain {
        return Err(ManuError::TagMismatch(format!(
            "expected (forget, retain) maps, got ({}, {})",
            forget.dataset_tag.as_str(),
            retain.dataset_tag.as_str()
        )));
    }
    if forget.neurons.len() != retain.neurons.len()
        || forget.neuron_ids().zip(retain.neuron_ids()).any(|(a, b)| a != b)
    {
        return Err(ManuError::TopologyMismatch(
            "forget and retain importance maps cover different neurons".into(),
        ));
    }
    let mut scores = Vec::with_capacity(forget.neurons.len());
    for (f, r) in forget.neurons.iter().zip(&retain.neurons) {
        let score = f.aggregate / (r.aggregate + epsilon);
        if !score.is_finite() || score < 0.0 {
            return Err(ManuError::numeric(
                "scoring",
                format!("score for {} is {score} (forget {}, retain {})", f.neuron, f.aggregate, r.aggregate),
            ));
        }
        scores.push(NeuronScore {
            neuron: f.neuron,
            score,
        });
    }
    Ok(ScoreMap { epsilon, scores })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    #[default]
    Global,
    PerTower,
}

pub fn check_alpha(alpha: f64) -> Result<()> {
    if alpha > 0.0 && alpha < 100.0 {
        Ok(())
    } else {
        Err(ManuError::AlphaOutOfRange(alpha))
    }
}

/// Number of neurons pruned out of `eligible` at ratio `alpha` percent (rounded up).
pub fn selection_size(alpha: f64, eligible: usize) -> usize {
    let k = (alpha / 100.0 * eligible as f64).ceil() as usize;
    k.min(eligible)
}

fn top_k(mut candidates: Vec<NeuronScore>, k: usize) -> impl Iterator<Item = NeuronId> {
    // highest score first; equal scores resolved towards the smaller id
    candidates.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.neuron.cmp(&b.neuron)));
    candidates.into_iter().take(k).map(|s| s.neuron)
}

/// Picks the `ceil(α% × eligible)` highest-scoring neurons, per partition when
/// `scope` is [`Scope::PerTower`]. Protected neurons are never eligible.
pub fn select_top(
    scores: &ScoreMap,
    alpha: f64,
    scope: Scope,
    protected: &BTreeSet<NeuronId>,
) -> Result<BTreeSet<NeuronId>> {
    check_alpha(alpha)?;
    let eligible = scores
        .scores
        .iter()
        .filter(|s| !protected.contains(&s.neuron))
        .copied();
    let selected = match scope {
        Scope::Global => {
            let pool: Vec<NeuronScore> = eligible.collect();
            let k = selection_size(alpha, pool.len());
            top_k(pool, k).collect()
        }
        Scope::PerTower => {
            let mut by_tower: BTreeMap<Tower, Vec<NeuronScore>> = BTreeMap::new();
            for s in eligible {
                by_tower.entry(s.neuron.tower).or_default().push(s);
            }
            by_tower
                .into_values()
                .flat_map(|pool| {
                    let k = selection_size(alpha, pool.len());
                    top_k(pool, k)
                })
                .collect()
        }
    };
    Ok(selected)
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Provenance {
    pub epsilon: f64,
    pub tau: f64,
    pub weights: ImportanceWeights,
    /// SHA-256 of each trace file that fed the importance maps.
    pub trace_fingerprints: Vec<String>,
}

/// Selection metadata that is carried verbatim into the mask.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskMetadata {
    pub model_id: String,
    pub alpha: f64,
    pub scope: Scope,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PruneMask {
    pub format_version: u32,
    pub model_id: String,
    pub alpha: f64,
    pub scope: Scope,
    pub pruned: Vec<NeuronId>,
    pub provenance: Provenance,
}

impl PruneMask {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let mask: PruneMask = serde_json::from_str(s)?;
        if mask.format_version != 1 {
            return Err(ManuError::InvalidConfig(format!(
                "unsupported mask format_version {}",
                mask.format_version
            )));
        }
        if mask.pruned.windows(2).any(|w| w[0] >= w[1]) {
            return Err(ManuError::InvalidConfig(
                "mask pruned list must be strictly ascending".into(),
            ));
        }
        Ok(mask)
    }

    pub fn contains(&self, neuron: NeuronId) -> bool {
        self.pruned.binary_search(&neuron).is_ok()
    }
}

pub fn emit_mask(selected: &BTreeSet<NeuronId>, topology: &Topology, metadata: MaskMetadata) -> Result<PruneMask> {
    if let Some(&n) = selected.iter().find(|&&n| !topology.contains(n)) {
        return Err(ManuError::NeuronOutOfTopology(n));
    }
    Ok(PruneMask {
        format_version: 1,
        model_id: metadata.model_id,
        alpha: metadata.alpha,
        scope: metadata.scope,
        // BTreeSet iteration is already ascending
        pruned: selected.iter().copied().collect(),
        provenance: metadata.provenance,
    })
}
