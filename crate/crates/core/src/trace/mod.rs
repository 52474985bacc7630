//! Activation traces: the per-neuron, per-sample activation record that all
//! importance statistics are computed from.
//!
//! A trace holds one dense `samples x width` matrix per MLP layer, stored as
//! `f32`. Every entry is already token-reduced (see [`reduce_tokens`]), so a
//! column is the list of per-sample activations `z(d)` for a single neuron.

mod io;

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{ManuError, Result};

pub use io::{decode_trace, encode_trace, load_trace, save_trace, TRACE_MAGIC};

/// Which tower of the two-tower model a neuron lives in.
///
/// Declaration order fixes the neuron ordering: language sorts before vision.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tower {
    Language,
    Vision,
}

impl Tower {
    pub const ALL: [Tower; 2] = [Tower::Language, Tower::Vision];

    pub fn as_str(self) -> &'static str {
        match self {
            Tower::Language => "language",
            Tower::Vision => "vision",
        }
    }
}

/// One MLP hidden unit, addressed by `(tower, layer, unit)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct NeuronId {
    pub tower: Tower,
    pub layer: u32,
    pub unit: u32,
}

impl NeuronId {
    pub fn new(tower: Tower, layer: u32, unit: u32) -> Self {
        Self { tower, layer, unit }
    }
}

impl fmt::Display for NeuronId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}.{}.{}", self.tower.as_str(), self.layer, self.unit)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetTag {
    Forget,
    Retain,
    Test,
    Other,
}

impl DatasetTag {
    pub fn as_str(self) -> &'static str {
        match self {
            DatasetTag::Forget => "forget",
            DatasetTag::Retain => "retain",
            DatasetTag::Test => "test",
            DatasetTag::Other => "other",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Modality {
    Multimodal,
    TextOnly,
}

impl Modality {
    pub const ALL: [Modality; 2] = [Modality::Multimodal, Modality::TextOnly];

    pub fn as_str(self) -> &'static str {
        match self {
            Modality::Multimodal => "multimodal",
            Modality::TextOnly => "text_only",
        }
    }
}

/// Shape of a single traced layer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct LayerSpec {
    pub tower: Tower,
    pub layer_index: u32,
    pub width: u32,
}

impl LayerSpec {
    pub fn name(&self) -> String {
        format!("{}.{}", self.tower.as_str(), self.layer_index)
    }
}

/// Ordered list of traced layers. Two topologies are compatible iff equal.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Topology {
    pub layers: Vec<LayerSpec>,
}

impl Topology {
    pub fn new(layers: Vec<LayerSpec>) -> Self {
        Self { layers }
    }

    pub fn neuron_count(&self) -> usize {
        self.layers.iter().map(|l| l.width as usize).sum()
    }

    pub fn contains(&self, n: NeuronId) -> bool {
        self.layers
            .iter()
            .any(|l| l.tower == n.tower && l.layer_index == n.layer && n.unit < l.width)
    }

    /// Every neuron of the topology, in ascending `NeuronId` order.
    pub fn neurons(&self) -> Vec<NeuronId> {
        let mut out: Vec<NeuronId> = self
            .layers
            .iter()
            .flat_map(|l| (0..l.width).map(move |u| NeuronId::new(l.tower, l.layer_index, u)))
            .collect();
        out.sort_unstable();
        out
    }
}

/// Per-sample scalar activations for every neuron of one `(dataset, modality)` slice.
#[derive(Debug, Clone, PartialEq)]
pub struct ActivationTrace {
    pub dataset_tag: DatasetTag,
    pub modality: Modality,
    pub sample_ids: Vec<String>,
    pub topology: Topology,
    /// One row-major `samples x width` block per layer, in topology order.
    pub values: Vec<Vec<f32>>,
}

impl ActivationTrace {
    /// Builds a trace and checks its shape and finiteness invariants.
    pub fn new(
        dataset_tag: DatasetTag,
        modality: Modality,
        sample_ids: Vec<String>,
        topology: Topology,
        values: Vec<Vec<f32>>,
    ) -> Result<Self> {
        let trace = Self {
            dataset_tag,
            modality,
            sample_ids,
            topology,
            values,
        };
        trace.check()?;
        Ok(trace)
    }

    pub fn sample_count(&self) -> usize {
        self.sample_ids.len()
    }

    pub(crate) fn check(&self) -> Result<()> {
        if self.values.len() != self.topology.layers.len() {
            return Err(ManuError::TopologyMismatch(format!(
                "{} value blocks for {} layers",
                self.values.len(),
                self.topology.layers.len()
            )));
        }
        let rows = self.sample_ids.len();
        for (li, (layer, block)) in self.topology.layers.iter().zip(&self.values).enumerate() {
            let expected = rows * layer.width as usize;
            if block.len() != expected {
                return Err(crate::error::TraceFormatError::ShapeMismatch {
                    expected: expected * 4,
                    found: block.len() * 4,
                }
                .into());
            }
            if let Some(pos) = block.iter().position(|v| !v.is_finite()) {
                let width = layer.width as usize;
                return Err(crate::error::TraceFormatError::NonFinite {
                    layer: li,
                    row: pos / width,
                    column: pos % width,
                }
                .into());
            }
        }
        Ok(())
    }

    /// Activation column of one neuron, widened to `f64`.
    pub fn column(&self, neuron: NeuronId) -> Option<Vec<f64>> {
        let li = self
            .topology
            .layers
            .iter()
            .position(|l| l.tower == neuron.tower && l.layer_index == neuron.layer)?;
        let width = self.topology.layers[li].width as usize;
        let unit = neuron.unit as usize;
        if unit >= width {
            return None;
        }
        Some(self.layer_column(li, unit))
    }

    pub(crate) fn layer_column(&self, layer_pos: usize, unit: usize) -> Vec<f64> {
        let width = self.topology.layers[layer_pos].width as usize;
        self.values[layer_pos]
            .iter()
            .skip(unit)
            .step_by(width)
            .map(|&v| f64::from(v))
            .collect()
    }
}

/// Collapses a per-token activation sequence into the per-sample scalar `z(d)`:
/// the signed arithmetic mean over token positions.
pub fn reduce_tokens(raw: &[f64]) -> Result<f64> {
    if raw.is_empty() {
        return Err(ManuError::EmptyInput("token activation sequence"));
    }
    Ok(raw.iter().sum::<f64>() / raw.len() as f64)
}

/// The four traces consumed by one unlearning run.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceBundle {
    pub forget_multimodal: ActivationTrace,
    pub forget_text: ActivationTrace,
    pub retain_multimodal: ActivationTrace,
    pub retain_text: ActivationTrace,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum BundleFinding {
    /// A trace sits in a slot whose dataset tag or modality it does not carry.
    WrongSlot {
        slot: &'static str,
        dataset_tag: DatasetTag,
        modality: Modality,
    },
    TopologyMismatch {
        slot: &'static str,
        detail: String,
    },
    /// Sample ids present in both the forget and retain traces.
    OverlappingSamples { ids: Vec<String> },
}

impl fmt::Display for BundleFinding {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BundleFinding::WrongSlot {
                slot,
                dataset_tag,
                modality,
            } => write!(
                f,
                "slot {slot} holds a {}/{} trace",
                dataset_tag.as_str(),
                modality.as_str()
            ),
            BundleFinding::TopologyMismatch { slot, detail } => {
                write!(f, "topology of {slot} differs from forget_multimodal: {detail}")
            }
            BundleFinding::OverlappingSamples { ids } => {
                write!(f, "forget and retain share sample ids: {}", ids.join(", "))
            }
        }
    }
}

impl TraceBundle {
    fn slots(&self) -> [(&'static str, &ActivationTrace, DatasetTag, Modality); 4] {
        [
            ("forget_multimodal", &self.forget_multimodal, DatasetTag::Forget, Modality::Multimodal),
            ("forget_text", &self.forget_text, DatasetTag::Forget, Modality::TextOnly),
            ("retain_multimodal", &self.retain_multimodal, DatasetTag::Retain, Modality::Multimodal),
            ("retain_text", &self.retain_text, DatasetTag::Retain, Modality::TextOnly),
        ]
    }

    pub fn topology(&self) -> &Topology {
        &self.forget_multimodal.topology
    }
}

/// Lists every invariant violation of the bundle. An empty result means valid.
pub fn validate_bundle(bundle: &TraceBundle) -> Vec<BundleFinding> {
    let mut findings = Vec::new();
    let reference = bundle.topology();
    for (slot, trace, tag, modality) in bundle.slots() {
        if trace.dataset_tag != tag || trace.modality != modality {
            findings.push(BundleFinding::WrongSlot {
                slot,
                dataset_tag: trace.dataset_tag,
                modality: trace.modality,
            });
        }
        if &trace.topology != reference {
            findings.push(BundleFinding::TopologyMismatch {
                slot,
                detail: describe_topology_diff(reference, &trace.topology),
            });
        }
    }

    let forget: BTreeSet<&str> = bundle
        .forget_multimodal
        .sample_ids
        .iter()
        .chain(&bundle.forget_text.sample_ids)
        .map(String::as_str)
        .collect();
    let overlap: Vec<String> = bundle
        .retain_multimodal
        .sample_ids
        .iter()
        .chain(&bundle.retain_text.sample_ids)
        .filter(|id| forget.contains(id.as_str()))
        .map(String::clone)
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    if !overlap.is_empty() {
        findings.push(BundleFinding::OverlappingSamples { ids: overlap });
    }
    findings
}

fn describe_topology_diff(a: &Topology, b: &Topology) -> String {
    if a.layers.len() != b.layers.len() {
        return format!("{} layers vs {}", a.layers.len(), b.layers.len());
    }
    a.layers
        .iter()
        .zip(&b.layers)
        .filter(|(x, y)| x != y)
        .map(|(x, y)| format!("{} width {} vs {} width {}", x.name(), x.width, y.name(), y.width))
        .collect::<Vec<_>>()
        .join("; ")
}
