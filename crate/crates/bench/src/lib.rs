//! Synthetic inputs for the criterion benchmarks under `benches/`.

use manu_core::importance::NeuronImportance;
use manu_core::trace::LayerSpec;
use manu_core::{ActivationTrace, DatasetTag, ImportanceConfig, ImportanceMap, Modality, ScoreMap, Topology, Tower};

/// `layers` language and `layers` vision layers of `width` units each.
pub fn topology(layers: u32, width: u32) -> Topology {
    let mut specs = Vec::new();
    for tower in Tower::ALL {
        for layer_index in 0..layers {
            specs.push(LayerSpec { tower, layer_index, width });
        }
    }
    Topology::new(specs)
}

/// Deterministic sparse, rectified activations (about half are zero).
pub fn trace(topology: &Topology, tag: DatasetTag, modality: Modality, samples: usize, phase: f32) -> ActivationTrace {
    let values = topology
        .layers
        .iter()
        .enumerate()
        .map(|(li, l)| {
            (0..samples * l.width as usize)
                .map(|i| ((i as f32 * 0.618 + li as f32 * 1.7 + phase).sin() * 2.0).max(0.0))
                .collect()
        })
        .collect();
    let ids = (0..samples).map(|s| format!("{}:{s}", tag.as_str())).collect();
    ActivationTrace::new(tag, modality, ids, topology.clone(), values).expect("well-formed trace")
}

/// Scores with frequent ties, as produced by many dead units.
pub fn scores(topology: &Topology) -> ScoreMap {
    ScoreMap::from_pairs(
        1e-8,
        topology.neurons().into_iter().enumerate().map(|(i, n)| (n, ((i * 7919) % 97) as f64 / 7.0)),
    )
}

/// Forget and retain maps with the aggregate spread over all neurons.
pub fn importance_maps(topology: &Topology) -> (ImportanceMap, ImportanceMap) {
    let map = |tag, k: usize| ImportanceMap {
        dataset_tag: tag,
        config: ImportanceConfig::default(),
        neurons: topology
            .neurons()
            .into_iter()
            .enumerate()
            .map(|(i, neuron)| {
                let v = ((i * k) % 101) as f64 / 50.0;
                NeuronImportance { neuron, i_abs: v, i_freq: 0.0, i_var: 0.0, i_rms: 0.0, aggregate: v }
            })
            .collect(),
    };
    (map(DatasetTag::Forget, 31), map(DatasetTag::Retain, 57))
}
