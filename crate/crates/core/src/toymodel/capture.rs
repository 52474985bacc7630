use rayon::prelude::*;

use super::data::Sample;
use super::ToyModel;
use crate::error::{ManuError, Result};
use crate::selection::PruneMask;
use crate::trace::{reduce_tokens, ActivationTrace, DatasetTag, Modality, NeuronId, Tower};

/// Records the post-activation value of every MLP hidden unit for each
/// sample. Language units are reduced over token positions.
pub fn capture_activations(
    model: &ToyModel,
    samples: &[Sample],
    dataset_tag: DatasetTag,
    modality: Modality,
) -> Result<ActivationTrace> {
    if samples.is_empty() {
        return Err(ManuError::EmptyInput("activation capture slice"));
    }
    for s in samples {
        model.check_input(&s.input)?;
    }
    let topology = model.trace_topology();
    let rows: Vec<Vec<Vec<f32>>> = samples
        .par_iter()
        .map(|s| {
            let cache = model.forward_cached(&s.input);
            let mut per_layer = Vec::with_capacity(topology.layers.len());
            for post in &cache.language_post {
                let width = post[0].len();
                let reduced = (0..width)
                    .map(|u| {
                        let tokens: Vec<f64> = post.iter().map(|p| p[u]).collect();
                        reduce_tokens(&tokens).map(|z| z as f32)
                    })
                    .collect::<Result<Vec<f32>>>()?;
                per_layer.push(reduced);
            }
            for post in &cache.vision_post {
                per_layer.push(post.iter().map(|&v| v as f32).collect());
            }
            Ok(per_layer)
        })
        .collect::<Result<_>>()?;

    let values = (0..topology.layers.len())
        .map(|li| rows.iter().flat_map(|r| r[li].iter().copied()).collect())
        .collect();
    ActivationTrace::new(
        dataset_tag,
        modality,
        samples.iter().map(|s| s.id.clone()).collect(),
        topology,
        values,
    )
}

/// Zeroes the incoming row, bias and outgoing column of every pruned unit.
pub fn apply_mask(model: &ToyModel, mask: &PruneMask) -> Result<ToyModel> {
    let topology = model.trace_topology();
    if let Some(&n) = mask.pruned.iter().find(|&&n| !topology.contains(n)) {
        return Err(ManuError::TopologyMismatch(format!(
            "mask prunes {n}, which the model does not have"
        )));
    }
    let mut out = model.clone();
    let vision_last = *model.topology.vision_widths.last().unwrap();
    for &n in &mask.pruned {
        let (layer, unit) = (n.layer as usize, n.unit as usize);
        let (stack, fusion_offset) = match n.tower {
            Tower::Vision => (&mut out.vision, 0),
            Tower::Language => (&mut out.language, vision_last),
        };
        let depth = stack.len();
        let d = &mut stack[layer];
        let in_dim = d.in_dim;
        d.weight[unit * in_dim..(unit + 1) * in_dim].fill(0.0);
        d.bias[unit] = 0.0;
        if layer + 1 < depth {
            let next = &mut stack[layer + 1];
            for r in 0..next.out_dim {
                next.weight[r * next.in_dim + unit] = 0.0;
            }
        } else {
            let f = &mut out.fusion;
            for r in 0..f.out_dim {
                f.weight[r * f.in_dim + fusion_offset + unit] = 0.0;
            }
        }
    }
    Ok(out)
}

/// Units whose incoming row, bias and outgoing column are all zero.
pub fn pruned_units(model: &ToyModel) -> Vec<NeuronId> {
    let vision_last = *model.topology.vision_widths.last().unwrap();
    let mut out = Vec::new();
    for (tower, stack, off) in [
        (Tower::Language, &model.language, vision_last),
        (Tower::Vision, &model.vision, 0),
    ] {
        for (l, d) in stack.iter().enumerate() {
            for u in 0..d.out_dim {
                let incoming = d.row(u).iter().all(|&w| w == 0.0) && d.bias[u] == 0.0;
                let outgoing = match stack.get(l + 1) {
                    Some(next) => (0..next.out_dim).all(|r| next.weight[r * next.in_dim + u] == 0.0),
                    None => (0..model.fusion.out_dim)
                        .all(|r| model.fusion.weight[r * model.fusion.in_dim + off + u] == 0.0),
                };
                if incoming && outgoing {
                    out.push(NeuronId::new(tower, l as u32, u as u32));
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::selection::{Provenance, Scope};
    use crate::toymodel::{ModelInput, ModelTopology};

    fn model() -> ToyModel {
        ToyModel::new(
            ModelTopology {
                image_dim: 3,
                vision_widths: vec![5, 4],
                token_vocab: 6,
                embed_dim: 3,
                language_widths: vec![5, 4],
                answer_vocab: 4,
            },
            21,
        )
        .unwrap()
    }

    fn mask(pruned: Vec<NeuronId>) -> PruneMask {
        PruneMask {
            format_version: 1,
            model_id: "t".into(),
            alpha: 5.0,
            scope: Scope::Global,
            pruned,
            provenance: Provenance::default(),
        }
    }

    fn inputs() -> Vec<Sample> {
        (0..6)
            .map(|i| Sample {
                id: format!("s{i}"),
                input: ModelInput {
                    image: vec![i as f64 * 0.3 - 0.5, 1.0 - i as f64 * 0.2, 0.4],
                    tokens: vec![i % 6, (i + 2) % 6],
                },
                answer: i % 4,
                options: 0..4,
            })
            .collect()
    }

    #[test]
    fn empty_mask_is_bit_identical() {
        let m = model();
        let p = apply_mask(&m, &mask(vec![])).unwrap();
        for s in inputs() {
            let (a, b) = (m.forward(&s.input), p.forward(&s.input));
            assert!(a.iter().zip(&b).all(|(x, y)| x.to_bits() == y.to_bits()));
        }
    }

    #[test]
    fn pruned_columns_are_zero_and_idempotent() {
        let m = model();
        let pruned = vec![
            NeuronId::new(Tower::Language, 0, 2),
            NeuronId::new(Tower::Language, 1, 3),
            NeuronId::new(Tower::Vision, 0, 0),
            NeuronId::new(Tower::Vision, 1, 1),
        ];
        let mk = mask(pruned.clone());
        let p = apply_mask(&m, &mk).unwrap();
        assert_eq!(apply_mask(&p, &mk).unwrap(), p);
        assert_eq!(pruned_units(&p), pruned);
        for modality in Modality::ALL {
            let trace = capture_activations(&p, &inputs(), DatasetTag::Other, modality).unwrap();
            for &n in &pruned {
                assert!(trace.column(n).unwrap().iter().all(|&v| v == 0.0));
            }
        }
    }

    #[test]
    fn whole_layer_pruned_still_runs() {
        let m = model();
        let all: Vec<NeuronId> = (0..5).map(|u| NeuronId::new(Tower::Vision, 0, u)).collect();
        let p = apply_mask(&m, &mask(all)).unwrap();
        for s in inputs() {
            let c = p.forward_cached(&s.input);
            assert!(c.vision_pre[0].iter().all(|&v| v == 0.0));
            assert!(c.vision_post[0].iter().all(|&v| v == 0.0));
            assert!(c.logits.iter().all(|v| v.is_finite()));
        }
    }

    #[test]
    fn foreign_neuron_is_topology_mismatch() {
        let err = apply_mask(&model(), &mask(vec![NeuronId::new(Tower::Vision, 2, 0)]));
        assert!(matches!(err, Err(ManuError::TopologyMismatch(_))));
        let err = apply_mask(&model(), &mask(vec![NeuronId::new(Tower::Language, 0, 5)]));
        assert!(matches!(err, Err(ManuError::TopologyMismatch(_))));
    }

    #[test]
    fn capture_is_deterministic_and_token_reduced() {
        let m = model();
        let s = inputs();
        let a = capture_activations(&m, &s, DatasetTag::Forget, Modality::TextOnly).unwrap();
        let b = capture_activations(&m, &s, DatasetTag::Forget, Modality::TextOnly).unwrap();
        assert_eq!(a, b);
        let cache = m.forward_cached(&s[1].input);
        let expected = (cache.language_post[0][0][2] + cache.language_post[0][1][2]) / 2.0;
        let got = a.column(NeuronId::new(Tower::Language, 0, 2)).unwrap()[1];
        assert_eq!(got, f64::from(expected as f32));
        assert!(capture_activations(&m, &[], DatasetTag::Forget, Modality::TextOnly).is_err());
    }
}
