use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::data::{Sample, Split, SyntheticDataset};
use super::{softmax_cross_entropy, ToyModel};
use crate::error::{ManuError, Result};
use crate::trace::Modality;

/// Gradients are accumulated over fixed-size chunks and then summed in chunk
/// order, so results do not depend on the number of worker threads.
const CHUNK: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainHyperparams {
    pub epochs: usize,
    pub lr: f64,
    pub batch: usize,
    /// L1 penalty on hidden activations; encourages sparse, specialised units.
    pub activation_l1: f64,
}

impl Default for TrainHyperparams {
    fn default() -> Self {
        Self {
            epochs: 200,
            lr: 0.15,
            batch: 16,
            activation_l1: 3e-2,
        }
    }
}

impl TrainHyperparams {
    pub fn validate(&self) -> Result<()> {
        if self.batch == 0 {
            return Err(ManuError::InvalidConfig("training batch must be positive".into()));
        }
        if !(self.lr >= 0.0 && self.lr.is_finite()) || !(self.activation_l1 >= 0.0 && self.activation_l1.is_finite()) {
            return Err(ManuError::InvalidConfig(
                "learning rate and activation_l1 must be finite and non-negative".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: usize,
    pub final_loss: f64,
    /// `(split, modality, accuracy)` for forget and retain in both modalities.
    pub accuracies: Vec<(Split, Modality, f64)>,
}

/// Mean cross-entropy over `samples` and its gradient with respect to every
/// parameter. `activation_l1` adds the hidden-activation penalty to both.
pub fn loss_gradient(model: &ToyModel, samples: &[Sample], activation_l1: f64) -> Result<(f64, ToyModel)> {
    let mut grad = model.zeros_like();
    if samples.is_empty() {
        return Ok((0.0, grad));
    }
    for s in samples {
        model.check_input(&s.input)?;
    }
    let partials: Vec<(f64, ToyModel)> = samples
        .par_chunks(CHUNK)
        .map(|chunk| {
            let mut g = model.zeros_like();
            let mut loss = 0.0;
            for s in chunk {
                let cache = model.forward_cached(&s.input);
                let (l, dlogits) = softmax_cross_entropy(&cache.logits, s.answer);
                loss += l;
                if activation_l1 > 0.0 {
                    let hidden: f64 = cache.vision_post.iter().flatten().sum::<f64>()
                        + (0..model.language.len())
                            .map(|l| cache.language_pooled(l).iter().sum::<f64>())
                            .sum::<f64>();
                    loss += activation_l1 * hidden;
                }
                model.backward(&s.input, &cache, &dlogits, activation_l1, &mut g);
            }
            (loss, g)
        })
        .collect();
    let n = samples.len() as f64;
    let mut loss = 0.0;
    for (l, g) in &partials {
        loss += l;
        grad.add_scaled(g, 1.0 / n);
    }
    Ok((loss / n, grad))
}

pub fn mean_loss(model: &ToyModel, samples: &[Sample]) -> Result<f64> {
    if samples.is_empty() {
        return Ok(0.0);
    }
    for s in samples {
        model.check_input(&s.input)?;
    }
    let losses: Vec<f64> = samples
        .par_iter()
        .map(|s| softmax_cross_entropy(&model.forward(&s.input), s.answer).0)
        .collect();
    Ok(losses.iter().sum::<f64>() / samples.len() as f64)
}

fn ensure_finite(stage: &str, loss: f64) -> Result<()> {
    if loss.is_finite() {
        Ok(())
    } else {
        Err(ManuError::numeric(stage, format!("loss became {loss}")))
    }
}

/// Mini-batch SGD on both renderings of every profile.
pub fn train(model: &mut ToyModel, dataset: &SyntheticDataset, hp: &TrainHyperparams) -> Result<TrainReport> {
    hp.validate()?;
    let samples = dataset.training_samples();
    let mut order: Vec<usize> = (0..samples.len()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(model.seed.wrapping_add(1));
    let mut final_loss = f64::NAN;
    for epoch in 0..hp.epochs {
        order.shuffle(&mut rng);
        let mut epoch_loss = 0.0;
        for batch in order.chunks(hp.batch) {
            let picked: Vec<Sample> = batch.iter().map(|&i| samples[i].clone()).collect();
            let (loss, grad) = loss_gradient(model, &picked, hp.activation_l1)?;
            if !loss.is_finite() {
                return Err(ManuError::numeric(
                    "training",
                    format!("loss became {loss} in epoch {epoch}; try a smaller learning rate"),
                ));
            }
            epoch_loss += loss * picked.len() as f64;
            model.add_scaled(&grad, -hp.lr);
        }
        final_loss = epoch_loss / samples.len() as f64;
        log::debug!("epoch {epoch}: loss {final_loss:.5}");
    }

    let mut accuracies = Vec::new();
    for split in [Split::Forget, Split::Retain] {
        for modality in Modality::ALL {
            let acc = crate::metrics::classification_accuracy(model, dataset, split, modality)?.value;
            accuracies.push((split, modality, acc));
        }
    }
    Ok(TrainReport {
        epochs: hp.epochs,
        final_loss,
        accuracies,
    })
}

/// One full-batch gradient-ascent step on the mean forget loss.
pub fn ga_step(model: &mut ToyModel, forget: &[Sample], lr: f64) -> Result<f64> {
    let (loss, grad) = loss_gradient(model, forget, 0.0)?;
    ensure_finite("gradient ascent", loss)?;
    model.add_scaled(&grad, lr);
    Ok(loss)
}

/// One step of descent on `-L(forget) + L(retain)`.
pub fn grad_diff_step(model: &mut ToyModel, forget: &[Sample], retain: &[Sample], lr: f64) -> Result<f64> {
    let (lf, gf) = loss_gradient(model, forget, 0.0)?;
    let (lr_loss, gr) = loss_gradient(model, retain, 0.0)?;
    let objective = -lf + lr_loss;
    ensure_finite("gradient difference", objective)?;
    model.add_scaled(&gf, lr);
    if !retain.is_empty() {
        model.add_scaled(&gr, -lr);
    }
    Ok(objective)
}

pub fn unlearn_ga(model: &ToyModel, forget: &[Sample], steps: usize, lr: f64) -> Result<ToyModel> {
    let mut out = model.clone();
    for _ in 0..steps {
        ga_step(&mut out, forget, lr)?;
    }
    Ok(out)
}

pub fn unlearn_grad_diff(
    model: &ToyModel,
    forget: &[Sample],
    retain: &[Sample],
    steps: usize,
    lr: f64,
) -> Result<ToyModel> {
    let mut out = model.clone();
    for _ in 0..steps {
        grad_diff_step(&mut out, forget, retain, lr)?;
    }
    Ok(out)
}
