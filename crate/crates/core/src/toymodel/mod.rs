//! A small two-tower multimodal classifier used as a stand-in for a
//! vision-language model.
//!
//! ```text
//! image ─► vision MLP (ReLU) ───────────────┐
//!                                           ├─► concat ─► linear ─► answer logits
//! tokens ─► embed ─► mix ─► language MLP ─► mean over positions
//! ```
//!
//! The language tower is position-wise; each position sees its own embedding
//! plus the mean embedding of the prompt, which is the only token mixing.
//! Text-only prompts feed an all-zero image to the vision tower.

mod capture;
mod checkpoint;
mod data;
mod train;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{ManuError, Result};
use crate::trace::{LayerSpec, Topology, Tower};

pub use capture::{apply_mask, capture_activations, pruned_units};
pub use checkpoint::{decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, CHECKPOINT_MAGIC};
pub use data::{
    default_attributes, generate_profiles, AttributeSpec, DatasetSpec, Profile, Sample, Split, SyntheticDataset,
    IMAGE_TOKEN,
};
pub use train::{
    grad_diff_step, loss_gradient, mean_loss, train, unlearn_ga, unlearn_grad_diff, ga_step, TrainHyperparams,
    TrainReport,
};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelTopology {
    pub image_dim: usize,
    pub vision_widths: Vec<usize>,
    pub token_vocab: usize,
    pub embed_dim: usize,
    pub language_widths: Vec<usize>,
    pub answer_vocab: usize,
}

impl ModelTopology {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(ManuError::InvalidConfig(format!("model topology: {m}")));
        if self.image_dim == 0 || self.embed_dim == 0 || self.token_vocab == 0 || self.answer_vocab == 0 {
            return bad("dimensions must be positive");
        }
        if self.vision_widths.is_empty() || self.language_widths.is_empty() {
            return bad("each tower needs at least one layer");
        }
        if self.vision_widths.iter().chain(&self.language_widths).any(|&w| w == 0) {
            return bad("layer widths must be positive");
        }
        Ok(())
    }

    /// MLP layers of both towers in neuron order (language first).
    pub fn trace_topology(&self) -> Topology {
        let layers = |tower, widths: &[usize]| {
            widths
                .iter()
                .enumerate()
                .map(move |(i, &w)| LayerSpec {
                    tower,
                    layer_index: i as u32,
                    width: w as u32,
                })
                .collect::<Vec<_>>()
        };
        let mut all = layers(Tower::Language, &self.language_widths);
        all.extend(layers(Tower::Vision, &self.vision_widths));
        Topology::new(all)
    }

    fn fusion_in(&self) -> usize {
        self.vision_widths.last().unwrap() + self.language_widths.last().unwrap()
    }
}

/// Fully connected layer, `weight` row-major `out_dim x in_dim`. An empty
/// `bias` means the layer has none.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense {
    pub out_dim: usize,
    pub in_dim: usize,
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
}

impl Dense {
    pub fn zeros(out_dim: usize, in_dim: usize) -> Self {
        Self {
            out_dim,
            in_dim,
            weight: vec![0.0; out_dim * in_dim],
            bias: vec![0.0; out_dim],
        }
    }

    fn zeros_like(&self) -> Self {
        Self {
            out_dim: self.out_dim,
            in_dim: self.in_dim,
            weight: vec![0.0; self.weight.len()],
            bias: vec![0.0; self.bias.len()],
        }
    }

    fn he_init(out_dim: usize, in_dim: usize, rng: &mut ChaCha8Rng) -> Self {
        let scale = (2.0 / in_dim as f64).sqrt();
        let weight = (0..out_dim * in_dim)
            .map(|_| scale * rng.sample::<f64, _>(StandardNormal))
            .collect();
        Self {
            out_dim,
            in_dim,
            weight,
            bias: vec![0.0; out_dim],
        }
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.weight[r * self.in_dim..(r + 1) * self.in_dim]
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.in_dim);
        (0..self.out_dim)
            .map(|r| self.bias.get(r).copied().unwrap_or(0.0) + self.row(r).iter().zip(x).map(|(w, v)| w * v).sum::<f64>())
            .collect()
    }

    /// Accumulates parameter gradients for `dy` at input `x` and returns `dx`.
    fn backward(&self, x: &[f64], dy: &[f64], grad: &mut Dense) -> Vec<f64> {
        let mut dx = vec![0.0; self.in_dim];
        for (r, &g) in dy.iter().enumerate() {
            if g == 0.0 {
                continue;
            }
            if let Some(b) = grad.bias.get_mut(r) {
                *b += g;
            }
            let off = r * self.in_dim;
            for c in 0..self.in_dim {
                grad.weight[off + c] += g * x[c];
                dx[c] += g * self.weight[off + c];
            }
        }
        dx
    }
}

/// One model query: an image vector and a prompt token sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelInput {
    pub image: Vec<f64>,
    pub tokens: Vec<usize>,
}

/// Per-layer intermediate values of one forward pass.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    pub vision_pre: Vec<Vec<f64>>,
    pub vision_post: Vec<Vec<f64>>,
    /// Mixed token embeddings, one per position.
    pub language_input: Vec<Vec<f64>>,
    /// `[layer][position]` pre-activations.
    pub language_pre: Vec<Vec<Vec<f64>>>,
    pub language_post: Vec<Vec<Vec<f64>>>,
    pub fusion_input: Vec<f64>,
    pub logits: Vec<f64>,
}

impl ForwardCache {
    /// Position-averaged hidden state of each language layer.
    pub fn language_pooled(&self, layer: usize) -> Vec<f64> {
        mean_rows(&self.language_post[layer])
    }
}

fn mean_rows(rows: &[Vec<f64>]) -> Vec<f64> {
    let n = rows.len() as f64;
    let mut out = vec![0.0; rows[0].len()];
    for row in rows {
        for (o, v) in out.iter_mut().zip(row) {
            *o += v;
        }
    }
    out.iter_mut().for_each(|o| *o /= n);
    out
}

fn relu(xs: &[f64]) -> Vec<f64> {
    xs.iter().map(|&x| if x > 0.0 { x } else { 0.0 }).collect()
}

/// Anything that maps a query to answer logits.
pub trait Predictor {
    fn logits(&self, input: &ModelInput) -> Vec<f64>;
}

impl<F: Fn(&ModelInput) -> Vec<f64>> Predictor for F {
    fn logits(&self, input: &ModelInput) -> Vec<f64> {
        self(input)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ToyModel {
    pub topology: ModelTopology,
    pub seed: u64,
    pub vision: Vec<Dense>,
    /// `token_vocab x embed_dim`, row-major.
    pub embedding: Vec<f64>,
    pub language: Vec<Dense>,
    /// Bias-free linear read-out over `[vision ; language]`.
    pub fusion: Dense,
}

impl ToyModel {
    /// Randomly initialised model (He-normal weights, zero biases).
    pub fn new(topology: ModelTopology, seed: u64) -> Result<Self> {
        topology.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let vision = stack(topology.image_dim, &topology.vision_widths, &mut rng);
        let embedding = (0..topology.token_vocab * topology.embed_dim)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect();
        let language = stack(topology.embed_dim, &topology.language_widths, &mut rng);
        let mut fusion = Dense::he_init(topology.answer_vocab, topology.fusion_in(), &mut rng);
        fusion.bias.clear();
        Ok(Self {
            topology,
            seed,
            vision,
            embedding,
            language,
            fusion,
        })
    }

    /// Same shape, every parameter zero. Used as a gradient accumulator.
    pub fn zeros_like(&self) -> Self {
        let zero = Dense::zeros_like;
        Self {
            topology: self.topology.clone(),
            seed: self.seed,
            vision: self.vision.iter().map(zero).collect(),
            embedding: vec![0.0; self.embedding.len()],
            language: self.language.iter().map(zero).collect(),
            fusion: zero(&self.fusion),
        }
    }

    /// Parameter blocks in checkpoint order.
    pub fn params(&self) -> Vec<&[f64]> {
        let mut out: Vec<&[f64]> = Vec::new();
        for d in &self.vision {
            out.push(&d.weight);
            out.push(&d.bias);
        }
        out.push(&self.embedding);
        for d in &self.language {
            out.push(&d.weight);
            out.push(&d.bias);
        }
        out.push(&self.fusion.weight);
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut [f64]> {
        let mut out: Vec<&mut [f64]> = Vec::new();
        for d in &mut self.vision {
            out.push(&mut d.weight);
            out.push(&mut d.bias);
        }
        out.push(&mut self.embedding);
        for d in &mut self.language {
            out.push(&mut d.weight);
            out.push(&mut d.bias);
        }
        out.push(&mut self.fusion.weight);
        out
    }

    pub fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.len()).sum()
    }

    pub fn flat_params(&self) -> Vec<f64> {
        self.params().concat()
    }

    pub fn set_flat_params(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.param_count() {
            return Err(ManuError::TopologyMismatch(format!(
                "{} parameters supplied for a model with {}",
                flat.len(),
                self.param_count()
            )));
        }
        let mut off = 0;
        for block in self.params_mut() {
            block.copy_from_slice(&flat[off..off + block.len()]);
            off += block.len();
        }
        Ok(())
    }

    /// `self += scale * other`, parameter-wise.
    pub fn add_scaled(&mut self, other: &ToyModel, scale: f64) {
        for (dst, src) in self.params_mut().into_iter().zip(other.params()) {
            for (d, s) in dst.iter_mut().zip(src) {
                *d += scale * s;
            }
        }
    }

    pub fn trace_topology(&self) -> Topology {
        self.topology.trace_topology()
    }

    fn token_embedding(&self, token: usize) -> &[f64] {
        let d = self.topology.embed_dim;
        &self.embedding[token * d..(token + 1) * d]
    }

    pub fn check_input(&self, input: &ModelInput) -> Result<()> {
        if input.image.len() != self.topology.image_dim {
            return Err(ManuError::TopologyMismatch(format!(
                "image has {} dims, model expects {}",
                input.image.len(),
                self.topology.image_dim
            )));
        }
        if input.tokens.is_empty() {
            return Err(ManuError::EmptyInput("prompt tokens"));
        }
        if let Some(t) = input.tokens.iter().find(|&&t| t >= self.topology.token_vocab) {
            return Err(ManuError::TopologyMismatch(format!(
                "token {t} outside vocabulary of {}",
                self.topology.token_vocab
            )));
        }
        Ok(())
    }

    /// Full forward pass keeping every intermediate. Inputs must pass
    /// [`ToyModel::check_input`].
    pub fn forward_cached(&self, input: &ModelInput) -> ForwardCache {
        let mut vision_pre = Vec::with_capacity(self.vision.len());
        let mut vision_post: Vec<Vec<f64>> = Vec::with_capacity(self.vision.len());
        for layer in &self.vision {
            let x = vision_post.last().map_or(input.image.as_slice(), Vec::as_slice);
            let pre = layer.forward(x);
            vision_post.push(relu(&pre));
            vision_pre.push(pre);
        }

        let embeds: Vec<&[f64]> = input.tokens.iter().map(|&t| self.token_embedding(t)).collect();
        let positions = embeds.len() as f64;
        let mut context = vec![0.0; self.topology.embed_dim];
        for e in &embeds {
            for (c, v) in context.iter_mut().zip(e.iter()) {
                *c += v;
            }
        }
        context.iter_mut().for_each(|c| *c /= positions);
        let language_input: Vec<Vec<f64>> = embeds
            .iter()
            .map(|e| e.iter().zip(&context).map(|(a, b)| a + b).collect())
            .collect();

        let mut language_pre = Vec::with_capacity(self.language.len());
        let mut language_post: Vec<Vec<Vec<f64>>> = Vec::with_capacity(self.language.len());
        for layer in &self.language {
            let xs = language_post.last().unwrap_or(&language_input);
            let pre: Vec<Vec<f64>> = xs.iter().map(|x| layer.forward(x)).collect();
            language_post.push(pre.iter().map(|p| relu(p)).collect());
            language_pre.push(pre);
        }

        let mut fusion_input = vision_post.last().unwrap().clone();
        fusion_input.extend(mean_rows(language_post.last().unwrap()));
        let logits = self.fusion.forward(&fusion_input);

        ForwardCache {
            vision_pre,
            vision_post,
            language_input,
            language_pre,
            language_post,
            fusion_input,
            logits,
        }
    }

    pub fn forward(&self, input: &ModelInput) -> Vec<f64> {
        self.forward_cached(input).logits
    }

    /// Backpropagates `dlogits` (plus an optional L1 penalty of strength
    /// `activation_l1` on every hidden activation) into `grad`.
    pub fn backward(
        &self,
        input: &ModelInput,
        cache: &ForwardCache,
        dlogits: &[f64],
        activation_l1: f64,
        grad: &mut ToyModel,
    ) {
        let dfusion = self.fusion.backward(&cache.fusion_input, dlogits, &mut grad.fusion);
        let vision_last = *self.topology.vision_widths.last().unwrap();
        let (dv, dt) = dfusion.split_at(vision_last);

        // vision tower
        let mut dh = dv.to_vec();
        for l in (0..self.vision.len()).rev() {
            let da: Vec<f64> = dh
                .iter()
                .zip(&cache.vision_pre[l])
                .map(|(&g, &a)| if a > 0.0 { g + activation_l1 } else { 0.0 })
                .collect();
            let x = if l == 0 { &input.image } else { &cache.vision_post[l - 1] };
            dh = self.vision[l].backward(x, &da, &mut grad.vision[l]);
        }

        // language tower, per position
        let positions = input.tokens.len();
        let p = positions as f64;
        let mut dhs: Vec<Vec<f64>> = vec![dt.iter().map(|g| g / p).collect(); positions];
        for l in (0..self.language.len()).rev() {
            let mut next = Vec::with_capacity(positions);
            for (pos, dh) in dhs.iter().enumerate() {
                let da: Vec<f64> = dh
                    .iter()
                    .zip(&cache.language_pre[l][pos])
                    .map(|(&g, &a)| if a > 0.0 { g + activation_l1 / p } else { 0.0 })
                    .collect();
                let x = if l == 0 {
                    &cache.language_input[pos]
                } else {
                    &cache.language_post[l - 1][pos]
                };
                next.push(self.language[l].backward(x, &da, &mut grad.language[l]));
            }
            dhs = next;
        }

        // u_p = e_p + mean_q e_q
        let d = self.topology.embed_dim;
        let mut shared = vec![0.0; d];
        for du in &dhs {
            for (s, v) in shared.iter_mut().zip(du) {
                *s += v / p;
            }
        }
        for (pos, &tok) in input.tokens.iter().enumerate() {
            let row = &mut grad.embedding[tok * d..(tok + 1) * d];
            for k in 0..d {
                row[k] += dhs[pos][k] + shared[k];
            }
        }
    }

    /// Post-activation hidden state of every traced layer, token-reduced, in
    /// trace-topology order (language layers then vision layers).
    pub fn layer_states(&self, input: &ModelInput) -> Vec<Vec<f64>> {
        let cache = self.forward_cached(input);
        let mut out: Vec<Vec<f64>> = (0..self.language.len()).map(|l| cache.language_pooled(l)).collect();
        out.extend(cache.vision_post);
        out
    }
}

impl Predictor for ToyModel {
    fn logits(&self, input: &ModelInput) -> Vec<f64> {
        self.forward(input)
    }
}

fn stack(input_dim: usize, widths: &[usize], rng: &mut ChaCha8Rng) -> Vec<Dense> {
    let mut prev = input_dim;
    widths
        .iter()
        .map(|&w| {
            let d = Dense::he_init(w, prev, rng);
            prev = w;
            d
        })
        .collect()
}

/// Numerically stable softmax cross-entropy; returns `(loss, dloss/dlogits)`.
pub fn softmax_cross_entropy(logits: &[f64], gold: usize) -> (f64, Vec<f64>) {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|z| (z - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    let loss = total.ln() + max - logits[gold];
    let mut grad: Vec<f64> = exps.iter().map(|e| e / total).collect();
    grad[gold] -= 1.0;
    (loss, grad)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn tiny_topology() -> ModelTopology {
        ModelTopology {
            image_dim: 3,
            vision_widths: vec![4, 3],
            token_vocab: 5,
            embed_dim: 2,
            language_widths: vec![4, 2],
            answer_vocab: 3,
        }
    }

    fn input() -> ModelInput {
        ModelInput {
            image: vec![0.3, -1.2, 0.8],
            tokens: vec![1, 4, 2],
        }
    }

    fn loss_of(model: &ToyModel, x: &ModelInput, gold: usize, l1: f64) -> f64 {
        let c = model.forward_cached(x);
        let hidden: f64 = c.vision_post.iter().flatten().sum::<f64>()
            + (0..model.language.len())
                .map(|l| c.language_pooled(l).iter().sum::<f64>())
                .sum::<f64>();
        softmax_cross_entropy(&c.logits, gold).0 + l1 * hidden
    }

    #[test]
    fn backward_matches_central_differences() {
        let model = ToyModel::new(tiny_topology(), 11).unwrap();
        let x = input();
        for l1 in [0.0, 0.05] {
            let cache = model.forward_cached(&x);
            let (_, dlogits) = softmax_cross_entropy(&cache.logits, 2);
            let mut grad = model.zeros_like();
            model.backward(&x, &cache, &dlogits, l1, &mut grad);
            let analytic = grad.flat_params();
            let base = model.flat_params();
            let h = 1e-6;
            for i in 0..base.len() {
                let mut plus = model.clone();
                let mut p = base.clone();
                p[i] += h;
                plus.set_flat_params(&p).unwrap();
                let mut minus = model.clone();
                p[i] -= 2.0 * h;
                minus.set_flat_params(&p).unwrap();
                let fd = (loss_of(&plus, &x, 2, l1) - loss_of(&minus, &x, 2, l1)) / (2.0 * h);
                let err = (fd - analytic[i]).abs() / (1e-6 + fd.abs().max(analytic[i].abs()));
                assert!(err < 1e-5 || (fd - analytic[i]).abs() < 1e-8, "param {i}: fd {fd} vs {}", analytic[i]);
            }
        }
    }

    #[test]
    fn forward_is_deterministic() {
        let a = ToyModel::new(tiny_topology(), 3).unwrap();
        let b = ToyModel::new(tiny_topology(), 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.forward(&input()), b.forward(&input()));
    }

    #[test]
    fn flat_params_roundtrip() {
        let mut m = ToyModel::new(tiny_topology(), 5).unwrap();
        let flat = m.flat_params();
        assert_eq!(flat.len(), m.param_count());
        let doubled: Vec<f64> = flat.iter().map(|x| 2.0 * x).collect();
        m.set_flat_params(&doubled).unwrap();
        assert_eq!(m.flat_params(), doubled);
        assert!(m.set_flat_params(&doubled[1..]).is_err());
    }

    #[test]
    fn softmax_ce_known_value() {
        let (loss, grad) = softmax_cross_entropy(&[0.0, 0.0], 0);
        assert!((loss - 2f64.ln()).abs() < 1e-15);
        assert_eq!(grad, vec![-0.5, 0.5]);
    }

    #[test]
    fn bad_inputs_are_rejected() {
        let m = ToyModel::new(tiny_topology(), 1).unwrap();
        let mut x = input();
        x.tokens.push(9);
        assert!(m.check_input(&x).is_err());
        let x = ModelInput { image: vec![0.0], tokens: vec![0] };
        assert!(m.check_input(&x).is_err());
        let x = ModelInput { image: vec![0.0; 3], tokens: vec![] };
        assert!(m.check_input(&x).is_err());
    }
}
