//! Evaluation metrics: multiple-choice accuracy, cloze exact match, ROUGE-L,
//! the modality gap and per-layer retention profiles.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ManuError, Result};
use crate::toymodel::{ModelInput, Predictor, Sample, Split, SyntheticDataset, ToyModel};
use crate::trace::Modality;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Classification,
    Cloze,
    Generation,
}

impl Task {
    pub const ALL: [Task; 3] = [Task::Classification, Task::Cloze, Task::Generation];

    pub fn as_str(self) -> &'static str {
        match self {
            Task::Classification => "classification",
            Task::Cloze => "cloze",
            Task::Generation => "generation",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub split: Split,
    pub modality: Modality,
    pub task: Task,
    pub value: f64,
    pub count: usize,
}

impl EvalReport {
    pub const CSV_HEADER: &'static str = "method,split,modality,task,value,count";

    pub fn csv_row(&self, method: &str) -> String {
        format!(
            "{method},{},{},{},{},{}",
            self.split.as_str(),
            self.modality.as_str(),
            self.task.as_str(),
            self.value,
            self.count
        )
    }
}

fn argmax(xs: &[f64]) -> usize {
    // first maximum wins, so ties resolve to the lowest token
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate() {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// Fraction of samples whose prediction equals the gold answer. With
/// `restrict` the argmax runs over the sample's options only.
fn accuracy<P: Predictor + Sync>(model: &P, samples: &[Sample], restrict: bool) -> f64 {
    let hits: usize = samples
        .par_iter()
        .map(|s| {
            let logits = model.logits(&s.input);
            let pred = if restrict {
                s.options.start + argmax(&logits[s.options.clone()])
            } else {
                argmax(&logits)
            };
            usize::from(pred == s.answer)
        })
        .sum();
    hits as f64 / samples.len() as f64
}

fn non_empty(samples: &[Sample]) -> Result<()> {
    if samples.is_empty() {
        Err(ManuError::EmptyInput("evaluation split"))
    } else {
        Ok(())
    }
}

/// Multiple-choice accuracy: argmax over the question's answer options.
pub fn classification_accuracy<P: Predictor + Sync>(
    model: &P,
    dataset: &SyntheticDataset,
    split: Split,
    modality: Modality,
) -> Result<EvalReport> {
    let samples = dataset.samples(split, modality);
    non_empty(&samples)?;
    Ok(EvalReport {
        split,
        modality,
        task: Task::Classification,
        value: accuracy(model, &samples, true),
        count: samples.len(),
    })
}

/// Exact match of the free (whole-vocabulary) completion given the name, and
/// the image as well in the multimodal rendering.
pub fn cloze_em<P: Predictor + Sync>(
    model: &P,
    dataset: &SyntheticDataset,
    split: Split,
    modality: Modality,
) -> Result<EvalReport> {
    let samples = dataset.cloze_samples(split, modality);
    non_empty(&samples)?;
    Ok(EvalReport {
        split,
        modality,
        task: Task::Cloze,
        value: accuracy(model, &samples, false),
        count: samples.len(),
    })
}

/// Mean ROUGE-L F1 between the text of the generated answer and the gold text.
pub fn generation_rouge<P: Predictor + Sync>(
    model: &P,
    dataset: &SyntheticDataset,
    split: Split,
    modality: Modality,
) -> Result<EvalReport> {
    let samples = dataset.samples(split, modality);
    non_empty(&samples)?;
    let scores: Vec<f64> = samples
        .par_iter()
        .map(|s| {
            let pred = argmax(&model.logits(&s.input));
            let words = |t: usize| -> Vec<&str> {
                dataset.answer_text(t).unwrap_or_default().split_whitespace().collect()
            };
            rouge_l(&words(pred), &words(s.answer)).map(|r| r.f1)
        })
        .collect::<Result<_>>()?;
    Ok(EvalReport {
        split,
        modality,
        task: Task::Generation,
        value: scores.iter().sum::<f64>() / scores.len() as f64,
        count: samples.len(),
    })
}

pub fn evaluate_all<P: Predictor + Sync>(model: &P, dataset: &SyntheticDataset) -> Result<Vec<EvalReport>> {
    let mut out = Vec::new();
    for split in Split::ALL {
        for modality in Modality::ALL {
            out.push(classification_accuracy(model, dataset, split, modality)?);
            out.push(cloze_em(model, dataset, split, modality)?);
            out.push(generation_rouge(model, dataset, split, modality)?);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RougeL {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn lcs_len<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    let mut prev = vec![0usize; b.len() + 1];
    let mut cur = vec![0usize; b.len() + 1];
    for x in a {
        for (j, y) in b.iter().enumerate() {
            cur[j + 1] = if x == y { prev[j] + 1 } else { prev[j + 1].max(cur[j]) };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// LCS-based ROUGE-L with β = 1.
pub fn rouge_l<T: PartialEq>(candidate: &[T], reference: &[T]) -> Result<RougeL> {
    if reference.is_empty() {
        return Err(ManuError::EmptyInput("ROUGE-L reference"));
    }
    let lcs = lcs_len(candidate, reference) as f64;
    let precision = if candidate.is_empty() { 0.0 } else { lcs / candidate.len() as f64 };
    let recall = lcs / reference.len() as f64;
    // 2PR / (P + R) reduces to 2·lcs / (|c| + |r|), which rounds only once
    let f1 = 2.0 * lcs / (candidate.len() + reference.len()) as f64;
    Ok(RougeL { precision, recall, f1 })
}

/// `|Δ_multi − Δ_text|` with `Δ = vanilla − unlearned`.
pub fn modality_gap(
    report_multi: &EvalReport,
    report_text: &EvalReport,
    vanilla_multi: f64,
    vanilla_text: f64,
) -> Result<f64> {
    if report_multi.split != report_text.split || report_multi.task != report_text.task {
        return Err(ManuError::TagMismatch(format!(
            "cannot compare {}/{} with {}/{}",
            report_multi.split.as_str(),
            report_multi.task.as_str(),
            report_text.split.as_str(),
            report_text.task.as_str()
        )));
    }
    let drop_multi = vanilla_multi - report_multi.value;
    let drop_text = vanilla_text - report_text.value;
    Ok((drop_multi - drop_text).abs())
}

/// Mean per-layer cosine similarity between a vanilla and an unlearned model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RetentionProfile {
    pub split: Split,
    pub modality: Modality,
    pub layers: Vec<(String, f64)>,
}

impl RetentionProfile {
    pub fn mean(&self) -> f64 {
        self.layers.iter().map(|(_, v)| v).sum::<f64>() / self.layers.len() as f64
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("layer,split,modality,retention\n");
        for (name, v) in &self.layers {
            out.push_str(&format!("{name},{},{},{v}\n", self.split.as_str(), self.modality.as_str()));
        }
        out
    }
}

/// Cosine similarity; two zero vectors count as identical, one zero vector as orthogonal.
pub fn cosine(a: &[f64], b: &[f64]) -> f64 {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>();
    let nb = b.iter().map(|x| x * x).sum::<f64>();
    match (na == 0.0, nb == 0.0) {
        (true, true) => 1.0,
        (true, false) | (false, true) => 0.0,
        // sqrt(x * x) == |x| exactly, so identical or negated vectors give exactly ±1
        _ => (dot / (na * nb).sqrt()).clamp(-1.0, 1.0),
    }
}

/// Per layer, the mean over prompts of the cosine between paired hidden
/// states. `vanilla[p][l]` is prompt `p`'s state at layer `l`.
pub fn retention_from_states(vanilla: &[Vec<Vec<f64>>], unlearned: &[Vec<Vec<f64>>]) -> Result<Vec<f64>> {
    if vanilla.is_empty() {
        return Err(ManuError::EmptyInput("retention prompt set"));
    }
    if vanilla.len() != unlearned.len() {
        return Err(ManuError::TopologyMismatch("prompt counts differ".into()));
    }
    let layers = vanilla[0].len();
    for (v, u) in vanilla.iter().zip(unlearned) {
        if v.len() != layers || u.len() != layers || v.iter().zip(u).any(|(a, b)| a.len() != b.len()) {
            return Err(ManuError::TopologyMismatch("hidden state shapes differ".into()));
        }
    }
    Ok((0..layers)
        .map(|l| {
            vanilla
                .iter()
                .zip(unlearned)
                .map(|(v, u)| cosine(&v[l], &u[l]))
                .sum::<f64>()
                / vanilla.len() as f64
        })
        .collect())
}

pub fn retention_profile(
    vanilla: &ToyModel,
    unlearned: &ToyModel,
    prompts: &[ModelInput],
    split: Split,
    modality: Modality,
) -> Result<RetentionProfile> {
    if vanilla.topology != unlearned.topology {
        return Err(ManuError::TopologyMismatch("models have different topologies".into()));
    }
    for p in prompts {
        vanilla.check_input(p)?;
    }
    let states = |m: &ToyModel| -> Vec<Vec<Vec<f64>>> { prompts.par_iter().map(|p| m.layer_states(p)).collect() };
    let values = retention_from_states(&states(vanilla), &states(unlearned))?;
    let names = vanilla.trace_topology().layers.iter().map(|l| l.name()).collect::<Vec<_>>();
    Ok(RetentionProfile {
        split,
        modality,
        layers: names.into_iter().zip(values).collect(),
    })
}
