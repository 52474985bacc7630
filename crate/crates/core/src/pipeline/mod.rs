//! End-to-end runs driven by one [`PipelineConfig`]: data generation,
//! vanilla training, trace capture, importance and scoring, pruning,
//! baselines, evaluation and reports.
//!
//! Layout of a run directory:
//!
//! ```text
//! config.json  dataset.json  summary.json
//! models/{vanilla,manu_a5,ga_a5,grad_diff_a5,...}.ckpt
//! traces/{forget,retain}_{multimodal,text_only}.trc
//! importance/{forget,retain}.json  scores.json  masks/manu_a5.json
//! eval/<label>.csv  retention/<label>.csv
//! ```
//!
//! A failed run leaves a `FAILED` file naming the stage that failed.

mod config;
mod report;

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{ManuError, Result};
use crate::fsutil::{create_dir, write_atomic, write_json};
use crate::importance::{compute_importance_map, ImportanceComponent, ImportanceConfig, ImportanceMap, ImportanceWeights};
use crate::metrics::{classification_accuracy, evaluate_all, retention_profile, EvalReport, RetentionProfile, Task};
use crate::selection::{emit_mask, score_neurons, select_top, MaskMetadata, Provenance, PruneMask, Scope, ScoreMap};
use crate::toymodel::{
    apply_mask, capture_activations, ga_step, generate_profiles, grad_diff_step, save_checkpoint, train, Split,
    SyntheticDataset, ToyModel, TrainReport,
};
use crate::trace::{decode_trace, encode_trace, validate_bundle, ActivationTrace, DatasetTag, Modality, Topology, TraceBundle};

pub use config::{BaselineParams, DatasetParams, ModelParams, PipelineConfig};
pub use report::{report_heatmap, retention_csv};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Vanilla,
    Manu,
    Ga,
    GradDiff,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Vanilla => "vanilla",
            Method::Manu => "manu",
            Method::Ga => "ga",
            Method::GradDiff => "grad_diff",
        }
    }

    /// File-name label, e.g. `manu_a5`.
    pub fn label(self, alpha: f64) -> String {
        match self {
            Method::Vanilla => "vanilla".into(),
            m => format!("{}_a{alpha}", m.as_str()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModalityPair {
    pub multimodal: f64,
    pub text_only: f64,
}

impl ModalityPair {
    pub fn mean(&self) -> f64 {
        (self.multimodal + self.text_only) / 2.0
    }

    fn minus(&self, other: &ModalityPair) -> ModalityPair {
        ModalityPair {
            multimodal: self.multimodal - other.multimodal,
            text_only: self.text_only - other.text_only,
        }
    }
}

/// Classification accuracy of one split in both modalities.
pub fn split_accuracy(model: &ToyModel, dataset: &SyntheticDataset, split: Split) -> Result<ModalityPair> {
    Ok(ModalityPair {
        multimodal: classification_accuracy(model, dataset, split, Modality::Multimodal)?.value,
        text_only: classification_accuracy(model, dataset, split, Modality::TextOnly)?.value,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodResult {
    pub method: Method,
    pub label: String,
    /// Number of pruned neurons (MANU only).
    pub pruned: Option<usize>,
    /// Unlearning steps taken (baselines only).
    pub steps: Option<usize>,
    /// Whether a baseline reached MANU's forget drop within its step budget.
    pub matched: Option<bool>,
    /// Classification accuracy drop relative to the vanilla model.
    pub forget_drop: ModalityPair,
    pub retain_drop: ModalityPair,
    pub test_drop: ModalityPair,
    /// `|drop_multimodal - drop_text_only|` on the forget split.
    pub modality_gap: f64,
    /// Mean retention per `split/modality`.
    pub retention: BTreeMap<String, f64>,
    pub metrics: Vec<EvalReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaResult {
    pub alpha: f64,
    pub methods: Vec<MethodResult>,
}

/// Machine-readable outcome of a run. Contains nothing time- or
/// path-dependent beyond the config itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub format_version: u32,
    pub config: PipelineConfig,
    pub training: TrainReport,
    pub trace_fingerprints: Vec<String>,
    pub alphas: Vec<AlphaResult>,
}

impl Summary {
    pub fn result(&self, alpha: f64, method: Method) -> Option<&MethodResult> {
        self.alphas
            .iter()
            .find(|a| a.alpha == alpha)
            .and_then(|a| a.methods.iter().find(|m| m.method == method))
    }
}

/// Identifier written into masks; the toy model is fixed by its seed.
pub fn model_id(config: &PipelineConfig) -> String {
    format!("toy-seed-{}", config.seed)
}

/// Dataset and trained vanilla model for a config.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub dataset: SyntheticDataset,
    pub vanilla: ToyModel,
    pub training: TrainReport,
}

pub fn prepare(config: &PipelineConfig) -> Result<Prepared> {
    let dataset = generate_profiles(&config.dataset_spec())?;
    let mut vanilla = ToyModel::new(config.model_topology(), config.seed)?;
    let training = train(&mut vanilla, &dataset, &config.training)?;
    Ok(Prepared {
        dataset,
        vanilla,
        training,
    })
}

pub fn capture_bundle(model: &ToyModel, dataset: &SyntheticDataset) -> Result<TraceBundle> {
    let cap = |split, tag, modality| capture_activations(model, &dataset.samples(split, modality), tag, modality);
    Ok(TraceBundle {
        forget_multimodal: cap(Split::Forget, DatasetTag::Forget, Modality::Multimodal)?,
        forget_text: cap(Split::Forget, DatasetTag::Forget, Modality::TextOnly)?,
        retain_multimodal: cap(Split::Retain, DatasetTag::Retain, Modality::Multimodal)?,
        retain_text: cap(Split::Retain, DatasetTag::Retain, Modality::TextOnly)?,
    })
}

/// SHA-256 of a trace's on-disk encoding, hex encoded.
pub fn trace_fingerprint(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Forget and retain importance maps for one weighting.
pub fn importance_pair(bundle: &TraceBundle, config: &ImportanceConfig) -> Result<(ImportanceMap, ImportanceMap)> {
    Ok((
        compute_importance_map(&bundle.forget_multimodal, &bundle.forget_text, config)?,
        compute_importance_map(&bundle.retain_multimodal, &bundle.retain_text, config)?,
    ))
}

pub fn manu_mask(
    scores: &ScoreMap,
    topology: &Topology,
    model_id: &str,
    alpha: f64,
    scope: Scope,
    provenance: Provenance,
) -> Result<PruneMask> {
    let selected = select_top(scores, alpha, scope, &Default::default())?;
    emit_mask(
        &selected,
        topology,
        MaskMetadata {
            model_id: model_id.to_string(),
            alpha,
            scope,
            provenance,
        },
    )
}

/// Trace file stems used inside a run directory, paired with the bundle slot.
pub fn bundle_files(bundle: &TraceBundle) -> [(&'static str, &ActivationTrace); 4] {
    [
        ("forget_multimodal", &bundle.forget_multimodal),
        ("forget_text_only", &bundle.forget_text),
        ("retain_multimodal", &bundle.retain_multimodal),
        ("retain_text_only", &bundle.retain_text),
    ]
}

/// Writes the four traces as `<dir>/<stem>.trc` and returns their fingerprints.
pub fn save_bundle(bundle: &TraceBundle, dir: &Path) -> Result<Vec<String>> {
    create_dir(dir)?;
    let mut fingerprints = Vec::new();
    for (stem, trace) in bundle_files(bundle) {
        let bytes = encode_trace(trace)?;
        fingerprints.push(trace_fingerprint(&bytes));
        write_atomic(&dir.join(format!("{stem}.trc")), &bytes)?;
    }
    Ok(fingerprints)
}

/// Reads a bundle written by [`save_bundle`] and checks its invariants.
pub fn load_bundle(dir: &Path) -> Result<(TraceBundle, Vec<String>)> {
    let mut traces = Vec::new();
    let mut fingerprints = Vec::new();
    for stem in ["forget_multimodal", "forget_text_only", "retain_multimodal", "retain_text_only"] {
        let path = dir.join(format!("{stem}.trc"));
        let bytes = std::fs::read(&path).map_err(|e| ManuError::io(&path, e))?;
        fingerprints.push(trace_fingerprint(&bytes));
        traces.push(decode_trace(&bytes)?);
    }
    let mut it = traces.into_iter();
    let bundle = TraceBundle {
        forget_multimodal: it.next().unwrap(),
        forget_text: it.next().unwrap(),
        retain_multimodal: it.next().unwrap(),
        retain_text: it.next().unwrap(),
    };
    let findings = validate_bundle(&bundle);
    if !findings.is_empty() {
        let text: Vec<String> = findings.iter().map(|f| f.to_string()).collect();
        return Err(ManuError::TagMismatch(text.join("; ")));
    }
    Ok((bundle, fingerprints))
}

/// Runs GA or Grad-Diff from `vanilla` until the mean forget classification
/// drop reaches `target`. Returns the model, the number of steps and whether
/// the target was reached.
pub fn matched_baseline(
    method: Method,
    vanilla: &ToyModel,
    dataset: &SyntheticDataset,
    target: f64,
    params: &BaselineParams,
) -> Result<(ToyModel, usize, bool)> {
    let forget = dataset.samples(Split::Forget, Modality::Multimodal);
    let retain = dataset.samples(Split::Retain, Modality::Multimodal);
    let base = split_accuracy(vanilla, dataset, Split::Forget)?;
    let mut model = vanilla.clone();
    let mut steps = 0;
    loop {
        let drop = base.minus(&split_accuracy(&model, dataset, Split::Forget)?).mean();
        if drop >= target {
            return Ok((model, steps, true));
        }
        if steps == params.max_steps {
            return Ok((model, steps, false));
        }
        match method {
            Method::Ga => ga_step(&mut model, &forget, params.lr)?,
            Method::GradDiff => grad_diff_step(&mut model, &forget, &retain, params.lr)?,
            m => {
                return Err(ManuError::InvalidConfig(format!("{} is not a gradient baseline", m.as_str())));
            }
        };
        steps += 1;
    }
}

pub fn retention_profiles(
    vanilla: &ToyModel,
    model: &ToyModel,
    dataset: &SyntheticDataset,
) -> Result<Vec<RetentionProfile>> {
    let mut out = Vec::new();
    for split in [Split::Forget, Split::Retain] {
        for modality in Modality::ALL {
            let prompts: Vec<_> = dataset.samples(split, modality).into_iter().map(|s| s.input).collect();
            out.push(retention_profile(vanilla, model, &prompts, split, modality)?);
        }
    }
    Ok(out)
}

fn eval_csv(label: &str, reports: &[EvalReport]) -> String {
    let mut out = format!("{}\n", EvalReport::CSV_HEADER);
    for r in reports {
        out.push_str(&r.csv_row(label));
        out.push('\n');
    }
    out
}

fn classification(reports: &[EvalReport], split: Split) -> ModalityPair {
    let get = |m| {
        reports
            .iter()
            .find(|r| r.split == split && r.modality == m && r.task == Task::Classification)
            .map_or(f64::NAN, |r| r.value)
    };
    ModalityPair {
        multimodal: get(Modality::Multimodal),
        text_only: get(Modality::TextOnly),
    }
}

/// Evaluates one method's model and writes its eval and retention CSVs.
struct Evaluator<'a> {
    dir: &'a Path,
    dataset: &'a SyntheticDataset,
    vanilla: &'a ToyModel,
    vanilla_reports: Vec<EvalReport>,
}

impl Evaluator<'_> {
    fn evaluate(
        &self,
        method: Method,
        label: String,
        model: &ToyModel,
        pruned: Option<usize>,
        steps: Option<(usize, bool)>,
    ) -> Result<MethodResult> {
        let reports = evaluate_all(model, self.dataset)?;
        write_atomic(&self.dir.join("eval").join(format!("{label}.csv")), eval_csv(&label, &reports).as_bytes())?;
        let profiles = retention_profiles(self.vanilla, model, self.dataset)?;
        write_atomic(
            &self.dir.join("retention").join(format!("{label}.csv")),
            retention_csv(&profiles).as_bytes(),
        )?;
        let drop = |split| classification(&self.vanilla_reports, split).minus(&classification(&reports, split));
        let forget_drop = drop(Split::Forget);
        Ok(MethodResult {
            method,
            label,
            pruned,
            steps: steps.map(|s| s.0),
            matched: steps.map(|s| s.1),
            forget_drop,
            retain_drop: drop(Split::Retain),
            test_drop: drop(Split::Test),
            modality_gap: (forget_drop.multimodal - forget_drop.text_only).abs(),
            retention: profiles
                .iter()
                .map(|p| (format!("{}/{}", p.split.as_str(), p.modality.as_str()), p.mean()))
                .collect(),
            metrics: reports,
        })
    }
}

/// Runs `f` on a dedicated pool when `threads` is set.
pub fn with_threads<T: Send>(threads: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    match threads {
        None => Ok(f()),
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| ManuError::InvalidConfig(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
    }
}

/// Creates `<parent>/<prefix>-<timestamp>`, adding a counter on collision.
pub fn create_run_dir(parent: &Path, prefix: &str) -> Result<PathBuf> {
    create_dir(parent)?;
    let stamp = chrono::Local::now().format("%Y%m%dT%H%M%S").to_string();
    for n in 0.. {
        let name = if n == 0 {
            format!("{prefix}-{stamp}")
        } else {
            format!("{prefix}-{stamp}-{n}")
        };
        let path = parent.join(name);
        match std::fs::create_dir(&path) {
            Ok(()) => return Ok(path),
            Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => continue,
            Err(e) => return Err(ManuError::io(&path, e)),
        }
    }
    unreachable!()
}

#[derive(Serialize)]
struct FailureMarker<'a> {
    stage: &'a str,
    exit_code: i32,
    error: String,
}

/// Runs `body` and, if it fails, records the stage it was in.
fn guarded<T>(dir: &Path, body: impl FnOnce(&mut &'static str) -> Result<T>) -> Result<T> {
    let mut stage = "setup";
    let out = body(&mut stage);
    if let Err(e) = &out {
        let marker = FailureMarker {
            stage,
            exit_code: e.exit_class().code(),
            error: e.to_string(),
        };
        if let Err(w) = write_json(&dir.join("FAILED"), &marker) {
            log::error!("could not write failure marker: {w}");
        }
    }
    out
}

/// Full run: everything listed in the module docs. Returns the run
/// directory.
pub fn run_pipeline(config: &PipelineConfig) -> Result<PathBuf> {
    config.validate()?;
    let dir = create_run_dir(&config.output_dir, "run")?;
    with_threads(config.threads, || guarded(&dir, |stage| execute(config, &dir, stage)))??;
    Ok(dir)
}

/// The pipeline body, writing into an existing directory.
pub fn execute(config: &PipelineConfig, dir: &Path, stage: &mut &'static str) -> Result<Summary> {
    *stage = "setup";
    for sub in ["models", "importance", "masks", "eval", "retention"] {
        create_dir(&dir.join(sub))?;
    }
    write_json(&dir.join("config.json"), config)?;

    *stage = "train";
    let Prepared {
        dataset,
        vanilla,
        training,
    } = prepare(config)?;
    write_json(&dir.join("dataset.json"), &dataset.spec)?;
    save_checkpoint(&vanilla, &dir.join("models/vanilla.ckpt"))?;
    log::info!("vanilla training done: loss {:.4}", training.final_loss);

    *stage = "capture";
    let bundle = capture_bundle(&vanilla, &dataset)?;
    let fingerprints = save_bundle(&bundle, &dir.join("traces"))?;

    *stage = "importance";
    let (forget_map, retain_map) = importance_pair(&bundle, &config.importance)?;
    write_json(&dir.join("importance/forget.json"), &forget_map)?;
    write_json(&dir.join("importance/retain.json"), &retain_map)?;

    *stage = "score";
    let scores = score_neurons(&forget_map, &retain_map, config.importance.epsilon)?;
    write_json(&dir.join("scores.json"), &scores)?;
    let provenance = Provenance {
        epsilon: config.importance.epsilon,
        tau: config.importance.tau,
        weights: config.importance.weights,
        trace_fingerprints: fingerprints.clone(),
    };

    let topology = vanilla.trace_topology();
    let model_id = model_id(config);

    *stage = "evaluate";
    let evaluator = Evaluator {
        dir,
        dataset: &dataset,
        vanilla: &vanilla,
        vanilla_reports: evaluate_all(&vanilla, &dataset)?,
    };
    let vanilla_result = evaluator.evaluate(Method::Vanilla, "vanilla".into(), &vanilla, None, None)?;

    let mut alphas = Vec::new();
    for &alpha in &config.alphas {
        *stage = "mask";
        let mask = manu_mask(&scores, &topology, &model_id, alpha, config.scope, provenance.clone())?;
        let label = Method::Manu.label(alpha);
        write_atomic(&dir.join("masks").join(format!("{label}.json")), mask.to_json()?.as_bytes())?;

        *stage = "prune";
        let pruned = apply_mask(&vanilla, &mask)?;
        save_checkpoint(&pruned, &dir.join("models").join(format!("{label}.ckpt")))?;
        *stage = "evaluate";
        let manu = evaluator.evaluate(Method::Manu, label, &pruned, Some(mask.pruned.len()), None)?;
        log::info!(
            "alpha {alpha}: MANU pruned {} neurons, forget drop {:.3}/{:.3}",
            mask.pruned.len(),
            manu.forget_drop.multimodal,
            manu.forget_drop.text_only
        );

        let mut methods = vec![vanilla_result.clone(), manu.clone()];
        for method in [Method::Ga, Method::GradDiff] {
            *stage = "baseline";
            let (model, steps, matched) =
                matched_baseline(method, &vanilla, &dataset, manu.forget_drop.mean(), &config.baselines)?;
            let label = method.label(alpha);
            save_checkpoint(&model, &dir.join("models").join(format!("{label}.ckpt")))?;
            *stage = "evaluate";
            methods.push(evaluator.evaluate(method, label, &model, None, Some((steps, matched)))?);
        }
        alphas.push(AlphaResult { alpha, methods });
    }

    *stage = "summary";
    let summary = Summary {
        format_version: 1,
        config: config.clone(),
        training,
        trace_fingerprints: fingerprints,
        alphas,
    };
    write_json(&dir.join("summary.json"), &summary)?;
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    /// `full` or `without_<component>`.
    pub variant: String,
    pub weights: ImportanceWeights,
    pub pruned: usize,
    pub forget: ModalityPair,
    pub test: ModalityPair,
    pub retain: ModalityPair,
    pub forget_drop: ModalityPair,
    pub retain_drop: ModalityPair,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationTable {
    pub alpha: f64,
    pub vanilla_forget: ModalityPair,
    pub vanilla_retain: ModalityPair,
    pub rows: Vec<AblationRow>,
}

impl AblationTable {
    pub fn row(&self, variant: &str) -> Option<&AblationRow> {
        self.rows.iter().find(|r| r.variant == variant)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from(
            "variant,w_abs,w_freq,w_var,w_rms,pruned,forget_multimodal,forget_text_only,\
             test_multimodal,test_text_only,retain_multimodal,retain_text_only\n",
        );
        for r in &self.rows {
            let w = r.weights;
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{}\n",
                r.variant,
                w.abs,
                w.freq,
                w.var,
                w.rms,
                r.pruned,
                r.forget.multimodal,
                r.forget.text_only,
                r.test.multimodal,
                r.test.text_only,
                r.retain.multimodal,
                r.retain.text_only
            ));
        }
        out
    }
}

/// The full weighting followed by each single-function-zeroed variant.
pub fn ablation_variants(base: &ImportanceConfig) -> Vec<(String, ImportanceConfig)> {
    let mut out = vec![("full".to_string(), *base)];
    for c in ImportanceComponent::ALL {
        let mut weights = base.weights;
        match c {
            ImportanceComponent::Abs => weights.abs = 0.0,
            ImportanceComponent::Freq => weights.freq = 0.0,
            ImportanceComponent::Var => weights.var = 0.0,
            ImportanceComponent::Rms => weights.rms = 0.0,
        }
        out.push((format!("without_{}", c.as_str()), ImportanceConfig { weights, ..*base }));
    }
    out
}

/// Scores, prunes and evaluates every ablation variant against one vanilla
/// model. Writes each variant's importance maps and mask under `dir`.
pub fn ablation_table(
    config: &PipelineConfig,
    prepared: &Prepared,
    bundle: &TraceBundle,
    dir: &Path,
) -> Result<AblationTable> {
    let Prepared { dataset, vanilla, .. } = prepared;
    for sub in ["importance", "masks"] {
        create_dir(&dir.join(sub))?;
    }
    let vanilla_forget = split_accuracy(vanilla, dataset, Split::Forget)?;
    let vanilla_retain = split_accuracy(vanilla, dataset, Split::Retain)?;
    let mut rows = Vec::new();
    for (variant, importance) in ablation_variants(&config.importance) {
        importance.validate()?;
        let (fm, rm) = importance_pair(bundle, &importance)?;
        write_json(&dir.join("importance").join(format!("{variant}_forget.json")), &fm)?;
        write_json(&dir.join("importance").join(format!("{variant}_retain.json")), &rm)?;
        let scores = score_neurons(&fm, &rm, importance.epsilon)?;
        let provenance = Provenance {
            epsilon: importance.epsilon,
            tau: importance.tau,
            weights: importance.weights,
            trace_fingerprints: Vec::new(),
        };
        let mask = manu_mask(
            &scores,
            &vanilla.trace_topology(),
            &model_id(config),
            config.ablation_alpha,
            config.scope,
            provenance,
        )?;
        write_atomic(&dir.join("masks").join(format!("{variant}.json")), mask.to_json()?.as_bytes())?;
        let pruned = apply_mask(vanilla, &mask)?;
        let forget = split_accuracy(&pruned, dataset, Split::Forget)?;
        let retain = split_accuracy(&pruned, dataset, Split::Retain)?;
        rows.push(AblationRow {
            variant,
            weights: importance.weights,
            pruned: mask.pruned.len(),
            forget_drop: vanilla_forget.minus(&forget),
            retain_drop: vanilla_retain.minus(&retain),
            forget,
            test: split_accuracy(&pruned, dataset, Split::Test)?,
            retain,
        });
    }
    Ok(AblationTable {
        alpha: config.ablation_alpha,
        vanilla_forget,
        vanilla_retain,
        rows,
    })
}

/// Importance-function ablation: one vanilla model, five weightings (full
/// plus each function zeroed). Training does not depend on the weights, so
/// the variants share it. Writes `ablation.csv` and `ablation.json`.
pub fn run_ablation(config: &PipelineConfig) -> Result<PathBuf> {
    config.validate()?;
    for (_, variant) in ablation_variants(&config.importance) {
        variant.validate()?;
    }
    let dir = create_run_dir(&config.output_dir, "ablation")?;
    with_threads(config.threads, || {
        guarded(&dir, |stage| {
            write_json(&dir.join("config.json"), config)?;
            *stage = "train";
            let prepared = prepare(config)?;
            *stage = "capture";
            let bundle = capture_bundle(&prepared.vanilla, &prepared.dataset)?;
            *stage = "ablation";
            let table = ablation_table(config, &prepared, &bundle, &dir)?;
            write_atomic(&dir.join("ablation.csv"), table.to_csv().as_bytes())?;
            write_json(&dir.join("ablation.json"), &table)
        })
    })??;
    Ok(dir)
}
