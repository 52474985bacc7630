use std::path::{Path, PathBuf};

use manu_core::fsutil::{create_dir, read_json, write_atomic, write_json};
use manu_core::importance::ImportanceMap;
use manu_core::metrics::{evaluate_all, EvalReport};
use manu_core::pipeline::{
    self, capture_bundle, importance_pair, load_bundle, manu_mask, model_id, prepare, save_bundle, PipelineConfig,
};
use manu_core::selection::{check_alpha, Provenance};
use manu_core::toymodel::{
    apply_mask, generate_profiles, load_checkpoint, save_checkpoint, unlearn_ga, unlearn_grad_diff, Split,
    SyntheticDataset, ToyModel,
};
use manu_core::{score_neurons, ManuError, Modality, PruneMask, Result};

use crate::{Cli, Command};

/// Config from `--config` (or defaults) with the global flags applied.
pub fn resolve_config(cli: &Cli) -> Result<PipelineConfig> {
    let mut config = match &cli.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(out) = &cli.out {
        config.output_dir = out.clone();
    }
    if cli.threads.is_some() {
        config.threads = cli.threads;
    }
    config.validate()?;
    Ok(config)
}

pub fn run(cli: &Cli) -> Result<()> {
    let config = resolve_config(cli)?;
    if let Some(n) = config.threads {
        // a second initialisation only fails if a pool already exists
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let out = config.output_dir.clone();
    match &cli.command {
        Command::Generate => generate(&config, &out),
        Command::Train => train(&config, &out),
        Command::Capture { model } => capture(&config, &out, model.as_deref()),
        Command::Importance { traces } => importance(&config, &out, traces.as_deref()),
        Command::Mask {
            alpha,
            scope,
            importance,
        } => mask(&config, &out, *alpha, scope.map(Into::into), importance.as_deref()),
        Command::Prune { mask, model, output } => prune(&config, &out, mask, model.as_deref(), output.as_deref()),
        Command::UnlearnGa {
            steps,
            lr,
            model,
            output,
        } => unlearn(&config, &out, false, *steps, *lr, model.as_deref(), output.as_deref()),
        Command::UnlearnGd {
            steps,
            lr,
            model,
            output,
        } => unlearn(&config, &out, true, *steps, *lr, model.as_deref(), output.as_deref()),
        Command::Eval { model, label } => eval(&config, &out, model.as_deref(), label.as_deref()),
        Command::Sweep => sweep(&config),
        Command::Ablate => ablate(&config),
        Command::Report { run } => report(run),
    }
}

fn dataset(config: &PipelineConfig) -> Result<SyntheticDataset> {
    generate_profiles(&config.dataset_spec())
}

fn load_model(config: &PipelineConfig, path: &Path) -> Result<ToyModel> {
    let model = load_checkpoint(path)?;
    if model.topology != config.model_topology() {
        return Err(ManuError::TopologyMismatch(format!(
            "{} does not match the configured model and dataset",
            path.display()
        )));
    }
    Ok(model)
}

fn model_path(out: &Path, model: Option<&Path>) -> PathBuf {
    model.map_or_else(|| out.join("vanilla.ckpt"), Path::to_path_buf)
}

fn generate(config: &PipelineConfig, out: &Path) -> Result<()> {
    let ds = dataset(config)?;
    create_dir(out)?;
    let path = out.join("dataset.json");
    write_json(&path, &ds.spec)?;
    println!(
        "{}: {} profiles, {} forget / {} retain",
        path.display(),
        ds.profiles.len(),
        ds.forget.len(),
        ds.retain.len()
    );
    Ok(())
}

fn train(config: &PipelineConfig, out: &Path) -> Result<()> {
    let prepared = prepare(config)?;
    create_dir(out)?;
    save_checkpoint(&prepared.vanilla, &out.join("vanilla.ckpt"))?;
    write_json(&out.join("training.json"), &prepared.training)?;
    println!("final loss {:.5}", prepared.training.final_loss);
    for (split, modality, acc) in &prepared.training.accuracies {
        println!("{:<7} {:<10} {acc:.4}", split.as_str(), modality.as_str());
    }
    Ok(())
}

fn capture(config: &PipelineConfig, out: &Path, model: Option<&Path>) -> Result<()> {
    let model = load_model(config, &model_path(out, model))?;
    let bundle = capture_bundle(&model, &dataset(config)?)?;
    let dir = out.join("traces");
    save_bundle(&bundle, &dir)?;
    println!("wrote 4 traces to {}", dir.display());
    Ok(())
}

fn importance(config: &PipelineConfig, out: &Path, traces: Option<&Path>) -> Result<()> {
    let dir = traces.map_or_else(|| out.join("traces"), Path::to_path_buf);
    let (bundle, _) = load_bundle(&dir)?;
    let (forget, retain) = importance_pair(&bundle, &config.importance)?;
    let dest = out.join("importance");
    create_dir(&dest)?;
    write_json(&dest.join("forget.json"), &forget)?;
    write_json(&dest.join("retain.json"), &retain)?;
    println!("importance maps for {} neurons in {}", forget.neurons.len(), dest.display());
    Ok(())
}

fn mask(
    config: &PipelineConfig,
    out: &Path,
    alpha: f64,
    scope: Option<manu_core::Scope>,
    importance: Option<&Path>,
) -> Result<()> {
    check_alpha(alpha)?;
    let dir = importance.map_or_else(|| out.join("importance"), Path::to_path_buf);
    let forget: ImportanceMap = read_json(&dir.join("forget.json"))?;
    let retain: ImportanceMap = read_json(&dir.join("retain.json"))?;
    let scores = score_neurons(&forget, &retain, config.importance.epsilon)?;
    write_json(&out.join("scores.json"), &scores)?;

    // fingerprints are recorded when the traces are still next to the maps
    let fingerprints = load_bundle(&out.join("traces")).map(|(_, f)| f).unwrap_or_default();
    let provenance = Provenance {
        epsilon: forget.config.epsilon,
        tau: forget.config.tau,
        weights: forget.config.weights,
        trace_fingerprints: fingerprints,
    };
    let topology = config.model_topology().trace_topology();
    let mask = manu_mask(
        &scores,
        &topology,
        &model_id(config),
        alpha,
        scope.unwrap_or(config.scope),
        provenance,
    )?;
    let dest = out.join("masks");
    create_dir(&dest)?;
    let path = dest.join(format!("manu_a{alpha}.json"));
    write_atomic(&path, mask.to_json()?.as_bytes())?;
    println!("{}: {} of {} neurons", path.display(), mask.pruned.len(), topology.neuron_count());
    Ok(())
}

fn prune(config: &PipelineConfig, out: &Path, mask_path: &Path, model: Option<&Path>, output: Option<&Path>) -> Result<()> {
    let text = std::fs::read_to_string(mask_path).map_err(|e| ManuError::io(mask_path, e))?;
    let mask = PruneMask::from_json(&text)?;
    let pruned = apply_mask(&load_model(config, &model_path(out, model))?, &mask)?;
    let dest = match output {
        Some(p) => p.to_path_buf(),
        None => {
            let stem = mask_path.file_stem().map_or("pruned".into(), |s| s.to_string_lossy().into_owned());
            create_dir(&out.join("models"))?;
            out.join("models").join(format!("{stem}.ckpt"))
        }
    };
    save_checkpoint(&pruned, &dest)?;
    println!("{}: {} units pruned", dest.display(), mask.pruned.len());
    Ok(())
}

fn unlearn(
    config: &PipelineConfig,
    out: &Path,
    grad_diff: bool,
    steps: usize,
    lr: Option<f64>,
    model: Option<&Path>,
    output: Option<&Path>,
) -> Result<()> {
    let lr = lr.unwrap_or(config.baselines.lr);
    if !(lr > 0.0 && lr.is_finite()) {
        return Err(ManuError::InvalidConfig(format!("lr must be positive, got {lr}")));
    }
    let vanilla = load_model(config, &model_path(out, model))?;
    let ds = dataset(config)?;
    let forget = ds.samples(Split::Forget, Modality::Multimodal);
    let (model, name) = if grad_diff {
        let retain = ds.samples(Split::Retain, Modality::Multimodal);
        (unlearn_grad_diff(&vanilla, &forget, &retain, steps, lr)?, "grad_diff")
    } else {
        (unlearn_ga(&vanilla, &forget, steps, lr)?, "ga")
    };
    let dest = match output {
        Some(p) => p.to_path_buf(),
        None => {
            create_dir(&out.join("models"))?;
            out.join("models").join(format!("{name}_s{steps}.ckpt"))
        }
    };
    save_checkpoint(&model, &dest)?;
    println!("{}: {steps} steps at lr {lr}", dest.display());
    Ok(())
}

fn eval(config: &PipelineConfig, out: &Path, model: Option<&Path>, label: Option<&str>) -> Result<()> {
    let path = model_path(out, model);
    let m = load_model(config, &path)?;
    let label = label.map_or_else(
        || path.file_stem().map_or("model".into(), |s| s.to_string_lossy().into_owned()),
        str::to_string,
    );
    let reports = evaluate_all(&m, &dataset(config)?)?;
    let mut csv = format!("{}\n", EvalReport::CSV_HEADER);
    for r in &reports {
        csv.push_str(&r.csv_row(&label));
        csv.push('\n');
    }
    create_dir(&out.join("eval"))?;
    write_atomic(&out.join("eval").join(format!("{label}.csv")), csv.as_bytes())?;
    print!("{csv}");
    Ok(())
}

fn sweep(config: &PipelineConfig) -> Result<()> {
    let dir = pipeline::run_pipeline(config)?;
    let summary: pipeline::Summary = read_json(&dir.join("summary.json"))?;
    println!("run directory: {}", dir.display());
    println!("alpha  method      forget drop (mm/text)  retain drop (mm/text)  gap");
    for a in &summary.alphas {
        for m in &a.methods {
            println!(
                "{:<6} {:<11} {:>8.3} / {:<8.3}      {:>8.3} / {:<8.3}      {:.3}",
                a.alpha,
                m.method.as_str(),
                m.forget_drop.multimodal,
                m.forget_drop.text_only,
                m.retain_drop.multimodal,
                m.retain_drop.text_only,
                m.modality_gap
            );
        }
    }
    Ok(())
}

fn ablate(config: &PipelineConfig) -> Result<()> {
    let dir = pipeline::run_ablation(config)?;
    println!("ablation directory: {}", dir.display());
    let csv = std::fs::read_to_string(dir.join("ablation.csv")).map_err(|e| ManuError::io(dir.join("ablation.csv"), e))?;
    print!("{csv}");
    Ok(())
}

fn report(run: &Path) -> Result<()> {
    for path in pipeline::report_heatmap(run)? {
        println!("{}", path.display());
    }
    Ok(())
}
