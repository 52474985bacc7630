use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use crate::error::{ManuError, Result};
use crate::fsutil::{create_dir, write_atomic};
use crate::metrics::RetentionProfile;

const RETENTION_HEADER: &str = "layer,split,modality,retention";

/// Several retention profiles in one CSV with a single header.
pub fn retention_csv(profiles: &[RetentionProfile]) -> String {
    let mut out = format!("{RETENTION_HEADER}\n");
    for p in profiles {
        out.extend(p.to_csv().lines().skip(1).map(|l| format!("{l}\n")));
    }
    out
}

fn method_key(label: &str) -> (bool, &str, f64) {
    match label.rsplit_once("_a") {
        Some((method, alpha)) if alpha.parse::<f64>().is_ok() => (true, method, alpha.parse().unwrap()),
        _ => (label != "vanilla", label, 0.0),
    }
}

/// Column order: vanilla, then by method name, then by numeric alpha.
fn compare_labels(a: &str, b: &str) -> Ordering {
    let (ka, kb) = (method_key(a), method_key(b));
    (ka.0, ka.1).cmp(&(kb.0, kb.1)).then(ka.2.total_cmp(&kb.2))
}

/// Layer names in first-seen order and, per layer, one value per method.
type Table = (Vec<String>, BTreeMap<String, Vec<String>>);

/// Reads `retention/*.csv` of a run and writes one heatmap table per
/// `(split, modality)` to `heatmap/<split>_<modality>.csv`: one row per layer,
/// one column per method.
pub fn report_heatmap(run_dir: &Path) -> Result<Vec<PathBuf>> {
    let src = run_dir.join("retention");
    let missing = || ManuError::MissingArtifact(format!("no retention profiles under {}", src.display()));
    let entries = std::fs::read_dir(&src).map_err(|_| missing())?;
    let mut files = Vec::new();
    for e in entries {
        let path = e.map_err(|e| ManuError::io(&src, e))?.path();
        if path.extension().is_some_and(|x| x == "csv") {
            let label = path.file_stem().unwrap().to_string_lossy().into_owned();
            files.push((label, path));
        }
    }
    if files.is_empty() {
        return Err(missing());
    }
    files.sort_by(|a, b| compare_labels(&a.0, &b.0));

    // (split, modality) -> layer order and per-layer values per method
    let mut tables: BTreeMap<(String, String), Table> = BTreeMap::new();
    for (_, path) in &files {
        let text = std::fs::read_to_string(path).map_err(|e| ManuError::io(path, e))?;
        let mut lines = text.lines();
        if lines.next() != Some(RETENTION_HEADER) {
            return Err(ManuError::MissingArtifact(format!("{} is not a retention profile", path.display())));
        }
        for line in lines {
            let cols: Vec<&str> = line.split(',').collect();
            let [layer, split, modality, value] = cols[..] else {
                return Err(ManuError::MissingArtifact(format!("malformed row in {}: {line}", path.display())));
            };
            let (layers, values) = tables.entry((split.into(), modality.into())).or_default();
            if !layers.iter().any(|l| l == layer) {
                layers.push(layer.into());
            }
            values.entry(layer.into()).or_default().push(value.into());
        }
    }

    let out_dir = run_dir.join("heatmap");
    create_dir(&out_dir)?;
    let labels: Vec<&str> = files.iter().map(|(l, _)| l.as_str()).collect();
    let mut written = Vec::new();
    for ((split, modality), (layers, values)) in &tables {
        let mut csv = format!("layer,{}\n", labels.join(","));
        for layer in layers {
            let row = &values[layer];
            if row.len() != labels.len() {
                return Err(ManuError::MissingArtifact(format!(
                    "layer {layer} of {split}/{modality} is missing from some retention profiles"
                )));
            }
            csv.push_str(&format!("{layer},{}\n", row.join(",")));
        }
        let path = out_dir.join(format!("{split}_{modality}.csv"));
        write_atomic(&path, csv.as_bytes())?;
        written.push(path);
    }
    Ok(written)
}
