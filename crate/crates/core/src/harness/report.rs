//! Collation of run directories into one flat CSV bundle.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use super::run::{RunManifest, MANIFEST};
use crate::error::{Error, Result};

/// Reads and verifies the manifest in `dir`.
fn verified(dir: &Path) -> Result<RunManifest> {
    let manifest = RunManifest::load(dir)
        .map_err(|e| Error::Format(format!("{}: unreadable manifest: {e}", dir.display())))?;
    for f in &manifest.files {
        let bytes = fs::read(dir.join(&f.name))?;
        if hex::encode(Sha256::digest(&bytes)) != f.sha256 {
            return Err(Error::Format(format!(
                "{}: checksum mismatch for {}",
                dir.display(),
                f.name
            )));
        }
    }
    Ok(manifest)
}

/// Run directories under `dir`: `dir` itself if it holds a manifest,
/// otherwise every immediate subdirectory with one, sorted by name.
pub fn discover_runs(dir: &Path) -> Result<Vec<PathBuf>> {
    if dir.join(MANIFEST).is_file() {
        return Ok(vec![dir.to_path_buf()]);
    }
    let mut runs: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.join(MANIFEST).is_file())
        .collect();
    runs.sort();
    if runs.is_empty() {
        return Err(Error::Format(format!("no run manifests under {}", dir.display())));
    }
    Ok(runs)
}

/// Writes `summary.csv` (one row per run, keyed by run name) and copies each
/// run's CSVs as `<run>__<file>` into `bundle`.
pub fn report(dir: &Path, bundle: &Path) -> Result<Vec<PathBuf>> {
    let runs = discover_runs(dir)?;
    let manifests = runs.iter().map(|r| verified(r)).collect::<Result<Vec<_>>>()?;
    fs::create_dir_all(bundle)?;
    let keys: BTreeSet<String> = manifests
        .iter()
        .flat_map(|m| m.summary.keys().cloned())
        .collect();
    let mut written = Vec::new();
    let summary = bundle.join("summary.csv");
    let mut w = csv::Writer::from_path(&summary)?;
    let mut header = vec!["run".to_string(), "kind".into(), "seed".into(), "passed".into()];
    header.extend(keys.iter().cloned());
    w.write_record(&header)?;
    for (dir, m) in runs.iter().zip(&manifests) {
        let mut row = vec![
            run_name(dir),
            m.config.kind.label().to_string(),
            m.config.seed.to_string(),
            m.passed().to_string(),
        ];
        row.extend(
            keys.iter()
                .map(|k| m.summary.get(k).map(|v| format!("{v:e}")).unwrap_or_default()),
        );
        w.write_record(&row)?;
    }
    w.flush()?;
    written.push(summary);
    for (dir, m) in runs.iter().zip(&manifests) {
        for f in m.files.iter().filter(|f| f.name.ends_with(".csv")) {
            let target = bundle.join(format!("{}__{}", run_name(dir), f.name));
            fs::copy(dir.join(&f.name), &target)?;
            written.push(target);
        }
    }
    Ok(written)
}

fn run_name(dir: &Path) -> String {
    dir.file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "run".into())
}
