use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde_json::{json, Value};

use crate::config::ExperimentConfig;
use crate::experiments::{CsvTable, ExperimentOutput};

pub const MANIFEST_FILE: &str = "manifest.json";

pub fn write_table(dir: &Path, table: &CsvTable) -> Result<PathBuf> {
    let path = dir.join(&table.file);
    let mut w = csv::Writer::from_path(&path).with_context(|| format!("cannot create {}", path.display()))?;
    w.write_record(&table.header)?;
    for row in &table.rows {
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(path)
}

pub fn manifest(cfg: &ExperimentConfig, out: &ExperimentOutput, files: &[PathBuf], seconds: f64) -> Value {
    json!({
        "config": cfg,
        "versions": {
            "slag-glue-cli": env!("CARGO_PKG_VERSION"),
        },
        "results_summary": {
            "experiment": cfg.experiment,
            "passed": out.passed(),
            "files": files
                .iter()
                .map(|p| p.file_name().map(|f| f.to_string_lossy().into_owned()).unwrap_or_default())
                .collect::<Vec<_>>(),
            "values": out.summary,
        },
        "invariant_suite": out.invariants,
        "timing": { "wall_seconds": seconds },
    })
}

/// Writes every table, then the manifest.
pub fn write_all(cfg: &ExperimentConfig, out: &ExperimentOutput, seconds: f64) -> Result<PathBuf> {
    let dir = &cfg.output_dir;
    fs::create_dir_all(dir).with_context(|| format!("cannot create {}", dir.display()))?;
    let files = out
        .tables
        .iter()
        .map(|t| write_table(dir, t))
        .collect::<Result<Vec<_>>>()?;
    let path = dir.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(&manifest(cfg, out, &files, seconds))?;
    fs::write(&path, text + "\n").with_context(|| format!("cannot write {}", path.display()))?;
    Ok(path)
}
