//! Experiment driver for the glued neck: TOML configs in, CSV tables and a JSON manifest out.

pub mod config;
pub mod experiments;
pub mod report;

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::Result;

pub use config::{load_config, parse_config, ConfigError, Experiment, ExperimentConfig, Overrides};
pub use experiments::{run_experiment, ExperimentOutput, Invariant};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVARIANT: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;

pub struct RunReport {
    pub output: ExperimentOutput,
    pub manifest: PathBuf,
}

impl RunReport {
    pub fn failures(&self) -> impl Iterator<Item = &Invariant> {
        self.output.invariants.iter().filter(|i| !i.pass)
    }

    pub fn exit_code(&self) -> i32 {
        if self.output.passed() {
            EXIT_OK
        } else {
            EXIT_INVARIANT
        }
    }
}

/// Runs the configured experiment and writes its artifacts.
pub fn run(cfg: &ExperimentConfig) -> Result<RunReport> {
    let start = Instant::now();
    let output = run_experiment(cfg)?;
    let manifest = report::write_all(cfg, &output, start.elapsed().as_secs_f64())?;
    Ok(RunReport { output, manifest })
}

/// Loads `path`, runs it and returns the process exit code, reporting on stderr.
pub fn run_file(path: &Path, overrides: &Overrides) -> i32 {
    let cfg = match load_config(path, overrides) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: invalid config {}: {e}", path.display());
            return EXIT_CONFIG;
        }
    };
    match run(&cfg) {
        Ok(report) => {
            for inv in &report.output.invariants {
                let tag = if inv.pass { "ok" } else { "FAILED" };
                eprintln!("{tag:>6} {}: {}", inv.name, inv.detail);
            }
            for inv in report.failures() {
                eprintln!("error: invariant failed: {}", inv.name);
            }
            eprintln!("manifest: {}", report.manifest.display());
            report.exit_code()
        }
        Err(e) => {
            eprintln!("error: {} failed: {e:#}", cfg.experiment);
            EXIT_INVARIANT
        }
    }
}
