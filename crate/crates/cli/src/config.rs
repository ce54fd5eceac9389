//! Experiment configuration: a TOML file with a `[run]` table and one optional table per
//! experiment. Every default is filled in here, and the resolved config is what the
//! manifest echoes.

use std::fmt;
use std::ops::Range;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use slag_glue::{BoundaryCondition, Cutoff};
use toml::Spanned;

pub const MAX_DELTA: f64 = 0.3;
pub const MIN_RESOLUTION: usize = 8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Experiment {
    LagrangianCheck,
    ErrorScaling,
    SpectralSweep,
    EllipticConstants,
    MeanCurvature,
    Solve,
}

impl Experiment {
    pub const ALL: [Experiment; 6] = [
        Experiment::LagrangianCheck,
        Experiment::ErrorScaling,
        Experiment::SpectralSweep,
        Experiment::EllipticConstants,
        Experiment::MeanCurvature,
        Experiment::Solve,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Experiment::LagrangianCheck => "lagrangian_check",
            Experiment::ErrorScaling => "error_scaling",
            Experiment::SpectralSweep => "spectral_sweep",
            Experiment::EllipticConstants => "elliptic_constants",
            Experiment::MeanCurvature => "mean_curvature",
            Experiment::Solve => "solve",
        }
    }

    pub fn parse(name: &str) -> Option<Experiment> {
        Experiment::ALL.into_iter().find(|e| e.name() == name)
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Cutoff profile as written in the config: `"smoothed_clamped_log"`, `"raw_log"` or
/// `{ constant = c }`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CutoffChoice {
    SmoothedClampedLog,
    RawLog,
    Constant(f64),
}

impl CutoffChoice {
    pub fn to_cutoff(self) -> Cutoff {
        match self {
            CutoffChoice::SmoothedClampedLog => Cutoff::SmoothedClampedLog,
            CutoffChoice::RawLog => Cutoff::RawLog,
            CutoffChoice::Constant(c) => Cutoff::Constant(c),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    Neumann,
    Dirichlet,
}

impl Boundary {
    pub fn to_bc(self) -> BoundaryCondition {
        match self {
            Boundary::Neumann => BoundaryCondition::Neumann,
            Boundary::Dirichlet => BoundaryCondition::Dirichlet,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LagrangianParams {
    pub samples: usize,
    pub tolerance: f64,
}

impl Default for LagrangianParams {
    fn default() -> Self {
        LagrangianParams {
            samples: 10_000,
            tolerance: 1e-12,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ErrorScalingParams {
    pub slope_min: f64,
    pub slope_max: f64,
    /// Allowed spread `max / min - 1` of `|error|^2 log^2 sqrt(delta) / delta^2`.
    pub log_constant_spread: f64,
    /// Points drawn where the cutoff is constant.
    pub support_samples: usize,
}

impl Default for ErrorScalingParams {
    fn default() -> Self {
        ErrorScalingParams {
            slope_min: 0.9,
            slope_max: 1.2,
            log_constant_spread: 0.2,
            support_samples: 1000,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SpectralParams {
    pub boundary_conditions: Vec<Boundary>,
    /// Radial cells per decade of `r`; when set it replaces `n_r` so that every delta is
    /// resolved at the same density.
    pub cells_per_decade: Option<usize>,
    pub trials: usize,
    pub lp_exponent: f64,
    /// Required `min lambda_1 / max lambda_1` across the sweep.
    pub min_ratio: f64,
    pub residual_tolerance: f64,
}

impl Default for SpectralParams {
    fn default() -> Self {
        SpectralParams {
            boundary_conditions: vec![Boundary::Neumann],
            cells_per_decade: Some(32),
            trials: 20,
            lp_exponent: 4.0,
            min_ratio: 0.5,
            residual_tolerance: 1e-8,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EllipticParams {
    pub boundary: Boundary,
    pub cells_per_decade: Option<usize>,
    pub trials: usize,
    /// Allowed `max / min` of each constant across the sweep.
    pub max_spread: f64,
}

impl Default for EllipticParams {
    fn default() -> Self {
        EllipticParams {
            boundary: Boundary::Neumann,
            cells_per_decade: Some(32),
            trials: 40,
            max_spread: 3.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CurveChoice {
    Circle,
    Line,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeanCurvatureParams {
    pub curve: CurveChoice,
    pub radius: f64,
    pub bound_z: f64,
}

impl Default for MeanCurvatureParams {
    fn default() -> Self {
        MeanCurvatureParams {
            curve: CurveChoice::Circle,
            radius: 1.0,
            bound_z: 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolveParams {
    pub max_iterations: usize,
    pub tolerance: f64,
    pub max_contraction: f64,
    /// Bound on `|h*|_{2,2} / |W(0)|_{2,2}`.
    pub norm_factor: f64,
    /// Bound on final residual over initial residual.
    pub residual_reduction: f64,
    pub write_potential: bool,
}

impl Default for SolveParams {
    fn default() -> Self {
        SolveParams {
            max_iterations: 200,
            tolerance: 1e-13,
            max_contraction: 0.5,
            norm_factor: 2.0,
            residual_reduction: 1e-6,
            write_potential: false,
        }
    }
}

/// A validated configuration.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub delta_list: Vec<f64>,
    pub resolutions: [usize; 3],
    pub cutoff: CutoffChoice,
    pub area_factor: f64,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub lagrangian_check: LagrangianParams,
    pub error_scaling: ErrorScalingParams,
    pub spectral_sweep: SpectralParams,
    pub elliptic_constants: EllipticParams,
    pub mean_curvature: MeanCurvatureParams,
    pub solve: SolveParams,
}

impl ExperimentConfig {
    /// Built-in defaults for `experiment` over the given deltas.
    pub fn with_defaults(experiment: Experiment, delta_list: Vec<f64>) -> Self {
        ExperimentConfig {
            experiment,
            delta_list,
            resolutions: [64, 16, 16],
            cutoff: CutoffChoice::SmoothedClampedLog,
            area_factor: 1.0,
            seed: 0,
            output_dir: PathBuf::from("out"),
            lagrangian_check: LagrangianParams::default(),
            error_scaling: ErrorScalingParams::default(),
            spectral_sweep: SpectralParams::default(),
            elliptic_constants: EllipticParams::default(),
            mean_curvature: MeanCurvatureParams::default(),
            solve: SolveParams::default(),
        }
    }
}

/// Invalid configuration, with the 1-based line it refers to when known.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(line) => write!(f, "line {line}: {}", self.message),
            None => f.write_str(&self.message),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFile {
    run: Spanned<RawRun>,
    #[serde(default)]
    lagrangian_check: LagrangianParams,
    #[serde(default)]
    error_scaling: ErrorScalingParams,
    #[serde(default)]
    spectral_sweep: SpectralParams,
    #[serde(default)]
    elliptic_constants: EllipticParams,
    #[serde(default)]
    mean_curvature: MeanCurvatureParams,
    #[serde(default)]
    solve: SolveParams,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRun {
    experiment: Spanned<Experiment>,
    delta_list: Spanned<Vec<Spanned<f64>>>,
    resolutions: Option<Spanned<Vec<Spanned<i64>>>>,
    #[serde(default = "default_cutoff")]
    cutoff: CutoffChoice,
    area_factor: Option<Spanned<f64>>,
    #[serde(default)]
    seed: u64,
    output_dir: Option<PathBuf>,
}

fn default_cutoff() -> CutoffChoice {
    CutoffChoice::SmoothedClampedLog
}

/// Command-line values that take precedence over the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub output_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub experiment: Option<Experiment>,
}

fn line_of(src: &str, span: Range<usize>) -> usize {
    src[..span.start.min(src.len())].matches('\n').count() + 1
}

fn at(src: &str, span: Range<usize>, message: impl Into<String>) -> ConfigError {
    ConfigError {
        line: Some(line_of(src, span)),
        message: message.into(),
    }
}

pub fn parse_config(src: &str, overrides: &Overrides) -> Result<ExperimentConfig, ConfigError> {
    let raw: RawFile = toml::from_str(src).map_err(|e| ConfigError {
        line: e.span().map(|s| line_of(src, s)),
        message: e.message().trim().to_string(),
    })?;
    let run_span = raw.run.span();
    let run = raw.run.into_inner();

    let list_span = run.delta_list.span();
    let deltas = run.delta_list.into_inner();
    if deltas.is_empty() {
        return Err(at(src, list_span, "delta_list must not be empty"));
    }
    let mut delta_list = Vec::with_capacity(deltas.len());
    for d in deltas {
        let span = d.span();
        let v = d.into_inner();
        if !(v > 0.0 && v <= MAX_DELTA) {
            return Err(at(src, span, format!("delta_list entry {v} is outside (0, {MAX_DELTA}]")));
        }
        delta_list.push(v);
    }

    let mut resolutions = [64, 16, 16];
    if let Some(res) = run.resolutions {
        let span = res.span();
        let res = res.into_inner();
        if res.len() != 3 {
            return Err(at(src, span, "resolutions must be [n_r, n_theta, n_kappa]"));
        }
        for (slot, n) in resolutions.iter_mut().zip(res) {
            let span = n.span();
            let n = *n.get_ref();
            if n < MIN_RESOLUTION as i64 {
                return Err(at(src, span, format!("resolution {n} is below {MIN_RESOLUTION}")));
            }
            *slot = n as usize;
        }
    }

    let area_factor = match run.area_factor {
        Some(a) => {
            let span = a.span();
            let a = a.into_inner();
            if !(a > 0.0 && a.is_finite()) {
                return Err(at(src, span, format!("area_factor must be positive, got {a}")));
            }
            a
        }
        None => 1.0,
    };

    let table_line = |name: &str| {
        src.lines()
            .position(|l| l.trim() == format!("[{name}]"))
            .map(|i| i + 1)
    };
    let check = |ok: bool, table: &str, message: String| -> Result<(), ConfigError> {
        if ok {
            Ok(())
        } else {
            Err(ConfigError {
                line: table_line(table),
                message,
            })
        }
    };
    let sp = &raw.spectral_sweep;
    check(
        (2.0..=4.0).contains(&sp.lp_exponent),
        "spectral_sweep",
        format!("lp_exponent must lie in [2, 4], got {}", sp.lp_exponent),
    )?;
    check(
        !sp.boundary_conditions.is_empty(),
        "spectral_sweep",
        "boundary_conditions must not be empty".into(),
    )?;
    for (table, cpd) in [
        ("spectral_sweep", sp.cells_per_decade),
        ("elliptic_constants", raw.elliptic_constants.cells_per_decade),
    ] {
        check(
            cpd.is_none_or(|c| c > 0),
            table,
            "cells_per_decade must be positive".into(),
        )?;
    }
    check(
        raw.lagrangian_check.samples > 0,
        "lagrangian_check",
        "samples must be positive".into(),
    )?;
    check(
        raw.solve.max_iterations > 0,
        "solve",
        "max_iterations must be positive".into(),
    )?;
    if let CutoffChoice::Constant(c) = run.cutoff {
        check(c.is_finite(), "run", format!("constant cutoff must be finite, got {c}"))?;
    }

    let experiment = overrides.experiment.unwrap_or(*run.experiment.get_ref());
    let cfg = ExperimentConfig {
        experiment,
        delta_list,
        resolutions,
        cutoff: run.cutoff,
        area_factor,
        seed: overrides.seed.unwrap_or(run.seed),
        output_dir: overrides
            .output_dir
            .clone()
            .or(run.output_dir)
            .unwrap_or_else(|| PathBuf::from("out")),
        lagrangian_check: raw.lagrangian_check,
        error_scaling: raw.error_scaling,
        spectral_sweep: raw.spectral_sweep,
        elliptic_constants: raw.elliptic_constants,
        mean_curvature: raw.mean_curvature,
        solve: raw.solve,
    };
    for &d in &cfg.delta_list {
        slag_glue::GluingConfig::new(d)
            .and_then(|g| g.with_cutoff(cfg.cutoff.to_cutoff()))
            .and_then(|g| g.with_area_factor(cfg.area_factor))
            .map_err(|e| at(src, run_span.clone(), e.to_string()))?;
    }
    Ok(cfg)
}

pub fn load_config(path: &Path, overrides: &Overrides) -> Result<ExperimentConfig, ConfigError> {
    let src = std::fs::read_to_string(path).map_err(|e| ConfigError {
        line: None,
        message: format!("cannot read {}: {e}", path.display()),
    })?;
    parse_config(&src, overrides)
}

#[cfg(test)]
mod tests {
    use super::*;

    const BASE: &str = r#"
[run]
experiment = "error_scaling"
delta_list = [0.1, 0.01]
resolutions = [32, 8, 8]
seed = 5
"#;

    #[test]
    fn parses_with_defaults() {
        let cfg = parse_config(BASE, &Overrides::default()).unwrap();
        assert_eq!(cfg.experiment, Experiment::ErrorScaling);
        assert_eq!(cfg.delta_list, vec![0.1, 0.01]);
        assert_eq!(cfg.resolutions, [32, 8, 8]);
        assert_eq!(cfg.cutoff, CutoffChoice::SmoothedClampedLog);
        assert_eq!(cfg.seed, 5);
        assert_eq!(cfg.solve, SolveParams::default());
    }

    #[test]
    fn overrides_win() {
        let o = Overrides {
            output_dir: Some("elsewhere".into()),
            seed: Some(9),
            experiment: Some(Experiment::Solve),
        };
        let cfg = parse_config(BASE, &o).unwrap();
        assert_eq!(cfg.seed, 9);
        assert_eq!(cfg.experiment, Experiment::Solve);
        assert_eq!(cfg.output_dir, PathBuf::from("elsewhere"));
    }

    #[test]
    fn empty_delta_list_names_its_line() {
        let src = "[run]\nexperiment = \"solve\"\ndelta_list = []\n";
        let e = parse_config(src, &Overrides::default()).unwrap_err();
        assert_eq!(e.line, Some(3));
        assert!(e.to_string().starts_with("line 3: delta_list"));
    }

    #[test]
    fn out_of_range_entries_are_rejected() {
        let src = "[run]\nexperiment = \"solve\"\ndelta_list = [\n  0.1,\n  0.5,\n]\n";
        let e = parse_config(src, &Overrides::default()).unwrap_err();
        assert_eq!(e.line, Some(5));
        let src = "[run]\nexperiment = \"solve\"\ndelta_list = [0.1]\nresolutions = [8, 4, 8]\n";
        assert_eq!(parse_config(src, &Overrides::default()).unwrap_err().line, Some(4));
    }

    #[test]
    fn syntax_and_unknown_keys_report_lines() {
        let src = "[run]\nexperiment = \"solve\"\ndelta_list = [0.1]\nbogus = 1\n";
        let e = parse_config(src, &Overrides::default()).unwrap_err();
        assert_eq!(e.line, Some(4));
        let src = "[run]\nexperiment = \"nope\"\ndelta_list = [0.1]\n";
        assert_eq!(parse_config(src, &Overrides::default()).unwrap_err().line, Some(2));
        let src = "[run]\nexperiment = \"solve\"\ndelta_list = [0.1\n";
        assert!(parse_config(src, &Overrides::default()).unwrap_err().line.is_some());
    }

    #[test]
    fn constant_cutoff_table() {
        let src = format!("{BASE}cutoff = {{ constant = 0.0 }}\n");
        let cfg = parse_config(&src, &Overrides::default()).unwrap();
        assert_eq!(cfg.cutoff, CutoffChoice::Constant(0.0));
    }

    #[test]
    fn section_checks() {
        let src = format!("{BASE}\n[spectral_sweep]\nlp_exponent = 6.0\n");
        let e = parse_config(&src, &Overrides::default()).unwrap_err();
        assert_eq!(e.line, Some(8));
    }

    #[test]
    fn experiment_names_round_trip() {
        for e in Experiment::ALL {
            assert_eq!(Experiment::parse(e.name()), Some(e));
        }
    }
}
