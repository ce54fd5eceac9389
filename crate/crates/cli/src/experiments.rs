//! Experiment drivers. Each returns its CSV tables, a JSON summary and the outcome of its
//! invariant suite; nothing here touches the filesystem.

use std::f64::consts::TAU;
use std::sync::Arc;

use anyhow::{Context, Result};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use slag_glue::exterior::holomorphic_three_form;
use slag_glue::gluing::{
    im_xi_on_frame, mean_curvature_l2_squared, CurveModel, PlanarCircle, StraightLine,
};
use slag_glue::slag::slag_residual;
use slag_glue::spectral::{
    first_eigenvalue, verify_elliptic_estimates, verify_lp_bound, verify_poincare,
};
use slag_glue::{
    assemble, build_grid, calibration_identity_check, cutoff_beta, error_density, error_norm,
    omega_restriction, standard_symplectic_form, tangent_frame, GluingConfig, GraphPotential,
    NeckGrid, NeckPoint, NormOptions, OperatorKind, SlagProblem,
};

use crate::config::{Boundary, CurveChoice, Experiment, ExperimentConfig, MIN_RESOLUTION};

/// One named check of an invariant suite.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Invariant {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Invariant {
    fn new(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Self {
        Invariant {
            name: name.into(),
            pass,
            detail: detail.into(),
        }
    }
}

/// A CSV file to be written under the output directory.
#[derive(Clone, Debug, PartialEq)]
pub struct CsvTable {
    pub file: String,
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

#[derive(Clone, Debug)]
pub struct ExperimentOutput {
    pub tables: Vec<CsvTable>,
    pub summary: Value,
    pub invariants: Vec<Invariant>,
}

impl ExperimentOutput {
    pub fn passed(&self) -> bool {
        self.invariants.iter().all(|i| i.pass)
    }
}

/// Full-precision scientific notation (17 significant digits).
pub fn sci(x: f64) -> String {
    format!("{x:.16e}")
}

/// Seed for the `index`-th delta of a sweep.
pub fn derive_seed(seed: u64, index: usize) -> u64 {
    seed ^ (index as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Radial cells for `delta` at a fixed density per decade of `r`, so that every delta of a
/// sweep is resolved alike.
pub fn radial_cells(delta: f64, cells_per_decade: Option<usize>, fallback: usize) -> usize {
    match cells_per_decade {
        Some(c) => ((c as f64 * 0.5 * (1.0 / delta).log10()).round() as usize).max(MIN_RESOLUTION),
        None => fallback,
    }
}

pub fn gluing_config(cfg: &ExperimentConfig, delta: f64) -> Result<GluingConfig> {
    Ok(GluingConfig::new(delta)?
        .with_cutoff(cfg.cutoff.to_cutoff())?
        .with_area_factor(cfg.area_factor)?)
}

fn grid(cfg: &ExperimentConfig, delta: f64, n_r: usize) -> Result<(GluingConfig, Arc<NeckGrid>)> {
    let g = gluing_config(cfg, delta)?;
    let [_, nt, nk] = cfg.resolutions;
    let grid = build_grid(&g, n_r, nt, nk).with_context(|| format!("grid for delta = {delta}"))?;
    Ok((g, Arc::new(grid)))
}

/// Uniform in `log r` over `[delta, sqrt(delta)]`, uniform in both angles.
pub fn random_neck_point<R: Rng>(rng: &mut R, g: &GluingConfig) -> NeckPoint {
    let s = rng.gen_range(g.inner_radius().ln()..g.outer_radius().ln());
    NeckPoint::from_polar(s.exp(), rng.gen_range(0.0..TAU), rng.gen_range(0.0..TAU))
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    sxy / sxx
}

fn min_max(v: impl IntoIterator<Item = f64>) -> (f64, f64) {
    v.into_iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)))
}

pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    match cfg.experiment {
        Experiment::LagrangianCheck => lagrangian_check(cfg),
        Experiment::ErrorScaling => error_scaling(cfg),
        Experiment::SpectralSweep => spectral_sweep(cfg),
        Experiment::EllipticConstants => elliptic_constants(cfg),
        Experiment::MeanCurvature => mean_curvature(cfg),
        Experiment::Solve => solve(cfg),
    }
}

struct LagrangianRow {
    delta: f64,
    max_omega: f64,
    max_mismatch: f64,
}

fn lagrangian_check(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let p = cfg.lagrangian_check;
    let rows: Vec<LagrangianRow> = cfg
        .delta_list
        .par_iter()
        .enumerate()
        .map(|(i, &delta)| -> Result<LagrangianRow> {
            let g = gluing_config(cfg, delta)?;
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, i));
            let (mut max_omega, mut max_mismatch) = (0.0f64, 0.0f64);
            for _ in 0..p.samples {
                let pt = random_neck_point(&mut rng, &g);
                let frame = tangent_frame(&pt, &g)?;
                for w in omega_restriction(&frame) {
                    max_omega = max_omega.max(w.abs());
                }
                let mismatch = (error_density(&pt, &g)? - im_xi_on_frame(&frame)).abs();
                max_mismatch = max_mismatch.max(mismatch);
            }
            Ok(LagrangianRow {
                delta,
                max_omega,
                max_mismatch,
            })
        })
        .collect::<Result<_>>()?;

    let (re, im) = holomorphic_three_form();
    let calibration = calibration_identity_check(&standard_symplectic_form(), &re, &im);
    let worst_omega = rows.iter().map(|r| r.max_omega).fold(0.0, f64::max);
    let worst_mismatch = rows.iter().map(|r| r.max_mismatch).fold(0.0, f64::max);
    let tol = p.tolerance;
    let invariants = vec![
        Invariant::new(
            "lagrangian_identity",
            worst_omega <= tol,
            format!("max |omega(E_i, E_j)| = {worst_omega:.3e} over {} points per delta (tolerance {tol:.0e})", p.samples),
        ),
        Invariant::new(
            "calibration_identity",
            calibration <= tol,
            format!("residual {calibration:.3e} (tolerance {tol:.0e})"),
        ),
        Invariant::new(
            "error_density_matches_frame",
            worst_mismatch <= tol,
            format!("max |error_density - Im xi(frame)| = {worst_mismatch:.3e} (tolerance {tol:.0e})"),
        ),
    ];
    let table = CsvTable {
        file: "lagrangian_check.csv".into(),
        header: vec!["delta", "samples", "max_omega", "max_density_mismatch"],
        rows: rows
            .iter()
            .map(|r| vec![sci(r.delta), p.samples.to_string(), sci(r.max_omega), sci(r.max_mismatch)])
            .collect(),
    };
    Ok(ExperimentOutput {
        tables: vec![table],
        summary: json!({
            "max_omega": worst_omega,
            "max_density_mismatch": worst_mismatch,
            "calibration_residual": calibration,
        }),
        invariants,
    })
}

struct ScalingRow {
    delta: f64,
    l2: f64,
    l2_grad: f64,
    l2_hess: f64,
    log_constant: f64,
    residual_l2: f64,
    residual_l2_fine: f64,
    support_points: usize,
    support_max: f64,
}

fn error_scaling(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let p = cfg.error_scaling;
    let n_r = cfg.resolutions[0];
    let rows: Vec<ScalingRow> = cfg
        .delta_list
        .par_iter()
        .enumerate()
        .map(|(i, &delta)| -> Result<ScalingRow> {
            let (g, coarse) = grid(cfg, delta, n_r)?;
            let e = error_norm(&g, &coarse)?;
            let (_, fine) = grid(cfg, delta, 2 * n_r)?;
            let residual = |grid: &Arc<NeckGrid>| -> Result<f64> {
                Ok(slag_residual(&GraphPotential::zero(grid.clone()), &g, grid)?.l2_norm)
            };
            // points where the cutoff is exactly 0 or 1
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, i));
            let (lo, hi) = ((0.5 * delta).ln(), 0.0);
            let (mut support_points, mut support_max) = (0, 0.0f64);
            for _ in 0..p.support_samples {
                let r = rng.gen_range(lo..hi).exp();
                if r <= 0.5 * delta {
                    continue;
                }
                let b = cutoff_beta(r, &g)?.value;
                if b == 0.0 || b == 1.0 {
                    let pt = NeckPoint::from_polar(r, rng.gen_range(0.0..TAU), rng.gen_range(0.0..TAU));
                    support_points += 1;
                    support_max = support_max.max(error_density(&pt, &g)?.abs());
                }
            }
            let l = g.log_sqrt_delta();
            Ok(ScalingRow {
                delta,
                l2: e.l2,
                l2_grad: e.l2_grad,
                l2_hess: e.l2_hess,
                log_constant: e.l2 * e.l2 * l * l / (delta * delta),
                residual_l2: residual(&coarse)?,
                residual_l2_fine: residual(&fine)?,
                support_points,
                support_max,
            })
        })
        .collect::<Result<_>>()?;

    let deltas: Vec<f64> = rows.iter().map(|r| r.delta).collect();
    let l2s: Vec<f64> = rows.iter().map(|r| r.l2).collect();
    let slope = if rows.len() >= 2 { log_log_slope(&deltas, &l2s) } else { f64::NAN };
    let (c_lo, c_hi) = min_max(rows.iter().map(|r| r.log_constant));
    let spread = c_hi / c_lo - 1.0;

    let mut invariants = vec![
        Invariant::new(
            "fitted_slope",
            slope >= p.slope_min && slope <= p.slope_max,
            format!("log-log slope of |error|_L2 against delta is {slope:.4}, window [{}, {}]", p.slope_min, p.slope_max),
        ),
        Invariant::new(
            "log_weighted_constant",
            spread.is_finite() && spread <= p.log_constant_spread,
            format!(
                "|error|^2 log^2 sqrt(delta) / delta^2 lies in [{c_lo:.5}, {c_hi:.5}], spread {:.2}% (allowed {:.0}%)",
                100.0 * spread,
                100.0 * p.log_constant_spread
            ),
        ),
    ];
    let support_total: usize = rows.iter().map(|r| r.support_points).sum();
    let support_max = rows.iter().map(|r| r.support_max).fold(0.0, f64::max);
    invariants.push(Invariant::new(
        "error_support",
        support_max == 0.0,
        format!("max |error_density| = {support_max:.3e} at {support_total} points where the cutoff is 0 or 1"),
    ));
    for r in &rows {
        let truncation = (r.residual_l2 - r.residual_l2_fine).abs();
        let gap = (r.residual_l2 - r.l2).abs();
        invariants.push(Invariant::new(
            format!("residual_matches_error_norm(delta={:e})", r.delta),
            gap <= 2.0 * truncation,
            format!(
                "|slag_residual(0)| = {:.6e}, error l2 = {:.6e}, gap {gap:.3e}, truncation {truncation:.3e}",
                r.residual_l2, r.l2
            ),
        ));
    }

    let table = CsvTable {
        file: "error_scaling.csv".into(),
        header: vec!["delta", "l2", "l2_grad", "l2_hess", "fitted_slope"],
        rows: rows
            .iter()
            .map(|r| vec![sci(r.delta), sci(r.l2), sci(r.l2_grad), sci(r.l2_hess), sci(slope)])
            .collect(),
    };
    Ok(ExperimentOutput {
        tables: vec![table],
        summary: json!({
            "fitted_slope": slope,
            "log_weighted_constant": rows.iter().map(|r| r.log_constant).collect::<Vec<_>>(),
            "slag_residual_l2": rows.iter().map(|r| r.residual_l2).collect::<Vec<_>>(),
        }),
        invariants,
    })
}

struct SpectralRow {
    delta: f64,
    n: [usize; 3],
    bc: Boundary,
    lambda1: f64,
    sqrt_lambda1: f64,
    poincare_min: f64,
    c_l2: f64,
    c_lp: f64,
    c22: f64,
    c42: f64,
    iterations: usize,
    residual: f64,
}

fn spectral_sweep(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let p = &cfg.spectral_sweep;
    let jobs: Vec<(usize, f64, Boundary)> = cfg
        .delta_list
        .iter()
        .enumerate()
        .flat_map(|(i, &d)| p.boundary_conditions.iter().map(move |&bc| (i, d, bc)))
        .collect();
    let rows: Vec<SpectralRow> = jobs
        .par_iter()
        .map(|&(i, delta, bc)| -> Result<SpectralRow> {
            let n_r = radial_cells(delta, p.cells_per_decade, cfg.resolutions[0]);
            let (g, grid) = grid(cfg, delta, n_r)?;
            let op = assemble(&grid, &g, OperatorKind::LaplaceBeltrami, bc.to_bc())?;
            let seed = derive_seed(cfg.seed, i);
            let eig = first_eigenvalue(&op)?;
            let poincare = verify_poincare(&op, p.trials, seed)?;
            let c_l2 = verify_lp_bound(&op, 2.0, p.trials, seed.wrapping_add(1))?;
            let c_lp = verify_lp_bound(&op, p.lp_exponent, p.trials, seed.wrapping_add(2))?;
            let el = verify_elliptic_estimates(&op, p.trials, seed.wrapping_add(3), NormOptions::default())?;
            Ok(SpectralRow {
                delta,
                n: [n_r, cfg.resolutions[1], cfg.resolutions[2]],
                bc,
                lambda1: eig.lambda1,
                sqrt_lambda1: poincare.sqrt_lambda1,
                poincare_min: poincare.min_ratio,
                c_l2,
                c_lp,
                c22: el.c22,
                c42: el.c42,
                iterations: eig.iterations,
                residual: eig.residual,
            })
        })
        .collect::<Result<_>>()?;

    let mut invariants = Vec::new();
    for &bc in &p.boundary_conditions {
        let name = bc.to_bc().name();
        let sel: Vec<&SpectralRow> = rows.iter().filter(|r| r.bc == bc).collect();
        let (lo, hi) = min_max(sel.iter().map(|r| r.lambda1));
        invariants.push(Invariant::new(
            format!("spectral_gap_positive({name})"),
            lo > 0.0,
            format!("min lambda_1 = {lo:.6e}"),
        ));
        invariants.push(match bc {
            Boundary::Neumann => Invariant::new(
                format!("spectral_uniformity({name})"),
                lo >= p.min_ratio * hi,
                format!("lambda_1 in [{lo:.6}, {hi:.6}], ratio {:.4} (required {})", lo / hi, p.min_ratio),
            ),
            // the Dirichlet ring at r = delta pushes lambda_1 up as delta shrinks
            Boundary::Dirichlet => {
                let widest = sel
                    .iter()
                    .max_by(|a, b| a.delta.total_cmp(&b.delta))
                    .map_or(f64::NAN, |r| r.lambda1);
                Invariant::new(
                    format!("spectral_lower_bound({name})"),
                    lo >= p.min_ratio * widest,
                    format!(
                        "min lambda_1 = {lo:.6}, lambda_1 at the largest delta = {widest:.6} (required ratio {})",
                        p.min_ratio
                    ),
                )
            }
        });
        let worst = sel
            .iter()
            .map(|r| r.residual / r.lambda1.max(1.0))
            .fold(0.0, f64::max);
        invariants.push(Invariant::new(
            format!("eigen_residual({name})"),
            worst <= p.residual_tolerance,
            format!("max relative eigen-residual {worst:.3e} (tolerance {:.0e})", p.residual_tolerance),
        ));
        let poincare_ok = sel
            .iter()
            .all(|r| r.poincare_min >= r.sqrt_lambda1 * (1.0 - 1e-8));
        let worst_ratio = sel
            .iter()
            .map(|r| r.poincare_min / r.sqrt_lambda1)
            .fold(f64::INFINITY, f64::min);
        invariants.push(Invariant::new(
            format!("poincare({name})"),
            poincare_ok,
            format!("min |grad h| / (sqrt(lambda_1) |h|) = {worst_ratio:.10}"),
        ));
    }

    let table = CsvTable {
        file: "spectral_sweep.csv".into(),
        header: vec![
            "delta", "n_r", "n_theta", "n_kappa", "bc", "lambda1", "poincare_min", "c_l2", "c_lp", "c22",
            "c42", "iterations", "residual",
        ],
        rows: rows
            .iter()
            .map(|r| {
                vec![
                    sci(r.delta),
                    r.n[0].to_string(),
                    r.n[1].to_string(),
                    r.n[2].to_string(),
                    r.bc.to_bc().name().to_string(),
                    sci(r.lambda1),
                    sci(r.poincare_min),
                    sci(r.c_l2),
                    sci(r.c_lp),
                    sci(r.c22),
                    sci(r.c42),
                    r.iterations.to_string(),
                    sci(r.residual),
                ]
            })
            .collect(),
    };
    Ok(ExperimentOutput {
        tables: vec![table],
        summary: json!({
            "lambda1": rows.iter().map(|r| json!({"delta": r.delta, "bc": r.bc, "value": r.lambda1})).collect::<Vec<_>>(),
        }),
        invariants,
    })
}

struct EllipticRow {
    delta: f64,
    n_r: usize,
    constants: [f64; 4],
}

const ELLIPTIC_NAMES: [&str; 4] = ["c_l2", "c_l4", "c22", "c42"];

fn elliptic_constants(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let p = &cfg.elliptic_constants;
    let rows: Vec<EllipticRow> = cfg
        .delta_list
        .par_iter()
        .enumerate()
        .map(|(i, &delta)| -> Result<EllipticRow> {
            let n_r = radial_cells(delta, p.cells_per_decade, cfg.resolutions[0]);
            let (g, grid) = grid(cfg, delta, n_r)?;
            let op = assemble(&grid, &g, OperatorKind::LaplaceBeltrami, p.boundary.to_bc())?;
            let seed = derive_seed(cfg.seed, i);
            let c_l2 = verify_lp_bound(&op, 2.0, p.trials, seed)?;
            let c_l4 = verify_lp_bound(&op, 4.0, p.trials, seed.wrapping_add(1))?;
            let el = verify_elliptic_estimates(&op, p.trials, seed.wrapping_add(2), NormOptions::default())?;
            Ok(EllipticRow {
                delta,
                n_r,
                constants: [c_l2, c_l4, el.c22, el.c42],
            })
        })
        .collect::<Result<_>>()?;

    let invariants = ELLIPTIC_NAMES
        .iter()
        .enumerate()
        .map(|(k, name)| {
            let (lo, hi) = min_max(rows.iter().map(|r| r.constants[k]));
            Invariant::new(
                format!("elliptic_uniformity({name})"),
                lo > 0.0 && hi <= p.max_spread * lo,
                format!("{name} in [{lo:.5}, {hi:.5}], max/min {:.3} (allowed {})", hi / lo, p.max_spread),
            )
        })
        .collect();
    let bc = p.boundary.to_bc().name();
    let table = CsvTable {
        file: "elliptic_constants.csv".into(),
        header: vec!["delta", "n_r", "n_theta", "n_kappa", "bc", "trials", "c_l2", "c_l4", "c22", "c42"],
        rows: rows
            .iter()
            .map(|r| {
                let mut row = vec![
                    sci(r.delta),
                    r.n_r.to_string(),
                    cfg.resolutions[1].to_string(),
                    cfg.resolutions[2].to_string(),
                    bc.to_string(),
                    p.trials.to_string(),
                ];
                row.extend(r.constants.iter().map(|&c| sci(c)));
                row
            })
            .collect(),
    };
    let summary = ELLIPTIC_NAMES
        .iter()
        .enumerate()
        .map(|(k, name)| (name.to_string(), json!(rows.iter().map(|r| r.constants[k]).collect::<Vec<_>>())))
        .collect::<serde_json::Map<_, _>>();
    Ok(ExperimentOutput {
        tables: vec![table],
        summary: Value::Object(summary),
        invariants,
    })
}

fn mean_curvature(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let p = cfg.mean_curvature;
    let curve: Box<dyn CurveModel + Sync> = match p.curve {
        CurveChoice::Circle => Box::new(PlanarCircle::new(p.radius, p.bound_z)?),
        CurveChoice::Line => Box::new(StraightLine::new(p.bound_z)?),
    };
    let values: Vec<(f64, f64)> = cfg
        .delta_list
        .par_iter()
        .map(|&delta| -> Result<(f64, f64)> {
            let (_, grid) = grid(cfg, delta, cfg.resolutions[0])?;
            Ok((delta, mean_curvature_l2_squared(curve.as_ref(), &grid)?))
        })
        .collect::<Result<_>>()?;

    let mut by_delta = values.clone();
    by_delta.sort_by(|a, b| b.0.total_cmp(&a.0));
    let invariant = match p.curve {
        CurveChoice::Circle => {
            let decreasing = by_delta.windows(2).all(|w| w[1].1 < w[0].1);
            Invariant::new(
                "mean_curvature_decay",
                decreasing,
                format!(
                    "|H|^2_L2 by decreasing delta: {}",
                    by_delta.iter().map(|(_, h)| format!("{h:.6e}")).collect::<Vec<_>>().join(", ")
                ),
            )
        }
        CurveChoice::Line => {
            let worst = values.iter().map(|v| v.1.abs()).fold(0.0, f64::max);
            Invariant::new("mean_curvature_vanishes", worst == 0.0, format!("max |H|^2_L2 = {worst:.3e}"))
        }
    };
    let name = match p.curve {
        CurveChoice::Circle => "circle",
        CurveChoice::Line => "line",
    };
    let table = CsvTable {
        file: "mean_curvature.csv".into(),
        header: vec!["delta", "curve", "h_l2_squared"],
        rows: values.iter().map(|&(d, h)| vec![sci(d), name.to_string(), sci(h)]).collect(),
    };
    Ok(ExperimentOutput {
        tables: vec![table],
        summary: json!({ "h_l2_squared": values.iter().map(|v| v.1).collect::<Vec<_>>() }),
        invariants: vec![invariant],
    })
}

struct SolveRow {
    delta: f64,
    outcome: std::result::Result<slag_glue::SolveOutcome, slag_glue::Error>,
    multiplier: (f64, f64),
}

fn solve(cfg: &ExperimentConfig) -> Result<ExperimentOutput> {
    let p = cfg.solve;
    let rows: Vec<SolveRow> = cfg
        .delta_list
        .par_iter()
        .map(|&delta| -> Result<SolveRow> {
            let (g, grid) = grid(cfg, delta, cfg.resolutions[0])?;
            let problem = SlagProblem::new(&g, &grid)?;
            Ok(SolveRow {
                delta,
                outcome: problem.solve(p.max_iterations, p.tolerance),
                multiplier: problem.multiplier_range(),
            })
        })
        .collect::<Result<_>>()?;

    let mut tables = Vec::new();
    let mut invariants = Vec::new();
    let mut summary_rows = Vec::new();
    let mut summary = Vec::new();
    for (i, row) in rows.iter().enumerate() {
        let tag = format!("delta={:e}", row.delta);
        invariants.push(Invariant::new(
            format!("multiplier_positive({tag})"),
            row.multiplier.0 > 0.0,
            format!("1 - det Hess G in [{:.6}, {:.6}]", row.multiplier.0, row.multiplier.1),
        ));
        let out = match &row.outcome {
            Ok(out) => out,
            Err(e) => {
                invariants.push(Invariant::new(format!("fixed_point({tag})"), false, e.to_string()));
                summary.push(json!({"delta": row.delta, "error": e.to_string()}));
                continue;
            }
        };
        let worst_ratio = out
            .trace
            .iter()
            .skip(1)
            .map(|t| t.contraction_ratio)
            .fold(0.0, f64::max);
        let final_residual = out.report.l2_norm;
        invariants.push(Invariant::new(
            format!("contraction({tag})"),
            worst_ratio <= p.max_contraction,
            format!("max contraction ratio after the first step {worst_ratio:.4} (bound {})", p.max_contraction),
        ));
        invariants.push(Invariant::new(
            format!("fixed_point_norm({tag})"),
            out.solution_norm <= p.norm_factor * out.first_correction,
            format!(
                "|h*|_2,2 = {:.6e}, |W(0)|_2,2 = {:.6e} (factor {})",
                out.solution_norm, out.first_correction, p.norm_factor
            ),
        ));
        invariants.push(Invariant::new(
            format!("residual_reduction({tag})"),
            final_residual <= p.residual_reduction * out.initial_residual,
            format!(
                "final residual {final_residual:.3e}, initial {:.3e} (reduction {:.0e})",
                out.initial_residual, p.residual_reduction
            ),
        ));
        tables.push(CsvTable {
            file: format!("solve_trace_{i:03}.csv"),
            header: vec!["iter", "step_norm", "residual_l2", "contraction_ratio"],
            rows: out
                .trace
                .iter()
                .map(|t| vec![t.iter.to_string(), sci(t.step_norm), sci(t.residual_l2), sci(t.contraction_ratio)])
                .collect(),
        });
        if p.write_potential {
            let mut buf = Vec::new();
            out.potential.field().write_csv(&mut buf)?;
            let text = String::from_utf8(buf)?;
            let mut lines = text.lines();
            let header = lines.next().unwrap_or_default();
            anyhow::ensure!(header == "r,theta,kappa,value,weight", "unexpected field header {header}");
            tables.push(CsvTable {
                file: format!("solve_potential_{i:03}.csv"),
                header: vec!["r", "theta", "kappa", "value", "weight"],
                rows: lines.map(|l| l.split(',').map(str::to_string).collect()).collect(),
            });
        }
        summary_rows.push(vec![
            sci(row.delta),
            out.trace.len().to_string(),
            sci(out.first_correction),
            sci(out.solution_norm),
            sci(out.initial_residual),
            sci(final_residual),
            sci(row.multiplier.0),
            sci(row.multiplier.1),
            sci(worst_ratio),
        ]);
        summary.push(json!({
            "delta": row.delta,
            "iterations": out.trace.len(),
            "first_correction": out.first_correction,
            "solution_norm": out.solution_norm,
            "initial_residual": out.initial_residual,
            "final_residual": final_residual,
            "max_contraction": worst_ratio,
        }));
    }
    tables.insert(
        0,
        CsvTable {
            file: "solve.csv".into(),
            header: vec![
                "delta",
                "iterations",
                "first_correction",
                "solution_norm",
                "initial_residual",
                "final_residual",
                "multiplier_min",
                "multiplier_max",
                "max_contraction",
            ],
            rows: summary_rows,
        },
    );
    Ok(ExperimentOutput {
        tables,
        summary: Value::Array(summary),
        invariants,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_a_power_law() {
        let xs = [0.1, 0.01, 0.001];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powf(1.5)).collect();
        assert!((log_log_slope(&xs, &ys) - 1.5).abs() < 1e-12);
    }

    #[test]
    fn radial_cells_scale_with_decades() {
        assert_eq!(radial_cells(0.01, Some(32), 5), 32);
        assert_eq!(radial_cells(0.001, Some(32), 5), 48);
        assert_eq!(radial_cells(0.3, Some(4), 5), MIN_RESOLUTION);
        assert_eq!(radial_cells(0.01, None, 40), 40);
    }

    #[test]
    fn seeds_differ_per_delta() {
        assert_ne!(derive_seed(1, 0), derive_seed(1, 1));
        assert_eq!(derive_seed(7, 3), derive_seed(7, 3));
    }

    #[test]
    fn sci_keeps_seventeen_digits() {
        assert_eq!(sci(0.1), "1.0000000000000001e-1");
        assert_eq!(sci(f64::NAN), "NaN");
    }

    #[test]
    fn small_lagrangian_run_passes() {
        let mut cfg = ExperimentConfig::with_defaults(Experiment::LagrangianCheck, vec![0.1, 0.01]);
        cfg.lagrangian_check.samples = 200;
        let out = run_experiment(&cfg).unwrap();
        assert!(out.passed(), "{:?}", out.invariants);
        assert_eq!(out.tables[0].rows.len(), 2);
    }

    #[test]
    fn straight_line_has_no_mean_curvature() {
        let mut cfg = ExperimentConfig::with_defaults(Experiment::MeanCurvature, vec![0.1, 0.01]);
        cfg.resolutions = [16, 8, 8];
        cfg.mean_curvature.curve = CurveChoice::Line;
        let out = run_experiment(&cfg).unwrap();
        assert!(out.passed(), "{:?}", out.invariants);
    }
}
