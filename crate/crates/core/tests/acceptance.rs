//! Acceptance suite. Every test prints one `PASS`/`FAIL` line on stderr (bypassing the test
//! harness capture) and then asserts it.

use std::f64::consts::TAU;
use std::fs;
use std::io::Write;
use std::path::Path;
use std::sync::Arc;
use std::time::{Duration, Instant};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use slag_glue::exterior::holomorphic_three_form;
use slag_glue::gluing::{mean_curvature_l2_squared, PlanarCircle};
use slag_glue::neck_grid::random_smooth_field;
use slag_glue::slag::{det_hess_bound_check, slag_residual};
use slag_glue::spectral::{first_eigenvalue, verify_elliptic_estimates, verify_lp_bound};
use slag_glue::{
    assemble, build_grid, calibration_identity_check, cutoff_beta, error_density, error_norm,
    standard_symplectic_form, tangent_frame, BoundaryCondition, Frame3, GluingConfig,
    GraphPotential, NeckGrid, NeckPoint, NormOptions, OperatorKind, ScalarField, SlagProblem,
};
use slag_glue_cli::config::{CurveChoice, Experiment, ExperimentConfig};
use slag_glue_cli::experiments::radial_cells;

const SWEEP: [f64; 5] = [1e-1, 3.162_277_660_168_379_4e-2, 1e-2, 3.162_277_660_168_379_4e-3, 1e-3];
const THREE: [f64; 3] = [1e-1, 1e-2, 1e-3];
const CELLS_PER_DECADE: usize = 32;

fn verdict(name: &str, pass: bool, started: Instant, budget_secs: u64, detail: &str) {
    let elapsed = started.elapsed();
    let ok = pass && elapsed <= Duration::from_secs(budget_secs);
    let line = format!(
        "{} {name}: {detail} [{:.2}s of {budget_secs}s]\n",
        if ok { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64()
    );
    let _ = std::io::stderr().write_all(line.as_bytes());
    assert!(ok, "{line}");
}

fn config(delta: f64) -> GluingConfig {
    GluingConfig::new(delta).unwrap()
}

fn grid(delta: f64, n: (usize, usize, usize)) -> (GluingConfig, Arc<NeckGrid>) {
    let c = config(delta);
    let g = Arc::new(build_grid(&c, n.0, n.1, n.2).unwrap());
    (c, g)
}

fn neck_point(rng: &mut ChaCha8Rng, c: &GluingConfig) -> NeckPoint {
    let s = rng.gen_range(c.inner_radius().ln()..c.outer_radius().ln());
    NeckPoint::from_polar(s.exp(), rng.gen_range(0.0..TAU), rng.gen_range(0.0..TAU))
}

/// `omega(a, b)` written out over the pairs `(0,4)`, `(1,5)`, `(2,3)`.
fn omega_oracle(a: &[f64; 6], b: &[f64; 6]) -> f64 {
    [(0, 4), (1, 5), (2, 3)]
        .iter()
        .map(|&(i, j)| a[i] * b[j] - a[j] * b[i])
        .sum()
}

/// `Im det` of the complex 3x3 matrix with columns `(v[0] + i v[4], v[1] + i v[5], v[2] + i v[3])`.
fn im_xi_oracle(frame: &Frame3) -> f64 {
    let col = |v: &[f64; 6]| [(v[0], v[4]), (v[1], v[5]), (v[2], v[3])];
    let m = [col(frame.e1.components()), col(frame.e2.components()), col(frame.e3.components())];
    let mul = |a: (f64, f64), b: (f64, f64)| (a.0 * b.0 - a.1 * b.1, a.0 * b.1 + a.1 * b.0);
    let sub = |a: (f64, f64), b: (f64, f64)| (a.0 - b.0, a.1 - b.1);
    let add = |a: (f64, f64), b: (f64, f64)| (a.0 + b.0, a.1 + b.1);
    let minor = |r1: usize, r2: usize, c1: usize, c2: usize| {
        sub(mul(m[c1][r1], m[c2][r2]), mul(m[c2][r1], m[c1][r2]))
    };
    let det = add(
        sub(mul(m[0][0], minor(1, 2, 1, 2)), mul(m[1][0], minor(1, 2, 0, 2))),
        mul(m[2][0], minor(1, 2, 0, 1)),
    );
    det.1
}

fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    slag_glue_cli::experiments::log_log_slope(xs, ys)
}

fn spread(v: &[f64]) -> f64 {
    let lo = v.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    hi / lo
}

#[test]
fn lagrangian_identity() {
    let t = Instant::now();
    let mut worst: f64 = 0.0;
    for (i, &d) in THREE.iter().enumerate() {
        let c = config(d);
        let mut rng = ChaCha8Rng::seed_from_u64(100 + i as u64);
        for _ in 0..10_000 {
            let f = tangent_frame(&neck_point(&mut rng, &c), &c).unwrap();
            let v = [f.e1.components(), f.e2.components(), f.e3.components()];
            for (a, b) in [(0, 1), (0, 2), (1, 2)] {
                worst = worst.max(omega_oracle(v[a], v[b]).abs());
            }
        }
    }
    verdict(
        "lagrangian identity",
        worst <= 1e-12,
        t,
        5,
        &format!("max |omega(E_i, E_j)| = {worst:.3e} over 3 x 10^4 neck points"),
    );
}

#[test]
fn calibration_identity() {
    let t = Instant::now();
    let (re, im) = holomorphic_three_form();
    let r = calibration_identity_check(&standard_symplectic_form(), &re, &im);
    verdict("calibration identity", r <= 1e-12, t, 1, &format!("residual {r:.3e}"));
}

#[test]
fn error_support_and_scaling() {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let (mut flat_points, mut flat_max) = (0usize, 0.0f64);
    for &d in &SWEEP {
        let c = config(d);
        for _ in 0..2000 {
            let r = rng.gen_range((0.5 * d).ln()..0.0).exp();
            let b = cutoff_beta(r, &c).unwrap().value;
            if r > 0.5 * d && (b == 0.0 || b == 1.0) {
                let p = NeckPoint::from_polar(r, rng.gen_range(0.0..TAU), rng.gen_range(0.0..TAU));
                flat_points += 1;
                flat_max = flat_max.max(error_density(&p, &c).unwrap().abs());
            }
        }
    }
    let (mut l2, mut constant) = (Vec::new(), Vec::new());
    for &d in &SWEEP {
        let (c, g) = grid(d, (128, 8, 8));
        let e = error_norm(&c, &g).unwrap();
        let l = c.log_sqrt_delta();
        l2.push(e.l2);
        constant.push(e.l2 * e.l2 * l * l / (d * d));
    }
    let s = slope(&SWEEP, &l2);
    let c_spread = spread(&constant);
    let pass = flat_points > 0 && flat_max == 0.0 && (0.9..=1.2).contains(&s) && c_spread <= 1.2;
    verdict(
        "error support and scaling",
        pass,
        t,
        120,
        &format!(
            "error on flat set {flat_max:.1e} at {flat_points} points; L2 slope {s:.4} (window [0.9, 1.2]); \
             |e|^2 log^2 sqrt(delta) / delta^2 max/min {c_spread:.4} (limit 1.2)"
        ),
    );
}

#[test]
fn two_path_consistency() {
    let t = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut pointwise: f64 = 0.0;
    for i in 0..1000 {
        let c = config(SWEEP[i % SWEEP.len()]);
        let p = neck_point(&mut rng, &c);
        let frame = tangent_frame(&p, &c).unwrap();
        pointwise = pointwise.max((error_density(&p, &c).unwrap() - im_xi_oracle(&frame)).abs());
    }
    let mut details = vec![format!("max |density - Im xi(frame)| = {pointwise:.3e}")];
    let mut pass = pointwise <= 1e-12;
    for &d in &THREE {
        let residual = |n_r: usize| {
            let (c, g) = grid(d, (n_r, 8, 8));
            slag_residual(&GraphPotential::zero(g.clone()), &c, &g).unwrap().l2_norm
        };
        let (c, g) = grid(d, (64, 8, 8));
        let reference = error_norm(&c, &g).unwrap().l2;
        let (coarse, fine) = (residual(64), residual(128));
        let truncation = (coarse - fine).abs();
        let gap = (coarse - reference).abs();
        pass &= gap <= 2.0 * truncation;
        details.push(format!("delta {d:.0e}: gap {gap:.2e} vs truncation {truncation:.2e}"));
    }
    verdict("two-path consistency", pass, t, 120, &details.join("; "));
}

fn dense_first_eigenvalue(delta: f64, bc: BoundaryCondition) -> (f64, f64) {
    let (c, g) = grid(delta, (8, 8, 8));
    let op = assemble(&g, &c, OperatorKind::LaplaceBeltrami, bc).unwrap();
    let n = g.len();
    let mut ev: Vec<f64> = DMatrix::from_row_slice(n, n, &op.to_dense().unwrap())
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .collect();
    ev.sort_by(f64::total_cmp);
    let dense = match bc {
        BoundaryCondition::Neumann => ev[1],
        BoundaryCondition::Dirichlet => ev[0],
    };
    (first_eigenvalue(&op).unwrap().lambda1, dense)
}

#[test]
fn spectral_uniformity() {
    let t = Instant::now();
    let lambdas: Vec<f64> = SWEEP
        .iter()
        .map(|&d| {
            let (c, g) = grid(d, (radial_cells(d, Some(CELLS_PER_DECADE), 0), 16, 16));
            let op = assemble(&g, &c, OperatorKind::LaplaceBeltrami, BoundaryCondition::Neumann).unwrap();
            first_eigenvalue(&op).unwrap().lambda1
        })
        .collect();
    let lo = lambdas.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = lambdas.iter().copied().fold(0.0, f64::max);
    let mut oracle_gap: f64 = 0.0;
    for &d in &THREE {
        for bc in [BoundaryCondition::Neumann, BoundaryCondition::Dirichlet] {
            let (iterative, dense) = dense_first_eigenvalue(d, bc);
            oracle_gap = oracle_gap.max((iterative - dense).abs() / dense.max(1.0));
        }
    }
    verdict(
        "spectral uniformity",
        lo > 0.0 && lo >= 0.5 * hi && oracle_gap <= 1e-8,
        t,
        600,
        &format!("lambda_1 in [{lo:.6}, {hi:.6}] over the sweep; dense oracle gap {oracle_gap:.2e}"),
    );
}

#[test]
fn elliptic_constant_uniformity() {
    let t = Instant::now();
    let mut table = vec![Vec::new(); 4];
    for (i, &d) in SWEEP.iter().enumerate() {
        let (c, g) = grid(d, (radial_cells(d, Some(CELLS_PER_DECADE), 0), 16, 16));
        let op = assemble(&g, &c, OperatorKind::LaplaceBeltrami, BoundaryCondition::Neumann).unwrap();
        let seed = 60 + i as u64;
        let el = verify_elliptic_estimates(&op, 40, seed, NormOptions::default()).unwrap();
        table[0].push(verify_lp_bound(&op, 2.0, 40, seed).unwrap());
        table[1].push(verify_lp_bound(&op, 4.0, 40, seed).unwrap());
        table[2].push(el.c22);
        table[3].push(el.c42);
    }
    let spreads: Vec<f64> = table.iter().map(|v| spread(v)).collect();
    verdict(
        "elliptic constant uniformity",
        spreads.iter().all(|&s| s.is_finite() && s <= 3.0),
        t,
        900,
        &format!(
            "max/min over the sweep: c_L2 {:.3}, c_L4 {:.3}, c22 {:.3}, c42 {:.3} (limit 3)",
            spreads[0], spreads[1], spreads[2], spreads[3]
        ),
    );
}

#[test]
fn linearization_and_quadraticity() {
    let t = Instant::now();
    let (c, g) = grid(0.01, (32, 16, 16));
    let problem = SlagProblem::new(&c, &g).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let h = random_smooth_field(&g, &mut rng, true).unwrap();
    let h = h.scale(1.0 / h.max_abs());
    let r0 = problem.residual(&GraphPotential::zero(g.clone())).unwrap().residual_field;
    let l0 = problem.linearization(&GraphPotential::zero(g.clone())).apply(&h).unwrap();
    let at = |s: f64| -> ScalarField { problem.residual(&GraphPotential::new(h.scale(s))).unwrap().residual_field };

    let eps = [1e-2, 1e-3, 1e-4];
    let fd_err: Vec<f64> = eps
        .iter()
        .map(|&e| {
            let fd = at(e).axpy(-1.0, &r0).unwrap().scale(1.0 / e);
            fd.axpy(-1.0, &l0).unwrap().l2() / l0.l2()
        })
        .collect();
    let fd_order = slope(&eps, &fd_err);

    let scales = [1e-1, 1e-2, 1e-3];
    let nonlinear: Vec<f64> = scales
        .iter()
        .map(|&s| at(s).axpy(-1.0, &r0).unwrap().axpy(-s, &l0).unwrap().l2())
        .collect();
    let q_slope = slope(&scales, &nonlinear);
    verdict(
        "linearization and quadraticity",
        (fd_order - 1.0).abs() <= 0.05 && (q_slope - 2.0).abs() <= 0.05,
        t,
        120,
        &format!(
            "finite-difference error order {fd_order:.4} (relative error {:.2e} at eps 1e-4); nonlinear slope {q_slope:.4}",
            fd_err[2]
        ),
    );
}

#[test]
fn det_hess_bound() {
    let t = Instant::now();
    let ratios: Vec<f64> = SWEEP
        .iter()
        .map(|&d| {
            let (c, g) = grid(d, (128, 8, 8));
            det_hess_bound_check(&c, &g).unwrap() / (d * d)
        })
        .collect();
    let hi = ratios.iter().copied().fold(0.0, f64::max);
    verdict(
        "det Hess bound",
        ratios.iter().all(|r| r.is_finite()) && hi <= 2.0 * ratios[0],
        t,
        60,
        &format!(
            "int |det Hess G|^2 / delta^2 = [{}] (limit twice the widest-neck value)",
            ratios.iter().map(|r| format!("{r:.4}")).collect::<Vec<_>>().join(", ")
        ),
    );
}

#[test]
fn contraction_and_fixed_point() {
    let t = Instant::now();
    let mut pass = true;
    let mut details = Vec::new();
    for d in [5e-2, 1e-2, 1e-3] {
        let (c, g) = grid(d, (64, 32, 16));
        let out = SlagProblem::new(&c, &g).unwrap().solve(200, 1e-13).unwrap();
        let worst = out.trace.iter().skip(1).map(|r| r.contraction_ratio).fold(0.0, f64::max);
        let ok = worst <= 0.5
            && out.solution_norm <= 2.0 * out.first_correction
            && out.report.l2_norm <= 1e-6 * out.initial_residual;
        pass &= ok;
        details.push(format!(
            "delta {d:.0e}: ratio {worst:.3}, |h*|/|W(0)| {:.3}, residual drop {:.1e}",
            out.solution_norm / out.first_correction,
            out.report.l2_norm / out.initial_residual
        ));
    }
    verdict("contraction and fixed point", pass, t, 600, &details.join("; "));
}

#[test]
fn mean_curvature_decay() {
    let t = Instant::now();
    let circle = PlanarCircle::new(1.0, 1.0).unwrap();
    let values: Vec<f64> = THREE
        .iter()
        .map(|&d| mean_curvature_l2_squared(&circle, &grid(d, (64, 16, 16)).1).unwrap())
        .collect();
    verdict(
        "mean curvature decay",
        values.windows(2).all(|w| w[1] < w[0]),
        t,
        60,
        &format!(
            "|H|^2_L2 = [{}] for delta = 1e-1, 1e-2, 1e-3",
            values.iter().map(|v| format!("{v:.4e}")).collect::<Vec<_>>().join(", ")
        ),
    );
}

fn csv_bytes(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<(String, Vec<u8>)> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|e| e == "csv"))
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    files.sort();
    files
}

#[test]
fn determinism() {
    let t = Instant::now();
    let tmp = tempfile::tempdir().unwrap();
    let mut mismatched = Vec::new();
    for e in Experiment::ALL {
        let mut cfg = ExperimentConfig::with_defaults(e, vec![1e-1, 1e-2]);
        cfg.resolutions = [16, 8, 8];
        cfg.seed = 11;
        cfg.lagrangian_check.samples = 500;
        cfg.spectral_sweep.trials = 4;
        cfg.elliptic_constants.trials = 4;
        cfg.solve.write_potential = true;
        cfg.mean_curvature.curve = CurveChoice::Circle;
        let runs: Vec<_> = (0..2)
            .map(|k| {
                cfg.output_dir = tmp.path().join(format!("{}-{k}", e.name()));
                slag_glue_cli::run(&cfg).unwrap();
                csv_bytes(&cfg.output_dir)
            })
            .collect();
        if runs[0].is_empty() || runs[0] != runs[1] {
            mismatched.push(e.name());
        }
    }
    verdict(
        "determinism",
        mismatched.is_empty(),
        t,
        300,
        &format!("experiments with differing CSV bytes across reruns: {mismatched:?}"),
    );
}
