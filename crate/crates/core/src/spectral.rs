//! Laplace-Beltrami operator of the neck and the estimates built on it.
//!
//! With `mu = 1 + delta^4 / 4 r^4` the neck carries the metric `mu (dx^2 + dy^2) + A dkappa^2`
//! and `Delta f = -(mu^-1 (f_xx + f_yy) + A^-1 f_kappa_kappa)` (the nonnegative sign). In
//! `s = ln r` this is a finite-volume scheme `K f = M (Delta f)` with a diagonal mass `M`
//! and a symmetric seven-point stiffness `K`. Every coefficient depends on the radial cell
//! only, so a 2D FFT over `(theta, kappa)` splits `K` into one tridiagonal system per mode.

use std::f64::consts::TAU;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};
use crate::gluing::GluingConfig;
use crate::neck_grid::{norm_lp_k, random_smooth_field, NeckGrid, NormOptions, ScalarField};

const MAX_DENSE_NODES: usize = 4096;
pub const EIGEN_TOLERANCE: f64 = 1e-10;
pub const EIGEN_MAX_ITERATIONS: usize = 10_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OperatorKind {
    LaplaceBeltrami,
    FlatLaplacian,
}

impl OperatorKind {
    pub fn name(&self) -> &'static str {
        match self {
            OperatorKind::LaplaceBeltrami => "laplace_beltrami",
            OperatorKind::FlatLaplacian => "flat",
        }
    }
}

/// Radial boundary condition at `r = delta` and `r = sqrt(delta)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BoundaryCondition {
    Neumann,
    Dirichlet,
}

impl BoundaryCondition {
    pub fn name(&self) -> &'static str {
        match self {
            BoundaryCondition::Neumann => "neumann",
            BoundaryCondition::Dirichlet => "dirichlet",
        }
    }
}

struct Plans {
    theta_fwd: Arc<dyn Fft<f64>>,
    theta_inv: Arc<dyn Fft<f64>>,
    kappa_fwd: Arc<dyn Fft<f64>>,
    kappa_inv: Arc<dyn Fft<f64>>,
}

impl Plans {
    fn new(n_theta: usize, n_kappa: usize) -> Self {
        let mut planner = FftPlanner::new();
        Plans {
            theta_fwd: planner.plan_fft_forward(n_theta),
            theta_inv: planner.plan_fft_inverse(n_theta),
            kappa_fwd: planner.plan_fft_forward(n_kappa),
            kappa_inv: planner.plan_fft_inverse(n_kappa),
        }
    }
}

/// Assembled discrete `Delta_delta`.
#[derive(Clone)]
pub struct NeckOperator {
    grid: Arc<NeckGrid>,
    kind: OperatorKind,
    bc: BoundaryCondition,
    mu: Vec<f64>,
    mass: Vec<f64>,
    s_face: f64,
    theta_face: f64,
    kappa_coef: Vec<f64>,
    plans: Arc<Plans>,
}

impl fmt::Debug for NeckOperator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("NeckOperator")
            .field("kind", &self.kind)
            .field("bc", &self.bc)
            .field("n_r", &self.grid.n_r())
            .field("n_theta", &self.grid.n_theta())
            .field("n_kappa", &self.grid.n_kappa())
            .finish()
    }
}

pub fn assemble(
    grid: &Arc<NeckGrid>,
    cfg: &GluingConfig,
    kind: OperatorKind,
    bc: BoundaryCondition,
) -> Result<NeckOperator> {
    if cfg.delta() != grid.config().delta() || cfg.area_factor() != grid.config().area_factor() {
        return Err(Error::InvalidArgument("grid was built for a different configuration".into()));
    }
    let delta = cfg.delta();
    let area = cfg.area_factor();
    let sqrt_area = area.sqrt();
    let (hs, ht, hk) = (grid.h_s(), grid.h_theta(), grid.h_kappa());
    let d4 = match kind {
        OperatorKind::LaplaceBeltrami => delta.powi(4),
        OperatorKind::FlatLaplacian => 0.0,
    };
    // antiderivative of mu r^2 in s
    let prim = |s: f64| 0.5 * (2.0 * s).exp() - d4 * (-2.0 * s).exp() / 8.0;
    let mut mu = Vec::with_capacity(grid.n_r());
    let mut mass = Vec::with_capacity(grid.n_r());
    let mut kappa_coef = Vec::with_capacity(grid.n_r());
    for (i, &r) in grid.r_nodes().iter().enumerate() {
        let s0 = grid.s_min() + i as f64 * hs;
        let m = sqrt_area * ht * hk * (prim(s0 + hs) - prim(s0));
        mu.push(1.0 + d4 / (4.0 * r.powi(4)));
        mass.push(m);
        kappa_coef.push(m / (area * hk * hk));
    }
    Ok(NeckOperator {
        grid: grid.clone(),
        kind,
        bc,
        mu,
        mass,
        s_face: sqrt_area * ht * hk / hs,
        theta_face: sqrt_area * hs * hk / ht,
        kappa_coef,
        plans: Arc::new(Plans::new(grid.n_theta(), grid.n_kappa())),
    })
}

/// Outcome of a Poisson solve.
#[derive(Clone, Debug)]
pub struct PoissonSolution {
    pub field: ScalarField,
    /// Weighted mean removed from the right-hand side (always 0 for Dirichlet).
    pub removed_mean: f64,
    /// `|K f - M psi| / |M psi|`.
    pub relative_residual: f64,
}

/// First eigenpair on the complement of the kernel.
#[derive(Clone, Debug)]
pub struct SpectralResult {
    pub lambda1: f64,
    pub eigenfield: ScalarField,
    pub iterations: usize,
    pub residual: f64,
    pub bc: BoundaryCondition,
}

impl NeckOperator {
    pub fn grid(&self) -> &Arc<NeckGrid> {
        &self.grid
    }

    pub fn kind(&self) -> OperatorKind {
        self.kind
    }

    pub fn boundary(&self) -> BoundaryCondition {
        self.bc
    }

    /// Conformal factor at radial cell `i`.
    pub fn mu(&self, i: usize) -> f64 {
        self.mu[i]
    }

    /// Mass of node `idx`.
    pub fn mass(&self, idx: usize) -> f64 {
        self.mass[self.grid.coords(idx).0]
    }

    pub fn total_mass(&self) -> f64 {
        self.mass.iter().sum::<f64>() * (self.grid.n_theta() * self.grid.n_kappa()) as f64
    }

    /// `K f`.
    pub fn apply_stiffness(&self, f: &[f64]) -> Vec<f64> {
        let g = &self.grid;
        let (nr, nt, nk) = (g.n_r(), g.n_theta(), g.n_kappa());
        let mut out = vec![0.0; f.len()];
        for i in 0..nr {
            for j in 0..nt {
                for k in 0..nk {
                    let idx = g.index(i, j, k);
                    let c = f[idx];
                    let mut acc = 0.0;
                    if i > 0 {
                        acc += self.s_face * (c - f[g.index(i - 1, j, k)]);
                    } else if self.bc == BoundaryCondition::Dirichlet {
                        acc += 2.0 * self.s_face * c;
                    }
                    if i + 1 < nr {
                        acc += self.s_face * (c - f[g.index(i + 1, j, k)]);
                    } else if self.bc == BoundaryCondition::Dirichlet {
                        acc += 2.0 * self.s_face * c;
                    }
                    acc += self.theta_face
                        * (2.0 * c - f[g.index(i, (j + 1) % nt, k)] - f[g.index(i, (j + nt - 1) % nt, k)]);
                    acc += self.kappa_coef[i]
                        * (2.0 * c - f[g.index(i, j, (k + 1) % nk)] - f[g.index(i, j, (k + nk - 1) % nk)]);
                    out[idx] = acc;
                }
            }
        }
        out
    }

    /// `Delta f = M^-1 K f`.
    pub fn apply(&self, f: &ScalarField) -> Result<ScalarField> {
        let mut v = self.apply_stiffness(f.values());
        for (idx, x) in v.iter_mut().enumerate() {
            *x /= self.mass(idx);
        }
        f.with_values(v)
    }

    /// `<f, g>` in the operator's mass.
    pub fn inner(&self, f: &[f64], g: &[f64]) -> f64 {
        f.iter().zip(g).enumerate().map(|(idx, (a, b))| self.mass(idx) * a * b).sum()
    }

    pub fn norm(&self, f: &[f64]) -> f64 {
        self.inner(f, f).sqrt()
    }

    /// `(sum_i M_i |f_i|^p)^(1/p)`.
    pub fn lp_norm(&self, f: &[f64], p: f64) -> f64 {
        f.iter()
            .enumerate()
            .map(|(idx, v)| self.mass(idx) * v.abs().powf(p))
            .sum::<f64>()
            .powf(1.0 / p)
    }

    pub fn mean(&self, f: &[f64]) -> f64 {
        f.iter().enumerate().map(|(idx, v)| self.mass(idx) * v).sum::<f64>() / self.total_mass()
    }

    fn project_constants(&self, f: &mut [f64]) -> f64 {
        let m = self.mean(f);
        for x in f.iter_mut() {
            *x -= m;
        }
        m
    }

    /// Rayleigh quotient `<K f, f> / <f, f>_M`.
    pub fn rayleigh_quotient(&self, f: &[f64]) -> f64 {
        let kf = self.apply_stiffness(f);
        kf.iter().zip(f).map(|(a, b)| a * b).sum::<f64>() / self.inner(f, f)
    }

    /// Solves `K x = b` by FFT in `(theta, kappa)` and a tridiagonal solve in `r` per mode.
    /// With Neumann conditions `b` must sum to zero; the result then has zero weighted mean.
    pub fn solve_stiffness(&self, b: &[f64]) -> Vec<f64> {
        let g = &self.grid;
        let (nr, nt, nk) = (g.n_r(), g.n_theta(), g.n_kappa());
        let ring = nt * nk;
        let mut spec: Vec<Complex64> = b.iter().map(|&v| Complex64::new(v, 0.0)).collect();
        let mut column = vec![Complex64::new(0.0, 0.0); nt];
        for i in 0..nr {
            let shell = &mut spec[i * ring..(i + 1) * ring];
            self.plans.kappa_fwd.process(shell);
            for k in 0..nk {
                for j in 0..nt {
                    column[j] = shell[j * nk + k];
                }
                self.plans.theta_fwd.process(&mut column);
                for j in 0..nt {
                    shell[j * nk + k] = column[j];
                }
            }
        }

        let mut rhs_re = vec![0.0; nr];
        let mut rhs_im = vec![0.0; nr];
        let mut sol_re = vec![0.0; nr];
        let mut sol_im = vec![0.0; nr];
        let mut scratch = vec![0.0; nr];
        for p in 0..nt {
            for q in 0..nk {
                let diag = self.radial_diag(p, q);
                let diag = (!self.singular_mode(p, q)).then_some(diag.as_slice());
                let off = p * nk + q;
                for i in 0..nr {
                    rhs_re[i] = spec[i * ring + off].re;
                    rhs_im[i] = spec[i * ring + off].im;
                }
                self.radial_solve(diag, &rhs_re, &mut sol_re, &mut scratch);
                self.radial_solve(diag, &rhs_im, &mut sol_im, &mut scratch);
                for i in 0..nr {
                    spec[i * ring + off] = Complex64::new(sol_re[i], sol_im[i]);
                }
            }
        }

        let scale = 1.0 / ring as f64;
        let mut out = vec![0.0; b.len()];
        for i in 0..nr {
            let shell = &mut spec[i * ring..(i + 1) * ring];
            for k in 0..nk {
                for j in 0..nt {
                    column[j] = shell[j * nk + k];
                }
                self.plans.theta_inv.process(&mut column);
                for j in 0..nt {
                    shell[j * nk + k] = column[j];
                }
            }
            self.plans.kappa_inv.process(shell);
            for (o, v) in out[i * ring..(i + 1) * ring].iter_mut().zip(shell.iter()) {
                *o = v.re * scale;
            }
        }
        if self.bc == BoundaryCondition::Neumann {
            self.project_constants(&mut out);
        }
        out
    }

    /// Diagonal of the radial block of Fourier mode `(p, q)`; the off-diagonal is `-s_face`.
    fn radial_diag(&self, p: usize, q: usize) -> Vec<f64> {
        let g = &self.grid;
        let (nr, nt, nk) = (g.n_r(), g.n_theta(), g.n_kappa());
        let sym_t = 2.0 - 2.0 * (TAU * p as f64 / nt as f64).cos();
        let sym_k = 2.0 - 2.0 * (TAU * q as f64 / nk as f64).cos();
        let boundary = if self.bc == BoundaryCondition::Dirichlet { 2.0 * self.s_face } else { 0.0 };
        (0..nr)
            .map(|i| {
                let faces = if i == 0 || i + 1 == nr { self.s_face + boundary } else { 2.0 * self.s_face };
                faces + self.theta_face * sym_t + self.kappa_coef[i] * sym_k
            })
            .collect()
    }

    fn singular_mode(&self, p: usize, q: usize) -> bool {
        p == 0 && q == 0 && self.bc == BoundaryCondition::Neumann
    }

    /// Solves one radial block. `None` marks the singular Neumann block: its source must sum
    /// to zero and the solution is pinned to 0 in the first cell.
    fn radial_solve(&self, diag: Option<&[f64]>, rhs: &[f64], out: &mut [f64], scratch: &mut [f64]) {
        match diag {
            Some(d) => thomas(d, -self.s_face, rhs, scratch, out),
            None => {
                // flux through face i+1/2 balances the source below it
                let mut acc = 0.0;
                out[0] = 0.0;
                for i in 0..rhs.len() - 1 {
                    acc += rhs[i];
                    out[i + 1] = out[i] - acc / self.s_face;
                }
            }
        }
    }

    /// Inverse iteration on the radial pencil `(T_pq, M)` of one Fourier mode. Constants are
    /// deflated in the singular block.
    fn radial_eigen(&self, p: usize, q: usize, tol: f64, max_iter: usize) -> Result<(f64, Vec<f64>, usize)> {
        let nr = self.grid.n_r();
        let diag = self.radial_diag(p, q);
        let singular = self.singular_mode(p, q);
        let block = (!singular).then_some(diag.as_slice());
        let m = &self.mass;
        let apply = |v: &[f64]| -> Vec<f64> {
            (0..nr)
                .map(|i| {
                    let mut t = diag[i] * v[i];
                    if i > 0 {
                        t -= self.s_face * v[i - 1];
                    }
                    if i + 1 < nr {
                        t -= self.s_face * v[i + 1];
                    }
                    t
                })
                .collect()
        };
        let normalise = |v: &mut Vec<f64>| {
            if singular {
                let mean = v.iter().zip(m).map(|(a, w)| a * w).sum::<f64>() / m.iter().sum::<f64>();
                v.iter_mut().for_each(|a| *a -= mean);
            }
            let n = v.iter().zip(m).map(|(a, w)| w * a * a).sum::<f64>().sqrt();
            v.iter_mut().for_each(|a| *a /= n);
        };
        let mut v: Vec<f64> = (0..nr).map(|i| 1.0 + 0.5 * (1.7 * i as f64 + 0.3).sin()).collect();
        normalise(&mut v);
        let mut next = vec![0.0; nr];
        let mut scratch = vec![0.0; nr];
        let mut residual = f64::INFINITY;
        let mut previous;
        // roundoff floor of the residual
        let floor = 1e3 * f64::EPSILON * (0..nr).map(|i| diag[i] / m[i]).fold(0.0, f64::max);
        for it in 1..=max_iter {
            let b: Vec<f64> = v.iter().zip(m).map(|(a, w)| a * w).collect();
            self.radial_solve(block, &b, &mut next, &mut scratch);
            v.copy_from_slice(&next);
            normalise(&mut v);
            let tv = apply(&v);
            let lambda: f64 = tv.iter().zip(&v).map(|(a, b)| a * b).sum();
            previous = residual;
            residual = (0..nr)
                .map(|i| m[i] * (tv[i] / m[i] - lambda * v[i]).powi(2))
                .sum::<f64>()
                .sqrt();
            let stalled = residual <= floor && residual > 0.5 * previous;
            if residual <= tol * lambda.max(1.0) || stalled {
                return Ok((lambda, v, it));
            }
        }
        Err(Error::NotConverged {
            method: "inverse iteration",
            iterations: max_iter,
            residual,
        })
    }

    /// Jacobi-preconditioned conjugate gradients for `K x = b`; a cross-check of
    /// [`NeckOperator::solve_stiffness`].
    pub fn solve_cg(&self, b: &[f64], tol: f64, max_iter: usize) -> Result<Vec<f64>> {
        let n = b.len();
        let g = &self.grid;
        let diag: Vec<f64> = (0..n)
            .map(|idx| {
                let (i, _, _) = g.coords(idx);
                let edge = i == 0 || i + 1 == g.n_r();
                let s = if !edge {
                    2.0 * self.s_face
                } else if self.bc == BoundaryCondition::Dirichlet {
                    3.0 * self.s_face
                } else {
                    self.s_face
                };
                s + 2.0 * self.theta_face + 2.0 * self.kappa_coef[i]
            })
            .collect();
        let dot = |a: &[f64], c: &[f64]| a.iter().zip(c).map(|(x, y)| x * y).sum::<f64>();
        let bnorm = dot(b, b).sqrt();
        let mut x = vec![0.0; n];
        if bnorm == 0.0 {
            return Ok(x);
        }
        let mut r = b.to_vec();
        let mut z: Vec<f64> = r.iter().zip(&diag).map(|(a, d)| a / d).collect();
        let mut p = z.clone();
        let mut rz = dot(&r, &z);
        for _ in 0..max_iter {
            let ap = self.apply_stiffness(&p);
            let alpha = rz / dot(&p, &ap);
            for idx in 0..n {
                x[idx] += alpha * p[idx];
                r[idx] -= alpha * ap[idx];
            }
            if dot(&r, &r).sqrt() <= tol * bnorm {
                if self.bc == BoundaryCondition::Neumann {
                    self.project_constants(&mut x);
                }
                return Ok(x);
            }
            z = r.iter().zip(&diag).map(|(a, d)| a / d).collect();
            let rz_new = dot(&r, &z);
            let beta = rz_new / rz;
            rz = rz_new;
            for idx in 0..n {
                p[idx] = z[idx] + beta * p[idx];
            }
        }
        Err(Error::NotConverged {
            method: "conjugate gradients",
            iterations: max_iter,
            residual: dot(&r, &r).sqrt() / bnorm,
        })
    }

    /// `|K x - b| / scale`, or the absolute residual when `scale` is 0.
    fn relative_residual(&self, x: &[f64], b: &[f64], scale: f64) -> f64 {
        let kx = self.apply_stiffness(x);
        let num: f64 = kx.iter().zip(b).map(|(a, c)| (a - c).powi(2)).sum::<f64>().sqrt();
        let den = scale;
        if den == 0.0 {
            num
        } else {
            num / den
        }
    }

    /// Dense `M^-1/2 K M^-1/2`, row-major; for oracle checks on small grids.
    pub fn to_dense(&self) -> Result<Vec<f64>> {
        let n = self.grid.len();
        if n > MAX_DENSE_NODES {
            return Err(Error::InvalidArgument(format!(
                "dense form limited to {MAX_DENSE_NODES} nodes, grid has {n}"
            )));
        }
        let mut dense = vec![0.0; n * n];
        let mut e = vec![0.0; n];
        for col in 0..n {
            e[col] = 1.0;
            let kc = self.apply_stiffness(&e);
            e[col] = 0.0;
            for row in 0..n {
                dense[row * n + col] = kc[row] / (self.mass(row) * self.mass(col)).sqrt();
            }
        }
        Ok(dense)
    }
}

/// Thomas algorithm for a symmetric tridiagonal system with constant off-diagonal.
fn thomas(diag: &[f64], off: f64, rhs: &[f64], cprime: &mut [f64], out: &mut [f64]) {
    let n = diag.len();
    cprime[0] = off / diag[0];
    out[0] = rhs[0] / diag[0];
    for i in 1..n {
        let m = diag[i] - off * cprime[i - 1];
        cprime[i] = off / m;
        out[i] = (rhs[i] - off * out[i - 1]) / m;
    }
    for i in (0..n - 1).rev() {
        out[i] -= cprime[i] * out[i + 1];
    }
}

/// Solves `Delta f = psi`. With Neumann conditions the weighted mean of `psi` is removed
/// first and reported, and `f` has zero weighted mean.
pub fn poisson_solve(op: &NeckOperator, psi: &ScalarField) -> Result<PoissonSolution> {
    let mut rhs = psi.values().to_vec();
    let scale: f64 = rhs.iter().enumerate().map(|(idx, v)| (op.mass(idx) * v).powi(2)).sum::<f64>().sqrt();
    let removed_mean = match op.bc {
        BoundaryCondition::Neumann => op.project_constants(&mut rhs),
        BoundaryCondition::Dirichlet => 0.0,
    };
    let b: Vec<f64> = rhs.iter().enumerate().map(|(idx, v)| op.mass(idx) * v).collect();
    let mut x = op.solve_stiffness(&b);
    // one step of iterative refinement
    let kx = op.apply_stiffness(&x);
    let r: Vec<f64> = b.iter().zip(&kx).map(|(a, c)| a - c).collect();
    let dx = op.solve_stiffness(&r);
    x.iter_mut().zip(&dx).for_each(|(a, d)| *a += d);
    let relative_residual = op.relative_residual(&x, &b, scale);
    if !(relative_residual <= 1e-10) {
        return Err(Error::NotConverged {
            method: "direct neck solve",
            iterations: 1,
            residual: relative_residual,
        });
    }
    Ok(PoissonSolution {
        field: psi.with_values(x)?,
        removed_mean,
        relative_residual,
    })
}

/// Smallest eigenvalue on the complement of the kernel by inverse iteration, deflating
/// constants under Neumann conditions.
pub fn first_eigenvalue(op: &NeckOperator) -> Result<SpectralResult> {
    first_eigenvalue_with(op, EIGEN_TOLERANCE, EIGEN_MAX_ITERATIONS)
}

pub fn first_eigenvalue_with(op: &NeckOperator, tol: f64, max_iter: usize) -> Result<SpectralResult> {
    let grid = op.grid().clone();
    let (nt, nk) = (grid.n_theta(), grid.n_kappa());
    // modes p and n - p share a radial block
    let mut best: Option<(f64, Vec<f64>, usize, usize, usize)> = None;
    for p in 0..=nt / 2 {
        for q in 0..=nk / 2 {
            let (lambda, v, it) = op.radial_eigen(p, q, tol, max_iter)?;
            if best.as_ref().map_or(true, |b| lambda < b.0) {
                best = Some((lambda, v, it, p, q));
            }
        }
    }
    let (_, radial, iterations, p, q) = best.expect("at least one Fourier mode");
    let mut phi: Vec<f64> = (0..grid.len())
        .map(|idx| {
            let (i, j, k) = grid.coords(idx);
            radial[i]
                * (TAU * (p * j) as f64 / nt as f64).cos()
                * (TAU * (q * k) as f64 / nk as f64).cos()
        })
        .collect();
    let n = op.norm(&phi);
    phi.iter_mut().for_each(|a| *a /= n);
    let kphi = op.apply_stiffness(&phi);
    let lambda1: f64 = kphi.iter().zip(&phi).map(|(a, b)| a * b).sum();
    let r: Vec<f64> = kphi
        .iter()
        .zip(&phi)
        .enumerate()
        .map(|(idx, (a, b))| a / op.mass(idx) - lambda1 * b)
        .collect();
    Ok(SpectralResult {
        lambda1,
        eigenfield: ScalarField::new(grid, phi)?,
        iterations,
        residual: op.norm(&r),
        bc: op.bc,
    })
}

/// Lower bounds on `|grad h| / |h|`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PoincareReport {
    /// Minimum ratio over the random fields and the eigenfield.
    pub min_ratio: f64,
    /// Ratio at the computed first eigenfield.
    pub eigen_ratio: f64,
    /// `sqrt(lambda_1)` for the same boundary condition.
    pub sqrt_lambda1: f64,
}

/// `|grad h|_{L^2} / |h|_{L^2}` over `trials` random compactly supported fields and the first
/// eigenfield, with `|grad h|^2 = <K h, h>`.
pub fn verify_poincare(op: &NeckOperator, trials: usize, seed: u64) -> Result<PoincareReport> {
    let eig = first_eigenvalue(op)?;
    let eigen_ratio = op.rayleigh_quotient(eig.eigenfield.values()).sqrt();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut min_ratio = eigen_ratio;
    for _ in 0..trials {
        let mut h = random_smooth_field(op.grid(), &mut rng, true)?.into_values();
        if op.bc == BoundaryCondition::Neumann {
            op.project_constants(&mut h);
        }
        if op.norm(&h) == 0.0 {
            continue;
        }
        min_ratio = min_ratio.min(op.rayleigh_quotient(&h).sqrt());
    }
    Ok(PoincareReport {
        min_ratio,
        eigen_ratio,
        sqrt_lambda1: eig.lambda1.sqrt(),
    })
}

fn random_mean_zero(op: &NeckOperator, rng: &mut ChaCha8Rng) -> Result<Option<ScalarField>> {
    let f = random_smooth_field(op.grid(), rng, false)?;
    let mut v = f.into_values();
    if op.bc == BoundaryCondition::Neumann {
        op.project_constants(&mut v);
    }
    if op.norm(&v) < 1e-12 {
        return Ok(None);
    }
    Ok(Some(ScalarField::new(op.grid().clone(), v)?))
}

/// The first eigenfield followed by `trials` random mean-zero sources.
fn test_sources(op: &NeckOperator, trials: usize, seed: u64) -> Result<Vec<ScalarField>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = vec![first_eigenvalue(op)?.eigenfield];
    for _ in 0..trials {
        if let Some(psi) = random_mean_zero(op, &mut rng)? {
            out.push(psi);
        }
    }
    Ok(out)
}

/// `max |f|_p / |psi|_p` with `Delta f = psi`, over the first eigenfield and random mean-zero
/// `psi`.
pub fn verify_lp_bound(op: &NeckOperator, p: f64, trials: usize, seed: u64) -> Result<f64> {
    if !(2.0..=4.0).contains(&p) {
        return Err(Error::InvalidArgument(format!("exponent must lie in [2, 4], got {p}")));
    }
    let mut worst: f64 = 0.0;
    for psi in test_sources(op, trials, seed)? {
        let f = poisson_solve(op, &psi)?.field;
        worst = worst.max(op.lp_norm(f.values(), p) / op.lp_norm(psi.values(), p));
    }
    Ok(worst)
}

/// Empirical constants of the elliptic estimates, over the same sources as
/// [`verify_lp_bound`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EllipticConstants {
    /// `max |f|_{L^2_2} / |psi|_{L^2}`.
    pub c22: f64,
    /// `max |f|_{L^2_4} / |psi|_{L^2_2}` with `|f|_{L^2_4} = |f|_{L^2_2} + |Delta f|_{L^2_2}`.
    pub c42: f64,
}

pub fn verify_elliptic_estimates(
    op: &NeckOperator,
    trials: usize,
    seed: u64,
    opts: NormOptions,
) -> Result<EllipticConstants> {
    let (mut c22, mut c42): (f64, f64) = (0.0, 0.0);
    for psi in test_sources(op, trials, seed)? {
        let f = poisson_solve(op, &psi)?.field;
        let f22 = norm_lp_k(&f, 2.0, 2, opts)?;
        let lap22 = norm_lp_k(&op.apply(&f)?, 2.0, 2, opts)?;
        c22 = c22.max(f22 / norm_lp_k(&psi, 2.0, 0, opts)?);
        c42 = c42.max((f22 + lap22) / norm_lp_k(&psi, 2.0, 2, opts)?);
    }
    Ok(EllipticConstants { c22, c42 })
}
