//! Special Lagrangian equation for graphs over the neck and its fixed-point solver.
//!
//! A deformation by the gradient of a potential `F` is special Lagrangian when
//!
//! `R(F) = Delta G + (1 - det Hess G) Delta F + Delta G (F_xy^2 - F_xx F_yy) = 0`
//!
//! where `G` is the gluing potential. `Delta F` is taken as `-A F` with `A` the neck
//! Laplace-Beltrami operator under Dirichlet conditions, and `Hess F` is the chart Hessian
//! in `(x, y)`. With `m = 1 - det Hess G` the equation is the fixed point of
//! `W(h) = A^-1 [Delta G (1 + Q(h)) / m]`, `Q(h) = h_xy^2 - h_xx h_yy`, and
//! `R(h) = m A (W(h) - h)`.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::exterior::{evaluate, holomorphic_three_form, ComplexStructure, Vec6};
use crate::gluing::{frame_from_jet, GluingConfig, GraphJet, NeckPoint};
use crate::neck_grid::{
    derivatives, norm_lp_k, random_smooth_field, NeckGrid, NormOptions, ScalarField,
};
use crate::spectral::{assemble, poisson_solve, BoundaryCondition, NeckOperator, OperatorKind};

/// Scalar potential of a Hamiltonian deformation.
#[derive(Clone, Debug)]
pub struct GraphPotential {
    field: ScalarField,
}

impl GraphPotential {
    pub fn new(field: ScalarField) -> Self {
        GraphPotential { field }
    }

    pub fn zero(grid: Arc<NeckGrid>) -> Self {
        GraphPotential {
            field: ScalarField::zeros(grid),
        }
    }

    pub fn field(&self) -> &ScalarField {
        &self.field
    }

    pub fn into_field(self) -> ScalarField {
        self.field
    }

    pub fn scaled(&self, s: f64) -> Self {
        GraphPotential {
            field: self.field.scale(s),
        }
    }
}

/// Residual of the special Lagrangian equation and its three parts.
#[derive(Clone, Debug)]
pub struct ResidualReport {
    pub residual_field: ScalarField,
    pub l2_norm: f64,
    pub inhomogeneous_norm: f64,
    pub linear_part_norm: f64,
    pub nonlinear_part_norm: f64,
}

/// One row of the fixed-point trace.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceRow {
    pub iter: usize,
    /// `|h_k - h_{k-1}|_{L^2_2}`.
    pub step_norm: f64,
    pub residual_l2: f64,
    /// `step_k / step_{k-1}`; NaN on the first step.
    pub contraction_ratio: f64,
}

#[derive(Clone, Debug)]
pub struct SolveOutcome {
    pub potential: GraphPotential,
    pub report: ResidualReport,
    pub trace: Vec<TraceRow>,
    /// `|W(0)|_{L^2_2}`.
    pub first_correction: f64,
    /// `|h*|_{L^2_2}`.
    pub solution_norm: f64,
    pub initial_residual: f64,
    pub multiplier_range: (f64, f64),
}

/// Nodal data of the equation on one grid.
#[derive(Clone, Debug)]
pub struct SlagProblem {
    grid: Arc<NeckGrid>,
    op: NeckOperator,
    lap_g: Vec<f64>,
    multiplier: Vec<f64>,
    opts: NormOptions,
}

fn node_jet(p: &NeckPoint, cfg: &GluingConfig) -> Result<GraphJet> {
    GraphJet::radial(p, cfg)
}

/// `F_xy^2 - F_xx F_yy` from chart Hessians.
fn quadratic_values(f: &ScalarField) -> Vec<f64> {
    derivatives(f).hess.iter().map(quadratic_term).collect()
}

/// `F_xy^2 - F_xx F_yy` for a Hessian stored as `[xx, yy, kk, xy, xk, yk]`.
pub fn quadratic_term(h: &[f64; 6]) -> f64 {
    h[3] * h[3] - h[0] * h[1]
}

impl SlagProblem {
    pub fn new(cfg: &GluingConfig, grid: &Arc<NeckGrid>) -> Result<Self> {
        if cfg != grid.config() {
            return Err(Error::InvalidArgument("grid was built for a different configuration".into()));
        }
        let op = assemble(grid, cfg, OperatorKind::LaplaceBeltrami, BoundaryCondition::Dirichlet)?;
        let mut lap_g = Vec::with_capacity(grid.len());
        let mut multiplier = Vec::with_capacity(grid.len());
        for idx in 0..grid.len() {
            let jet = node_jet(&grid.point(idx), cfg)?;
            lap_g.push(jet.laplacian());
            multiplier.push(1.0 - jet.hessian_det());
        }
        Ok(SlagProblem {
            grid: grid.clone(),
            op,
            lap_g,
            multiplier,
            opts: NormOptions::default(),
        })
    }

    pub fn with_norm_options(mut self, opts: NormOptions) -> Self {
        self.opts = opts;
        self
    }

    pub fn grid(&self) -> &Arc<NeckGrid> {
        &self.grid
    }

    pub fn operator(&self) -> &NeckOperator {
        &self.op
    }

    /// `Delta G` at the nodes.
    pub fn inhomogeneous(&self) -> ScalarField {
        ScalarField::new(self.grid.clone(), self.lap_g.clone()).expect("finite nodal data")
    }

    /// `1 - det Hess G` at the nodes.
    pub fn multiplier(&self) -> ScalarField {
        ScalarField::new(self.grid.clone(), self.multiplier.clone()).expect("finite nodal data")
    }

    pub fn multiplier_range(&self) -> (f64, f64) {
        self.multiplier
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &m| (lo.min(m), hi.max(m)))
    }

    /// `L^2_2` norm used by the fixed-point loop.
    pub fn norm22(&self, f: &ScalarField) -> Result<f64> {
        norm_lp_k(f, 2.0, 2, self.opts)
    }

    pub fn residual(&self, f: &GraphPotential) -> Result<ResidualReport> {
        let field = f.field();
        let af = self.op.apply(field)?;
        let q = quadratic_values(field);
        let n = self.grid.len();
        let mut linear = Vec::with_capacity(n);
        let mut nonlinear = Vec::with_capacity(n);
        let mut total = Vec::with_capacity(n);
        for idx in 0..n {
            let lin = -self.multiplier[idx] * af.values()[idx];
            let non = self.lap_g[idx] * q[idx];
            linear.push(lin);
            nonlinear.push(non);
            total.push(self.lap_g[idx] + lin + non);
        }
        let l2 = |v: Vec<f64>| field.with_values(v).map(|s| s.l2());
        let residual_field = field.with_values(total)?;
        Ok(ResidualReport {
            l2_norm: residual_field.l2(),
            residual_field,
            inhomogeneous_norm: self.inhomogeneous().l2(),
            linear_part_norm: l2(linear)?,
            nonlinear_part_norm: l2(nonlinear)?,
        })
    }

    /// Derivative of the residual at `f0`.
    pub fn linearization(&self, f0: &GraphPotential) -> Linearization<'_> {
        Linearization {
            problem: self,
            base_hessian: derivatives(f0.field()).hess,
        }
    }

    /// One application of `W`.
    pub fn contraction_step(&self, h: &GraphPotential) -> Result<GraphPotential> {
        let q = quadratic_values(h.field());
        let rhs: Vec<f64> = (0..self.grid.len())
            .map(|idx| self.lap_g[idx] * (1.0 + q[idx]) / self.multiplier[idx])
            .collect();
        let psi = ScalarField::new(self.grid.clone(), rhs)?;
        Ok(GraphPotential::new(poisson_solve(&self.op, &psi)?.field))
    }

    /// Largest observed `|W(a) - W(b)| / ((|a| + |b|) |a - b|)` over random pairs of size
    /// about `scale` in `L^2_2`.
    pub fn quadratic_constant(&self, pairs: usize, scale: f64, seed: u64) -> Result<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut worst: f64 = 0.0;
        for _ in 0..pairs {
            let mut draw = || -> Result<ScalarField> {
                let f = random_smooth_field(&self.grid, &mut rng, true)?;
                let n = self.norm22(&f)?;
                Ok(f.scale(scale / n))
            };
            let (a, b) = (draw()?, draw()?);
            let wa = self.contraction_step(&GraphPotential::new(a.clone()))?;
            let wb = self.contraction_step(&GraphPotential::new(b.clone()))?;
            let num = self.norm22(&wa.field().axpy(-1.0, wb.field())?)?;
            let den = (self.norm22(&a)? + self.norm22(&b)?) * self.norm22(&a.axpy(-1.0, &b)?)?;
            if den > 0.0 {
                worst = worst.max(num / den);
            }
        }
        Ok(worst)
    }

    /// Iterates `h_{k+1} = W(h_k)` from `h_0 = 0` until `|h_{k+1} - h_k|_{L^2_2} <= tol` or the
    /// step reaches rounding level relative to `|h|`.
    pub fn solve(&self, max_iters: usize, tol: f64) -> Result<SolveOutcome> {
        let (m_lo, m_hi) = self.multiplier_range();
        if !(m_lo > 0.0) {
            return Err(Error::ContractionFailure {
                step: 0,
                ratio: f64::INFINITY,
                first_correction: f64::NAN,
                multiplier_min: m_lo,
                multiplier_max: m_hi,
            });
        }
        let zero = GraphPotential::zero(self.grid.clone());
        let initial_residual = self.residual(&zero)?.l2_norm;
        let mut h = zero;
        let mut trace = Vec::new();
        let mut first_correction = f64::NAN;
        let mut prev_step = f64::NAN;
        for iter in 1..=max_iters {
            let next = self.contraction_step(&h)?;
            let step = self.norm22(&next.field().axpy(-1.0, h.field())?)?;
            if iter == 1 {
                first_correction = step;
            }
            let ratio = if iter == 1 { f64::NAN } else { step / prev_step };
            h = next;
            let report = self.residual(&h)?;
            trace.push(TraceRow {
                iter,
                step_norm: step,
                residual_l2: report.l2_norm,
                contraction_ratio: ratio,
            });
            let h_norm = self.norm22(h.field())?;
            // steps at rounding level carry no contraction information
            let settled = step <= tol || step <= 1e3 * f64::EPSILON * h_norm;
            if ratio >= 1.0 && !settled {
                return Err(Error::ContractionFailure {
                    step: iter,
                    ratio,
                    first_correction,
                    multiplier_min: m_lo,
                    multiplier_max: m_hi,
                });
            }
            if settled {
                return Ok(SolveOutcome {
                    potential: h,
                    report,
                    trace,
                    first_correction,
                    solution_norm: h_norm,
                    initial_residual,
                    multiplier_range: (m_lo, m_hi),
                });
            }
            prev_step = step;
        }
        Err(Error::NotConverged {
            method: "fixed-point iteration",
            iterations: max_iters,
            residual: prev_step,
        })
    }
}

/// `h -> -m A h + Delta G (2 F0_xy h_xy - F0_xx h_yy - h_xx F0_yy)`.
pub struct Linearization<'a> {
    problem: &'a SlagProblem,
    base_hessian: Vec<[f64; 6]>,
}

impl Linearization<'_> {
    pub fn apply(&self, h: &ScalarField) -> Result<ScalarField> {
        let p = self.problem;
        let ah = p.op.apply(h)?;
        let dh = derivatives(h).hess;
        let v = (0..p.grid.len())
            .map(|idx| {
                let (b, d) = (self.base_hessian[idx], dh[idx]);
                -p.multiplier[idx] * ah.values()[idx]
                    + p.lap_g[idx] * (2.0 * b[3] * d[3] - b[0] * d[1] - d[0] * b[1])
            })
            .collect();
        h.with_values(v)
    }
}

/// Convenience wrapper: residual of `f` on a fresh problem.
pub fn slag_residual(f: &GraphPotential, cfg: &GluingConfig, grid: &Arc<NeckGrid>) -> Result<ResidualReport> {
    SlagProblem::new(cfg, grid)?.residual(f)
}

/// `int |det Hess G|^2 dvol` over the neck.
pub fn det_hess_bound_check(cfg: &GluingConfig, grid: &NeckGrid) -> Result<f64> {
    if cfg != grid.config() {
        return Err(Error::InvalidArgument("grid was built for a different configuration".into()));
    }
    let mut err = None;
    let value = grid.integrate_fn(|p| match node_jet(&p, cfg) {
        Ok(j) => j.hessian_det().powi(2),
        Err(e) => {
            err.get_or_insert(e);
            0.0
        }
    });
    match err {
        Some(e) => Err(e),
        None => Ok(value),
    }
}

/// `Im xi` on the frame deformed by a normal field `S`: `E'_a = E_a + sum_b S_ab J E_b` for
/// `a, b` in the chart directions, with `E` the tangent frame of the graph described by `jet`.
pub fn deformed_frame_residual(jet: &GraphJet, s: [[f64; 2]; 2]) -> f64 {
    let j = ComplexStructure::standard();
    let frame = frame_from_jet(jet);
    let je = [j.apply(&frame.e1), j.apply(&frame.e2)];
    let shift = |row: [f64; 2]| -> Vec6 { row[0] * je[0] + row[1] * je[1] };
    let e1 = frame.e1 + shift(s[0]);
    let e2 = frame.e2 + shift(s[1]);
    let (_, im) = holomorphic_three_form();
    evaluate(&im, &[e1, e2, frame.e3]).expect("3-form on three vectors")
}

/// `Delta G + (1 - det Hess G) tr S + Delta G (S_12^2 - S_11 S_22)`.
pub fn compact_residual(jet: &GraphJet, s: [[f64; 2]; 2]) -> f64 {
    let lap = jet.laplacian();
    lap + (1.0 - jet.hessian_det()) * (s[0][0] + s[1][1]) + lap * (s[0][1] * s[1][0] - s[0][0] * s[1][1])
}
