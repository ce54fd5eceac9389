//! Polar grid on the neck `{delta <= r <= sqrt(delta)} x S^1_kappa` with induced-volume
//! quadrature and finite-difference Sobolev norms.
//!
//! Radial cells are uniform in `s = ln r`, so each cell carries the same share of the scale
//! range. Nodes sit at cell centres; `theta` and `kappa` are uniform and periodic.

use std::f64::consts::TAU;
use std::io::Write;
use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};
use crate::gluing::{error_density, induced_metric, GluingConfig, MetricSample, NeckPoint};

pub const MIN_RESOLUTION: usize = 8;

const GAUSS_NODES: [f64; 5] = [
    -0.906_179_845_938_664,
    -0.538_469_310_105_683,
    0.0,
    0.538_469_310_105_683,
    0.906_179_845_938_664,
];
const GAUSS_WEIGHTS: [f64; 5] = [
    0.236_926_885_056_189_1,
    0.478_628_670_499_366_5,
    0.568_888_888_888_888_9,
    0.478_628_670_499_366_5,
    0.236_926_885_056_189_1,
];

/// Tensor grid on the neck with per-node volume weights.
#[derive(Clone, Debug)]
pub struct NeckGrid {
    cfg: GluingConfig,
    n_r: usize,
    n_theta: usize,
    n_kappa: usize,
    kappa_length: f64,
    s_min: f64,
    h_s: f64,
    r_nodes: Vec<f64>,
    theta_nodes: Vec<f64>,
    kappa_nodes: Vec<f64>,
    metric: Vec<MetricSample>,
    ring_weights: Vec<f64>,
}

/// Grid with `kappa` of length `2 pi`.
pub fn build_grid(cfg: &GluingConfig, n_r: usize, n_theta: usize, n_kappa: usize) -> Result<NeckGrid> {
    NeckGrid::new(cfg, n_r, n_theta, n_kappa, TAU)
}

impl NeckGrid {
    pub fn new(
        cfg: &GluingConfig,
        n_r: usize,
        n_theta: usize,
        n_kappa: usize,
        kappa_length: f64,
    ) -> Result<Self> {
        let delta = cfg.delta();
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::Config(format!("gluing parameter must lie in (0, 1), got {delta}")));
        }
        for (name, n) in [("n_r", n_r), ("n_theta", n_theta), ("n_kappa", n_kappa)] {
            if n < MIN_RESOLUTION {
                return Err(Error::Config(format!("{name} must be at least {MIN_RESOLUTION}, got {n}")));
            }
        }
        if !(kappa_length > 0.0 && kappa_length.is_finite()) {
            return Err(Error::Config(format!("kappa length must be positive, got {kappa_length}")));
        }
        let s_min = cfg.inner_radius().ln();
        let h_s = (cfg.outer_radius().ln() - s_min) / n_r as f64;
        let h_theta = TAU / n_theta as f64;
        let h_kappa = kappa_length / n_kappa as f64;
        let r_nodes: Vec<f64> = (0..n_r).map(|i| (s_min + (i as f64 + 0.5) * h_s).exp()).collect();
        let theta_nodes: Vec<f64> = (0..n_theta).map(|j| j as f64 * h_theta).collect();
        let kappa_nodes: Vec<f64> = (0..n_kappa).map(|k| k as f64 * h_kappa).collect();

        let mut metric = Vec::with_capacity(n_r * n_theta);
        let mut ring_weights = Vec::with_capacity(n_r * n_theta);
        for i in 0..n_r {
            let s0 = s_min + i as f64 * h_s;
            for &theta in &theta_nodes {
                metric.push(induced_metric(&NeckPoint::from_polar(r_nodes[i], theta, 0.0), cfg)?);
                let mut cell = 0.0;
                for (xg, wg) in GAUSS_NODES.iter().zip(GAUSS_WEIGHTS) {
                    let r = (s0 + 0.5 * h_s * (1.0 + xg)).exp();
                    let g = induced_metric(&NeckPoint::from_polar(r, theta, 0.0), cfg)?;
                    cell += wg * g.sqrt_det * r * r;
                }
                ring_weights.push(cell * 0.5 * h_s * h_theta * h_kappa);
            }
        }
        Ok(NeckGrid {
            cfg: *cfg,
            n_r,
            n_theta,
            n_kappa,
            kappa_length,
            s_min,
            h_s,
            r_nodes,
            theta_nodes,
            kappa_nodes,
            metric,
            ring_weights,
        })
    }

    pub fn config(&self) -> &GluingConfig {
        &self.cfg
    }

    pub fn n_r(&self) -> usize {
        self.n_r
    }

    pub fn n_theta(&self) -> usize {
        self.n_theta
    }

    pub fn n_kappa(&self) -> usize {
        self.n_kappa
    }

    pub fn len(&self) -> usize {
        self.n_r * self.n_theta * self.n_kappa
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn kappa_length(&self) -> f64 {
        self.kappa_length
    }

    pub fn s_min(&self) -> f64 {
        self.s_min
    }

    pub fn h_s(&self) -> f64 {
        self.h_s
    }

    pub fn h_theta(&self) -> f64 {
        TAU / self.n_theta as f64
    }

    pub fn h_kappa(&self) -> f64 {
        self.kappa_length / self.n_kappa as f64
    }

    pub fn r_nodes(&self) -> &[f64] {
        &self.r_nodes
    }

    pub fn theta_nodes(&self) -> &[f64] {
        &self.theta_nodes
    }

    pub fn kappa_nodes(&self) -> &[f64] {
        &self.kappa_nodes
    }

    /// Flat index of node `(i, j, k)`; `kappa` varies fastest.
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        (i * self.n_theta + j) * self.n_kappa + k
    }

    /// Inverse of [`NeckGrid::index`].
    pub fn coords(&self, idx: usize) -> (usize, usize, usize) {
        let k = idx % self.n_kappa;
        let ij = idx / self.n_kappa;
        (ij / self.n_theta, ij % self.n_theta, k)
    }

    pub fn point(&self, idx: usize) -> NeckPoint {
        let (i, j, k) = self.coords(idx);
        NeckPoint::from_polar(self.r_nodes[i], self.theta_nodes[j], self.kappa_nodes[k])
    }

    /// Induced metric at the node ring `(i, j)`.
    pub fn metric(&self, i: usize, j: usize) -> &MetricSample {
        &self.metric[i * self.n_theta + j]
    }

    /// Quadrature weight of node `idx`: the induced volume of its cell.
    pub fn weight(&self, idx: usize) -> f64 {
        self.ring_weights[idx / self.n_kappa]
    }

    pub fn weights(&self) -> Vec<f64> {
        (0..self.len()).map(|idx| self.weight(idx)).collect()
    }

    /// Induced volume of the neck.
    pub fn volume(&self) -> f64 {
        self.ring_weights.iter().sum::<f64>() * self.n_kappa as f64
    }

    /// Whether node `idx` lies in the first or last radial cell.
    pub fn on_boundary_ring(&self, idx: usize) -> bool {
        let (i, _, _) = self.coords(idx);
        i == 0 || i + 1 == self.n_r
    }

    /// `int f dvol` with 5-point Gauss-Legendre in each radial cell and the periodic rule in
    /// `theta` and `kappa`.
    pub fn integrate_fn<F: FnMut(NeckPoint) -> f64>(&self, mut f: F) -> f64 {
        let (h_theta, h_kappa) = (self.h_theta(), self.h_kappa());
        let mut total = 0.0;
        for i in 0..self.n_r {
            let s0 = self.s_min + i as f64 * self.h_s;
            for (xg, wg) in GAUSS_NODES.iter().zip(GAUSS_WEIGHTS) {
                let r = (s0 + 0.5 * self.h_s * (1.0 + xg)).exp();
                for &theta in &self.theta_nodes {
                    let g = induced_metric(&NeckPoint::from_polar(r, theta, 0.0), &self.cfg)
                        .expect("quadrature radius lies in the graph region");
                    let w = wg * 0.5 * self.h_s * g.sqrt_det * r * r * h_theta * h_kappa;
                    for &kappa in &self.kappa_nodes {
                        total += w * f(NeckPoint::from_polar(r, theta, kappa));
                    }
                }
            }
        }
        total
    }
}

/// Real samples on the nodes of a neck grid.
#[derive(Clone, Debug)]
pub struct ScalarField {
    grid: Arc<NeckGrid>,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(grid: Arc<NeckGrid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::InvalidArgument(format!(
                "field has {} values but the grid has {} nodes",
                values.len(),
                grid.len()
            )));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!("field value at node {pos} is not finite")));
        }
        Ok(ScalarField { grid, values })
    }

    pub fn zeros(grid: Arc<NeckGrid>) -> Self {
        Self::constant(grid, 0.0)
    }

    pub fn constant(grid: Arc<NeckGrid>, c: f64) -> Self {
        let n = grid.len();
        ScalarField { grid, values: vec![c; n] }
    }

    pub fn from_fn<F: Fn(NeckPoint) -> f64>(grid: Arc<NeckGrid>, f: F) -> Result<Self> {
        let values = (0..grid.len()).map(|idx| f(grid.point(idx))).collect();
        Self::new(grid, values)
    }

    pub fn try_from_fn<F: Fn(NeckPoint) -> Result<f64>>(grid: Arc<NeckGrid>, f: F) -> Result<Self> {
        let values = (0..grid.len()).map(|idx| f(grid.point(idx))).collect::<Result<Vec<_>>>()?;
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &Arc<NeckGrid> {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn with_values(&self, values: Vec<f64>) -> Result<Self> {
        Self::new(self.grid.clone(), values)
    }

    pub fn map<F: Fn(f64) -> f64>(&self, f: F) -> Result<Self> {
        self.with_values(self.values.iter().map(|&v| f(v)).collect())
    }

    fn check_same_grid(&self, other: &ScalarField) -> Result<()> {
        if self.len() != other.len() {
            return Err(Error::InvalidArgument("fields live on different grids".into()));
        }
        Ok(())
    }

    /// `self + a * other`.
    pub fn axpy(&self, a: f64, other: &ScalarField) -> Result<Self> {
        self.check_same_grid(other)?;
        self.with_values(self.values.iter().zip(&other.values).map(|(x, y)| x + a * y).collect())
    }

    pub fn scale(&self, a: f64) -> Self {
        ScalarField {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| a * v).collect(),
        }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `int f dvol` with the node weights.
    pub fn integral(&self) -> f64 {
        self.values.iter().enumerate().map(|(idx, v)| self.grid.weight(idx) * v).sum()
    }

    pub fn mean(&self) -> f64 {
        self.integral() / self.grid.volume()
    }

    /// Weighted `L^2` norm with the node weights.
    pub fn l2(&self) -> f64 {
        self.values
            .iter()
            .enumerate()
            .map(|(idx, v)| self.grid.weight(idx) * v * v)
            .sum::<f64>()
            .sqrt()
    }

    /// Writes `r, theta, kappa, value, weight` rows with 17 significant digits.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "r,theta,kappa,value,weight")?;
        let g = &self.grid;
        for (idx, v) in self.values.iter().enumerate() {
            let (i, j, k) = g.coords(idx);
            writeln!(
                out,
                "{:.16e},{:.16e},{:.16e},{:.16e},{:.16e}",
                g.r_nodes[i],
                g.theta_nodes[j],
                g.kappa_nodes[k],
                v,
                g.weight(idx)
            )?;
        }
        Ok(())
    }
}

/// Random smooth field built from a few separable modes. With `compact` the radial factor
/// carries `sin^2(pi t)`, `t` the normalised log-radius, so the field and its radial
/// derivative vanish at both ends of the neck.
pub fn random_smooth_field<R: Rng>(grid: &Arc<NeckGrid>, rng: &mut R, compact: bool) -> Result<ScalarField> {
    struct Mode {
        amp: f64,
        n: f64,
        p: f64,
        q: f64,
        phases: [f64; 3],
    }
    let modes: Vec<Mode> = (0..4)
        .map(|_| Mode {
            amp: rng.gen_range(-1.0..1.0),
            n: rng.gen_range(0..4) as f64,
            p: rng.gen_range(0..4) as f64,
            q: rng.gen_range(0..4) as f64,
            phases: [rng.gen_range(0.0..TAU), rng.gen_range(0.0..TAU), rng.gen_range(0.0..TAU)],
        })
        .collect();
    let (s_min, width) = (grid.s_min(), grid.h_s() * grid.n_r() as f64);
    let kappa_freq = TAU / grid.kappa_length();
    ScalarField::from_fn(grid.clone(), |pt| {
        let t = (pt.radius().ln() - s_min) / width;
        let (theta, kappa) = (pt.y.atan2(pt.x), pt.kappa);
        let envelope = if compact {
            (std::f64::consts::PI * t).sin().powi(2)
        } else {
            1.0
        };
        envelope
            * modes
                .iter()
                .map(|m| {
                    m.amp
                        * (m.n * std::f64::consts::PI * t + m.phases[0]).cos()
                        * (m.p * theta + m.phases[1]).cos()
                        * (m.q * kappa_freq * kappa + m.phases[2]).cos()
                })
                .sum::<f64>()
    })
}

/// How derivatives enter Sobolev norms.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum DerivativeMode {
    /// Each index is divided by the length of its coordinate vector in the induced metric.
    #[default]
    MetricAware,
    /// Plain coordinate derivatives in `(x, y, kappa)`.
    Raw,
}

/// Treatment of the first and last radial cells in derivative terms.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum BoundaryRing {
    #[default]
    Exclude,
    OneSided,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub struct NormOptions {
    pub mode: DerivativeMode,
    pub boundary: BoundaryRing,
}

impl NormOptions {
    pub fn one_sided() -> Self {
        NormOptions {
            boundary: BoundaryRing::OneSided,
            ..NormOptions::default()
        }
    }

    pub fn describe(&self) -> String {
        let mode = match self.mode {
            DerivativeMode::MetricAware => "metric_aware",
            DerivativeMode::Raw => "raw",
        };
        let ring = match self.boundary {
            BoundaryRing::Exclude => "boundary_ring_excluded",
            BoundaryRing::OneSided => "boundary_one_sided",
        };
        format!("{mode};{ring}")
    }
}

/// Cartesian first and second derivatives in `(x, y, kappa)` at every node.
/// Hessian entries are stored as `[xx, yy, kk, xy, xk, yk]`.
#[derive(Clone, Debug)]
pub struct FieldDerivatives {
    pub grad: Vec<[f64; 3]>,
    pub hess: Vec<[f64; 6]>,
}

/// Second-order finite differences in `(s, theta, kappa)` mapped to Cartesian derivatives.
/// The first and last radial cells use one-sided stencils.
pub fn derivatives(f: &ScalarField) -> FieldDerivatives {
    let g = f.grid();
    let (nr, nt, nk) = (g.n_r(), g.n_theta(), g.n_kappa());
    let (hs, ht, hk) = (g.h_s(), g.h_theta(), g.h_kappa());
    let v = f.values();
    let at = |i: usize, j: usize, k: usize| v[g.index(i, j % nt, k % nk)];

    // d/ds and d2/ds2 of any node function along i
    let ds = |i: usize, h: &dyn Fn(usize) -> f64| -> (f64, f64) {
        if i == 0 {
            let (a, b, c, d) = (h(0), h(1), h(2), h(3));
            ((-3.0 * a + 4.0 * b - c) / (2.0 * hs), (2.0 * a - 5.0 * b + 4.0 * c - d) / (hs * hs))
        } else if i + 1 == nr {
            let (a, b, c, d) = (h(i), h(i - 1), h(i - 2), h(i - 3));
            ((3.0 * a - 4.0 * b + c) / (2.0 * hs), (2.0 * a - 5.0 * b + 4.0 * c - d) / (hs * hs))
        } else {
            let (a, b, c) = (h(i - 1), h(i), h(i + 1));
            ((c - a) / (2.0 * hs), (c - 2.0 * b + a) / (hs * hs))
        }
    };

    let mut grad = vec![[0.0; 3]; g.len()];
    let mut hess = vec![[0.0; 6]; g.len()];
    for i in 0..nr {
        let r = g.r_nodes()[i];
        for j in 0..nt {
            let (sn, cs) = g.theta_nodes()[j].sin_cos();
            for k in 0..nk {
                let (jp, jm, kp, km) = (j + 1, j + nt - 1, k + 1, k + nk - 1);
                let (f_s, f_ss) = ds(i, &|ii| at(ii, j, k));
                let d_theta = |ii: usize| (at(ii, jp, k) - at(ii, jm, k)) / (2.0 * ht);
                let d_kappa = |ii: usize| (at(ii, j, kp) - at(ii, j, km)) / (2.0 * hk);
                let f_t = d_theta(i);
                let f_k = d_kappa(i);
                let f_tt = (at(i, jp, k) - 2.0 * at(i, j, k) + at(i, jm, k)) / (ht * ht);
                let f_kk = (at(i, j, kp) - 2.0 * at(i, j, k) + at(i, j, km)) / (hk * hk);
                let f_st = ds(i, &d_theta).0;
                let f_sk = ds(i, &d_kappa).0;
                let f_tk = (at(i, jp, kp) - at(i, jp, km) - at(i, jm, kp) + at(i, jm, km)) / (4.0 * ht * hk);

                let idx = g.index(i, j, k);
                grad[idx] = [(cs * f_s - sn * f_t) / r, (sn * f_s + cs * f_t) / r, f_k];
                let h_rr = (f_ss - f_s) / (r * r);
                let h_tt = (f_tt + f_s) / (r * r);
                let h_rt = (f_st - f_t) / (r * r);
                hess[idx] = [
                    cs * cs * h_rr - 2.0 * cs * sn * h_rt + sn * sn * h_tt,
                    sn * sn * h_rr + 2.0 * cs * sn * h_rt + cs * cs * h_tt,
                    f_kk,
                    cs * sn * (h_rr - h_tt) + (cs * cs - sn * sn) * h_rt,
                    (cs * f_sk - sn * f_tk) / r,
                    (sn * f_sk + cs * f_tk) / r,
                ];
            }
        }
    }
    FieldDerivatives { grad, hess }
}

/// `int |D^m f|^p dvol` for `m = 0, 1, 2`, with the derivative sums taken over ordered index
/// tuples.
pub fn sobolev_parts(f: &ScalarField, p: f64, opts: NormOptions) -> Result<[f64; 3]> {
    check_exponent(p)?;
    let g = f.grid();
    let d = derivatives(f);
    let mut parts = [0.0; 3];
    for idx in 0..g.len() {
        let w = g.weight(idx);
        parts[0] += w * f.values()[idx].abs().powf(p);
        if opts.boundary == BoundaryRing::Exclude && g.on_boundary_ring(idx) {
            continue;
        }
        let sc = match opts.mode {
            DerivativeMode::Raw => [1.0; 3],
            DerivativeMode::MetricAware => {
                let (i, j, _) = g.coords(idx);
                let m = g.metric(i, j);
                [1.0 / m.g11.sqrt(), 1.0 / m.g22.sqrt(), 1.0 / m.g33.sqrt()]
            }
        };
        let gr = d.grad[idx];
        parts[1] += w * (0..3).map(|a| (gr[a] * sc[a]).abs().powf(p)).sum::<f64>();
        let h = d.hess[idx];
        let diag = (h[0] * sc[0] * sc[0]).abs().powf(p)
            + (h[1] * sc[1] * sc[1]).abs().powf(p)
            + (h[2] * sc[2] * sc[2]).abs().powf(p);
        let off = (h[3] * sc[0] * sc[1]).abs().powf(p)
            + (h[4] * sc[0] * sc[2]).abs().powf(p)
            + (h[5] * sc[1] * sc[2]).abs().powf(p);
        parts[2] += w * (diag + 2.0 * off);
    }
    Ok(parts)
}

fn check_exponent(p: f64) -> Result<()> {
    if !(p >= 1.0 && p.is_finite()) {
        return Err(Error::InvalidArgument(format!("norm exponent must be >= 1, got {p}")));
    }
    Ok(())
}

/// Weighted Sobolev norm `(int sum_{|nu| <= k} |D^nu f|^p dvol)^(1/p)`.
pub fn norm_lp_k(f: &ScalarField, p: f64, k: usize, opts: NormOptions) -> Result<f64> {
    check_exponent(p)?;
    if k > 2 {
        return Err(Error::InvalidArgument(format!("derivative order must be at most 2, got {k}")));
    }
    if k == 0 {
        let s: f64 = f
            .values()
            .iter()
            .enumerate()
            .map(|(idx, v)| f.grid().weight(idx) * v.abs().powf(p))
            .sum();
        return Ok(s.powf(1.0 / p));
    }
    let parts = sobolev_parts(f, p, opts)?;
    Ok(parts[..=k].iter().sum::<f64>().powf(1.0 / p))
}

/// Components of the `L^2_2` norm of the error density.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ErrorNorm {
    /// `L^2` norm from Gauss-Legendre quadrature of the closed-form density.
    pub l2: f64,
    /// `L^2` norm of the metric-aware gradient of the sampled density.
    pub l2_grad: f64,
    /// `L^2` norm of the metric-aware Hessian of the sampled density.
    pub l2_hess: f64,
}

impl ErrorNorm {
    pub fn total(&self) -> f64 {
        (self.l2 * self.l2 + self.l2_grad * self.l2_grad + self.l2_hess * self.l2_hess).sqrt()
    }
}

/// The error density sampled on the grid nodes.
pub fn error_field(grid: &Arc<NeckGrid>) -> Result<ScalarField> {
    let cfg = *grid.config();
    ScalarField::try_from_fn(grid.clone(), |p| error_density(&p, &cfg))
}

pub fn error_norm(cfg: &GluingConfig, grid: &Arc<NeckGrid>) -> Result<ErrorNorm> {
    if cfg != grid.config() {
        return Err(Error::InvalidArgument("grid was built for a different configuration".into()));
    }
    let l2 = grid
        .integrate_fn(|p| error_density(&p, cfg).map(|e| e * e).unwrap_or(f64::NAN))
        .sqrt();
    if !l2.is_finite() {
        return Err(Error::Domain("error density undefined on the grid".into()));
    }
    let parts = sobolev_parts(&error_field(grid)?, 2.0, NormOptions::default())?;
    Ok(ErrorNorm {
        l2,
        l2_grad: parts[1].sqrt(),
        l2_hess: parts[2].sqrt(),
    })
}
