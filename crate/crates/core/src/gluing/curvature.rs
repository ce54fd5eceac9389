//! Leading terms of the mean curvature of the neck around a curve `K`.
//!
//! The neck sits in the family `(t, z1, z2) -> c(t) + z1 V1(t) + z2 V2(t)`. Only the two
//! displayed orders are evaluated:
//!
//! `H = (c'' + z1 V1'') / (1 + |z1|^2) + delta^2 (-Z c'' + V2'' / (z1 (1 + |z1|^2)))`
//!
//! and the `O(delta^4)` remainder is dropped.

use num_complex::Complex64;

use super::cutoff::GluingConfig;
use super::NeckPoint;
use crate::error::{Error, Result};
use crate::neck_grid::NeckGrid;

/// A vector in C^3.
pub type C3 = [Complex64; 3];

fn scale(a: Complex64, v: C3) -> C3 {
    v.map(|x| a * x)
}

fn add(a: C3, b: C3) -> C3 {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

fn norm_sqr(v: &C3) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

/// Second derivatives of the core curve and its complex normal frame.
pub trait CurveModel {
    fn c_second(&self, t: f64) -> C3;
    fn v1_second(&self, t: f64) -> C3;
    fn v2_second(&self, t: f64) -> C3;
    /// Bound for the bounded coefficient `Z` multiplying `c''` at order `delta^2`.
    fn bound_z(&self) -> f64;
}

/// Straight core with parallel frames: every displayed term vanishes.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StraightLine {
    bound_z: f64,
}

impl StraightLine {
    pub fn new(bound_z: f64) -> Result<Self> {
        check_bound(bound_z)?;
        Ok(StraightLine { bound_z })
    }
}

impl CurveModel for StraightLine {
    fn c_second(&self, _t: f64) -> C3 {
        [Complex64::new(0.0, 0.0); 3]
    }
    fn v1_second(&self, _t: f64) -> C3 {
        [Complex64::new(0.0, 0.0); 3]
    }
    fn v2_second(&self, _t: f64) -> C3 {
        [Complex64::new(0.0, 0.0); 3]
    }
    fn bound_z(&self) -> f64 {
        self.bound_z
    }
}

/// Unit-speed circle `c(t) = R (cos(t/R), sin(t/R), 0)` with `V1 = (0, 0, 1)` and
/// `V2 = i (cos(t/R), sin(t/R), 0)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PlanarCircle {
    radius: f64,
    bound_z: f64,
}

impl PlanarCircle {
    pub fn new(radius: f64, bound_z: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidArgument(format!("circle radius must be positive, got {radius}")));
        }
        check_bound(bound_z)?;
        Ok(PlanarCircle { radius, bound_z })
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }
}

impl CurveModel for PlanarCircle {
    fn c_second(&self, t: f64) -> C3 {
        let a = t / self.radius;
        let k = -1.0 / self.radius;
        [Complex64::new(k * a.cos(), 0.0), Complex64::new(k * a.sin(), 0.0), Complex64::new(0.0, 0.0)]
    }
    fn v1_second(&self, _t: f64) -> C3 {
        [Complex64::new(0.0, 0.0); 3]
    }
    fn v2_second(&self, t: f64) -> C3 {
        let a = t / self.radius;
        let k = -1.0 / (self.radius * self.radius);
        [Complex64::new(0.0, k * a.cos()), Complex64::new(0.0, k * a.sin()), Complex64::new(0.0, 0.0)]
    }
    fn bound_z(&self) -> f64 {
        self.bound_z
    }
}

fn check_bound(bound_z: f64) -> Result<()> {
    if !(bound_z >= 0.0 && bound_z.is_finite()) {
        return Err(Error::InvalidArgument(format!("bound for Z must be finite and >= 0, got {bound_z}")));
    }
    Ok(())
}

/// The two displayed orders of the mean curvature vector at one point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MeanCurvatureSample {
    pub leading: C3,
    pub correction: C3,
}

impl MeanCurvatureSample {
    pub fn total(&self) -> C3 {
        add(self.leading, self.correction)
    }

    pub fn norm(&self) -> f64 {
        norm_sqr(&self.total()).sqrt()
    }

    pub fn leading_norm(&self) -> f64 {
        norm_sqr(&self.leading).sqrt()
    }
}

/// Evaluates the displayed mean-curvature expansion at `p`, with `t = kappa` and `z1 = x + i y`.
pub fn mean_curvature_leading(
    p: &NeckPoint,
    curve: &dyn CurveModel,
    cfg: &GluingConfig,
) -> Result<MeanCurvatureSample> {
    let z1 = Complex64::new(p.x, p.y);
    if z1.norm() == 0.0 {
        return Err(Error::Domain("mean curvature expansion is singular at z1 = 0".into()));
    }
    let t = p.kappa;
    let c2 = curve.c_second(t);
    let denom = 1.0 + z1.norm_sqr();
    let leading = scale(Complex64::new(1.0 / denom, 0.0), add(c2, scale(z1, curve.v1_second(t))));
    let delta2 = cfg.delta() * cfg.delta();
    let correction = scale(
        Complex64::new(delta2, 0.0),
        add(
            scale(Complex64::new(-curve.bound_z(), 0.0), c2),
            scale(1.0 / (z1 * denom), curve.v2_second(t)),
        ),
    );
    Ok(MeanCurvatureSample { leading, correction })
}

/// `int |H|^2 dvol` over the neck grid.
pub fn mean_curvature_l2_squared(curve: &dyn CurveModel, grid: &NeckGrid) -> Result<f64> {
    let cfg = *grid.config();
    let mut err = None;
    let value = grid.integrate_fn(|p| match mean_curvature_leading(&p, curve, &cfg) {
        Ok(h) => h.norm().powi(2),
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
