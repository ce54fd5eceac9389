//! Local model of the glued neck `H_delta`.
//!
//! Over the `z1 = x + i y` plane the glued piece is the graph `(x, y) -> (u, v)` with
//! `u = delta^2 beta x / (2 r^2)` and `v = delta^2 beta y / (2 r^2)`, so that
//! `z1 * conj(z2) = beta delta^2 / 2`. `(u, v)` is the gradient of a potential `G`; every
//! quantity below is built from the first partials of `(u, v)`, i.e. from `Hess G`.

mod chart;
mod curvature;
mod cutoff;

pub use chart::{chart_point, ChartPoint, NeckSide};
pub use curvature::{
    mean_curvature_l2_squared, mean_curvature_leading, CurveModel, MeanCurvatureSample,
    PlanarCircle, StraightLine, C3,
};
pub use cutoff::{blend_bands, cutoff_beta, Cutoff, CutoffSample, GluingConfig, BLEND_FRACTION};

use crate::error::{Error, Result};
use crate::exterior::{evaluate, holomorphic_three_form, standard_symplectic_form, KForm, Vec6};

/// A point of the neck chart: `z1 = x + i y` and the coordinate `kappa` along `K`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NeckPoint {
    pub x: f64,
    pub y: f64,
    pub kappa: f64,
}

impl NeckPoint {
    pub fn new(x: f64, y: f64, kappa: f64) -> Self {
        NeckPoint { x, y, kappa }
    }

    pub fn from_polar(r: f64, theta: f64, kappa: f64) -> Self {
        NeckPoint {
            x: r * theta.cos(),
            y: r * theta.sin(),
            kappa,
        }
    }

    pub fn radius(&self) -> f64 {
        self.x.hypot(self.y)
    }

    /// Whether `r` lies in the neck annulus `[delta, sqrt(delta)]`.
    pub fn in_neck(&self, cfg: &GluingConfig) -> bool {
        let r = self.radius();
        r >= cfg.inner_radius() && r <= cfg.outer_radius()
    }
}

/// Cutoff value and Cartesian partials at a point. Radial cutoffs satisfy
/// `x * dy == y * dx`; arbitrary jets are accepted to probe what breaks without that.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BetaJet {
    pub value: f64,
    pub dx: f64,
    pub dy: f64,
}

impl BetaJet {
    pub fn radial(p: &NeckPoint, cfg: &GluingConfig) -> Result<Self> {
        let r = p.radius();
        let b = cutoff_beta(r, cfg)?;
        Ok(BetaJet {
            value: b.value,
            dx: b.derivative * p.x / r,
            dy: b.derivative * p.y / r,
        })
    }
}

/// Graph functions `(u, v)` and their first partials (the entries of `Hess G`).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GraphJet {
    pub u: f64,
    pub v: f64,
    pub ux: f64,
    pub uy: f64,
    pub vx: f64,
    pub vy: f64,
}

impl GraphJet {
    pub fn from_beta(p: &NeckPoint, delta: f64, beta: BetaJet) -> Self {
        let (x, y) = (p.x, p.y);
        let r2 = x * x + y * y;
        let q = delta * delta / (2.0 * r2);
        let b = beta.value;
        GraphJet {
            u: q * b * x,
            v: q * b * y,
            ux: q * (x * beta.dx + b * (y * y - x * x) / r2),
            uy: q * (x * beta.dy - 2.0 * b * x * y / r2),
            vx: q * (y * beta.dx - 2.0 * b * x * y / r2),
            vy: q * (y * beta.dy + b * (x * x - y * y) / r2),
        }
    }

    pub fn radial(p: &NeckPoint, cfg: &GluingConfig) -> Result<Self> {
        check_graph_region(p, cfg)?;
        Ok(Self::from_beta(p, cfg.delta(), BetaJet::radial(p, cfg)?))
    }

    /// `Delta G = u_x + v_y`.
    pub fn laplacian(&self) -> f64 {
        self.ux + self.vy
    }

    /// `det Hess G = u_x v_y - u_y v_x`.
    pub fn hessian_det(&self) -> f64 {
        self.ux * self.vy - self.uy * self.vx
    }
}

fn check_graph_region(p: &NeckPoint, cfg: &GluingConfig) -> Result<()> {
    let r = p.radius();
    if !(r > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "neck point must have positive radius, got ({}, {})",
            p.x, p.y
        )));
    }
    if r <= 0.5 * cfg.delta() {
        return Err(Error::Domain(format!(
            "radius {r:.3e} is not in the graph region over z1 (needs r > delta/2 = {:.3e})",
            0.5 * cfg.delta()
        )));
    }
    Ok(())
}

/// Three tangent vectors of the glued submanifold.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Frame3 {
    pub e1: Vec6,
    pub e2: Vec6,
    pub e3: Vec6,
}

impl Frame3 {
    pub fn vectors(&self) -> [Vec6; 3] {
        [self.e1, self.e2, self.e3]
    }

    /// Determinant of the Gram matrix.
    pub fn gram_det(&self) -> f64 {
        let v = self.vectors();
        let g: Vec<Vec<f64>> = (0..3)
            .map(|i| (0..3).map(|j| v[i].dot(&v[j])).collect())
            .collect();
        g[0][0] * (g[1][1] * g[2][2] - g[1][2] * g[2][1])
            - g[0][1] * (g[1][0] * g[2][2] - g[1][2] * g[2][0])
            + g[0][2] * (g[1][0] * g[2][1] - g[1][1] * g[2][0])
    }
}

/// Tangent frame `(d/dx, d/dy, d/dkappa)` of the graph described by `jet`, written in the
/// ambient basis: `E1 = e1 + u_x e5 + v_x e6`, `E2 = e2 + u_y e5 + v_y e6`, `E3 = e3`.
pub fn frame_from_jet(jet: &GraphJet) -> Frame3 {
    let e = Vec6::basis;
    Frame3 {
        e1: e(0) + jet.ux * e(4) + jet.vx * e(5),
        e2: e(1) + jet.uy * e(4) + jet.vy * e(5),
        e3: e(2),
    }
}

pub fn tangent_frame(p: &NeckPoint, cfg: &GluingConfig) -> Result<Frame3> {
    Ok(frame_from_jet(&GraphJet::radial(p, cfg)?))
}

/// `omega` on the pairs `(E1,E2)`, `(E1,E3)`, `(E2,E3)`.
pub fn omega_restriction(frame: &Frame3) -> [f64; 3] {
    let omega = standard_symplectic_form();
    let [a, b, c] = frame.vectors();
    let eval = |v: Vec6, w: Vec6| evaluate(&omega, &[v, w]).expect("2-form on two vectors");
    [eval(a, b), eval(a, c), eval(b, c)]
}

/// Failure to be special Lagrangian at `p`: `(delta^2 / 2 r^2) * r * beta'(r)`, the closed
/// form of `Im xi` on the tangent frame for a radial cutoff.
pub fn error_density(p: &NeckPoint, cfg: &GluingConfig) -> Result<f64> {
    check_graph_region(p, cfg)?;
    let r = p.radius();
    let b = cutoff_beta(r, cfg)?;
    let delta = cfg.delta();
    Ok(delta * delta / (2.0 * r * r) * r * b.derivative)
}

/// `Im xi` evaluated on a tangent frame.
pub fn im_xi_on_frame(frame: &Frame3) -> f64 {
    let (_, im) = holomorphic_three_form();
    im_xi_with(&im, frame)
}

fn im_xi_with(im: &KForm, frame: &Frame3) -> f64 {
    evaluate(im, &frame.vectors()).expect("3-form on three vectors")
}

/// `Im xi` on the tangent frame of the piece written as a graph over the given side.
/// Over `z2` the roles of `(e1, e2)` and `(e5, e6)` swap.
pub fn error_density_from_side(p: &NeckPoint, side: NeckSide, cfg: &GluingConfig) -> Result<f64> {
    let jet = GraphJet::radial(p, cfg)?;
    let frame = match side {
        NeckSide::FromL1 => frame_from_jet(&jet),
        NeckSide::FromL2 => {
            let e = Vec6::basis;
            Frame3 {
                e1: e(4) + jet.ux * e(0) + jet.vx * e(1),
                e2: e(5) + jet.uy * e(0) + jet.vy * e(1),
                e3: e(2),
            }
        }
    };
    Ok(im_xi_on_frame(&frame))
}

/// Diagonal induced metric `(1 + A^2 + C^2) dx^2 + (1 + B^2 + D^2) dy^2 + A_area dkappa^2`
/// where `du = A dx + B dy`, `dv = C dx + D dy`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MetricSample {
    pub g11: f64,
    pub g22: f64,
    pub g33: f64,
    pub sqrt_det: f64,
}

/// Full first fundamental form of the graph, including the `dx dy` term the diagonal form drops.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExactMetricSample {
    pub g11: f64,
    pub g12: f64,
    pub g22: f64,
    pub g33: f64,
    pub sqrt_det: f64,
}

pub fn metric_from_jet(jet: &GraphJet, area_factor: f64) -> MetricSample {
    let g11 = 1.0 + jet.ux * jet.ux + jet.vx * jet.vx;
    let g22 = 1.0 + jet.uy * jet.uy + jet.vy * jet.vy;
    MetricSample {
        g11,
        g22,
        g33: area_factor,
        sqrt_det: (g11 * g22 * area_factor).sqrt(),
    }
}

pub fn induced_metric(p: &NeckPoint, cfg: &GluingConfig) -> Result<MetricSample> {
    Ok(metric_from_jet(&GraphJet::radial(p, cfg)?, cfg.area_factor()))
}

pub fn induced_metric_exact(p: &NeckPoint, cfg: &GluingConfig) -> Result<ExactMetricSample> {
    let jet = GraphJet::radial(p, cfg)?;
    let d = metric_from_jet(&jet, cfg.area_factor());
    let g12 = jet.ux * jet.uy + jet.vx * jet.vy;
    Ok(ExactMetricSample {
        g11: d.g11,
        g12,
        g22: d.g22,
        g33: d.g33,
        sqrt_det: ((d.g11 * d.g22 - g12 * g12) * d.g33).sqrt(),
    })
}

/// `det Hess G` at `p`.
pub fn det_hess_g(p: &NeckPoint, cfg: &GluingConfig) -> Result<f64> {
    Ok(GraphJet::radial(p, cfg)?.hessian_det())
}

/// `Delta G = u_x + v_y` at `p`, computed from the graph jet rather than the closed form.
pub fn laplacian_g(p: &NeckPoint, cfg: &GluingConfig) -> Result<f64> {
    Ok(GraphJet::radial(p, cfg)?.laplacian())
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cfg(delta: f64, cutoff: Cutoff) -> GluingConfig {
        GluingConfig::new(delta).unwrap().with_cutoff(cutoff).unwrap()
    }

    fn random_neck_point(rng: &mut ChaCha8Rng, c: &GluingConfig) -> NeckPoint {
        let s = rng.gen_range(c.inner_radius().ln()..c.outer_radius().ln());
        NeckPoint::from_polar(
            s.exp(),
            rng.gen_range(0.0..std::f64::consts::TAU),
            rng.gen_range(0.0..std::f64::consts::TAU),
        )
    }

    #[test]
    fn flat_frame_outside_the_neck() {
        let c = cfg(0.01, Cutoff::SmoothedClampedLog);
        let f = tangent_frame(&NeckPoint::from_polar(0.2, 0.3, 0.0), &c).unwrap();
        assert_eq!(f.e1, Vec6::basis(0));
        assert_eq!(f.e2, Vec6::basis(1));
        assert_eq!(f.e3, Vec6::basis(2));
        assert_eq!(omega_restriction(&f), [0.0; 3]);
        assert_eq!(error_density(&NeckPoint::from_polar(0.2, 0.3, 0.0), &c).unwrap(), 0.0);
    }

    #[test]
    fn fully_glued_frame_matches_closed_form() {
        let delta = 0.1;
        let c = cfg(delta, Cutoff::Constant(1.0));
        let p = NeckPoint::new(0.07, 0.05, 1.0);
        let r2 = p.x * p.x + p.y * p.y;
        let f = tangent_frame(&p, &c).unwrap();
        let expected = delta * delta * (p.y * p.y - p.x * p.x) / (2.0 * r2 * r2);
        assert!((f.e1[4] - expected).abs() < 1e-15);
        assert!(f.gram_det() > 0.0);
        let det = det_hess_g(&p, &c).unwrap();
        assert!((det + delta.powi(4) / (4.0 * r2 * r2)).abs() < 1e-14);
    }

    #[test]
    fn frame_slots_match_finite_differences() {
        let c = cfg(0.01, Cutoff::RawLog);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            let p = random_neck_point(&mut rng, &c);
            let jet = GraphJet::radial(&p, &c).unwrap();
            let h = 1e-6 * p.radius();
            let at = |x: f64, y: f64| GraphJet::radial(&NeckPoint::new(x, y, 0.0), &c).unwrap();
            let (xp, xm) = (at(p.x + h, p.y), at(p.x - h, p.y));
            let (yp, ym) = (at(p.x, p.y + h), at(p.x, p.y - h));
            let checks = [
                (jet.ux, (xp.u - xm.u) / (2.0 * h)),
                (jet.vx, (xp.v - xm.v) / (2.0 * h)),
                (jet.uy, (yp.u - ym.u) / (2.0 * h)),
                (jet.vy, (yp.v - ym.v) / (2.0 * h)),
            ];
            let scale = jet.ux.abs().max(jet.uy.abs()).max(jet.vx.abs()).max(jet.vy.abs());
            for (exact, fd) in checks {
                assert!((exact - fd).abs() <= 1e-6 * scale, "{exact} vs {fd}");
            }
            // curl-free: (u, v) is a gradient
            assert!((jet.uy - jet.vx).abs() <= 1e-10 * scale.max(1e-300));
        }
    }

    #[test]
    fn omega_vanishes_for_radial_cutoffs() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for &delta in &[0.1, 0.01, 0.001] {
            for cutoff in [Cutoff::RawLog, Cutoff::SmoothedClampedLog] {
                let c = cfg(delta, cutoff);
                for _ in 0..500 {
                    let f = tangent_frame(&random_neck_point(&mut rng, &c), &c).unwrap();
                    for w in omega_restriction(&f) {
                        assert!(w.abs() <= 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn omega_detects_non_radial_cutoff() {
        let delta = 0.1;
        let p = NeckPoint::new(0.12, 0.09, 0.0);
        let beta = BetaJet {
            value: p.x,
            dx: 1.0,
            dy: 0.0,
        };
        let frame = frame_from_jet(&GraphJet::from_beta(&p, delta, beta));
        let r2 = p.x * p.x + p.y * p.y;
        let expected = -delta * delta * p.y / (2.0 * r2);
        assert!((omega_restriction(&frame)[0] - expected).abs() < 1e-15);
    }

    #[test]
    fn error_density_reference_value() {
        let c = cfg(0.01, Cutoff::RawLog);
        let p = NeckPoint::from_polar(0.05, 0.7, 0.0);
        let d = error_density(&p, &c).unwrap();
        assert!((d - (-8.685_889_638_065_036e-3)).abs() < 1e-15);
        let frame = tangent_frame(&p, &c).unwrap();
        assert!((im_xi_on_frame(&frame) - d).abs() < 1e-12);
    }

    #[test]
    fn error_density_agrees_with_frame_evaluation() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for &delta in &[0.1, 0.01, 0.001] {
            let c = cfg(delta, Cutoff::SmoothedClampedLog);
            for _ in 0..1000 {
                let p = random_neck_point(&mut rng, &c);
                let a = error_density(&p, &c).unwrap();
                let b = im_xi_on_frame(&tangent_frame(&p, &c).unwrap());
                let e = laplacian_g(&p, &c).unwrap();
                assert!((a - b).abs() <= 1e-12, "{a} vs {b}");
                assert!((a - e).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn error_vanishes_where_cutoff_is_constant() {
        let c = cfg(0.01, Cutoff::SmoothedClampedLog);
        assert_eq!(error_density(&NeckPoint::from_polar(0.007, 0.1, 0.0), &c).unwrap(), 0.0);
        assert_eq!(error_density(&NeckPoint::from_polar(0.006, 2.1, 0.0), &c).unwrap(), 0.0);
        assert_eq!(error_density(&NeckPoint::from_polar(0.3, 2.1, 0.0), &c).unwrap(), 0.0);
        let glued = cfg(0.01, Cutoff::Constant(1.0));
        assert_eq!(error_density(&NeckPoint::from_polar(0.05, 2.1, 0.0), &glued).unwrap(), 0.0);
    }

    #[test]
    fn both_sides_give_the_same_error() {
        let c = cfg(0.01, Cutoff::SmoothedClampedLog);
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..200 {
            let p = random_neck_point(&mut rng, &c);
            let a = error_density_from_side(&p, NeckSide::FromL1, &c).unwrap();
            let b = error_density_from_side(&p, NeckSide::FromL2, &c).unwrap();
            assert!((a - b).abs() <= 1e-10);
        }
    }

    #[test]
    fn metric_reference_values_and_bound() {
        let c = cfg(0.1, Cutoff::Constant(1.0));
        let m = induced_metric(&NeckPoint::from_polar(0.1, 0.4, 0.0), &c).unwrap();
        assert!((m.sqrt_det - 1.25).abs() < 1e-14);
        let flat = cfg(0.1, Cutoff::Constant(0.0)).with_area_factor(2.0).unwrap();
        let m = induced_metric(&NeckPoint::from_polar(0.2, 0.4, 0.0), &flat).unwrap();
        assert_eq!((m.g11, m.g22, m.g33), (1.0, 1.0, 2.0));
        assert!((m.sqrt_det - 2f64.sqrt()).abs() < 1e-15);

        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for &delta in &[0.1, 0.01] {
            let c = cfg(delta, Cutoff::RawLog).with_area_factor(1.5).unwrap();
            for _ in 0..1000 {
                let p = random_neck_point(&mut rng, &c);
                let m = induced_metric(&p, &c).unwrap();
                assert!((m.sqrt_det - (m.g11 * m.g22 * m.g33).sqrt()).abs() <= 1e-12 * m.sqrt_det);
                assert!(m.g11 >= 1.0 && m.g22 >= 1.0);
                let b = BetaJet::radial(&p, &c).unwrap();
                let r = p.radius();
                let a = delta.powi(4) / (4.0 * r.powi(4));
                let bound = c.area_factor().sqrt()
                    * (1.0 + a * ((1.0 - p.x * b.dx).powi(2) + p.y * p.y * b.dx * b.dx))
                    * (1.0 + a * ((1.0 - p.y * b.dy).powi(2) + p.x * p.x * b.dy * b.dy));
                assert!(m.sqrt_det <= bound * (1.0 + 1e-14));
                let e = induced_metric_exact(&p, &c).unwrap();
                assert!(e.sqrt_det <= m.sqrt_det * (1.0 + 1e-14));
            }
        }
    }

    #[test]
    fn det_hess_matches_finite_difference_hessian() {
        let c = cfg(0.01, Cutoff::SmoothedClampedLog);
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        for _ in 0..200 {
            let p = random_neck_point(&mut rng, &c);
            let h = 1e-6 * p.radius();
            let at = |x: f64, y: f64| GraphJet::radial(&NeckPoint::new(x, y, 0.0), &c).unwrap();
            let ux = (at(p.x + h, p.y).u - at(p.x - h, p.y).u) / (2.0 * h);
            let uy = (at(p.x, p.y + h).u - at(p.x, p.y - h).u) / (2.0 * h);
            let vx = (at(p.x + h, p.y).v - at(p.x - h, p.y).v) / (2.0 * h);
            let vy = (at(p.x, p.y + h).v - at(p.x, p.y - h).v) / (2.0 * h);
            let fd = ux * vy - uy * vx;
            let exact = det_hess_g(&p, &c).unwrap();
            assert!((fd - exact).abs() <= 1e-6 * exact.abs().max(1e-12), "{fd} vs {exact}");
        }
    }

    #[test]
    fn graph_region_errors() {
        let c = cfg(0.01, Cutoff::RawLog);
        assert!(matches!(
            tangent_frame(&NeckPoint::new(0.0, 0.0, 0.0), &c),
            Err(Error::InvalidArgument(_))
        ));
        assert!(matches!(
            tangent_frame(&NeckPoint::new(0.004, 0.0, 0.0), &c),
            Err(Error::Domain(_))
        ));
    }
}
