//! Piecewise connected-sum chart `L1 #_delta L2`.

use num_complex::Complex64;

use super::cutoff::{cutoff_beta, GluingConfig};
use crate::error::{Error, Result};

/// Which sheet the chart input parameterizes: `z1` (over `L1`) or `z2` (over `L2`).
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NeckSide {
    FromL1,
    FromL2,
}

/// A point `(kappa, z1, z2)` of the glued submanifold.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChartPoint {
    pub kappa: f64,
    pub z1: Complex64,
    pub z2: Complex64,
}

/// Maps a point of one sheet onto the glued submanifold.
///
/// Over `z1` (radius `rho`):
/// * `rho > sqrt(delta)`: `(kappa, z1, 0)`
/// * `delta < rho <= sqrt(delta)`: `z2 = beta(rho) delta^2 / (2 conj(z1))`
/// * `delta/2 < rho <= delta`: `z2 = delta^2 / (2 conj(z1))`
/// * `rho <= delta/2`: the point lies on the part written as a graph over `z2`; `z2` is
///   recovered by solving `beta(|z2|) delta^2 / (2 |z2|) = rho` with `arg z2 = arg z1`.
///
/// `FromL2` is the mirror image with the roles of `z1` and `z2` exchanged.
pub fn chart_point(kappa: f64, z: Complex64, side: NeckSide, cfg: &GluingConfig) -> Result<ChartPoint> {
    let other = glued_partner(z, cfg)?;
    Ok(match side {
        NeckSide::FromL1 => ChartPoint { kappa, z1: z, z2: other },
        NeckSide::FromL2 => ChartPoint { kappa, z1: other, z2: z },
    })
}

fn glued_partner(z: Complex64, cfg: &GluingConfig) -> Result<Complex64> {
    let rho = z.norm();
    let delta = cfg.delta();
    let half_delta_sq = 0.5 * delta * delta;
    if !rho.is_finite() {
        return Err(Error::InvalidArgument(format!("chart input must be finite, got {z}")));
    }
    if rho > cfg.outer_radius() {
        return Ok(Complex64::new(0.0, 0.0));
    }
    if rho == 0.0 {
        return Err(Error::Domain("the singular point z = 0 is not on the glued neck".into()));
    }
    if rho > delta {
        let beta = cutoff_beta(rho, cfg)?.value;
        return Ok(beta * half_delta_sq / z.conj());
    }
    if rho > 0.5 * delta {
        return Ok(half_delta_sq / z.conj());
    }
    // rho <= delta/2: invert sigma -> beta(sigma) delta^2 / (2 sigma) on [delta, sqrt(delta)],
    // which decreases from delta/2 (at most) to 0.
    let profile = |sigma: f64| -> Result<f64> { Ok(cutoff_beta(sigma, cfg)?.value * half_delta_sq / sigma) };
    let (mut lo, mut hi) = (delta, cfg.outer_radius());
    let (f_lo, f_hi) = (profile(lo)? - rho, profile(hi)? - rho);
    if f_lo < 0.0 || f_hi > 0.0 {
        return Err(Error::Domain(format!(
            "no glued partner for |z| = {rho:.3e} under cutoff {}",
            cfg.cutoff().name()
        )));
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if profile(mid)? - rho > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 4.0 * f64::EPSILON * hi {
            break;
        }
    }
    let sigma = 0.5 * (lo + hi);
    Ok(z * (sigma / rho))
}
