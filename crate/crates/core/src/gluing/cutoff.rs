//! Radial cutoff profiles for the neck.

use crate::error::{Error, Result};

/// Width of each smoothing band as a fraction of the log-width of the neck `[delta, sqrt(delta)]`.
pub const BLEND_FRACTION: f64 = 0.05;

/// Choice of cutoff profile.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Cutoff {
    /// `log|r/sqrt(delta)| / log sqrt(delta)`, unclamped (exceeds 1 below `r = delta`).
    RawLog,
    /// The log profile clamped to `[0, 1]` with C^1 cubic blends at both ends.
    SmoothedClampedLog,
    /// A constant profile; only meaningful as a fixture (0 and 1 are the flat and fully glued
    /// graphs).
    Constant(f64),
}

impl Default for Cutoff {
    fn default() -> Self {
        Cutoff::SmoothedClampedLog
    }
}

impl Cutoff {
    pub fn name(&self) -> String {
        match self {
            Cutoff::RawLog => "raw_log".to_string(),
            Cutoff::SmoothedClampedLog => "smoothed_clamped_log".to_string(),
            Cutoff::Constant(c) => format!("constant({c})"),
        }
    }

    pub fn is_radial_log(&self) -> bool {
        !matches!(self, Cutoff::Constant(_))
    }
}

/// Parameters of one gluing experiment.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GluingConfig {
    delta: f64,
    cutoff: Cutoff,
    area_factor: f64,
}

impl GluingConfig {
    pub fn new(delta: f64) -> Result<Self> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::Config(format!(
                "gluing parameter must lie in (0, 1), got {delta}"
            )));
        }
        Ok(GluingConfig {
            delta,
            cutoff: Cutoff::default(),
            area_factor: 1.0,
        })
    }

    pub fn with_cutoff(mut self, cutoff: Cutoff) -> Result<Self> {
        if let Cutoff::Constant(c) = cutoff {
            if !(0.0..=1.0).contains(&c) {
                return Err(Error::Config(format!("constant cutoff must lie in [0, 1], got {c}")));
            }
        }
        self.cutoff = cutoff;
        Ok(self)
    }

    pub fn with_area_factor(mut self, area_factor: f64) -> Result<Self> {
        if !(area_factor > 0.0 && area_factor.is_finite()) {
            return Err(Error::Config(format!(
                "area factor must be positive, got {area_factor}"
            )));
        }
        self.area_factor = area_factor;
        Ok(self)
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn cutoff(&self) -> Cutoff {
        self.cutoff
    }

    pub fn area_factor(&self) -> f64 {
        self.area_factor
    }

    /// Inner radius of the neck annulus.
    pub fn inner_radius(&self) -> f64 {
        self.delta
    }

    /// Outer radius of the neck annulus.
    pub fn outer_radius(&self) -> f64 {
        self.delta.sqrt()
    }

    /// `log sqrt(delta)`, negative.
    pub fn log_sqrt_delta(&self) -> f64 {
        0.5 * self.delta.ln()
    }
}

/// Value of the cutoff and its radial derivative.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CutoffSample {
    pub value: f64,
    pub derivative: f64,
}

fn raw_log(r: f64, cfg: &GluingConfig) -> CutoffSample {
    let l = cfg.log_sqrt_delta();
    CutoffSample {
        value: (r / cfg.outer_radius()).ln() / l,
        derivative: 1.0 / (r * l),
    }
}

/// Cubic Hermite interpolant on `[a, a + h]` and its derivative.
fn hermite(r: f64, a: f64, h: f64, p0: f64, m0: f64, p1: f64, m1: f64) -> CutoffSample {
    let t = (r - a) / h;
    let (t2, t3) = (t * t, t * t * t);
    let value = (2.0 * t3 - 3.0 * t2 + 1.0) * p0
        + (t3 - 2.0 * t2 + t) * h * m0
        + (-2.0 * t3 + 3.0 * t2) * p1
        + (t3 - t2) * h * m1;
    let derivative = (6.0 * t2 - 6.0 * t) / h * p0
        + (3.0 * t2 - 4.0 * t + 1.0) * m0
        + (-6.0 * t2 + 6.0 * t) / h * p1
        + (3.0 * t2 - 2.0 * t) * m1;
    CutoffSample { value, derivative }
}

/// Blend band endpoints `(inner_end, outer_start)`: the profile is a cubic on
/// `[delta, inner_end]` and on `[outer_start, sqrt(delta)]`.
pub fn blend_bands(cfg: &GluingConfig) -> (f64, f64) {
    let log_width = -cfg.log_sqrt_delta();
    let band = BLEND_FRACTION * log_width;
    (
        cfg.inner_radius() * band.exp(),
        cfg.outer_radius() * (-band).exp(),
    )
}

/// Cutoff value and radial derivative at radius `r`.
pub fn cutoff_beta(r: f64, cfg: &GluingConfig) -> Result<CutoffSample> {
    if !(r > 0.0) || !r.is_finite() {
        return Err(Error::InvalidArgument(format!("cutoff radius must be positive, got {r}")));
    }
    Ok(match cfg.cutoff() {
        Cutoff::RawLog => raw_log(r, cfg),
        Cutoff::Constant(c) => CutoffSample {
            value: c,
            derivative: 0.0,
        },
        Cutoff::SmoothedClampedLog => {
            let (lo, hi) = (cfg.inner_radius(), cfg.outer_radius());
            let (inner_end, outer_start) = blend_bands(cfg);
            if r <= lo {
                CutoffSample {
                    value: 1.0,
                    derivative: 0.0,
                }
            } else if r >= hi {
                CutoffSample {
                    value: 0.0,
                    derivative: 0.0,
                }
            } else if r < inner_end {
                let end = raw_log(inner_end, cfg);
                hermite(r, lo, inner_end - lo, 1.0, 0.0, end.value, end.derivative)
            } else if r > outer_start {
                let start = raw_log(outer_start, cfg);
                hermite(r, outer_start, hi - outer_start, start.value, start.derivative, 0.0, 0.0)
            } else {
                raw_log(r, cfg)
            }
        }
    })
}
