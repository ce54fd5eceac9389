//! Shared fixtures for the neck benchmarks.

use std::sync::Arc;

use slag_glue::gluing::{Cutoff, GluingConfig};
use slag_glue::neck_grid::{build_grid, NeckGrid};
use slag_glue::Result;

/// Default-cutoff configuration and grid of the given size.
pub fn fixture(delta: f64, n_r: usize, n_theta: usize, n_kappa: usize) -> Result<(GluingConfig, Arc<NeckGrid>)> {
    let cfg = GluingConfig::new(delta)?.with_cutoff(Cutoff::SmoothedClampedLog)?;
    let grid = Arc::new(build_grid(&cfg, n_r, n_theta, n_kappa)?);
    Ok((cfg, grid))
}
