//! Numerics for a glued special Lagrangian neck in C^3.
//!
//! The crate covers the constant-coefficient forms `omega` and `xi`, the cutoff chart of the
//! glued neck and its tangent frames, quadrature and weighted Sobolev norms on the neck, the
//! Laplace-Beltrami operator of the neck with its spectral and elliptic estimates, and a
//! fixed-point solver for the special Lagrangian equation on graphs over the neck.

pub mod error;
pub mod exterior;
pub mod gluing;
pub mod neck_grid;
pub mod slag;
pub mod spectral;

#[cfg(test)]
mod properties;

pub use error::{Error, Result};
pub use exterior::{
    calibration_identity_check, evaluate, holomorphic_three_form, standard_symplectic_form,
    ComplexStructure, KForm, Vec6,
};
pub use gluing::{
    cutoff_beta, det_hess_g, error_density, induced_metric, omega_restriction, tangent_frame,
    Cutoff, Frame3, GluingConfig, MetricSample, NeckPoint,
};
pub use neck_grid::{build_grid, error_norm, norm_lp_k, ErrorNorm, NeckGrid, NormOptions, ScalarField};
pub use slag::{GraphPotential, ResidualReport, SlagProblem, SolveOutcome, TraceRow};
pub use spectral::{assemble, BoundaryCondition, NeckOperator, OperatorKind, SpectralResult};
