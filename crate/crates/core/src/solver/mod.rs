//! Space discretization and time stepping.
//!
//! Cell-centered second-order diffusion, first-order upwind chemotactic flux,
//! midpoint quadrature for the nonlocal mass, and a backward-Euler IMEX step
//! (ADI direction splitting in 2D). A fully explicit variant backs the
//! brute-force reference solutions.

mod simulate;
mod stencil;
mod step;
mod tridiag;

use thiserror::Error;

use crate::model::ModelError;

pub use simulate::{simulate, simulate_observed, Observer};
pub use stencil::{
    chemotaxis_divergence, chemotaxis_into, laplacian_into, laplacian_neumann, max_face_gradient,
    nonlocal_mass, GhostField,
};
pub use step::{
    stable_dt, step, step_limits, step_with_values, CoefficientValues, StencilWorkspace,
    StepFlags, StepLimits, StepOutcome, Stepper, CLAMP_TOLERANCE, DT_COLLAPSE,
};
pub use tridiag::TridiagonalFactor;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("{field}[{index}] = {value:e} at t={t} is below the roundoff clamp; the step violated positivity")]
    PositivityViolation {
        field: &'static str,
        t: f64,
        index: usize,
        value: f64,
    },
    #[error("{field}[{index}] became non-finite at t={t}")]
    NonFiniteValue {
        field: &'static str,
        t: f64,
        index: usize,
    },
    #[error(transparent)]
    Model(#[from] ModelError),
}
