//! Model data: parameters, coefficients, grid, state, initial data and run configuration.

mod coefficient;
mod config;
mod grid;
mod initial;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use coefficient::{
    CoefficientField, CoefficientKind, CoefficientLabel, Coefficients, CoefficientsSpec, Harmonic,
    Interpolation, Table, Trig, TrigTerm, Univariate,
};
pub use config::{CheckSettings, HypothesisChoice, RunConfig, Scheme};
pub use grid::{GridDomain, GridSpec, MIN_CELLS};
pub use initial::{make_initial_data, InitialData, Profile};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("{field}: {reason}")]
    InvalidParameter { field: String, reason: String },
    #[error("coefficient {label} evaluated outside its tabulated range at t={t}, x={x:?}")]
    EvaluationOutOfRange {
        label: CoefficientLabel,
        t: f64,
        x: [f64; 2],
    },
    #[error("invalid initial data: {0}")]
    InvalidSpec(String),
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("{0}")]
    Parse(String),
}

impl ModelError {
    pub(crate) fn invalid(field: impl Into<String>, reason: impl Into<String>) -> Self {
        ModelError::InvalidParameter {
            field: field.into(),
            reason: reason.into(),
        }
    }
}

/// Scalar parameters `chi`, `tau`, `lambda`, `mu` and the spatial dimension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelParams {
    /// Chemotactic sensitivity; either sign.
    pub chi: f64,
    pub tau: f64,
    pub lambda: f64,
    pub mu: f64,
    pub dimension: usize,
}

impl ModelParams {
    pub fn new(chi: f64, tau: f64, lambda: f64, mu: f64, dimension: usize) -> Result<Self, ModelError> {
        let p = ModelParams {
            chi,
            tau,
            lambda,
            mu,
            dimension,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !self.chi.is_finite() {
            return Err(ModelError::invalid("model.chi", "must be finite"));
        }
        for (name, v) in [
            ("model.tau", self.tau),
            ("model.lambda", self.lambda),
            ("model.mu", self.mu),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(ModelError::invalid(name, format!("must be positive, got {v}")));
            }
        }
        if !(1..=2).contains(&self.dimension) {
            return Err(ModelError::invalid(
                "model.dimension",
                format!("must be 1 or 2, got {}", self.dimension),
            ));
        }
        Ok(())
    }
}

/// Discrete `(u, v)` at one time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct State {
    pub time: f64,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

impl State {
    pub fn new(time: f64, u: Vec<f64>, v: Vec<f64>) -> Result<Self, ModelError> {
        let s = State { time, u, v };
        s.check()?;
        Ok(s)
    }

    /// Nonnegative, finite, equal-length fields.
    pub fn check(&self) -> Result<(), ModelError> {
        if self.u.len() != self.v.len() {
            return Err(ModelError::InvalidState(format!(
                "u has {} cells but v has {}",
                self.u.len(),
                self.v.len()
            )));
        }
        for (name, f) in [("u", &self.u), ("v", &self.v)] {
            if let Some(k) = f.iter().position(|x| !x.is_finite() || *x < 0.0) {
                return Err(ModelError::InvalidState(format!(
                    "{name}[{k}] = {} is negative or not finite",
                    f[k]
                )));
            }
        }
        Ok(())
    }

    /// `max(sup|u - u'|, sup|v - v'|)`
    pub fn sup_distance(&self, other: &State) -> f64 {
        let d = |a: &[f64], b: &[f64]| {
            a.iter()
                .zip(b)
                .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
        };
        d(&self.u, &other.u).max(d(&self.v, &other.v))
    }
}
