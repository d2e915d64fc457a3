//! Run configuration and its TOML schema.
//!
//! ```toml
//! [model]
//! chi = 1.0
//! tau = 1.0
//! lambda = 1.0
//! mu = 1.0
//!
//! [domain]
//! lengths = [1.0]        # one entry per axis
//! cells = [64]
//!
//! [coefficients.a0]
//! kind = "constant"
//! value = 1.0
//! # a1, a2 likewise; kinds: constant, trig_sum, separable, tabulated
//!
//! [initial.u]
//! kind = "cosine_perturbed"
//! base = 1.0
//! amplitude = 0.5
//! mode = 1
//! [initial.v]
//! kind = "uniform"
//! value = 0.0
//!
//! [time]
//! start = 0.0
//! end = 50.0
//! dt_max = 0.01
//! record_every = 0.5
//! cfl_safety = 0.5          # optional
//! scheme = "imex"           # or "fully_explicit"
//! blowup_threshold = 1e6    # optional
//!
//! [persistence]             # optional
//! eta_floor = 1e-6
//! settle_fraction = 0.5
//!
//! [check]                   # optional
//! hypothesis = "h2"         # or "h1"
//! c_gamma = [[2.0, 1.0]]    # (q, C_{q+1}) pairs, needed for h1
//! ```

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{Coefficients, GridDomain, InitialData, ModelError, ModelParams};
use crate::diagnostics::PersistenceSettings;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Explicit taxis and reaction, implicit (ADI in 2D) diffusion.
    #[default]
    Imex,
    FullyExplicit,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HypothesisChoice {
    H1,
    H2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CheckSettings {
    pub hypothesis: HypothesisChoice,
    /// User-supplied `(q, C_{q+1})` maximal-regularity constants.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub c_gamma: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelSection {
    chi: f64,
    tau: f64,
    lambda: f64,
    mu: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    dimension: Option<usize>,
}

fn default_cfl() -> f64 {
    0.5
}

fn default_blowup() -> f64 {
    1e6
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TimeSettings {
    pub start: f64,
    pub end: f64,
    pub dt_max: f64,
    pub record_every: f64,
    #[serde(default = "default_cfl")]
    pub cfl_safety: f64,
    #[serde(default)]
    pub scheme: Scheme,
    #[serde(default = "default_blowup")]
    pub blowup_threshold: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ConfigFile {
    model: ModelSection,
    domain: GridDomain,
    coefficients: Coefficients,
    initial: InitialData,
    time: TimeSettings,
    #[serde(default)]
    persistence: PersistenceSettings,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    check: Option<CheckSettings>,
}

/// Everything one simulation needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ConfigFile", into = "ConfigFile")]
pub struct RunConfig {
    pub params: ModelParams,
    pub coefficients: Coefficients,
    pub domain: GridDomain,
    pub initial: InitialData,
    pub t_start: f64,
    pub t_end: f64,
    pub dt_max: f64,
    pub cfl_safety: f64,
    pub scheme: Scheme,
    pub record_every: f64,
    pub blowup_threshold: f64,
    pub persistence: PersistenceSettings,
    pub check: Option<CheckSettings>,
}

impl TryFrom<ConfigFile> for RunConfig {
    type Error = ModelError;

    fn try_from(f: ConfigFile) -> Result<Self, Self::Error> {
        let dimension = f.domain.dimension();
        if let Some(d) = f.model.dimension {
            if d != dimension {
                return Err(ModelError::invalid(
                    "model.dimension",
                    format!("{d} does not match the {dimension}D domain"),
                ));
            }
        }
        let cfg = RunConfig {
            params: ModelParams {
                chi: f.model.chi,
                tau: f.model.tau,
                lambda: f.model.lambda,
                mu: f.model.mu,
                dimension,
            },
            coefficients: f.coefficients,
            domain: f.domain,
            initial: f.initial,
            t_start: f.time.start,
            t_end: f.time.end,
            dt_max: f.time.dt_max,
            cfl_safety: f.time.cfl_safety,
            scheme: f.time.scheme,
            record_every: f.time.record_every,
            blowup_threshold: f.time.blowup_threshold,
            persistence: f.persistence,
            check: f.check,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl From<RunConfig> for ConfigFile {
    fn from(c: RunConfig) -> Self {
        ConfigFile {
            model: ModelSection {
                chi: c.params.chi,
                tau: c.params.tau,
                lambda: c.params.lambda,
                mu: c.params.mu,
                dimension: None,
            },
            domain: c.domain,
            coefficients: c.coefficients,
            initial: c.initial,
            time: TimeSettings {
                start: c.t_start,
                end: c.t_end,
                dt_max: c.dt_max,
                record_every: c.record_every,
                cfl_safety: c.cfl_safety,
                scheme: c.scheme,
                blowup_threshold: c.blowup_threshold,
            },
            persistence: c.persistence,
            check: c.check,
        }
    }
}

impl RunConfig {
    /// A config on `domain` with library defaults for the numerical settings.
    pub fn new(
        params: ModelParams,
        coefficients: Coefficients,
        domain: GridDomain,
        initial: InitialData,
        t_start: f64,
        t_end: f64,
    ) -> Self {
        RunConfig {
            params,
            coefficients,
            domain,
            initial,
            t_start,
            t_end,
            dt_max: 0.01,
            cfl_safety: default_cfl(),
            scheme: Scheme::Imex,
            record_every: ((t_end - t_start) / 100.0).max(1e-3),
            blowup_threshold: default_blowup(),
            persistence: PersistenceSettings::default(),
            check: None,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        self.params.validate()?;
        if self.params.dimension != self.domain.dimension() {
            return Err(ModelError::invalid(
                "model.dimension",
                "does not match the domain dimension",
            ));
        }
        if !(self.t_start.is_finite() && self.t_end.is_finite()) {
            return Err(ModelError::invalid("time", "start and end must be finite"));
        }
        if self.t_end < self.t_start {
            return Err(ModelError::invalid(
                "time.end",
                format!(
                    "must not precede time.start (start={}, end={})",
                    self.t_start, self.t_end
                ),
            ));
        }
        let positive = |field: &str, v: f64| {
            if v.is_finite() && v > 0.0 {
                Ok(())
            } else {
                Err(ModelError::invalid(field, format!("must be positive, got {v}")))
            }
        };
        positive("time.dt_max", self.dt_max)?;
        positive("time.record_every", self.record_every)?;
        positive("time.blowup_threshold", self.blowup_threshold)?;
        if !(self.cfl_safety > 0.0 && self.cfl_safety <= 1.0) {
            return Err(ModelError::invalid(
                "time.cfl_safety",
                format!("must lie in (0, 1], got {}", self.cfl_safety),
            ));
        }
        self.persistence.validate()?;
        self.initial.validate()?;
        let lengths: Vec<f64> = (0..self.domain.dimension())
            .map(|k| self.domain.length(k))
            .collect();
        for c in self.coefficients.iter() {
            if let super::CoefficientKind::Tabulated(table) = &c.kind {
                if !table.covers(&lengths, (self.t_start, self.t_end)) {
                    return Err(ModelError::invalid(
                        format!("coefficients.{}", c.label),
                        "tabulated samples do not cover the domain and run window",
                    ));
                }
            }
        }
        if let Some(check) = &self.check {
            for &(q, c) in &check.c_gamma {
                if !(q.is_finite() && c.is_finite()) {
                    return Err(ModelError::invalid("check.c_gamma", "entries must be finite"));
                }
            }
        }
        Ok(())
    }

    pub fn from_toml_str(src: &str) -> Result<Self, ModelError> {
        toml::from_str(src).map_err(|e| ModelError::Parse(e.to_string()))
    }

    pub fn from_toml_value(value: toml::Value) -> Result<Self, ModelError> {
        value
            .try_into()
            .map_err(|e: toml::de::Error| ModelError::Parse(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, ModelError> {
        let src = std::fs::read_to_string(path)
            .map_err(|e| ModelError::Parse(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&src)
            .map_err(|e| ModelError::Parse(format!("{}: {e}", path.display())))
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("run config serializes to TOML")
    }

    /// SHA-256 of the canonical JSON encoding, hex encoded.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_string(self).expect("run config serializes to JSON");
        Sha256::digest(canonical.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    pub fn is_constant_coefficient(&self) -> bool {
        self.coefficients.constants().is_some()
    }
}
