//! Run diagnostics: snapshots, the persistence classifier and mass-bound checks.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hypothesis::TheoreticalBounds;
use crate::model::{GridDomain, ModelError, State};
use crate::solver::{laplacian_neumann, max_face_gradient, nonlocal_mass};

/// Minimum number of tail snapshots for a persistence verdict.
pub const MIN_TAIL_SNAPSHOTS: usize = 10;
/// Sup-distance to the homogeneous steady state below which a run counts as converged.
pub const CONVERGENCE_TOLERANCE: f64 = 1e-4;
/// Relative slack allowed above the logistic mass envelope.
pub const ENVELOPE_SLACK: f64 = 0.05;

pub const SNAPSHOT_CSV_HEADER: &str = "t,mass,u_min,u_max,v_min,v_max,grad_v_max,lap_v_max";

#[derive(Debug, Error)]
pub enum DiagnosticsError {
    #[error("persistence verdict needs at least {need} tail snapshots, got {have}")]
    InsufficientTail { have: usize, need: usize },
    #[error("bound check requires a positive nonlocal margin, got {0}")]
    HypothesisViolated(f64),
}

/// Float formatting shared by every CSV artifact: 17 significant digits.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub t: f64,
    pub mass: f64,
    pub u_min: f64,
    pub u_max: f64,
    pub v_min: f64,
    pub v_max: f64,
    pub grad_v_max: f64,
    pub lap_v_max: f64,
    /// Cell center where `u_min` is attained.
    pub u_argmin: [f64; 2],
}

pub fn snapshot(state: &State, domain: &GridDomain) -> Snapshot {
    let mut u_min = f64::INFINITY;
    let mut u_max = f64::NEG_INFINITY;
    let mut argmin = 0;
    for (k, &x) in state.u.iter().enumerate() {
        if x < u_min {
            u_min = x;
            argmin = k;
        }
        u_max = u_max.max(x);
    }
    let (v_min, v_max) = state
        .v
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    let g = max_face_gradient(&state.v, domain);
    let lap_v_max = laplacian_neumann(&state.v, domain)
        .iter()
        .fold(0.0f64, |m, x| m.max(x.abs()));
    Snapshot {
        t: state.time,
        mass: nonlocal_mass(&state.u, domain),
        u_min,
        u_max,
        v_min,
        v_max,
        grad_v_max: g[0].max(g[1]),
        lap_v_max,
        u_argmin: domain.center(argmin),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PersistenceSettings {
    #[serde(default = "PersistenceSettings::default_floor")]
    pub eta_floor: f64,
    /// Fraction of the run treated as transient.
    #[serde(default = "PersistenceSettings::default_settle")]
    pub settle_fraction: f64,
    /// Optional trailing window length; restricts the tail further.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub window: Option<f64>,
}

impl Default for PersistenceSettings {
    fn default() -> Self {
        PersistenceSettings {
            eta_floor: Self::default_floor(),
            settle_fraction: Self::default_settle(),
            window: None,
        }
    }
}

impl PersistenceSettings {
    fn default_floor() -> f64 {
        1e-6
    }

    fn default_settle() -> f64 {
        0.5
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.eta_floor > 0.0 && self.eta_floor.is_finite()) {
            return Err(ModelError::invalid(
                "persistence.eta_floor",
                format!("must be positive, got {}", self.eta_floor),
            ));
        }
        if !(self.settle_fraction > 0.0 && self.settle_fraction < 1.0) {
            return Err(ModelError::invalid(
                "persistence.settle_fraction",
                format!("must lie in (0, 1), got {}", self.settle_fraction),
            ));
        }
        if let Some(w) = self.window {
            if !(w > 0.0) {
                return Err(ModelError::invalid("persistence.window", "must be positive"));
            }
        }
        Ok(())
    }

    pub fn tail_start(&self, t_start: f64, t_end: f64) -> f64 {
        let settled = t_start + self.settle_fraction * (t_end - t_start);
        match self.window {
            Some(w) => settled.max(t_end - w),
            None => settled,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "label", rename_all = "snake_case")]
pub enum Classification {
    /// `eta_hat`: tail minimum of `u`; `tau_hat`: time after the start from
    /// which `u` never drops below `eta_hat` again.
    Persistent { eta_hat: f64, tau_hat: f64 },
    ExtinctionSuspect {
        tail_min: f64,
        location: [f64; 2],
        /// True when `u_max` stays well above the floor, i.e. near-extinction is local.
        localized: bool,
    },
    BlowUp { t_blow: f64 },
    Converged {
        steady_error: f64,
        eta_hat: f64,
        tau_hat: f64,
    },
    Undetermined,
}

impl Classification {
    pub fn name(&self) -> &'static str {
        match self {
            Classification::Persistent { .. } => "persistent",
            Classification::ExtinctionSuspect { .. } => "extinction_suspect",
            Classification::BlowUp { .. } => "blow_up",
            Classification::Converged { .. } => "converged",
            Classification::Undetermined => "undetermined",
        }
    }

    pub fn eta_hat(&self) -> Option<f64> {
        match *self {
            Classification::Persistent { eta_hat, .. } => Some(eta_hat),
            Classification::Converged { eta_hat, .. } => Some(eta_hat),
            _ => None,
        }
    }
}

/// Classify a completed, blow-up-free run from its snapshot stream.
///
/// `steady_error` is the final sup-distance to the homogeneous steady state,
/// when one exists; convergence takes precedence over persistence.
pub fn persistence_verdict(
    snapshots: &[Snapshot],
    settings: &PersistenceSettings,
    t_start: f64,
    t_end: f64,
    steady_error: Option<f64>,
) -> Result<Classification, DiagnosticsError> {
    let tail_start = settings.tail_start(t_start, t_end);
    let first = snapshots.partition_point(|s| s.t < tail_start);
    let tail = &snapshots[first..];
    if tail.len() < MIN_TAIL_SNAPSHOTS {
        return Err(DiagnosticsError::InsufficientTail {
            have: tail.len(),
            need: MIN_TAIL_SNAPSHOTS,
        });
    }
    let (arg, eta_hat) = tail
        .iter()
        .enumerate()
        .fold((0, f64::INFINITY), |(a, m), (k, s)| if s.u_min < m { (k, s.u_min) } else { (a, m) });
    let settle = snapshots
        .iter()
        .rposition(|s| s.u_min < eta_hat)
        .map_or(0, |k| k + 1);
    let tau_hat = snapshots[settle.min(snapshots.len() - 1)].t - t_start;

    if let Some(err) = steady_error {
        if err < CONVERGENCE_TOLERANCE {
            return Ok(Classification::Converged {
                steady_error: err,
                eta_hat,
                tau_hat,
            });
        }
    }
    if eta_hat >= settings.eta_floor {
        Ok(Classification::Persistent { eta_hat, tau_hat })
    } else {
        let tail_u_max = tail.iter().fold(0.0f64, |m, s| m.max(s.u_max));
        Ok(Classification::ExtinctionSuspect {
            tail_min: eta_hat,
            location: tail[arg].u_argmin,
            localized: tail_u_max >= 10.0 * settings.eta_floor,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundChecks {
    pub mass_envelope_ok: bool,
    /// Largest `mass(t) / envelope(t)` over the run.
    pub worst_envelope_ratio: f64,
    pub m1_eventual: f64,
    pub m2_eventual: f64,
    /// `M~1 + 1`, the eventual mass bound the tail is compared against.
    pub m1_bound: f64,
}

/// Compare the mass trajectory with the logistic envelope started from the
/// initial mass; report tail maxima of mass and `u_max`.
pub fn bound_check(
    snapshots: &[Snapshot],
    bounds: &TheoreticalBounds,
    t_start: f64,
    tail_start: f64,
) -> Result<BoundChecks, DiagnosticsError> {
    if !(bounds.nonlocal_margin > 0.0) {
        return Err(DiagnosticsError::HypothesisViolated(bounds.nonlocal_margin));
    }
    let envelope = bounds.envelope();
    let m0 = snapshots.first().map_or(0.0, |s| s.mass);
    let mut worst = 0.0f64;
    let mut ok = true;
    for s in snapshots {
        let y = envelope.eval(m0, s.t - t_start);
        if s.mass > y * (1.0 + ENVELOPE_SLACK) {
            ok = false;
        }
        if y > 0.0 {
            worst = worst.max(s.mass / y);
        } else if s.mass > 0.0 {
            worst = f64::INFINITY;
        }
    }
    let tail: Vec<&Snapshot> = snapshots.iter().filter(|s| s.t >= tail_start).collect();
    let tail = if tail.is_empty() {
        snapshots.iter().rev().take(1).collect()
    } else {
        tail
    };
    Ok(BoundChecks {
        mass_envelope_ok: ok,
        worst_envelope_ratio: worst,
        m1_eventual: tail.iter().fold(0.0f64, |m, s| m.max(s.mass)),
        m2_eventual: tail.iter().fold(0.0f64, |m, s| m.max(s.u_max)),
        m1_bound: bounds.m1,
    })
}

/// Observer invoked by the run loop.
pub trait Monitor {
    fn on_step(&mut self, _state: &State, _dt: f64) {}
    fn on_record(&mut self, _snapshot: &Snapshot, _state: &State) {}
}

/// Tracks positivity and mass change over every accepted step.
#[derive(Debug, Clone)]
pub struct StepAudit {
    domain: GridDomain,
    pub steps: usize,
    pub min_u: f64,
    pub min_v: f64,
    /// Largest `|mass_new - mass_old| / (mass_old * dt)` over all steps.
    pub max_relative_mass_rate: f64,
    last_mass: Option<f64>,
}

impl StepAudit {
    pub fn new(domain: &GridDomain) -> Self {
        StepAudit {
            domain: domain.clone(),
            steps: 0,
            min_u: f64::INFINITY,
            min_v: f64::INFINITY,
            max_relative_mass_rate: 0.0,
            last_mass: None,
        }
    }
}

impl Monitor for StepAudit {
    fn on_step(&mut self, state: &State, dt: f64) {
        let mass = nonlocal_mass(&state.u, &self.domain);
        if let Some(prev) = self.last_mass {
            self.steps += 1;
            if prev > 0.0 && dt > 0.0 {
                let rate = (mass - prev).abs() / (prev * dt);
                self.max_relative_mass_rate = self.max_relative_mass_rate.max(rate);
            }
        }
        self.last_mass = Some(mass);
        self.min_u = state.u.iter().fold(self.min_u, |m, &x| m.min(x));
        self.min_v = state.v.iter().fold(self.min_v, |m, &x| m.min(x));
    }
}

/// Full diagnostics trajectory and outcome of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config_hash: String,
    pub t_start: f64,
    pub t_end: f64,
    pub snapshots: Vec<Snapshot>,
    pub classification: Classification,
    pub bound_checks: Option<BoundChecks>,
    pub final_state: State,
    pub steps: usize,
    /// Smallest `u` and `v` seen over all accepted steps.
    pub min_u: f64,
    pub min_v: f64,
}

impl RunRecord {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("run record serializes")
    }
}

pub fn write_snapshots_csv<W: Write>(mut w: W, snapshots: &[Snapshot]) -> io::Result<()> {
    writeln!(w, "{SNAPSHOT_CSV_HEADER}")?;
    for s in snapshots {
        let row = [
            s.t,
            s.mass,
            s.u_min,
            s.u_max,
            s.v_min,
            s.v_max,
            s.grad_v_max,
            s.lap_v_max,
        ]
        .map(fmt_f64);
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}
