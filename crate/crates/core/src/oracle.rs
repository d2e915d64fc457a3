//! Independent reference solutions used to validate the solver.
//!
//! Analytic solutions cover the linear heat flow and the decoupled (`chi = 0`)
//! homogeneous problem. The brute-force reference runs a fully explicit Euler
//! integrator on a refined grid with a small step and restricts the result by
//! cell averaging, so agreement with the IMEX solver is evidence rather than
//! tautology.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diagnostics::{RunRecord, StepAudit};
use crate::model::{
    Coefficients, GridDomain, InitialData, ModelError, ModelParams, Profile, RunConfig, Scheme,
    State,
};
use crate::solver::{nonlocal_mass, simulate, simulate_observed, Observer, SolverError};

/// Largest refined cell count [`brute_force_reference`] accepts.
pub const REFERENCE_CELL_BUDGET: usize = 1 << 18;
/// Default reference step as a fraction of the explicit diffusion limit.
pub const DEFAULT_REFINE_TIME: f64 = 1.0 / 64.0;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("oracle precondition violated: {0}")]
    PreconditionViolated(String),
    #[error("refined grid has {cells} cells, budget is {limit}")]
    BudgetExceeded { cells: usize, limit: usize },
    #[error("golden file: {0}")]
    Golden(String),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// `exp(-|k pi / L|^2 t) * prod cos(k pi x / L)` at the cell centers.
pub fn heat_eigenmode_solution(k: u32, t: f64, domain: &GridDomain) -> Vec<f64> {
    let wave: Vec<f64> = (0..domain.dimension())
        .map(|a| k as f64 * PI / domain.length(a))
        .collect();
    let decay = (-wave.iter().map(|w| w * w).sum::<f64>() * t).exp();
    domain
        .centers()
        .map(|x| decay * wave.iter().zip(x).map(|(w, xa)| (w * xa).cos()).product::<f64>())
        .collect()
}

/// `u' = u (r - b u)` in closed form.
fn logistic(r: f64, b: f64, u0: f64, t: f64) -> f64 {
    if u0 == 0.0 {
        0.0
    } else if r == 0.0 {
        u0 / (1.0 + b * u0 * t)
    } else if r > 0.0 {
        let k = r / b;
        k / (1.0 + (k - u0) / u0 * (-r * t).exp())
    } else {
        u0 * (r * t).exp() / (1.0 + b * u0 * (r * t).exp_m1() / r)
    }
}

fn simpson(a: f64, b: f64, fa: f64, fm: f64, fb: f64) -> f64 {
    (b - a) / 6.0 * (fa + 4.0 * fm + fb)
}

#[allow(clippy::too_many_arguments)]
fn adaptive_simpson(
    f: &dyn Fn(f64) -> f64,
    a: f64,
    b: f64,
    fa: f64,
    fm: f64,
    fb: f64,
    whole: f64,
    tol: f64,
    depth: u32,
) -> f64 {
    let m = 0.5 * (a + b);
    let (lm, rm) = (0.5 * (a + m), 0.5 * (m + b));
    let (flm, frm) = (f(lm), f(rm));
    let left = simpson(a, m, fa, flm, fm);
    let right = simpson(m, b, fm, frm, fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    adaptive_simpson(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1)
        + adaptive_simpson(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1)
}

/// Adaptive Simpson quadrature to absolute tolerance `tol`.
pub fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    if a == b {
        return 0.0;
    }
    let (fa, fb, fm) = (f(a), f(b), f(0.5 * (a + b)));
    let whole = simpson(a, b, fa, fm, fb);
    adaptive_simpson(f, a, b, fa, fm, fb, whole, tol, 50)
}

/// Spatially homogeneous solution of the `chi = 0` problem with constant
/// coefficients: logistic `u`, and `v` from `tau v' = -lambda v + mu u` by
/// integrating-factor quadrature.
pub fn decoupled_homogeneous_solution(
    params: &ModelParams,
    coeffs: &Coefficients,
    domain: &GridDomain,
    u0: f64,
    v0: f64,
    t: f64,
) -> Result<(f64, f64), OracleError> {
    if params.chi != 0.0 {
        return Err(OracleError::PreconditionViolated(format!(
            "decoupled solution needs chi = 0, got {}",
            params.chi
        )));
    }
    let (a0, a1, a2) = coeffs.constants().ok_or_else(|| {
        OracleError::PreconditionViolated("decoupled solution needs constant coefficients".into())
    })?;
    let b = a1 + a2 * domain.measure();
    if b <= 0.0 {
        return Err(OracleError::PreconditionViolated(format!(
            "a1 + a2 |Omega| = {b} must be positive"
        )));
    }
    if u0 < 0.0 || v0 < 0.0 || t < 0.0 {
        return Err(OracleError::PreconditionViolated(
            "needs u0, v0 >= 0 and t >= 0".into(),
        ));
    }
    let u = |s: f64| logistic(a0, b, u0, s);
    let rate = params.lambda / params.tau;
    let integrand = |s: f64| (-rate * (t - s)).exp() * u(s);
    let v = v0 * (-rate * t).exp() + params.mu / params.tau * integrate(&integrand, 0.0, t, 1e-10);
    Ok((u(t), v))
}

/// Explicit diffusion limit for `u` and `v` on `domain`.
fn explicit_diffusion_limit(params: &ModelParams, domain: &GridDomain) -> f64 {
    let rate: f64 = (0..domain.dimension())
        .map(|k| 2.0 / (domain.spacing(k) * domain.spacing(k)))
        .sum();
    (1.0 / rate).min(params.tau / (rate + params.lambda))
}

/// Fully explicit run on a `refine_space`-times finer grid with step
/// `refine_time` times the explicit diffusion limit, observed on the
/// original grid by cell averaging.
pub fn brute_force_reference(
    config: &RunConfig,
    refine_space: usize,
    refine_time: f64,
) -> Result<RunRecord, OracleError> {
    if refine_space == 0 || !(refine_time > 0.0 && refine_time <= 1.0) {
        return Err(OracleError::PreconditionViolated(format!(
            "need refine_space >= 1 and refine_time in (0, 1], got {refine_space}, {refine_time}"
        )));
    }
    let cells = config.domain.len() * refine_space.pow(config.domain.dimension() as u32);
    if cells > REFERENCE_CELL_BUDGET {
        return Err(OracleError::BudgetExceeded {
            cells,
            limit: REFERENCE_CELL_BUDGET,
        });
    }
    let fine = config.domain.refined(refine_space)?;
    let mut fine_config = config.clone();
    fine_config.dt_max = refine_time * explicit_diffusion_limit(&config.params, &fine);
    fine_config.domain = fine;
    fine_config.scheme = Scheme::FullyExplicit;
    fine_config.cfl_safety = 1.0;
    let observer = Observer {
        coarse: &config.domain,
        factor: refine_space,
    };
    Ok(simulate_observed(&fine_config, &mut [], Some(observer))?)
}

pub fn sup_error(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Norm {
    Sup,
    /// Relative mass change per unit time.
    Mass,
}

#[derive(Debug, Clone, PartialEq)]
enum CaseKind {
    /// IMEX eigenmode decay, relative to the mode amplitude.
    HeatEigenmode { base: f64, amplitude: f64, k: u32 },
    /// Brute-force reference against the same eigenmode.
    ReferenceEigenmode { base: f64, amplitude: f64, k: u32 },
    DecoupledLogistic { u0: f64, v0: f64 },
    Conservation,
    SteadyState,
    SmokeVsReference { refine_space: usize, refine_time: f64 },
}

/// One reference check: a configuration, the measured error quantity and its tolerance.
#[derive(Debug, Clone)]
pub struct OracleCase {
    pub name: &'static str,
    pub config: RunConfig,
    pub norm: Norm,
    pub tolerance: f64,
    kind: CaseKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseOutcome {
    pub name: String,
    pub config_hash: String,
    pub quantity: String,
    pub value: f64,
    pub tolerance: f64,
    pub passed: bool,
}

fn smoke_1d(chi: f64, cells: usize, t_end: f64) -> RunConfig {
    let domain = GridDomain::interval(1.0, cells).expect("valid grid");
    let initial = InitialData {
        u: Profile::CosinePerturbed {
            base: 1.0,
            amplitude: 0.5,
            mode: 1,
        },
        v: Profile::CosinePerturbed {
            base: 1.0,
            amplitude: 0.5,
            mode: 2,
        },
    };
    let mut c = RunConfig::new(
        ModelParams::new(chi, 1.0, 1.0, 1.0, 1).expect("valid params"),
        Coefficients::constant(1.0, 1.0, 0.0),
        domain,
        initial,
        0.0,
        t_end,
    );
    c.dt_max = 1e-3;
    c.record_every = t_end / 20.0;
    c
}

/// The standard smoke problem: `chi = 1`, (H2)-satisfying constants, 1D, `N = 64`, `t_end = 1`.
pub fn smoke_config() -> RunConfig {
    smoke_1d(1.0, 64, 1.0)
}

fn heat_config(base: f64, amplitude: f64, k: u32) -> RunConfig {
    let domain = GridDomain::interval(1.0, 128).expect("valid grid");
    let mut c = RunConfig::new(
        ModelParams::new(0.0, 1.0, 1.0, 1.0, 1).expect("valid params"),
        Coefficients::constant(0.0, 0.0, 0.0),
        domain,
        InitialData {
            u: Profile::CosinePerturbed {
                base,
                amplitude,
                mode: k,
            },
            v: Profile::Uniform { value: 0.0 },
        },
        0.0,
        0.1,
    );
    c.dt_max = 1e-4;
    c.cfl_safety = 1.0;
    c.record_every = 0.01;
    c
}

pub fn oracle_cases() -> Vec<OracleCase> {
    let mut cases = Vec::new();
    let (base, amplitude, k) = (1.0, 0.5, 1);
    cases.push(OracleCase {
        name: "heat_eigenmode_imex",
        config: heat_config(base, amplitude, k),
        norm: Norm::Sup,
        tolerance: 0.01,
        kind: CaseKind::HeatEigenmode { base, amplitude, k },
    });
    cases.push(OracleCase {
        name: "heat_eigenmode_reference",
        config: heat_config(base, amplitude, k),
        norm: Norm::Sup,
        tolerance: 1e-4,
        kind: CaseKind::ReferenceEigenmode { base, amplitude, k },
    });

    let mut logistic = RunConfig::new(
        ModelParams::new(0.0, 1.0, 1.0, 1.0, 1).expect("valid params"),
        Coefficients::constant(1.0, 1.0, 0.0),
        GridDomain::interval(1.0, 16).expect("valid grid"),
        InitialData::uniform(2.0, 0.0),
        0.0,
        20.0,
    );
    logistic.dt_max = 0.01;
    logistic.record_every = 0.5;
    cases.push(OracleCase {
        name: "decoupled_logistic",
        config: logistic,
        norm: Norm::Sup,
        tolerance: 1e-6,
        kind: CaseKind::DecoupledLogistic { u0: 2.0, v0: 0.0 },
    });

    let mut conservative = RunConfig::new(
        ModelParams::new(1.0, 1.0, 1.0, 1.0, 2).expect("valid params"),
        Coefficients::constant(0.0, 0.0, 0.0),
        GridDomain::rectangle([1.0, 1.0], [16, 16]).expect("valid grid"),
        InitialData {
            u: Profile::RandomSmooth {
                seed: 11,
                min: 0.1,
                max: 2.0,
            },
            v: Profile::RandomSmooth {
                seed: 12,
                min: 0.0 + 0.5,
                max: 1.5,
            },
        },
        0.0,
        1.0,
    );
    conservative.dt_max = 5e-3;
    conservative.record_every = 0.1;
    cases.push(OracleCase {
        name: "zero_reaction_conservation",
        config: conservative,
        norm: Norm::Mass,
        tolerance: 1e-10,
        kind: CaseKind::Conservation,
    });

    let mut steady = smoke_1d(0.5, 64, 100.0);
    steady.dt_max = 0.01;
    steady.record_every = 1.0;
    cases.push(OracleCase {
        name: "constant_coefficient_steady_state",
        config: steady,
        norm: Norm::Sup,
        tolerance: 1e-3,
        kind: CaseKind::SteadyState,
    });

    cases.push(OracleCase {
        name: "smoke_vs_reference",
        config: smoke_config(),
        norm: Norm::Sup,
        tolerance: 1e-2,
        kind: CaseKind::SmokeVsReference {
            refine_space: 4,
            refine_time: 0.25,
        },
    });
    cases
}

impl OracleCase {
    /// Run the case and measure its error quantity.
    pub fn evaluate(&self) -> Result<CaseOutcome, OracleError> {
        let (quantity, value) = match &self.kind {
            CaseKind::HeatEigenmode { base, amplitude, k } => {
                let rec = simulate(&self.config, &mut [])?;
                let err = self.eigenmode_error(&rec.final_state, *base, *amplitude, *k);
                ("relative_sup_error_vs_eigenmode", err)
            }
            CaseKind::ReferenceEigenmode { base, amplitude, k } => {
                let rec = brute_force_reference(&self.config, 1, DEFAULT_REFINE_TIME)?;
                let exact = heat_eigenmode_solution(*k, rec.final_state.time, &self.config.domain);
                let perturbation: Vec<f64> = rec
                    .final_state
                    .u
                    .iter()
                    .map(|u| (u - base) / amplitude)
                    .collect();
                ("sup_error_vs_eigenmode", sup_error(&perturbation, &exact))
            }
            CaseKind::DecoupledLogistic { u0, v0 } => {
                let rec = simulate(&self.config, &mut [])?;
                let c = &self.config;
                let (u, v) = decoupled_homogeneous_solution(
                    &c.params,
                    &c.coefficients,
                    &c.domain,
                    *u0,
                    *v0,
                    c.t_end - c.t_start,
                )?;
                let s = &rec.final_state;
                let err = sup_error(&s.u, &vec![u; s.u.len()]).max(sup_error(&s.v, &vec![v; s.v.len()]));
                ("sup_error_vs_closed_form", err)
            }
            CaseKind::Conservation => {
                let mut audit = StepAudit::new(&self.config.domain);
                let rec = simulate(&self.config, &mut [&mut audit])?;
                let m0 = rec.snapshots[0].mass;
                let m1 = nonlocal_mass(&rec.final_state.u, &self.config.domain);
                let span = rec.t_end - rec.t_start;
                let drift = ((m1 - m0) / m0).abs() / span;
                ("relative_mass_drift_per_time", drift.max(audit.max_relative_mass_rate))
            }
            CaseKind::SteadyState => {
                let rec = simulate(&self.config, &mut [])?;
                let s = &rec.final_state;
                let err = sup_error(&s.u, &vec![1.0; s.u.len()]).max(sup_error(&s.v, &vec![1.0; s.v.len()]));
                ("sup_distance_to_steady_state", err)
            }
            CaseKind::SmokeVsReference {
                refine_space,
                refine_time,
            } => {
                let coarse = simulate(&self.config, &mut [])?;
                let reference = brute_force_reference(&self.config, *refine_space, *refine_time)?;
                let err = sup_error(&coarse.final_state.u, &reference.final_state.u);
                ("sup_error_vs_reference", err)
            }
        };
        Ok(CaseOutcome {
            name: self.name.to_string(),
            config_hash: self.config.hash(),
            quantity: quantity.to_string(),
            value,
            tolerance: self.tolerance,
            passed: value.is_finite() && value <= self.tolerance,
        })
    }

    fn eigenmode_error(&self, state: &State, base: f64, amplitude: f64, k: u32) -> f64 {
        let exact = heat_eigenmode_solution(k, state.time, &self.config.domain);
        let scale = exact.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        let perturbation: Vec<f64> = state.u.iter().map(|u| (u - base) / amplitude).collect();
        sup_error(&perturbation, &exact) / scale
    }
}

/// Frozen oracle output, compared on every oracle run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoldenRecord {
    pub case: String,
    pub config_hash: String,
    pub quantity: String,
    pub value: f64,
    pub tolerance: f64,
}

/// Allowed drift of a re-measured quantity against its golden value.
fn golden_tolerance(value: f64) -> f64 {
    1e-12 + 1e-8 * value.abs()
}

impl GoldenRecord {
    pub fn from_outcome(o: &CaseOutcome) -> Self {
        GoldenRecord {
            case: o.name.clone(),
            config_hash: o.config_hash.clone(),
            quantity: o.quantity.clone(),
            value: o.value,
            tolerance: golden_tolerance(o.value),
        }
    }
}

pub fn read_goldens(path: &Path) -> Result<Vec<GoldenRecord>, OracleError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| OracleError::Golden(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| OracleError::Golden(format!("{}: {e}", path.display())))
}

pub fn write_goldens(path: &Path, records: &[GoldenRecord]) -> Result<(), OracleError> {
    let text = serde_json::to_string_pretty(records).expect("golden records serialize");
    std::fs::write(path, text + "\n")
        .map_err(|e| OracleError::Golden(format!("cannot write {}: {e}", path.display())))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseReport {
    pub outcome: CaseOutcome,
    /// Why the case failed against its golden record, if it did.
    pub golden_failure: Option<String>,
}

impl CaseReport {
    pub fn passed(&self) -> bool {
        self.outcome.passed && self.golden_failure.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleReport {
    pub cases: Vec<CaseReport>,
    /// Lines describing golden changes when regenerating.
    pub diffs: Vec<String>,
}

impl OracleReport {
    pub fn all_passed(&self) -> bool {
        self.cases.iter().all(CaseReport::passed)
    }

    pub fn failures(&self) -> Vec<&str> {
        self.cases
            .iter()
            .filter(|c| !c.passed())
            .map(|c| c.outcome.name.as_str())
            .collect()
    }
}

fn golden_check(outcome: &CaseOutcome, golden: Option<&GoldenRecord>) -> Option<String> {
    let g = match golden {
        Some(g) => g,
        None => return Some("no golden record".into()),
    };
    if g.config_hash != outcome.config_hash {
        return Some(format!(
            "golden config hash {} does not match {}",
            g.config_hash, outcome.config_hash
        ));
    }
    if g.quantity != outcome.quantity {
        return Some(format!("golden quantity {} != {}", g.quantity, outcome.quantity));
    }
    if !((outcome.value - g.value).abs() <= g.tolerance) {
        return Some(format!(
            "value {:e} differs from golden {:e} by more than {:e}",
            outcome.value, g.value, g.tolerance
        ));
    }
    None
}

/// Evaluate every case, in order.
pub fn evaluate_all() -> Result<Vec<CaseOutcome>, OracleError> {
    oracle_cases().iter().map(OracleCase::evaluate).collect()
}

/// Attach golden comparisons to evaluated outcomes. Without `goldens`
/// only the per-case tolerances are checked.
pub fn compare_with_goldens(outcomes: Vec<CaseOutcome>, goldens: Option<&[GoldenRecord]>) -> OracleReport {
    let by_name: BTreeMap<&str, &GoldenRecord> = goldens
        .unwrap_or(&[])
        .iter()
        .map(|g| (g.case.as_str(), g))
        .collect();
    let cases = outcomes
        .into_iter()
        .map(|outcome| {
            let golden_failure =
                goldens.and_then(|_| golden_check(&outcome, by_name.get(outcome.name.as_str()).copied()));
            CaseReport {
                outcome,
                golden_failure,
            }
        })
        .collect();
    OracleReport {
        cases,
        diffs: Vec::new(),
    }
}

pub fn run_oracle_suite(goldens: Option<&[GoldenRecord]>) -> Result<OracleReport, OracleError> {
    Ok(compare_with_goldens(evaluate_all()?, goldens))
}

/// Diff lines between two golden sets.
pub fn golden_diffs(old: &[GoldenRecord], new: &[GoldenRecord]) -> Vec<String> {
    let mut diffs = Vec::new();
    for n in new {
        match old.iter().find(|g| g.case == n.case) {
            Some(g) if g == n => {}
            Some(g) => diffs.push(format!(
                "{}: {:e} -> {:e}{}",
                n.case,
                g.value,
                n.value,
                if g.config_hash != n.config_hash { " (config changed)" } else { "" }
            )),
            None => diffs.push(format!("{}: new golden {:e}", n.case, n.value)),
        }
    }
    for g in old {
        if !new.iter().any(|r| r.case == g.case) {
            diffs.push(format!("{}: removed", g.case));
        }
    }
    diffs
}

pub fn goldens_from(report: &OracleReport) -> Vec<GoldenRecord> {
    report
        .cases
        .iter()
        .map(|c| GoldenRecord::from_outcome(&c.outcome))
        .collect()
}

/// Re-run every case, rewrite the golden file and report what changed.
pub fn regenerate_goldens(path: &Path) -> Result<OracleReport, OracleError> {
    let old = read_goldens(path).unwrap_or_default();
    let mut report = run_oracle_suite(None)?;
    let records = goldens_from(&report);
    report.diffs = golden_diffs(&old, &records);
    write_goldens(path, &records)?;
    Ok(report)
}

/// Golden file shipped with the crate.
pub fn default_golden_path() -> &'static Path {
    Path::new(concat!(env!("CARGO_MANIFEST_DIR"), "/goldens/oracle.json"))
}
