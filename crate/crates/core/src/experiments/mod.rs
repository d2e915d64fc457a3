//! Command implementations: single runs, hypothesis checks, sweeps and the
//! pullback experiment, plus the artifacts they write.
//!
//! Exit codes: 0 success, 1 hypothesis or assertion failure, 2 configuration
//! error, 3 solver or I/O failure at run time.

mod pullback;
mod sweep;

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::Serialize;
use thiserror::Error;

use crate::diagnostics::{write_snapshots_csv, RunRecord};
use crate::hypothesis::{
    check_h1, check_h2, theoretical_bounds, HypothesisError, HypothesisReport, TheoreticalBounds,
    Window,
};
use crate::model::{HypothesisChoice, ModelError, RunConfig};
use crate::oracle::OracleError;
use crate::solver::{simulate, SolverError};

pub use pullback::{pullback, PullbackResult, PULLBACK_GAP_TOLERANCE};
pub use sweep::{
    run_sweep, set_path, PhaseRow, SweepAxis, SweepResult, SweepSpec, DEFAULT_SWEEP_BUDGET,
    NO_GUARANTEE, PHASE_FIXED_COLUMNS,
};

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error("config error: {0}")]
    Config(String),
    #[error("sweep has {runs} runs, budget is {budget}")]
    BudgetExceeded { runs: usize, budget: usize },
    #[error("hypothesis not satisfied: {0}")]
    HypothesisUnmet(String),
    #[error("assertion failed: {0}")]
    Assertion(String),
    #[error("solver error: {0}")]
    Solver(#[from] SolverError),
    #[error("i/o error: {0}")]
    Io(String),
}

impl ExperimentError {
    pub fn exit_code(&self) -> i32 {
        match self {
            ExperimentError::HypothesisUnmet(_) | ExperimentError::Assertion(_) => 1,
            ExperimentError::Config(_) | ExperimentError::BudgetExceeded { .. } => 2,
            ExperimentError::Solver(_) | ExperimentError::Io(_) => 3,
        }
    }
}

impl From<ModelError> for ExperimentError {
    fn from(e: ModelError) -> Self {
        ExperimentError::Config(e.to_string())
    }
}

impl From<HypothesisError> for ExperimentError {
    fn from(e: HypothesisError) -> Self {
        match e {
            HypothesisError::HypothesisViolated { .. } | HypothesisError::DegenerateDenominator(_) => {
                ExperimentError::HypothesisUnmet(e.to_string())
            }
            _ => ExperimentError::Config(e.to_string()),
        }
    }
}

impl From<OracleError> for ExperimentError {
    fn from(e: OracleError) -> Self {
        match e {
            OracleError::Solver(s) => ExperimentError::Solver(s),
            other => ExperimentError::Config(other.to_string()),
        }
    }
}

pub(crate) fn io_error(path: &Path, e: std::io::Error) -> ExperimentError {
    ExperimentError::Io(format!("{}: {e}", path.display()))
}

pub(crate) fn write_file(path: &Path, contents: &[u8]) -> Result<(), ExperimentError> {
    fs::write(path, contents).map_err(|e| io_error(path, e))
}

pub(crate) fn ensure_dir(path: &Path) -> Result<(), ExperimentError> {
    fs::create_dir_all(path).map_err(|e| io_error(path, e))
}

/// Hypothesis the config asks for, H2 unless its `[check]` section says otherwise.
pub fn configured_hypothesis(config: &RunConfig) -> HypothesisChoice {
    config.check.as_ref().map_or(HypothesisChoice::H2, |c| c.hypothesis)
}

/// Check `which` over the run window. H1 takes its constants from `[check] c_gamma`.
pub fn evaluate_hypothesis(
    config: &RunConfig,
    which: HypothesisChoice,
) -> Result<HypothesisReport, ExperimentError> {
    let window = Window::new(config.t_start, config.t_end);
    let report = match which {
        HypothesisChoice::H2 => check_h2(&config.params, &config.coefficients, &config.domain, &window)?,
        HypothesisChoice::H1 => {
            let table = config.check.as_ref().map(|c| c.c_gamma.as_slice()).unwrap_or(&[]);
            if table.is_empty() {
                return Err(ExperimentError::Config(
                    "(H1) depends on maximal Sobolev regularity constants C_{q+1} that cannot be \
                     computed here; supply them as [check] c_gamma = [[q, C], ...]"
                        .into(),
                ));
            }
            check_h1(&config.params, &config.coefficients, &config.domain, &window, table)?
        }
    };
    Ok(report)
}

fn bounds_for(config: &RunConfig) -> Option<TheoreticalBounds> {
    let window = Window::new(config.t_start, config.t_end);
    theoretical_bounds(&config.params, &config.coefficients, &config.domain, &window).ok()
}

#[derive(Debug, Clone, Serialize)]
pub struct CheckOutput {
    pub config_hash: String,
    pub report: HypothesisReport,
    pub bounds: Option<TheoreticalBounds>,
}

impl CheckOutput {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("check output serializes")
    }
}

/// Hypothesis report and derived bounds; the caller exits 1 unless `report.satisfied`.
pub fn check_command(
    config: &RunConfig,
    which: Option<HypothesisChoice>,
) -> Result<CheckOutput, ExperimentError> {
    let which = which.unwrap_or_else(|| configured_hypothesis(config));
    let report = evaluate_hypothesis(config, which)?;
    Ok(CheckOutput {
        config_hash: config.hash(),
        report,
        bounds: bounds_for(config),
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub config_hash: String,
    pub hypothesis: Option<HypothesisReport>,
    /// Why no hypothesis report could be produced.
    pub hypothesis_error: Option<String>,
    pub bounds: Option<TheoreticalBounds>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub record: RunRecord,
    pub report: RunReport,
    pub summary: String,
}

/// Simulate `config` and, with `output_dir`, write `snapshots.csv`,
/// `record.json`, `report.json` and `summary.txt` there.
pub fn run_command(config: &RunConfig, output_dir: Option<&Path>) -> Result<RunOutput, ExperimentError> {
    config.validate()?;
    let (hypothesis, hypothesis_error) = match evaluate_hypothesis(config, configured_hypothesis(config)) {
        Ok(r) => (Some(r), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let report = RunReport {
        config_hash: config.hash(),
        hypothesis,
        hypothesis_error,
        bounds: bounds_for(config),
    };
    let record = simulate(config, &mut [])?;
    let summary = summary_text(&record, &report);
    if let Some(dir) = output_dir {
        ensure_dir(dir)?;
        let mut csv = Vec::new();
        write_snapshots_csv(&mut csv, &record.snapshots).expect("writing to memory");
        write_file(&dir.join("snapshots.csv"), &csv)?;
        write_file(&dir.join("record.json"), record.to_json().as_bytes())?;
        let report_json = serde_json::to_string_pretty(&report).expect("report serializes");
        write_file(&dir.join("report.json"), report_json.as_bytes())?;
        write_file(&dir.join("summary.txt"), summary.as_bytes())?;
    }
    Ok(RunOutput {
        record,
        report,
        summary,
    })
}

fn summary_text(record: &RunRecord, report: &RunReport) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "config hash: {}", record.config_hash);
    let _ = writeln!(s, "window: [{}, {}], {} steps", record.t_start, record.t_end, record.steps);
    match &report.hypothesis {
        Some(h) => {
            let _ = writeln!(
                s,
                "{:?}: {} (local margin {:e}, nonlocal margin {:e})",
                h.which,
                if h.satisfied { "satisfied" } else { "not satisfied" },
                h.margin_local,
                h.margin_nonlocal
            );
            for n in &h.notes {
                let _ = writeln!(s, "  note: {n}");
            }
        }
        None => {
            let _ = writeln!(
                s,
                "hypothesis: not evaluated ({})",
                report.hypothesis_error.as_deref().unwrap_or("unknown")
            );
        }
    }
    if let Some(b) = &report.bounds {
        let _ = writeln!(s, "mass bound M~1 = {:e}, eventual bound M1 = {:e}", b.m_tilde_1, b.m1);
        if let Some((u, v)) = b.steady_state {
            let _ = writeln!(s, "constant steady state: u* = {u:e}, v* = {v:e}");
        }
    }
    let _ = writeln!(s, "classification: {}", record.classification.name());
    if let Some(eta) = record.classification.eta_hat() {
        let _ = writeln!(s, "eta_hat: {eta:e}");
    }
    if let Some(b) = &record.bound_checks {
        let _ = writeln!(
            s,
            "mass envelope ok: {} (worst ratio {:e}), tail sup mass {:e}, tail sup u {:e}",
            b.mass_envelope_ok, b.worst_envelope_ratio, b.m1_eventual, b.m2_eventual
        );
    }
    let _ = writeln!(s, "min u over run: {:e}, min v over run: {:e}", record.min_u, record.min_v);
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::CheckSettings;

    fn smoke(t_end: f64) -> RunConfig {
        let mut c = crate::oracle::smoke_config();
        c.t_end = t_end;
        c.record_every = t_end / 20.0;
        c
    }

    #[test]
    fn exit_codes() {
        assert_eq!(ExperimentError::Config("x".into()).exit_code(), 2);
        assert_eq!(ExperimentError::BudgetExceeded { runs: 2, budget: 1 }.exit_code(), 2);
        assert_eq!(ExperimentError::HypothesisUnmet("x".into()).exit_code(), 1);
        assert_eq!(ExperimentError::Io("x".into()).exit_code(), 3);
    }

    #[test]
    fn check_h2_smoke_is_satisfied() {
        let out = check_command(&smoke(1.0), None).unwrap();
        assert!(out.report.satisfied);
        assert!(out.report.margin_local > 0.0 && out.report.margin_nonlocal > 0.0);
        assert!(out.bounds.is_some());
    }

    #[test]
    fn check_tau_two_notes_precondition() {
        let mut c = smoke(1.0);
        c.params.tau = 2.0;
        let out = check_command(&c, Some(HypothesisChoice::H2)).unwrap();
        assert!(!out.report.satisfied);
        assert!(out.report.notes.iter().any(|n| n.contains("tau = 1")));
    }

    #[test]
    fn h1_without_table_is_config_error() {
        let err = check_command(&smoke(1.0), Some(HypothesisChoice::H1)).unwrap_err();
        assert_eq!(err.exit_code(), 2);
        assert!(err.to_string().contains("c_gamma"));
    }

    #[test]
    fn h1_with_table_runs() {
        let mut c = smoke(1.0);
        c.check = Some(CheckSettings {
            hypothesis: HypothesisChoice::H1,
            c_gamma: vec![(2.0, 1.0)],
        });
        let out = check_command(&c, None).unwrap();
        assert_eq!(out.report.which, HypothesisChoice::H1);
    }

    #[test]
    fn run_with_tau_two_still_runs() {
        let mut c = smoke(0.5);
        c.params.tau = 2.0;
        let out = run_command(&c, None).unwrap();
        assert!(!out.report.hypothesis.as_ref().unwrap().satisfied);
        assert!(out.summary.contains("tau = 1"));
    }

    #[test]
    fn run_writes_artifacts() {
        let dir = tempfile::tempdir().unwrap();
        let out = run_command(&smoke(1.0), Some(dir.path())).unwrap();
        for f in ["snapshots.csv", "record.json", "report.json", "summary.txt"] {
            assert!(dir.path().join(f).exists(), "{f}");
        }
        let csv = fs::read_to_string(dir.path().join("snapshots.csv")).unwrap();
        assert_eq!(csv.lines().count(), out.record.snapshots.len() + 1);
        let json = fs::read_to_string(dir.path().join("record.json")).unwrap();
        let back: RunRecord = serde_json::from_str(&json).unwrap();
        assert_eq!(back, out.record);
    }
}
