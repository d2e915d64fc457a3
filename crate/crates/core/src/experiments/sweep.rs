use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{ensure_dir, io_error, write_file, ExperimentError};
use crate::diagnostics::{fmt_f64, RunRecord};
use crate::hypothesis::{check_h2, Window};
use crate::model::RunConfig;
use crate::solver::simulate;

pub const DEFAULT_SWEEP_BUDGET: usize = 10_000;
/// Guarantee column for points outside (H2).
pub const NO_GUARANTEE: &str = "no theoretical guarantee";
pub const PHASE_FIXED_COLUMNS: [&str; 8] = [
    "h2_margin_local",
    "h2_margin_nonlocal",
    "h2_satisfied",
    "guarantee",
    "classification",
    "eta_hat",
    "m1_eventual",
    "m2_eventual",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    /// Dotted path into the config, e.g. `model.chi` or `domain.cells.0`.
    pub path: String,
    pub values: Vec<toml::Value>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SweepFile {
    base: toml::Value,
    #[serde(default = "one")]
    parallelism: usize,
    output_dir: Option<PathBuf>,
    budget: Option<usize>,
    #[serde(default)]
    axes: Vec<SweepAxis>,
}

fn one() -> usize {
    1
}

/// Cartesian parameter sweep over a base config.
///
/// ```toml
/// base = "smoke.toml"        # relative to this file, or an inline table
/// parallelism = 4
/// output_dir = "sweep_out"
/// budget = 10000             # optional
///
/// [[axes]]
/// path = "model.chi"
/// values = [0.0, 1.0, 2.0]
/// ```
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSpec {
    pub base: toml::Value,
    pub axes: Vec<SweepAxis>,
    pub parallelism: usize,
    pub output_dir: PathBuf,
    pub budget: usize,
    /// Overrides the seeds of random initial data in every point.
    pub seed: Option<u64>,
}

impl SweepSpec {
    pub fn new(
        base: &RunConfig,
        axes: Vec<SweepAxis>,
        parallelism: usize,
        output_dir: PathBuf,
    ) -> Result<Self, ExperimentError> {
        let base = toml::Value::try_from(base)
            .map_err(|e| ExperimentError::Config(format!("base config is not representable in TOML: {e}")))?;
        Ok(SweepSpec {
            base,
            axes,
            parallelism,
            output_dir,
            budget: DEFAULT_SWEEP_BUDGET,
            seed: None,
        })
    }

    /// Parse a sweep file; a string `base` is resolved relative to `dir`.
    pub fn from_toml_str(src: &str, dir: &Path) -> Result<Self, ExperimentError> {
        let file: SweepFile =
            toml::from_str(src).map_err(|e| ExperimentError::Config(format!("sweep spec: {e}")))?;
        let base = match file.base {
            toml::Value::String(p) => {
                let path = dir.join(p);
                let text = std::fs::read_to_string(&path).map_err(|e| {
                    ExperimentError::Config(format!("cannot read base config {}: {e}", path.display()))
                })?;
                toml::from_str::<toml::Value>(&text)
                    .map_err(|e| ExperimentError::Config(format!("{}: {e}", path.display())))?
            }
            t @ toml::Value::Table(_) => t,
            _ => {
                return Err(ExperimentError::Config(
                    "sweep base must be a path or an inline table".into(),
                ))
            }
        };
        let spec = SweepSpec {
            base,
            axes: file.axes,
            parallelism: file.parallelism,
            output_dir: file.output_dir.map_or_else(|| dir.join("sweep_out"), |p| dir.join(p)),
            budget: file.budget.unwrap_or(DEFAULT_SWEEP_BUDGET),
            seed: None,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self, ExperimentError> {
        let src = std::fs::read_to_string(path)
            .map_err(|e| ExperimentError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_toml_str(&src, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn run_count(&self) -> usize {
        self.axes
            .iter()
            .try_fold(1usize, |n, a| n.checked_mul(a.values.len()))
            .unwrap_or(usize::MAX)
    }

    pub fn validate(&self) -> Result<(), ExperimentError> {
        if self.axes.is_empty() {
            return Err(ExperimentError::Config("sweep needs at least one axis".into()));
        }
        if let Some(a) = self.axes.iter().find(|a| a.values.is_empty()) {
            return Err(ExperimentError::Config(format!("axis {} has no values", a.path)));
        }
        if self.parallelism == 0 {
            return Err(ExperimentError::Config("parallelism must be at least 1".into()));
        }
        let runs = self.run_count();
        if runs > self.budget {
            return Err(ExperimentError::BudgetExceeded {
                runs,
                budget: self.budget,
            });
        }
        Ok(())
    }

    /// Axis value indices of every point; the first axis varies slowest.
    pub fn points(&self) -> Vec<Vec<usize>> {
        let mut points = vec![Vec::new()];
        for axis in &self.axes {
            points = points
                .into_iter()
                .flat_map(|p| {
                    (0..axis.values.len()).map(move |i| {
                        let mut q = p.clone();
                        q.push(i);
                        q
                    })
                })
                .collect();
        }
        points
    }

    fn config_at(&self, index: usize, point: &[usize]) -> Result<RunConfig, ExperimentError> {
        let mut value = self.base.clone();
        for (axis, &i) in self.axes.iter().zip(point) {
            set_path(&mut value, &axis.path, axis.values[i].clone())?;
        }
        let mut config = RunConfig::from_toml_value(value)
            .and_then(|c| c.validate().map(|_| c))
            .map_err(|e| ExperimentError::Config(format!("sweep point {index}: {e}")))?;
        if let Some(seed) = self.seed {
            config.initial.reseed(seed);
        }
        Ok(config)
    }
}

/// Set `path` (dot separated; numeric segments index arrays) inside `root`,
/// creating missing tables. Integers written over floats become floats.
pub fn set_path(root: &mut toml::Value, path: &str, value: toml::Value) -> Result<(), ExperimentError> {
    let bad = |why: &str| ExperimentError::Config(format!("axis path {path}: {why}"));
    let segments: Vec<&str> = path.split('.').collect();
    if segments.iter().any(|s| s.is_empty()) {
        return Err(bad("empty segment"));
    }
    let mut node = root;
    for (k, seg) in segments.iter().enumerate() {
        let last = k + 1 == segments.len();
        let slot = match node {
            toml::Value::Table(t) => {
                if !t.contains_key(*seg) {
                    if last {
                        t.insert(seg.to_string(), value);
                        return Ok(());
                    }
                    t.insert(seg.to_string(), toml::Value::Table(toml::Table::new()));
                }
                t.get_mut(*seg).expect("present")
            }
            toml::Value::Array(a) => {
                let i: usize = seg.parse().map_err(|_| bad("arrays need a numeric index"))?;
                a.get_mut(i).ok_or_else(|| bad("array index out of range"))?
            }
            _ => return Err(bad("traverses a scalar")),
        };
        if last {
            *slot = match (&*slot, value) {
                (toml::Value::Float(_), toml::Value::Integer(i)) => toml::Value::Float(i as f64),
                (_, v) => v,
            };
            return Ok(());
        }
        node = slot;
    }
    unreachable!("loop returns on the last segment")
}

fn csv_value(v: &toml::Value) -> String {
    let s = match v {
        toml::Value::Float(f) => fmt_f64(*f),
        toml::Value::String(s) => s.clone(),
        other => other.to_string(),
    };
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s
    }
}

fn opt_f64(x: Option<f64>) -> String {
    x.map(fmt_f64).unwrap_or_default()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PhaseRow {
    pub index: usize,
    pub values: Vec<toml::Value>,
    pub h2_margin_local: f64,
    pub h2_margin_nonlocal: f64,
    pub h2_satisfied: bool,
    pub guarantee: String,
    pub classification: String,
    pub eta_hat: Option<f64>,
    pub m1_eventual: Option<f64>,
    pub m2_eventual: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub axis_paths: Vec<String>,
    pub rows: Vec<PhaseRow>,
    /// Per point, the run record or the solver error message.
    pub records: Vec<Result<RunRecord, String>>,
    /// Minimum `eta_hat` over points classified Persistent or Converged.
    pub uniform_eta: Option<f64>,
}

impl SweepResult {
    pub fn phase_csv(&self) -> String {
        let mut s = String::from("index");
        for p in &self.axis_paths {
            s.push(',');
            s.push_str(p);
        }
        for c in PHASE_FIXED_COLUMNS {
            s.push(',');
            s.push_str(c);
        }
        s.push('\n');
        for r in &self.rows {
            let _ = write!(s, "{}", r.index);
            for v in &r.values {
                let _ = write!(s, ",{}", csv_value(v));
            }
            let _ = writeln!(
                s,
                ",{},{},{},{},{},{},{},{}",
                fmt_f64(r.h2_margin_local),
                fmt_f64(r.h2_margin_nonlocal),
                r.h2_satisfied,
                csv_value(&toml::Value::String(r.guarantee.clone())),
                r.classification,
                opt_f64(r.eta_hat),
                opt_f64(r.m1_eventual),
                opt_f64(r.m2_eventual)
            );
        }
        s
    }

    pub fn summary_json(&self) -> String {
        let persistent = self
            .rows
            .iter()
            .filter(|r| matches!(r.classification.as_str(), "Persistent" | "Converged"))
            .count();
        let v = serde_json::json!({
            "runs": self.rows.len(),
            "persistent_or_converged": persistent,
            "uniform_eta": self.uniform_eta,
            "errors": self.rows.iter().filter(|r| r.error.is_some()).count(),
        });
        serde_json::to_string_pretty(&v).expect("summary serializes")
    }

    /// Write `phase.csv`, `summary.json` and `run_NNNN.json` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<(), ExperimentError> {
        ensure_dir(dir)?;
        write_file(&dir.join("phase.csv"), self.phase_csv().as_bytes())?;
        write_file(&dir.join("summary.json"), self.summary_json().as_bytes())?;
        for (i, rec) in self.records.iter().enumerate() {
            let text = match rec {
                Ok(r) => r.to_json(),
                Err(e) => serde_json::to_string_pretty(&serde_json::json!({ "error": e }))
                    .expect("error serializes"),
            };
            let path = dir.join(format!("run_{i:04}.json"));
            std::fs::write(&path, text).map_err(|e| io_error(&path, e))?;
        }
        Ok(())
    }
}

/// Run every point of `spec` on a pool of `spec.parallelism` threads. Rows are
/// ordered by point index whatever the pool size.
pub fn run_sweep(spec: &SweepSpec) -> Result<SweepResult, ExperimentError> {
    spec.validate()?;
    let points = spec.points();
    let configs = points
        .iter()
        .enumerate()
        .map(|(i, p)| spec.config_at(i, p))
        .collect::<Result<Vec<_>, _>>()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(spec.parallelism)
        .build()
        .map_err(|e| ExperimentError::Io(format!("thread pool: {e}")))?;
    let outcomes: Vec<(Result<RunRecord, String>, crate::hypothesis::HypothesisReport)> = pool
        .install(|| {
            configs
                .par_iter()
                .map(|c| {
                    let window = Window::new(c.t_start, c.t_end);
                    let h2 = check_h2(&c.params, &c.coefficients, &c.domain, &window)?;
                    Ok((simulate(c, &mut []).map_err(|e| e.to_string()), h2))
                })
                .collect::<Result<Vec<_>, ExperimentError>>()
        })?;

    let mut rows = Vec::with_capacity(points.len());
    let mut records = Vec::with_capacity(points.len());
    let mut uniform_eta: Option<f64> = None;
    for (index, (point, (record, h2))) in points.iter().zip(outcomes).enumerate() {
        let values = spec
            .axes
            .iter()
            .zip(point)
            .map(|(a, &i)| a.values[i].clone())
            .collect();
        let (classification, eta_hat, m1, m2, error) = match &record {
            Ok(r) => {
                let eta = r.classification.eta_hat();
                if let Some(e) = eta {
                    uniform_eta = Some(uniform_eta.map_or(e, |u| u.min(e)));
                }
                (
                    r.classification.name().to_string(),
                    eta,
                    r.bound_checks.as_ref().map(|b| b.m1_eventual),
                    r.bound_checks.as_ref().map(|b| b.m2_eventual),
                    None,
                )
            }
            Err(e) => ("SolverError".to_string(), None, None, None, Some(e.clone())),
        };
        rows.push(PhaseRow {
            index,
            values,
            h2_margin_local: h2.margin_local,
            h2_margin_nonlocal: h2.margin_nonlocal,
            h2_satisfied: h2.satisfied,
            guarantee: if h2.satisfied { "H2".into() } else { NO_GUARANTEE.into() },
            classification,
            eta_hat,
            m1_eventual: m1,
            m2_eventual: m2,
            error,
        });
        records.push(record);
    }
    Ok(SweepResult {
        axis_paths: spec.axes.iter().map(|a| a.path.clone()).collect(),
        rows,
        records,
        uniform_eta,
    })
}
