use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ExperimentError;
use crate::model::{make_initial_data, RunConfig, State};
use crate::solver::simulate;

/// Final Cauchy gap below which a pullback sequence counts as converged.
pub const PULLBACK_GAP_TOLERANCE: f64 = 1e-4;

/// States at `t = 0` reached from the same data imposed at `t = -n`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PullbackResult {
    pub depths: Vec<f64>,
    pub states_at_zero: Vec<State>,
    /// Sup distance between consecutive entries of `states_at_zero`.
    pub cauchy_gaps: Vec<f64>,
    /// Minimum of `u` in the deepest state.
    pub eta_entire: f64,
}

impl PullbackResult {
    pub fn gaps_strictly_decreasing(&self) -> bool {
        self.cauchy_gaps.windows(2).all(|w| w[1] < w[0])
    }

    /// Strictly decreasing gaps ending below [`PULLBACK_GAP_TOLERANCE`].
    pub fn converged(&self) -> bool {
        self.gaps_strictly_decreasing()
            && self
                .cauchy_gaps
                .last()
                .is_some_and(|&g| g < PULLBACK_GAP_TOLERANCE)
    }
}

/// Run `config` over `[-n, 0]` for every depth `n`. The config's own time
/// window is ignored; its initial data is used unchanged at each start time.
pub fn pullback(config: &RunConfig, depths: &[f64]) -> Result<PullbackResult, ExperimentError> {
    if depths.is_empty() {
        return Err(ExperimentError::Config("pullback needs at least one depth".into()));
    }
    if !depths.iter().all(|&n| n.is_finite() && n > 0.0) || depths.windows(2).any(|w| w[1] <= w[0]) {
        return Err(ExperimentError::Config(format!(
            "depths must be positive and strictly increasing, got {depths:?}"
        )));
    }
    let configs = depths
        .iter()
        .map(|&n| {
            let mut c = config.clone();
            c.t_start = -n;
            c.t_end = 0.0;
            c.record_every = config.record_every.min(n);
            c.validate()?;
            let u0 = make_initial_data(&c.initial, &c.domain, c.t_start)?;
            let inf_u0 = u0.u.iter().fold(f64::INFINITY, |m, &x| m.min(x));
            if !(inf_u0 > 0.0) {
                return Err(ExperimentError::Config(format!(
                    "pullback needs inf u0 > 0, got {inf_u0}"
                )));
            }
            Ok(c)
        })
        .collect::<Result<Vec<_>, ExperimentError>>()?;

    let states_at_zero = configs
        .par_iter()
        .map(|c| simulate(c, &mut []).map(|r| r.final_state))
        .collect::<Result<Vec<_>, _>>()?;
    let cauchy_gaps = states_at_zero
        .windows(2)
        .map(|w| w[0].sup_distance(&w[1]))
        .collect();
    let deepest = states_at_zero.last().expect("at least one depth");
    let eta_entire = deepest.u.iter().fold(f64::INFINITY, |m, &x| m.min(x));
    Ok(PullbackResult {
        depths: depths.to_vec(),
        states_at_zero,
        cauchy_gaps,
        eta_entire,
    })
}
