use super::step::Stepper;
use super::SolverError;
use crate::diagnostics::{
    bound_check, persistence_verdict, snapshot, Classification, Monitor, RunRecord, Snapshot,
};
use crate::hypothesis::{theoretical_bounds, Window};
use crate::model::{make_initial_data, GridDomain, RunConfig, State};

/// Coarse grid on which snapshots are taken when the run itself uses a
/// `factor`-times refined grid.
#[derive(Debug, Clone, Copy)]
pub struct Observer<'a> {
    pub coarse: &'a GridDomain,
    pub factor: usize,
}

impl Observer<'_> {
    fn restrict(&self, s: &State) -> State {
        State {
            time: s.time,
            u: self.coarse.restrict(&s.u, self.factor),
            v: self.coarse.restrict(&s.v, self.factor),
        }
    }
}

/// Integrate `config` from `t_start` to `t_end`, recording a snapshot every
/// `record_every` and at the end, then classify the run.
pub fn simulate(
    config: &RunConfig,
    monitors: &mut [&mut dyn Monitor],
) -> Result<RunRecord, SolverError> {
    simulate_observed(config, monitors, None)
}

pub fn simulate_observed(
    config: &RunConfig,
    monitors: &mut [&mut dyn Monitor],
    observer: Option<Observer<'_>>,
) -> Result<RunRecord, SolverError> {
    let domain = &config.domain;
    let view_domain = observer.map_or(domain, |o| o.coarse);
    let view = |s: &State| -> State {
        match observer {
            Some(o) => o.restrict(s),
            None => s.clone(),
        }
    };

    let mut state = make_initial_data(&config.initial, domain, config.t_start)?;
    let mut stepper = Stepper::new(
        config.params,
        config.coefficients.clone(),
        domain.clone(),
        config.scheme,
        config.dt_max,
        config.cfl_safety,
        config.blowup_threshold,
    );
    let mut min_u = state.u.iter().fold(f64::INFINITY, |m, &x| m.min(x));
    let mut min_v = state.v.iter().fold(f64::INFINITY, |m, &x| m.min(x));
    let mut steps = 0usize;

    let record = |state: &State, snaps: &mut Vec<Snapshot>, monitors: &mut [&mut dyn Monitor]| {
        let viewed = view(state);
        let s = snapshot(&viewed, view_domain);
        for m in monitors.iter_mut() {
            m.on_record(&s, &viewed);
        }
        snaps.push(s);
    };

    for m in monitors.iter_mut() {
        m.on_step(&state, 0.0);
    }
    let mut snapshots = Vec::new();
    record(&state, &mut snapshots, monitors);

    let u_max0 = state.u.iter().fold(0.0f64, |m, &x| m.max(x));
    let mut blowup = (u_max0 > config.blowup_threshold).then_some(config.t_start);

    let span = config.t_end - config.t_start;
    let mut k = 1u64;
    while blowup.is_none() && state.time < config.t_end {
        let mut target = config.t_start + k as f64 * config.record_every;
        if target >= config.t_end || config.t_end - target < 1e-9 * config.record_every {
            target = config.t_end;
        }
        while state.time < target {
            let out = stepper.advance(&state, target)?;
            if out.flags.blowup_detected {
                blowup = Some(out.state.time);
                if out.dt_used > 0.0 {
                    state = out.state;
                }
                break;
            }
            state = out.state;
            steps += 1;
            min_u = state.u.iter().fold(min_u, |m, &x| m.min(x));
            min_v = state.v.iter().fold(min_v, |m, &x| m.min(x));
            for m in monitors.iter_mut() {
                m.on_step(&state, out.dt_used);
            }
        }
        if blowup.is_some() {
            if snapshots.last().map(|s| s.t) != Some(state.time) {
                record(&state, &mut snapshots, monitors);
            }
            break;
        }
        record(&state, &mut snapshots, monitors);
        k += 1;
    }

    let final_state = view(&state);
    let window = Window::new(config.t_start, config.t_end.max(config.t_start));
    let bounds = theoretical_bounds(&config.params, &config.coefficients, view_domain, &window).ok();
    let classification = match blowup {
        Some(t_blow) => Classification::BlowUp { t_blow },
        None if span <= 0.0 => Classification::Undetermined,
        None => {
            let steady_error = bounds.as_ref().and_then(|b| b.steady_state).map(|(us, vs)| {
                let du = final_state.u.iter().fold(0.0f64, |m, x| m.max((x - us).abs()));
                let dv = final_state.v.iter().fold(0.0f64, |m, x| m.max((x - vs).abs()));
                du.max(dv)
            });
            persistence_verdict(
                &snapshots,
                &config.persistence,
                config.t_start,
                config.t_end,
                steady_error,
            )
            .unwrap_or(Classification::Undetermined)
        }
    };
    let tail_start = config.persistence.tail_start(config.t_start, config.t_end);
    let bound_checks = bounds
        .as_ref()
        .and_then(|b| bound_check(&snapshots, b, config.t_start, tail_start).ok());

    Ok(RunRecord {
        config_hash: config.hash(),
        t_start: config.t_start,
        t_end: config.t_end,
        snapshots,
        classification,
        bound_checks,
        final_state,
        steps,
        min_u,
        min_v,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diagnostics::StepAudit;
    use crate::model::{Coefficients, InitialData, ModelParams};

    fn uniform_logistic(t_end: f64) -> RunConfig {
        let d = GridDomain::interval(1.0, 16).unwrap();
        let mut c = RunConfig::new(
            ModelParams::new(0.0, 1.0, 1.0, 1.0, 1).unwrap(),
            Coefficients::constant(1.0, 1.0, 0.0),
            d,
            InitialData::uniform(2.0, 0.0),
            0.0,
            t_end,
        );
        c.dt_max = 0.05;
        c.record_every = 0.5;
        c
    }

    #[test]
    fn empty_window_gives_single_snapshot() {
        let rec = simulate(&uniform_logistic(0.0), &mut []).unwrap();
        assert_eq!(rec.snapshots.len(), 1);
        assert_eq!(rec.classification, Classification::Undetermined);
        assert_eq!(rec.steps, 0);
    }

    #[test]
    fn uniform_logistic_converges() {
        let rec = simulate(&uniform_logistic(20.0), &mut []).unwrap();
        assert!(rec.final_state.u.iter().all(|&u| (u - 1.0).abs() < 1e-6));
        match rec.classification {
            Classification::Converged { steady_error, eta_hat, .. } => {
                assert!(steady_error < 1e-4);
                assert!((eta_hat - 1.0).abs() < 1e-3);
            }
            other => panic!("unexpected {other:?}"),
        }
        let b = rec.bound_checks.unwrap();
        assert!(b.mass_envelope_ok);
    }

    #[test]
    fn threshold_exceeded_at_start() {
        let mut c = uniform_logistic(5.0);
        c.coefficients = Coefficients::constant(0.0, 0.0, 0.0);
        c.blowup_threshold = 1.0;
        let rec = simulate(&c, &mut []).unwrap();
        assert_eq!(rec.classification, Classification::BlowUp { t_blow: 0.0 });
        assert_eq!(rec.steps, 0);
    }

    #[test]
    fn snapshots_strictly_increase_and_hit_record_times() {
        let mut c = uniform_logistic(3.0);
        c.record_every = 0.3;
        let rec = simulate(&c, &mut []).unwrap();
        assert!(rec.snapshots.windows(2).all(|w| w[1].t > w[0].t));
        assert_eq!(rec.snapshots.len(), 11);
        assert_eq!(rec.snapshots.last().unwrap().t, 3.0);
    }

    #[test]
    fn monitors_see_every_step() {
        let c = uniform_logistic(2.0);
        let mut audit = StepAudit::new(&c.domain);
        let rec = simulate(&c, &mut [&mut audit]).unwrap();
        assert_eq!(audit.steps, rec.steps);
        assert!(audit.min_u >= 0.0 && audit.min_v >= 0.0);
    }

    #[test]
    fn runs_are_bit_reproducible() {
        let c = uniform_logistic(2.0);
        let a = simulate(&c, &mut []).unwrap();
        let b = simulate(&c, &mut []).unwrap();
        assert_eq!(a, b);
    }
}
