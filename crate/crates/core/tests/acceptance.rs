//! Acceptance suite. Criteria run in order; the oracle gate must pass before
//! any persistence experiment is attempted. One PASS/FAIL line per criterion.

mod common;

use std::io::Write;
use std::time::{Duration, Instant};

use chemotaxis::diagnostics::{Classification, RunRecord, StepAudit};
use chemotaxis::experiments::{pullback, run_sweep, SweepAxis, SweepSpec};
use chemotaxis::model::{CoefficientField, CoefficientLabel, Coefficients, GridDomain, Profile, RunConfig, Trig, TrigTerm};
use chemotaxis::oracle::{brute_force_reference, oracle_cases, sup_error};
use chemotaxis::solver::simulate;
use rayon::prelude::*;

const ORACLE_CASE_BUDGET: Duration = Duration::from_secs(5);
const RANDOM_SUITE_BUDGET: Duration = Duration::from_secs(120);
const PULLBACK_BUDGET: Duration = Duration::from_secs(120);
const ETA_REQUIRED: f64 = 1e-3;
const STEADY_TOLERANCE: f64 = 1e-3;
const MASS_RATE_TOLERANCE: f64 = 1e-10;
const PULLBACK_FINAL_GAP: f64 = 1e-4;
const PULLBACK_ETA: f64 = 1e-3;
const RESPONSE_RATIO: (f64, f64) = (1.5, 2.5);
const CONVERGENCE_RATIO: f64 = 1.8;

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: String) -> Outcome {
    Outcome { passed, detail }
}

// Written to stderr directly so the lines survive test output capture.
fn report(results: &mut Vec<(usize, bool)>, n: usize, name: &str, o: Outcome) {
    let status = if o.passed { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "[{status}] {n} {name}: {}", o.detail);
    results.push((n, o.passed));
}

fn oracle_gate() -> Outcome {
    let mut ok = true;
    let mut parts = Vec::new();
    for case in oracle_cases() {
        let start = Instant::now();
        let r = case.evaluate();
        let elapsed = start.elapsed();
        match r {
            Ok(o) => {
                let timed = !matches!(o.name.as_str(), "heat_eigenmode_imex" | "decoupled_logistic")
                    || elapsed < ORACLE_CASE_BUDGET;
                ok &= o.passed && timed;
                parts.push(format!("{} {:.2e}<={:.0e} ({:.2?})", o.name, o.value, o.tolerance, elapsed));
            }
            Err(e) => {
                ok = false;
                parts.push(format!("{}: {e}", case.name));
            }
        }
    }
    outcome(ok, parts.join("; "))
}

struct RandomRun {
    label: String,
    record: RunRecord,
    audit: StepAudit,
}

fn random_suite() -> (Vec<RandomRun>, Duration) {
    let start = Instant::now();
    let specs: Vec<(u64, usize, f64)> = (0..10u64)
        .map(|k| {
            let dimension = if k < 5 { 1 } else { 2 };
            // every other run starts from data dipping to 1e-3
            let u_min = if k % 2 == 0 { 1e-3 } else { 0.2 };
            (1000 + k, dimension, u_min)
        })
        .collect();
    let runs = specs
        .par_iter()
        .map(|&(seed, dimension, u_min)| {
            let config = common::random_h2_config(seed, dimension, u_min, 50.0);
            let mut audit = StepAudit::new(&config.domain);
            let record = simulate(&config, &mut [&mut audit]).expect("randomized run succeeds");
            RandomRun {
                label: format!("seed {seed} {dimension}D min u0 {u_min}"),
                record,
                audit,
            }
        })
        .collect();
    (runs, start.elapsed())
}

fn mass_bounds(runs: &[RandomRun], elapsed: Duration) -> Outcome {
    let mut ok = elapsed < RANDOM_SUITE_BUDGET;
    let mut worst_ratio = 0.0f64;
    let mut worst_tail = 0.0f64;
    for r in runs {
        match &r.record.bound_checks {
            Some(b) => {
                let tail_ok = b.m1_eventual <= b.m1_bound;
                if !(b.mass_envelope_ok && tail_ok) {
                    ok = false;
                    println!("    {}: envelope ratio {:e}, tail mass {:e} vs {:e}", r.label, b.worst_envelope_ratio, b.m1_eventual, b.m1_bound);
                }
                worst_ratio = worst_ratio.max(b.worst_envelope_ratio);
                worst_tail = worst_tail.max(b.m1_eventual / b.m1_bound);
            }
            None => {
                ok = false;
                println!("    {}: no bound checks", r.label);
            }
        }
    }
    outcome(
        ok,
        format!(
            "{} runs in {elapsed:.1?}; worst mass/envelope {worst_ratio:.4}, worst tail mass/(M~1+1) {worst_tail:.4}",
            runs.len()
        ),
    )
}

fn persistence(runs: &[RandomRun]) -> Outcome {
    let mut ok = true;
    let mut eta_min = f64::INFINITY;
    for r in runs {
        match r.record.classification {
            Classification::Persistent { eta_hat, .. } if eta_hat >= ETA_REQUIRED => {
                eta_min = eta_min.min(eta_hat);
            }
            ref other => {
                ok = false;
                println!("    {}: {other:?}", r.label);
            }
        }
    }
    let dips = runs.iter().filter(|r| r.record.snapshots[0].u_min <= 1.0001e-3).count();
    ok &= dips >= 5;
    outcome(
        ok,
        format!("all Persistent with eta_hat >= {ETA_REQUIRED:e}; empirical uniform eta = {eta_min:.6e}; {dips} runs start at min u0 = 1e-3"),
    )
}

fn steady_state() -> Outcome {
    let mut c = common::smoke(100.0, 64);
    c.params.chi = 0.5;
    c.dt_max = 0.01;
    let rec = simulate(&c, &mut []).expect("steady run");
    let s = &rec.final_state;
    let err = s.u.iter().chain(&s.v).fold(0.0f64, |m, x| m.max((x - 1.0).abs()));
    outcome(err <= STEADY_TOLERANCE, format!("sup distance to (1, 1) at t=100: {err:.3e}"))
}

fn conservation_and_positivity(runs: &[RandomRun]) -> Outcome {
    let cases: Vec<(u64, usize, f64)> = vec![(7, 1, 1.5), (8, 1, -2.0), (9, 2, 1.0), (10, 2, 3.0)];
    let audits: Vec<(StepAudit, f64)> = cases
        .par_iter()
        .map(|&(seed, dimension, chi)| {
            let c = common::zero_reaction_config(seed, dimension, chi);
            let mut audit = StepAudit::new(&c.domain);
            let rec = simulate(&c, &mut [&mut audit]).expect("zero-reaction run");
            let m0 = rec.snapshots[0].mass;
            let m1 = rec.snapshots.last().unwrap().mass;
            (audit, ((m1 - m0) / m0).abs() / (rec.t_end - rec.t_start))
        })
        .collect();
    let worst_rate = audits
        .iter()
        .fold(0.0f64, |m, (a, drift)| m.max(a.max_relative_mass_rate).max(*drift));
    let min_u = runs
        .iter()
        .map(|r| r.audit.min_u)
        .chain(audits.iter().map(|(a, _)| a.min_u))
        .fold(f64::INFINITY, f64::min);
    let min_v = runs
        .iter()
        .map(|r| r.audit.min_v)
        .chain(audits.iter().map(|(a, _)| a.min_v))
        .fold(f64::INFINITY, f64::min);
    let steps: usize = runs.iter().map(|r| r.audit.steps).chain(audits.iter().map(|(a, _)| a.steps)).sum();
    outcome(
        worst_rate <= MASS_RATE_TOLERANCE && min_u >= 0.0 && min_v >= 0.0,
        format!("max relative mass rate {worst_rate:.2e}; over {steps} steps min u {min_u:.3e}, min v {min_v:.3e}"),
    )
}

fn pullback_config() -> RunConfig {
    let mut c = common::smoke(1.0, 32);
    c.coefficients = Coefficients {
        a0: CoefficientField::trig_sum(
            CoefficientLabel::A0,
            1.0,
            vec![TrigTerm {
                amplitude: 0.2,
                func: Trig::Sin,
                omega_t: 1.0,
                wave: [0.0, 0.0],
                phase: 0.0,
            }],
        ),
        ..Coefficients::constant(1.0, 1.0, 0.0)
    };
    c.dt_max = 0.01;
    c.record_every = 1.0;
    c
}

fn pullback_entire() -> Outcome {
    let start = Instant::now();
    let r = pullback(&pullback_config(), &[10.0, 20.0, 40.0, 80.0]).expect("pullback runs");
    let elapsed = start.elapsed();
    let decreasing = r.gaps_strictly_decreasing();
    let last = *r.cauchy_gaps.last().unwrap();
    outcome(
        decreasing && last < PULLBACK_FINAL_GAP && r.eta_entire > PULLBACK_ETA && elapsed < PULLBACK_BUDGET,
        format!("gaps {:?}, eta_entire {:.4e} ({elapsed:.2?})", r.cauchy_gaps.iter().map(|g| format!("{g:.2e}")).collect::<Vec<_>>(), r.eta_entire),
    )
}

fn response(base: &RunConfig, shift: f64) -> f64 {
    let mut perturbed = base.clone();
    perturbed.initial.u = match perturbed.initial.u {
        Profile::CosinePerturbed { base, amplitude, mode } => Profile::CosinePerturbed {
            base: base + shift,
            amplitude,
            mode,
        },
        Profile::RandomSmooth { seed, min, max } => Profile::RandomSmooth {
            seed,
            min: min + shift,
            max: max + shift,
        },
        Profile::Uniform { value } => Profile::Uniform { value: value + shift },
    };
    let a = simulate(base, &mut []).expect("base run").final_state;
    let b = simulate(&perturbed, &mut []).expect("perturbed run").final_state;
    a.sup_distance(&b)
}

fn continuous_dependence() -> Outcome {
    let mut smoke = common::smoke(1.0, 64);
    smoke.dt_max = 1e-3;
    let mut random = common::random_h2_config(77, 2, 0.1, 1.0);
    random.dt_max = 1e-3;
    let mut ok = true;
    let mut parts = Vec::new();
    for (name, c) in [("smoke", smoke), ("random 2D", random)] {
        let r1 = response(&c, 1e-3);
        let r2 = response(&c, 5e-4);
        let ratio = r1 / r2;
        ok &= ratio >= RESPONSE_RATIO.0 && ratio <= RESPONSE_RATIO.1;
        parts.push(format!("{name}: responses {r1:.3e}, {r2:.3e}, ratio {ratio:.3}"));
    }
    outcome(ok, parts.join("; "))
}

fn grid_convergence() -> Outcome {
    let t_end = 0.25;
    let fine_cells = 256;
    let reference = brute_force_reference(&common::smoke(t_end, fine_cells), 1, 0.25)
        .expect("reference run")
        .final_state;
    let mut errors = Vec::new();
    for cells in [16usize, 32, 64] {
        let mut c = common::smoke(t_end, cells);
        c.dt_max = 0.05 / cells as f64;
        let coarse = simulate(&c, &mut []).expect("coarse run").final_state;
        let factor = fine_cells / cells;
        let ru = c.domain.restrict(&reference.u, factor);
        let rv = c.domain.restrict(&reference.v, factor);
        errors.push(sup_error(&coarse.u, &ru).max(sup_error(&coarse.v, &rv)));
    }
    let ratios: Vec<f64> = errors.windows(2).map(|w| w[0] / w[1]).collect();
    outcome(
        ratios.iter().all(|&r| r >= CONVERGENCE_RATIO),
        format!("errors N=16,32,64: {errors:?}; ratios {ratios:.3?}", errors = errors.iter().map(|e| format!("{e:.3e}")).collect::<Vec<_>>()),
    )
}

fn sweep_determinism() -> Outcome {
    let mut base = common::random_h2_config(4242, 2, 0.1, 2.0);
    base.domain = GridDomain::rectangle([1.0, 1.0], [16, 16]).unwrap();
    let axes = vec![
        SweepAxis {
            path: "model.chi".into(),
            values: vec![0.0.into(), 0.5.into(), 1.0.into(), 4.0.into()],
        },
        SweepAxis {
            path: "initial.u.seed".into(),
            values: vec![1.into(), 2.into(), 3.into()],
        },
    ];
    let dir = tempfile::tempdir().unwrap();
    let mut tables = Vec::new();
    for p in [1usize, 8] {
        let out = dir.path().join(format!("p{p}"));
        let spec = SweepSpec::new(&base, axes.clone(), p, out.clone()).expect("base converts");
        run_sweep(&spec).expect("sweep runs").write(&out).expect("sweep writes");
        tables.push(std::fs::read(out.join("phase.csv")).unwrap());
    }
    outcome(
        tables[0] == tables[1],
        format!("12-point phase tables, {} bytes, identical: {}", tables[0].len(), tables[0] == tables[1]),
    )
}

#[test]
fn acceptance() {
    let mut results = Vec::new();
    let gate = oracle_gate();
    let gate_ok = gate.passed;
    report(&mut results, 1, "oracle gate", gate);
    if !gate_ok {
        for (n, name) in [(2, "mass bound"), (3, "pointwise persistence"), (6, "pullback entire solution")] {
            report(&mut results, n, name, outcome(false, "blocked by oracle gate".into()));
        }
    } else {
        let (runs, elapsed) = random_suite();
        report(&mut results, 2, "mass bound", mass_bounds(&runs, elapsed));
        report(&mut results, 3, "pointwise persistence", persistence(&runs));
        report(&mut results, 4, "constant-coefficient steady state", steady_state());
        report(&mut results, 5, "conservation and positivity", conservation_and_positivity(&runs));
        report(&mut results, 6, "pullback entire solution", pullback_entire());
    }
    report(&mut results, 7, "continuous dependence", continuous_dependence());
    report(&mut results, 8, "grid convergence", grid_convergence());
    report(&mut results, 9, "sweep determinism", sweep_determinism());
    let failed: Vec<usize> = results.iter().filter(|r| !r.1).map(|r| r.0).collect();
    assert!(failed.is_empty(), "failed criteria: {failed:?}");
}
