#![allow(dead_code)]

use chemotaxis::hypothesis::{check_h2, Window};
use chemotaxis::model::{
    CoefficientField, CoefficientLabel, Coefficients, GridDomain, InitialData, ModelParams,
    Profile, RunConfig, Trig, TrigTerm,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn term(rng: &mut ChaCha8Rng, amplitude: f64, dimension: usize) -> TrigTerm {
    let pi = std::f64::consts::PI;
    let mut wave = [0.0, 0.0];
    for w in wave.iter_mut().take(dimension) {
        *w = pi * rng.gen_range(0..3) as f64;
    }
    TrigTerm {
        amplitude,
        func: if rng.gen_bool(0.5) { Trig::Sin } else { Trig::Cos },
        omega_t: rng.gen_range(0.2..2.0),
        wave,
        phase: rng.gen_range(0.0..2.0 * pi),
    }
}

/// Random space-time dependent configuration satisfying (H2), with random
/// smooth initial data whose minimum is `u_min`.
pub fn random_h2_config(seed: u64, dimension: usize, u_min: f64, t_end: f64) -> RunConfig {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let chi = rng.gen_range(0.2..2.0) * if rng.gen_bool(0.8) { 1.0 } else { -1.0 };
        let mu = rng.gen_range(0.5..1.5);
        let lambda = rng.gen_range(0.5..2.0);
        let params = ModelParams::new(chi, 1.0, lambda, mu, dimension).unwrap();
        let (domain, lengths) = if dimension == 1 {
            let l = rng.gen_range(0.8..1.5);
            (GridDomain::interval(l, 64).unwrap(), l)
        } else {
            let l = [rng.gen_range(0.8..1.2), rng.gen_range(0.8..1.2)];
            (GridDomain::rectangle(l, [32, 32]).unwrap(), l[0] * l[1])
        };
        let threshold = dimension as f64 * mu * chi.abs() / 4.0;
        let a0_off = rng.gen_range(0.6..1.5);
        let a0 = CoefficientField::trig_sum(
            CoefficientLabel::A0,
            a0_off,
            vec![term(&mut rng, 0.3 * a0_off, dimension), term(&mut rng, 0.1, dimension)],
        );
        let a1_amp = rng.gen_range(0.05..0.3);
        let a1_off = threshold + a1_amp + rng.gen_range(0.2..1.0);
        let a1 = CoefficientField::trig_sum(CoefficientLabel::A1, a1_off, vec![term(&mut rng, a1_amp, dimension)]);
        let a2_off = rng.gen_range(-0.15..0.3) / lengths;
        let a2 = CoefficientField::trig_sum(CoefficientLabel::A2, a2_off, vec![term(&mut rng, 0.05, dimension)]);
        let coefficients = Coefficients { a0, a1, a2 };
        let initial = InitialData {
            u: Profile::RandomSmooth {
                seed: rng.gen::<u32>() as u64,
                min: u_min,
                max: rng.gen_range(1.0..3.0),
            },
            v: Profile::RandomSmooth {
                seed: rng.gen::<u32>() as u64,
                min: 0.05,
                max: rng.gen_range(0.5..2.0),
            },
        };
        let mut config = RunConfig::new(params, coefficients, domain, initial, 0.0, t_end);
        config.dt_max = 0.01;
        config.record_every = 0.25;
        let window = Window::new(0.0, t_end);
        let h2 = check_h2(&config.params, &config.coefficients, &config.domain, &window).unwrap();
        if h2.satisfied {
            config.validate().unwrap();
            return config;
        }
    }
}

/// Random data with all reaction coefficients zero.
pub fn zero_reaction_config(seed: u64, dimension: usize, chi: f64) -> RunConfig {
    let mut c = random_h2_config(seed, dimension, 0.01, 1.0);
    c.params.chi = chi;
    c.coefficients = Coefficients::constant(0.0, 0.0, 0.0);
    c.record_every = 0.05;
    c
}

/// The 1D smoke problem truncated to `t_end`.
pub fn smoke(t_end: f64, cells: usize) -> RunConfig {
    let mut c = chemotaxis::oracle::smoke_config();
    c.domain = GridDomain::interval(1.0, cells).unwrap();
    c.t_end = t_end;
    c.record_every = t_end / 10.0;
    c
}
