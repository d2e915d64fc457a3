use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{GridDomain, ModelError, State};

/// Highest cosine mode index per axis used by [`Profile::RandomSmooth`].
const RANDOM_MODES: usize = 4;
/// Points per axis of the lattice that fixes the random profile's range.
/// Independent of the simulation grid so that refined grids see the same function.
const NORMALIZATION_LATTICE: usize = 256;

/// Spatial profile of one initial field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Profile {
    Uniform {
        value: f64,
    },
    /// `base + amplitude * prod_k cos(mode * pi * x_k / L_k)`
    CosinePerturbed {
        base: f64,
        amplitude: f64,
        mode: u32,
    },
    /// Random low-mode cosine sum rescaled to `[min, max]`; the lowest fifth
    /// of its range is clipped to `min`, producing a plateau at `min`.
    RandomSmooth {
        seed: u64,
        min: f64,
        max: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InitialData {
    pub u: Profile,
    pub v: Profile,
}

impl InitialData {
    pub fn uniform(u: f64, v: f64) -> Self {
        InitialData {
            u: Profile::Uniform { value: u },
            v: Profile::Uniform { value: v },
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        self.u.validate("initial.u")?;
        self.v.validate("initial.v")
    }

    /// Replace the seed of every random profile.
    pub fn reseed(&mut self, seed: u64) {
        for p in [&mut self.u, &mut self.v] {
            if let Profile::RandomSmooth { seed: s, .. } = p {
                *s = seed;
            }
        }
    }
}

impl Profile {
    fn validate(&self, field: &str) -> Result<(), ModelError> {
        let bad = |m: String| Err(ModelError::InvalidSpec(format!("{field}: {m}")));
        match *self {
            Profile::Uniform { value } => {
                if !(value.is_finite() && value >= 0.0) {
                    return bad(format!("uniform value must be finite and >= 0, got {value}"));
                }
            }
            Profile::CosinePerturbed {
                base, amplitude, ..
            } => {
                if !(base.is_finite() && amplitude.is_finite()) {
                    return bad("base and amplitude must be finite".into());
                }
                if amplitude.abs() >= base {
                    return bad(format!(
                        "amplitude {amplitude} must be smaller than base {base} to keep the field positive"
                    ));
                }
            }
            Profile::RandomSmooth { seed, min, max } => {
                if seed > i64::MAX as u64 {
                    return bad(format!("seed {seed} exceeds the TOML integer range"));
                }
                if !(min.is_finite() && max.is_finite() && min > 0.0 && max > min) {
                    return bad(format!("need 0 < min < max, got min={min}, max={max}"));
                }
            }
        }
        Ok(())
    }

    /// Sample the profile at the cell centers of `domain`.
    pub fn sample(&self, domain: &GridDomain) -> Result<Vec<f64>, ModelError> {
        self.validate("profile")?;
        let out = match *self {
            Profile::Uniform { value } => vec![value; domain.len()],
            Profile::CosinePerturbed {
                base,
                amplitude,
                mode,
            } => domain
                .centers()
                .map(|x| base + amplitude * cosine_mode(domain, mode as f64, mode as f64, x))
                .collect(),
            Profile::RandomSmooth { seed, min, max } => {
                let field = RandomCosineSum::new(seed, domain);
                let (lo, hi) = field.lattice_range(domain);
                let span = (hi - lo).max(f64::MIN_POSITIVE);
                domain
                    .centers()
                    .map(|x| {
                        let r = (field.eval(x) - lo) / span;
                        (min + (max - min) * (1.25 * r - 0.25)).clamp(min, max)
                    })
                    .collect()
            }
        };
        Ok(out)
    }
}

fn cosine_mode(domain: &GridDomain, k: f64, l: f64, x: [f64; 2]) -> f64 {
    let mut v = (k * PI * x[0] / domain.length(0)).cos();
    if domain.dimension() == 2 {
        v *= (l * PI * x[1] / domain.length(1)).cos();
    }
    v
}

struct RandomCosineSum {
    modes: Vec<(f64, f64, f64)>,
    lengths: [f64; 2],
}

impl RandomCosineSum {
    fn new(seed: u64, domain: &GridDomain) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let l_max = if domain.dimension() == 2 { RANDOM_MODES } else { 0 };
        let mut modes = Vec::new();
        for k in 0..=RANDOM_MODES {
            for l in 0..=l_max {
                if k == 0 && l == 0 {
                    continue;
                }
                let c: f64 = rng.gen_range(-1.0..1.0);
                modes.push((k as f64, l as f64, c / (1 + k + l) as f64));
            }
        }
        RandomCosineSum {
            modes,
            lengths: [domain.length(0), domain.length(1)],
        }
    }

    fn eval(&self, x: [f64; 2]) -> f64 {
        self.modes.iter().fold(0.0, |acc, &(k, l, c)| {
            acc + c
                * (k * PI * x[0] / self.lengths[0]).cos()
                * (l * PI * x[1] / self.lengths[1]).cos()
        })
    }

    fn lattice_range(&self, domain: &GridDomain) -> (f64, f64) {
        let m = NORMALIZATION_LATTICE;
        let ys = if domain.dimension() == 2 { m } else { 0 };
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for b in 0..=ys {
            for a in 0..=m {
                let x = [
                    self.lengths[0] * a as f64 / m as f64,
                    if ys == 0 { 0.0 } else { self.lengths[1] * b as f64 / m as f64 },
                ];
                let v = self.eval(x);
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        (lo, hi)
    }
}

/// Build the initial state at `t_start`.
pub fn make_initial_data(
    spec: &InitialData,
    domain: &GridDomain,
    t_start: f64,
) -> Result<State, ModelError> {
    spec.validate()?;
    let u = spec.u.sample(domain)?;
    let v = spec.v.sample(domain)?;
    State::new(t_start, u, v)
}
