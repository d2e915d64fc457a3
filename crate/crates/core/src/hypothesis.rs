//! Coefficient extrema, the standing hypotheses (H1)/(H2), and the closed-form
//! bounds that hold under them: the mass bound, the logistic mass envelope and
//! the constant-coefficient steady state.
//!
//! Extrema over continuous `(t, x)` are taken by exhaustive sampling over the
//! closed domain (cell centers plus faces, boundary included) and a uniform set
//! of time samples. For smooth low-mode coefficients this is accurate to the
//! coefficient's modulus of continuity at the sampling resolution.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    CoefficientField, Coefficients, GridDomain, HypothesisChoice, ModelError, ModelParams,
};

#[derive(Debug, Error)]
pub enum HypothesisError {
    #[error("hypothesis violated: inf_t(a1_inf(t) - |Omega| (a2_inf(t))_-) = {margin} is not positive")]
    HypothesisViolated { margin: f64 },
    #[error("(H1) needs at least one user-supplied (q, C_{{q+1}}) pair")]
    EmptyConstantTable,
    #[error("invalid (q, C_{{q+1}}) pair ({q}, {c}): {reason}")]
    InvalidConstant { q: f64, c: f64, reason: String },
    #[error("steady state requires constant coefficients")]
    NotConstantCoefficients,
    #[error("a1 + a2 |Omega| = {0} is not positive")]
    DegenerateDenominator(f64),
    #[error(transparent)]
    Model(#[from] ModelError),
}

const SAMPLES_PER_UNIT_TIME: f64 = 32.0;
const MIN_TIME_SAMPLES: usize = 65;
const MAX_TIME_SAMPLES: usize = 2049;

/// Time window `[start, end]` with the number of uniform samples used for extrema.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Window {
    pub start: f64,
    pub end: f64,
    pub samples: usize,
}

impl Window {
    /// Window with a sample count that grows with its length.
    pub fn new(start: f64, end: f64) -> Self {
        let n = ((end - start).abs() * SAMPLES_PER_UNIT_TIME).ceil() as usize + 1;
        Window {
            start,
            end,
            samples: n.clamp(MIN_TIME_SAMPLES, MAX_TIME_SAMPLES),
        }
    }

    pub fn with_samples(start: f64, end: f64, samples: usize) -> Self {
        Window {
            start,
            end,
            samples,
        }
    }

    pub fn times(&self) -> Vec<f64> {
        if self.samples <= 1 || self.end == self.start {
            return vec![self.start];
        }
        let last = (self.samples - 1) as f64;
        (0..self.samples)
            .map(|k| {
                if k == self.samples - 1 {
                    self.end
                } else {
                    self.start + (self.end - self.start) * k as f64 / last
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefficientExtrema {
    pub a_inf: f64,
    pub a_sup: f64,
    pub times: Vec<f64>,
    /// `inf_x a(t_k, x)` per sampled time.
    pub a_inf_t: Vec<f64>,
    /// `sup_x a(t_k, x)` per sampled time.
    pub a_sup_t: Vec<f64>,
    pub spatial_samples: usize,
}

fn inf_sup_at(
    coeff: &CoefficientField,
    points: &[[f64; 2]],
    t: f64,
) -> Result<(f64, f64), ModelError> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &x in points {
        let a = coeff.evaluate(t, x)?;
        lo = lo.min(a);
        hi = hi.max(a);
    }
    Ok((lo, hi))
}

fn sample_times(coeffs: &[&CoefficientField], window: &Window) -> Result<Vec<f64>, ModelError> {
    if coeffs.iter().all(|c| c.is_autonomous()) {
        return Ok(vec![window.start]);
    }
    if window.samples < 2 {
        return Err(ModelError::invalid(
            "window.samples",
            "non-autonomous coefficients need at least two time samples",
        ));
    }
    Ok(window.times())
}

/// `a_inf`, `a_sup` and their per-time counterparts over the window and closed domain.
pub fn coefficient_extrema(
    coeff: &CoefficientField,
    domain: &GridDomain,
    window: &Window,
) -> Result<CoefficientExtrema, ModelError> {
    if let Some(c) = coeff.constant_value() {
        let times = window.times();
        let n = times.len();
        return Ok(CoefficientExtrema {
            a_inf: c,
            a_sup: c,
            times,
            a_inf_t: vec![c; n],
            a_sup_t: vec![c; n],
            spatial_samples: 0,
        });
    }
    let points = domain.closure_samples();
    let times = sample_times(&[coeff], window)?;
    let mut a_inf_t = Vec::with_capacity(times.len());
    let mut a_sup_t = Vec::with_capacity(times.len());
    for &t in &times {
        let (lo, hi) = inf_sup_at(coeff, &points, t)?;
        a_inf_t.push(lo);
        a_sup_t.push(hi);
    }
    let a_inf = a_inf_t.iter().cloned().fold(f64::INFINITY, f64::min);
    let a_sup = a_sup_t.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(CoefficientExtrema {
        a_inf,
        a_sup,
        times,
        a_inf_t,
        a_sup_t,
        spatial_samples: points.len(),
    })
}

fn negative_part(a: f64) -> f64 {
    (-a).max(0.0)
}

/// `inf_t (a1_inf(t) - |Omega| (a2_inf(t))_-)`, the denominator of the mass bound.
pub fn nonlocal_margin(
    coeffs: &Coefficients,
    domain: &GridDomain,
    window: &Window,
) -> Result<f64, ModelError> {
    let measure = domain.measure();
    if let (Some(a1), Some(a2)) = (coeffs.a1.constant_value(), coeffs.a2.constant_value()) {
        return Ok(a1 - measure * negative_part(a2));
    }
    let points = domain.closure_samples();
    let times = sample_times(&[&coeffs.a1, &coeffs.a2], window)?;
    let mut margin = f64::INFINITY;
    for &t in &times {
        let (a1_inf, _) = inf_sup_at(&coeffs.a1, &points, t)?;
        let (a2_inf, _) = inf_sup_at(&coeffs.a2, &points, t)?;
        margin = margin.min(a1_inf - measure * negative_part(a2_inf));
    }
    Ok(margin)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisInputs {
    pub chi: f64,
    pub tau: f64,
    pub mu: f64,
    pub dimension: usize,
    pub measure: f64,
    pub window: Window,
    pub a1_inf: f64,
    /// The chemotaxis threshold `a1_inf` must exceed.
    pub threshold: f64,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub c_gamma: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub which: HypothesisChoice,
    pub satisfied: bool,
    pub margin_local: f64,
    pub margin_nonlocal: f64,
    pub notes: Vec<String>,
    pub inputs: HypothesisInputs,
}

/// (H2): `tau = 1`, convex domain, `a1_inf > n mu |chi| / 4` and a positive nonlocal margin.
pub fn check_h2(
    params: &ModelParams,
    coeffs: &Coefficients,
    domain: &GridDomain,
    window: &Window,
) -> Result<HypothesisReport, HypothesisError> {
    let a1 = coefficient_extrema(&coeffs.a1, domain, window)?;
    let threshold = params.dimension as f64 * params.mu * params.chi.abs() / 4.0;
    let margin_local = a1.a_inf - threshold;
    let margin_nonlocal = nonlocal_margin(coeffs, domain, window)?;
    let tau_ok = params.tau == 1.0;
    let mut notes = vec!["rectangular domain: convexity holds".to_string()];
    if !tau_ok {
        notes.push(format!("(H2) requires tau = 1, got tau = {}", params.tau));
    }
    if margin_local <= 0.0 {
        notes.push(format!(
            "a1_inf = {} does not exceed n mu |chi| / 4 = {threshold}",
            a1.a_inf
        ));
    }
    if margin_nonlocal <= 0.0 {
        notes.push("nonlocal margin is not positive".to_string());
    }
    Ok(HypothesisReport {
        which: HypothesisChoice::H2,
        satisfied: tau_ok && margin_local > 0.0 && margin_nonlocal > 0.0,
        margin_local,
        margin_nonlocal,
        notes,
        inputs: HypothesisInputs {
            chi: params.chi,
            tau: params.tau,
            mu: params.mu,
            dimension: params.dimension,
            measure: domain.measure(),
            window: *window,
            a1_inf: a1.a_inf,
            threshold,
            c_gamma: Vec::new(),
        },
    })
}

/// (H1) with the infimum over `q` taken over the supplied `(q, C_{q+1})` pairs.
///
/// The table only bounds the true infimum from above, so a `false` here may be
/// a false negative but a `true` is never a false positive.
pub fn check_h1(
    params: &ModelParams,
    coeffs: &Coefficients,
    domain: &GridDomain,
    window: &Window,
    c_gamma_table: &[(f64, f64)],
) -> Result<HypothesisReport, HypothesisError> {
    if c_gamma_table.is_empty() {
        return Err(HypothesisError::EmptyConstantTable);
    }
    let q_min = (params.dimension as f64 / 2.0).max(1.0);
    let mut threshold = f64::INFINITY;
    for &(q, c) in c_gamma_table {
        if !(q > q_min) {
            return Err(HypothesisError::InvalidConstant {
                q,
                c,
                reason: format!("q must exceed max(1, n/2) = {q_min}"),
            });
        }
        if !(c > 0.0 && c.is_finite()) {
            return Err(HypothesisError::InvalidConstant {
                q,
                c,
                reason: "C_{q+1} must be positive".into(),
            });
        }
        let e = 1.0 / (q + 1.0);
        let candidate = (q - 1.0) / q * c.powf(e) * params.mu.powf(e) * params.chi.abs();
        threshold = threshold.min(candidate);
    }
    let a1 = coefficient_extrema(&coeffs.a1, domain, window)?;
    let margin_local = a1.a_inf - threshold;
    let margin_nonlocal = nonlocal_margin(coeffs, domain, window)?;
    let mut notes = vec![
        "C_{q+1} values are user supplied (maximal Sobolev regularity constants), not computed"
            .to_string(),
        "infimum over q is taken over the supplied table only".to_string(),
    ];
    if margin_local <= 0.0 {
        notes.push(format!(
            "a1_inf = {} does not exceed the tabulated threshold {threshold}",
            a1.a_inf
        ));
    }
    if margin_nonlocal <= 0.0 {
        notes.push("nonlocal margin is not positive".to_string());
    }
    Ok(HypothesisReport {
        which: HypothesisChoice::H1,
        satisfied: margin_local > 0.0 && margin_nonlocal > 0.0,
        margin_local,
        margin_nonlocal,
        notes,
        inputs: HypothesisInputs {
            chi: params.chi,
            tau: params.tau,
            mu: params.mu,
            dimension: params.dimension,
            measure: domain.measure(),
            window: *window,
            a1_inf: a1.a_inf,
            threshold,
            c_gamma: c_gamma_table.to_vec(),
        },
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoreticalBounds {
    /// `|Omega| a0_sup / inf_t(a1_inf(t) - |Omega| (a2_inf(t))_-)`
    pub m_tilde_1: f64,
    /// `m_tilde_1 + 1`, the eventual mass bound.
    pub m1: f64,
    pub a0_sup: f64,
    pub nonlocal_margin: f64,
    pub measure: f64,
    pub steady_state: Option<(f64, f64)>,
}

impl TheoreticalBounds {
    pub fn envelope(&self) -> LogisticEnvelope {
        LogisticEnvelope {
            rate: self.a0_sup,
            crowding: self.nonlocal_margin / self.measure,
        }
    }
}

pub fn mass_bound_m_tilde(
    coeffs: &Coefficients,
    domain: &GridDomain,
    window: &Window,
) -> Result<TheoreticalBounds, HypothesisError> {
    let margin = nonlocal_margin(coeffs, domain, window)?;
    if margin <= 0.0 {
        return Err(HypothesisError::HypothesisViolated { margin });
    }
    let a0_sup = coefficient_extrema(&coeffs.a0, domain, window)?.a_sup;
    let measure = domain.measure();
    let m_tilde_1 = measure * a0_sup / margin;
    Ok(TheoreticalBounds {
        m_tilde_1,
        m1: m_tilde_1 + 1.0,
        a0_sup,
        nonlocal_margin: margin,
        measure,
        steady_state: None,
    })
}

/// [`mass_bound_m_tilde`] plus the homogeneous steady state when it exists.
pub fn theoretical_bounds(
    params: &ModelParams,
    coeffs: &Coefficients,
    domain: &GridDomain,
    window: &Window,
) -> Result<TheoreticalBounds, HypothesisError> {
    let mut bounds = mass_bound_m_tilde(coeffs, domain, window)?;
    bounds.steady_state = constant_coeff_steady_state(params, coeffs, domain).ok();
    Ok(bounds)
}

/// Solution of `y' = y (rate - crowding y)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogisticEnvelope {
    pub rate: f64,
    pub crowding: f64,
}

impl LogisticEnvelope {
    pub fn capacity(&self) -> f64 {
        self.rate / self.crowding
    }

    /// `y(t)` with `y(0) = m0`, `t >= 0`.
    pub fn eval(&self, m0: f64, t: f64) -> f64 {
        if m0 == 0.0 {
            return 0.0;
        }
        let (r, b) = (self.rate, self.crowding);
        if r > 0.0 {
            let k = r / b;
            k / (1.0 + (k - m0) / m0 * (-r * t).exp())
        } else if r == 0.0 {
            m0 / (1.0 + b * m0 * t)
        } else {
            m0 * (r * t).exp() / (1.0 + b * m0 * (r * t).exp_m1() / r)
        }
    }
}

/// Upper envelope for the total mass starting from `m0`, evaluated `t` after the start.
pub fn logistic_mass_envelope(
    coeffs: &Coefficients,
    domain: &GridDomain,
    window: &Window,
    m0: f64,
    t: f64,
) -> Result<f64, HypothesisError> {
    let bounds = mass_bound_m_tilde(coeffs, domain, window)?;
    Ok(bounds.envelope().eval(m0, t))
}

/// `(a0 / (a1 + a2 |Omega|), mu / lambda * that)` for constant coefficients.
pub fn constant_coeff_steady_state(
    params: &ModelParams,
    coeffs: &Coefficients,
    domain: &GridDomain,
) -> Result<(f64, f64), HypothesisError> {
    let (a0, a1, a2) = coeffs
        .constants()
        .ok_or(HypothesisError::NotConstantCoefficients)?;
    let denom = a1 + a2 * domain.measure();
    if denom <= 0.0 {
        return Err(HypothesisError::DegenerateDenominator(denom));
    }
    let u_star = a0 / denom;
    Ok((u_star, params.mu / params.lambda * u_star))
}
