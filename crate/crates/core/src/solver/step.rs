use serde::{Deserialize, Serialize};

use super::stencil::{chemotaxis_into, laplacian_into, max_face_gradient, nonlocal_mass, GhostField};
use super::tridiag::TridiagonalFactor;
use super::SolverError;
use crate::model::{CoefficientField, Coefficients, GridDomain, ModelParams, Scheme, State};

/// Relative size below which negative undershoots are treated as roundoff and clamped.
pub const CLAMP_TOLERANCE: f64 = 1e-13;
/// Stable step sizes below this are reported as blow-up.
pub const DT_COLLAPSE: f64 = 1e-12;

/// Coefficient values at the cell centers at one time.
#[derive(Debug, Clone, Default)]
pub struct CoefficientValues {
    pub a0: Vec<f64>,
    pub a1: Vec<f64>,
    pub a2: Vec<f64>,
}

fn sample_into(
    field: &CoefficientField,
    domain: &GridDomain,
    t: f64,
    out: &mut Vec<f64>,
) -> Result<(), SolverError> {
    out.clear();
    for x in domain.centers() {
        out.push(field.evaluate(t, x)?);
    }
    Ok(())
}

impl CoefficientValues {
    pub fn sample(coeffs: &Coefficients, domain: &GridDomain, t: f64) -> Result<Self, SolverError> {
        let mut v = CoefficientValues::default();
        sample_into(&coeffs.a0, domain, t, &mut v.a0)?;
        sample_into(&coeffs.a1, domain, t, &mut v.a1)?;
        sample_into(&coeffs.a2, domain, t, &mut v.a2)?;
        Ok(v)
    }

    fn abs_max(f: &[f64]) -> f64 {
        f.iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }
}

/// Rate bounds (inverse time scales) that limit an explicit update.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepLimits {
    /// `sum_k 2 max|w_k| / h_k`: worst-case outflow rate of the upwind flux.
    pub advective_rate: f64,
    /// `|a0|_max + |a1|_max ||u||_inf + |a2|_max mass`
    pub reaction_rate: f64,
    /// `sum_k 2 / h_k^2`
    pub diffusion_rate: f64,
    /// `(sum_k 2 / h_k^2 + lambda) / tau`, for explicit `v` updates.
    pub chemical_rate: f64,
}

impl StepLimits {
    /// `h / max|chi dv/dh|` over the finest axis.
    pub fn advective_limit(&self) -> f64 {
        guarded_inverse(self.advective_rate)
    }

    pub fn reaction_limit(&self) -> f64 {
        guarded_inverse(self.reaction_rate)
    }

    /// Largest step honoring all active limits, before the safety factor.
    pub fn max_dt(&self, scheme: Scheme) -> f64 {
        match scheme {
            Scheme::Imex => guarded_inverse(self.advective_rate + self.reaction_rate),
            Scheme::FullyExplicit => guarded_inverse(
                self.advective_rate + self.reaction_rate + self.diffusion_rate,
            )
            .min(guarded_inverse(self.chemical_rate)),
        }
    }
}

fn guarded_inverse(rate: f64) -> f64 {
    1.0 / rate.max(f64::EPSILON)
}

fn limits_from(
    u: &[f64],
    v: &[f64],
    values: &CoefficientValues,
    domain: &GridDomain,
    params: &ModelParams,
) -> StepLimits {
    let grad = max_face_gradient(v, domain);
    let chi = params.chi.abs();
    let mut advective_rate = 0.0;
    let mut diffusion_rate = 0.0;
    for k in 0..domain.dimension() {
        let h = domain.spacing(k);
        advective_rate += 2.0 * chi * grad[k] / h;
        diffusion_rate += 2.0 / (h * h);
    }
    let u_max = u.iter().fold(0.0f64, |m, &x| m.max(x));
    let mass = nonlocal_mass(u, domain);
    let reaction_rate = CoefficientValues::abs_max(&values.a0)
        + CoefficientValues::abs_max(&values.a1) * u_max
        + CoefficientValues::abs_max(&values.a2) * mass;
    StepLimits {
        advective_rate,
        reaction_rate,
        diffusion_rate,
        chemical_rate: (diffusion_rate + params.lambda) / params.tau,
    }
}

/// Stability/positivity bounds for `state` at time `t`.
pub fn step_limits(
    state: &State,
    domain: &GridDomain,
    params: &ModelParams,
    coeffs: &Coefficients,
    t: f64,
) -> Result<StepLimits, SolverError> {
    let values = CoefficientValues::sample(coeffs, domain, t)?;
    Ok(limits_from(&state.u, &state.v, &values, domain, params))
}

/// `cfl_safety * min(dt_max, positivity-preserving explicit step)`.
///
/// The explicit rates are summed rather than minimized separately so that the
/// upwind/reaction update keeps a nonnegative diagonal; the result never
/// exceeds the per-mechanism limits.
#[allow(clippy::too_many_arguments)]
pub fn stable_dt(
    state: &State,
    domain: &GridDomain,
    params: &ModelParams,
    coeffs: &Coefficients,
    t: f64,
    dt_max: f64,
    cfl_safety: f64,
    scheme: Scheme,
) -> Result<f64, SolverError> {
    let limits = step_limits(state, domain, params, coeffs, t)?;
    Ok(cfl_safety * dt_max.min(limits.max_dt(scheme)))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepFlags {
    pub dt_reduced: bool,
    pub blowup_detected: bool,
}

impl StepFlags {
    pub fn ok(&self) -> bool {
        !self.dt_reduced && !self.blowup_detected
    }
}

#[derive(Debug, Clone)]
pub struct StepOutcome {
    pub state: State,
    pub dt_used: f64,
    pub flags: StepFlags,
}

#[derive(Debug, Clone, Default)]
struct FactorCache {
    r: f64,
    factor: Option<TridiagonalFactor>,
}

impl FactorCache {
    fn get(&mut self, n: usize, r: f64) -> &TridiagonalFactor {
        let stale = match &self.factor {
            Some(f) => f.len() != n || self.r != r,
            None => true,
        };
        if stale {
            self.factor = Some(TridiagonalFactor::neumann(n, r));
            self.r = r;
        }
        self.factor.as_ref().unwrap()
    }
}

/// Scratch buffers and cached implicit factorizations for one grid.
#[derive(Debug, Clone, Default)]
pub struct StencilWorkspace {
    ghost: GhostField,
    taxis: Vec<f64>,
    lap: Vec<f64>,
    line: Vec<f64>,
    // [u_x, u_y, v_x, v_y]
    factors: [FactorCache; 4],
}

impl StencilWorkspace {
    pub fn new(domain: &GridDomain) -> Self {
        let n = domain.len();
        StencilWorkspace {
            taxis: vec![0.0; n],
            lap: vec![0.0; n],
            line: Vec::with_capacity(domain.nx().max(domain.ny())),
            ..Default::default()
        }
    }

    /// Solve `prod_k (I - alpha Delta_k) x = rhs` in place, one axis at a time.
    /// Exact in 1D; the 2D product is the ADI splitting of `I - alpha Delta`.
    fn implicit_diffusion(&mut self, f: &mut [f64], alpha: f64, domain: &GridDomain, slot: usize) {
        let (nx, ny) = (domain.nx(), domain.ny());
        let hx = domain.spacing(0);
        let fx = self.factors[slot].get(nx, alpha / (hx * hx));
        for j in 0..ny {
            fx.solve(&mut f[j * nx..(j + 1) * nx]);
        }
        if domain.dimension() == 2 {
            let hy = domain.spacing(1);
            let line = &mut self.line;
            let fy = self.factors[slot + 1].get(ny, alpha / (hy * hy));
            for i in 0..nx {
                line.clear();
                line.extend((0..ny).map(|j| f[j * nx + i]));
                fy.solve(line);
                for (j, &val) in line.iter().enumerate() {
                    f[j * nx + i] = val;
                }
            }
        }
    }
}

fn check_sign(
    f: &mut [f64],
    reference_scale: f64,
    name: &'static str,
    t: f64,
) -> Result<(), SolverError> {
    let floor = -CLAMP_TOLERANCE * reference_scale;
    for (k, x) in f.iter_mut().enumerate() {
        if !x.is_finite() {
            return Err(SolverError::NonFiniteValue { field: name, t, index: k });
        }
        if *x < 0.0 {
            if *x < floor {
                return Err(SolverError::PositivityViolation {
                    field: name,
                    t,
                    index: k,
                    value: *x,
                });
            }
            *x = 0.0;
        }
    }
    Ok(())
}

/// Advance `state` by `dt` using coefficient values frozen at `state.time`.
///
/// IMEX arrangement: explicit taxis + reaction (with the nonlocal mass at the
/// step start), implicit diffusion of `u`, then
/// `(tau/dt + lambda - Delta) v_new = (tau/dt) v + mu u_new`.
#[allow(clippy::too_many_arguments)]
pub fn step_with_values(
    state: &State,
    dt: f64,
    params: &ModelParams,
    values: &CoefficientValues,
    domain: &GridDomain,
    scheme: Scheme,
    blowup_threshold: f64,
    ws: &mut StencilWorkspace,
) -> Result<StepOutcome, SolverError> {
    let n = domain.len();
    ws.taxis.resize(n, 0.0);
    ws.lap.resize(n, 0.0);
    let t_new = state.time + dt;
    let u = &state.u;
    let v = &state.v;
    let mass = nonlocal_mass(u, domain);
    chemotaxis_into(u, v, domain, params.chi, &mut ws.taxis);

    let mut u_new = Vec::with_capacity(n);
    for k in 0..n {
        let growth = values.a0[k] - values.a1[k] * u[k] - values.a2[k] * mass;
        u_new.push(u[k] + dt * (ws.taxis[k] + u[k] * growth));
    }
    if scheme == Scheme::FullyExplicit {
        laplacian_into(&mut ws.ghost, u, domain, &mut ws.lap);
        for k in 0..n {
            u_new[k] += dt * ws.lap[k];
        }
    }
    let u_scale = u.iter().fold(0.0f64, |m, &x| m.max(x));
    check_sign(&mut u_new, u_scale, "u", t_new)?;

    let mut v_new;
    match scheme {
        Scheme::Imex => {
            ws.implicit_diffusion(&mut u_new, dt, domain, 0);
            let beta = dt * params.lambda / params.tau;
            let source = dt * params.mu / params.tau;
            let inv = 1.0 / (1.0 + beta);
            v_new = (0..n).map(|k| (v[k] + source * u_new[k]) * inv).collect::<Vec<_>>();
            ws.implicit_diffusion(&mut v_new, dt / params.tau * inv, domain, 2);
        }
        Scheme::FullyExplicit => {
            laplacian_into(&mut ws.ghost, v, domain, &mut ws.lap);
            let r = dt / params.tau;
            v_new = (0..n)
                .map(|k| v[k] + r * (ws.lap[k] - params.lambda * v[k] + params.mu * u[k]))
                .collect();
        }
    }
    let u_scale_new = u_new.iter().fold(u_scale, |m, &x| m.max(x));
    check_sign(&mut u_new, u_scale_new, "u", t_new)?;
    let v_scale = v_new
        .iter()
        .chain(v.iter())
        .fold(0.0f64, |m, &x| m.max(x));
    check_sign(&mut v_new, v_scale, "v", t_new)?;

    let u_max = u_new.iter().fold(0.0f64, |m, &x| m.max(x));
    Ok(StepOutcome {
        state: State {
            time: t_new,
            u: u_new,
            v: v_new,
        },
        dt_used: dt,
        flags: StepFlags {
            dt_reduced: false,
            blowup_detected: u_max > blowup_threshold,
        },
    })
}

/// Single step with coefficients evaluated at `state.time`. `dt` must not
/// exceed [`stable_dt`] for positivity to be guaranteed.
#[allow(clippy::too_many_arguments)]
pub fn step(
    state: &State,
    dt: f64,
    params: &ModelParams,
    coeffs: &Coefficients,
    domain: &GridDomain,
    scheme: Scheme,
    blowup_threshold: f64,
    ws: &mut StencilWorkspace,
) -> Result<StepOutcome, SolverError> {
    let values = CoefficientValues::sample(coeffs, domain, state.time)?;
    step_with_values(state, dt, params, &values, domain, scheme, blowup_threshold, ws)
}

/// Step driver for one configuration; caches autonomous coefficient values.
#[derive(Debug, Clone)]
pub struct Stepper {
    pub params: ModelParams,
    pub coeffs: Coefficients,
    pub domain: GridDomain,
    pub scheme: Scheme,
    pub dt_max: f64,
    pub cfl_safety: f64,
    pub blowup_threshold: f64,
    workspace: StencilWorkspace,
    values: CoefficientValues,
    values_time: Option<f64>,
    autonomous: bool,
}

impl Stepper {
    pub fn new(
        params: ModelParams,
        coeffs: Coefficients,
        domain: GridDomain,
        scheme: Scheme,
        dt_max: f64,
        cfl_safety: f64,
        blowup_threshold: f64,
    ) -> Self {
        let autonomous = coeffs.iter().all(|c| c.is_autonomous());
        let workspace = StencilWorkspace::new(&domain);
        Stepper {
            params,
            coeffs,
            domain,
            scheme,
            dt_max,
            cfl_safety,
            blowup_threshold,
            workspace,
            values: CoefficientValues::default(),
            values_time: None,
            autonomous,
        }
    }

    fn refresh(&mut self, t: f64) -> Result<(), SolverError> {
        let fresh = match self.values_time {
            Some(_) if self.autonomous => true,
            Some(s) => s == t,
            None => false,
        };
        if !fresh {
            self.values = CoefficientValues::sample(&self.coeffs, &self.domain, t)?;
            self.values_time = Some(t);
        }
        Ok(())
    }

    /// The step [`Stepper::advance`] would take from `state`, before clipping to a target time.
    pub fn stable_dt(&mut self, state: &State) -> Result<f64, SolverError> {
        self.refresh(state.time)?;
        let limits = limits_from(&state.u, &state.v, &self.values, &self.domain, &self.params);
        Ok(self.cfl_safety * self.dt_max.min(limits.max_dt(self.scheme)))
    }

    /// One step toward `target`, landing on it exactly when within reach.
    pub fn advance(&mut self, state: &State, target: f64) -> Result<StepOutcome, SolverError> {
        let stable = self.stable_dt(state)?;
        if stable < DT_COLLAPSE {
            return Ok(StepOutcome {
                state: state.clone(),
                dt_used: 0.0,
                flags: StepFlags {
                    dt_reduced: true,
                    blowup_detected: true,
                },
            });
        }
        let remaining = target - state.time;
        let landing = remaining <= stable * (1.0 + 1e-9);
        let dt = if landing { remaining } else { stable };
        let mut out = step_with_values(
            state,
            dt,
            &self.params,
            &self.values,
            &self.domain,
            self.scheme,
            self.blowup_threshold,
            &mut self.workspace,
        )?;
        if landing {
            out.state.time = target;
        }
        out.flags.dt_reduced = stable < self.cfl_safety * self.dt_max;
        Ok(out)
    }
}
