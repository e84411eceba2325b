//! Normalization-free Ricci flow dg/dt = -2 Ric on the discrete backends.
//!
//! In two dimensions the flow is conformal: d phi / dt = -R / 2 with
//! R evaluated on the current metric. On the round n-sphere the flow
//! closes on r^2 alone: d(r^2)/dt = -2 (n - 1), so every step is exact.
//!
//! Explicit Euler is the default scheme; Heun (two-stage, second order)
//! is available by config. Steps on grid backends are guarded by the
//! parabolic stability bound dt <= h_min^2 * exp(2 phi_min) / 4; the
//! configured cfl_safety only discounts the step chosen by `cfl_step`,
//! leaving headroom for the bound tightening as the metric shrinks.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::manifold::{BackendKind, ManifoldSpec, MetricState};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Euler,
    Heun,
}

impl Scheme {
    /// Formal order of accuracy in dt, verified by the dt-refinement tests.
    pub fn order(self) -> u32 {
        match self {
            Scheme::Euler => 1,
            Scheme::Heun => 2,
        }
    }
}

#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct FlowConfig {
    pub t_start: f64,
    pub t_end: f64,
    pub dt: f64,
    #[serde(default = "default_cfl_safety")]
    pub cfl_safety: f64,
    #[serde(default = "default_max_steps")]
    pub max_steps: usize,
    #[serde(default = "default_scheme")]
    pub scheme: Scheme,
}

fn default_cfl_safety() -> f64 {
    0.9
}

fn default_max_steps() -> usize {
    2_000_000
}

fn default_scheme() -> Scheme {
    Scheme::Euler
}

/// Largest stable step at the current state (before the safety factor).
/// Grid backends: h_min^2 exp(2 phi_min) / 4. Round sphere: the time
/// left until extinction, r^2 / (2 (n - 1)).
pub fn stability_bound(metric: &MetricState) -> f64 {
    match metric.kind() {
        BackendKind::RoundSphere => {
            metric.r2() / (2.0 * (metric.dim() as f64 - 1.0))
        }
        _ => {
            let h = metric.spec().h_min().expect("grid backend has a spacing");
            h * h * (2.0 * metric.phi_min()).exp() / 4.0
        }
    }
}

/// d phi / dt as a dof vector (grid backends), or d(r^2)/dt (round sphere).
fn rhs(metric: &MetricState) -> Vec<f64> {
    match metric.kind() {
        BackendKind::RoundSphere => vec![-2.0 * (metric.dim() as f64 - 1.0)],
        _ => {
            let r = metric.scalar_curvature();
            r.values().iter().map(|v| -0.5 * v).collect()
        }
    }
}

fn advanced(metric: &MetricState, slope: &[f64], dt: f64) -> Result<MetricState> {
    let dof: Vec<f64> =
        metric.dof().iter().zip(slope).map(|(d, s)| d + dt * s).collect();
    if metric.kind() == BackendKind::RoundSphere && dof[0] <= 0.0 {
        return Err(Error::SingularTime(metric.t() + dt));
    }
    MetricState::new(*metric.spec(), metric.t() + dt, dof)
}

/// One flow step. Errors with `StepTooLarge` when dt exceeds the hard
/// stability bound of the current metric and with `SingularTime` when the
/// round sphere would shrink past extinction within dt.
///
/// The guard uses the raw bound: `cfl_safety` is a planning margin for
/// [`cfl_step`], left as headroom for the bound tightening along the flow.
pub fn ricci_step(metric: &MetricState, dt: f64, cfg: &FlowConfig) -> Result<MetricState> {
    if !(dt > 0.0) {
        return Err(Error::InvalidConfig(format!("step dt must be positive, got {dt}")));
    }
    let bound = stability_bound(metric);
    if metric.kind() != BackendKind::RoundSphere && dt > bound {
        return Err(Error::StepTooLarge { dt, bound, t: metric.t() });
    }
    if metric.kind() == BackendKind::RoundSphere && dt >= bound {
        return Err(Error::SingularTime(metric.t() + dt));
    }
    let k1 = rhs(metric);
    match cfg.scheme {
        Scheme::Euler => advanced(metric, &k1, dt),
        Scheme::Heun => {
            let predictor = advanced(metric, &k1, dt)?;
            let k2 = rhs(&predictor);
            let avg: Vec<f64> =
                k1.iter().zip(&k2).map(|(a, b)| 0.5 * (a + b)).collect();
            advanced(metric, &avg, dt)
        }
    }
}

/// Stored flow history on the uniform grid t_k = t_start + k dt.
#[derive(Clone, Debug)]
pub struct Trajectory {
    spec: ManifoldSpec,
    dt: f64,
    states: Vec<MetricState>,
}

impl Trajectory {
    pub fn from_states(spec: ManifoldSpec, dt: f64, states: Vec<MetricState>) -> Result<Self> {
        if states.is_empty() {
            return Err(Error::InvalidConfig("trajectory needs at least one state".into()));
        }
        for s in &states {
            if s.spec() != &spec {
                return Err(Error::InvalidConfig("trajectory states bound to mixed specs".into()));
            }
        }
        Ok(Trajectory { spec, dt, states })
    }

    pub fn spec(&self) -> &ManifoldSpec {
        &self.spec
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[MetricState] {
        &self.states
    }

    pub fn state(&self, k: usize) -> &MetricState {
        &self.states[k]
    }

    pub fn t_start(&self) -> f64 {
        self.states[0].t()
    }

    pub fn t_end(&self) -> f64 {
        self.states[self.states.len() - 1].t()
    }

    /// Index of a grid time, or `TimeMisaligned` if t is off-grid.
    pub fn index_of(&self, t: f64) -> Result<usize> {
        let rel = (t - self.t_start()) / self.dt;
        let k = rel.round();
        let scale = 1.0 + t.abs().max(self.t_end().abs());
        if k < 0.0 || k as usize >= self.states.len() {
            return Err(Error::TimeMisaligned(t));
        }
        if ((t - self.t_start()) - k * self.dt).abs() > 1e-9 * scale {
            return Err(Error::TimeMisaligned(t));
        }
        Ok(k as usize)
    }
}

/// Integrates the flow over [t_start, t_end], storing every state.
/// The step count K = round((t_end - t_start) / dt) must reproduce the
/// window to within rounding; pick dt = span / K for exact fits.
pub fn evolve(initial: &MetricState, cfg: &FlowConfig) -> Result<Trajectory> {
    let span = cfg.t_end - cfg.t_start;
    if span < 0.0 {
        return Err(Error::InvalidConfig(format!(
            "t_end {} precedes t_start {}",
            cfg.t_end, cfg.t_start
        )));
    }
    if !(cfg.cfl_safety > 0.0 && cfg.cfl_safety <= 1.0) {
        return Err(Error::InvalidConfig(format!(
            "cfl_safety must lie in (0, 1], got {}",
            cfg.cfl_safety
        )));
    }
    let mut start = initial.clone();
    start.set_t(cfg.t_start);
    if span == 0.0 {
        return Trajectory::from_states(*initial.spec(), cfg.dt, vec![start]);
    }
    if !(cfg.dt > 0.0) {
        return Err(Error::InvalidConfig(format!("dt must be positive, got {}", cfg.dt)));
    }
    let steps_f = span / cfg.dt;
    let steps = steps_f.round() as usize;
    if steps == 0 || (steps_f - steps as f64).abs() > 1e-9 * steps_f.max(1.0) {
        return Err(Error::InvalidConfig(format!(
            "window of length {span} is not an integer multiple of dt = {}",
            cfg.dt
        )));
    }
    if steps > cfg.max_steps {
        return Err(Error::InvalidConfig(format!(
            "{steps} steps exceed max_steps = {}",
            cfg.max_steps
        )));
    }
    let mut states = Vec::with_capacity(steps + 1);
    states.push(start);
    for k in 0..steps {
        let mut next = ricci_step(&states[k], cfg.dt, cfg)?;
        // pin grid times exactly to t_start + k dt to keep the grid uniform
        next.set_t(cfg.t_start + (k + 1) as f64 * cfg.dt);
        states.push(next);
    }
    Trajectory::from_states(*initial.spec(), cfg.dt, states)
}

/// Step size that satisfies the guard with the configured safety factor
/// and divides the window into a whole number of steps.
pub fn cfl_step(metric: &MetricState, cfg: &FlowConfig) -> f64 {
    let span = cfg.t_end - cfg.t_start;
    let stable = cfg.cfl_safety * stability_bound(metric);
    if span <= 0.0 {
        return stable;
    }
    let steps = (span / stable).ceil().max(1.0);
    span / steps
}
