//! Backward conjugate heat solver coupled to a stored flow trajectory.
//!
//! The density v = u^2 satisfies dv/dt = -lap v + R v along the flow; in
//! backward time s = t2 - t this is a well-posed heat equation
//! dv/ds = lap v - R v. Together with the moving volume element
//! (d/dt dvol = -R dvol) the total mass int v dvol is conserved.
//!
//! The discrete step advances cell masses V_i = v_i w_i directly:
//!
//! ```text
//! V(t_{k-1}) = V(t_k) + dt * lap_g v(t_k) * w(t_k)
//! ```
//!
//! which is consistent with dv/ds = lap v - R v at first order (the
//! weight ratio w_k / w_{k-1} supplies the R v term) and conserves
//! sum_i V_i exactly because the weighted flux Laplacian telescopes to
//! zero. Renormalization each step then only removes rounding residue;
//! the pre-normalization drift is recorded as a diagnostic.

use crate::error::{Error, Result};
use crate::flow::{stability_bound, Trajectory};
use crate::manifold::{BackendKind, ManifoldSpec, MetricState, ScalarField};

/// Normalizes a field to unit L^2 mass: w = u / sqrt(int u^2 dvol).
pub fn normalize(metric: &MetricState, u: &ScalarField) -> Result<ScalarField> {
    let sq = ScalarField::new(*u.spec(), u.values().iter().map(|x| x * x).collect());
    let mass = metric.integrate(&sq);
    if mass <= 0.0 || !mass.is_finite() {
        return Err(Error::ZeroField);
    }
    let scale = mass.sqrt().recip();
    Ok(ScalarField::new(
        *u.spec(),
        u.values().iter().map(|x| x * scale).collect(),
    ))
}

/// Positive normalized solution u(t) of the backward equation at every
/// trajectory time in [t1, t2], t2 being the trajectory's final time.
#[derive(Clone, Debug)]
pub struct BackwardSolution {
    spec: ManifoldSpec,
    dt: f64,
    t1: f64,
    t2: f64,
    times: Vec<f64>,
    u_fields: Vec<ScalarField>,
    max_mass_err: f64,
    max_drift_rate: f64,
    min_value: f64,
}

impl BackwardSolution {
    pub fn spec(&self) -> &ManifoldSpec {
        &self.spec
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn t1(&self) -> f64 {
        self.t1
    }

    pub fn t2(&self) -> f64 {
        self.t2
    }

    pub fn len(&self) -> usize {
        self.u_fields.len()
    }

    pub fn is_empty(&self) -> bool {
        self.u_fields.is_empty()
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    /// u at the j-th stored time (j = 0 is t1).
    pub fn u(&self, j: usize) -> &ScalarField {
        &self.u_fields[j]
    }

    pub fn u_fields(&self) -> &[ScalarField] {
        &self.u_fields
    }

    /// Worst |int u^2 dvol - 1| over stored fields, after renormalization.
    pub fn max_mass_err(&self) -> f64 {
        self.max_mass_err
    }

    /// Worst pre-renormalization mass drift per unit time.
    pub fn max_drift_rate(&self) -> f64 {
        self.max_drift_rate
    }

    /// Smallest node value of v = u^2 seen during the solve.
    pub fn min_value(&self) -> f64 {
        self.min_value
    }

    pub fn index_of(&self, t: f64) -> Result<usize> {
        if self.times.len() == 1 {
            return if (t - self.t1).abs() <= 1e-9 * (1.0 + t.abs()) {
                Ok(0)
            } else {
                Err(Error::TimeMisaligned(t))
            };
        }
        let rel = (t - self.t1) / self.dt;
        let k = rel.round();
        if k < 0.0 || k as usize >= self.times.len() {
            return Err(Error::TimeMisaligned(t));
        }
        if ((t - self.t1) - k * self.dt).abs() > 1e-9 * (1.0 + t.abs()) {
            return Err(Error::TimeMisaligned(t));
        }
        Ok(k as usize)
    }

    pub(crate) fn from_parts(
        spec: ManifoldSpec,
        dt: f64,
        times: Vec<f64>,
        u_fields: Vec<ScalarField>,
        max_mass_err: f64,
        max_drift_rate: f64,
        min_value: f64,
    ) -> Self {
        let t1 = times[0];
        let t2 = times[times.len() - 1];
        BackwardSolution {
            spec,
            dt,
            t1,
            t2,
            times,
            u_fields,
            max_mass_err,
            max_drift_rate,
            min_value,
        }
    }
}

/// Integrates v backward from the trajectory's final time down to t1 and
/// returns u = sqrt(v) at every stored time.
///
/// u_final must be strictly positive and normalized at the final metric.
pub fn backward_solve(
    traj: &Trajectory,
    u_final: &ScalarField,
    t1: f64,
) -> Result<BackwardSolution> {
    let spec = *traj.spec();
    assert_eq!(&spec, u_final.spec(), "u_final bound to a different manifold spec");
    let k1 = traj.index_of(t1)?;
    let k2 = traj.len() - 1;
    let g2 = traj.state(k2);

    let umin = u_final.min();
    if umin <= 0.0 {
        return Err(Error::NonPositiveField(umin));
    }
    let sq = ScalarField::new(spec, u_final.values().iter().map(|x| x * x).collect());
    let mass = g2.integrate(&sq);
    if (mass - 1.0).abs() > 1e-8 {
        return Err(Error::NotNormalized(mass));
    }

    let dt = traj.dt();
    let nsteps = k2 - k1;
    let mut v: Vec<f64> = u_final.values().iter().map(|x| x * x).collect();
    let mut max_mass_err = (mass - 1.0).abs();
    let mut max_drift_rate = 0.0f64;
    let mut min_value = v.iter().copied().fold(f64::INFINITY, f64::min);

    // store back-to-front, reverse at the end
    let mut rev_fields: Vec<ScalarField> = Vec::with_capacity(nsteps + 1);
    let mut rev_times: Vec<f64> = Vec::with_capacity(nsteps + 1);
    rev_fields.push(ScalarField::new(spec, v.iter().map(|x| x.sqrt()).collect()));
    rev_times.push(g2.t());

    let mut w_cur = g2.quad_weights();
    for step in 0..nsteps {
        let k = k2 - step;
        let g_cur = traj.state(k);
        let g_prev = traj.state(k - 1);

        if spec.kind != BackendKind::RoundSphere {
            let bound = stability_bound(g_cur);
            if dt > bound {
                return Err(Error::PositivityLost(g_prev.t()));
            }
        }

        let vf = ScalarField::new(spec, v.clone());
        let lap = g_cur.laplace_beltrami(&vf);
        let w_prev = g_prev.quad_weights();
        let mut mass_pre = 0.0;
        for i in 0..v.len() {
            let cell_mass = v[i] * w_cur[i] + dt * lap.values()[i] * w_cur[i];
            v[i] = cell_mass / w_prev[i];
            mass_pre += cell_mass;
        }
        let vmin = v.iter().copied().fold(f64::INFINITY, f64::min);
        if vmin <= 0.0 {
            return Err(Error::PositivityLost(g_prev.t()));
        }
        min_value = min_value.min(vmin);

        let drift = (mass_pre - 1.0).abs();
        max_drift_rate = max_drift_rate.max(drift / dt);
        for x in v.iter_mut() {
            *x /= mass_pre;
        }
        let vf = ScalarField::new(spec, v.clone());
        let mass_post = g_prev.integrate(&vf);
        max_mass_err = max_mass_err.max((mass_post - 1.0).abs());

        rev_fields.push(ScalarField::new(spec, v.iter().map(|x| x.sqrt()).collect()));
        rev_times.push(g_prev.t());
        w_cur = w_prev;
    }

    rev_fields.reverse();
    rev_times.reverse();
    Ok(BackwardSolution::from_parts(
        spec,
        dt,
        rev_times,
        rev_fields,
        max_mass_err,
        max_drift_rate,
        min_value,
    ))
}
