//! File formats: JSON-lines trajectories and backward solutions (one
//! header line carrying the manifold spec, one record per stored time),
//! CSV entropy reports, and small JSON summaries.
//!
//! All floats are written with 17 significant digits, which decodes to
//! the identical bit pattern; round trips are exact, and downstream
//! reports can be recomputed from reloaded files without drift.

use crate::conjugate_heat::BackwardSolution;
use crate::error::{Error, Result};
use crate::flow::Trajectory;
use crate::functionals::EntropyReport;
use crate::manifold::{ManifoldSpec, MetricState, ScalarField};
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn float_list(vals: &[f64]) -> String {
    let mut s = String::with_capacity(vals.len() * 24);
    for (i, v) in vals.iter().enumerate() {
        if i > 0 {
            s.push(',');
        }
        let _ = write!(s, "{v:.16e}");
    }
    s
}

fn write_file(path: impl AsRef<Path>, contents: &str) -> Result<()> {
    if let Some(parent) = path.as_ref().parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    fs::write(path, contents)?;
    Ok(())
}

fn field_f64(v: &serde_json::Value, key: &str) -> Result<f64> {
    v.get(key)
        .and_then(|x| x.as_f64())
        .ok_or_else(|| Error::MalformedFile(format!("missing or non-numeric field '{key}'")))
}

fn field_floats(v: &serde_json::Value, key: &str) -> Result<Vec<f64>> {
    let arr = v
        .get(key)
        .and_then(|x| x.as_array())
        .ok_or_else(|| Error::MalformedFile(format!("missing array field '{key}'")))?;
    arr.iter()
        .map(|x| {
            x.as_f64()
                .ok_or_else(|| Error::MalformedFile(format!("non-numeric entry in '{key}'")))
        })
        .collect()
}

fn header_spec(line: &str) -> Result<(ManifoldSpec, serde_json::Value)> {
    let v: serde_json::Value = serde_json::from_str(line)?;
    let spec_v = v
        .get("spec")
        .cloned()
        .ok_or_else(|| Error::MalformedFile("header line lacks 'spec'".into()))?;
    let spec: ManifoldSpec = serde_json::from_value(spec_v)?;
    spec.validate()?;
    Ok((spec, v))
}

// ───────────────────────── trajectories ─────────────────────────

/// Writes a trajectory as JSON lines: `{"spec":…,"dt":…}` then one
/// `{"t":…,"dof":[…]}` per stored state.
pub fn save_trajectory(path: impl AsRef<Path>, traj: &Trajectory) -> Result<()> {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{{\"spec\":{},\"dt\":{}}}",
        serde_json::to_string(traj.spec())?,
        fmt_float(traj.dt())
    );
    for s in traj.states() {
        let _ = writeln!(out, "{{\"t\":{},\"dof\":[{}]}}", fmt_float(s.t()), float_list(s.dof()));
    }
    write_file(path, &out)
}

pub fn load_trajectory(path: impl AsRef<Path>) -> Result<Trajectory> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let head = lines
        .next()
        .ok_or_else(|| Error::MalformedFile("empty trajectory file".into()))?;
    let (spec, head_v) = header_spec(head)?;
    let dt = field_f64(&head_v, "dt")?;
    let mut states = Vec::new();
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        let v: serde_json::Value = serde_json::from_str(line)?;
        let t = field_f64(&v, "t")?;
        let dof = field_floats(&v, "dof")?;
        states.push(MetricState::new(spec, t, dof)?);
    }
    Trajectory::from_states(spec, dt, states)
}

// ─────────────────────── backward solutions ───────────────────────

/// Same JSON-lines layout as a trajectory with field name "u"; the
/// header also carries the solver's bookkeeping scalars.
pub fn save_backward(path: impl AsRef<Path>, sol: &BackwardSolution) -> Result<()> {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "{{\"spec\":{},\"dt\":{},\"max_mass_err\":{},\"max_drift_rate\":{},\"min_value\":{}}}",
        serde_json::to_string(sol.spec())?,
        fmt_float(sol.dt()),
        fmt_float(sol.max_mass_err()),
        fmt_float(sol.max_drift_rate()),
        fmt_float(sol.min_value())
    );
    for (t, u) in sol.times().iter().zip(sol.u_fields()) {
        let _ = writeln!(out, "{{\"t\":{},\"u\":[{}]}}", fmt_float(*t), float_list(u.values()));
    }
    write_file(path, &out)
}

pub fn load_backward(path: impl AsRef<Path>) -> Result<BackwardSolution> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let head = lines
        .next()
        .ok_or_else(|| Error::MalformedFile("empty backward solution file".into()))?;
    let (spec, head_v) = header_spec(head)?;
    let dt = field_f64(&head_v, "dt")?;
    let mme = field_f64(&head_v, "max_mass_err")?;
    let mdr = field_f64(&head_v, "max_drift_rate")?;
    let minv = field_f64(&head_v, "min_value")?;
    let mut times = Vec::new();
    let mut fields = Vec::new();
    for line in lines {
        if line.trim().is_empty() {
            continue;
        }
        let v: serde_json::Value = serde_json::from_str(line)?;
        times.push(field_f64(&v, "t")?);
        let u = field_floats(&v, "u")?;
        if u.len() != spec.node_count() {
            return Err(Error::MalformedFile(format!(
                "field length {} does not match spec node count {}",
                u.len(),
                spec.node_count()
            )));
        }
        fields.push(ScalarField::new(spec, u));
    }
    if times.is_empty() {
        return Err(Error::MalformedFile("backward solution has no records".into()));
    }
    Ok(BackwardSolution::from_parts(spec, dt, times, fields, mme, mdr, minv))
}

// ───────────────────────── entropy reports ─────────────────────────

/// CSV for a uniformly spaced report sequence. The dY_fd column is the
/// finite-difference time derivative of Ya_adj: centered in the
/// interior, one-sided second order at the ends, zero for a lone row.
pub fn entropy_csv(rows: &[EntropyReport]) -> String {
    let dys = EntropyReport::adjusted_dt(rows);
    let mut out =
        String::from("t,a,E,omega,lambda0,Y0,Ya,Ya_adj,W_opt,sigma,defect,dY_fd,rhs_bound\n");
    for (r, dy) in rows.iter().zip(&dys) {
        let cols = [
            r.t, r.a, r.e, r.omega, r.lambda0, r.y0, r.ya, r.ya_adjusted, r.w_opt, r.sigma,
            r.defect, *dy, r.rhs_bound,
        ];
        let _ = writeln!(out, "{}", float_list(&cols));
    }
    out
}

pub fn write_entropy_csv(path: impl AsRef<Path>, rows: &[EntropyReport]) -> Result<()> {
    write_file(path, &entropy_csv(rows))
}

/// Serializes any report type as pretty JSON.
pub fn write_json<T: serde::Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_file(path, &text)
}
