//! Scalar functionals of (metric, field) pairs: the Dirichlet-type
//! energy, the principal eigenvalue of -lap + R/4, the log entropy with
//! remainder and its time-adjusted variant, the W functional in two
//! algebraically equal forms, and the one-dimensional minimization that
//! produces the entropy lower bound.
//!
//! Every integral here uses the quadrature of `MetricState::integrate`
//! and every gradient term uses the edge-based Dirichlet form, so the
//! algebraic identities between these functionals hold at rounding
//! level, not just at discretization order.

use crate::error::{Error, Result};
use crate::manifold::{BackendKind, MetricState, ScalarField};
use nalgebra::{DMatrix, DVector};

// ─────────────────────────── basic integrals ───────────────────────────

/// int u^2 dvol.
pub(crate) fn l2_mass(metric: &MetricState, u: &ScalarField) -> f64 {
    let sq: Vec<f64> = u.values().iter().map(|x| x * x).collect();
    metric.integrate(&ScalarField::new(*u.spec(), sq))
}

/// -int u^2 ln u^2 dvol with the convention 0 ln 0 = 0.
pub(crate) fn entropy_term(metric: &MetricState, u: &ScalarField) -> f64 {
    let vals: Vec<f64> = u
        .values()
        .iter()
        .map(|&x| {
            let v = x * x;
            if v == 0.0 {
                0.0
            } else {
                v * v.ln()
            }
        })
        .collect();
    -metric.integrate(&ScalarField::new(*u.spec(), vals))
}

/// E(u) = int (|grad u|^2 + (R/4) u^2) dvol, the quadratic form of the
/// operator -lap + R/4. The gradient part is the edge Dirichlet form.
pub fn energy(metric: &MetricState, u: &ScalarField) -> f64 {
    let r = metric.scalar_curvature();
    let pot: Vec<f64> = u
        .values()
        .iter()
        .zip(r.values())
        .map(|(&x, &rr)| 0.25 * rr * x * x)
        .collect();
    metric.dirichlet_form(u, u) + metric.integrate(&ScalarField::new(*u.spec(), pot))
}

// ─────────────────────────── log entropy ───────────────────────────

/// Y_a(g, u) = -int u^2 ln u^2 dvol + (n/2) ln(E(u) + a).
///
/// Requires int u^2 dvol = 1 within 1e-8 and E + a > 0 (guaranteed when
/// a > -lambda0 since E >= lambda0 for normalized u).
pub fn log_entropy(metric: &MetricState, u: &ScalarField, a: f64) -> Result<f64> {
    let mass = l2_mass(metric, u);
    if !((mass - 1.0).abs() <= 1e-8) {
        return Err(Error::NotNormalized(mass));
    }
    let omega = energy(metric, u) + a;
    if !(omega > 0.0) {
        return Err(Error::DomainError(format!(
            "log entropy needs energy + a > 0, got {omega}"
        )));
    }
    let half_n = 0.5 * metric.dim() as f64;
    Ok(entropy_term(metric, u) + half_n * omega.ln())
}

/// Y_a(g, u, t) = Y_a(g, u) + 4 a t; reduces to `log_entropy` bit for
/// bit at t = 0 and for a = 0.
pub fn adjusted_log_entropy(metric: &MetricState, u: &ScalarField, a: f64, t: f64) -> Result<f64> {
    Ok(log_entropy(metric, u, a)? + 4.0 * a * t)
}

// ─────────────────────────── W functional ───────────────────────────

/// W evaluated two ways. Returns (W, W_uform).
///
/// The first comes from the density form: with u^2 = e^{-f} (4 pi tau)^{-n/2},
/// i.e. f = -ln u^2 - (n/2) ln tau - (n/2) ln(4 pi),
///
/// ```text
/// W = int [tau (R + |grad f|^2) + f - n] u^2 dvol
/// ```
///
/// where the kinetic term uses |grad f|^2 u^2 = 4 |grad u|^2, hence
/// 4 tau * dirichlet(u, u). The second expands the same quantity around
/// an arbitrary remainder a:
///
/// ```text
/// W = -int u^2 ln u^2 + 4 tau (E + a) - (n/2) ln(4 tau) - (n/2) ln pi - n - 4 a tau
/// ```
///
/// in which a cancels algebraically; both forms agree to rounding for
/// normalized u.
#[allow(non_snake_case)]
pub fn perelman_W(
    metric: &MetricState,
    u: &ScalarField,
    tau: f64,
    a: f64,
) -> Result<(f64, f64)> {
    let umin = u.min();
    if !(umin > 0.0) {
        return Err(Error::NonPositiveField(umin));
    }
    if !(tau > 0.0) {
        return Err(Error::NonPositiveTau(tau));
    }
    let n = metric.dim() as f64;
    let half_n = 0.5 * n;
    let four_pi = 4.0 * std::f64::consts::PI;

    let r = metric.scalar_curvature();
    let mut integrand: Vec<f64> = Vec::with_capacity(u.values().len());
    let f_const = -half_n * tau.ln() - half_n * four_pi.ln();
    for (&ui, &ri) in u.values().iter().zip(r.values()) {
        let v = ui * ui;
        let f = -v.ln() + f_const;
        integrand.push((tau * ri + f - n) * v);
    }
    let w_fform = metric.integrate(&ScalarField::new(*u.spec(), integrand))
        + 4.0 * tau * metric.dirichlet_form(u, u);

    let w_uform = entropy_term(metric, u) + 4.0 * tau * (energy(metric, u) + a)
        - half_n * (4.0 * tau).ln()
        - half_n * std::f64::consts::PI.ln()
        - n
        - 4.0 * a * tau;
    Ok((w_fform, w_uform))
}

// ─────────────────────── scalar minimization ───────────────────────

/// Minimum of h(s) = a_coef * s - (n/2) ln s over s > 0.
/// Returns (argmin, minimum) = (n / (2 a_coef), (n/2) ln a_coef + (n/2)(1 - ln(n/2))).
pub fn h_minimize(a_coef: f64, n: u32) -> Result<(f64, f64)> {
    if !(a_coef > 0.0) {
        return Err(Error::DomainError(format!(
            "h(s) = a s - (n/2) ln s has a minimum only for a > 0, got {a_coef}"
        )));
    }
    let half_n = 0.5 * n as f64;
    let s_star = half_n / a_coef;
    let h_min = half_n * a_coef.ln() + half_n * (1.0 - half_n.ln());
    Ok((s_star, h_min))
}

/// b(n) = -(n/2) ln pi - (n/2)(1 + ln(n/2)); the constant relating the
/// infimum of W over tau to the log entropy:
/// inf_tau [W(g, u, tau, a) + 4 a tau] = Y_a(g, u) + b(n).
pub fn b_const(n: u32) -> f64 {
    let half_n = 0.5 * n as f64;
    -half_n * std::f64::consts::PI.ln() - half_n * (1.0 + half_n.ln())
}

/// sigma = n / (8 (E + a)), the tau at which W(g, u, tau, a) + 4 a tau
/// attains its infimum; plugging tau = sigma turns the W lower bound
/// into an equality.
pub fn optimal_sigma(metric: &MetricState, u: &ScalarField, a: f64) -> Result<f64> {
    let omega = energy(metric, u) + a;
    if !(omega > 0.0) {
        return Err(Error::DomainError(format!(
            "optimal sigma needs energy + a > 0, got {omega}"
        )));
    }
    Ok(metric.dim() as f64 / (8.0 * omega))
}

// ─────────────────────── principal eigenvalue ───────────────────────

const DENSE_SOLVE_MAX_NODES: usize = 2000;
const EIG_REL_TOL: f64 = 1e-10;
const EIG_MAX_OUTER: usize = 600;

/// Smallest eigenvalue of -lap_g + R/4 in the metric L^2 inner product,
/// to relative tolerance 1e-10.
///
/// Shifted inverse power iteration on the weighted symmetric form
/// (K + diag((R/4 - shift) w)) x = mu * diag(w) x with shift strictly
/// below min R/4 <= lambda0; inner solves are dense LU for small grids
/// and Jacobi-preconditioned conjugate gradients above
/// `DENSE_SOLVE_MAX_NODES` nodes.
pub fn lambda0(metric: &MetricState) -> Result<f64> {
    lambda0_with(metric, false)
}

pub(crate) fn lambda0_with(metric: &MetricState, force_cg: bool) -> Result<f64> {
    if metric.kind() == BackendKind::RoundSphere {
        let n = metric.dim() as f64;
        return Ok(n * (n - 1.0) / (4.0 * metric.r2()));
    }
    let spec = *metric.spec();
    let nn = spec.node_count();
    let r = metric.scalar_curvature();
    let r4: Vec<f64> = r.values().iter().map(|x| 0.25 * x).collect();
    let w = metric.quad_weights();
    let shift = r4.iter().copied().fold(f64::INFINITY, f64::min) - 1.0;

    // (K x)_i + (r4_i - shift) w_i x_i: symmetric positive definite
    let apply_shifted = |x: &[f64]| -> Vec<f64> {
        let xf = ScalarField::new(spec, x.to_vec());
        let mut y = metric.flat_stiffness(&xf);
        for i in 0..nn {
            y[i] += (r4[i] - shift) * w[i] * x[i];
        }
        y
    };

    let lu = if nn <= DENSE_SOLVE_MAX_NODES && !force_cg {
        let mut mat = DMatrix::<f64>::zeros(nn, nn);
        let mut e = vec![0.0; nn];
        for j in 0..nn {
            e[j] = 1.0;
            let col = apply_shifted(&e);
            e[j] = 0.0;
            for i in 0..nn {
                mat[(i, j)] = col[i];
            }
        }
        Some(mat.lu())
    } else {
        None
    };

    let mut diag = metric.flat_stiffness_diag();
    for i in 0..nn {
        diag[i] += (r4[i] - shift) * w[i];
    }

    let wnorm = |x: &[f64]| -> f64 {
        x.iter().zip(&w).map(|(xi, wi)| xi * xi * wi).sum::<f64>().sqrt()
    };

    let mut x = vec![1.0; nn];
    let s = wnorm(&x);
    for xi in x.iter_mut() {
        *xi /= s;
    }
    let mut lam_prev = f64::INFINITY;
    let mut hits = 0usize;
    for _ in 0..EIG_MAX_OUTER {
        let b: Vec<f64> = x.iter().zip(&w).map(|(xi, wi)| xi * wi).collect();
        let y = match &lu {
            Some(lu) => lu
                .solve(&DVector::from_vec(b))
                .ok_or_else(|| Error::NoConvergence("singular shifted operator".into()))?
                .as_slice()
                .to_vec(),
            None => cg_solve(&apply_shifted, &diag, &b, 1e-13, 40 * nn)?,
        };
        let s = wnorm(&y);
        if !(s > 0.0) {
            return Err(Error::NoConvergence("inverse power iterate collapsed".into()));
        }
        x = y.iter().map(|yi| yi / s).collect();
        // Rayleigh quotient of the unit-w-norm iterate
        let xf = ScalarField::new(spec, x.clone());
        let lam = energy(metric, &xf);
        if (lam - lam_prev).abs() <= EIG_REL_TOL * lam.abs().max(1.0) {
            hits += 1;
            if hits >= 2 {
                return Ok(lam);
            }
        } else {
            hits = 0;
        }
        lam_prev = lam;
    }
    Err(Error::NoConvergence(format!(
        "inverse power iteration did not settle in {EIG_MAX_OUTER} rounds"
    )))
}

/// Jacobi-preconditioned conjugate gradients for the SPD shifted form.
fn cg_solve(
    apply: &impl Fn(&[f64]) -> Vec<f64>,
    diag: &[f64],
    b: &[f64],
    rel_tol: f64,
    max_iters: usize,
) -> Result<Vec<f64>> {
    let nn = b.len();
    let bnorm = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if bnorm == 0.0 {
        return Ok(vec![0.0; nn]);
    }
    let mut x = vec![0.0; nn];
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(diag).map(|(ri, di)| ri / di).collect();
    let mut p = z.clone();
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
    for _ in 0..max_iters {
        let ap = apply(&p);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if !(pap > 0.0) {
            return Err(Error::NoConvergence("cg lost positive definiteness".into()));
        }
        let alpha = rz / pap;
        for i in 0..nn {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let rnorm = r.iter().map(|x| x * x).sum::<f64>().sqrt();
        if rnorm <= rel_tol * bnorm {
            return Ok(x);
        }
        z = r.iter().zip(diag).map(|(ri, di)| ri / di).collect();
        let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..nn {
            p[i] = z[i] + beta * p[i];
        }
    }
    Err(Error::NoConvergence("cg did not reach tolerance".into()))
}

/// Lowest k eigenpairs of -lap_g + R/4 by a dense symmetric eigensolve,
/// eigenfunctions normalized to unit L^2 mass. Intended for seeding
/// minimizations on small grids; errors above 600 nodes.
pub(crate) fn low_eigenpairs(
    metric: &MetricState,
    k: usize,
) -> Result<Vec<(f64, ScalarField)>> {
    let spec = *metric.spec();
    if metric.kind() == BackendKind::RoundSphere {
        let lam = lambda0(metric)?;
        let c = 1.0 / metric.volume().sqrt();
        return Ok(vec![(lam, ScalarField::constant(spec, c)); k.min(1)]);
    }
    let nn = spec.node_count();
    if nn > 600 {
        return Err(Error::DomainError(format!(
            "dense eigenpair solve limited to 600 nodes, got {nn}"
        )));
    }
    let r = metric.scalar_curvature();
    let w = metric.quad_weights();
    let sqrt_w: Vec<f64> = w.iter().map(|x| x.sqrt()).collect();

    // B = D^{-1/2} (K + diag(R/4 w)) D^{-1/2}, D = diag(w)
    let mut mat = DMatrix::<f64>::zeros(nn, nn);
    let mut e = vec![0.0; nn];
    for j in 0..nn {
        e[j] = 1.0;
        let mut col = metric.flat_stiffness(&ScalarField::new(spec, e.clone()));
        col[j] += 0.25 * r.values()[j] * w[j];
        e[j] = 0.0;
        for i in 0..nn {
            mat[(i, j)] = col[i] / (sqrt_w[i] * sqrt_w[j]);
        }
    }
    let sym = 0.5 * (&mat + mat.transpose());
    let eig = sym.symmetric_eigen();
    let mut order: Vec<usize> = (0..nn).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].partial_cmp(&eig.eigenvalues[j]).unwrap());

    let mut out = Vec::with_capacity(k.min(nn));
    for &idx in order.iter().take(k) {
        let col = eig.eigenvectors.column(idx);
        let mut vals: Vec<f64> = (0..nn).map(|i| col[i] / sqrt_w[i]).collect();
        let mass: f64 = vals.iter().zip(&w).map(|(v, wi)| v * v * wi).sum();
        let scale = mass.sqrt().recip();
        let mean: f64 = vals.iter().zip(&w).map(|(v, wi)| v * wi).sum();
        let sign = if mean < 0.0 { -1.0 } else { 1.0 };
        for v in vals.iter_mut() {
            *v *= scale * sign;
        }
        out.push((eig.eigenvalues[idx], ScalarField::new(spec, vals)));
    }
    Ok(out)
}

// ─────────────────────────── entropy report ───────────────────────────

/// One row of functional values for a (metric, u, a) triple at time t.
///
/// `y0` is the a = 0 log entropy; it is NaN when the plain energy is not
/// positive (the a = 0 functional is undefined there). JSON has no NaN,
/// so that one field round-trips through null. `defect` is the soliton
/// defect at c = 4 omega / n, `rhs_bound` the matching monotonicity rate
/// (n / 4 omega) * defect, and `sigma` = n / (8 omega).
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EntropyReport {
    pub t: f64,
    pub a: f64,
    pub e: f64,
    pub omega: f64,
    #[serde(serialize_with = "ser_maybe_nan", deserialize_with = "de_maybe_nan")]
    pub y0: f64,
    pub ya: f64,
    pub ya_adjusted: f64,
    pub lambda0: f64,
    pub w_opt: f64,
    pub b_n: f64,
    pub sigma: f64,
    pub defect: f64,
    pub rhs_bound: f64,
}

fn ser_maybe_nan<S: serde::Serializer>(x: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
    if x.is_nan() {
        s.serialize_none()
    } else {
        s.serialize_some(x)
    }
}

fn de_maybe_nan<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    Ok(<Option<f64> as serde::Deserialize>::deserialize(d)?.unwrap_or(f64::NAN))
}

/// Finite-difference slope of a uniformly spaced series: centered in the
/// interior, one-sided second-order stencils at the two endpoints.
pub(crate) fn fd_slope(dt: f64, y: &[f64]) -> Vec<f64> {
    let n = y.len();
    if n == 0 {
        return Vec::new();
    }
    if n == 1 {
        return vec![0.0];
    }
    if n == 2 {
        let slope = (y[1] - y[0]) / dt;
        return vec![slope, slope];
    }
    let mut out = Vec::with_capacity(n);
    out.push((-3.0 * y[0] + 4.0 * y[1] - y[2]) / (2.0 * dt));
    for k in 1..n - 1 {
        out.push((y[k + 1] - y[k - 1]) / (2.0 * dt));
    }
    out.push((3.0 * y[n - 1] - 4.0 * y[n - 2] + y[n - 3]) / (2.0 * dt));
    out
}

impl EntropyReport {
    /// Computes every column except lambda0, which the caller supplies
    /// (it is the one expensive entry and is often shared or strided).
    pub fn compute(
        metric: &MetricState,
        u: &ScalarField,
        a: f64,
        lambda0: f64,
    ) -> Result<EntropyReport> {
        let n = metric.dim() as f64;
        let t = metric.t();
        let e = energy(metric, u);
        let omega = e + a;
        let ya = log_entropy(metric, u, a)?;
        let ya_adjusted = ya + 4.0 * a * t;
        let y0 = match log_entropy(metric, u, 0.0) {
            Ok(v) => v,
            Err(Error::DomainError(_)) => f64::NAN,
            Err(other) => return Err(other),
        };
        let sigma = n / (8.0 * omega);
        let w_opt = perelman_W(metric, u, sigma, a)?.0;
        let defect = metric.soliton_defect(u, 4.0 * omega / n)?;
        let rhs_bound = n / (4.0 * omega) * defect;
        Ok(EntropyReport {
            t,
            a,
            e,
            omega,
            y0,
            ya,
            ya_adjusted,
            lambda0,
            w_opt,
            b_n: b_const(metric.dim()),
            sigma,
            defect,
            rhs_bound,
        })
    }

    /// Finite-difference d/dt of `ya_adjusted` over a uniformly spaced
    /// row sequence: centered differences in the interior, one-sided
    /// second-order stencils at the endpoints, zero for a lone row.
    pub fn adjusted_dt(rows: &[EntropyReport]) -> Vec<f64> {
        if rows.len() < 2 {
            return vec![0.0; rows.len()];
        }
        let y: Vec<f64> = rows.iter().map(|r| r.ya_adjusted).collect();
        fd_slope(rows[1].t - rows[0].t, &y)
    }
}
