//! Independent reference computations for cross-checking the main code
//! paths: dense eigensolves, brute-force scans, chain-rule tensor
//! assembly, and closed forms on exactly solvable metrics. Nothing here
//! is called by the implementation routes it checks.

use crate::conjugate_heat::normalize;
use crate::error::{Error, Result};
use crate::manifold::{BackendKind, ManifoldSpec, MetricState, ScalarField};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

// ───────────────────────── dense eigenvalue ─────────────────────────

/// Smallest eigenvalue of -lap_g + R/4 by a full dense symmetric
/// eigensolve. The operator matrix is assembled column by column from
/// `laplace_beltrami`, a different route than the stiffness-based
/// iteration in `functionals::lambda0`.
pub fn dense_lambda0(metric: &MetricState) -> Result<f64> {
    if metric.kind() == BackendKind::RoundSphere {
        let n = metric.dim() as f64;
        return Ok(n * (n - 1.0) / (4.0 * metric.r2()));
    }
    let spec = *metric.spec();
    let nn = spec.node_count();
    if nn > 4096 {
        return Err(Error::DomainError(format!(
            "dense eigensolve reference limited to 4096 nodes, got {nn}"
        )));
    }
    let r = metric.scalar_curvature();
    let w = metric.quad_weights();
    let sqrt_w: Vec<f64> = w.iter().map(|x| x.sqrt()).collect();
    let mut mat = DMatrix::<f64>::zeros(nn, nn);
    let mut e = vec![0.0; nn];
    for j in 0..nn {
        e[j] = 1.0;
        let lap = metric.laplace_beltrami(&ScalarField::new(spec, e.clone()));
        e[j] = 0.0;
        for i in 0..nn {
            let a_ij = -lap.values()[i] + if i == j { 0.25 * r.values()[i] } else { 0.0 };
            // weighted symmetrization: B = D^{1/2} A D^{-1/2} with the
            // nodal operator A self-adjoint in the w inner product
            mat[(i, j)] = a_ij * sqrt_w[i] / sqrt_w[j];
        }
    }
    let sym = 0.5 * (&mat + mat.transpose());
    let eig = sym.symmetric_eigen();
    Ok(eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min))
}

// ───────────────────────── brute-force scans ─────────────────────────

/// Grid search for the minimum of h(s) = a_coef s - (n/2) ln s over
/// s in (0, 50] with step 1e-4. Returns (argmin, minimum).
pub fn brute_force_h_min(a_coef: f64, n: u32) -> (f64, f64) {
    let half_n = 0.5 * n as f64;
    let step = 1e-4;
    let mut best_s = step;
    let mut best_h = f64::INFINITY;
    let mut k = 1usize;
    loop {
        let s = k as f64 * step;
        if s > 50.0 {
            break;
        }
        let h = a_coef * s - half_n * s.ln();
        if h < best_h {
            best_h = h;
            best_s = s;
        }
        k += 1;
    }
    (best_s, best_h)
}

/// Plain fixed-step projected gradient descent from many random starts,
/// no line search or preconditioning: a slow but simple reference for
/// the log-Sobolev constant on tiny grids. Everything (operator action,
/// objective) is assembled from `laplace_beltrami` rather than the
/// stiffness form used by the implementation. The step must sit under
/// the 2/L stability threshold of the grid, roughly h^2/4 here. Each
/// restart exits once the objective plateaus.
pub fn brute_force_sobolev_min(
    metric: &MetricState,
    a: f64,
    restarts: usize,
    iters: usize,
    step: f64,
    seed: u64,
) -> f64 {
    let spec = *metric.spec();
    let nn = spec.node_count();
    let w = metric.quad_weights();
    let r = metric.scalar_curvature();
    let n = metric.dim() as f64;

    // objective from the operator route: -int u^2 ln u^2 + (n/2) ln omega
    let value = |u: &ScalarField| -> f64 {
        let lap = metric.laplace_beltrami(u);
        let mut omega = a;
        let mut ent = 0.0;
        for i in 0..nn {
            let ui = u.values()[i];
            omega += (-lap.values()[i] + 0.25 * r.values()[i] * ui) * ui * w[i];
            let sq = ui * ui;
            if sq != 0.0 {
                ent += sq * sq.ln() * w[i];
            }
        }
        -ent + 0.5 * n * omega.ln()
    };

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = f64::INFINITY;
    // start set: constant, then a one-hot spike at every node (covers
    // all grid-scale concentration basins), then rough nodal randoms
    for restart in 0..(1 + nn + restarts) {
        let mut u = if restart == 0 {
            normalize(metric, &ScalarField::constant(spec, 1.0)).unwrap()
        } else if restart <= nn {
            let mut vals = vec![0.0; nn];
            vals[restart - 1] = 1.0;
            normalize(metric, &ScalarField::new(spec, vals)).unwrap()
        } else {
            let vals: Vec<f64> = (0..nn).map(|_| rng.gen_range(0.02..1.0)).collect();
            normalize(metric, &ScalarField::new(spec, vals)).unwrap()
        };
        let mut last_checkpoint = f64::INFINITY;
        for it in 0..iters {
            let lap = metric.laplace_beltrami(&u);
            let mut omega = a;
            for i in 0..nn {
                let ui = u.values()[i];
                omega += (-lap.values()[i] + 0.25 * r.values()[i] * ui) * ui * w[i];
            }
            let uv = u.values();
            let mut g: Vec<f64> = (0..nn)
                .map(|i| {
                    // 2 ln|u| form: u^2 underflows long before u does
                    let ent = if uv[i] == 0.0 {
                        0.0
                    } else {
                        uv[i] * (2.0 * uv[i].abs().ln() + 1.0)
                    };
                    let au = -lap.values()[i] + 0.25 * r.values()[i] * uv[i];
                    -2.0 * ent + (n / omega) * au
                })
                .collect();
            let ip: f64 = g.iter().zip(uv).zip(&w).map(|((gi, ui), wi)| gi * ui * wi).sum();
            for i in 0..nn {
                g[i] -= ip * uv[i];
            }
            let vals: Vec<f64> = (0..nn).map(|i| (uv[i] - step * g[i]).abs()).collect();
            u = normalize(metric, &ScalarField::new(spec, vals)).unwrap();
            if it % 500 == 499 {
                let val = value(&u);
                if last_checkpoint - val < 1e-13 {
                    break;
                }
                last_checkpoint = val;
            }
        }
        best = best.min(value(&u));
    }
    best
}

// ───────────────────── chain-rule defect assembly ─────────────────────

/// Soliton defect assembled through the potential route: the tensor
/// Ric + Hess(f) - c g with the derivatives of f = -ln u^2 produced from
/// u's stencil derivatives by the chain rule (f' = -2u'/u,
/// f'' = -2u''/u + 2u'^2/u^2), weighted by u^2 = e^{-f}. Algebraically
/// identical to `MetricState::soliton_defect`, assembled independently.
pub fn defect_potential_form(metric: &MetricState, u: &ScalarField, c: f64) -> Result<f64> {
    let umin = u.min();
    if umin <= 0.0 {
        return Err(Error::NonPositiveField(umin));
    }
    let spec = *metric.spec();
    let rf = metric.scalar_curvature();
    let w = metric.quad_weights();
    match spec.kind {
        BackendKind::ConformalTorus => {
            let g = spec.torus_grid();
            let uv = u.values();
            let ux = g.dx(uv);
            let uy = g.dy(uv);
            let uxx = g.dxx(uv);
            let uyy = g.dyy(uv);
            let uxy = g.dxy(uv);
            let px = g.dx(metric.dof());
            let py = g.dy(metric.dof());
            let mut acc = 0.0;
            for i in 0..uv.len() {
                let ui = uv[i];
                let fx = -2.0 * ux[i] / ui;
                let fy = -2.0 * uy[i] / ui;
                let fxx = -2.0 * uxx[i] / ui + 2.0 * ux[i] * ux[i] / (ui * ui);
                let fyy = -2.0 * uyy[i] / ui + 2.0 * uy[i] * uy[i] / (ui * ui);
                let fxy = -2.0 * uxy[i] / ui + 2.0 * ux[i] * uy[i] / (ui * ui);
                let hxx = fxx - px[i] * fx + py[i] * fy;
                let hxy = fxy - py[i] * fx - px[i] * fy;
                let hyy = fyy - py[i] * fy + px[i] * fx;
                let phi = metric.dof()[i];
                let e2p = (2.0 * phi).exp();
                let diag = (0.5 * rf.values()[i] - c) * e2p;
                let (txx, txy, tyy) = (diag + hxx, hxy, diag + hyy);
                acc += (-4.0 * phi).exp()
                    * (txx * txx + 2.0 * txy * txy + tyy * tyy)
                    * ui
                    * ui
                    * w[i];
            }
            Ok(acc)
        }
        BackendKind::AxisymSphere2 => {
            let g = spec.lat_grid();
            let uv = u.values();
            let ut = g.d1(uv);
            let utt = g.d2(uv);
            let pt = g.d1(metric.dof());
            let mut acc = 0.0;
            for j in 0..uv.len() {
                let uj = uv[j];
                let theta = g.theta(j);
                let cot = theta.cos() / theta.sin();
                let ft = -2.0 * ut[j] / uj;
                let ftt = -2.0 * utt[j] / uj + 2.0 * ut[j] * ut[j] / (uj * uj);
                let htt = ftt - pt[j] * ft;
                let hpp = (cot + pt[j]) * ft;
                let phi = metric.dof()[j];
                let e2p = (2.0 * phi).exp();
                let diag = (0.5 * rf.values()[j] - c) * e2p;
                let (t_tt, t_pp) = (diag + htt, diag + hpp);
                acc += (-4.0 * phi).exp() * (t_tt * t_tt + t_pp * t_pp) * uj * uj * w[j];
            }
            Ok(acc)
        }
        BackendKind::RoundSphere => metric.soliton_defect(u, c),
    }
}

// ───────────────────────── closed forms ─────────────────────────

/// Exact r^2(t) of the shrinking round n-sphere: r0^2 - 2(n-1) t.
pub fn round_r2(r0_sq: f64, n: u32, t: f64) -> f64 {
    r0_sq - 2.0 * (n as f64 - 1.0) * t
}

/// Exact scalar curvature for the conformal factor amp*cos(x) on the
/// flat torus: R = 2 amp cos(x) e^{-2 amp cos x}.
pub fn torus_cos_curvature(amp: f64, x: f64) -> f64 {
    2.0 * amp * x.cos() * (-2.0 * amp * x.cos()).exp()
}

/// Sup-norm error of the discrete curvature against `torus_cos_curvature`
/// on an nx-by-nx grid.
pub fn torus_curvature_sup_error(nx: usize, amp: f64) -> Result<f64> {
    let spec = ManifoldSpec::conformal_torus(nx, nx)?;
    let phi = ScalarField::from_fn(spec, |x, _| amp * x.cos());
    let m = MetricState::new(spec, 0.0, phi.into_values())?;
    let r = m.scalar_curvature();
    let exact = ScalarField::from_fn(spec, |x, _| torus_cos_curvature(amp, x));
    let mut worst = 0.0f64;
    for (a, b) in r.values().iter().zip(exact.values()) {
        worst = worst.max((a - b).abs());
    }
    Ok(worst)
}

/// Total-curvature quadrature error |int R dvol - 8 pi| on the axisym
/// sphere with a wiggly conformal factor; the factor drops out exactly
/// (its Laplacian telescopes), leaving the pure midpoint-rule defect.
pub fn axisym_gauss_bonnet_error(n_theta: usize) -> Result<f64> {
    let spec = ManifoldSpec::axisym_sphere2(n_theta)?;
    let phi = ScalarField::from_fn(spec, |t, _| 0.07 * (3.0 * t).cos());
    let m = MetricState::new(spec, 0.0, phi.into_values())?;
    let total = m.integrate(&m.scalar_curvature());
    Ok((total - 8.0 * std::f64::consts::PI).abs())
}

/// Exact dW/dt for the shrinking round 2-sphere with constant u and
/// tau(t) = t2 - t + sigma: equals 2 tau |Ric - g/(2 tau)|^2-rate, i.e.
/// 4 tau (1/r^2 - 1/(2 tau))^2.
pub fn round_dw_dt(r_sq: f64, tau: f64) -> f64 {
    let gap = 1.0 / r_sq - 1.0 / (2.0 * tau);
    4.0 * tau * gap * gap
}
