//! End-to-end acceptance: one test per verification target, each
//! printing a single pass/fail line with the measured values (run with
//! `--nocapture` to see them on success).

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ricci_lab::{
    adjusted_log_entropy, b_const, bound_no_b, bound_with_b, calibrate_c_tilde, estimate_constant,
    h_minimize, lambda0, log_entropy, normalize, optimal_sigma, oracles, perelman_W,
    prop_lower_bound, run_constant_monotonicity, run_identity_suite, run_monotonicity_suite,
    run_refinement_study, run_soliton_check, run_suite, tabulate, validate_sobolev_input,
    ExperimentConfig, FlowConfig, InitialMetric, ManifoldSpec, MetricState, MinimizeConfig,
    ScalarField, SuiteKind, Tolerances, UFinalRecipe, VerificationReport,
};

fn verdict(ok: bool, line: &str) {
    println!("[{}] {line}", if ok { "PASS" } else { "FAIL" });
}

fn base_cfg(
    spec: ManifoldSpec,
    initial: InitialMetric,
    a: f64,
    t1: f64,
    t2: f64,
    dt: f64,
) -> ExperimentConfig {
    ExperimentConfig {
        spec,
        initial,
        flow: FlowConfig {
            t_start: t1,
            t_end: t2,
            dt,
            cfl_safety: 0.9,
            max_steps: 2_000_000,
            scheme: ricci_lab::Scheme::Euler,
        },
        a,
        t1,
        t2,
        suite: SuiteKind::Monotonicity,
        u_final: UFinalRecipe::Constant,
        seed: 7,
        tol: Tolerances::default(),
        lambda0_every: None,
        minimize: MinimizeConfig::default(),
        out: None,
    }
}

/// Positive unit-mass field from seeded low modes, built through the
/// public surface only (exp of a small trigonometric polynomial).
fn seeded_field(metric: &MetricState, rng: &mut ChaCha8Rng, amp: f64) -> ScalarField {
    let c: Vec<f64> = (0..6).map(|_| rng.gen_range(-amp..amp)).collect();
    let raw = ScalarField::from_fn(*metric.spec(), |x, y| {
        (c[0] * x.cos() + c[1] * (2.0 * x).cos() + c[2] * x.sin() * y.cos()
            + c[3] * y.sin()
            + c[4] * (2.0 * y).cos()
            + c[5] * (3.0 * x).cos())
        .exp()
    });
    normalize(metric, &raw).expect("positive field normalizes")
}

// ─────────────────────────── 1: round-sphere exactness ───────────────────────────

#[test]
fn round_sphere_closed_forms_are_exact() {
    let clock = Instant::now();
    let mut cfg = base_cfg(
        ManifoldSpec::round_sphere(2).unwrap(),
        InitialMetric::Round { r0_sq: 1.0 },
        0.0,
        0.0,
        0.4,
        1e-3,
    );
    cfg.u_final = UFinalRecipe::Constant;
    let (traj, sol, rows) = tabulate(&cfg).unwrap();

    let mut r2_err = 0.0_f64;
    for k in 0..traj.len() {
        let g = traj.state(k);
        r2_err = r2_err.max((g.r2() - oracles::round_r2(1.0, 2, g.t())).abs());
    }
    let mut v_err = 0.0_f64;
    for j in 0..sol.len() {
        let g = traj.state(j);
        let u = sol.u(j).values()[0];
        v_err = v_err.max((u * u * g.volume() - 1.0).abs());
    }
    let ln2pi = (2.0 * std::f64::consts::PI).ln();
    let y_err = rows
        .iter()
        .map(|r| (r.y0 - ln2pi).abs())
        .fold(0.0_f64, f64::max);
    let secs = clock.elapsed().as_secs_f64();

    let ok = r2_err <= 1e-12 && v_err <= 1e-10 && y_err <= 1e-8 && secs < 5.0;
    verdict(
        ok,
        &format!(
            "round-sphere exactness: |r^2 - (1-2t)| = {r2_err:.2e} (<= 1e-12), \
             |v vol - 1| = {v_err:.2e} (<= 1e-10), |Y_0 - ln 2pi| = {y_err:.2e} (<= 1e-8), \
             {secs:.2}s (< 5s)"
        ),
    );
    assert!(ok, "r2 {r2_err:e}, v {v_err:e}, y0 {y_err:e}, {secs}s");
}

// ─────────────────────── 2: derivative equality oracle ───────────────────────

#[test]
fn round_sphere_derivative_equality_at_unit_radius() {
    let clock = Instant::now();
    // start above r^2 = 1 so the unit-radius row is interior (centered FD)
    let dt = 1e-3;
    let mut cfg = base_cfg(
        ManifoldSpec::round_sphere(2).unwrap(),
        InitialMetric::Round { r0_sq: 1.0 + 2.0 * dt },
        0.5,
        0.0,
        2.0 * dt,
        dt,
    );
    cfg.u_final = UFinalRecipe::Constant;
    let (traj, _, rows) = tabulate(&cfg).unwrap();
    assert!((traj.state(1).r2() - 1.0).abs() <= 1e-14);

    let dy = ricci_lab::EntropyReport::adjusted_dt(&rows);
    let fd = dy[1];
    let rhs = rows[1].rhs_bound;
    let secs = clock.elapsed().as_secs_f64();

    let ok = (fd - 1.0).abs() <= 5e-3 && (rhs - 1.0).abs() <= 5e-3 && secs < 5.0;
    verdict(
        ok,
        &format!(
            "derivative equality at r^2 = 1, a = 0.5: d/dt[Y_a + 4at] = {fd:.6} and \
             (n/4w) defect = {rhs:.6}, both within 5e-3 of 1, {secs:.2}s (< 5s)"
        ),
    );
    assert!(ok, "fd {fd}, rhs {rhs}, {secs}s");
}

// ──────────────────── 3: scalar lemma and W identities ────────────────────

#[test]
fn scalar_minimization_and_w_identities() {
    let clock = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(42);

    // closed-form h minimization vs brute-force grid scan, 100 draws
    let mut h_err = 0.0_f64;
    for _ in 0..100 {
        let a_coef = rng.gen_range(0.05..20.0);
        let n = rng.gen_range(2..=8u32);
        let (_, h_exact) = h_minimize(a_coef, n).unwrap();
        let (_, h_grid) = oracles::brute_force_h_min(a_coef, n);
        h_err = h_err.max((h_exact - h_grid).abs());
    }

    let torus = MetricState::background(ManifoldSpec::conformal_torus(16, 16).unwrap(), 0.0).unwrap();
    let sphere = MetricState::background(ManifoldSpec::axisym_sphere2(24).unwrap(), 0.0).unwrap();

    // W density-form vs expanded form over 100 random fields, and the
    // expanded form's independence of the remainder a
    let mut form_gap = 0.0_f64;
    let mut a_gap = 0.0_f64;
    for k in 0..100 {
        let g = if k % 2 == 0 { &torus } else { &sphere };
        let u = seeded_field(g, &mut rng, 0.4);
        let tau = rng.gen_range(0.01..5.0);
        let a = rng.gen_range(0.05..2.0);
        let (wf, wu) = perelman_W(g, &u, tau, a).unwrap();
        form_gap = form_gap.max((wf - wu).abs());
        let (_, wu2) = perelman_W(g, &u, tau, rng.gen_range(0.05..2.0)).unwrap();
        a_gap = a_gap.max((wu - wu2).abs());
    }

    // W >= Y_a - 4 a tau + b(n) for random (u, tau, a); equality at the
    // optimal tau = sigma
    let mut bound_min = f64::INFINITY;
    let mut eq_gap = 0.0_f64;
    for k in 0..100 {
        let g = if k % 2 == 0 { &torus } else { &sphere };
        let u = seeded_field(g, &mut rng, 0.4);
        let tau = rng.gen_range(0.01..5.0);
        let a = rng.gen_range(0.05..2.0);
        let ya = log_entropy(g, &u, a).unwrap();
        let bn = b_const(g.dim());
        let (w, _) = perelman_W(g, &u, tau, a).unwrap();
        bound_min = bound_min.min(w - (ya - 4.0 * a * tau + bn));
        let sigma = optimal_sigma(g, &u, a).unwrap();
        let (w_opt, _) = perelman_W(g, &u, sigma, a).unwrap();
        eq_gap = eq_gap.max((w_opt - (ya - 4.0 * a * sigma + bn)).abs());
    }
    let secs = clock.elapsed().as_secs_f64();

    let ok = h_err <= 1e-6
        && form_gap <= 1e-9
        && a_gap <= 1e-12
        && bound_min >= -1e-9
        && eq_gap <= 1e-9
        && secs < 30.0;
    verdict(
        ok,
        &format!(
            "scalar lemma and W identities: h-min gap {h_err:.2e} (<= 1e-6), \
             W forms {form_gap:.2e} (<= 1e-9), a-independence {a_gap:.2e} (<= 1e-12), \
             bound margin {bound_min:+.2e} (>= -1e-9), equality at sigma {eq_gap:.2e} (<= 1e-9), \
             {secs:.2}s (< 30s)"
        ),
    );
    assert!(
        ok,
        "h {h_err:e}, forms {form_gap:e}, a {a_gap:e}, bound {bound_min:e}, eq {eq_gap:e}, {secs}s"
    );
}

// ──────────────── 4: monotonicity on an evolving metric ────────────────

#[test]
fn monotonicity_on_perturbed_sphere_at_fine_resolution() {
    let clock = Instant::now();
    let mut cfg = base_cfg(
        ManifoldSpec::axisym_sphere2(128).unwrap(),
        InitialMetric::Cos2Theta { amplitude: 0.05 },
        0.1,
        0.0,
        0.05,
        0.0, // dt from the CFL bound
    );
    cfg.u_final = UFinalRecipe::RandomPositive { amplitude: 0.3 };
    let report = run_monotonicity_suite(&cfg).unwrap();

    let worst_step = report
        .claim("adjusted log entropy nondecreasing (worst step increment)")
        .unwrap()
        .value;
    let deriv_margin = report
        .claim("d/dt of adjusted log entropy dominates the defect rate (interior)")
        .unwrap()
        .value;
    let secs = clock.elapsed().as_secs_f64();

    let ok = report.pass() && worst_step >= -1e-6 && deriv_margin >= -1e-4 && secs < 120.0;
    verdict(
        ok,
        &format!(
            "monotonicity on perturbed sphere (N = 128, a = 0.1, window 0.05): \
             worst step {worst_step:+.2e} (>= -1e-6), \
             min interior dY_fd - rhs {deriv_margin:+.2e} (>= -1e-4), {secs:.1}s (< 120s)"
        ),
    );
    assert!(ok, "claims: {:#?} ({secs}s)", report.claims);
}

// ──────────────── 5: conjugate-heat conservation everywhere ────────────────

fn conservation_of(report: &VerificationReport) -> (f64, f64, f64) {
    let mass = report
        .claim("density mass error |int v - 1| (all stored steps)")
        .unwrap();
    let drift = report
        .claim("pre-renormalization mass drift per unit time")
        .unwrap();
    let minu = report
        .claim("backward density stays positive (min u over window)")
        .unwrap();
    (mass.value, drift.value, minu.value)
}

#[test]
fn conservation_holds_across_all_suites() {
    let mut runs: Vec<(&str, VerificationReport)> = Vec::new();

    let mut cfg = base_cfg(
        ManifoldSpec::axisym_sphere2(32).unwrap(),
        InitialMetric::Cos2Theta { amplitude: 0.05 },
        0.1,
        0.0,
        0.02,
        0.0,
    );
    cfg.u_final = UFinalRecipe::RandomPositive { amplitude: 0.3 };
    runs.push(("monotonicity", run_monotonicity_suite(&cfg).unwrap()));
    runs.push(("identity", run_identity_suite(&cfg).unwrap()));

    let round = base_cfg(
        ManifoldSpec::round_sphere(2).unwrap(),
        InitialMetric::Round { r0_sq: 1.0 },
        0.0,
        0.0,
        0.2,
        2e-3,
    );
    runs.push(("soliton", run_soliton_check(&round).unwrap()));

    let mut torus = base_cfg(
        ManifoldSpec::conformal_torus(8, 8).unwrap(),
        InitialMetric::Background,
        1.0,
        0.0,
        0.02,
        0.005,
    );
    torus.minimize = MinimizeConfig {
        restarts: 2,
        max_iters: 20_000,
        step: 0.5,
        grad_tol: 1e-5,
        seed: 3,
    };
    runs.push(("constant", run_constant_monotonicity(&torus).unwrap()));

    let mut worst_mass = 0.0_f64;
    let mut worst_drift = 0.0_f64;
    let mut least_u = f64::INFINITY;
    for (_, report) in &runs {
        let (mass, drift, minu) = conservation_of(report);
        worst_mass = worst_mass.max(mass);
        worst_drift = worst_drift.max(drift);
        least_u = least_u.min(minu);
    }

    let ok = worst_mass <= 1e-8 && worst_drift <= 1e-6 && least_u > 0.0;
    verdict(
        ok,
        &format!(
            "conservation across all four suites: mass error {worst_mass:.2e} (<= 1e-8), \
             drift {worst_drift:.2e} (<= 1e-6 per unit time), min density {least_u:.2e} (> 0)"
        ),
    );
    assert!(ok, "mass {worst_mass:e}, drift {worst_drift:e}, min {least_u:e}");
}

// ─────────────────────── 6: principal eigenvalue oracle ───────────────────────

#[test]
fn principal_eigenvalue_oracles_agree() {
    // dense eigensolve vs inverse power iteration on small grids,
    // flat and perturbed
    let mut dense_gap = 0.0_f64;
    for n_theta in [16usize, 32] {
        let spec = ManifoldSpec::axisym_sphere2(n_theta).unwrap();
        for g in [
            MetricState::background(spec, 0.0).unwrap(),
            InitialMetric::Cos2Theta { amplitude: 0.05 }
                .build(&spec, 0.0)
                .unwrap(),
        ] {
            let gap = (lambda0(&g).unwrap() - oracles::dense_lambda0(&g).unwrap()).abs();
            dense_gap = dense_gap.max(gap);
        }
    }

    let torus =
        MetricState::background(ManifoldSpec::conformal_torus(16, 16).unwrap(), 0.0).unwrap();
    let torus_err = lambda0(&torus).unwrap().abs();

    let sphere =
        MetricState::background(ManifoldSpec::axisym_sphere2(128).unwrap(), 0.0).unwrap();
    let sphere_err = (lambda0(&sphere).unwrap() - 0.5).abs();

    let ok = dense_gap <= 1e-9 && torus_err <= 1e-10 && sphere_err <= 1e-6;
    verdict(
        ok,
        &format!(
            "principal eigenvalue: dense-vs-iterative gap {dense_gap:.2e} (<= 1e-9), \
             flat torus |lambda0| = {torus_err:.2e} (<= 1e-10), \
             unit sphere |lambda0 - 1/2| = {sphere_err:.2e} at N = 128 (<= 1e-6)"
        ),
    );
    assert!(ok, "dense {dense_gap:e}, torus {torus_err:e}, sphere {sphere_err:e}");
}

// ──────────────── 7: log-Sobolev constant monotonicity ────────────────

#[test]
fn log_sobolev_constant_improves_along_flow() {
    let clock = Instant::now();
    let cfg = base_cfg(
        ManifoldSpec::axisym_sphere2(48).unwrap(),
        InitialMetric::Cos2Theta { amplitude: 0.05 },
        0.1,
        0.0,
        0.05,
        0.0,
    );
    let report = run_constant_monotonicity(&cfg).unwrap();

    let links = [
        "adjusted log-Sobolev constant nondecreasing",
        "chain link: adjusted entropy of the replay is monotone end to end",
        "chain link: adjusted entropy of the replay is monotone per step",
        "chain link: replayed field dominates the t1 minimum",
    ];
    let mut least = f64::INFINITY;
    for name in links {
        least = least.min(report.claim(name).unwrap().value);
    }
    let headline = report.claim(links[0]).unwrap().value;
    let secs = clock.elapsed().as_secs_f64();

    let ok = report.pass() && least >= -1e-4 && secs < 300.0;
    verdict(
        ok,
        &format!(
            "log-Sobolev constant along the flow (a = 0.1): \
             C(t2) + 4at2 - C(t1) - 4at1 = {headline:+.3e} and every chain link \
             >= {least:+.3e} (both >= -1e-4), {secs:.1}s (< 300s)"
        ),
    );
    assert!(ok, "claims: {:#?} ({secs}s)", report.claims);
}

// ─────────────── 8: curvature lower bound consistency ───────────────

#[test]
fn curvature_lower_bound_consistency_on_torus() {
    let g = MetricState::background(ManifoldSpec::conformal_torus(12, 12).unwrap(), 0.0).unwrap();
    let (s_in, _) = calibrate_c_tilde(&g, 200, 11).unwrap();
    let validation = validate_sobolev_input(&g, &s_in, 200, 13);

    // small a puts the correction term in play, large a removes it
    let mcfg = MinimizeConfig::default();
    let mut bound_gap = f64::NEG_INFINITY;
    let mut cases = Vec::new();
    for a in [0.01, 1.0] {
        let (bound, case, _) = prop_lower_bound(&g, a, &s_in).unwrap();
        let (c, _) = estimate_constant(&g, a, &mcfg).unwrap();
        bound_gap = bound_gap.max(bound - c);
        cases.push(format!("{case}"));
    }

    // the two case formulas agree where the correction vanishes (flat
    // metric, so B = 0 exactly at a = 1/(c_tilde^2 vol))
    let lam = lambda0(&g).unwrap();
    let a_threshold = 1.0 / (s_in.c_tilde * s_in.c_tilde * g.volume());
    let (_, _, b_at) = prop_lower_bound(&g, a_threshold, &s_in).unwrap();
    let case_gap = (bound_with_b(2, s_in.c_tilde, 0.0, a_threshold, lam) - bound_no_b(2, s_in.c_tilde))
        .abs()
        .max(b_at.abs());

    let ok = validation.worst_margin >= 0.0
        && bound_gap <= 1e-6
        && cases == ["WithB", "NoB"]
        && case_gap <= 1e-12;
    verdict(
        ok,
        &format!(
            "curvature lower bound on the flat torus: validation margin \
             {:+.2e} over {} samples (>= 0), bound - C <= {bound_gap:+.2e} in cases \
             [{} / {}] (<= 1e-6), case formulas at B = 0 differ by {case_gap:.2e} (<= 1e-12)",
            validation.worst_margin, validation.samples, cases[0], cases[1]
        ),
    );
    assert!(
        ok,
        "margin {:e}, gap {bound_gap:e}, cases {cases:?}, case_gap {case_gap:e}",
        validation.worst_margin
    );
}

// ─────────────────────── 9: refinement orders ───────────────────────

#[test]
fn refinement_orders_match_declared_schemes() {
    let mut torus = base_cfg(
        ManifoldSpec::conformal_torus(16, 16).unwrap(),
        InitialMetric::CosX { amplitude: 0.2 },
        0.5,
        0.0,
        0.04,
        0.0,
    );
    torus.u_final = UFinalRecipe::RandomPositive { amplitude: 0.3 };

    let mut sphere = base_cfg(
        ManifoldSpec::axisym_sphere2(17).unwrap(),
        InitialMetric::Cos2Theta { amplitude: 0.05 },
        0.1,
        0.0,
        0.02,
        0.0,
    );
    sphere.u_final = UFinalRecipe::RandomPositive { amplitude: 0.3 };

    let mut space_min = f64::INFINITY;
    let mut time_min = f64::INFINITY;
    let mut all_pass = true;
    for cfg in [&torus, &sphere] {
        let rr = run_refinement_study(cfg, 2).unwrap();
        all_pass &= rr.pass();
        space_min = space_min.min(rr.space_ratios.iter().cloned().fold(f64::INFINITY, f64::min));
        time_min = time_min.min(rr.time_ratios.iter().cloned().fold(f64::INFINITY, f64::min));
    }

    let ok = all_pass && space_min >= 3.5 && time_min >= 1.9;
    verdict(
        ok,
        &format!(
            "refinement orders over two halvings: curvature/integral error ratio \
             {space_min:.2} (>= 3.5, second order in h), telescoped W residual ratio \
             {time_min:.2} (>= 1.9, first order in dt)"
        ),
    );
    assert!(ok, "space {space_min}, time {time_min}");
}

// ─────────────── cross-suite sanity: verify dispatch ───────────────

#[test]
fn suite_dispatch_matches_direct_calls() {
    let mut cfg = base_cfg(
        ManifoldSpec::round_sphere(2).unwrap(),
        InitialMetric::Round { r0_sq: 1.0 },
        0.0,
        0.0,
        0.2,
        2e-3,
    );
    cfg.suite = SuiteKind::Soliton;
    let via_dispatch = run_suite(&cfg).unwrap();
    let direct = run_soliton_check(&cfg).unwrap();
    assert_eq!(via_dispatch.suite, direct.suite);
    assert_eq!(via_dispatch.claims.len(), direct.claims.len());
    assert!(via_dispatch.pass() && direct.pass());

    // the adjusted entropy helper matches the report rows on this run
    let g = MetricState::round(2, 1.0, 0.0).unwrap();
    let u = normalize(&g, &ScalarField::constant(*g.spec(), 1.0)).unwrap();
    let y = adjusted_log_entropy(&g, &u, 0.0, 0.0).unwrap();
    assert!((y - via_dispatch.rows[0].ya_adjusted).abs() <= 1e-14);
}
