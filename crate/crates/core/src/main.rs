//! Command-line driver.
//!
//! Every subcommand reads one experiment configuration (a single JSON
//! document); the flags override individual fields. Exit code 0 means
//! every asserted claim of the run passed, 1 means at least one failed,
//! 2 means the run errored before producing a verdict.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use ricci_lab::io::{load_trajectory, save_trajectory, write_entropy_csv, write_json};
use ricci_lab::{
    cfl_step, constant_summary, evolve, oracles, run_refinement_study, run_suite, tabulate,
    tabulate_with, ClaimCheck, Error, ExperimentConfig, ManifoldSpec, Result,
};

#[derive(Parser)]
#[command(
    name = "ricci-lab",
    version,
    about = "Entropy functionals along discretized Ricci flow on closed surfaces"
)]
struct Cli {
    /// Experiment configuration, one JSON document.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Output directory for artifacts (overrides the config's `out`).
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,

    /// Override the config's random seed.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,

    /// Override the claim-level tolerances (monotonicity, derivative,
    /// chain, identity); conservation tolerances are left alone.
    #[arg(long, global = true, value_name = "X")]
    tol: Option<f64>,

    /// With `verify`: also halve dt and h this many times and check the
    /// measured convergence orders.
    #[arg(long, global = true, value_name = "K")]
    refine: Option<u32>,

    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run the forward flow and write trajectory.jsonl.
    Flow,
    /// Tabulate entropy rows along the coupled flow / backward-density
    /// system and write entropy.csv; reuses <out>/trajectory.jsonl when
    /// present.
    Entropy,
    /// Estimate the log-Sobolev constant at the initial metric, together
    /// with its curvature lower bound; write constant.json.
    Logsobolev,
    /// Run the configured verification suite and print one line per
    /// claim; artifacts go to the output directory when one is set.
    Verify,
    /// Print reference values from the independent oracles (closed
    /// forms, dense eigensolves, brute-force scans).
    Oracle,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn load_config(cli: &Cli) -> Result<ExperimentConfig> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| Error::InvalidConfig("--config PATH is required here".into()))?;
    let mut cfg: ExperimentConfig = serde_json::from_str(&std::fs::read_to_string(path)?)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(t) = cli.tol {
        cfg.tol.monotonicity = t;
        cfg.tol.derivative = t;
        cfg.tol.chain = t;
        cfg.tol.identity = t;
    }
    if let Some(dir) = &cli.out {
        cfg.out = Some(dir.clone());
    }
    Ok(cfg)
}

fn out_dir(cfg: &ExperimentConfig) -> Result<PathBuf> {
    let dir = cfg.out.clone().unwrap_or_else(|| PathBuf::from("."));
    std::fs::create_dir_all(&dir)?;
    Ok(dir)
}

fn print_claims(claims: &[ClaimCheck]) {
    for c in claims {
        let status = if !c.asserted {
            "info"
        } else if c.pass {
            "PASS"
        } else {
            "FAIL"
        };
        let note = if c.note.is_empty() {
            String::new()
        } else {
            format!("  ({})", c.note)
        };
        println!(
            "[{status}] {}: value = {:+.6e}, tol = {:.1e}, margin = {:+.3e}{note}",
            c.name, c.value, c.tol, c.margin
        );
    }
}

fn run(cli: &Cli) -> Result<bool> {
    match cli.cmd {
        Cmd::Flow => {
            let cfg = load_config(cli)?;
            cfg.validate()?;
            let dir = out_dir(&cfg)?;
            let g1 = cfg.initial.build(&cfg.spec, cfg.t1)?;
            let mut fcfg = cfg.flow;
            if !(fcfg.dt > 0.0) {
                fcfg.dt = cfl_step(&g1, &fcfg);
            }
            let traj = evolve(&g1, &fcfg)?;
            let path = dir.join("trajectory.jsonl");
            save_trajectory(&path, &traj)?;
            println!(
                "flow: {} states on [{}, {}] at dt = {:.6e} -> {}",
                traj.len(),
                cfg.t1,
                cfg.t2,
                traj.dt(),
                path.display()
            );
            Ok(true)
        }
        Cmd::Entropy => {
            let cfg = load_config(cli)?;
            let dir = out_dir(&cfg)?;
            let tpath = dir.join("trajectory.jsonl");
            let (sol_len, rows) = if tpath.exists() {
                let traj = load_trajectory(&tpath)?;
                let (sol, rows) = tabulate_with(&cfg, &traj)?;
                println!("entropy: reused {}", tpath.display());
                (sol.len(), rows)
            } else {
                let (_, sol, rows) = tabulate(&cfg)?;
                (sol.len(), rows)
            };
            let path = dir.join("entropy.csv");
            write_entropy_csv(&path, &rows)?;
            let first = rows.first().expect("window holds at least one row");
            let last = rows.last().expect("window holds at least one row");
            println!(
                "entropy: {sol_len} rows, Y_a + 4at from {:+.8e} to {:+.8e} -> {}",
                first.ya_adjusted,
                last.ya_adjusted,
                path.display()
            );
            Ok(true)
        }
        Cmd::Logsobolev => {
            let cfg = load_config(cli)?;
            let dir = out_dir(&cfg)?;
            let g = cfg.initial.build(&cfg.spec, cfg.t1)?;
            let (summary, minimizer, s_in) =
                constant_summary(&g, cfg.a, &cfg.minimize, 64, cfg.seed)?;
            let mut doc = serde_json::to_value(&summary)?;
            doc["minimizer"] = serde_json::to_value(minimizer.values())?;
            let path = dir.join("constant.json");
            write_json(&path, &doc)?;
            println!(
                "logsobolev: C = {:.8}, case = {}, B = {:+.4e}, c_tilde = {}, margin = {:+.4e} -> {}",
                summary.c,
                summary.case,
                summary.b,
                s_in.c_tilde,
                summary.margin,
                path.display()
            );
            Ok(true)
        }
        Cmd::Verify => {
            let cfg = load_config(cli)?;
            let report = run_suite(&cfg)?;
            print_claims(&report.claims);
            let mut ok = report.pass();
            println!(
                "suite {}: {} (worst asserted margin {:+.3e})",
                report.suite,
                if ok { "PASS" } else { "FAIL" },
                report.worst_violation
            );
            if let Some(k) = cli.refine {
                let rr = run_refinement_study(&cfg, k)?;
                print_claims(&rr.claims);
                println!(
                    "refinement: space ratios {:?}, time ratios {:?}",
                    rr.space_ratios, rr.time_ratios
                );
                ok &= rr.pass();
            }
            Ok(ok)
        }
        Cmd::Oracle => {
            println!("round sphere, n = 2, r0^2 = 1:");
            for t in [0.0, 0.1, 0.2] {
                println!("  r^2({t}) = {:.12}", oracles::round_r2(1.0, 2, t));
            }
            println!("  Y_0 = ln 2pi = {:.12}", (2.0 * std::f64::consts::PI).ln());
            println!(
                "  dW/dt at r^2 = 0.6, tau = 0.5: {:.12}",
                oracles::round_dw_dt(0.6, 0.5)
            );

            println!("torus curvature sup error, phi = 0.2 cos x:");
            let mut prev = None;
            for nx in [16usize, 32, 64] {
                let e = oracles::torus_curvature_sup_error(nx, 0.2)?;
                let ratio = prev.map(|p: f64| p / e);
                prev = Some(e);
                match ratio {
                    Some(r) => println!("  nx = {nx:3}: {e:.6e} (ratio {r:.2})"),
                    None => println!("  nx = {nx:3}: {e:.6e}"),
                }
            }

            println!("axisym total-curvature error vs 4pi:");
            let mut prev = None;
            for n in [17usize, 33, 65] {
                let e = oracles::axisym_gauss_bonnet_error(n)?;
                let ratio = prev.map(|p: f64| p / e);
                prev = Some(e);
                match ratio {
                    Some(r) => println!("  n_theta = {n:3}: {e:.6e} (ratio {r:.2})"),
                    None => println!("  n_theta = {n:3}: {e:.6e}"),
                }
            }

            println!("scalar h-minimization, a_coef = 3, n = 2:");
            let (s_grid, h_grid) = oracles::brute_force_h_min(3.0, 2);
            let (s_exact, h_exact) = ricci_lab::h_minimize(3.0, 2)?;
            println!("  grid scan: min = {h_grid:.10} at sigma = {s_grid:.10}");
            println!("  closed form: min = {h_exact:.10} at sigma = {s_exact:.10}");

            println!("principal eigenvalue lambda0, dense vs inverse power:");
            for (label, spec) in [
                ("flat torus 12x12", ManifoldSpec::conformal_torus(12, 12)?),
                ("unit axisym sphere 33", ManifoldSpec::axisym_sphere2(33)?),
            ] {
                let g = ricci_lab::MetricState::background(spec, 0.0)?;
                let dense = oracles::dense_lambda0(&g)?;
                let fast = ricci_lab::lambda0(&g)?;
                println!("  {label}: dense = {dense:.10}, solver = {fast:.10}");
            }
            Ok(true)
        }
    }
}
