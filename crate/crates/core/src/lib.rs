//! Numerical laboratory for entropy functionals along discretized Ricci
//! flows on closed surfaces, with an exact round-sphere ODE backend.
//!
//! The crate is organized bottom-up:
//!
//! - [`manifold`]: discretized conformal metrics (flat torus, axially
//!   symmetric sphere) and the exact round-sphere family, with quadrature,
//!   flux-form Laplacians, Dirichlet forms, and curvature tensors.
//! - [`flow`]: explicit time stepping of the normalized-free Ricci flow
//!   (conformal factor ODE per node; exact radius ODE for round spheres).
//! - [`conjugate_heat`]: mass-conservative backward solver for the
//!   density v = u^2 coupled to a stored trajectory.
//! - [`functionals`]: energy, principal eigenvalue, log entropy, adjusted
//!   log entropy, the W functional in two algebraically equal forms, and
//!   the scalar minimization underlying the entropy lower bound.
//! - [`logsobolev`]: direct minimization of the log entropy over the unit
//!   L^2 sphere and the curvature-based lower bound for the constant.
//! - [`experiments`]: end-to-end verification suites and report types.
//! - [`io`]: JSON-lines persistence for trajectories and solutions, CSV
//!   entropy reports.
//! - [`oracles`]: independent reference computations (dense eigensolves,
//!   brute-force scans, closed forms) used by tests and the CLI.

pub mod conjugate_heat;
pub mod error;
pub mod experiments;
pub mod flow;
pub mod functionals;
pub mod io;
pub mod logsobolev;
pub mod manifold;
pub mod oracles;

pub use conjugate_heat::{backward_solve, normalize, BackwardSolution};
pub use error::{Error, Result};
pub use experiments::{
    run_constant_monotonicity, run_identity_suite, run_monotonicity_suite, run_refinement_study,
    run_soliton_check, run_suite, tabulate, tabulate_with, ClaimCheck, ExperimentConfig,
    InitialMetric, RefinementReport, SuiteKind, Tolerances, UFinalRecipe, VerificationReport,
};
pub use flow::{cfl_step, evolve, ricci_step, stability_bound, FlowConfig, Scheme, Trajectory};
pub use functionals::{
    adjusted_log_entropy, b_const, energy, h_minimize, lambda0, log_entropy, optimal_sigma,
    perelman_W, EntropyReport,
};
pub use logsobolev::{
    bound_no_b, bound_with_b, calibrate_c_tilde, constant_summary, estimate_constant,
    prop_lower_bound, sobolev_margin, validate_sobolev_input, CaseTag, MinimizeConfig,
    SobolevInput, SobolevSummary, SobolevValidation,
};
pub use manifold::{BackendKind, Background, ManifoldSpec, MetricState, Resolution, ScalarField};
