//! Discrete closed surfaces carrying conformal metrics, plus an exact
//! round-sphere backend of any dimension.
//!
//! Every metric is g = exp(2 phi) ghat over a fixed background ghat:
//!
//! * `ConformalTorus`: flat square torus of side 2 pi, periodic nx x ny grid.
//! * `AxisymSphere2`: unit round 2-sphere, axisymmetric fields on a latitude
//!   grid of n_theta cell-centered nodes.
//! * `RoundSphere`: round metric of radius r on the n-sphere, a single
//!   degree of freedom r^2 > 0; all fields are constants.
//!
//! In two dimensions the conformal calculus is
//!
//! ```text
//! R      = exp(-2 phi) (Rhat - 2 lap_hat phi)
//! lap_g  = exp(-2 phi) lap_hat
//! |du|^2 = exp(-2 phi) |dhat u|^2
//! dvol   = exp(2 phi) dvhat
//! ```
//!
//! The discrete Laplacians are flux forms whose exact adjoint is the
//! edge-based `dirichlet_form`, so integration by parts holds to rounding,
//! Gauss-Bonnet on the torus is exact, and conservative time stepping can
//! rely on the weighted Laplacian summing to zero.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

mod axisym;
mod torus;

pub(crate) use axisym::LatGrid;
pub(crate) use torus::TorusGrid;

// ─────────────────────────────── specs ───────────────────────────────

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    ConformalTorus,
    AxisymSphere2,
    RoundSphere,
}

/// Grid resolution. `None` for the round sphere (single degree of freedom).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Resolution {
    Grid { nx: usize, ny: usize },
    Latitude { n_theta: usize },
    Point,
}

/// Fixed background geometry, determined by the backend kind.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Background {
    FlatTorus2Pi,
    UnitRoundSphere2,
    RoundSphereN,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifoldSpec {
    pub kind: BackendKind,
    pub n: u32,
    pub resolution: Resolution,
    pub background: Background,
}

impl ManifoldSpec {
    pub fn conformal_torus(nx: usize, ny: usize) -> Result<Self> {
        if nx < 8 || ny < 8 {
            return Err(Error::InvalidSpec(format!(
                "torus grid must be at least 8x8, got {nx}x{ny}"
            )));
        }
        Ok(ManifoldSpec {
            kind: BackendKind::ConformalTorus,
            n: 2,
            resolution: Resolution::Grid { nx, ny },
            background: Background::FlatTorus2Pi,
        })
    }

    pub fn axisym_sphere2(n_theta: usize) -> Result<Self> {
        if n_theta < 16 {
            return Err(Error::InvalidSpec(format!(
                "latitude grid needs at least 16 nodes, got {n_theta}"
            )));
        }
        Ok(ManifoldSpec {
            kind: BackendKind::AxisymSphere2,
            n: 2,
            resolution: Resolution::Latitude { n_theta },
            background: Background::UnitRoundSphere2,
        })
    }

    pub fn round_sphere(n: u32) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidSpec(format!("round sphere needs n >= 2, got {n}")));
        }
        Ok(ManifoldSpec {
            kind: BackendKind::RoundSphere,
            n,
            resolution: Resolution::Point,
            background: Background::RoundSphereN,
        })
    }

    /// Checks the cross-field constraints after deserialization.
    pub fn validate(&self) -> Result<()> {
        let rebuilt = match (self.kind, self.resolution) {
            (BackendKind::ConformalTorus, Resolution::Grid { nx, ny }) => {
                Self::conformal_torus(nx, ny)?
            }
            (BackendKind::AxisymSphere2, Resolution::Latitude { n_theta }) => {
                Self::axisym_sphere2(n_theta)?
            }
            (BackendKind::RoundSphere, Resolution::Point) => Self::round_sphere(self.n)?,
            _ => {
                return Err(Error::InvalidSpec(
                    "resolution shape does not match backend kind".into(),
                ))
            }
        };
        if rebuilt.n != self.n || rebuilt.background != self.background {
            return Err(Error::InvalidSpec(
                "dimension or background inconsistent with backend kind".into(),
            ));
        }
        Ok(())
    }

    pub fn node_count(&self) -> usize {
        match self.resolution {
            Resolution::Grid { nx, ny } => nx * ny,
            Resolution::Latitude { n_theta } => n_theta,
            Resolution::Point => 1,
        }
    }

    pub(crate) fn torus_grid(&self) -> TorusGrid {
        match self.resolution {
            Resolution::Grid { nx, ny } => TorusGrid::new(nx, ny),
            _ => unreachable!("not a torus spec"),
        }
    }

    pub(crate) fn lat_grid(&self) -> LatGrid {
        match self.resolution {
            Resolution::Latitude { n_theta } => LatGrid::new(n_theta),
            _ => unreachable!("not a latitude spec"),
        }
    }

    /// Smallest background grid spacing; `None` for the round sphere.
    pub fn h_min(&self) -> Option<f64> {
        match self.resolution {
            Resolution::Grid { .. } => {
                let g = self.torus_grid();
                Some(g.hx.min(g.hy))
            }
            Resolution::Latitude { .. } => Some(self.lat_grid().h),
            Resolution::Point => None,
        }
    }
}

/// Surface area of the unit n-sphere: 2 pi^((n+1)/2) / Gamma((n+1)/2).
pub fn unit_sphere_area(n: u32) -> f64 {
    // Gamma at integer or half-integer argument (n+1)/2, by recursion.
    fn gamma_half(twice: u32) -> f64 {
        match twice {
            1 => std::f64::consts::PI.sqrt(),
            2 => 1.0,
            k => (k as f64 / 2.0 - 1.0) * gamma_half(k - 2),
        }
    }
    2.0 * std::f64::consts::PI.powf((n as f64 + 1.0) / 2.0) / gamma_half(n + 1)
}

// ─────────────────────────────── fields ───────────────────────────────

/// Node values bound to a manifold spec. Torus nodes are row-major with x
/// fastest, latitude nodes increase in theta, the round sphere has one node.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    spec: ManifoldSpec,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(spec: ManifoldSpec, values: Vec<f64>) -> Self {
        assert_eq!(
            values.len(),
            spec.node_count(),
            "field length must equal the node count of its spec"
        );
        ScalarField { spec, values }
    }

    pub fn constant(spec: ManifoldSpec, c: f64) -> Self {
        let n = spec.node_count();
        ScalarField { spec, values: vec![c; n] }
    }

    /// Builds a field from node coordinates: torus f(x, y), latitude f(theta, 0),
    /// round sphere f(0, 0).
    pub fn from_fn(spec: ManifoldSpec, f: impl Fn(f64, f64) -> f64) -> Self {
        let values = match spec.resolution {
            Resolution::Grid { nx, ny } => {
                let g = spec.torus_grid();
                let mut v = Vec::with_capacity(nx * ny);
                for iy in 0..ny {
                    for ix in 0..nx {
                        v.push(f(g.x(ix), g.y(iy)));
                    }
                }
                v
            }
            Resolution::Latitude { n_theta } => {
                let g = spec.lat_grid();
                (0..n_theta).map(|j| f(g.theta(j), 0.0)).collect()
            }
            Resolution::Point => vec![f(0.0, 0.0)],
        };
        ScalarField { spec, values }
    }

    pub fn spec(&self) -> &ManifoldSpec {
        &self.spec
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

fn assert_bound(spec: &ManifoldSpec, field: &ScalarField) {
    assert_eq!(spec, field.spec(), "field bound to a different manifold spec");
}

// ─────────────────────────────── metric ───────────────────────────────

/// Metric state at one time: conformal factor phi on grid backends, or
/// the single value r^2 on the round sphere.
#[derive(Clone, Debug, PartialEq)]
pub struct MetricState {
    spec: ManifoldSpec,
    t: f64,
    dof: Vec<f64>,
}

impl MetricState {
    pub fn new(spec: ManifoldSpec, t: f64, dof: Vec<f64>) -> Result<Self> {
        spec.validate()?;
        let want = match spec.kind {
            BackendKind::RoundSphere => 1,
            _ => spec.node_count(),
        };
        if dof.len() != want {
            return Err(Error::InvalidSpec(format!(
                "metric dof length {} does not match spec ({} expected)",
                dof.len(),
                want
            )));
        }
        if spec.kind == BackendKind::RoundSphere && dof[0] <= 0.0 {
            return Err(Error::InvalidSpec(format!("r^2 must be positive, got {}", dof[0])));
        }
        Ok(MetricState { spec, t, dof })
    }

    /// phi = 0 on grid backends, r^2 = 1 on the round sphere.
    pub fn background(spec: ManifoldSpec, t: f64) -> Result<Self> {
        let dof = match spec.kind {
            BackendKind::RoundSphere => vec![1.0],
            _ => vec![0.0; spec.node_count()],
        };
        MetricState::new(spec, t, dof)
    }

    pub fn round(n: u32, r2: f64, t: f64) -> Result<Self> {
        MetricState::new(ManifoldSpec::round_sphere(n)?, t, vec![r2])
    }

    pub fn spec(&self) -> &ManifoldSpec {
        &self.spec
    }

    pub fn kind(&self) -> BackendKind {
        self.spec.kind
    }

    pub fn dim(&self) -> u32 {
        self.spec.n
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    pub fn set_t(&mut self, t: f64) {
        self.t = t;
    }

    pub fn dof(&self) -> &[f64] {
        &self.dof
    }

    pub fn dof_mut(&mut self) -> &mut [f64] {
        &mut self.dof
    }

    /// r^2 of the round sphere backend.
    pub fn r2(&self) -> f64 {
        assert_eq!(self.spec.kind, BackendKind::RoundSphere, "r2 is a round-sphere quantity");
        self.dof[0]
    }

    pub fn phi_min(&self) -> f64 {
        assert_ne!(self.spec.kind, BackendKind::RoundSphere, "phi is a grid quantity");
        self.dof.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Total volume: integral of 1 against dvol.
    pub fn volume(&self) -> f64 {
        match self.spec.kind {
            BackendKind::RoundSphere => {
                let n = self.spec.n;
                unit_sphere_area(n) * self.r2().powf(n as f64 / 2.0)
            }
            _ => self.quad_weights().iter().sum(),
        }
    }

    /// Quadrature weights per node: exp(2 phi) times the background cell
    /// measure; the full volume for the round sphere's single node.
    pub fn quad_weights(&self) -> Vec<f64> {
        match self.spec.kind {
            BackendKind::ConformalTorus => {
                let g = self.spec.torus_grid();
                let cell = g.hx * g.hy;
                self.dof.iter().map(|p| (2.0 * p).exp() * cell).collect()
            }
            BackendKind::AxisymSphere2 => {
                let g = self.spec.lat_grid();
                let flat = g.weights_flat();
                self.dof.iter().zip(flat).map(|(p, w)| (2.0 * p).exp() * w).collect()
            }
            BackendKind::RoundSphere => vec![self.volume()],
        }
    }

    /// Scalar curvature field. Torus: -2 exp(-2 phi) lap_hat phi.
    /// Axisym sphere: exp(-2 phi) (2 - 2 lap_hat phi). Round: n (n-1) / r^2.
    pub fn scalar_curvature(&self) -> ScalarField {
        match self.spec.kind {
            BackendKind::ConformalTorus => {
                let g = self.spec.torus_grid();
                let lap = g.laplace(&self.dof);
                let values = self
                    .dof
                    .iter()
                    .zip(lap)
                    .map(|(p, l)| -2.0 * (-2.0 * p).exp() * l)
                    .collect();
                ScalarField::new(self.spec, values)
            }
            BackendKind::AxisymSphere2 => {
                let g = self.spec.lat_grid();
                let lap = g.laplace(&self.dof);
                let values = self
                    .dof
                    .iter()
                    .zip(lap)
                    .map(|(p, l)| (-2.0 * p).exp() * (2.0 - 2.0 * l))
                    .collect();
                ScalarField::new(self.spec, values)
            }
            BackendKind::RoundSphere => {
                let n = self.spec.n as f64;
                ScalarField::new(self.spec, vec![n * (n - 1.0) / self.r2()])
            }
        }
    }

    /// Laplace-Beltrami operator: exp(-2 phi) lap_hat in two dimensions;
    /// zero on the round sphere (fields there are constants).
    pub fn laplace_beltrami(&self, u: &ScalarField) -> ScalarField {
        assert_bound(&self.spec, u);
        match self.spec.kind {
            BackendKind::ConformalTorus => {
                let g = self.spec.torus_grid();
                let lap = g.laplace(u.values());
                let values =
                    self.dof.iter().zip(lap).map(|(p, l)| (-2.0 * p).exp() * l).collect();
                ScalarField::new(self.spec, values)
            }
            BackendKind::AxisymSphere2 => {
                let g = self.spec.lat_grid();
                let lap = g.laplace(u.values());
                let values =
                    self.dof.iter().zip(lap).map(|(p, l)| (-2.0 * p).exp() * l).collect();
                ScalarField::new(self.spec, values)
            }
            BackendKind::RoundSphere => ScalarField::new(self.spec, vec![0.0]),
        }
    }

    /// Pointwise squared gradient |grad u|^2_g from centered differences.
    pub fn grad_norm_sq(&self, u: &ScalarField) -> ScalarField {
        assert_bound(&self.spec, u);
        match self.spec.kind {
            BackendKind::ConformalTorus => {
                let g = self.spec.torus_grid();
                let ux = g.dx(u.values());
                let uy = g.dy(u.values());
                let values = (0..u.values().len())
                    .map(|i| (-2.0 * self.dof[i]).exp() * (ux[i] * ux[i] + uy[i] * uy[i]))
                    .collect();
                ScalarField::new(self.spec, values)
            }
            BackendKind::AxisymSphere2 => {
                let g = self.spec.lat_grid();
                let ut = g.d1(u.values());
                let values = (0..u.values().len())
                    .map(|i| (-2.0 * self.dof[i]).exp() * ut[i] * ut[i])
                    .collect();
                ScalarField::new(self.spec, values)
            }
            BackendKind::RoundSphere => ScalarField::new(self.spec, vec![0.0]),
        }
    }

    /// Integral of a node field against dvol.
    pub fn integrate(&self, f: &ScalarField) -> f64 {
        assert_bound(&self.spec, f);
        self.quad_weights().iter().zip(f.values()).map(|(w, v)| w * v).sum()
    }

    /// Edge-based Dirichlet form: integral of <grad u, grad w> dvol.
    /// In two conformal dimensions this is background-metric independent.
    /// Exact adjoint of `laplace_beltrami` under `integrate`.
    pub fn dirichlet_form(&self, u: &ScalarField, w: &ScalarField) -> f64 {
        assert_bound(&self.spec, u);
        assert_bound(&self.spec, w);
        match self.spec.kind {
            BackendKind::ConformalTorus => self.spec.torus_grid().dirichlet(u.values(), w.values()),
            BackendKind::AxisymSphere2 => self.spec.lat_grid().dirichlet(u.values(), w.values()),
            BackendKind::RoundSphere => 0.0,
        }
    }

    /// Nodal action of the stiffness matrix K of `dirichlet_form`:
    /// u' K w = dirichlet_form(u, w). Metric independent, symmetric,
    /// positive semidefinite, annihilates constants. Equals the weighted
    /// Laplacian row sum: (K u)_i = -(lap_g u)_i * quad_weights[i].
    pub(crate) fn flat_stiffness(&self, u: &ScalarField) -> Vec<f64> {
        assert_bound(&self.spec, u);
        match self.spec.kind {
            BackendKind::ConformalTorus => self.spec.torus_grid().stiffness(u.values()),
            BackendKind::AxisymSphere2 => self.spec.lat_grid().stiffness(u.values()),
            BackendKind::RoundSphere => vec![0.0],
        }
    }

    pub(crate) fn flat_stiffness_diag(&self) -> Vec<f64> {
        match self.spec.kind {
            BackendKind::ConformalTorus => self.spec.torus_grid().stiffness_diag(),
            BackendKind::AxisymSphere2 => self.spec.lat_grid().stiffness_diag(),
            BackendKind::RoundSphere => vec![0.0],
        }
    }
}

// ─────────────────────────── tensor fields ───────────────────────────

/// Symmetric 2-tensor in background components. Torus: (xx, xy, yy) per
/// node. Axisym: diagonal (theta-theta, psi-psi / sin^2 theta) per node,
/// the azimuthal entry stored with the sin^2 factored out so it stays
/// regular at the poles. Round sphere: a single multiple of g.
#[derive(Clone, Debug)]
pub enum SymTensorField {
    Torus { spec: ManifoldSpec, xx: Vec<f64>, xy: Vec<f64>, yy: Vec<f64> },
    Axisym { spec: ManifoldSpec, tt: Vec<f64>, pp: Vec<f64> },
    Round { spec: ManifoldSpec, coef: f64 },
}

impl SymTensorField {
    pub fn spec(&self) -> &ManifoldSpec {
        match self {
            SymTensorField::Torus { spec, .. } => spec,
            SymTensorField::Axisym { spec, .. } => spec,
            SymTensorField::Round { spec, .. } => spec,
        }
    }

    /// Pointwise squared g-norm |T|^2_g.
    pub fn norm_sq(&self, metric: &MetricState) -> ScalarField {
        match self {
            SymTensorField::Torus { spec, xx, xy, yy } => {
                assert_eq!(spec, metric.spec());
                let values = (0..xx.len())
                    .map(|i| {
                        let s = (-4.0 * metric.dof()[i]).exp();
                        s * (xx[i] * xx[i] + 2.0 * xy[i] * xy[i] + yy[i] * yy[i])
                    })
                    .collect();
                ScalarField::new(*spec, values)
            }
            SymTensorField::Axisym { spec, tt, pp } => {
                assert_eq!(spec, metric.spec());
                let values = (0..tt.len())
                    .map(|i| {
                        let s = (-4.0 * metric.dof()[i]).exp();
                        s * (tt[i] * tt[i] + pp[i] * pp[i])
                    })
                    .collect();
                ScalarField::new(*spec, values)
            }
            SymTensorField::Round { spec, coef } => {
                assert_eq!(spec, metric.spec());
                ScalarField::new(*spec, vec![spec.n as f64 * coef * coef])
            }
        }
    }
}

impl MetricState {
    /// Ricci tensor: (R/2) g in two dimensions, ((n-1)/r^2) g on the round sphere.
    pub fn ricci_tensor(&self) -> SymTensorField {
        match self.spec.kind {
            BackendKind::RoundSphere => SymTensorField::Round {
                spec: self.spec,
                coef: (self.spec.n as f64 - 1.0) / self.r2(),
            },
            _ => {
                let r = self.scalar_curvature();
                let half_r_conf: Vec<f64> = r
                    .values()
                    .iter()
                    .zip(&self.dof)
                    .map(|(rv, p)| 0.5 * rv * (2.0 * p).exp())
                    .collect();
                match self.spec.kind {
                    BackendKind::ConformalTorus => SymTensorField::Torus {
                        spec: self.spec,
                        xx: half_r_conf.clone(),
                        xy: vec![0.0; half_r_conf.len()],
                        yy: half_r_conf,
                    },
                    BackendKind::AxisymSphere2 => SymTensorField::Axisym {
                        spec: self.spec,
                        tt: half_r_conf.clone(),
                        pp: half_r_conf,
                    },
                    BackendKind::RoundSphere => unreachable!(),
                }
            }
        }
    }

    /// Metric Hessian of a scalar field: background second derivatives
    /// minus the Christoffel correction of the conformal metric.
    pub fn hessian(&self, f: &ScalarField) -> SymTensorField {
        assert_bound(&self.spec, f);
        match self.spec.kind {
            BackendKind::ConformalTorus => {
                let g = self.spec.torus_grid();
                let fx = g.dx(f.values());
                let fy = g.dy(f.values());
                let fxx = g.dxx(f.values());
                let fyy = g.dyy(f.values());
                let fxy = g.dxy(f.values());
                let px = g.dx(&self.dof);
                let py = g.dy(&self.dof);
                let n = f.values().len();
                let mut xx = vec![0.0; n];
                let mut xy = vec![0.0; n];
                let mut yy = vec![0.0; n];
                for i in 0..n {
                    xx[i] = fxx[i] - px[i] * fx[i] + py[i] * fy[i];
                    xy[i] = fxy[i] - py[i] * fx[i] - px[i] * fy[i];
                    yy[i] = fyy[i] - py[i] * fy[i] + px[i] * fx[i];
                }
                SymTensorField::Torus { spec: self.spec, xx, xy, yy }
            }
            BackendKind::AxisymSphere2 => {
                let g = self.spec.lat_grid();
                let ft = g.d1(f.values());
                let ftt = g.d2(f.values());
                let pt = g.d1(&self.dof);
                let n = f.values().len();
                let mut tt = vec![0.0; n];
                let mut pp = vec![0.0; n];
                for j in 0..n {
                    let theta = g.theta(j);
                    let cot = theta.cos() / theta.sin();
                    tt[j] = ftt[j] - pt[j] * ft[j];
                    // psi-psi component divided by sin^2:
                    // -Gamma^theta_{psi psi} f' / sin^2 = (cot + phi') f'
                    pp[j] = (cot + pt[j]) * ft[j];
                }
                SymTensorField::Axisym { spec: self.spec, tt, pp }
            }
            BackendKind::RoundSphere => SymTensorField::Round { spec: self.spec, coef: 0.0 },
        }
    }

    /// Shrinking-soliton defect at level c:
    ///
    /// ```text
    /// integral | Ric - 2 Hess(u)/u + 2 du x du / u^2 - c g |^2_g u^2 dvol
    /// ```
    ///
    /// The tensor equals Ric + Hess(f) - c g for f = -ln u^2, and the
    /// weight u^2 equals exp(-f). Vanishes exactly when g is a gradient
    /// shrinking soliton with potential f at scale c.
    pub fn soliton_defect(&self, u: &ScalarField, c: f64) -> Result<f64> {
        assert_bound(&self.spec, u);
        let umin = u.min();
        if umin <= 0.0 {
            return Err(Error::NonPositiveField(umin));
        }
        match self.spec.kind {
            BackendKind::ConformalTorus => {
                let g = self.spec.torus_grid();
                let uv = u.values();
                let ux = g.dx(uv);
                let uy = g.dy(uv);
                let uxx = g.dxx(uv);
                let uyy = g.dyy(uv);
                let uxy = g.dxy(uv);
                let px = g.dx(&self.dof);
                let py = g.dy(&self.dof);
                let rf = self.scalar_curvature();
                let w = self.quad_weights();
                let mut acc = 0.0;
                for i in 0..uv.len() {
                    let e2p = (2.0 * self.dof[i]).exp();
                    let diag = (0.5 * rf.values()[i] - c) * e2p;
                    let hxx = uxx[i] - px[i] * ux[i] + py[i] * uy[i];
                    let hxy = uxy[i] - py[i] * ux[i] - px[i] * uy[i];
                    let hyy = uyy[i] - py[i] * uy[i] + px[i] * ux[i];
                    let ui = uv[i];
                    let txx = diag - 2.0 * hxx / ui + 2.0 * ux[i] * ux[i] / (ui * ui);
                    let txy = -2.0 * hxy / ui + 2.0 * ux[i] * uy[i] / (ui * ui);
                    let tyy = diag - 2.0 * hyy / ui + 2.0 * uy[i] * uy[i] / (ui * ui);
                    let nsq = (-4.0 * self.dof[i]).exp()
                        * (txx * txx + 2.0 * txy * txy + tyy * tyy);
                    acc += nsq * ui * ui * w[i];
                }
                Ok(acc)
            }
            BackendKind::AxisymSphere2 => {
                let g = self.spec.lat_grid();
                let uv = u.values();
                let ut = g.d1(uv);
                let utt = g.d2(uv);
                let pt = g.d1(&self.dof);
                let rf = self.scalar_curvature();
                let w = self.quad_weights();
                let mut acc = 0.0;
                for j in 0..uv.len() {
                    let theta = g.theta(j);
                    let cot = theta.cos() / theta.sin();
                    let e2p = (2.0 * self.dof[j]).exp();
                    let diag = (0.5 * rf.values()[j] - c) * e2p;
                    let htt = utt[j] - pt[j] * ut[j];
                    let hpp = (cot + pt[j]) * ut[j];
                    let uj = uv[j];
                    let t_tt = diag - 2.0 * htt / uj + 2.0 * ut[j] * ut[j] / (uj * uj);
                    let t_pp = diag - 2.0 * hpp / uj;
                    let nsq = (-4.0 * self.dof[j]).exp() * (t_tt * t_tt + t_pp * t_pp);
                    acc += nsq * uj * uj * w[j];
                }
                Ok(acc)
            }
            BackendKind::RoundSphere => {
                let n = self.spec.n as f64;
                let kappa = (n - 1.0) / self.r2();
                let gap = kappa - c;
                Ok(n * gap * gap * u.values()[0] * u.values()[0] * self.volume())
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn seeded_field(spec: ManifoldSpec, seed: u64, amp: f64) -> ScalarField {
        // deterministic smooth-ish field without pulling in rand here
        ScalarField::from_fn(spec, |a, b| {
            amp * ((1.3 * a + 0.7 * b + seed as f64).sin()
                + 0.5 * (2.0 * a - b + 0.3 * seed as f64).cos())
        })
    }

    #[test]
    fn spec_validation_rejects_small_grids() {
        assert!(ManifoldSpec::conformal_torus(4, 16).is_err());
        assert!(ManifoldSpec::axisym_sphere2(8).is_err());
        assert!(ManifoldSpec::round_sphere(1).is_err());
    }

    #[test]
    fn flat_torus_volume_and_curvature() {
        let spec = ManifoldSpec::conformal_torus(16, 16).unwrap();
        let m = MetricState::background(spec, 0.0).unwrap();
        let tau = 2.0 * std::f64::consts::PI;
        assert!((m.volume() - tau * tau).abs() < 1e-12);
        let r = m.scalar_curvature();
        assert_eq!(r.max(), 0.0);
        assert_eq!(r.min(), 0.0);
    }

    #[test]
    fn unit_round_sphere_backends_agree() {
        let m = MetricState::round(2, 1.0, 0.0).unwrap();
        assert!((m.volume() - 4.0 * std::f64::consts::PI).abs() < 1e-12);
        assert!((m.scalar_curvature().values()[0] - 2.0).abs() < 1e-15);
        let spec = ManifoldSpec::axisym_sphere2(64).unwrap();
        let a = MetricState::background(spec, 0.0).unwrap();
        // curvature of the background axisym sphere is exactly 2 at every node
        for v in a.scalar_curvature().values() {
            assert!((v - 2.0).abs() < 1e-13);
        }
        // midpoint quadrature volume converges to 4 pi at second order
        assert!((a.volume() - 4.0 * std::f64::consts::PI).abs() < 1e-2);
    }

    #[test]
    fn unit_sphere_areas() {
        assert!((unit_sphere_area(2) - 4.0 * std::f64::consts::PI).abs() < 1e-12);
        let pi = std::f64::consts::PI;
        assert!((unit_sphere_area(3) - 2.0 * pi * pi).abs() < 1e-12);
    }

    #[test]
    fn gauss_bonnet_torus_is_exact() {
        let spec = ManifoldSpec::conformal_torus(24, 16).unwrap();
        let phi = seeded_field(spec, 3, 0.2);
        let m = MetricState::new(spec, 0.0, phi.into_values()).unwrap();
        let r = m.scalar_curvature();
        let total = m.integrate(&r);
        assert!(total.abs() < 1e-10, "torus Gauss-Bonnet: {total}");
    }

    #[test]
    fn gauss_bonnet_axisym_converges_to_8pi() {
        let target = 8.0 * std::f64::consts::PI;
        let mut errs = Vec::new();
        for n in [32usize, 64, 128] {
            let spec = ManifoldSpec::axisym_sphere2(n).unwrap();
            let phi = ScalarField::from_fn(spec, |t, _| 0.05 * (2.0 * t).cos());
            let m = MetricState::new(spec, 0.0, phi.into_values()).unwrap();
            let total = m.integrate(&m.scalar_curvature());
            errs.push((total - target).abs());
        }
        // quadrature defect is pi * h^2 / 3 at leading order, ~1.01e-2 at n=32
        assert!(errs[0] < 2e-2);
        // second-order quadrature: halving h divides the error by about 4
        assert!(errs[0] / errs[1] > 3.0, "ratios {errs:?}");
        assert!(errs[1] / errs[2] > 3.0, "ratios {errs:?}");
    }

    #[test]
    fn curvature_refinement_study_torus() {
        // phi = 0.1 cos x has R = 0.2 exp(-0.2 cos x) cos x exactly.
        let mut errs = Vec::new();
        for n in [16usize, 32, 64] {
            let spec = ManifoldSpec::conformal_torus(n, n).unwrap();
            let phi = ScalarField::from_fn(spec, |x, _| 0.1 * x.cos());
            let m = MetricState::new(spec, 0.0, phi.into_values()).unwrap();
            let r = m.scalar_curvature();
            let exact = ScalarField::from_fn(spec, |x, _| {
                0.2 * (-0.2 * x.cos()).exp() * x.cos()
            });
            let sup = r
                .values()
                .iter()
                .zip(exact.values())
                .map(|(a, b)| (a - b).abs())
                .fold(0.0f64, f64::max);
            errs.push(sup);
        }
        assert!(errs[0] / errs[1] >= 3.0, "{errs:?}");
        assert!(errs[1] / errs[2] >= 3.0, "{errs:?}");
    }

    #[test]
    fn integration_by_parts_is_exact() {
        for spec in [
            ManifoldSpec::conformal_torus(12, 10).unwrap(),
            ManifoldSpec::axisym_sphere2(40).unwrap(),
        ] {
            let phi = seeded_field(spec, 1, 0.15);
            let m = MetricState::new(spec, 0.0, phi.into_values()).unwrap();
            let u = seeded_field(spec, 5, 1.0);
            let w = seeded_field(spec, 9, 1.0);
            let lhs = m.integrate(&{
                let lu = m.laplace_beltrami(&u);
                let mut prod = lu.clone();
                for (p, wv) in prod.values_mut().iter_mut().zip(w.values()) {
                    *p *= wv;
                }
                prod
            });
            let rhs = -m.dirichlet_form(&u, &w);
            assert!(
                (lhs - rhs).abs() < 1e-10 * (1.0 + lhs.abs()),
                "{:?}: {lhs} vs {rhs}",
                spec.kind
            );
        }
    }

    #[test]
    fn dirichlet_form_is_symmetric_and_nonnegative() {
        let spec = ManifoldSpec::axisym_sphere2(32).unwrap();
        let phi = seeded_field(spec, 2, 0.1);
        let m = MetricState::new(spec, 0.0, phi.into_values()).unwrap();
        let u = seeded_field(spec, 11, 1.0);
        let w = seeded_field(spec, 13, 1.0);
        assert_eq!(m.dirichlet_form(&u, &w), m.dirichlet_form(&w, &u));
        assert!(m.dirichlet_form(&u, &u) >= 0.0);
    }

    #[test]
    fn pointwise_gradient_matches_dirichlet_form_at_quadrature_order() {
        let spec = ManifoldSpec::conformal_torus(48, 48).unwrap();
        let phi = ScalarField::from_fn(spec, |x, y| 0.1 * (x + 0.5 * y).cos());
        let m = MetricState::new(spec, 0.0, phi.into_values()).unwrap();
        let u = ScalarField::from_fn(spec, |x, y| (x).sin() + 0.3 * (y).cos());
        let pointwise = m.integrate(&m.grad_norm_sq(&u));
        let form = m.dirichlet_form(&u, &u);
        let h = spec.h_min().unwrap();
        assert!(
            (pointwise - form).abs() < 2.0 * h * h * form.abs(),
            "{pointwise} vs {form}"
        );
    }

    #[test]
    fn gradient_of_constant_vanishes() {
        let spec = ManifoldSpec::conformal_torus(8, 8).unwrap();
        let m = MetricState::background(spec, 0.0).unwrap();
        let c = ScalarField::constant(spec, 4.2);
        assert_eq!(m.grad_norm_sq(&c).max(), 0.0);
        assert_eq!(m.laplace_beltrami(&c).max(), 0.0);
    }

    #[test]
    fn integrate_is_linear() {
        let spec = ManifoldSpec::axisym_sphere2(24).unwrap();
        let phi = seeded_field(spec, 4, 0.2);
        let m = MetricState::new(spec, 0.0, phi.into_values()).unwrap();
        let u = seeded_field(spec, 21, 1.0);
        let w = seeded_field(spec, 22, 1.0);
        for (alpha, beta) in [(2.0, -1.5), (0.0, 3.0), (1e-3, 1e3)] {
            let mut comb = u.clone();
            for (c, wv) in comb.values_mut().iter_mut().zip(w.values()) {
                *c = alpha * *c + beta * wv;
            }
            let lhs = m.integrate(&comb);
            let rhs = alpha * m.integrate(&u) + beta * m.integrate(&w);
            assert!((lhs - rhs).abs() < 1e-9 * (1.0 + rhs.abs()));
        }
    }

    #[test]
    fn round_sphere_defect_closed_forms() {
        let m = MetricState::round(2, 1.0, 0.0).unwrap();
        let vol = m.volume();
        let u = ScalarField::constant(*m.spec(), (1.0 / vol).sqrt());
        // at c = 1/r^2 the round sphere is exactly the soliton
        let zero = m.soliton_defect(&u, 1.0).unwrap();
        assert!(zero.abs() < 1e-14);
        // at c = 1 + 2a with a = 0.5 the defect is n (1/r^2 - c)^2 = 8 a^2 = 2
        let d = m.soliton_defect(&u, 2.0).unwrap();
        assert!((d - 2.0).abs() < 1e-12, "{d}");
    }

    #[test]
    fn defect_nonnegative_and_rejects_nonpositive_fields() {
        let spec = ManifoldSpec::conformal_torus(10, 10).unwrap();
        let phi = seeded_field(spec, 6, 0.1);
        let m = MetricState::new(spec, 0.0, phi.into_values()).unwrap();
        let mut u = seeded_field(spec, 7, 0.3);
        for v in u.values_mut() {
            *v = (*v).exp();
        }
        let d = m.soliton_defect(&u, 0.7).unwrap();
        assert!(d >= 0.0);
        let bad = ScalarField::constant(spec, 0.0);
        assert!(matches!(m.soliton_defect(&bad, 0.7), Err(Error::NonPositiveField(_))));
    }

    #[test]
    fn hessian_of_constant_is_zero() {
        let spec = ManifoldSpec::axisym_sphere2(20).unwrap();
        let m = MetricState::background(spec, 0.0).unwrap();
        let c = ScalarField::constant(spec, 2.0);
        match m.hessian(&c) {
            SymTensorField::Axisym { tt, pp, .. } => {
                for j in 0..tt.len() {
                    assert_eq!(tt[j], 0.0);
                    assert_eq!(pp[j], 0.0);
                }
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn spec_json_shape() {
        let spec = ManifoldSpec::conformal_torus(16, 8).unwrap();
        let j = serde_json::to_value(&spec).unwrap();
        assert_eq!(j["kind"], "conformal_torus");
        assert_eq!(j["n"], 2);
        assert_eq!(j["resolution"]["nx"], 16);
        let back: ManifoldSpec = serde_json::from_value(j).unwrap();
        assert_eq!(back, spec);

        let rs = ManifoldSpec::round_sphere(3).unwrap();
        let j = serde_json::to_value(&rs).unwrap();
        assert_eq!(j["kind"], "round_sphere");
        assert_eq!(j["resolution"], serde_json::Value::Null);
        let back: ManifoldSpec = serde_json::from_value(j).unwrap();
        assert_eq!(back, rs);
    }
}
