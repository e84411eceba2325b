//! Flat square torus background: side 2*pi, periodic grid, x fastest.
//!
//! Node index = iy * nx + ix (row-major). All stencils are centered and
//! second order. The five-point Laplacian is the flux form of the grid,
//! so summation against any field reproduces the edge-based Dirichlet
//! form exactly (summation by parts with no boundary terms).

pub(crate) struct TorusGrid {
    pub nx: usize,
    pub ny: usize,
    pub hx: f64,
    pub hy: f64,
}

impl TorusGrid {
    pub fn new(nx: usize, ny: usize) -> Self {
        let tau = 2.0 * std::f64::consts::PI;
        TorusGrid { nx, ny, hx: tau / nx as f64, hy: tau / ny as f64 }
    }

    pub fn n_nodes(&self) -> usize {
        self.nx * self.ny
    }

    #[inline]
    pub fn idx(&self, ix: usize, iy: usize) -> usize {
        iy * self.nx + ix
    }

    pub fn x(&self, ix: usize) -> f64 {
        ix as f64 * self.hx
    }

    pub fn y(&self, iy: usize) -> f64 {
        iy as f64 * self.hy
    }

    #[inline]
    fn xp(&self, ix: usize) -> usize {
        if ix + 1 == self.nx { 0 } else { ix + 1 }
    }

    #[inline]
    fn xm(&self, ix: usize) -> usize {
        if ix == 0 { self.nx - 1 } else { ix - 1 }
    }

    #[inline]
    fn yp(&self, iy: usize) -> usize {
        if iy + 1 == self.ny { 0 } else { iy + 1 }
    }

    #[inline]
    fn ym(&self, iy: usize) -> usize {
        if iy == 0 { self.ny - 1 } else { iy - 1 }
    }

    fn map_stencil(&self, v: &[f64], f: impl Fn(&Self, &[f64], usize, usize) -> f64) -> Vec<f64> {
        let mut out = vec![0.0; self.n_nodes()];
        for iy in 0..self.ny {
            for ix in 0..self.nx {
                out[self.idx(ix, iy)] = f(self, v, ix, iy);
            }
        }
        out
    }

    pub fn dx(&self, v: &[f64]) -> Vec<f64> {
        self.map_stencil(v, |g, v, ix, iy| {
            (v[g.idx(g.xp(ix), iy)] - v[g.idx(g.xm(ix), iy)]) / (2.0 * g.hx)
        })
    }

    pub fn dy(&self, v: &[f64]) -> Vec<f64> {
        self.map_stencil(v, |g, v, ix, iy| {
            (v[g.idx(ix, g.yp(iy))] - v[g.idx(ix, g.ym(iy))]) / (2.0 * g.hy)
        })
    }

    pub fn dxx(&self, v: &[f64]) -> Vec<f64> {
        self.map_stencil(v, |g, v, ix, iy| {
            let c = v[g.idx(ix, iy)];
            (v[g.idx(g.xp(ix), iy)] - 2.0 * c + v[g.idx(g.xm(ix), iy)]) / (g.hx * g.hx)
        })
    }

    pub fn dyy(&self, v: &[f64]) -> Vec<f64> {
        self.map_stencil(v, |g, v, ix, iy| {
            let c = v[g.idx(ix, iy)];
            (v[g.idx(ix, g.yp(iy))] - 2.0 * c + v[g.idx(ix, g.ym(iy))]) / (g.hy * g.hy)
        })
    }

    pub fn dxy(&self, v: &[f64]) -> Vec<f64> {
        self.map_stencil(v, |g, v, ix, iy| {
            (v[g.idx(g.xp(ix), g.yp(iy))] - v[g.idx(g.xp(ix), g.ym(iy))]
                - v[g.idx(g.xm(ix), g.yp(iy))]
                + v[g.idx(g.xm(ix), g.ym(iy))])
                / (4.0 * g.hx * g.hy)
        })
    }

    /// Five-point Laplacian of the flat background.
    pub fn laplace(&self, v: &[f64]) -> Vec<f64> {
        self.map_stencil(v, |g, v, ix, iy| {
            let c = v[g.idx(ix, iy)];
            (v[g.idx(g.xp(ix), iy)] - 2.0 * c + v[g.idx(g.xm(ix), iy)]) / (g.hx * g.hx)
                + (v[g.idx(ix, g.yp(iy))] - 2.0 * c + v[g.idx(ix, g.ym(iy))]) / (g.hy * g.hy)
        })
    }

    /// Edge-based Dirichlet form of the flat background:
    /// sum over grid edges of (difference of u)(difference of w) / h^2 * cell area.
    /// Exact adjoint of `laplace`: sum_i laplace(u)_i w_i area = -dirichlet(u, w).
    /// Flat stiffness action: (K u)_i with u' K w = dirichlet(u, w).
    /// K is symmetric positive semidefinite and annihilates constants.
    pub fn stiffness(&self, u: &[f64]) -> Vec<f64> {
        let area = self.hx * self.hy;
        let cx = area / (self.hx * self.hx);
        let cy = area / (self.hy * self.hy);
        self.map_stencil(u, |g, v, ix, iy| {
            let c = v[g.idx(ix, iy)];
            cx * (2.0 * c - v[g.idx(g.xp(ix), iy)] - v[g.idx(g.xm(ix), iy)])
                + cy * (2.0 * c - v[g.idx(ix, g.yp(iy))] - v[g.idx(ix, g.ym(iy))])
        })
    }

    /// Diagonal of the flat stiffness matrix.
    pub fn stiffness_diag(&self) -> Vec<f64> {
        let area = self.hx * self.hy;
        let d = 2.0 * area / (self.hx * self.hx) + 2.0 * area / (self.hy * self.hy);
        vec![d; self.n_nodes()]
    }

    pub fn dirichlet(&self, u: &[f64], w: &[f64]) -> f64 {
        let area = self.hx * self.hy;
        let mut acc = 0.0;
        for iy in 0..self.ny {
            for ix in 0..self.nx {
                let c = self.idx(ix, iy);
                let px = self.idx(self.xp(ix), iy);
                let py = self.idx(ix, self.yp(iy));
                acc += (u[px] - u[c]) * (w[px] - w[c]) / (self.hx * self.hx) * area;
                acc += (u[py] - u[c]) * (w[py] - w[c]) / (self.hy * self.hy) * area;
            }
        }
        acc
    }
}
