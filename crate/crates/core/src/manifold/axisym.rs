//! Axisymmetric unit-sphere background: latitude theta in (0, pi).
//!
//! Cell-centered grid theta_j = (j + 1/2) h, h = pi / n, so nodes never
//! touch the poles. Smooth axisymmetric fields extend evenly across the
//! poles; ghost values are reflections (v_{-1} = v_0, v_n = v_{n-1}),
//! which enforces a vanishing theta-derivative there at second order.
//!
//! The background Laplacian (1/sin)(sin v')' is discretized in flux form
//! with edge coefficients sin(k h). The pole edges carry coefficient 0
//! exactly, so the weighted sum of the Laplacian telescopes to zero and
//! the operator is the exact adjoint of the edge Dirichlet form.

pub(crate) struct LatGrid {
    pub n: usize,
    pub h: f64,
}

impl LatGrid {
    pub fn new(n: usize) -> Self {
        LatGrid { n, h: std::f64::consts::PI / n as f64 }
    }

    pub fn theta(&self, j: usize) -> f64 {
        (j as f64 + 0.5) * self.h
    }

    /// sin at edge k between nodes k-1 and k; exactly zero at both poles.
    pub fn edge_sin(&self, k: usize) -> f64 {
        if k == 0 || k == self.n {
            0.0
        } else {
            (k as f64 * self.h).sin()
        }
    }

    #[inline]
    fn ghost_lo(&self, v: &[f64]) -> f64 {
        v[0]
    }

    #[inline]
    fn ghost_hi(&self, v: &[f64]) -> f64 {
        v[self.n - 1]
    }

    pub fn d1(&self, v: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; n];
        for j in 0..n {
            let lo = if j == 0 { self.ghost_lo(v) } else { v[j - 1] };
            let hi = if j + 1 == n { self.ghost_hi(v) } else { v[j + 1] };
            out[j] = (hi - lo) / (2.0 * self.h);
        }
        out
    }

    pub fn d2(&self, v: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; n];
        for j in 0..n {
            let lo = if j == 0 { self.ghost_lo(v) } else { v[j - 1] };
            let hi = if j + 1 == n { self.ghost_hi(v) } else { v[j + 1] };
            out[j] = (hi - 2.0 * v[j] + lo) / (self.h * self.h);
        }
        out
    }

    /// Flux-form background Laplacian: (1/sin theta_j) d/dtheta (sin theta v').
    pub fn laplace(&self, v: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut out = vec![0.0; n];
        for j in 0..n {
            let flux_lo = if j == 0 { 0.0 } else { self.edge_sin(j) * (v[j] - v[j - 1]) };
            let flux_hi = if j + 1 == n { 0.0 } else { self.edge_sin(j + 1) * (v[j + 1] - v[j]) };
            out[j] = (flux_hi - flux_lo) / (self.theta(j).sin() * self.h * self.h);
        }
        out
    }

    /// Background quadrature weights 2 pi sin(theta_j) h (midpoint rule).
    pub fn weights_flat(&self) -> Vec<f64> {
        (0..self.n)
            .map(|j| 2.0 * std::f64::consts::PI * self.theta(j).sin() * self.h)
            .collect()
    }

    /// Edge-based Dirichlet form 2 pi sum_k sin(k h) (du)(dw) / h.
    /// Exact adjoint of `laplace` under the `weights_flat` quadrature.
    /// Flat stiffness action: (K u)_j with u' K w = dirichlet(u, w).
    /// Pole edges carry coefficient exactly zero, so K annihilates
    /// constants and is symmetric positive semidefinite.
    pub fn stiffness(&self, u: &[f64]) -> Vec<f64> {
        let scale = 2.0 * std::f64::consts::PI / self.h;
        let mut out = vec![0.0; self.n];
        for j in 0..self.n {
            let lo = if j == 0 { 0.0 } else { self.edge_sin(j) * (u[j] - u[j - 1]) };
            let hi = if j + 1 == self.n { 0.0 } else { self.edge_sin(j + 1) * (u[j] - u[j + 1]) };
            out[j] = scale * (lo + hi);
        }
        out
    }

    /// Diagonal of the flat stiffness matrix.
    pub fn stiffness_diag(&self) -> Vec<f64> {
        let scale = 2.0 * std::f64::consts::PI / self.h;
        (0..self.n)
            .map(|j| scale * (self.edge_sin(j) + self.edge_sin(j + 1)))
            .collect()
    }

    pub fn dirichlet(&self, u: &[f64], w: &[f64]) -> f64 {
        let mut acc = 0.0;
        for k in 1..self.n {
            acc += self.edge_sin(k) * ((u[k] - u[k - 1]) * (w[k] - w[k - 1]));
        }
        2.0 * std::f64::consts::PI * acc / self.h
    }
}
