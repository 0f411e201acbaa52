//! Dense Green operator of a network.
//!
//! The energy form is `H(f) = ½ fᵀ A f` with `A[x][x] = λ_x` and
//! `A[x][y] = -C(x,y)`. Its inverse is the Green's function `G`, which is
//! also the covariance of the discrete Gaussian free field.

use nalgebra::{Cholesky, DMatrix, Dyn};

use crate::error::{Error, Result};
use crate::network::{modified_network, EdgeId, Network};

/// Smallest accepted Cholesky pivot, relative to the largest diagonal entry.
pub const PIVOT_TOLERANCE: f64 = 1e-12;

#[derive(Clone, Debug)]
pub struct GreenOperator {
    matrix_a: DMatrix<f64>,
    green: DMatrix<f64>,
    chol: DMatrix<f64>,
    log_det_g: f64,
}

pub fn energy_matrix(net: &Network) -> DMatrix<f64> {
    let n = net.vertex_count();
    let mut a = DMatrix::zeros(n, n);
    for x in 0..n {
        a[(x, x)] = net.total_rate(x);
    }
    for e in net.edges() {
        a[(e.u, e.v)] = -e.conductance;
        a[(e.v, e.u)] = -e.conductance;
    }
    a
}

fn checked_cholesky(m: DMatrix<f64>) -> Result<Cholesky<f64, Dyn>> {
    let max_diag = m.diagonal().iter().cloned().fold(0.0, f64::max);
    let threshold = PIVOT_TOLERANCE * max_diag;
    let chol = Cholesky::new(m).ok_or(Error::NotPositiveDefinite { pivot: f64::NAN, threshold })?;
    let pivot = chol.l_dirty().diagonal().iter().map(|d| d * d).fold(f64::INFINITY, f64::min);
    if !(pivot > threshold) {
        return Err(Error::NotPositiveDefinite { pivot, threshold });
    }
    Ok(chol)
}

fn log_det_from_cholesky(chol: &Cholesky<f64, Dyn>) -> f64 {
    2.0 * chol.l_dirty().diagonal().iter().map(|d| d.ln()).sum::<f64>()
}

/// `log det A` computed from its Cholesky factor.
pub fn log_det_energy(net: &Network) -> Result<f64> {
    Ok(log_det_from_cholesky(&checked_cholesky(energy_matrix(net))?))
}

impl GreenOperator {
    pub fn new(net: &Network) -> Result<Self> {
        let matrix_a = energy_matrix(net);
        let chol_a = checked_cholesky(matrix_a.clone())?;
        let log_det_g = -log_det_from_cholesky(&chol_a);
        let mut green = chol_a.inverse();
        // symmetrise away round-off so the second factorisation sees an exact
        // symmetric matrix
        let t = green.transpose();
        green += t;
        green *= 0.5;
        let chol = checked_cholesky(green.clone())?.unpack();
        Ok(Self { matrix_a, green, chol, log_det_g })
    }

    pub fn vertex_count(&self) -> usize {
        self.green.nrows()
    }

    pub fn matrix_a(&self) -> &DMatrix<f64> {
        &self.matrix_a
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.green
    }

    /// Lower-triangular `L` with `L Lᵀ = G`.
    pub fn chol(&self) -> &DMatrix<f64> {
        &self.chol
    }

    pub fn log_det_g(&self) -> f64 {
        self.log_det_g
    }

    pub fn green(&self, x: usize, y: usize) -> f64 {
        self.green[(x, y)]
    }

    fn check(&self, x: usize) -> Result<()> {
        if x < self.vertex_count() {
            Ok(())
        } else {
            Err(Error::VertexOutOfRange { vertex: x, count: self.vertex_count() })
        }
    }

    /// `g(x,y) = G(x,y) / sqrt(G(x,x) G(y,y))`.
    pub fn normalized(&self, x: usize, y: usize) -> Result<f64> {
        self.check(x)?;
        self.check(y)?;
        if x == y {
            return Ok(1.0);
        }
        let g = self.green[(x, y)] / (self.green[(x, x)] * self.green[(y, y)]).sqrt();
        Ok(g.clamp(-1.0, 1.0))
    }
}

pub fn compute_green(net: &Network) -> Result<GreenOperator> {
    GreenOperator::new(net)
}

pub fn normalized_green(gop: &GreenOperator, x: usize, y: usize) -> Result<f64> {
    gop.normalized(x, y)
}

/// `sqrt(det G⁽ᵉ⁾ / det G)`, the probability that no loop of the soup at
/// intensity ½ crosses any of `removed`.
pub fn sqrt_det_ratio(net: &Network, removed: &[EdgeId]) -> Result<f64> {
    let modified = modified_network(net, removed)?;
    let log_det_a = log_det_energy(net)?;
    let log_det_a_mod = log_det_energy(&modified)?;
    // log det G = -log det A
    Ok((0.5 * (log_det_a - log_det_a_mod)).exp())
}

/// A point on the cable of `edge`, at distance `r` from the edge's first
/// endpoint `u`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EdgePoint {
    pub edge: EdgeId,
    pub r: f64,
}

impl EdgePoint {
    pub fn new(edge: EdgeId, r: f64) -> Self {
        Self { edge, r }
    }
}

/// Green's function of the metric graph between two cable points.
///
/// Bilinear in the endpoint values, plus the Brownian-bridge term
/// `2 (r₁ ∧ r₂ - r₁ r₂ / ρ)` when both points lie on the same cable.
pub fn interpolated_green(
    gop: &GreenOperator,
    net: &Network,
    p1: EdgePoint,
    p2: EdgePoint,
) -> Result<f64> {
    let mut ends = [(0, 0, 0.0, 0.0); 2];
    for (slot, p) in ends.iter_mut().zip([p1, p2]) {
        if p.edge >= net.edge_count() {
            return Err(Error::InvalidParameter(format!("unknown edge id {}", p.edge)));
        }
        let e = net.edge(p.edge);
        let rho = e.length();
        if !(0.0..=rho).contains(&p.r) {
            return Err(Error::EdgePointOutOfRange { edge: p.edge, r: p.r, length: rho });
        }
        *slot = (e.u, e.v, p.r, rho);
    }
    let [(x1, y1, r1, rho1), (x2, y2, r2, rho2)] = ends;
    let g = |a: usize, b: usize| gop.green(a, b);
    let mut value = ((rho1 - r1) * (rho2 - r2) * g(x1, x2)
        + r1 * r2 * g(y1, y2)
        + r1 * (rho2 - r2) * g(y1, x2)
        + (rho1 - r1) * r2 * g(x1, y2))
        / (rho1 * rho2);
    if p1.edge == p2.edge {
        value += 2.0 * (r1.min(r2) - r1 * r2 / rho1);
    }
    Ok(value)
}
