//! Discrete weighted norms on radial symmetric 2-tensors.
//!
//! The continuous space weights Hoelder norms by a power of a boundary
//! defining function rho. On the grid we use the surrogate
//!
//!   |h|_{k,mu} = max over interior nodes, j <= k of rho^{-mu} |D^j h|_g
//!
//! where |.|_g is the orthonormal-frame norm with respect to the base metric
//! and D^j are centered differences of the frame components. The Hoelder
//! seminorm itself is not resolvable on a fixed grid and is dropped.

use super::{GridRef, MetricPerturbation, RotSymMetric};
use crate::error::{Error, Result};

/// `(mu, k)` defining the discrete weighted C^k_mu norm, `0 < mu < n-1`.
#[derive(Debug, Clone, Copy)]
pub struct WeightedNormParams {
    mu: f64,
    k: usize,
}

impl WeightedNormParams {
    pub fn new(mu: f64, k: usize, n_dim: usize) -> Result<Self> {
        if !(mu > 0.0 && mu < (n_dim - 1) as f64) {
            return Err(Error::Invalid(format!(
                "mu = {mu} outside the admissible range (0, {})",
                n_dim - 1
            )));
        }
        if k > 2 {
            return Err(Error::Invalid(format!("derivative order k = {k} > 2")));
        }
        Ok(WeightedNormParams { mu, k })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn with_k(&self, k: usize) -> Self {
        WeightedNormParams { mu: self.mu, k }
    }
}

/// Sampled boundary defining function `rho(r) = sech r`.
///
/// Matches the `rho ~ 2 e^{-r}` asymptotics of the geodesic compactification
/// and is smooth and equal to 1 at the origin.
#[derive(Debug, Clone)]
pub struct BoundaryWeight {
    grid: GridRef,
    rho: Vec<f64>,
}

impl BoundaryWeight {
    pub fn sech(grid: &GridRef) -> Self {
        let rho = grid.nodes().iter().map(|&r| 1.0 / r.cosh()).collect();
        BoundaryWeight {
            grid: grid.clone(),
            rho,
        }
    }

    pub fn rho(&self) -> &[f64] {
        &self.rho
    }

    pub fn grid(&self) -> &GridRef {
        &self.grid
    }
}

/// Orthonormal-frame components `(h_rr/phi^2, h_sph/psi^2)` of a radial
/// 2-tensor with respect to `base`. The angular component at the axis is
/// filled by even extrapolation.
fn frame_components(base: &RotSymMetric, h: &MetricPerturbation) -> (Vec<f64>, Vec<f64>) {
    let n = base.grid().len();
    let mut a = vec![0.0; n];
    let mut b = vec![0.0; n];
    for i in 0..n {
        a[i] = h.h_rr()[i] / (base.phi()[i] * base.phi()[i]);
    }
    for i in 1..n {
        b[i] = h.h_sph()[i] / (base.psi()[i] * base.psi()[i]);
    }
    b[0] = (4.0 * b[1] - b[2]) / 3.0;
    (a, b)
}

/// Pointwise frame norm `|h|_g = sqrt((h_rr/phi^2)^2 + (n-1)(h_sph/psi^2)^2)`.
pub fn tensor_norm_pointwise(base: &RotSymMetric, h: &MetricPerturbation) -> Result<Vec<f64>> {
    if !base.grid().compatible(h.grid()) {
        return Err(Error::GridMismatch);
    }
    let nd = base.grid().n_dim() as f64;
    let (a, b) = frame_components(base, h);
    Ok((0..a.len())
        .map(|i| (a[i] * a[i] + (nd - 1.0) * b[i] * b[i]).sqrt())
        .collect())
}

/// Discrete weighted `C^k_mu` norm of a perturbation.
pub fn weighted_norm(
    base: &RotSymMetric,
    h: &MetricPerturbation,
    p: &WeightedNormParams,
    w: &BoundaryWeight,
) -> Result<f64> {
    if !base.grid().compatible(h.grid()) || !base.grid().compatible(w.grid()) {
        return Err(Error::GridMismatch);
    }
    let grid = base.grid();
    let nd = grid.n_dim() as f64;
    let dr = grid.spacing();
    let (a, b) = frame_components(base, h);

    let mut norm = 0.0f64;
    for i in grid.interior() {
        let weight = w.rho()[i].powf(-p.mu());
        let v0 = (a[i] * a[i] + (nd - 1.0) * b[i] * b[i]).sqrt();
        norm = norm.max(weight * v0);
        if p.k() >= 1 {
            let da = (a[i + 1] - a[i - 1]) / (2.0 * dr);
            let db = (b[i + 1] - b[i - 1]) / (2.0 * dr);
            let v1 = (da * da + (nd - 1.0) * db * db).sqrt();
            norm = norm.max(weight * v1);
        }
        if p.k() >= 2 {
            let da = (a[i + 1] - 2.0 * a[i] + a[i - 1]) / (dr * dr);
            let db = (b[i + 1] - 2.0 * b[i] + b[i - 1]) / (dr * dr);
            let v2 = (da * da + (nd - 1.0) * db * db).sqrt();
            norm = norm.max(weight * v2);
        }
    }
    Ok(norm)
}
