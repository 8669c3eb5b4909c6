//! Radial grids, rotationally symmetric metrics `g = phi^2 dr^2 + psi^2 g_{S^{n-1}}`,
//! curvature, and weighted norms measuring distance to the hyperbolic metric
//! `g_h = dr^2 + sinh^2(r) g_{S^{n-1}}`.

mod curvature;
mod norms;

pub use norms::{tensor_norm_pointwise, weighted_norm, BoundaryWeight, WeightedNormParams};
#[cfg(test)]
pub(crate) use curvature::ricci_pointwise;

use crate::error::{Error, Result};
use crate::fd;
use std::sync::Arc;

pub type GridRef = Arc<RadialGrid>;

/// Uniform radial grid on `[0, r_max]` for an n-dimensional ball, n >= 3.
#[derive(Debug)]
pub struct RadialGrid {
    n_dim: usize,
    h: f64,
    nodes: Vec<f64>,
}

impl RadialGrid {
    pub fn new(n_dim: usize, r_max: f64, n_nodes: usize) -> Result<GridRef> {
        if n_dim < 3 {
            return Err(Error::Grid(format!("dimension must be >= 3, got {n_dim}")));
        }
        if n_nodes < 16 {
            return Err(Error::Grid(format!("need at least 16 nodes, got {n_nodes}")));
        }
        if !(r_max >= 5.0) {
            return Err(Error::Grid(format!("r_max must be >= 5, got {r_max}")));
        }
        let h = r_max / (n_nodes - 1) as f64;
        let nodes = (0..n_nodes).map(|i| i as f64 * h).collect();
        Ok(Arc::new(RadialGrid { n_dim, h, nodes }))
    }

    /// Grid with (approximately) the requested spacing.
    pub fn with_spacing(n_dim: usize, r_max: f64, h: f64) -> Result<GridRef> {
        let n_nodes = (r_max / h).round() as usize + 1;
        Self::new(n_dim, r_max, n_nodes)
    }

    pub fn n_dim(&self) -> usize {
        self.n_dim
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        self.h
    }

    pub fn r(&self, i: usize) -> f64 {
        self.nodes[i]
    }

    pub fn r_max(&self) -> f64 {
        *self.nodes.last().unwrap()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Interior node range `1..len-1`; curvature and norms are evaluated here.
    pub fn interior(&self) -> std::ops::Range<usize> {
        1..self.nodes.len() - 1
    }

    /// Structural compatibility (same dimension, spacing, node count).
    pub fn compatible(&self, other: &RadialGrid) -> bool {
        self.n_dim == other.n_dim && self.nodes.len() == other.nodes.len() && self.h == other.h
    }
}

/// Sampled warp functions of `g = phi^2 dr^2 + psi^2 g_{S^{n-1}}`.
///
/// Immutable after construction; `phi > 0` everywhere, `psi > 0` away from the
/// origin, `psi(0) = 0`, and the one-sided derivative of `psi` at the origin
/// matches `phi(0)` so the metric closes up smoothly across the axis.
#[derive(Debug, Clone)]
pub struct RotSymMetric {
    grid: GridRef,
    phi: Vec<f64>,
    psi: Vec<f64>,
}

/// Origin-smoothness validation tolerance, in units of `h^2`.
pub const ORIGIN_TOL_H2: f64 = 10.0;

impl RotSymMetric {
    pub fn new(grid: GridRef, phi: Vec<f64>, mut psi: Vec<f64>) -> Result<Self> {
        let n = grid.len();
        if phi.len() != n || psi.len() != n {
            return Err(Error::GridMismatch);
        }
        if psi[0].abs() > 1e-12 {
            return Err(Error::Metric {
                node: 0,
                reason: format!("psi(0) must vanish, got {}", psi[0]),
            });
        }
        psi[0] = 0.0;
        let m = RotSymMetric { grid, phi, psi };
        m.validate()?;
        Ok(m)
    }

    /// Revalidate the stored samples (used after each accepted flow step).
    pub fn validate(&self) -> Result<()> {
        let h = self.grid.spacing();
        for i in 0..self.grid.len() {
            if !self.phi[i].is_finite() || !self.psi[i].is_finite() {
                return Err(Error::Metric {
                    node: i,
                    reason: "non-finite sample".into(),
                });
            }
            if self.phi[i] <= 0.0 {
                return Err(Error::Metric {
                    node: i,
                    reason: format!("phi = {} is not positive", self.phi[i]),
                });
            }
            if i > 0 && self.psi[i] <= 0.0 {
                return Err(Error::Metric {
                    node: i,
                    reason: format!("psi = {} is not positive", self.psi[i]),
                });
            }
        }
        let dpsi0 = fd::derivative_at_origin(&self.psi, h);
        let defect = (dpsi0 - self.phi[0]).abs();
        if defect > ORIGIN_TOL_H2 * h * h {
            return Err(Error::Metric {
                node: 0,
                reason: format!(
                    "origin smoothness violated: psi'(0) = {dpsi0}, phi(0) = {} (defect {defect:.3e})",
                    self.phi[0]
                ),
            });
        }
        Ok(())
    }

    /// The hyperbolic metric `phi = 1`, `psi = sinh r`.
    pub fn hyperbolic(grid: &GridRef) -> Self {
        let phi = vec![1.0; grid.len()];
        let psi = grid.nodes().iter().map(|&r| r.sinh()).collect();
        RotSymMetric {
            grid: grid.clone(),
            phi,
            psi,
        }
    }

    /// Metric from a profile `w`: `phi = sqrt(1 + w^2)`, `psi = sinh r`.
    ///
    /// Also reports whether `w` looks even at the origin and whether it decays
    /// at least like `e^{-mu r}` over the last quarter of the grid.
    pub fn from_profile(grid: &GridRef, w: &[f64], mu: f64) -> Result<ProfiledMetric> {
        if w.len() != grid.len() {
            return Err(Error::GridMismatch);
        }
        if w[0].abs() > 1e-12 {
            return Err(Error::Profile(w[0]));
        }
        let h = grid.spacing();
        let phi: Vec<f64> = w.iter().map(|&wi| (1.0 + wi * wi).sqrt()).collect();
        let psi: Vec<f64> = grid.nodes().iter().map(|&r| r.sinh()).collect();
        let metric = RotSymMetric::new(grid.clone(), phi, psi)?;

        let dw0 = fd::derivative_at_origin(w, h);
        let even_at_origin = dw0.abs() <= 10.0 * h;

        // decay fit over the last quarter of the grid
        let n = grid.len();
        let start = n - n / 4;
        let pts: Vec<(f64, f64)> = (start..n)
            .filter(|&i| w[i].abs() > 1e-300)
            .map(|i| (grid.r(i), w[i].abs().ln()))
            .collect();
        let decay = if pts.len() < 3 {
            // profile is numerically zero out there; any rate is admissible
            DecayCheck {
                mu,
                fitted_rate: None,
                bound_constant: 0.0,
                satisfied: true,
            }
        } else {
            let (slope, _intercept) = least_squares_slope(&pts);
            let c = (start..n)
                .map(|i| w[i].abs() * (mu * grid.r(i)).exp())
                .fold(0.0, f64::max);
            DecayCheck {
                mu,
                fitted_rate: Some(-slope),
                bound_constant: c,
                satisfied: -slope >= mu - 1e-9,
            }
        };

        Ok(ProfiledMetric {
            metric,
            even_at_origin,
            decay,
        })
    }

    pub fn grid(&self) -> &GridRef {
        &self.grid
    }

    pub fn phi(&self) -> &[f64] {
        &self.phi
    }

    pub fn psi(&self) -> &[f64] {
        &self.psi
    }

    /// Sectional curvature of 2-planes tangent to the orbit spheres,
    /// `sec_T = 1/psi^2 - psi_r^2/(phi^2 psi^2)`.
    pub fn sec_tangential(&self) -> Vec<f64> {
        let d = curvature::MetricDerivs::compute(&self.grid, &self.phi, &self.psi);
        let mut out = vec![0.0; self.grid.len()];
        curvature::sec_tangential_into(&self.phi, &self.psi, &d.psi_r, &mut out);
        out
    }

    /// Sectional curvature of planes containing the radial direction.
    pub fn sec_radial(&self) -> Vec<f64> {
        let d = curvature::MetricDerivs::compute(&self.grid, &self.phi, &self.psi);
        let mut out = vec![0.0; self.grid.len()];
        curvature::sec_radial_into(&self.phi, &self.psi, &d.phi_r, &d.psi_r, &d.psi_rr, &mut out);
        out
    }

    /// Ricci components: `Ric_rr` and the scalar `Ric_sph` with angular block
    /// `Ric_sph * g_{S^{n-1}}`.
    pub fn ricci(&self) -> (Vec<f64>, Vec<f64>) {
        let d = curvature::MetricDerivs::compute(&self.grid, &self.phi, &self.psi);
        let n = self.grid.len();
        let (mut rr, mut sph) = (vec![0.0; n], vec![0.0; n]);
        curvature::ricci_into(
            self.grid.n_dim(),
            &self.phi,
            &self.psi,
            &d.phi_r,
            &d.psi_r,
            &d.psi_rr,
            &mut rr,
            &mut sph,
        );
        (rr, sph)
    }

    /// Pointwise frame norm of `Ric + (n-1) g`; zero for Einstein metrics.
    pub fn einstein_residual(&self) -> Vec<f64> {
        let nd = self.grid.n_dim() as f64;
        let (rr, sph) = self.ricci();
        let n = self.grid.len();
        let mut out = vec![0.0; n];
        for i in 1..n {
            let a = (rr[i] + (nd - 1.0) * self.phi[i] * self.phi[i]) / (self.phi[i] * self.phi[i]);
            let b = (sph[i] + (nd - 1.0) * self.psi[i] * self.psi[i]) / (self.psi[i] * self.psi[i]);
            out[i] = (a * a + (nd - 1.0) * b * b).sqrt();
        }
        out[0] = (4.0 * out[1] - out[2]) / 3.0;
        out
    }

    /// `self - other` as a symmetric 2-tensor perturbation.
    pub fn perturbation_from(&self, other: &RotSymMetric) -> Result<MetricPerturbation> {
        if !self.grid.compatible(&other.grid) {
            return Err(Error::GridMismatch);
        }
        let h_rr = (0..self.grid.len())
            .map(|i| self.phi[i] * self.phi[i] - other.phi[i] * other.phi[i])
            .collect();
        let h_sph = (0..self.grid.len())
            .map(|i| self.psi[i] * self.psi[i] - other.psi[i] * other.psi[i])
            .collect();
        Ok(MetricPerturbation {
            grid: self.grid.clone(),
            h_rr,
            h_sph,
        })
    }

    /// the metric with `delta * p` added to its coefficient tensor
    pub fn perturbed(&self, p: &MetricPerturbation, delta: f64) -> Result<RotSymMetric> {
        if !self.grid.compatible(&p.grid) {
            return Err(Error::GridMismatch);
        }
        let n = self.grid.len();
        let mut phi = Vec::with_capacity(n);
        let mut psi = Vec::with_capacity(n);
        for i in 0..n {
            let u = self.phi[i] * self.phi[i] + delta * p.h_rr[i];
            let v = self.psi[i] * self.psi[i] + delta * p.h_sph[i];
            if u <= 0.0 {
                return Err(Error::Metric {
                    node: i,
                    reason: "perturbation destroys positivity of phi^2".into(),
                });
            }
            if i > 0 && v <= 0.0 {
                return Err(Error::Metric {
                    node: i,
                    reason: "perturbation destroys positivity of psi^2".into(),
                });
            }
            phi.push(u.sqrt());
            psi.push(if i == 0 { 0.0 } else { v.sqrt() });
        }
        RotSymMetric::new(self.grid.clone(), phi, psi)
    }
}

/// Result of `RotSymMetric::from_profile`.
#[derive(Debug, Clone)]
pub struct ProfiledMetric {
    pub metric: RotSymMetric,
    /// `w'(0) = 0` within tolerance, as required for an even Taylor expansion.
    pub even_at_origin: bool,
    pub decay: DecayCheck,
}

#[derive(Debug, Clone)]
pub struct DecayCheck {
    pub mu: f64,
    /// fitted exponential rate of `|w|` over the last quarter of the grid
    pub fitted_rate: Option<f64>,
    /// smallest `C` with `|w| <= C e^{-mu r}` over the fit window
    pub bound_constant: f64,
    pub satisfied: bool,
}

/// Radial symmetric 2-tensor `h = h_rr dr^2 + h_sph g_{S^{n-1}}`.
#[derive(Debug, Clone)]
pub struct MetricPerturbation {
    grid: GridRef,
    h_rr: Vec<f64>,
    h_sph: Vec<f64>,
}

impl MetricPerturbation {
    pub fn new(grid: GridRef, h_rr: Vec<f64>, h_sph: Vec<f64>) -> Result<Self> {
        if h_rr.len() != grid.len() || h_sph.len() != grid.len() {
            return Err(Error::GridMismatch);
        }
        Ok(MetricPerturbation { grid, h_rr, h_sph })
    }

    pub fn zero(grid: &GridRef) -> Self {
        MetricPerturbation {
            grid: grid.clone(),
            h_rr: vec![0.0; grid.len()],
            h_sph: vec![0.0; grid.len()],
        }
    }

    pub fn grid(&self) -> &GridRef {
        &self.grid
    }

    pub fn h_rr(&self) -> &[f64] {
        &self.h_rr
    }

    pub fn h_sph(&self) -> &[f64] {
        &self.h_sph
    }

    pub fn scaled(&self, c: f64) -> Self {
        MetricPerturbation {
            grid: self.grid.clone(),
            h_rr: self.h_rr.iter().map(|x| c * x).collect(),
            h_sph: self.h_sph.iter().map(|x| c * x).collect(),
        }
    }

    pub(crate) fn from_parts(grid: GridRef, h_rr: Vec<f64>, h_sph: Vec<f64>) -> Self {
        MetricPerturbation { grid, h_rr, h_sph }
    }
}

/// Admissibility of an initial metric: positivity, origin smoothness, finite
/// weighted distance to `g_h`, and the sign of the tangential curvatures.
#[derive(Debug, Clone)]
pub struct AdmissibilityReport {
    pub positivity: bool,
    pub origin_smooth: bool,
    pub weighted_distance: f64,
    pub distance_finite: bool,
    pub min_sec_t: f64,
    /// strict negativity of sec_T at every node with r > 0
    pub sec_t_negative: bool,
}

impl AdmissibilityReport {
    /// All structural flags plus the curvature hypothesis.
    pub fn admissible(&self) -> bool {
        self.positivity && self.origin_smooth && self.distance_finite && self.sec_t_negative
    }
}

pub fn check_ah_admissible(g: &RotSymMetric, p: &WeightedNormParams) -> AdmissibilityReport {
    let grid = g.grid();
    let positivity = g
        .phi()
        .iter()
        .all(|&x| x > 0.0 && x.is_finite())
        && grid.interior().all(|i| g.psi()[i] > 0.0 && g.psi()[i].is_finite());

    let h = grid.spacing();
    let dpsi0 = fd::derivative_at_origin(g.psi(), h);
    let origin_smooth = (dpsi0 - g.phi()[0]).abs() <= ORIGIN_TOL_H2 * h * h;

    let gh = RotSymMetric::hyperbolic(grid);
    let weight = BoundaryWeight::sech(grid);
    let weighted_distance = g
        .perturbation_from(&gh)
        .and_then(|d| weighted_norm(&gh, &d, p, &weight))
        .unwrap_or(f64::INFINITY);

    let sec_t = g.sec_tangential();
    let min_sec_t = grid
        .interior()
        .map(|i| sec_t[i])
        .fold(f64::INFINITY, f64::min);

    AdmissibilityReport {
        positivity,
        origin_smooth,
        weighted_distance,
        distance_finite: weighted_distance.is_finite(),
        min_sec_t,
        sec_t_negative: min_sec_t < 0.0,
    }
}

/// Least-squares slope and intercept of `y` against `x`.
pub(crate) fn least_squares_slope(pts: &[(f64, f64)]) -> (f64, f64) {
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let denom = n * sxx - sx * sx;
    let slope = (n * sxy - sx * sy) / denom;
    (slope, (sy - slope * sx) / n)
}
