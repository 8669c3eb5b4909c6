//! Curvature of `g = phi^2 dr^2 + psi^2 g_{S^{n-1}}`.
//!
//! With arclength `ds = phi dr` and fiber radius `psi`, the two distinct
//! sectional curvatures of the warped product are
//!
//!   sec_T = (1 - (psi_r/phi)^2) / psi^2            (sphere-tangent planes)
//!   sec_R = -(psi_rr phi - psi_r phi_r) / (phi^3 psi)   (radial planes)
//!
//! and Ricci is the frame sum over these: `Ric_rr = (n-1) phi^2 sec_R`,
//! `Ric_sph = (sec_R + (n-2) sec_T) psi^2`. Everything is evaluated at
//! interior nodes; the origin entry is filled by even extrapolation since all
//! curvature scalars of a smooth radial metric are even in `r`.

use super::GridRef;
use crate::fd::{self, Parity};

/// First/second derivatives of the warp samples, with the parity the origin
/// imposes (`phi` even, `psi` odd).
pub(crate) struct MetricDerivs {
    pub phi_r: Vec<f64>,
    pub psi_r: Vec<f64>,
    pub psi_rr: Vec<f64>,
}

impl MetricDerivs {
    pub fn compute(grid: &GridRef, phi: &[f64], psi: &[f64]) -> MetricDerivs {
        let n = grid.len();
        let h = grid.spacing();
        let mut d = MetricDerivs {
            phi_r: vec![0.0; n],
            psi_r: vec![0.0; n],
            psi_rr: vec![0.0; n],
        };
        d.recompute(h, phi, psi);
        d
    }

    pub fn recompute(&mut self, h: f64, phi: &[f64], psi: &[f64]) {
        fd::derivative(phi, h, Parity::Even, &mut self.phi_r);
        fd::derivative(psi, h, Parity::Odd, &mut self.psi_r);
        fd::second_derivative(psi, h, Parity::Odd, &mut self.psi_rr);
    }
}

#[inline]
fn extrapolate_origin(out: &mut [f64]) {
    out[0] = (4.0 * out[1] - out[2]) / 3.0;
}

#[inline]
pub(crate) fn sec_tangential_pointwise(phi: f64, psi: f64, psi_r: f64) -> f64 {
    let q = psi_r / phi;
    (1.0 - q * q) / (psi * psi)
}

#[inline]
pub(crate) fn sec_radial_pointwise(phi: f64, phi_r: f64, psi: f64, psi_r: f64, psi_rr: f64) -> f64 {
    -(psi_rr * phi - psi_r * phi_r) / (phi * phi * phi * psi)
}

/// `(Ric_rr, Ric_sph)` from the warp samples and their radial derivatives.
#[inline]
pub(crate) fn ricci_pointwise(
    nd: f64,
    phi: f64,
    phi_r: f64,
    psi: f64,
    psi_r: f64,
    psi_rr: f64,
) -> (f64, f64) {
    let rr = -(nd - 1.0) * (psi_rr * phi - psi_r * phi_r) / (phi * psi);
    let q = psi_r / phi;
    let sph = -psi * psi_rr / (phi * phi) + psi * psi_r * phi_r / (phi * phi * phi)
        + (nd - 2.0) * (1.0 - q * q);
    (rr, sph)
}

pub(crate) fn sec_tangential_into(phi: &[f64], psi: &[f64], psi_r: &[f64], out: &mut [f64]) {
    for i in 1..phi.len() {
        out[i] = sec_tangential_pointwise(phi[i], psi[i], psi_r[i]);
    }
    extrapolate_origin(out);
}

pub(crate) fn sec_radial_into(
    phi: &[f64],
    psi: &[f64],
    phi_r: &[f64],
    psi_r: &[f64],
    psi_rr: &[f64],
    out: &mut [f64],
) {
    for i in 1..phi.len() {
        out[i] = sec_radial_pointwise(phi[i], phi_r[i], psi[i], psi_r[i], psi_rr[i]);
    }
    extrapolate_origin(out);
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn ricci_into(
    n_dim: usize,
    phi: &[f64],
    psi: &[f64],
    phi_r: &[f64],
    psi_r: &[f64],
    psi_rr: &[f64],
    out_rr: &mut [f64],
    out_sph: &mut [f64],
) {
    let nd = n_dim as f64;
    for i in 1..phi.len() {
        let (rr, sph) = ricci_pointwise(nd, phi[i], phi_r[i], psi[i], psi_r[i], psi_rr[i]);
        out_rr[i] = rr;
        out_sph[i] = sph;
    }
    extrapolate_origin(out_rr);
    // the angular block vanishes with psi^2 at the axis
    out_sph[0] = 0.0;
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{RadialGrid, RotSymMetric};

    fn max_abs_interior(v: &[f64]) -> f64 {
        v[1..v.len() - 1].iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }

    #[test]
    fn hyperbolic_curvatures_are_minus_one() {
        let grid = RadialGrid::new(3, 10.0, 501).unwrap();
        let h = grid.spacing();
        let g = RotSymMetric::hyperbolic(&grid);
        let sec_t = g.sec_tangential();
        let sec_r = g.sec_radial();
        for i in grid.interior() {
            assert!(
                (sec_t[i] + 1.0).abs() < 10.0 * h * h,
                "sec_T node {i}: {}",
                sec_t[i]
            );
            assert!(
                (sec_r[i] + 1.0).abs() < 10.0 * h * h,
                "sec_R node {i}: {}",
                sec_r[i]
            );
        }
    }

    #[test]
    fn flat_metric_is_flat() {
        // phi = 1, psi = r
        let grid = RadialGrid::new(3, 8.0, 161).unwrap();
        let phi = vec![1.0; grid.len()];
        let psi: Vec<f64> = grid.nodes().to_vec();
        let g = RotSymMetric::new(grid.clone(), phi, psi).unwrap();
        let h = grid.spacing();
        assert!(max_abs_interior(&g.sec_tangential()) < 10.0 * h * h);
        assert!(max_abs_interior(&g.sec_radial()) < 10.0 * h * h);
        let (rr, sph) = g.ricci();
        assert!(max_abs_interior(&rr) < 10.0 * h * h);
        assert!(max_abs_interior(&sph) < 10.0 * h * h);
    }

    #[test]
    fn round_sphere_patch_has_unit_tangential_curvature() {
        // phi = 1, psi = sin r on r < pi/2, via the raw kernels
        let n = 64;
        let h = 1.5 / (n - 1) as f64;
        let phi = vec![1.0; n];
        let psi: Vec<f64> = (0..n).map(|i| (i as f64 * h).sin()).collect();
        let mut psi_r = vec![0.0; n];
        fd::derivative(&psi, h, Parity::Odd, &mut psi_r);
        let mut out = vec![0.0; n];
        sec_tangential_into(&phi, &psi, &psi_r, &mut out);
        for i in 1..n - 1 {
            assert!((out[i] - 1.0).abs() < 10.0 * h * h, "node {i}: {}", out[i]);
        }
    }

    #[test]
    fn hyperbolic_is_einstein() {
        let grid = RadialGrid::new(3, 10.0, 401).unwrap();
        let h = grid.spacing();
        let g = RotSymMetric::hyperbolic(&grid);
        let (rr, sph) = g.ricci();
        for i in grid.interior() {
            // Rc(g_h) = -(n-1) g_h, so Ric_rr = -2, Ric_sph = -2 sinh^2 r at n = 3
            assert!((rr[i] + 2.0).abs() < 10.0 * h * h);
            let want = -2.0 * grid.r(i).sinh().powi(2);
            let scale = 1.0 + want.abs();
            assert!((sph[i] - want).abs() < 10.0 * h * h * scale);
        }
        let res = g.einstein_residual();
        assert!(max_abs_interior(&res) < 10.0 * h * h);
    }

    #[test]
    fn ricci_matches_sectional_identities() {
        let grid = RadialGrid::new(4, 8.0, 321).unwrap();
        let h = grid.spacing();
        let nd = 4.0;
        let w: Vec<f64> = grid
            .nodes()
            .iter()
            .map(|&r| r * r * (-r * r).exp())
            .collect();
        let g = RotSymMetric::from_profile(&grid, &w, 1.0).unwrap().metric;
        let (rr, sph) = g.ricci();
        let sec_t = g.sec_tangential();
        let sec_r = g.sec_radial();
        for i in grid.interior() {
            let rr_id = (nd - 1.0) * g.phi()[i] * g.phi()[i] * sec_r[i];
            let sph_id = (sec_r[i] + (nd - 2.0) * sec_t[i]) * g.psi()[i] * g.psi()[i];
            let scale = 1.0 + rr_id.abs().max(sph_id.abs());
            assert!((rr[i] - rr_id).abs() < 10.0 * h * h * scale);
            assert!((sph[i] - sph_id).abs() < 10.0 * h * h * scale);
        }
    }

    #[test]
    fn formulas_match_coordinate_oracle() {
        // the reduced formulas evaluated with near-exact derivatives of the
        // analytic profile must agree with the full coordinate computation
        let w = |r: f64| r * r * (-r * r).exp();
        let phi = |r: f64| (1.0 + w(r) * w(r)).sqrt();
        let psi = |r: f64| r.sinh();
        let d = 1e-5;
        let d2 = 1e-4; // second differences are rounding-dominated at 1e-5
        for (n, r) in [(3usize, 2.0f64), (3, 1.3), (4, 2.0)] {
            let nd = n as f64;
            let phi_r = (phi(r + d) - phi(r - d)) / (2.0 * d);
            let psi_r = (psi(r + d) - psi(r - d)) / (2.0 * d);
            let psi_rr = (psi(r + d2) - 2.0 * psi(r) + psi(r - d2)) / (d2 * d2);
            let (rr, sph) = ricci_pointwise(nd, phi(r), phi_r, psi(r), psi_r, psi_rr);
            let (rr_o, sph_o) = crate::oracle::ricci_oracle(n, &phi, &psi, r);
            assert!(
                (rr - rr_o).abs() < 1e-5 * rr_o.abs(),
                "n={n} r={r}: Ric_rr {rr} vs oracle {rr_o}"
            );
            assert!(
                (sph - sph_o).abs() < 1e-5 * (1.0 + sph_o.abs()),
                "n={n} r={r}: Ric_sph {sph} vs oracle {sph_o}"
            );
            // sec_R against the independent route through the Ricci oracle
            let sec_r = sec_radial_pointwise(phi(r), phi_r, psi(r), psi_r, psi_rr);
            let sec_r_o = rr_o / ((nd - 1.0) * phi(r) * phi(r));
            assert!(
                (sec_r - sec_r_o).abs() < 1e-6 * (1.0 + sec_r_o.abs()),
                "n={n} r={r}: sec_R {sec_r} vs oracle {sec_r_o}"
            );
        }
    }

    #[test]
    fn curvature_error_shrinks_at_second_order() {
        // einstein residual of g_h is pure discretization error
        let coarse = RadialGrid::new(3, 8.0, 201).unwrap();
        let fine = RadialGrid::new(3, 8.0, 401).unwrap();
        let e1 = max_abs_interior(&RotSymMetric::hyperbolic(&coarse).einstein_residual());
        let e2 = max_abs_interior(&RotSymMetric::hyperbolic(&fine).einstein_residual());
        let ratio = e1 / e2;
        assert!(ratio > 3.0 && ratio < 5.5, "expected ~4x, got {ratio}");
    }
}
