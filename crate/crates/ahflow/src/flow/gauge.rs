//! Gauge recovery: integrating the diffeomorphisms generated by the DeTurck
//! field, pulling gauged solutions back to ungauged ones, and the
//! interval-chaining construction that re-chooses the reference metric on
//! each subinterval.

use super::{run_flow, DiagCtx, DiagnosticRow, FlowConfig, FlowTrajectory, TerminationStatus};
use crate::error::{Error, Result};
use crate::fd::{self, Parity};
use crate::geometry::{GridRef, RotSymMetric};
use crate::interp::{CubicSpline, MonotoneCubic};

/// Sampled radial diffeomorphism surrogate `Phi` with `Phi(0) = 0`,
/// strictly increasing in `r`, carrying its derivative samples.
///
/// The derivative is propagated rather than differenced wherever possible:
/// differencing recovered samples injects interpolation roughness that the
/// next chained segment amplifies through its reference coupling.
#[derive(Debug, Clone)]
pub struct GaugeMap {
    grid: GridRef,
    map: Vec<f64>,
    dmap: Vec<f64>,
}

impl GaugeMap {
    pub fn identity(grid: &GridRef) -> GaugeMap {
        GaugeMap {
            grid: grid.clone(),
            map: grid.nodes().to_vec(),
            dmap: vec![1.0; grid.len()],
        }
    }

    /// Map plus derivative samples (the preferred constructor).
    pub fn from_parts(grid: &GridRef, mut map: Vec<f64>, dmap: Vec<f64>) -> Result<GaugeMap> {
        if map.len() != grid.len() || dmap.len() != grid.len() {
            return Err(Error::GridMismatch);
        }
        if map[0].abs() > 1e-9 {
            return Err(Error::NonMonotoneMap);
        }
        map[0] = 0.0;
        for i in 0..map.len() - 1 {
            if !(map[i + 1] > map[i]) {
                return Err(Error::NonMonotoneMap);
            }
        }
        if dmap.iter().any(|&d| !(d > 0.0)) {
            return Err(Error::NonMonotoneMap);
        }
        Ok(GaugeMap {
            grid: grid.clone(),
            map,
            dmap,
        })
    }

    /// Map samples alone; the derivative falls back to stencils.
    pub fn from_samples(grid: &GridRef, map: Vec<f64>) -> Result<GaugeMap> {
        let mut dmap = vec![0.0; map.len()];
        fd::derivative(&map, grid.spacing(), Parity::Odd, &mut dmap);
        GaugeMap::from_parts(grid, map, dmap)
    }

    pub fn grid(&self) -> &GridRef {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.map
    }

    pub fn derivative_values(&self) -> &[f64] {
        &self.dmap
    }

    pub fn eval(&self, r: f64) -> f64 {
        self.interpolant().eval(r)
    }

    pub fn eval_derivative(&self, r: f64) -> f64 {
        crate::interp::even_extension(self.grid.spacing(), &self.dmap, 3).eval(r)
    }

    fn interpolant(&self) -> MonotoneCubic {
        crate::interp::odd_extension(self.grid.spacing(), &self.map, 3)
    }

    pub fn sup_distance_to_identity(&self) -> f64 {
        self.map
            .iter()
            .zip(self.grid.nodes())
            .fold(0.0f64, |m, (&y, &r)| m.max((y - r).abs()))
    }

    /// Sampled inverse map, solved node-by-node by bisection on the monotone
    /// interpolant; the inverse derivative is `1/Phi'(Phi^{-1}(r))`, not a
    /// difference of the inverse samples.
    pub fn invert(&self) -> Result<GaugeMap> {
        let interp = self.interpolant();
        let r_max = self.grid.r_max();
        let mut out = Vec::with_capacity(self.grid.len());
        let mut dout = Vec::with_capacity(self.grid.len());
        for &target in self.grid.nodes() {
            if target == 0.0 {
                out.push(0.0);
                dout.push(1.0 / self.dmap[0]);
                continue;
            }
            let mut lo = 0.0;
            let mut hi = r_max;
            // widen if the map undershoots the target at the outer end
            let mut guard = 0;
            while interp.eval(hi) < target {
                hi += (target - interp.eval(hi)).max(self.grid.spacing());
                guard += 1;
                if guard > 100 {
                    return Err(Error::NonMonotoneMap);
                }
            }
            for _ in 0..80 {
                let mid = 0.5 * (lo + hi);
                if interp.eval(mid) < target {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            let x = 0.5 * (lo + hi);
            out.push(x);
            let slope = self.eval_derivative(x.min(r_max));
            if !(slope > 0.0) {
                return Err(Error::NonMonotoneMap);
            }
            dout.push(1.0 / slope);
        }
        GaugeMap::from_parts(&self.grid, out, dout)
    }

    /// `self` after `inner`: `r -> self(inner(r))`, with the chain-rule
    /// derivative.
    pub fn compose(&self, inner: &GaugeMap) -> Result<GaugeMap> {
        if !self.grid.compatible(&inner.grid) {
            return Err(Error::GridMismatch);
        }
        let interp = self.interpolant();
        let out: Vec<f64> = inner.map.iter().map(|&x| interp.eval(x)).collect();
        let dout: Vec<f64> = inner
            .map
            .iter()
            .zip(&inner.dmap)
            .map(|(&x, &dx)| self.eval_derivative(x) * dx)
            .collect();
        GaugeMap::from_parts(&self.grid, out, dout)
    }
}

/// Time-indexed gauge maps recovered from a DeTurck field history.
#[derive(Debug, Clone)]
pub struct GaugePath {
    pub times: Vec<f64>,
    pub maps: Vec<GaugeMap>,
}

impl GaugePath {
    pub fn final_map(&self) -> &GaugeMap {
        self.maps.last().expect("non-empty gauge path")
    }
}

/// Integrate `d/dt Phi_t = -W(Phi_t, t)`, `Phi_0 = id`, along the recorded
/// field history, together with the tangent `d/dt Phi' = -W_r(Phi_t) Phi'`.
/// One map per recorded time; monotonicity is enforced and a violation
/// surfaces as a gauge failure.
pub fn integrate_gauge(times: &[f64], fields: &[Vec<f64>], grid: &GridRef) -> Result<GaugePath> {
    if times.len() != fields.len() || times.is_empty() {
        return Err(Error::Invalid("empty or misaligned field history".into()));
    }
    let h = grid.spacing();
    // Node-scale roughness in the recorded fields would pass through the
    // tangent equation into the recovered metric and feed the next chained
    // segment; smooth it away first (an O(h^2) change of the recovered gauge
    // representative).
    let smoothed: Vec<Vec<f64>> = fields
        .iter()
        .map(|f| {
            let mut s = f.clone();
            for _ in 0..4 {
                super::binomial_smooth(&mut s, Parity::Odd);
            }
            s
        })
        .collect();
    let w_interps: Vec<CubicSpline> = smoothed
        .iter()
        .map(|f| CubicSpline::odd_radial(h, f, 3))
        .collect();
    let wr_interps: Vec<CubicSpline> = smoothed
        .iter()
        .map(|f| {
            let mut wr = vec![0.0; f.len()];
            fd::derivative(f, h, Parity::Odd, &mut wr);
            CubicSpline::even_radial(h, &wr, 3)
        })
        .collect();

    let mut x: Vec<f64> = grid.nodes().to_vec();
    let mut j: Vec<f64> = vec![1.0; grid.len()];
    let mut maps = vec![GaugeMap::identity(grid)];

    for k in 0..times.len() - 1 {
        let dt_rec = times[k + 1] - times[k];
        // linear interpolation of the fields in time between records
        let w = |q: f64, theta: f64| -> f64 {
            (1.0 - theta) * w_interps[k].eval(q) + theta * w_interps[k + 1].eval(q)
        };
        let wr = |q: f64, theta: f64| -> f64 {
            (1.0 - theta) * wr_interps[k].eval(q) + theta * wr_interps[k + 1].eval(q)
        };
        let n_sub = (dt_rec / 0.05).ceil().max(1.0) as usize;
        let dt = dt_rec / n_sub as f64;
        for s in 0..n_sub {
            let th0 = s as f64 / n_sub as f64;
            let th_half = (s as f64 + 0.5) / n_sub as f64;
            let th1 = (s + 1) as f64 / n_sub as f64;
            for (xi, ji) in x.iter_mut().zip(j.iter_mut()) {
                let k1 = -w(*xi, th0);
                let l1 = -wr(*xi, th0) * *ji;
                let k2 = -w(*xi + 0.5 * dt * k1, th_half);
                let l2 = -wr(*xi + 0.5 * dt * k1, th_half) * (*ji + 0.5 * dt * l1);
                let k3 = -w(*xi + 0.5 * dt * k2, th_half);
                let l3 = -wr(*xi + 0.5 * dt * k2, th_half) * (*ji + 0.5 * dt * l2);
                let k4 = -w(*xi + dt * k3, th1);
                let l4 = -wr(*xi + dt * k3, th1) * (*ji + dt * l3);
                *xi += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
                *ji += dt / 6.0 * (l1 + 2.0 * l2 + 2.0 * l3 + l4);
            }
            x[0] = 0.0; // the origin is fixed: W(0) = 0 by symmetry
        }
        let map = GaugeMap::from_parts(grid, x.clone(), j.clone())
            .map_err(|_| Error::GaugeFailure { t: times[k + 1] })?;
        maps.push(map);
    }

    Ok(GaugePath {
        times: times.to_vec(),
        maps,
    })
}

/// Pullback of a rotationally symmetric metric by a radial map:
/// `phi_new(r) = phi(Phi(r)) Phi'(r)`, `psi_new(r) = psi(Phi(r))`.
///
/// The even fields `phi^2` and `(psi/r)^2` are the interpolated quantities,
/// which keeps the result smooth across the axis. Queries past the outer
/// boundary use the hyperbolic extension the Dirichlet pinning imposes there.
pub fn pullback(g: &RotSymMetric, map: &GaugeMap) -> Result<RotSymMetric> {
    if !g.grid().compatible(map.grid()) {
        return Err(Error::GridMismatch);
    }
    let grid = g.grid();
    let n = grid.len();
    let r_max = grid.r_max();
    let h = grid.spacing();

    let u: Vec<f64> = g.phi().iter().map(|p| p * p).collect();
    let mut q = vec![0.0; n];
    for i in 1..n {
        let ratio = g.psi()[i] / grid.r(i);
        q[i] = ratio * ratio;
    }
    q[0] = (4.0 * q[1] - q[2]) / 3.0;
    let u_interp = CubicSpline::even_radial(h, &u, 3);
    let q_interp = CubicSpline::even_radial(h, &q, 3);

    let mut phi = Vec::with_capacity(n);
    let mut q_new = Vec::with_capacity(n);
    for i in 0..n {
        let x = map.values()[i];
        let d = map.derivative_values()[i];
        if !(d > 0.0) {
            return Err(Error::NonMonotoneMap);
        }
        let (u_val, q_val) = if x > r_max {
            (1.0, (x.sinh() / x) * (x.sinh() / x))
        } else {
            (u_interp.eval(x), q_interp.eval(x))
        };
        if !(u_val > 0.0 && q_val > 0.0) {
            return Err(Error::Metric {
                node: i,
                reason: "pullback produced a non-positive warp sample".into(),
            });
        }
        phi.push(u_val.sqrt() * d);
        // pulled-back angular coefficient (psi/r)^2 = (x/r)^2 q(x)
        let ratio = if i == 0 { d } else { x / grid.r(i) };
        q_new.push(ratio * ratio * q_val);
    }

    // Interpolation and tangent errors introduce an extra mismatch between
    // the radial and angular warps at the axis, on top of whatever mismatch
    // the input metric already carried (which transports with the square of
    // the map derivative there). A metric has to close up smoothly across
    // the axis, so project the introduced part out; the inherited part is
    // the input's own business. The identity map passes through exactly.
    let qg: Vec<f64> = (1..3)
        .map(|i| {
            let ratio = g.psi()[i] / grid.r(i);
            ratio * ratio
        })
        .collect();
    let m_in = g.phi()[0] * g.phi()[0] - (4.0 * qg[0] - qg[1]) / 3.0;
    let d0 = map.derivative_values()[0];
    let u0 = phi[0] * phi[0];
    let q0 = (4.0 * q_new[1] - q_new[2]) / 3.0;
    let mismatch = u0 - q0 - d0 * d0 * m_in;
    let mut psi = Vec::with_capacity(n);
    for i in 0..n {
        let r = grid.r(i);
        let q_fixed = q_new[i] + mismatch * (-r * r).exp();
        if !(q_fixed > 0.0) {
            return Err(Error::Metric {
                node: i,
                reason: "pullback produced a non-positive warp sample".into(),
            });
        }
        psi.push(if i == 0 { 0.0 } else { r * q_fixed.sqrt() });
    }
    RotSymMetric::new(grid.clone(), phi, psi)
}

/// Result of a chained run: the recovered ungauged trajectory plus the net
/// accumulated gauge transformation.
#[derive(Debug, Clone)]
pub struct ChainedRun {
    pub trajectory: FlowTrajectory,
    pub net_gauge: GaugeMap,
}

/// Gauged flow on each subinterval of `partition` with the reference metric
/// re-chosen as the recovered ungauged solution at the subinterval start,
/// emitting a single ungauged trajectory on `[0, tau]`.
pub fn chained_rdtf(
    g0: &RotSymMetric,
    partition: &[f64],
    cfg: &FlowConfig,
    t1_max_segment: f64,
) -> Result<ChainedRun> {
    if partition.len() < 2 || partition[0] != 0.0 {
        return Err(Error::Invalid(
            "partition must start at 0 and contain at least two times".into(),
        ));
    }
    for w in partition.windows(2) {
        let len = w[1] - w[0];
        if !(len > 0.0) {
            return Err(Error::Invalid("partition must be strictly increasing".into()));
        }
        if len > t1_max_segment * (1.0 + 1e-12) {
            return Err(Error::Invalid(format!(
                "segment length {len} exceeds the existence-time surrogate {t1_max_segment}"
            )));
        }
    }

    let grid = g0.grid().clone();
    let diag = DiagCtx::new(&grid, cfg.diag_mu)?;
    let mut current = g0.clone();
    let mut net_gauge = GaugeMap::identity(&grid);

    let mut times: Vec<f64> = Vec::new();
    let mut diagnostics: Vec<DiagnosticRow> = Vec::new();
    let mut snapshots: Vec<(f64, RotSymMetric)> = Vec::new();
    let mut status = TerminationStatus::Completed;
    let mut record_idx = 0usize;

    'segments: for w in partition.windows(2) {
        let (t_a, t_b) = (w[0], w[1]);
        let seg_cfg = FlowConfig {
            reference: Some(current.clone()),
            t_end: t_b - t_a,
            track_gauge: true,
            snapshot_every: 1,
            ..cfg.clone()
        };
        let seg = run_flow(&current, &seg_cfg)?;
        let (w_times, w_fields) = seg.w_history.as_ref().expect("gauge tracking enabled");
        let gauge = match integrate_gauge(w_times, w_fields, &grid) {
            Ok(g) => g,
            Err(Error::GaugeFailure { t }) => {
                status = TerminationStatus::GaugeFailure { t: t_a + t };
                break 'segments;
            }
            Err(e) => return Err(e),
        };

        // pull each recorded gauged snapshot back to the ungauged solution
        for (k, (s, gauged)) in seg.snapshots.iter().enumerate() {
            if *s == 0.0 && !times.is_empty() {
                continue; // segment start duplicates the previous segment end
            }
            let t_abs = t_a + s;
            let ungauged = match pullback(gauged, &gauge.maps[k]) {
                Ok(g) => g,
                Err(Error::NonMonotoneMap) | Err(Error::GaugeFailure { .. }) => {
                    status = TerminationStatus::GaugeFailure { t: t_abs };
                    break 'segments;
                }
                Err(Error::Metric { node, .. }) => {
                    status = TerminationStatus::Degenerated { node, t: t_abs };
                    break 'segments;
                }
                Err(e) => return Err(e),
            };
            let mut row = diag.row(t_abs, &ungauged, &[])?;
            row.w_inf = seg.diagnostics[k].w_inf;
            times.push(t_abs);
            diagnostics.push(row);
            let keep = snapshots.is_empty()
                || (cfg.snapshot_every > 0 && record_idx % cfg.snapshot_every == 0);
            if keep {
                snapshots.push((t_abs, ungauged.clone()));
            }
            record_idx += 1;
            if k + 1 == seg.snapshots.len() {
                // segment end: advance the chain state and the net gauge
                net_gauge = net_gauge.compose(&gauge.maps[k])?;
                if snapshots.last().map(|(ts, _)| *ts != t_abs).unwrap_or(true) {
                    snapshots.push((t_abs, ungauged.clone()));
                }
                current = ungauged;
            }
        }

        if !seg.status.is_completed() {
            status = match seg.status {
                TerminationStatus::Degenerated { node, t } => {
                    TerminationStatus::Degenerated { node, t: t_a + t }
                }
                TerminationStatus::BlowUp { t } => TerminationStatus::BlowUp { t: t_a + t },
                other => other,
            };
            break 'segments;
        }
    }

    if times.is_empty() {
        // nothing recovered at all; report the initial state with the status
        times.push(0.0);
        diagnostics.push(diag.row(0.0, g0, &[])?);
        snapshots.push((0.0, g0.clone()));
    }

    Ok(ChainedRun {
        trajectory: FlowTrajectory {
            times,
            diagnostics,
            status,
            snapshots,
            w_history: None,
        },
        net_gauge,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flow::{run_flow, FlowConfig};
    use crate::geometry::{weighted_norm, BoundaryWeight, RadialGrid, WeightedNormParams};

    fn grid(n_nodes: usize) -> GridRef {
        RadialGrid::new(3, 8.0, n_nodes).unwrap()
    }

    fn profile_metric(grid: &GridRef) -> RotSymMetric {
        let w: Vec<f64> = grid
            .nodes()
            .iter()
            .map(|&r| r * r * (-r * r).exp())
            .collect();
        RotSymMetric::from_profile(grid, &w, 1.0).unwrap().metric
    }

    fn c0_distance(a: &RotSymMetric, b: &RotSymMetric) -> f64 {
        let gh = RotSymMetric::hyperbolic(a.grid());
        let p = WeightedNormParams::new(0.25, 0, 3).unwrap();
        let w = BoundaryWeight::sech(a.grid());
        weighted_norm(&gh, &a.perturbation_from(b).unwrap(), &p, &w).unwrap()
    }

    #[test]
    fn zero_field_integrates_to_identity() {
        let grid = grid(81);
        let times = vec![0.0, 0.1, 0.2, 0.3];
        let fields = vec![vec![0.0; grid.len()]; 4];
        let path = integrate_gauge(&times, &fields, &grid).unwrap();
        for map in &path.maps {
            assert_eq!(map.values(), grid.nodes());
        }
    }

    #[test]
    fn constant_field_translates_characteristics() {
        // W = c on [2, 6] (tapered outside): points in the middle move at -c
        let grid = grid(161);
        let c = 0.3;
        let field: Vec<f64> = grid
            .nodes()
            .iter()
            .map(|&r| {
                if (2.0..=6.0).contains(&r) {
                    c
                } else if r < 2.0 {
                    c * (r / 2.0)
                } else {
                    c * ((8.0 - r) / 2.0)
                }
            })
            .collect();
        let times = vec![0.0, 0.25, 0.5, 0.75, 1.0];
        let fields = vec![field; 5];
        let path = integrate_gauge(&times, &fields, &grid).unwrap();
        let map = path.final_map();
        for (i, &r) in grid.nodes().iter().enumerate() {
            if (3.5..=5.0).contains(&r) {
                // stayed inside the constant region for the whole unit time
                let want = r - c;
                assert!(
                    (map.values()[i] - want).abs() < 1e-9,
                    "r = {r}: {} vs {want}",
                    map.values()[i]
                );
            }
        }
    }

    #[test]
    fn pullback_by_identity_is_identity() {
        let grid = grid(81);
        let g = profile_metric(&grid);
        let id = GaugeMap::identity(&grid);
        let back = pullback(&g, &id).unwrap();
        for i in 0..grid.len() {
            assert!((back.phi()[i] - g.phi()[i]).abs() < 1e-12 * (1.0 + g.phi()[i]));
            assert!((back.psi()[i] - g.psi()[i]).abs() < 1e-12 * (1.0 + g.psi()[i]));
        }
    }

    #[test]
    fn pullback_of_flat_by_scaling_stays_flat() {
        // Phi(r) = r/2 keeps queries in range; the pullback of the flat
        // metric is again flat (phi = 1/2, psi = r/2)
        let grid = grid(161);
        let h = grid.spacing();
        let phi = vec![1.0; grid.len()];
        let psi: Vec<f64> = grid.nodes().to_vec();
        let flat = RotSymMetric::new(grid.clone(), phi, psi).unwrap();
        let half: Vec<f64> = grid.nodes().iter().map(|&r| 0.5 * r).collect();
        let map = GaugeMap::from_samples(&grid, half).unwrap();
        let pulled = pullback(&flat, &map).unwrap();
        let sec_t = pulled.sec_tangential();
        let sec_r = pulled.sec_radial();
        for i in grid.interior() {
            assert!(sec_t[i].abs() < 10.0 * h * h, "sec_T node {i}: {}", sec_t[i]);
            assert!(sec_r[i].abs() < 10.0 * h * h, "sec_R node {i}: {}", sec_r[i]);
        }
    }

    #[test]
    fn pullback_round_trip_recovers_metric() {
        let grid = grid(161);
        let h = grid.spacing();
        let g = profile_metric(&grid);
        let map_vals: Vec<f64> = grid
            .nodes()
            .iter()
            .map(|&r| r + 0.08 * (std::f64::consts::PI * r / 8.0).sin())
            .collect();
        let map = GaugeMap::from_samples(&grid, map_vals).unwrap();
        let inv = map.invert().unwrap();
        let round = pullback(&pullback(&g, &map).unwrap(), &inv).unwrap();
        for i in grid.interior() {
            assert!(
                (round.phi()[i] - g.phi()[i]).abs() < 10.0 * h * h,
                "phi node {i}"
            );
            assert!(
                (round.psi()[i] - g.psi()[i]).abs() < 10.0 * h * h * (1.0 + g.psi()[i]),
                "psi node {i}"
            );
        }
    }

    #[test]
    fn inverse_composes_to_identity() {
        let grid = grid(81);
        let map_vals: Vec<f64> = grid
            .nodes()
            .iter()
            .map(|&r| r - 0.05 * (std::f64::consts::PI * r / 8.0).sin())
            .collect();
        let map = GaugeMap::from_samples(&grid, map_vals).unwrap();
        let inv = map.invert().unwrap();
        let comp = map.compose(&inv).unwrap();
        assert!(comp.sup_distance_to_identity() < 1e-6);
    }

    #[test]
    fn recovered_flow_is_reference_independent() {
        // the same ungauged solution must come out whether the gauged flow
        // ran against the initial metric or against the hyperbolic metric;
        // this pins the direction conventions of the recovery
        let mut discrepancies = Vec::new();
        for n_nodes in [81usize, 161] {
            let grid = grid(n_nodes);
            let g0 = profile_metric(&grid);
            let tau = 0.5;

            // reference = g0 (the run_flow ungauged construction)
            let rf_cfg = FlowConfig::ricci(tau);
            let rf = run_flow(&g0, &rf_cfg).unwrap();
            assert!(
                rf.status.is_completed(),
                "n={n_nodes}: rf status {:?}",
                rf.status
            );

            // reference = g_h, recovered by hand
            let gh = RotSymMetric::hyperbolic(&grid);
            let mut dt_cfg = FlowConfig::deturck(tau, gh);
            dt_cfg.track_gauge = true;
            dt_cfg.record_every = 10;
            let gauged = run_flow(&g0, &dt_cfg).unwrap();
            assert!(gauged.status.is_completed());
            let (wt, wf) = gauged.w_history.as_ref().unwrap();
            let path = integrate_gauge(wt, wf, &grid).unwrap();
            let recovered = pullback(gauged.final_metric(), path.final_map()).unwrap();

            discrepancies.push(c0_distance(&recovered, rf.final_metric()));
        }
        assert!(
            discrepancies[0] < 5e-2,
            "coarse discrepancy {}",
            discrepancies[0]
        );
        let ratio = discrepancies[0] / discrepancies[1];
        assert!(ratio > 2.0, "no refinement gain: {discrepancies:?}");
    }

    #[test]
    fn chained_single_segment_equals_manual_pipeline() {
        let grid = grid(81);
        let g0 = profile_metric(&grid);
        let tau = 0.4;
        let mut cfg = FlowConfig::ricci(tau);
        cfg.record_every = 20;

        let chained = chained_rdtf(&g0, &[0.0, tau], &cfg, 1.0).unwrap();

        let mut manual_cfg = FlowConfig::deturck(tau, g0.clone());
        manual_cfg.record_every = 20;
        manual_cfg.track_gauge = true;
        manual_cfg.snapshot_every = 1;
        let gauged = run_flow(&g0, &manual_cfg).unwrap();
        let (wt, wf) = gauged.w_history.as_ref().unwrap();
        let path = integrate_gauge(wt, wf, &grid).unwrap();
        let manual = pullback(gauged.final_metric(), path.final_map()).unwrap();

        let chained_final = chained.trajectory.final_metric();
        for i in 0..grid.len() {
            assert_eq!(chained_final.phi()[i], manual.phi()[i]);
            assert_eq!(chained_final.psi()[i], manual.psi()[i]);
        }
    }

    #[test]
    fn chained_fixed_point_stays_hyperbolic() {
        let grid = grid(81);
        let h = grid.spacing();
        let gh = RotSymMetric::hyperbolic(&grid);
        let mut cfg = FlowConfig::ricci(0.75);
        cfg.record_every = 20;
        let run = chained_rdtf(&gh, &[0.0, 0.25, 0.5, 0.75], &cfg, 0.3).unwrap();
        assert!(
            run.trajectory.status.is_completed(),
            "status {:?}",
            run.trajectory.status
        );
        for d in &run.trajectory.diagnostics {
            assert!(d.norm_c0_mu < 10.0 * h * h, "t = {}: {}", d.t, d.norm_c0_mu);
        }
        assert!(run.net_gauge.sup_distance_to_identity() < 10.0 * h * h);
    }

    #[test]
    fn recovery_direction_matches_ungauged_rhs() {
        // with a reference far from the initial data the DeTurck field is
        // nonzero at t = 0, so a flipped recovery direction shows up at
        // first order in the recovered trajectory's initial slope
        let grid = grid(161);
        let g0 = profile_metric(&grid);
        let tau = 0.02;
        let truth = crate::flow::rf_rhs(&g0, true);

        let gh = RotSymMetric::hyperbolic(&grid);
        let mut cfg = FlowConfig::deturck(tau, gh);
        cfg.track_gauge = true;
        cfg.record_every = 1;
        let gauged = run_flow(&g0, &cfg).unwrap();
        let (wt, wf) = gauged.w_history.as_ref().unwrap();
        let path = integrate_gauge(wt, wf, &grid).unwrap();
        let rec = pullback(gauged.final_metric(), path.final_map()).unwrap();

        for i in [5usize, 10, 20, 40] {
            let du_true = truth.h_rr()[i];
            let du = (rec.phi()[i].powi(2) - g0.phi()[i].powi(2)) / tau;
            assert!(
                (du - du_true).abs() < 0.2 * (1.0 + du_true.abs()),
                "node {i}: recovered slope {du} vs ungauged rhs {du_true}"
            );
        }
    }

    #[test]
    fn oversized_segments_are_rejected() {
        let grid = grid(81);
        let gh = RotSymMetric::hyperbolic(&grid);
        let cfg = FlowConfig::ricci(1.0);
        assert!(chained_rdtf(&gh, &[0.0, 1.0], &cfg, 0.5).is_err());
        assert!(chained_rdtf(&gh, &[0.0], &cfg, 0.5).is_err());
        assert!(chained_rdtf(&gh, &[0.1, 0.2], &cfg, 0.5).is_err());
    }
}

