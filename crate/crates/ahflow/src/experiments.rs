//! Scripted experiments: convergence to the hyperbolic metric, stability of
//! converging trajectories under perturbation, finite-time continuous
//! dependence, gauge-recovery consistency, and the curvature-condition scan.
//!
//! Verdicts are pure functions of the recorded diagnostic series, so a saved
//! trajectory file re-evaluates to the same verdict.

use crate::error::{Error, Result};
use crate::fit::{self, DecayFit};
use crate::flow::{
    chained_rdtf, integrate_gauge, pullback, run_flow, FlowConfig, FlowTrajectory, Integrator,
};
use crate::geometry::{
    check_ah_admissible, weighted_norm, BoundaryWeight, GridRef, MetricPerturbation, RadialGrid,
    RotSymMetric, WeightedNormParams,
};
use crate::util;

#[derive(Debug, Clone, Copy)]
pub struct GridSpec {
    pub n_dim: usize,
    pub r_max: f64,
    pub n_nodes: usize,
}

impl GridSpec {
    pub fn build(&self) -> Result<GridRef> {
        RadialGrid::new(self.n_dim, self.r_max, self.n_nodes)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlowMode {
    /// direct ungauged flow
    Ricci,
    /// gauged flow with hyperbolic reference
    DeTurck,
    /// gauged flow re-referenced on equal subintervals, ungauged by recovery
    Chained { segments: usize },
}

impl FlowMode {
    pub fn label(&self) -> String {
        match self {
            FlowMode::Ricci => "rf".into(),
            FlowMode::DeTurck => "rdtf".into(),
            FlowMode::Chained { segments } => format!("chained({segments})"),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    pub grid: GridSpec,
    pub mode: FlowMode,
    pub normalized: bool,
    pub integrator: Integrator,
    pub cfl_safety: f64,
    /// 0 selects the step bound
    pub dt: f64,
    pub t_end: f64,
    pub record_every: usize,
    /// weight exponent of the diagnostic norms
    pub mu: f64,
    pub eps_target: f64,
    /// plateau cut for the decay fit, in multiples of the series minimum
    pub fit_floor_guard: f64,
    pub seed: u64,
}

impl ExperimentConfig {
    pub fn new(grid: GridSpec, t_end: f64) -> ExperimentConfig {
        ExperimentConfig {
            grid,
            mode: FlowMode::DeTurck,
            normalized: true,
            integrator: Integrator::ExplicitRk4,
            cfl_safety: 0.8,
            dt: 0.0,
            t_end,
            record_every: 25,
            mu: 0.25,
            eps_target: 1e-3,
            fit_floor_guard: 2.0,
            seed: 0,
        }
    }

    pub fn canonical_string(&self) -> String {
        format!(
            "n={} r_max={} nodes={} mode={} normalized={} integrator={:?} cfl={} dt={} t_end={} record_every={} mu={} eps={} guard={} seed={}",
            self.grid.n_dim,
            self.grid.r_max,
            self.grid.n_nodes,
            self.mode.label(),
            self.normalized,
            self.integrator,
            self.cfl_safety,
            self.dt,
            self.t_end,
            self.record_every,
            self.mu,
            self.eps_target,
            self.fit_floor_guard,
            self.seed
        )
    }

    pub fn config_hash(&self) -> u64 {
        util::fnv1a64(self.canonical_string().as_bytes())
    }

    fn flow_config(&self, reference: Option<RotSymMetric>) -> FlowConfig {
        FlowConfig {
            normalized: self.normalized,
            dt: self.dt,
            t_end: self.t_end,
            integrator: self.integrator,
            cfl_safety: self.cfl_safety,
            reference,
            record_every: self.record_every,
            snapshot_every: 0,
            track_gauge: false,
            diag_mu: self.mu,
        }
    }

    fn norm_params(&self, n_dim: usize, k: usize) -> Result<WeightedNormParams> {
        WeightedNormParams::new(self.mu, k, n_dim)
    }

    fn run(&self, g0: &RotSymMetric) -> Result<FlowTrajectory> {
        match self.mode {
            FlowMode::Ricci => run_flow(g0, &self.flow_config(None)),
            FlowMode::DeTurck => {
                let gh = RotSymMetric::hyperbolic(g0.grid());
                run_flow(g0, &self.flow_config(Some(gh)))
            }
            FlowMode::Chained { segments } => {
                let segments = segments.max(1);
                let seg = self.t_end / segments as f64;
                let partition: Vec<f64> =
                    (0..=segments).map(|i| i as f64 * seg).collect();
                let run = chained_rdtf(g0, &partition, &self.flow_config(None), seg * 1.001)?;
                Ok(run.trajectory)
            }
        }
    }
}

pub fn grid_meta(grid: &GridRef) -> String {
    format!(
        "n={} r_max={} nodes={} h={:.6e}",
        grid.n_dim(),
        grid.r_max(),
        grid.len(),
        grid.spacing()
    )
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verdict {
    Converged,
    Failed,
}

impl Verdict {
    pub fn label(&self) -> &'static str {
        match self {
            Verdict::Converged => "converge",
            Verdict::Failed => "fail",
        }
    }
}

#[derive(Debug, Clone)]
pub struct StabilityReport {
    pub base_id: String,
    pub perturbation_id: String,
    pub delta: f64,
    /// decay fit, reported only when its R^2 is at least 0.99
    pub fit: Option<DecayFit>,
    pub raw_r_squared: Option<f64>,
    pub final_distance: f64,
    pub min_distance: f64,
    /// first recorded time inside the eps/2 ball around g_h
    pub first_entry_half_eps: Option<f64>,
    pub verdict: Verdict,
    pub reason: String,
    pub status: String,
    pub config_hash: u64,
    pub grid_meta: String,
    pub times: Vec<f64>,
    pub distances: Vec<f64>,
}

/// Convergence verdict from a recorded distance series alone.
///
/// Converged means the final distance is under `eps_target` and the series is
/// not rebounding off its minimum. The decay fit is kept only when the
/// log-linear fit explains the windowed data (R^2 >= 0.99).
pub fn evaluate_convergence(
    times: &[f64],
    dists: &[f64],
    eps_target: f64,
    floor_guard: f64,
) -> (Option<DecayFit>, Option<f64>, Verdict, String) {
    let final_d = *dists.last().unwrap_or(&f64::INFINITY);
    let min_d = dists.iter().cloned().fold(f64::INFINITY, f64::min);
    let raw_fit = fit::fit_exponential_decay(times, dists, floor_guard).ok();
    let raw_r2 = raw_fit.map(|f| f.r_squared);
    let fit = raw_fit.filter(|f| f.r_squared >= 0.99);

    if final_d < eps_target && final_d <= 1.5 * min_d.max(1e-300) {
        (fit, raw_r2, Verdict::Converged, "reached target ball".into())
    } else if final_d >= eps_target {
        (
            fit,
            raw_r2,
            Verdict::Failed,
            format!("final distance {final_d:.3e} above target {eps_target:.1e}"),
        )
    } else {
        (
            fit,
            raw_r2,
            Verdict::Failed,
            format!("distance rebounded: final {final_d:.3e}, min {min_d:.3e}"),
        )
    }
}

fn report_from_trajectory(
    traj: &FlowTrajectory,
    cfg: &ExperimentConfig,
    grid: &GridRef,
    base_id: String,
    perturbation_id: String,
    delta: f64,
) -> StabilityReport {
    let (times, dists) = traj.c0_series();
    let (fit, raw_r2, mut verdict, mut reason) =
        evaluate_convergence(&times, &dists, cfg.eps_target, cfg.fit_floor_guard);
    if !traj.status.is_completed() {
        verdict = Verdict::Failed;
        reason = format!("run terminated: {}", traj.status.label());
    }
    let first_entry_half_eps = times
        .iter()
        .zip(&dists)
        .find(|(_, &d)| d < cfg.eps_target / 2.0)
        .map(|(&t, _)| t);
    StabilityReport {
        base_id,
        perturbation_id,
        delta,
        fit,
        raw_r_squared: raw_r2,
        final_distance: *dists.last().unwrap_or(&f64::INFINITY),
        min_distance: dists.iter().cloned().fold(f64::INFINITY, f64::min),
        first_entry_half_eps,
        verdict,
        reason,
        status: traj.status.label(),
        config_hash: cfg.config_hash(),
        grid_meta: grid_meta(grid),
        times,
        distances: dists,
    }
}

fn hypothesis_failure(
    cfg: &ExperimentConfig,
    grid: &GridRef,
    base_id: String,
    perturbation_id: String,
    delta: f64,
    reason: String,
) -> StabilityReport {
    StabilityReport {
        base_id,
        perturbation_id,
        delta,
        fit: None,
        raw_r_squared: None,
        final_distance: f64::INFINITY,
        min_distance: f64::INFINITY,
        first_entry_half_eps: None,
        verdict: Verdict::Failed,
        reason,
        status: "not-run".into(),
        config_hash: cfg.config_hash(),
        grid_meta: grid_meta(grid),
        times: Vec::new(),
        distances: Vec::new(),
    }
}

/// Flow a rotationally symmetric profile metric and fit the exponential
/// approach to the hyperbolic metric. The negative-tangential-curvature
/// hypothesis is checked first; the run only proceeds when it holds.
pub fn convergence_experiment(w: &[f64], cfg: &ExperimentConfig) -> Result<StabilityReport> {
    let grid = cfg.grid.build()?;
    let prof = RotSymMetric::from_profile(&grid, w, cfg.mu)?;
    let adm = check_ah_admissible(&prof.metric, &cfg.norm_params(grid.n_dim(), 2)?);
    if !adm.admissible() {
        return Ok(hypothesis_failure(
            cfg,
            &grid,
            "profile".into(),
            "none".into(),
            0.0,
            format!(
                "admissibility hypothesis failed: min sec_T = {:.4}, positivity = {}, origin = {}",
                adm.min_sec_t, adm.positivity, adm.origin_smooth
            ),
        ));
    }
    let traj = cfg.run(&prof.metric)?;
    Ok(report_from_trajectory(
        &traj,
        cfg,
        &grid,
        "profile".into(),
        "none".into(),
        0.0,
    ))
}

/// Flow `g_star + delta * p / ||p||` where `g_star` satisfies the curvature
/// hypothesis; the perturbed metric itself need not.
pub fn convergence_stability_experiment(
    w_star: &[f64],
    perturbation: &MetricPerturbation,
    perturbation_id: &str,
    delta: f64,
    cfg: &ExperimentConfig,
) -> Result<StabilityReport> {
    let grid = cfg.grid.build()?;
    let prof = RotSymMetric::from_profile(&grid, w_star, cfg.mu)?;
    let adm = check_ah_admissible(&prof.metric, &cfg.norm_params(grid.n_dim(), 2)?);
    if !adm.admissible() {
        return Ok(hypothesis_failure(
            cfg,
            &grid,
            "base-profile".into(),
            perturbation_id.into(),
            delta,
            format!("base metric fails the hypothesis: min sec_T = {:.4}", adm.min_sec_t),
        ));
    }

    let g0 = if delta == 0.0 {
        prof.metric.clone()
    } else {
        let gh = RotSymMetric::hyperbolic(&grid);
        let weight = BoundaryWeight::sech(&grid);
        let p2 = cfg.norm_params(grid.n_dim(), 2)?;
        let norm = weighted_norm(&gh, perturbation, &p2, &weight)?;
        if norm == 0.0 {
            return Ok(hypothesis_failure(
                cfg,
                &grid,
                "base-profile".into(),
                perturbation_id.into(),
                delta,
                "zero perturbation with nonzero delta".into(),
            ));
        }
        match prof.metric.perturbed(perturbation, delta / norm) {
            Ok(g) => g,
            Err(e) => {
                return Ok(hypothesis_failure(
                    cfg,
                    &grid,
                    "base-profile".into(),
                    perturbation_id.into(),
                    delta,
                    format!("perturbed metric invalid: {e}"),
                ))
            }
        }
    };

    let traj = cfg.run(&g0)?;
    Ok(report_from_trajectory(
        &traj,
        cfg,
        &grid,
        "base-profile".into(),
        perturbation_id.into(),
        delta,
    ))
}

/// Run the members of a perturbation sweep concurrently and collect the
/// reports in input order.
pub fn stability_sweep(
    w_star: &[f64],
    perturbations: &[(String, MetricPerturbation)],
    delta: f64,
    cfg: &ExperimentConfig,
) -> Result<Vec<StabilityReport>> {
    std::thread::scope(|scope| {
        let handles: Vec<_> = perturbations
            .iter()
            .map(|(id, p)| {
                scope.spawn(move || convergence_stability_experiment(w_star, p, id, delta, cfg))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("sweep member panicked")).collect()
    })
}

#[derive(Debug, Clone)]
pub struct DependenceReport {
    pub tau: f64,
    pub deltas: Vec<f64>,
    /// per-delta sup over [tau/2, tau] of ||g1(t)-g0(t)|| / ||g1-g0||
    pub ratios: Vec<Option<f64>>,
    pub statuses: Vec<String>,
    pub degenerate_request: bool,
    /// ratios of the two smallest deltas agree within 50%
    pub lipschitz_pass: Option<bool>,
    pub config_hash: u64,
    pub grid_meta: String,
}

/// Finite-time continuous dependence: flows from `g0` and from perturbed data
/// on `[0, tau]`, with the difference ratio measured in the weighted C^2 norm
/// over the second half of the interval.
pub fn continuous_dependence_sweep(
    g0: &RotSymMetric,
    perturbation: &MetricPerturbation,
    deltas: &[f64],
    tau: f64,
    cfg: &ExperimentConfig,
) -> Result<DependenceReport> {
    let grid = g0.grid().clone();
    let gh = RotSymMetric::hyperbolic(&grid);
    let weight = BoundaryWeight::sech(&grid);
    let p2 = cfg.norm_params(grid.n_dim(), 2)?;
    let hash = cfg.config_hash();

    let pnorm = weighted_norm(&gh, perturbation, &p2, &weight)?;
    if pnorm == 0.0 {
        return Ok(DependenceReport {
            tau,
            deltas: deltas.to_vec(),
            ratios: vec![None; deltas.len()],
            statuses: vec!["not-run".into(); deltas.len()],
            degenerate_request: true,
            lipschitz_pass: None,
            config_hash: hash,
            grid_meta: grid_meta(&grid),
        });
    }

    let mut flow_cfg = cfg.flow_config(match cfg.mode {
        FlowMode::DeTurck => Some(gh.clone()),
        _ => None,
    });
    flow_cfg.t_end = tau;
    flow_cfg.snapshot_every = 1;

    let base = run_flow(g0, &flow_cfg)?;
    if !base.status.is_completed() {
        return Err(Error::Invalid(format!(
            "base run failed before tau: {}",
            base.status.label()
        )));
    }

    let mut ratios = Vec::new();
    let mut statuses = Vec::new();
    for &delta in deltas {
        let g1 = match g0.perturbed(perturbation, delta / pnorm) {
            Ok(g) => g,
            Err(e) => {
                ratios.push(None);
                statuses.push(format!("invalid-data({e})"));
                continue;
            }
        };
        let run = run_flow(&g1, &flow_cfg)?;
        statuses.push(run.status.label());
        if !run.status.is_completed() {
            ratios.push(None);
            continue;
        }
        let denom = weighted_norm(&gh, &g1.perturbation_from(g0)?, &p2, &weight)?;
        let mut sup = 0.0f64;
        for ((t, snap), (tb, snap_b)) in run.snapshots.iter().zip(&base.snapshots) {
            debug_assert!((t - tb).abs() < 1e-12);
            if *t + 1e-12 < tau / 2.0 {
                continue;
            }
            let d = snap.perturbation_from(snap_b)?;
            sup = sup.max(weighted_norm(&gh, &d, &p2, &weight)?);
        }
        ratios.push(Some(sup / denom));
    }

    // Lipschitz evidence: the two smallest deltas must produce ratios within
    // 50% of each other
    let mut order: Vec<usize> = (0..deltas.len()).collect();
    order.sort_by(|&a, &b| deltas[a].partial_cmp(&deltas[b]).unwrap());
    let lipschitz_pass = if order.len() >= 2 {
        match (ratios[order[0]], ratios[order[1]]) {
            (Some(ra), Some(rb)) => Some((ra - rb).abs() <= 0.5 * ra.min(rb)),
            _ => None,
        }
    } else {
        None
    };

    Ok(DependenceReport {
        tau,
        deltas: deltas.to_vec(),
        ratios,
        statuses,
        degenerate_request: false,
        lipschitz_pass,
        config_hash: hash,
        grid_meta: grid_meta(&grid),
    })
}

#[derive(Debug, Clone, Copy)]
pub struct GaugeLevel {
    pub n_nodes: usize,
    pub h: f64,
    pub dt: f64,
    pub discrepancy: f64,
}

#[derive(Debug, Clone)]
pub struct GaugeOrderReport {
    pub levels: Vec<GaugeLevel>,
    pub fitted_order: f64,
    pub config_hash: u64,
}

/// Direct ungauged flow vs gauge-recovered gauged flow at `t = tau` across
/// grid/step refinements; the discrepancy must shrink with a fitted order of
/// at least 1.5 for the recovery to be consistent.
pub fn gauge_consistency_check(
    profile: &dyn Fn(f64) -> f64,
    tau: f64,
    cfg: &ExperimentConfig,
    node_levels: &[usize],
) -> Result<GaugeOrderReport> {
    let mut levels = Vec::new();
    for &n_nodes in node_levels {
        let grid = RadialGrid::new(cfg.grid.n_dim, cfg.grid.r_max, n_nodes)?;
        let w: Vec<f64> = grid.nodes().iter().map(|&r| profile(r)).collect();
        let g0 = RotSymMetric::from_profile(&grid, &w, cfg.mu)?.metric;

        let mut rf_cfg = cfg.flow_config(None);
        rf_cfg.t_end = tau;
        let rf = run_flow(&g0, &rf_cfg)?;
        if !rf.status.is_completed() {
            return Err(Error::Invalid(format!(
                "ungauged run failed: {}",
                rf.status.label()
            )));
        }

        // gauged flow in a different gauge (hyperbolic reference), ungauged
        // by hand; both routes must land on the same solution of the
        // ungauged flow
        let mut dt_cfg = cfg.flow_config(Some(RotSymMetric::hyperbolic(&grid)));
        dt_cfg.t_end = tau;
        dt_cfg.track_gauge = true;
        let gauged = run_flow(&g0, &dt_cfg)?;
        if !gauged.status.is_completed() {
            return Err(Error::Invalid(format!(
                "gauged run failed: {}",
                gauged.status.label()
            )));
        }
        let (w_times, w_fields) = gauged.w_history.as_ref().expect("tracking enabled");
        let gauge = integrate_gauge(w_times, w_fields, &grid)?;
        let recovered = pullback(gauged.final_metric(), gauge.final_map())?;

        let gh = RotSymMetric::hyperbolic(&grid);
        let weight = BoundaryWeight::sech(&grid);
        let p0 = cfg.norm_params(grid.n_dim(), 0)?;
        let disc = weighted_norm(
            &gh,
            &recovered.perturbation_from(rf.final_metric())?,
            &p0,
            &weight,
        )?;
        let dt_used = rf.times[1] - rf.times[0];
        levels.push(GaugeLevel {
            n_nodes,
            h: grid.spacing(),
            dt: dt_used,
            discrepancy: disc,
        });
    }

    let pts: Vec<(f64, f64)> = levels
        .iter()
        .map(|l| (l.h.ln(), l.discrepancy.max(1e-300).ln()))
        .collect();
    let fitted_order = fit::linear_fit(&pts)?.slope;
    Ok(GaugeOrderReport {
        levels,
        fitted_order,
        config_hash: cfg.config_hash(),
    })
}

#[derive(Debug, Clone, Copy)]
pub struct ScanRow {
    pub amplitude: f64,
    pub min_sec_t: f64,
    pub weighted_distance: f64,
}

/// Distance to `g_h` and the curvature-condition margin across the profile
/// family `w_A(r) = A r^2 e^{-r^2}`; demonstrates members arbitrarily far
/// from the hyperbolic metric that still satisfy the hypothesis.
pub fn curvature_condition_scan(
    amplitudes: &[f64],
    cfg: &ExperimentConfig,
) -> Result<Vec<ScanRow>> {
    let grid = cfg.grid.build()?;
    let p0 = cfg.norm_params(grid.n_dim(), 0)?;
    let mut rows = Vec::new();
    for &a in amplitudes {
        let w: Vec<f64> = grid
            .nodes()
            .iter()
            .map(|&r| a * r * r * (-r * r).exp())
            .collect();
        let prof = RotSymMetric::from_profile(&grid, &w, cfg.mu)?;
        let adm = check_ah_admissible(&prof.metric, &p0);
        rows.push(ScanRow {
            amplitude: a,
            min_sec_t: adm.min_sec_t,
            weighted_distance: adm.weighted_distance,
        });
    }
    Ok(rows)
}

/// The perturbation library: bumps in the `rho^mu` decay class,
/// `p = rho(r)^mu exp(-(r - c)^2 / s^2)` placed in either or both tensor
/// components.
pub fn bump_perturbation(
    grid: &GridRef,
    mu: f64,
    center: f64,
    width: f64,
    in_rr: bool,
    in_sph: bool,
) -> MetricPerturbation {
    let gh = RotSymMetric::hyperbolic(grid);
    let mut h_rr = vec![0.0; grid.len()];
    let mut h_sph = vec![0.0; grid.len()];
    for (i, &r) in grid.nodes().iter().enumerate() {
        let rho = 1.0 / r.cosh();
        let bump = rho.powf(mu) * (-((r - center) / width).powi(2)).exp();
        if in_rr {
            h_rr[i] = bump * gh.phi()[i] * gh.phi()[i];
        }
        if in_sph && i > 0 {
            h_sph[i] = bump * gh.psi()[i] * gh.psi()[i];
        }
    }
    MetricPerturbation::from_parts(grid.clone(), h_rr, h_sph)
}
