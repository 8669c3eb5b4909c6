//! Snapshot and trajectory file formats.
//!
//! Metric snapshots are CSV records `r,phi,psi` under a `# n=.. r_max=..
//! nodes=..` metadata line; trajectories carry one diagnostic record per
//! recorded time. All floats are written as `{:.12e}` so identical runs
//! produce identical bytes.

use crate::error::{Error, Result};
use crate::flow::{DiagnosticRow, FlowTrajectory};
use crate::geometry::{GridRef, RadialGrid, RotSymMetric};
use std::fmt::Write as _;
use std::path::Path;

pub fn fmt_f64(x: f64) -> String {
    format!("{x:.12e}")
}

pub fn metric_snapshot_string(g: &RotSymMetric) -> String {
    let grid = g.grid();
    let mut s = String::new();
    let _ = writeln!(
        s,
        "# n={} r_max={} nodes={}",
        grid.n_dim(),
        fmt_f64(grid.r_max()),
        grid.len()
    );
    s.push_str("r,phi,psi\n");
    for i in 0..grid.len() {
        let _ = writeln!(
            s,
            "{},{},{}",
            fmt_f64(grid.r(i)),
            fmt_f64(g.phi()[i]),
            fmt_f64(g.psi()[i])
        );
    }
    s
}

pub fn write_metric_snapshot(path: &Path, g: &RotSymMetric) -> Result<()> {
    std::fs::write(path, metric_snapshot_string(g))?;
    Ok(())
}

pub fn read_metric_snapshot(path: &Path) -> Result<RotSymMetric> {
    let text = std::fs::read_to_string(path)?;
    parse_metric_snapshot(&text)
}

pub fn parse_metric_snapshot(text: &str) -> Result<RotSymMetric> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::Invalid("empty snapshot file".into()))?;
    let mut n_dim = None;
    let mut r_max = None;
    let mut nodes = None;
    for tok in header.trim_start_matches('#').split_whitespace() {
        if let Some((k, v)) = tok.split_once('=') {
            match k {
                "n" => n_dim = v.parse::<usize>().ok(),
                "r_max" => r_max = v.parse::<f64>().ok(),
                "nodes" => nodes = v.parse::<usize>().ok(),
                _ => {}
            }
        }
    }
    let (n_dim, r_max, nodes) = match (n_dim, r_max, nodes) {
        (Some(a), Some(b), Some(c)) => (a, b, c),
        _ => return Err(Error::Invalid("malformed snapshot header".into())),
    };
    let grid: GridRef = RadialGrid::new(n_dim, r_max, nodes)?;
    let mut phi = Vec::with_capacity(nodes);
    let mut psi = Vec::with_capacity(nodes);
    for (ln, line) in lines {
        if line.is_empty() || line.starts_with('#') || line.starts_with('r') {
            continue;
        }
        let mut parts = line.split(',');
        let _r = parts.next();
        let p: f64 = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Invalid(format!("bad snapshot record at line {}", ln + 1)))?;
        let q: f64 = parts
            .next()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Invalid(format!("bad snapshot record at line {}", ln + 1)))?;
        phi.push(p);
        psi.push(q);
    }
    if phi.len() != nodes {
        return Err(Error::Invalid(format!(
            "snapshot holds {} records, header says {nodes}",
            phi.len()
        )));
    }
    RotSymMetric::new(grid, phi, psi)
}

pub fn trajectory_csv_string(traj: &FlowTrajectory, meta: &str) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "# {} status={}", meta, traj.status.label());
    s.push_str("t,norm_c0_mu,norm_c2_mu,min_secT,einstein_residual,w_inf,status\n");
    let last = traj.diagnostics.len().saturating_sub(1);
    for (k, d) in traj.diagnostics.iter().enumerate() {
        let status = if k == last {
            traj.status.label()
        } else {
            "ok".into()
        };
        let _ = writeln!(
            s,
            "{},{},{},{},{},{},{}",
            fmt_f64(d.t),
            fmt_f64(d.norm_c0_mu),
            fmt_f64(d.norm_c2_mu),
            fmt_f64(d.min_sec_t),
            fmt_f64(d.einstein_residual),
            fmt_f64(d.w_inf),
            status
        );
    }
    s
}

pub fn write_trajectory_csv(path: &Path, traj: &FlowTrajectory, meta: &str) -> Result<()> {
    std::fs::write(path, trajectory_csv_string(traj, meta))?;
    Ok(())
}

/// Diagnostic rows and the final status label from a trajectory CSV; verdicts
/// recomputed from this must agree with the in-memory run.
pub fn parse_trajectory_csv(text: &str) -> Result<(Vec<DiagnosticRow>, String)> {
    let mut rows = Vec::new();
    let mut status = String::from("unknown");
    for (ln, line) in text.lines().enumerate() {
        if line.starts_with('#') || line.starts_with('t') || line.is_empty() {
            continue;
        }
        let parts: Vec<&str> = line.split(',').collect();
        if parts.len() != 7 {
            return Err(Error::Invalid(format!(
                "bad trajectory record at line {}",
                ln + 1
            )));
        }
        let f = |i: usize| -> Result<f64> {
            parts[i]
                .parse()
                .map_err(|_| Error::Invalid(format!("bad float at line {}", ln + 1)))
        };
        rows.push(DiagnosticRow {
            t: f(0)?,
            norm_c0_mu: f(1)?,
            norm_c2_mu: f(2)?,
            min_sec_t: f(3)?,
            einstein_residual: f(4)?,
            w_inf: f(5)?,
        });
        status = parts[6].to_string();
    }
    Ok((rows, status))
}
