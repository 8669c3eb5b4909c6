//! Least-squares fitting of diagnostic series: log-linear decay rates and
//! refinement orders.

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub n_points: usize,
}

pub fn linear_fit(pts: &[(f64, f64)]) -> Result<LinearFit> {
    if pts.len() < 3 {
        return Err(Error::Fit(format!("need >= 3 points, got {}", pts.len())));
    }
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let mx = sx / n;
    let my = sy / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if sxx == 0.0 {
        return Err(Error::Fit("degenerate abscissae".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ss_tot: f64 = pts.iter().map(|p| (p.1 - my) * (p.1 - my)).sum();
    let ss_res: f64 = pts
        .iter()
        .map(|p| {
            let e = p.1 - (intercept + slope * p.0);
            e * e
        })
        .sum();
    let r_squared = if ss_tot == 0.0 { 1.0 } else { 1.0 - ss_res / ss_tot };
    Ok(LinearFit {
        slope,
        intercept,
        r_squared,
        n_points: pts.len(),
    })
}

/// Log-linear fit of `d(t) ~ A e^{-omega t}` over the tail of a decay series.
#[derive(Debug, Clone, Copy)]
pub struct DecayFit {
    pub omega: f64,
    pub amplitude: f64,
    pub r_squared: f64,
    /// time window actually used
    pub window: (f64, f64),
    pub n_points: usize,
}

/// Fits the last half of the series before it reaches its floor.
///
/// The trajectory of a converging flow decays exponentially and then levels
/// off at the discretization floor. Fitting across the plateau would wash out
/// the rate, so the window ends the first time the series drops below
/// `floor_guard * min(d)` and starts halfway into the remaining segment;
/// the first half of the segment absorbs the nonlinear transient.
pub fn fit_exponential_decay(times: &[f64], values: &[f64], floor_guard: f64) -> Result<DecayFit> {
    if times.len() != values.len() || times.len() < 4 {
        return Err(Error::Fit("series too short".into()));
    }
    let d_min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    if !(d_min >= 0.0) || !d_min.is_finite() {
        return Err(Error::Fit("series contains invalid values".into()));
    }
    let guard = floor_guard * d_min.max(1e-300);
    let t_cut = times
        .iter()
        .zip(values)
        .find(|(_, &v)| v <= guard)
        .map(|(&t, _)| t)
        .unwrap_or(*times.last().unwrap());
    let t_start = times[0] + 0.5 * (t_cut - times[0]);

    let pts: Vec<(f64, f64)> = times
        .iter()
        .zip(values)
        .filter(|(&t, &v)| t >= t_start && t <= t_cut && v > 0.0)
        .map(|(&t, &v)| (t, v.ln()))
        .collect();
    let fit = linear_fit(&pts)?;
    Ok(DecayFit {
        omega: -fit.slope,
        amplitude: fit.intercept.exp(),
        r_squared: fit.r_squared,
        window: (t_start, t_cut),
        n_points: pts.len(),
    })
}
