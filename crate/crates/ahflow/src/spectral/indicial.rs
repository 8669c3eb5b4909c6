//! Indicial roots: exponents `gamma` for which `(L - lambda)` applied to
//! `rho^gamma`-leading data gains an extra order of boundary decay.
//!
//! For the radial hyperbolic Laplacian model `-(u'' + (n-1) coth(r) u')`
//! acting on `u = e^{-gamma r}`, the leading coefficient as `coth -> 1` is
//! `-(gamma^2 - (n-1) gamma)`, so the indicial equation of `(L - lambda)` is
//!
//!   gamma^2 - (n-1) gamma + lambda = 0,
//!   gamma_pm = (n-1)/2 +- sqrt((n-1)^2/4 - lambda),
//!
//! a pair symmetric about `(n-1)/2` that collides at the continuous-spectrum
//! threshold `lambda = (n-1)^2/4`. The empirical detector below finds the
//! same roots (for any supplied operator) by scanning for the leading-order
//! cancellation directly.

use super::RadialOperator;
use crate::error::{Error, Result};
use crate::fit;
use crate::geometry::BoundaryWeight;
use num_complex::Complex64;

#[derive(Debug, Clone, Copy)]
pub struct IndicialPair {
    pub lambda: Complex64,
    pub gamma_minus: Complex64,
    pub gamma_plus: Complex64,
    /// `lambda` is past the range where the roots stay real
    pub beyond_threshold: bool,
}

/// Closed-form indicial roots of the scalar model operator.
pub fn indicial_roots_scalar(n_dim: usize, lambda: Complex64) -> IndicialPair {
    let half = (n_dim as f64 - 1.0) / 2.0;
    let disc = Complex64::new(half * half, 0.0) - lambda;
    let s = disc.sqrt();
    IndicialPair {
        lambda,
        gamma_minus: Complex64::new(half, 0.0) - s,
        gamma_plus: Complex64::new(half, 0.0) + s,
        beyond_threshold: lambda.im != 0.0 || lambda.re > half * half,
    }
}

/// A root located by the scan, with the measured extra decay of the
/// null-direction output relative to the trial.
#[derive(Debug, Clone, Copy)]
pub struct DetectedRoot {
    pub gamma: f64,
    pub decay_gain: f64,
}

/// Empirical indicial-root detection.
///
/// For each `gamma` the trial data `rho^gamma` (frame-normalized, one tensor
/// component at a time) is pushed through `(L - lambda)` and the leading
/// coefficient of the output against `rho^gamma` is fit over the outer part
/// of the grid. Zeros of the resulting (k x k) leading-coefficient
/// determinant are the indicial roots; each candidate is confirmed by
/// fitting the decay exponent of the null-direction output, which must gain
/// at least half an order over the trial.
pub fn empirical_indicial(
    op: &dyn RadialOperator,
    weight: &BoundaryWeight,
    gamma_grid: &[f64],
    lambda: f64,
) -> Result<Vec<DetectedRoot>> {
    let grid = op.grid();
    if !grid.compatible(weight.grid()) {
        return Err(Error::GridMismatch);
    }
    if gamma_grid.len() < 3 {
        return Err(Error::Invalid("gamma grid too small".into()));
    }
    let k = op.components();
    let m = grid.len() - 2;
    let d = op.dim();

    // fit window: outer half, away from the Dirichlet truncation
    let r_max = grid.r_max();
    let window: Vec<usize> = (1..grid.len() - 5)
        .filter(|&i| grid.r(i) >= 0.5 * r_max && grid.r(i) <= 0.85 * r_max)
        .collect();
    if window.len() < 8 {
        return Err(Error::Invalid("grid too short for the indicial window".into()));
    }

    let rho = weight.rho();
    let mut diag_track: Vec<Vec<f64>> = vec![Vec::with_capacity(gamma_grid.len()); k];
    for &gamma in gamma_grid {
        let mat = leading_matrix(op, rho, &window, gamma, lambda, k, m, d);
        for c in 0..k {
            diag_track[c].push(mat[c * k + c]);
        }
    }

    // Roots are located per component by the sign change of the diagonal
    // leading coefficient: the tensor sectors can carry coincident roots, in
    // which case the determinant touches zero without changing sign.
    // Refinement fits over the outer half of the window, where subleading
    // corrections are weakest.
    let far: Vec<usize> = window[window.len() / 2..].to_vec();

    let mut roots: Vec<DetectedRoot> = Vec::new();
    for (c, track) in diag_track.iter().enumerate() {
        for j in 0..gamma_grid.len() - 1 {
            if track[j] == 0.0 || track[j].signum() == track[j + 1].signum() {
                continue;
            }
            // bracket from the scan, then secant on the far-window
            // coefficient. The gain check below needs the root to near
            // machine precision: a residual delta-gamma leaves a rho^gamma
            // tail of relative size |c'| delta-gamma that buries the
            // genuinely faster-decaying output.
            let (mut g0, mut g1) = (gamma_grid[j], gamma_grid[j + 1]);
            let coeff_far = |gamma: f64| -> f64 {
                leading_matrix(op, rho, &far, gamma, lambda, k, m, d)[c * k + c]
            };
            let (mut f0, mut f1) = (coeff_far(g0), coeff_far(g1));
            let mut gamma = g0 - f0 * (g1 - g0) / (f1 - f0);
            for _ in 0..4 {
                let f = coeff_far(gamma);
                if f == 0.0 || (f1 - f0).abs() == 0.0 {
                    break;
                }
                g0 = g1;
                f0 = f1;
                g1 = gamma;
                f1 = f;
                let step = f1 * (g1 - g0) / (f1 - f0);
                gamma = g1 - step;
                if step.abs() < 1e-13 {
                    break;
                }
            }

            match decay_gain(op, rho, grid, &far, gamma, lambda, k, m, d) {
                Ok(gain) if gain >= 0.5 => {
                    // coincident roots from different components merge
                    let step = gamma_grid[1] - gamma_grid[0];
                    match roots.iter_mut().find(|r| (r.gamma - gamma).abs() < 0.5 * step) {
                        Some(existing) => existing.decay_gain = existing.decay_gain.max(gain),
                        None => roots.push(DetectedRoot { gamma, decay_gain: gain }),
                    }
                }
                Ok(_) | Err(_) => {} // spurious crossing without an actual gain
            }
        }
    }
    roots.sort_by(|a, b| a.gamma.partial_cmp(&b.gamma).unwrap());
    Ok(roots)
}

/// leading coefficients of `(L - lambda) rho^gamma e_c` against `rho^gamma`
#[allow(clippy::too_many_arguments)]
fn leading_matrix(
    op: &dyn RadialOperator,
    rho: &[f64],
    window: &[usize],
    gamma: f64,
    lambda: f64,
    k: usize,
    m: usize,
    d: usize,
) -> Vec<f64> {
    let mut mat = vec![0.0; k * k];
    let mut x = vec![0.0; d];
    let mut y = vec![0.0; d];
    for c in 0..k {
        x.iter_mut().for_each(|v| *v = 0.0);
        for i in 1..=m {
            x[c * m + i - 1] = rho[i].powf(gamma);
        }
        op.apply(&x, &mut y);
        for (j, v) in y.iter_mut().enumerate() {
            *v -= lambda * x[j];
        }
        for out in 0..k {
            // least squares for coef in y ~ coef * rho^gamma over the window
            let mut num = 0.0;
            let mut den = 0.0;
            for &i in window {
                let t = rho[i].powf(gamma);
                num += y[out * m + i - 1] * t;
                den += t * t;
            }
            mat[out * k + c] = num / den;
        }
    }
    mat
}

fn det_k(mat: &[f64], k: usize) -> f64 {
    match k {
        1 => mat[0],
        2 => mat[0] * mat[3] - mat[1] * mat[2],
        _ => panic!("unsupported component count {k}"),
    }
}

/// decay exponent of the null-direction output minus `gamma`
#[allow(clippy::too_many_arguments)]
fn decay_gain(
    op: &dyn RadialOperator,
    rho: &[f64],
    grid: &crate::geometry::GridRef,
    window: &[usize],
    gamma: f64,
    lambda: f64,
    k: usize,
    m: usize,
    d: usize,
) -> Result<f64> {
    let mat = leading_matrix(op, rho, window, gamma, lambda, k, m, d);
    let null = match k {
        1 => vec![1.0],
        2 => {
            // null vector of the (nearly) singular 2x2 leading matrix
            let a = [mat[1], -mat[0]];
            let b = [mat[3], -mat[2]];
            let na = a[0].hypot(a[1]);
            let nb = b[0].hypot(b[1]);
            if na >= nb {
                vec![a[0] / na, a[1] / na]
            } else {
                vec![b[0] / nb, b[1] / nb]
            }
        }
        _ => unreachable!(),
    };

    let mut x = vec![0.0; d];
    let mut y = vec![0.0; d];
    for c in 0..k {
        for i in 1..=m {
            x[c * m + i - 1] = null[c] * rho[i].powf(gamma);
        }
    }
    op.apply(&x, &mut y);
    for (j, v) in y.iter_mut().enumerate() {
        *v -= lambda * x[j];
    }

    // the cancellation happens in the sector the null vector spans; the
    // cross-sector coupling response cancels at its own root, so the decay
    // gain is read off the null-direction projection of the output
    let mag = |i: usize| -> f64 {
        (0..k)
            .map(|c| null[c] * y[c * m + i - 1])
            .sum::<f64>()
            .abs()
    };
    let peak = window.iter().map(|&i| mag(i)).fold(0.0f64, f64::max);
    let pts: Vec<(f64, f64)> = window
        .iter()
        .filter(|&&i| mag(i) > 1e-13 * peak && mag(i) > 0.0)
        .map(|&i| (grid.r(i), mag(i).ln()))
        .collect();
    if pts.len() < 5 {
        return Err(Error::Fit("output vanished over the window".into()));
    }
    let f = fit::linear_fit(&pts)?;
    if f.r_squared < 0.9 {
        return Err(Error::Fit(format!(
            "output not exponential over the window (R^2 = {})",
            f.r_squared
        )));
    }
    Ok(-f.slope - gamma)
}

#[cfg(test)]
mod probe {
    use super::*;
    use crate::spectral::{RadialOperator, ScalarModelOp};
    use crate::geometry::{BoundaryWeight, RadialGrid};

    #[test]
    #[ignore]
    fn dev_probe_det_scan() {
        let grid = RadialGrid::new(3, 12.0, 241).unwrap();
        let op = ScalarModelOp::new(&grid);
        let weight = BoundaryWeight::sech(&grid);
        let rho = weight.rho();
        let m = grid.len() - 2;
        let d = op.dim();
        let r_max = grid.r_max();
        let window: Vec<usize> = (1..grid.len() - 5)
            .filter(|&i| grid.r(i) >= 0.5 * r_max && grid.r(i) <= 0.85 * r_max)
            .collect();
        println!("window: {} nodes, r in [{:.2}, {:.2}]", window.len(),
            grid.r(window[0]), grid.r(*window.last().unwrap()));
        for gamma in [1.2f64, 1.6, 1.9, 1.99, 2.0, 2.01, 2.1, 2.5, 3.0, 3.5] {
            let mat = super::leading_matrix(&op, rho, &window, gamma, 0.0, 1, m, d);
            // analytic: -(gamma^2 - 2 gamma)
            let want = -(gamma * gamma - 2.0 * gamma);
            println!("gamma={gamma}: c={:.6e} want={:.6e}", mat[0], want);
        }
    }
}

#[cfg(test)]
mod probe2 {
    use crate::spectral::{RadialOperator, ScalarModelOp};
    use crate::geometry::{BoundaryWeight, RadialGrid};

    #[test]
    #[ignore]
    fn dev_probe_decay_gain() {
        let grid = RadialGrid::new(3, 12.0, 241).unwrap();
        let op = ScalarModelOp::new(&grid);
        let weight = BoundaryWeight::sech(&grid);
        let rho = weight.rho();
        let m = grid.len() - 2;
        let d = op.dim();
        let r_max = grid.r_max();
        let window: Vec<usize> = (1..grid.len() - 5)
            .filter(|&i| grid.r(i) >= 0.5 * r_max && grid.r(i) <= 0.85 * r_max)
            .collect();
        for gamma in [2.0017f64, 2.0, 1.6] {
            match super::decay_gain(&op, rho, &grid, &window, gamma, 0.0, 1, m, d) {
                Ok(gain) => println!("gamma={gamma}: gain={gain:.4}"),
                Err(e) => println!("gamma={gamma}: error {e}"),
            }
            // raw output profile at this gamma
            let mut x = vec![0.0; d];
            let mut y = vec![0.0; d];
            for i in 1..=m {
                x[i - 1] = rho[i].powf(gamma);
            }
            op.apply(&x, &mut y);
            for &i in window.iter().step_by(20) {
                println!("  r={:.2} |y|={:.3e} rho^g={:.3e} ratio={:.3e}",
                    grid.r(i), y[i-1].abs(), rho[i].powf(gamma), y[i-1].abs()/rho[i].powf(gamma));
            }
        }
    }
}

#[cfg(test)]
mod probe3 {
    use crate::spectral::{assemble_linearized, RadialOperator};
    use crate::geometry::{BoundaryWeight, RadialGrid, RotSymMetric};

    #[test]
    #[ignore]
    fn dev_probe_tensor_det() {
        let grid = RadialGrid::new(3, 12.0, 241).unwrap();
        let gh = RotSymMetric::hyperbolic(&grid);
        let op = assemble_linearized(&gh, &gh, 1e-6).unwrap();
        let weight = BoundaryWeight::sech(&grid);
        let rho = weight.rho();
        let m = grid.len() - 2;
        let d = op.dim();
        let r_max = grid.r_max();
        let window: Vec<usize> = (1..grid.len() - 5)
            .filter(|&i| grid.r(i) >= 0.5 * r_max && grid.r(i) <= 0.85 * r_max)
            .collect();
        let mut gamma = 1.1;
        while gamma < 4.6 {
            let mat = super::leading_matrix(&op, rho, &window, gamma, 0.0, 2, m, d);
            let det = super::det_k(&mat, 2);
            println!("gamma={gamma:.2}: M=[{:+.4e} {:+.4e}; {:+.4e} {:+.4e}] det={det:+.4e}",
                mat[0], mat[1], mat[2], mat[3]);
            gamma += 0.2;
        }
    }
}

#[cfg(test)]
mod probe4 {
    use crate::spectral::{assemble_linearized, empirical_indicial};
    use crate::geometry::{BoundaryWeight, RadialGrid, RotSymMetric};

    #[test]
    #[ignore]
    fn dev_probe_tensor_roots() {
        let grid = RadialGrid::new(3, 12.0, 241).unwrap();
        let gh = RotSymMetric::hyperbolic(&grid);
        let op = assemble_linearized(&gh, &gh, 1e-6).unwrap();
        let weight = BoundaryWeight::sech(&grid);
        let gammas: Vec<f64> = (0..=170).map(|i| 1.1 + i as f64 * 0.02).collect();
        match empirical_indicial(&op, &weight, &gammas, 0.0) {
            Ok(roots) => {
                for r in &roots {
                    println!("root gamma={:.5} gain={:.3}", r.gamma, r.decay_gain);
                }
                if roots.is_empty() {
                    println!("no roots passed the gain check");
                }
            }
            Err(e) => println!("error: {e}"),
        }
        // raw gain at the expected double root
        let rho = weight.rho();
        let m = grid.len() - 2;
        let d = 2 * m;
        let r_max = grid.r_max();
        let window: Vec<usize> = (1..grid.len() - 5)
            .filter(|&i| grid.r(i) >= 0.5 * r_max && grid.r(i) <= 0.85 * r_max)
            .collect();
        for gamma in [3.2360f64, 3.23607, 3.2361] {
            match super::decay_gain(&op, rho, &grid, &window, gamma, 0.0, 2, m, d) {
                Ok(g) => println!("gamma={gamma}: gain {g:.4}"),
                Err(e) => println!("gamma={gamma}: {e}"),
            }
        }
    }
}
