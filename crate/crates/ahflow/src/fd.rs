//! Finite-difference stencils on a uniform radial grid `r_i = i*h`.
//!
//! Radial quantities extend across the origin with a definite parity
//! (even: `f(-r) = f(r)`, odd: `f(-r) = -f(r)`), which supplies the ghost
//! values for near-origin stencils. First derivatives use fourth-order
//! stencils: several curvature expressions divide first derivatives by
//! `psi^2 ~ r^2` near the axis, and a second-order derivative there leaves
//! an O(1) error after the division. Second derivatives only ever appear
//! divided by quantities that vanish along with their own error, so plain
//! second-order three-point stencils suffice.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Parity {
    Even,
    Odd,
}

/// Fourth-order first derivative of a parity-extended sample array.
///
/// `out` must have the same length as `f` (at least 5 nodes).
pub fn derivative(f: &[f64], h: f64, parity: Parity, out: &mut [f64]) {
    let n = f.len();
    assert!(n >= 5, "need at least 5 nodes");
    assert_eq!(out.len(), n);
    let d = 12.0 * h;

    // ghosts across the origin
    let (gm1, gm2) = match parity {
        Parity::Even => (f[1], f[2]),
        Parity::Odd => (-f[1], -f[2]),
    };
    out[0] = match parity {
        Parity::Even => 0.0,
        Parity::Odd => (gm2 - 8.0 * gm1 + 8.0 * f[1] - f[2]) / d,
    };
    out[1] = (gm1 - 8.0 * f[0] + 8.0 * f[2] - f[3]) / d;
    for i in 2..n - 2 {
        out[i] = (f[i - 2] - 8.0 * f[i - 1] + 8.0 * f[i + 1] - f[i + 2]) / d;
    }
    // shifted stencils at the outer edge, still fourth order
    let i = n - 2;
    out[i] = (-f[i - 3] + 6.0 * f[i - 2] - 18.0 * f[i - 1] + 10.0 * f[i] + 3.0 * f[i + 1]) / d;
    let i = n - 1;
    out[i] = (3.0 * f[i - 4] - 16.0 * f[i - 3] + 36.0 * f[i - 2] - 48.0 * f[i - 1] + 25.0 * f[i]) / d;
}

/// Second-order second derivative of a parity-extended sample array.
pub fn second_derivative(f: &[f64], h: f64, parity: Parity, out: &mut [f64]) {
    let n = f.len();
    assert!(n >= 4, "need at least 4 nodes");
    assert_eq!(out.len(), n);
    let h2 = h * h;

    out[0] = match parity {
        Parity::Even => 2.0 * (f[1] - f[0]) / h2,
        Parity::Odd => 0.0,
    };
    for i in 1..n - 1 {
        out[i] = (f[i - 1] - 2.0 * f[i] + f[i + 1]) / h2;
    }
    let i = n - 1;
    out[i] = (-f[i - 3] + 4.0 * f[i - 2] - 5.0 * f[i - 1] + 2.0 * f[i]) / h2;
}

/// Plain second-order centered first derivative at interior nodes,
/// `out[0]` and `out[n-1]` filled with one-sided second-order stencils.
pub fn derivative_centered2(f: &[f64], h: f64, out: &mut [f64]) {
    let n = f.len();
    assert!(n >= 3);
    assert_eq!(out.len(), n);
    out[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * h);
    for i in 1..n - 1 {
        out[i] = (f[i + 1] - f[i - 1]) / (2.0 * h);
    }
    out[n - 1] = (3.0 * f[n - 1] - 4.0 * f[n - 2] + f[n - 3]) / (2.0 * h);
}

/// One-sided second-order derivative at the origin, `(-3f0 + 4f1 - f2)/(2h)`.
pub fn derivative_at_origin(f: &[f64], h: f64) -> f64 {
    (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * h)
}
