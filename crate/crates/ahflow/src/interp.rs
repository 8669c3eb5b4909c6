//! Monotone cubic Hermite interpolation (Fritsch-Carlson) on a uniform grid.
//!
//! Used for evaluating gauge maps and pulled-back warp samples at off-grid
//! points. The slope limiter keeps the interpolant monotone wherever the data
//! is monotone, so interpolated diffeomorphism surrogates stay invertible.

#[derive(Debug, Clone)]
pub struct MonotoneCubic {
    x0: f64,
    h: f64,
    y: Vec<f64>,
    d: Vec<f64>,
}

impl MonotoneCubic {
    pub fn uniform(x0: f64, h: f64, y: &[f64]) -> Self {
        let n = y.len();
        assert!(n >= 3, "need at least 3 samples");
        let mut sec = vec![0.0; n - 1];
        for i in 0..n - 1 {
            sec[i] = (y[i + 1] - y[i]) / h;
        }

        let mut d = vec![0.0; n];
        d[0] = endpoint_slope(sec[0], sec[1]);
        d[n - 1] = endpoint_slope(sec[n - 2], sec[n - 3]);
        for i in 1..n - 1 {
            d[i] = if sec[i - 1] * sec[i] <= 0.0 {
                0.0
            } else {
                (sec[i - 1] + sec[i]) / 2.0
            };
        }
        // Fritsch-Carlson limiter
        for i in 0..n - 1 {
            if sec[i] == 0.0 {
                d[i] = 0.0;
                d[i + 1] = 0.0;
                continue;
            }
            let a = d[i] / sec[i];
            let b = d[i + 1] / sec[i];
            let s = a * a + b * b;
            if s > 9.0 {
                let tau = 3.0 / s.sqrt();
                d[i] = tau * a * sec[i];
                d[i + 1] = tau * b * sec[i];
            }
        }

        MonotoneCubic {
            x0,
            h,
            y: y.to_vec(),
            d,
        }
    }

    /// Evaluate; linear extension with the end slopes outside the data range.
    pub fn eval(&self, x: f64) -> f64 {
        let n = self.y.len();
        let s = (x - self.x0) / self.h;
        if s <= 0.0 {
            return self.y[0] + self.d[0] * (x - self.x0);
        }
        if s >= (n - 1) as f64 {
            let xe = self.x0 + (n - 1) as f64 * self.h;
            return self.y[n - 1] + self.d[n - 1] * (x - xe);
        }
        let i = (s.floor() as usize).min(n - 2);
        let t = s - i as f64;
        let (y0, y1) = (self.y[i], self.y[i + 1]);
        let (m0, m1) = (self.d[i] * self.h, self.d[i + 1] * self.h);
        let t2 = t * t;
        let t3 = t2 * t;
        let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
        let h10 = t3 - 2.0 * t2 + t;
        let h01 = -2.0 * t3 + 3.0 * t2;
        let h11 = t3 - t2;
        h00 * y0 + h10 * m0 + h01 * y1 + h11 * m1
    }
}

/// Interpolant of samples of an even radial function, built on a mirrored
/// extension so queries near the origin see interior-quality accuracy.
pub fn even_extension(h: f64, y: &[f64], ghosts: usize) -> MonotoneCubic {
    MonotoneCubic::uniform(-(ghosts as f64) * h, h, &mirror(y, ghosts, 1.0))
}

/// Mirrored interpolant of an odd radial function (`y[0]` should vanish).
pub fn odd_extension(h: f64, y: &[f64], ghosts: usize) -> MonotoneCubic {
    MonotoneCubic::uniform(-(ghosts as f64) * h, h, &mirror(y, ghosts, -1.0))
}

fn mirror(y: &[f64], ghosts: usize, sign: f64) -> Vec<f64> {
    assert!(ghosts >= 1 && y.len() > ghosts);
    let mut ext = Vec::with_capacity(y.len() + ghosts);
    for k in (1..=ghosts).rev() {
        ext.push(sign * y[k]);
    }
    ext.extend_from_slice(y);
    ext
}

/// C^2 natural cubic spline on a uniform grid.
///
/// The shape-preserving interpolant trades smoothness for monotonicity; its
/// piecewise slopes are only C^1 and carry O(h^3) roughness. Where the
/// interpolated values feed back into derivative couplings (pulled-back
/// metric data becoming the next reference metric), that roughness gets
/// amplified by the spacing, so those paths interpolate with a genuinely C^2
/// spline instead.
#[derive(Debug, Clone)]
pub struct CubicSpline {
    x0: f64,
    h: f64,
    y: Vec<f64>,
    /// second derivatives at the nodes
    m: Vec<f64>,
}

impl CubicSpline {
    pub fn uniform(x0: f64, h: f64, y: &[f64]) -> CubicSpline {
        let n = y.len();
        assert!(n >= 3);
        // natural ends; tridiagonal system for the interior second derivatives
        let mut diag = vec![4.0; n - 2];
        let mut lower = vec![1.0; n - 2];
        let mut upper = vec![1.0; n - 2];
        let mut rhs: Vec<f64> = (1..n - 1)
            .map(|i| 6.0 * (y[i + 1] - 2.0 * y[i] + y[i - 1]) / (h * h))
            .collect();
        // Thomas
        for j in 1..n - 2 {
            let w = lower[j] / diag[j - 1];
            diag[j] -= w * upper[j - 1];
            rhs[j] -= w * rhs[j - 1];
        }
        let mut m = vec![0.0; n];
        if n > 2 {
            rhs[n - 3] /= diag[n - 3];
            m[n - 2] = rhs[n - 3];
            for j in (0..n - 3).rev() {
                rhs[j] = (rhs[j] - upper[j] * rhs[j + 1]) / diag[j];
                m[j + 1] = rhs[j];
            }
        }
        CubicSpline {
            x0,
            h,
            y: y.to_vec(),
            m,
        }
    }

    /// Spline of an even radial function on a mirrored extension.
    pub fn even_radial(h: f64, y: &[f64], ghosts: usize) -> CubicSpline {
        CubicSpline::uniform(-(ghosts as f64) * h, h, &mirror(y, ghosts, 1.0))
    }

    /// Spline of an odd radial function on a mirrored extension.
    pub fn odd_radial(h: f64, y: &[f64], ghosts: usize) -> CubicSpline {
        CubicSpline::uniform(-(ghosts as f64) * h, h, &mirror(y, ghosts, -1.0))
    }

    /// Evaluate; linear extension outside the data range.
    pub fn eval(&self, x: f64) -> f64 {
        let n = self.y.len();
        let s = (x - self.x0) / self.h;
        if s <= 0.0 {
            let d0 = (self.y[1] - self.y[0]) / self.h - self.h * self.m[1] / 6.0;
            return self.y[0] + d0 * (x - self.x0);
        }
        if s >= (n - 1) as f64 {
            let xe = self.x0 + (n - 1) as f64 * self.h;
            let de =
                (self.y[n - 1] - self.y[n - 2]) / self.h + self.h * self.m[n - 2] / 6.0;
            return self.y[n - 1] + de * (x - xe);
        }
        let i = (s.floor() as usize).min(n - 2);
        let a = self.x0 + i as f64 * self.h;
        let t = x - a;
        let tb = self.h - t;
        let h = self.h;
        self.m[i] * tb * tb * tb / (6.0 * h)
            + self.m[i + 1] * t * t * t / (6.0 * h)
            + (self.y[i] / h - self.m[i] * h / 6.0) * tb
            + (self.y[i + 1] / h - self.m[i + 1] * h / 6.0) * t
    }
}

// second-order one-sided slope, clamped as in PCHIP
fn endpoint_slope(s_near: f64, s_far: f64) -> f64 {
    let d = 1.5 * s_near - 0.5 * s_far;
    if d * s_near <= 0.0 {
        0.0
    } else if (d / s_near).abs() > 3.0 {
        3.0 * s_near
    } else {
        d
    }
}
