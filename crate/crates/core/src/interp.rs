//! Blending functions and piecewise cubic Hermite interpolation.

use serde::{Deserialize, Serialize};

/// Transition profile used to blend two nonlinearities and to smooth cutoffs.
///
/// Each kind maps `[0,1]` monotonically onto `[0,1]` and is clamped outside.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum BlendKind {
    /// `6s^5 - 15s^4 + 10s^3`, C² at both ends.
    #[default]
    Quintic,
    /// `3s^2 - 2s^3`, C¹ at both ends.
    Cubic,
    /// Piecewise linear, only continuous.
    Linear,
}

impl BlendKind {
    pub fn value(self, s: f64) -> f64 {
        if s <= 0.0 {
            return 0.0;
        }
        if s >= 1.0 {
            return 1.0;
        }
        match self {
            BlendKind::Quintic => s * s * s * (s * (6.0 * s - 15.0) + 10.0),
            BlendKind::Cubic => s * s * (3.0 - 2.0 * s),
            BlendKind::Linear => s,
        }
    }

    /// First derivative with respect to `s`.
    pub fn slope(self, s: f64) -> f64 {
        if !(0.0..=1.0).contains(&s) {
            return 0.0;
        }
        match self {
            BlendKind::Quintic => 30.0 * s * s * (s - 1.0) * (s - 1.0),
            BlendKind::Cubic => 6.0 * s * (1.0 - s),
            BlendKind::Linear => 1.0,
        }
    }

    /// Second derivative with respect to `s` (zero for the linear kind).
    pub fn curvature(self, s: f64) -> f64 {
        if !(0.0..=1.0).contains(&s) {
            return 0.0;
        }
        match self {
            BlendKind::Quintic => 60.0 * s * (s - 1.0) * (2.0 * s - 1.0),
            BlendKind::Cubic => 6.0 - 12.0 * s,
            BlendKind::Linear => 0.0,
        }
    }
}

/// Cubic Hermite basis on one interval of width `dx`, returns value and slope at local `t ∈ [0,1]`.
#[inline]
pub fn hermite_segment(y0: f64, y1: f64, d0: f64, d1: f64, dx: f64, t: f64) -> (f64, f64) {
    let t2 = t * t;
    let t3 = t2 * t;
    let h00 = 2.0 * t3 - 3.0 * t2 + 1.0;
    let h10 = t3 - 2.0 * t2 + t;
    let h01 = -2.0 * t3 + 3.0 * t2;
    let h11 = t3 - t2;
    let v = h00 * y0 + h10 * dx * d0 + h01 * y1 + h11 * dx * d1;
    let dh00 = 6.0 * t2 - 6.0 * t;
    let dh10 = 3.0 * t2 - 4.0 * t + 1.0;
    let dh01 = -dh00;
    let dh11 = 3.0 * t2 - 2.0 * t;
    let dv = (dh00 * y0 + dh01 * y1) / dx + dh10 * d0 + dh11 * d1;
    (v, dv)
}

/// Piecewise cubic Hermite interpolant on strictly increasing knots.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Hermite {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub d: Vec<f64>,
}

impl Hermite {
    /// Uses the supplied nodal derivatives as they are.
    pub fn new(x: Vec<f64>, y: Vec<f64>, d: Vec<f64>) -> Self {
        assert!(x.len() >= 2 && x.len() == y.len() && y.len() == d.len());
        Self { x, y, d }
    }

    /// Supplied derivatives limited with the Fritsch–Carlson conditions so
    /// that monotone data stays monotone between knots.
    pub fn monotone_with_slopes(x: Vec<f64>, y: Vec<f64>, mut d: Vec<f64>) -> Self {
        limit_slopes(&x, &y, &mut d);
        Self::new(x, y, d)
    }

    /// Shape-preserving interpolant built from data only (PCHIP slopes).
    pub fn pchip(x: Vec<f64>, y: Vec<f64>) -> Self {
        let d = pchip_slopes(&x, &y);
        Self::new(x, y, d)
    }

    pub fn x_min(&self) -> f64 {
        self.x[0]
    }

    pub fn x_max(&self) -> f64 {
        *self.x.last().unwrap()
    }

    fn locate(&self, xq: f64) -> usize {
        let n = self.x.len();
        // uniform fast path
        let h = (self.x[n - 1] - self.x[0]) / (n - 1) as f64;
        let guess = ((xq - self.x[0]) / h).floor();
        if guess.is_finite() {
            let mut i = (guess.max(0.0) as usize).min(n - 2);
            if self.x[i] <= xq && xq <= self.x[i + 1] {
                return i;
            }
            // nudge for rounding or non-uniform knots
            if i + 2 < n && xq > self.x[i + 1] && xq <= self.x[i + 2] {
                i += 1;
                return i;
            }
            if i > 0 && xq < self.x[i] && xq >= self.x[i - 1] {
                return i - 1;
            }
        }
        match self.x.partition_point(|&v| v <= xq) {
            0 => 0,
            p => (p - 1).min(n - 2),
        }
    }

    /// Value and derivative; extrapolates with the end cubic (callers clamp).
    pub fn eval_with_slope(&self, xq: f64) -> (f64, f64) {
        let i = self.locate(xq);
        let dx = self.x[i + 1] - self.x[i];
        let t = (xq - self.x[i]) / dx;
        hermite_segment(self.y[i], self.y[i + 1], self.d[i], self.d[i + 1], dx, t)
    }

    pub fn eval(&self, xq: f64) -> f64 {
        self.eval_with_slope(xq).0
    }
}

/// Fritsch–Carlson limiter applied in place.
pub fn limit_slopes(x: &[f64], y: &[f64], d: &mut [f64]) {
    let n = x.len();
    for i in 0..n - 1 {
        let delta = (y[i + 1] - y[i]) / (x[i + 1] - x[i]);
        if delta == 0.0 {
            d[i] = 0.0;
            d[i + 1] = 0.0;
            continue;
        }
        if d[i].signum() != delta.signum() && d[i] != 0.0 {
            d[i] = 0.0;
        }
        if d[i + 1].signum() != delta.signum() && d[i + 1] != 0.0 {
            d[i + 1] = 0.0;
        }
        let a = d[i] / delta;
        let b = d[i + 1] / delta;
        let s = a * a + b * b;
        if s > 9.0 {
            let tau = 3.0 / s.sqrt();
            d[i] = tau * a * delta;
            d[i + 1] = tau * b * delta;
        }
    }
}

/// Fritsch–Butland weighted harmonic slopes with one-sided ends.
pub fn pchip_slopes(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len();
    let mut d = vec![0.0; n];
    let hs: Vec<f64> = x.windows(2).map(|w| w[1] - w[0]).collect();
    let del: Vec<f64> = (0..n - 1).map(|i| (y[i + 1] - y[i]) / hs[i]).collect();
    if n == 2 {
        d[0] = del[0];
        d[1] = del[0];
        return d;
    }
    for i in 1..n - 1 {
        if del[i - 1] * del[i] <= 0.0 {
            d[i] = 0.0;
        } else {
            let w1 = 2.0 * hs[i] + hs[i - 1];
            let w2 = hs[i] + 2.0 * hs[i - 1];
            d[i] = (w1 + w2) / (w1 / del[i - 1] + w2 / del[i]);
        }
    }
    d[0] = end_slope(hs[0], hs[1], del[0], del[1]);
    d[n - 1] = end_slope(hs[n - 2], hs[n - 3], del[n - 2], del[n - 3]);
    d
}

fn end_slope(h0: f64, h1: f64, del0: f64, del1: f64) -> f64 {
    let d = ((2.0 * h0 + h1) * del0 - h0 * del1) / (h0 + h1);
    if d.signum() != del0.signum() {
        0.0
    } else if del0.signum() != del1.signum() && d.abs() > 3.0 * del0.abs() {
        3.0 * del0
    } else {
        d
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blends_hit_endpoints_and_midpoint() {
        for k in [BlendKind::Quintic, BlendKind::Cubic, BlendKind::Linear] {
            assert_eq!(k.value(0.0), 0.0);
            assert_eq!(k.value(1.0), 1.0);
            assert!((k.value(0.5) - 0.5).abs() < 1e-15);
            assert_eq!(k.value(-3.0), 0.0);
            assert_eq!(k.value(7.0), 1.0);
        }
        assert_eq!(BlendKind::Quintic.slope(0.0), 0.0);
        assert_eq!(BlendKind::Quintic.curvature(1.0), 0.0);
    }

    #[test]
    fn blend_derivatives_match_finite_differences() {
        let e = 1e-6;
        for k in [BlendKind::Quintic, BlendKind::Cubic] {
            for i in 1..20 {
                let s = i as f64 / 20.0;
                let fd = (k.value(s + e) - k.value(s - e)) / (2.0 * e);
                assert!((fd - k.slope(s)).abs() < 1e-8);
                let fd2 = (k.slope(s + e) - k.slope(s - e)) / (2.0 * e);
                assert!((fd2 - k.curvature(s)).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn hermite_reproduces_cubics() {
        let p = |x: f64| 0.3 * x * x * x - x * x + 2.0;
        let dp = |x: f64| 0.9 * x * x - 2.0 * x;
        let x: Vec<f64> = (0..7).map(|i| i as f64 * 0.7 - 1.0).collect();
        let y = x.iter().map(|&v| p(v)).collect();
        let d = x.iter().map(|&v| dp(v)).collect();
        let h = Hermite::new(x, y, d);
        for i in 0..50 {
            let q = -1.0 + 4.2 * i as f64 / 49.0;
            let (v, dv) = h.eval_with_slope(q);
            assert!((v - p(q)).abs() < 1e-12);
            assert!((dv - dp(q)).abs() < 1e-11);
        }
    }

    #[test]
    fn pchip_keeps_step_data_monotone() {
        let x: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let y = vec![0.0, 0.0, 0.0, 0.01, 0.5, 0.99, 1.0, 1.0, 1.0, 1.0];
        let h = Hermite::pchip(x, y);
        let mut prev = -1.0;
        for i in 0..=900 {
            let v = h.eval(i as f64 * 0.01);
            assert!(v >= prev - 1e-15);
            assert!((-1e-15..=1.0 + 1e-15).contains(&v));
            prev = v;
        }
    }

    #[test]
    fn nodes_are_reproduced_exactly() {
        let x: Vec<f64> = (0..11).map(|i| -5.0 + i as f64).collect();
        let y: Vec<f64> = x.iter().map(|v: &f64| v.tanh()).collect();
        let h = Hermite::pchip(x.clone(), y.clone());
        for (a, b) in x.iter().zip(&y) {
            assert_eq!(h.eval(*a), *b);
        }
    }
}
