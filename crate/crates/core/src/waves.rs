//! Traveling-wave profiles `φ'' - cφ' + f(φ) = 0`, `φ(-∞)=0`, `φ(+∞)=1`, `φ(0)=θ`.
//!
//! Nodes right of the origin carry `1 - φ` as the unknown so the upper tail
//! keeps its relative precision far beyond `1 - φ ≈ 1e-16`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interp::Hermite;
use crate::linalg::BandMatrix;
use crate::reaction::{validate_bistable, BistableNonlinearity, VALIDATION_POINTS};

/// Hard floor on the domain length in a-priori decay lengths.
pub const MIN_DECAY_LENGTHS: f64 = 20.0;
/// Below this many decay lengths a warning is logged.
pub const RECOMMENDED_DECAY_LENGTHS: f64 = 40.0;

const MAX_NEWTON: usize = 60;
const NEWTON_TOL: f64 = 1e-11;

/// Exponential sandwich constants of a profile and its derivative.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct EnvelopeConstants {
    pub alpha0: f64,
    pub beta0: f64,
    pub alpha1: f64,
    pub beta1: f64,
    pub gamma0: f64,
    pub delta0: f64,
    pub gamma1: f64,
    pub delta1: f64,
    /// Grid range used for the `z ≤ 0` constants.
    pub left_range: (f64, f64),
    /// Grid range used for the `z > 0` constants.
    pub right_range: (f64, f64),
}

/// Solved front with its speed, decay rates and interpolants.
#[derive(Debug, Clone)]
pub struct WaveProfile {
    pub speed: f64,
    pub h: f64,
    pub z: Vec<f64>,
    pub phi: Vec<f64>,
    /// `1 - φ`, stored separately for precision in the upper tail.
    pub gap: Vec<f64>,
    pub dphi: Vec<f64>,
    pub theta: f64,
    pub lambda: f64,
    pub mu: f64,
    pub residual_norm: f64,
    /// Smallest constant with `1 - φ(z) ≤ C·e^{-μz}` on the grid.
    pub c_phi: f64,
    pub envelope: EnvelopeConstants,
    pub newton_iterations: usize,
    pub used_shooting_fallback: bool,
    lower_interp: Hermite,
    gap_interp: Hermite,
}

/// Scalar metadata of a profile, the JSON sidecar of the CSV export.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct WaveSummary {
    pub speed: f64,
    pub h: f64,
    pub z_min: f64,
    pub z_max: f64,
    pub nodes: usize,
    pub theta: f64,
    pub lambda: f64,
    pub mu: f64,
    pub residual_norm: f64,
    pub c_phi: f64,
    pub envelope: EnvelopeConstants,
    pub newton_iterations: usize,
    pub used_shooting_fallback: bool,
}

impl WaveProfile {
    /// Assembles a profile from nodal data and derives interpolants and constants.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        z: Vec<f64>,
        phi: Vec<f64>,
        gap: Vec<f64>,
        dphi: Vec<f64>,
        speed: f64,
        theta: f64,
        lambda: f64,
        mu: f64,
        residual_norm: f64,
    ) -> Result<Self> {
        let n = z.len();
        if n < 8 || phi.len() != n || gap.len() != n || dphi.len() != n {
            return Err(Error::Config(
                "profile arrays must share a length of at least 8".into(),
            ));
        }
        let h = (z[n - 1] - z[0]) / (n - 1) as f64;
        let lower_interp = Hermite::monotone_with_slopes(z.clone(), phi.clone(), dphi.clone());
        let gap_interp = Hermite::monotone_with_slopes(
            z.clone(),
            gap.clone(),
            dphi.iter().map(|d| -d).collect(),
        );
        let placeholder = EnvelopeConstants {
            alpha0: 0.0,
            beta0: 0.0,
            alpha1: 0.0,
            beta1: 0.0,
            gamma0: 0.0,
            delta0: 0.0,
            gamma1: 0.0,
            delta1: 0.0,
            left_range: (0.0, 0.0),
            right_range: (0.0, 0.0),
        };
        let mut p = Self {
            speed,
            h,
            z,
            phi,
            gap,
            dphi,
            theta,
            lambda,
            mu,
            residual_norm,
            c_phi: 0.0,
            envelope: placeholder,
            newton_iterations: 0,
            used_shooting_fallback: false,
            lower_interp,
            gap_interp,
        };
        p.envelope = fit_envelope_constants(&p);
        p.c_phi =
            p.z.iter()
                .zip(&p.gap)
                .map(|(&z, &g)| g * (p.mu * z).exp())
                .fold(0.0, f64::max);
        Ok(p)
    }

    pub fn z_min(&self) -> f64 {
        self.z[0]
    }

    pub fn z_max(&self) -> f64 {
        *self.z.last().unwrap()
    }

    /// `φ(z)` with exponential tails outside the grid.
    pub fn eval(&self, z: f64) -> f64 {
        if z < self.z_min() {
            self.phi[0] * (self.lambda * (z - self.z_min())).exp()
        } else if z <= 0.0 {
            self.lower_interp.eval(z)
        } else {
            1.0 - self.eval_gap(z)
        }
    }

    /// `1 - φ(z)` without cancellation in the upper tail.
    pub fn eval_gap(&self, z: f64) -> f64 {
        if z > self.z_max() {
            *self.gap.last().unwrap() * (-self.mu * (z - self.z_max())).exp()
        } else if z > 0.0 {
            self.gap_interp.eval(z)
        } else {
            1.0 - self.eval(z)
        }
    }

    /// `φ'(z)`.
    pub fn eval_slope(&self, z: f64) -> f64 {
        if z < self.z_min() {
            self.lambda * self.eval(z)
        } else if z > self.z_max() {
            self.mu * self.eval_gap(z)
        } else if z <= 0.0 {
            self.lower_interp.eval_with_slope(z).1
        } else {
            -self.gap_interp.eval_with_slope(z).1
        }
    }

    pub fn summary(&self) -> WaveSummary {
        WaveSummary {
            speed: self.speed,
            h: self.h,
            z_min: self.z_min(),
            z_max: self.z_max(),
            nodes: self.z.len(),
            theta: self.theta,
            lambda: self.lambda,
            mu: self.mu,
            residual_norm: self.residual_norm,
            c_phi: self.c_phi,
            envelope: self.envelope,
            newton_iterations: self.newton_iterations,
            used_shooting_fallback: self.used_shooting_fallback,
        }
    }
}

pub fn eval_profile(p: &WaveProfile, z: f64) -> f64 {
    p.eval(z)
}

/// Positive roots of `λ² - cλ + f'(0) = 0` and `μ² + cμ + f'(1) = 0`.
pub fn decay_rates(f: &BistableNonlinearity, c: f64) -> Result<(f64, f64)> {
    rates_from_slopes(f.derivative_at_0, f.derivative_at_1, c)
}

pub fn rates_from_slopes(d0: f64, d1: f64, c: f64) -> Result<(f64, f64)> {
    if !(d0 < 0.0 && d1 < 0.0) {
        return Err(Error::Precondition(format!(
            "endpoint derivatives must be negative, got f'(0) = {d0}, f'(1) = {d1}"
        )));
    }
    let lambda = 0.5 * (c + (c * c - 4.0 * d0).sqrt());
    let mu = 0.5 * (-c + (c * c - 4.0 * d1).sqrt());
    Ok((lambda, mu))
}

/// Extremal ratios of `φ`, `1-φ` and `φ'` against their exponential tails.
///
/// A node enters a fit only while the quantity stays above `1e-280`, so the
/// ranges reported are the ones actually used.
pub fn fit_envelope_constants(p: &WaveProfile) -> EnvelopeConstants {
    const FLOOR: f64 = 1e-280;
    let mut a0 = (f64::INFINITY, 0.0f64);
    let mut g0 = (f64::INFINITY, 0.0f64);
    let mut a1 = (f64::INFINITY, 0.0f64);
    let mut g1 = (f64::INFINITY, 0.0f64);
    let mut left = (f64::INFINITY, f64::NEG_INFINITY);
    let mut right = (f64::INFINITY, f64::NEG_INFINITY);
    for i in 0..p.z.len() {
        let z = p.z[i];
        if z <= 0.0 {
            if p.phi[i] < FLOOR || p.dphi[i] < FLOOR {
                continue;
            }
            let w = (-p.lambda * z).exp();
            let r = p.phi[i] * w;
            let d = p.dphi[i] * w;
            a0 = (a0.0.min(r), a0.1.max(r));
            g0 = (g0.0.min(d), g0.1.max(d));
            left = (left.0.min(z), left.1.max(z));
        } else {
            if p.gap[i] < FLOOR || p.dphi[i] < FLOOR {
                continue;
            }
            let w = (p.mu * z).exp();
            let r = p.gap[i] * w;
            let d = p.dphi[i] * w;
            a1 = (a1.0.min(r), a1.1.max(r));
            g1 = (g1.0.min(d), g1.1.max(d));
            right = (right.0.min(z), right.1.max(z));
        }
    }
    EnvelopeConstants {
        alpha0: a0.0,
        beta0: a0.1,
        alpha1: a1.0,
        beta1: a1.1,
        gamma0: g0.0,
        delta0: g0.1,
        gamma1: g1.0,
        delta1: g1.1,
        left_range: left,
        right_range: right,
    }
}

// Finite-difference stencil with integer weights over a common denominator.
struct Stencil {
    offsets: &'static [isize],
    weights: &'static [f64],
}

const D2_FOURTH: Stencil = Stencil {
    offsets: &[-2, -1, 0, 1, 2],
    weights: &[-1.0, 16.0, -30.0, 16.0, -1.0],
};
const D1_FOURTH: Stencil = Stencil {
    offsets: &[-2, -1, 0, 1, 2],
    weights: &[1.0, -8.0, 0.0, 8.0, -1.0],
};
const D2_SECOND: Stencil = Stencil {
    offsets: &[-1, 0, 1],
    weights: &[1.0, -2.0, 1.0],
};
const D1_SECOND: Stencil = Stencil {
    offsets: &[-1, 0, 1],
    weights: &[-1.0, 0.0, 1.0],
};

/// Nodal unknowns: `φ` up to the origin node, `1-φ` after it.
#[derive(Clone, Copy)]
struct Layout {
    n: usize,
    k0: usize,
}

impl Layout {
    #[inline]
    fn upper(&self, i: usize) -> bool {
        i > self.k0
    }
    #[inline]
    fn sign(&self, i: usize) -> f64 {
        if self.upper(i) {
            -1.0
        } else {
            1.0
        }
    }
    /// `Σ w_j φ_{i+j}` where the constant parts of upper nodes are summed first (exactly).
    fn apply(&self, s: &Stencil, y: &[f64], i: usize) -> f64 {
        let mut constant = 0.0;
        let mut varying = 0.0;
        for (&o, &w) in s.offsets.iter().zip(s.weights) {
            let j = (i as isize + o) as usize;
            if self.upper(j) {
                constant += w;
                varying -= w * y[j];
            } else {
                varying += w * y[j];
            }
        }
        constant + varying
    }
    fn phi(&self, y: &[f64], i: usize) -> f64 {
        if self.upper(i) {
            1.0 - y[i]
        } else {
            y[i]
        }
    }
    fn gap(&self, y: &[f64], i: usize) -> f64 {
        if self.upper(i) {
            y[i]
        } else {
            1.0 - y[i]
        }
    }
}

struct WaveSystem<'a> {
    f: &'a BistableNonlinearity,
    lay: Layout,
    h: f64,
    theta: f64,
}

impl WaveSystem<'_> {
    fn reaction(&self, y: &[f64], i: usize) -> (f64, f64) {
        if self.lay.upper(i) {
            (self.f.value_near_one(y[i]), self.f.slope(1.0 - y[i]))
        } else {
            (self.f.value(y[i]), self.f.slope(y[i]))
        }
    }

    fn stencils(&self, i: usize) -> (&'static Stencil, &'static Stencil, f64, f64) {
        let n = self.lay.n;
        let h = self.h;
        if i >= 2 && i + 2 < n {
            (&D2_FOURTH, &D1_FOURTH, 12.0 * h * h, 12.0 * h)
        } else {
            (&D2_SECOND, &D1_SECOND, h * h, 2.0 * h)
        }
    }

    fn continuity_row(&self, i: usize) -> usize {
        if i < self.lay.k0 {
            2 * i + 1
        } else {
            2 * i + 3
        }
    }

    // state vector: x[2i] nodal unknown, x[2i+1] speed copy at node i
    fn residual(&self, x: &[f64]) -> Vec<f64> {
        let Layout { n, k0 } = self.lay;
        let y: Vec<f64> = (0..n).map(|i| x[2 * i]).collect();
        let mut r = vec![0.0; 2 * n];
        let (d0, d1) = (self.f.derivative_at_0, self.f.derivative_at_1);
        let h = self.h;
        // left Robin closure
        let c0 = x[1];
        let (lam, _) = rates_from_slopes(d0, d1, c0).expect("validated slopes");
        r[0] = (-3.0 * y[0] + 4.0 * y[1] - y[2]) / (2.0 * h) - lam * y[0];
        // right Robin closure, written for the gap
        let cn = x[2 * n - 1];
        let (_, mu) = rates_from_slopes(d0, d1, cn).expect("validated slopes");
        r[2 * (n - 1)] = (3.0 * y[n - 1] - 4.0 * y[n - 2] + y[n - 3]) / (2.0 * h) + mu * y[n - 1];
        for i in 1..n - 1 {
            let (s2, s1, q2, q1) = self.stencils(i);
            let lap = self.lay.apply(s2, &y, i) / q2;
            let grad = self.lay.apply(s1, &y, i) / q1;
            r[2 * i] = lap - x[2 * i + 1] * grad + self.reaction(&y, i).0;
        }
        for i in 0..n - 1 {
            r[self.continuity_row(i)] = x[2 * i + 3] - x[2 * i + 1];
        }
        r[2 * k0 + 1] = y[k0] - self.theta;
        r
    }

    fn jacobian(&self, x: &[f64]) -> BandMatrix {
        let Layout { n, k0 } = self.lay;
        let y: Vec<f64> = (0..n).map(|i| x[2 * i]).collect();
        let h = self.h;
        let mut m = BandMatrix::zeros(2 * n, 4, 4);
        let (d0, d1) = (self.f.derivative_at_0, self.f.derivative_at_1);

        let c0 = x[1];
        let disc0 = (c0 * c0 - 4.0 * d0).sqrt();
        let lam = 0.5 * (c0 + disc0);
        let dlam = 0.5 * (1.0 + c0 / disc0);
        m.add(0, 0, -3.0 / (2.0 * h) - lam);
        m.add(0, 2, 4.0 / (2.0 * h));
        m.add(0, 4, -1.0 / (2.0 * h));
        m.add(0, 1, -dlam * y[0]);

        let cn = x[2 * n - 1];
        let disc1 = (cn * cn - 4.0 * d1).sqrt();
        let mu = 0.5 * (-cn + disc1);
        let dmu = 0.5 * (-1.0 + cn / disc1);
        let row = 2 * (n - 1);
        m.add(row, row, 3.0 / (2.0 * h) + mu);
        m.add(row, row - 2, -4.0 / (2.0 * h));
        m.add(row, row - 4, 1.0 / (2.0 * h));
        m.add(row, row + 1, dmu * y[n - 1]);

        for i in 1..n - 1 {
            let (s2, s1, q2, q1) = self.stencils(i);
            let c = x[2 * i + 1];
            for k in 0..s2.offsets.len() {
                let j = (i as isize + s2.offsets[k]) as usize;
                let coef = (s2.weights[k] / q2 - c * s1.weights[k] / q1) * self.lay.sign(j);
                m.add(2 * i, 2 * j, coef);
            }
            let slope = self.reaction(&y, i).1;
            m.add(2 * i, 2 * i, slope * self.lay.sign(i));
            let grad = self.lay.apply(s1, &y, i) / q1;
            m.add(2 * i, 2 * i + 1, -grad);
        }
        for i in 0..n - 1 {
            let r = self.continuity_row(i);
            m.add(r, 2 * i + 1, -1.0);
            m.add(r, 2 * i + 3, 1.0);
        }
        m.add(2 * k0 + 1, 2 * k0, 1.0);
        m
    }
}

fn max_abs(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |a, b| a.max(b.abs()))
}

fn sum_sq(v: &[f64]) -> f64 {
    v.iter().map(|a| a * a).sum()
}

struct NewtonOutcome {
    x: Vec<f64>,
    iterations: usize,
    residual: f64,
    converged: bool,
}

fn newton(sys: &WaveSystem, mut x: Vec<f64>) -> NewtonOutcome {
    let mut r = sys.residual(&x);
    let mut norm2 = sum_sq(&r);
    for it in 0..MAX_NEWTON {
        let res = max_abs(&r);
        if res <= NEWTON_TOL {
            return NewtonOutcome {
                x,
                iterations: it,
                residual: res,
                converged: true,
            };
        }
        let lu = match sys.jacobian(&x).factor() {
            Ok(lu) => lu,
            Err(_) => {
                return NewtonOutcome {
                    x,
                    iterations: it,
                    residual: res,
                    converged: false,
                }
            }
        };
        let dx = lu.solve(&r);
        // Armijo backtracking on ½‖R‖²
        let mut alpha = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let trial: Vec<f64> = x.iter().zip(&dx).map(|(a, d)| a - alpha * d).collect();
            let rt = sys.residual(&trial);
            let nt = sum_sq(&rt);
            if nt.is_finite() && nt <= norm2 * (1.0 - 2e-4 * alpha) {
                x = trial;
                r = rt;
                norm2 = nt;
                accepted = true;
                break;
            }
            alpha *= 0.5;
        }
        if !accepted {
            // stagnation: accept a full step only if it is already at round-off level
            let step = max_abs(&dx);
            let converged = step <= 1e-12 && res <= 1e-8;
            return NewtonOutcome {
                x,
                iterations: it + 1,
                residual: res,
                converged,
            };
        }
    }
    let res = max_abs(&r);
    NewtonOutcome {
        x,
        iterations: MAX_NEWTON,
        residual: res,
        converged: res <= NEWTON_TOL,
    }
}

/// RK4 shot from the left asymptote; +1 overshoots the upper state, -1 turns back below it.
fn shoot(
    f: &BistableNonlinearity,
    c: f64,
    h: f64,
    max_len: f64,
    record: bool,
) -> (i8, Vec<(f64, f64, f64)>) {
    let (lam, _) =
        rates_from_slopes(f.derivative_at_0, f.derivative_at_1, c).expect("validated slopes");
    let mut phi = 1e-9;
    let mut psi = lam * phi;
    let mut z = 0.0;
    let mut path = Vec::new();
    let rhs = |p: f64, q: f64| (q, c * q - f.value(p));
    let steps = (max_len / h).ceil() as usize;
    for _ in 0..steps {
        if record {
            path.push((z, phi, psi));
        }
        let (k1a, k1b) = rhs(phi, psi);
        let (k2a, k2b) = rhs(phi + 0.5 * h * k1a, psi + 0.5 * h * k1b);
        let (k3a, k3b) = rhs(phi + 0.5 * h * k2a, psi + 0.5 * h * k2b);
        let (k4a, k4b) = rhs(phi + h * k3a, psi + h * k3b);
        phi += h / 6.0 * (k1a + 2.0 * k2a + 2.0 * k3a + k4a);
        psi += h / 6.0 * (k1b + 2.0 * k2b + 2.0 * k3b + k4b);
        z += h;
        if phi >= 1.0 {
            return (1, path);
        }
        if psi <= 0.0 {
            return (-1, path);
        }
    }
    (-1, path)
}

/// Bisection on the speed by the shooting sign; returns the speed and a seed state.
fn shooting_seed(
    f: &BistableNonlinearity,
    lay: Layout,
    h: f64,
    z_min: f64,
    theta: f64,
) -> Option<(f64, Vec<f64>)> {
    let max_len = 4.0 * (lay.n as f64) * h;
    let sh = h.min(0.02);
    let mut lo = 0.0;
    let mut hi = 1.0;
    let mut tries = 0;
    while shoot(f, hi, sh, max_len, false).0 < 0 {
        lo = hi;
        hi *= 2.0;
        tries += 1;
        if tries > 30 {
            return None;
        }
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if shoot(f, mid, sh, max_len, false).0 > 0 {
            hi = mid;
        } else {
            lo = mid;
        }
        if hi - lo < 1e-12 {
            break;
        }
    }
    let c = 0.5 * (lo + hi);
    let (_, path) = shoot(f, lo, sh, max_len, true);
    if path.len() < 2 {
        return None;
    }
    // place the θ crossing at the origin
    let k = path.iter().position(|p| p.1 >= theta)?;
    if k == 0 {
        return None;
    }
    let (za, pa, _) = path[k - 1];
    let (zb, pb, _) = path[k];
    let shift = za + (theta - pa) / (pb - pa) * (zb - za);
    let (z_first, p_first, _) = path[0];
    let last = *path.last().unwrap();
    let (lam, mu) = rates_from_slopes(f.derivative_at_0, f.derivative_at_1, c).ok()?;
    let mut x = vec![0.0; 2 * lay.n];
    for i in 0..lay.n {
        let zg = z_min + i as f64 * h + shift;
        let val = if zg <= z_first {
            p_first * (lam * (zg - z_first)).exp()
        } else if zg >= last.0 {
            1.0 - (1.0 - last.1).max(1e-12) * (-mu * (zg - last.0)).exp()
        } else {
            let j = (((zg - z_first) / sh) as usize).min(path.len() - 2);
            let t = (zg - path[j].0) / (path[j + 1].0 - path[j].0);
            path[j].1 + t * (path[j + 1].1 - path[j].1)
        };
        let val = val.clamp(0.0, 1.0);
        x[2 * i] = if lay.upper(i) { 1.0 - val } else { val };
        x[2 * i + 1] = c;
    }
    Some((c, x))
}

/// Second-order residual `max |φ'' - cφ' + f(φ)|` over interior nodes.
pub fn second_order_residual(
    f: &BistableNonlinearity,
    c: f64,
    h: f64,
    phi: &[f64],
    gap: &[f64],
    k0: usize,
) -> f64 {
    let n = phi.len();
    let lay = Layout { n, k0 };
    let y: Vec<f64> = (0..n)
        .map(|i| if lay.upper(i) { gap[i] } else { phi[i] })
        .collect();
    let mut worst = 0.0f64;
    for i in 1..n - 1 {
        let lap = lay.apply(&D2_SECOND, &y, i) / (h * h);
        let grad = lay.apply(&D1_SECOND, &y, i) / (2.0 * h);
        let reac = if lay.upper(i) {
            f.value_near_one(y[i])
        } else {
            f.value(y[i])
        };
        worst = worst.max((lap - c * grad + reac).abs());
    }
    worst
}

/// Damped Newton on a fourth-order collocation of the wave equation with the
/// speed as an extra unknown, Robin closures from the linearized tails and a
/// shooting fallback for the speed.
pub fn solve_wave(
    f: &BistableNonlinearity,
    z_min: f64,
    z_max: f64,
    h: f64,
    tol: f64,
) -> Result<WaveProfile> {
    if f.potential_at_1.is_nan() || f.potential_at_1 <= 0.0 {
        return Err(Error::Precondition(format!(
            "integral of f over [0,1] is {} but must be positive for a positive speed",
            f.potential_at_1
        )));
    }
    let rep = validate_bistable(f, VALIDATION_POINTS, 1e-9)?;
    if !rep.passed {
        let failed: Vec<_> = rep
            .checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| c.detail.clone())
            .collect();
        return Err(Error::Precondition(format!(
            "nonlinearity is not bistable: {}",
            failed.join("; ")
        )));
    }
    let theta = f.theta()?;
    if !(h > 0.0 && h <= 0.1) {
        return Err(Error::Precondition(format!(
            "wave grid spacing must lie in (0, 0.1], got {h}"
        )));
    }
    if !(tol > 0.0) {
        return Err(Error::Config(format!(
            "solver tolerance must be positive, got {tol}"
        )));
    }
    if !(z_min < 0.0 && z_max > 0.0) {
        return Err(Error::Precondition(
            "wave domain must contain the origin in its interior".into(),
        ));
    }
    let k0f = -z_min / h;
    let k0 = k0f.round() as usize;
    let nf = (z_max - z_min) / h;
    let n = nf.round() as usize + 1;
    if (k0f - k0 as f64).abs() > 1e-8 || (nf - nf.round()).abs() > 1e-8 {
        return Err(Error::Config(format!(
            "domain [{z_min}, {z_max}] is not aligned with spacing {h} through the origin"
        )));
    }
    if k0 < 4 || n < k0 + 5 {
        return Err(Error::Precondition(
            "wave domain too short on one side of the origin".into(),
        ));
    }
    let decay_len = 1.0 / (-f.derivative_at_0).sqrt().min((-f.derivative_at_1).sqrt());
    let lengths = (z_max - z_min) / decay_len;
    if lengths < MIN_DECAY_LENGTHS {
        return Err(Error::Precondition(format!(
            "wave domain spans {lengths:.1} decay lengths, at least {MIN_DECAY_LENGTHS} required"
        )));
    }
    if lengths < RECOMMENDED_DECAY_LENGTHS {
        log::warn!("wave domain spans only {lengths:.1} decay lengths");
    }

    let lay = Layout { n, k0 };
    let sys = WaveSystem { f, lay, h, theta };
    // logistic guess with unit slope, φ(0) = θ, zero speed
    let zs = ((1.0 - theta) / theta).ln();
    let mut x0 = vec![0.0; 2 * n];
    for i in 0..n {
        let z = z_min + i as f64 * h;
        x0[2 * i] = if lay.upper(i) {
            logistic(zs - z)
        } else {
            logistic(z - zs)
        };
    }
    x0[2 * k0] = theta;

    let mut outcome = newton(&sys, x0);
    let mut used_fallback = false;
    if !outcome.converged {
        log::info!("newton from the logistic guess stalled, trying the shooting seed");
        used_fallback = true;
        if let Some((_, seed)) = shooting_seed(f, lay, h, z_min, theta) {
            let second = newton(&sys, seed);
            outcome = NewtonOutcome {
                iterations: outcome.iterations + second.iterations,
                ..second
            };
        }
    }
    let last_speed = outcome.x[1];
    if !outcome.converged {
        return Err(non_convergence(
            &lay,
            &outcome,
            last_speed,
            "newton stagnated after speed bisection fallback",
        ));
    }
    let x = &outcome.x;
    let y: Vec<f64> = (0..n).map(|i| x[2 * i]).collect();
    let speed = (0..n).map(|i| x[2 * i + 1]).sum::<f64>() / n as f64;
    let z: Vec<f64> = (0..n).map(|i| (i as f64 - k0 as f64) * h).collect();
    let phi: Vec<f64> = (0..n).map(|i| lay.phi(&y, i)).collect();
    let gap: Vec<f64> = (0..n).map(|i| lay.gap(&y, i)).collect();
    // slopes from the same split stencils
    let mut dphi = vec![0.0; n];
    for (i, d) in dphi.iter_mut().enumerate() {
        *d = if i >= 2 && i + 2 < n {
            lay.apply(&D1_FOURTH, &y, i) / (12.0 * h)
        } else if i == 0 || i == 1 {
            let yy = |j: usize| y[j];
            (-3.0 * yy(i) + 4.0 * yy(i + 1) - yy(i + 2)) / (2.0 * h)
        } else {
            -(3.0 * y[i] - 4.0 * y[i - 1] + y[i - 2]) / (2.0 * h)
        };
    }
    for i in 1..n - 1 {
        let ok = phi[i] > 0.0 && gap[i] > 0.0 && dphi[i] > 0.0;
        if !ok {
            return Err(non_convergence(
                &lay,
                &outcome,
                speed,
                &format!("converged state is not a monotone front at z = {}", z[i]),
            ));
        }
    }
    let residual_norm = second_order_residual(f, speed, h, &phi, &gap, k0);
    let (lambda, mu) = decay_rates(f, speed)?;
    let mut p =
        WaveProfile::from_parts(z, phi, gap, dphi, speed, theta, lambda, mu, residual_norm)?;
    p.newton_iterations = outcome.iterations;
    p.used_shooting_fallback = used_fallback;
    if residual_norm > tol + 10.0 * h * h {
        log::warn!(
            "wave residual {residual_norm:e} exceeds tolerance {tol:e} plus the O(h^2) allowance"
        );
    }
    Ok(p)
}

fn non_convergence(lay: &Layout, o: &NewtonOutcome, last_speed: f64, reason: &str) -> Error {
    let y: Vec<f64> = (0..lay.n).map(|i| o.x[2 * i]).collect();
    Error::NonConvergence {
        iterations: o.iterations,
        residual: o.residual,
        reason: reason.into(),
        last_speed,
        last_iterate: (0..lay.n).map(|i| lay.phi(&y, i)).collect(),
    }
}

#[inline]
fn logistic(a: f64) -> f64 {
    1.0 / (1.0 + (-a).exp())
}

#[cfg(test)]
mod tests {
    use super::*;

    const K: f64 = std::f64::consts::FRAC_1_SQRT_2;

    fn exact_speed(theta: f64) -> f64 {
        (1.0 - 2.0 * theta) * K
    }

    fn cubic(theta: f64) -> BistableNonlinearity {
        BistableNonlinearity::cubic(theta, 1.0).unwrap()
    }

    // logistic normalised so that φ(0) = θ
    fn logistic_front(theta: f64, z: f64) -> f64 {
        let z0 = std::f64::consts::SQRT_2 * ((1.0 - theta) / theta).ln();
        1.0 / (1.0 + (-(z - z0) * K).exp())
    }

    #[test]
    fn rates_for_cubic_family() {
        for theta in [0.2, 0.3] {
            let f = cubic(theta);
            let (l, m) = decay_rates(&f, exact_speed(theta)).unwrap();
            assert!((l - K).abs() < 1e-12 && (m - K).abs() < 1e-12);
        }
        let (l, m) = rates_from_slopes(-1.0, -1.0, 0.0).unwrap();
        assert_eq!((l, m), (1.0, 1.0));
        assert!(rates_from_slopes(0.1, -1.0, 0.3).is_err());
    }

    #[test]
    fn solves_quarter_threshold() {
        let f = cubic(0.25);
        let p = solve_wave(&f, -60.0, 60.0, 0.05, 1e-8).unwrap();
        assert!(
            (p.speed - exact_speed(0.25)).abs() < 1e-6,
            "c = {}",
            p.speed
        );
        assert!((p.eval(0.0) - 0.25).abs() < 1e-12);
        let err =
            p.z.iter()
                .map(|&z| (p.eval(z) - logistic_front(0.25, z)).abs())
                .fold(0.0, f64::max);
        assert!(err < 1e-4, "profile error {err}");
    }

    #[test]
    fn upper_tail_keeps_relative_precision() {
        let f = cubic(0.2);
        let p = solve_wave(&f, -60.0, 60.0, 0.05, 1e-8).unwrap();
        let z0 = std::f64::consts::SQRT_2 * 4.0f64.ln();
        for &z in &[20.0, 40.0, 55.0] {
            let exact_gap = 1.0 / (1.0 + ((z - z0) * K).exp());
            let rel = (p.eval_gap(z) / exact_gap - 1.0).abs();
            assert!(rel < 1e-2, "z = {z}: relative gap error {rel}");
        }
        assert!(p.gap.iter().all(|&g| g > 0.0));
    }

    #[test]
    fn logistic_envelope_constants() {
        // for the logistic family φe^{-kz} and (1-φ)e^{kz} are monotone, so the
        // extremes sit at the origin and at the infinite ends
        for theta in [0.2, 0.3] {
            let p = solve_wave(&cubic(theta), -60.0, 60.0, 0.05, 1e-8).unwrap();
            let e = p.envelope;
            let odds = theta / (1.0 - theta);
            assert!(e.alpha0 <= e.beta0 && e.alpha1 <= e.beta1);
            assert!(e.gamma0 <= e.delta0 && e.gamma1 <= e.delta1);
            assert!((e.alpha0 - theta).abs() < 1e-9);
            assert!((e.beta0 / odds - 1.0).abs() < 2e-3, "beta0 {}", e.beta0);
            assert!((p.c_phi * odds - 1.0).abs() < 2e-3, "C_phi {}", p.c_phi);
            assert!(
                (e.gamma0 - K * theta * (1.0 - theta)).abs() < 1e-6,
                "gamma0 {}",
                e.gamma0
            );
            // φ'e^{kz} increases on z > 0, so its minimum sits at the first positive node
            let zh = p.h;
            let ph = logistic_front(theta, zh);
            let g1 = K * ph * (1.0 - ph) * (K * zh).exp();
            assert!((e.gamma1 - g1).abs() < 1e-6, "gamma1 {} vs {g1}", e.gamma1);
        }
    }

    #[test]
    fn tails_outside_grid() {
        let p = solve_wave(&cubic(0.3), -40.0, 40.0, 0.1, 1e-8).unwrap();
        let v = p.eval(p.z_min() - 10.0);
        assert!(v > 0.0 && v < p.phi[0]);
        let g = p.eval_gap(p.z_max() + 10.0);
        assert!(g > 0.0 && g < *p.gap.last().unwrap());
        for (i, &z) in p.z.iter().enumerate() {
            assert_eq!(p.eval(z), p.phi[i]);
        }
    }

    #[test]
    fn nonpositive_mass_is_rejected() {
        let e = solve_wave(&cubic(0.6), -60.0, 60.0, 0.05, 1e-8);
        assert!(matches!(e, Err(Error::Precondition(_))));
    }

    #[test]
    fn coarse_spacing_is_rejected() {
        assert!(solve_wave(&cubic(0.2), -60.0, 60.0, 0.2, 1e-8).is_err());
    }

    #[test]
    fn short_domain_is_rejected() {
        assert!(matches!(
            solve_wave(&cubic(0.2), -5.0, 5.0, 0.05, 1e-8),
            Err(Error::Precondition(_))
        ));
    }

    #[test]
    fn shooting_fallback_finds_speed() {
        let f = cubic(0.2);
        let lay = Layout { n: 2401, k0: 1200 };
        let (c, _) = shooting_seed(&f, lay, 0.05, -60.0, 0.2).unwrap();
        assert!((c - exact_speed(0.2)).abs() < 1e-3, "shooting speed {c}");
    }
}
