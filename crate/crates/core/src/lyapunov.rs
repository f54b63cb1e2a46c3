//! Weighted energy of the moving-frame solution, its dissipation, and the
//! bookkeeping of the error term produced by the cutoff.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interp::BlendKind;
use crate::pde::{Frame, SimGrid, Snapshot, Trajectory};
use crate::reaction::BistableNonlinearity;

/// Integrand magnitude at the grid ends above which a truncation warning is raised.
pub const TRUNCATION_LEVEL: f64 = 1e-10;

/// Largest admissible cutoff slope, `½ min(2η/c₂, c₂)` (exclusive).
pub fn admissible_m(c2: f64, eta: f64) -> f64 {
    0.5 * (2.0 * eta / c2).min(c2)
}

/// Half of the admissible bound.
pub fn auto_m(c2: f64, eta: f64) -> f64 {
    0.5 * admissible_m(c2, eta)
}

/// `w = u` on `|z| ≤ mt`, `0` below `-mt-1`, `1` above `mt+1`, blended by a
/// quintic smoothstep on the unit strips. `None` leaves `u` untouched.
pub fn cutoff(u: &Snapshot, grid: &SimGrid, m: Option<f64>) -> Vec<f64> {
    let Some(m) = m else {
        return u.u.clone();
    };
    let a = (m * u.t).max(0.0);
    let blend = BlendKind::Quintic;
    u.u.iter()
        .enumerate()
        .map(|(i, &v)| {
            let z = grid.x(i);
            if z > a {
                let s = blend.value(z - a);
                (1.0 - s) * v + s
            } else if z < -a {
                (1.0 - blend.value(-a - z)) * v
            } else {
                v
            }
        })
        .collect()
}

fn gradient(w: &[f64], h: f64) -> Vec<f64> {
    let n = w.len();
    let mut d = vec![0.0; n];
    for i in 1..n - 1 {
        d[i] = (w[i + 1] - w[i - 1]) / (2.0 * h);
    }
    d[0] = (-3.0 * w[0] + 4.0 * w[1] - w[2]) / (2.0 * h);
    d[n - 1] = (3.0 * w[n - 1] - 4.0 * w[n - 2] + w[n - 3]) / (2.0 * h);
    d
}

/// `w_zz - c w_z + f₂(w)` at interior nodes; zero at the two ends.
pub fn elliptic_residual(w: &[f64], h: f64, c2: f64, f2: &BistableNonlinearity) -> Vec<f64> {
    let n = w.len();
    let mut e = vec![0.0; n];
    for i in 1..n - 1 {
        let wzz = (w[i + 1] - 2.0 * w[i] + w[i - 1]) / (h * h);
        let wz = (w[i + 1] - w[i - 1]) / (2.0 * h);
        e[i] = wzz - c2 * wz + f2.value(w[i]);
    }
    e
}

fn heaviside(z: f64) -> f64 {
    if z > 0.0 {
        1.0
    } else if z < 0.0 {
        0.0
    } else {
        0.5
    }
}

/// Trapezoidal quadrature with the end magnitudes of the integrand.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct Integral {
    pub value: f64,
    pub end_magnitude: f64,
    pub truncated: bool,
}

fn trapezoid(vals: &[f64], h: f64) -> Integral {
    let n = vals.len();
    let mut s = 0.5 * (vals[0] + vals[n - 1]);
    for v in &vals[1..n - 1] {
        s += v;
    }
    let end = vals[0].abs().max(vals[n - 1].abs());
    Integral {
        value: s * h,
        end_magnitude: end,
        truncated: end > TRUNCATION_LEVEL,
    }
}

/// `∫ e^{-c₂z} (½ w_z² - F₂(w) + H(z) F₂(1)) dz`.
pub fn eval_l(w: &[f64], grid: &SimGrid, c2: f64, f2: &BistableNonlinearity) -> Integral {
    let wz = gradient(w, grid.h);
    let f_one = f2.potential(1.0);
    let vals: Vec<f64> = (0..w.len())
        .map(|i| {
            let z = grid.x(i);
            (-c2 * z).exp() * (0.5 * wz[i] * wz[i] - f2.potential(w[i]) + heaviside(z) * f_one)
        })
        .collect();
    trapezoid(&vals, grid.h)
}

/// `∫ e^{-c₂z} (w_zz - c₂w_z + f₂(w))² dz`.
pub fn eval_q(w: &[f64], grid: &SimGrid, c2: f64, f2: &BistableNonlinearity) -> Integral {
    let e = elliptic_residual(w, grid.h, c2, f2);
    let vals: Vec<f64> = (0..w.len())
        .map(|i| (-c2 * grid.x(i)).exp() * e[i] * e[i])
        .collect();
    trapezoid(&vals, grid.h)
}

#[derive(Debug, Clone, Copy)]
pub struct LyapunovOptions {
    /// Cutoff slope; `None` evaluates the uncut field.
    pub m: Option<f64>,
    pub eta: f64,
    pub x0: f64,
    /// Level for the settling time of `|L' + Q|`.
    pub tol: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct LyapunovSeries {
    pub m: Option<f64>,
    pub times: Vec<f64>,
    pub l_values: Vec<f64>,
    pub q_values: Vec<f64>,
    pub dl_dt: Vec<f64>,
    /// `-∫ e^{-c₂z} E (∂_t w - E)` with `E` the elliptic residual.
    pub cross_terms: Vec<f64>,
    /// Part of the cross term coming from the blend strips.
    pub strip_terms: Vec<f64>,
    /// `|L' + Q - cross term|`.
    pub identity_residual: Vec<f64>,
    pub sup_abs_l: f64,
    /// `(1 + x0)/(c₂ - m)`, after which the zone no longer meets `|z| ≤ mt`.
    pub vanishing_time: Option<f64>,
    /// First time after which `|L' + Q| ≤ tol` holds for the rest of the series.
    pub settle_time: Option<f64>,
    pub tol: f64,
    /// `min Q` over the final quarter.
    pub late_min_q: f64,
    pub truncated_snapshots: usize,
}

impl LyapunovSeries {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,L,Q,dLdt,identity_residual\n");
        for k in 0..self.times.len() {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                self.times[k],
                self.l_values[k],
                self.q_values[k],
                self.dl_dt[k],
                self.identity_residual[k]
            ));
        }
        out
    }

    /// Largest `|L' + Q|` at or after `t`.
    pub fn tail_max_defect(&self, t: f64) -> f64 {
        self.times
            .iter()
            .enumerate()
            .filter(|(_, &s)| s >= t)
            .map(|(k, _)| (self.dl_dt[k] + self.q_values[k]).abs())
            .fold(0.0, f64::max)
    }
}

fn centered(values: &[f64], times: &[f64], k: usize) -> f64 {
    let n = values.len();
    let (a, b) = if k == 0 {
        (0, 1)
    } else if k + 1 >= n {
        (n - 2, n - 1)
    } else {
        (k - 1, k + 1)
    };
    (values[b] - values[a]) / (times[b] - times[a])
}

/// Energy, dissipation and cross term for every snapshot of a moving-frame run.
pub fn lyapunov_series(
    traj: &Trajectory,
    f2: &BistableNonlinearity,
    c2: f64,
    opts: LyapunovOptions,
) -> Result<LyapunovSeries> {
    if !matches!(traj.frame, Frame::Moving { .. }) {
        return Err(Error::Config(
            "the energy series needs a moving-frame trajectory".into(),
        ));
    }
    if traj.snapshots.len() < 3 {
        return Err(Error::Config(
            "the energy series needs at least three snapshots".into(),
        ));
    }
    if let Some(m) = opts.m {
        let bound = admissible_m(c2, opts.eta);
        if !(m > 0.0 && m < bound) {
            return Err(Error::Config(format!(
                "cutoff slope {m} must lie in (0, {bound})"
            )));
        }
    }
    let g = traj.grid;
    let times = traj.times();
    let fields: Vec<Vec<f64>> = traj
        .snapshots
        .par_iter()
        .map(|s| cutoff(s, &g, opts.m))
        .collect();
    let per: Vec<(Integral, Integral)> = fields
        .par_iter()
        .map(|w| (eval_l(w, &g, c2, f2), eval_q(w, &g, c2, f2)))
        .collect();
    let l_values: Vec<f64> = per.iter().map(|p| p.0.value).collect();
    let q_values: Vec<f64> = per.iter().map(|p| p.1.value).collect();
    let truncated_snapshots = per
        .iter()
        .filter(|p| p.0.truncated || p.1.truncated)
        .count();
    let n = times.len();
    let dl_dt: Vec<f64> = (0..n).map(|k| centered(&l_values, &times, k)).collect();

    let cross: Vec<(f64, f64)> = (0..n)
        .into_par_iter()
        .map(|k| {
            let (a, b) = if k == 0 {
                (0, 1)
            } else if k + 1 >= n {
                (n - 2, n - 1)
            } else {
                (k - 1, k + 1)
            };
            let span = times[b] - times[a];
            let e = elliptic_residual(&fields[k], g.h, c2, f2);
            let strip = opts.m.map(|m| (m * times[k]).max(0.0));
            let mut full = vec![0.0; g.n];
            let mut part = vec![0.0; g.n];
            for i in 0..g.n {
                let wt = (fields[b][i] - fields[a][i]) / span;
                let z = g.x(i);
                let v = -(-c2 * z).exp() * e[i] * (wt - e[i]);
                full[i] = v;
                if strip.is_some_and(|s| z.abs() > s && z.abs() < s + 1.0) {
                    part[i] = v;
                }
            }
            (trapezoid(&full, g.h).value, trapezoid(&part, g.h).value)
        })
        .collect();
    let cross_terms: Vec<f64> = cross.iter().map(|c| c.0).collect();
    let strip_terms: Vec<f64> = cross.iter().map(|c| c.1).collect();
    let identity_residual: Vec<f64> = (0..n)
        .map(|k| (dl_dt[k] + q_values[k] - cross_terms[k]).abs())
        .collect();
    let sup_abs_l = l_values.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let vanishing_time = opts.m.map(|m| (1.0 + opts.x0) / (c2 - m));
    let mut settle_time = None;
    for k in (0..n).rev() {
        if (dl_dt[k] + q_values[k]).abs() <= opts.tol {
            settle_time = Some(times[k]);
        } else {
            break;
        }
    }
    let start = (0.75 * n as f64).floor() as usize;
    let late_min_q = q_values[start.min(n - 1)..]
        .iter()
        .cloned()
        .fold(f64::INFINITY, f64::min);
    Ok(LyapunovSeries {
        m: opts.m,
        times,
        l_values,
        q_values,
        dl_dt,
        cross_terms,
        strip_terms,
        identity_residual,
        sup_abs_l,
        vanishing_time,
        settle_time,
        tol: opts.tol,
        late_min_q,
        truncated_snapshots,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::waves::solve_wave;

    fn f2() -> BistableNonlinearity {
        BistableNonlinearity::cubic(0.3, 1.0).unwrap()
    }

    fn snap(t: f64, u: Vec<f64>, c: f64) -> Snapshot {
        Snapshot {
            t,
            u,
            frame: Frame::Moving { speed: c },
        }
    }

    #[test]
    fn admissible_slope_for_the_cubic_pair() {
        let c2 = 0.4 * std::f64::consts::FRAC_1_SQRT_2;
        assert!((admissible_m(c2, 0.05) - c2 / 2.0).abs() < 1e-15);
        assert!((auto_m(c2, 0.05) - 0.0707).abs() < 1e-4);
    }

    #[test]
    fn cutoff_strips() {
        let g = SimGrid::new(-5.0, 5.0, 0.01).unwrap();
        let s = snap(10.0, vec![0.5; g.n], 0.3);
        let w = cutoff(&s, &g, Some(0.1));
        for (i, &v) in w.iter().enumerate() {
            let z = g.x(i);
            if z.abs() <= 1.0 {
                assert_eq!(v, 0.5);
            } else if z <= -2.0 {
                assert_eq!(v, 0.0);
            } else if z >= 2.0 {
                assert_eq!(v, 1.0);
            } else {
                assert!((0.0..=1.0).contains(&v));
            }
        }
        let flat: Vec<f64> = g
            .nodes()
            .iter()
            .map(|&z| if z > 0.0 { 1.0 } else { 0.0 })
            .collect();
        assert_eq!(cutoff(&snap(2.0, flat.clone(), 0.3), &g, Some(0.1)), flat);
    }

    #[test]
    fn energy_of_the_zero_state() {
        let c2 = 0.4 * std::f64::consts::FRAC_1_SQRT_2;
        let g = SimGrid::new(-20.0, 150.0, 0.01).unwrap();
        let l = eval_l(&vec![0.0; g.n], &g, c2, &f2());
        // F(1) = 1/12 - θ/6 for the cubic
        let exact = (1.0 / 12.0 - 0.3 / 6.0) / c2;
        assert!((l.value - exact).abs() < 1e-5, "{} {exact}", l.value);
        assert!((exact - 0.117851).abs() < 1e-6);
        assert_eq!(eval_q(&vec![0.0; g.n], &g, c2, &f2()).value, 0.0);
    }

    #[test]
    fn travelling_wave_has_no_dissipation() {
        let p = solve_wave(&f2(), -60.0, 60.0, 0.05, 1e-8).unwrap();
        let g = SimGrid::new(-40.0, 40.0, 0.05).unwrap();
        for beta in [-2.0, 0.0, 3.0] {
            let w: Vec<f64> = g.nodes().iter().map(|&z| p.eval(z + beta)).collect();
            let q = eval_q(&w, &g, p.speed, &f2()).value;
            assert!((0.0..=1e-6).contains(&q), "beta {beta}: {q}");
        }
    }

    #[test]
    fn energy_shift_is_affine() {
        let p = solve_wave(&f2(), -60.0, 60.0, 0.05, 1e-8).unwrap();
        let c2 = p.speed;
        let g = SimGrid::new(-50.0, 80.0, 0.05).unwrap();
        let base: Vec<f64> = g.nodes().iter().map(|&z| p.eval(z)).collect();
        let moved: Vec<f64> = g.nodes().iter().map(|&z| p.eval(z + 2.0)).collect();
        let f_one = f2().potential(1.0) / c2;
        let l0 = eval_l(&base, &g, c2, &f2()).value;
        let l1 = eval_l(&moved, &g, c2, &f2()).value;
        let predicted = f_one + (c2 * 2.0).exp() * (l0 - f_one);
        assert!(
            (l1 - predicted).abs() < 1e-4 * predicted.abs().max(1.0),
            "{l1} {predicted}"
        );
    }
}
