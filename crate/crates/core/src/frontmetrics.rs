//! Front positions, speeds, best-fit shifts, transition zones and tail decay fits.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pde::{Frame, SimGrid, Snapshot, Trajectory};
use crate::waves::WaveProfile;

/// Level used for front positions.
pub const FRONT_LEVEL: f64 = 0.5;
/// Largest L∞ distance for which a shift fit is trusted.
pub const BASIN_GUARD: f64 = 0.4;
/// Half-width of the shift search bracket around the level-crossing guess.
pub const SHIFT_BRACKET: f64 = 10.0;

/// Golden-section minimization on `[a, b]`; returns the argmin and the value.
pub fn golden_section<F: FnMut(f64) -> f64>(
    mut f: F,
    mut a: f64,
    mut b: f64,
    tol: f64,
) -> (f64, f64) {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let mut fc = f(c);
    let mut fd = f(d);
    while (b - a).abs() > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    if fc <= fd {
        (c, fc)
    } else {
        (d, fd)
    }
}

/// Unique crossing of `level`, located by linear interpolation.
pub fn front_position(u: &Snapshot, grid: &SimGrid, level: f64) -> Result<f64> {
    crossing(&u.u, grid, level).map_err(|reason| Error::Extraction { t: u.t, reason })
}

fn crossing(u: &[f64], grid: &SimGrid, level: f64) -> std::result::Result<f64, String> {
    let mut found = None;
    let mut count = 0;
    for i in 0..u.len() - 1 {
        let (a, b) = (u[i] - level, u[i + 1] - level);
        if (a < 0.0 && b >= 0.0) || (a >= 0.0 && b < 0.0) {
            count += 1;
            let s = if a == b { 0.0 } else { a / (a - b) };
            found = Some(grid.x(i) + s * grid.h);
        }
    }
    match (count, found) {
        (1, Some(x)) => Ok(x),
        (0, _) => Err(format!("no crossing of level {level}")),
        (k, _) => Err(format!("{k} crossings of level {level}")),
    }
}

/// Argument offset so that the profile is evaluated at `x + offset + β`.
fn frame_offset(profile: &WaveProfile, frame: Frame, t: f64) -> f64 {
    (profile.speed - frame.speed()) * t
}

/// Best shift `β` with `u ≈ φ(x + (c - c_frame)t + β)`: golden section on the
/// L² distance, polished by Gauss–Newton. Returns `(β, L∞ distance)`.
pub fn fit_shift(u: &Snapshot, grid: &SimGrid, profile: &WaveProfile) -> Result<(f64, f64)> {
    let off = frame_offset(profile, u.frame, u.t);
    let p = front_position(u, grid, FRONT_LEVEL).map_err(|e| Error::Fit(e.to_string()))?;
    let q = profile_level_position(profile, FRONT_LEVEL);
    let guess = q - p - off;
    let xs: Vec<f64> = grid.nodes();
    let l2 = |b: f64| -> f64 {
        xs.iter()
            .zip(&u.u)
            .map(|(&x, &v)| (v - profile.eval(x + off + b)).powi(2))
            .sum::<f64>()
            * grid.h
    };
    let (lo, hi) = (guess - SHIFT_BRACKET, guess + SHIFT_BRACKET);
    let (mut beta, _) = golden_section(l2, lo, hi, 1e-7);
    if (beta - lo).abs() < 1e-5 || (hi - beta).abs() < 1e-5 {
        return Err(Error::Fit(format!(
            "shift optimum at the bracket edge (t = {})",
            u.t
        )));
    }
    for _ in 0..8 {
        let (mut num, mut den) = (0.0, 0.0);
        for (&x, &v) in xs.iter().zip(&u.u) {
            let z = x + off + beta;
            let d = profile.eval_slope(z);
            num += (v - profile.eval(z)) * d;
            den += d * d;
        }
        if den <= 0.0 {
            break;
        }
        let step = num / den;
        beta += step;
        if step.abs() < 1e-15 {
            break;
        }
    }
    let dist = xs
        .iter()
        .zip(&u.u)
        .map(|(&x, &v)| (v - profile.eval(x + off + beta)).abs())
        .fold(0.0, f64::max);
    if dist > BASIN_GUARD {
        return Err(Error::Fit(format!(
            "snapshot at t = {} is {dist:.3} from the profile family",
            u.t
        )));
    }
    Ok((beta, dist))
}

/// Position where the profile takes `level` (bisection on the interpolant).
pub fn profile_level_position(p: &WaveProfile, level: f64) -> f64 {
    let (mut a, mut b) = (p.z_min(), p.z_max());
    for _ in 0..200 {
        let m = 0.5 * (a + b);
        if p.eval(m) < level {
            a = m;
        } else {
            b = m;
        }
    }
    0.5 * (a + b)
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq, Default)]
pub struct FrontSeries {
    pub times: Vec<f64>,
    pub positions: Vec<f64>,
    /// Centered differences; two shorter than `times`.
    pub speeds: Vec<f64>,
    pub shifts: Vec<f64>,
    pub distances: Vec<f64>,
    /// Mean speed over the last quarter of the series.
    pub terminal_speed: f64,
}

impl FrontSeries {
    /// Rows `t, position, speed, beta, dist_inf`; missing or NaN entries are empty.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t,position,speed,beta,dist_inf\n");
        for (k, t) in self.times.iter().enumerate() {
            let speed = if k >= 1 && k <= self.speeds.len() {
                format!("{}", self.speeds[k - 1])
            } else {
                String::new()
            };
            let cell = |v: Option<&f64>| {
                v.filter(|x| !x.is_nan())
                    .map(|x| format!("{x}"))
                    .unwrap_or_default()
            };
            let (beta, dist) = (cell(self.shifts.get(k)), cell(self.distances.get(k)));
            out.push_str(&format!(
                "{t},{},{speed},{beta},{dist}\n",
                self.positions[k]
            ));
        }
        out
    }
}

/// Level-crossing positions and centered speeds of a lab-frame trajectory.
pub fn speed_series(traj: &Trajectory, level: f64) -> Result<FrontSeries> {
    if traj.frame != Frame::Lab {
        return Err(Error::Config(
            "speed series needs a lab-frame trajectory".into(),
        ));
    }
    let positions: Vec<f64> = traj
        .snapshots
        .par_iter()
        .map(|s| front_position(s, &traj.grid, level))
        .collect::<Result<_>>()?;
    let times = traj.times();
    let speeds: Vec<f64> = (1..times.len().saturating_sub(1))
        .map(|k| (positions[k + 1] - positions[k - 1]) / (times[k + 1] - times[k - 1]))
        .collect();
    let terminal_speed = tail_mean(&speeds, 0.25);
    Ok(FrontSeries {
        times,
        positions,
        speeds,
        shifts: vec![],
        distances: vec![],
        terminal_speed,
    })
}

fn tail_mean(v: &[f64], fraction: f64) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    let start = ((1.0 - fraction) * v.len() as f64).floor() as usize;
    let tail = &v[start.min(v.len() - 1)..];
    tail.iter().sum::<f64>() / tail.len() as f64
}

/// Adds per-snapshot best shifts and distances for snapshots with `t ≥ from`.
pub fn shift_series(
    traj: &Trajectory,
    profile: &WaveProfile,
    from: f64,
) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let picked: Vec<&Snapshot> = traj.snapshots.iter().filter(|s| s.t >= from).collect();
    let fits: Vec<(f64, f64)> = picked
        .par_iter()
        .map(|s| fit_shift(s, &traj.grid, profile))
        .collect::<Result<_>>()?;
    Ok((
        picked.iter().map(|s| s.t).collect(),
        fits.iter().map(|f| f.0).collect(),
        fits.iter().map(|f| f.1).collect(),
    ))
}

/// Node range `[first, last]` of all nodes with `η ≤ u ≤ 1-η`.
pub fn zone_interval(u: &[f64], eta: f64) -> Option<(usize, usize)> {
    let first = u.iter().position(|&v| v >= eta && v <= 1.0 - eta)?;
    let last = u.iter().rposition(|&v| v >= eta && v <= 1.0 - eta)?;
    Some((first, last))
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TransitionZone {
    pub t: f64,
    pub interval: Option<(f64, f64)>,
    /// `min ∂_t u` over the zone when a time derivative was supplied.
    pub min_dudt: Option<f64>,
}

/// Smallest interval holding every node with `η ≤ u ≤ 1-η`.
pub fn transition_zone(
    u: &Snapshot,
    grid: &SimGrid,
    eta: f64,
    dudt: Option<&[f64]>,
) -> Result<TransitionZone> {
    if !(eta > 0.0 && eta <= 0.5) {
        return Err(Error::Config(format!(
            "zone level must lie in (0, 1/2], got {eta}"
        )));
    }
    let Some((a, b)) = zone_interval(&u.u, eta) else {
        return Ok(TransitionZone {
            t: u.t,
            interval: None,
            min_dudt: None,
        });
    };
    let min_dudt = dudt.map(|d| d[a..=b].iter().cloned().fold(f64::INFINITY, f64::min));
    Ok(TransitionZone {
        t: u.t,
        interval: Some((grid.x(a), grid.x(b))),
        min_dudt,
    })
}

/// Zone of snapshot `k` with the centered time derivative of the trajectory.
pub fn trajectory_zone(traj: &Trajectory, k: usize, eta: f64) -> Result<TransitionZone> {
    let d = traj.time_derivative(k);
    transition_zone(&traj.snapshots[k], &traj.grid, eta, Some(&d))
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Left,
    Right,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct DecayFit {
    /// `gap`, `gradient`, `hessian` or `time_derivative`.
    pub quantity: String,
    pub side: Side,
    /// Fitted exponential decay rate away from the front (positive when decaying).
    pub rate: f64,
    /// Rate translated to the weighted form `e^{(c/2 - σ)z}` (right) or `e^{(c/2 + σ)z}` (left).
    pub sigma: f64,
    /// Fitted prefactor.
    pub constant: f64,
    pub points: usize,
    pub passed: bool,
    pub skipped: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct DecayReport {
    pub t: f64,
    pub c2: f64,
    pub eta: f64,
    pub fits: Vec<DecayFit>,
    pub passed: bool,
}

/// Options selecting the fit window of [`decay_check`].
#[derive(Debug, Clone, Copy)]
pub struct DecayWindow {
    /// Time of the snapshot to fit.
    pub t: f64,
    /// Cutoff slope; the strips `mt ≤ |z| ≤ mt+1` are excluded when set.
    pub cutoff_m: Option<f64>,
    /// Distance from the front where the fit starts.
    pub front_margin: f64,
    /// Quantities below this level are not fitted.
    pub noise_floor: f64,
}

impl DecayWindow {
    pub fn at(t: f64) -> Self {
        Self {
            t,
            cutoff_m: None,
            front_margin: 5.0,
            noise_floor: 1e-12,
        }
    }
}

// least-squares line through (z, ln q); returns (slope, intercept, count)
fn log_fit(points: &[(f64, f64)]) -> Option<(f64, f64, usize)> {
    if points.len() < 5 {
        return None;
    }
    let n = points.len() as f64;
    let (mut sx, mut sy, mut sxx, mut sxy) = (0.0, 0.0, 0.0, 0.0);
    for &(z, q) in points {
        let y = q.ln();
        sx += z;
        sy += y;
        sxx += z * z;
        sxy += z * y;
    }
    let den = n * sxx - sx * sx;
    if den.abs() < 1e-300 {
        return None;
    }
    let slope = (n * sxy - sx * sy) / den;
    Some((slope, (sy - slope * sx) / n, points.len()))
}

/// Fits the exponential decay of `1-u` (`u` on the left), `|u_z|`, `|u_zz|` and
/// `|∂_t u|` on both sides of the front of a moving-frame snapshot.
pub fn decay_check(
    traj: &Trajectory,
    c2: f64,
    eta: f64,
    window: DecayWindow,
) -> Result<DecayReport> {
    if !matches!(traj.frame, Frame::Moving { .. }) {
        return Err(Error::Config(
            "decay check needs a moving-frame trajectory".into(),
        ));
    }
    let k = traj.nearest(window.t);
    let s = &traj.snapshots[k];
    let g = &traj.grid;
    let n = g.n;
    let h = g.h;
    let front = front_position(s, g, FRONT_LEVEL)?;
    let dudt = traj.time_derivative(k);
    let u = &s.u;
    let margin = (0.1 * n as f64).ceil() as usize;
    let strip = window.cutoff_m.map(|m| m * s.t);
    let grad = |i: usize| (u[i + 1] - u[i - 1]) / (2.0 * h);
    let hess = |i: usize| (u[i + 1] - 2.0 * u[i] + u[i - 1]) / (h * h);

    let mut fits = Vec::new();
    for side in [Side::Left, Side::Right] {
        let nodes: Vec<usize> = (margin.max(1)..n - margin.max(1))
            .filter(|&i| {
                let z = g.x(i);
                let away = match side {
                    Side::Left => z <= front - window.front_margin,
                    Side::Right => z >= front + window.front_margin,
                };
                let in_strip = strip.is_some_and(|a| z.abs() >= a && z.abs() <= a + 1.0);
                away && !in_strip
            })
            .collect();
        type Sampler<'s> = Box<dyn Fn(usize) -> f64 + 's>;
        let quantities: [(&str, Sampler); 4] = [
            (
                "gap",
                Box::new(|i| {
                    if side == Side::Right {
                        1.0 - u[i]
                    } else {
                        u[i]
                    }
                }),
            ),
            ("gradient", Box::new(|i| grad(i).abs())),
            ("hessian", Box::new(|i| hess(i).abs())),
            ("time_derivative", Box::new(|i| dudt[i].abs())),
        ];
        for (name, q) in quantities.iter() {
            let pts: Vec<(f64, f64)> = nodes
                .iter()
                .map(|&i| (g.x(i), q(i)))
                .filter(|&(_, v)| v > window.noise_floor && v.is_finite())
                .collect();
            let fit = log_fit(&pts);
            let (rate, sigma, constant, count, skipped) = match fit {
                Some((slope, icpt, cnt)) => {
                    let (rate, sigma) = match side {
                        Side::Right => (-slope, 0.5 * c2 - slope),
                        Side::Left => (slope, slope - 0.5 * c2),
                    };
                    (rate, sigma, icpt.exp(), cnt, None)
                }
                None => (
                    f64::NAN,
                    f64::NAN,
                    f64::NAN,
                    pts.len(),
                    Some(format!(
                        "only {} points above the noise floor {:e}",
                        pts.len(),
                        window.noise_floor
                    )),
                ),
            };
            let passed = skipped.is_some() || sigma > 0.5 * c2;
            fits.push(DecayFit {
                quantity: name.to_string(),
                side,
                rate,
                sigma,
                constant,
                points: count,
                passed,
                skipped,
            });
        }
    }
    let passed = fits.iter().all(|f| f.passed) && fits.iter().any(|f| f.skipped.is_none());
    Ok(DecayReport {
        t: s.t,
        c2,
        eta,
        fits,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reaction::BistableNonlinearity;
    use crate::waves::solve_wave;

    const K: f64 = std::f64::consts::FRAC_1_SQRT_2;

    fn logistic_snapshot(grid: &SimGrid, shift: f64) -> Snapshot {
        let u = grid
            .nodes()
            .iter()
            .map(|&z| 1.0 / (1.0 + (-(z - shift) * K).exp()))
            .collect();
        Snapshot {
            t: 0.0,
            u,
            frame: Frame::Lab,
        }
    }

    #[test]
    fn golden_section_finds_parabola_minimum() {
        let (x, fx) = golden_section(|x| (x - 1.3).powi(2), -5.0, 5.0, 1e-9);
        assert!((x - 1.3).abs() < 1e-8 && fx < 1e-16);
    }

    #[test]
    fn positions_of_logistic_fronts() {
        let g = SimGrid::new(-20.0, 20.0, 0.05).unwrap();
        assert!(
            front_position(&logistic_snapshot(&g, 0.0), &g, 0.5)
                .unwrap()
                .abs()
                < 1e-12
        );
        let p = front_position(&logistic_snapshot(&g, 3.0), &g, 0.5).unwrap();
        assert!((p - 3.0).abs() < 1e-4);
        let flat = Snapshot {
            t: 2.0,
            u: vec![0.3; g.n],
            frame: Frame::Lab,
        };
        assert!(
            matches!(front_position(&flat, &g, 0.5), Err(Error::Extraction { t, .. }) if t == 2.0)
        );
    }

    #[test]
    fn multiple_crossings_are_rejected() {
        let g = SimGrid::new(-10.0, 10.0, 0.1).unwrap();
        let u = g.nodes().iter().map(|x| 0.5 + 0.4 * x.sin()).collect();
        let s = Snapshot {
            t: 0.0,
            u,
            frame: Frame::Lab,
        };
        assert!(front_position(&s, &g, 0.5).is_err());
    }

    #[test]
    fn logistic_zone() {
        let g = SimGrid::new(-20.0, 20.0, 0.01).unwrap();
        let z = transition_zone(&logistic_snapshot(&g, 0.0), &g, 0.2, None).unwrap();
        let (a, b) = z.interval.unwrap();
        let edge = std::f64::consts::SQRT_2 * 4f64.ln();
        assert!((a + edge).abs() <= 0.01 && (b - edge).abs() <= 0.01);
        let ones = Snapshot {
            t: 0.0,
            u: vec![1.0; g.n],
            frame: Frame::Lab,
        };
        assert!(transition_zone(&ones, &g, 0.2, None)
            .unwrap()
            .interval
            .is_none());
    }

    #[test]
    fn shift_fit_recovers_translates() {
        let f = BistableNonlinearity::cubic(0.3, 1.0).unwrap();
        let p = solve_wave(&f, -40.0, 40.0, 0.05, 1e-8).unwrap();
        let g = SimGrid::new(-30.0, 30.0, 0.05).unwrap();
        let moving = Frame::Moving { speed: p.speed };
        let exact = Snapshot {
            t: 0.0,
            u: g.nodes().iter().map(|&z| p.eval(z)).collect(),
            frame: moving,
        };
        let (b, d) = fit_shift(&exact, &g, &p).unwrap();
        assert!(b.abs() < 1e-10 && d < 1e-10, "{b} {d}");
        let moved = Snapshot {
            t: 0.0,
            u: g.nodes().iter().map(|&z| p.eval(z + 1.5)).collect(),
            frame: moving,
        };
        let (b, d) = fit_shift(&moved, &g, &p).unwrap();
        assert!((b - 1.5).abs() < 1e-9 && d < 1e-9);
        let wiggle = Snapshot {
            t: 0.0,
            u: g.nodes()
                .iter()
                .map(|&z| (p.eval(z) + 0.01 * z.sin()).clamp(0.0, 1.0))
                .collect(),
            frame: moving,
        };
        let (b, d) = fit_shift(&wiggle, &g, &p).unwrap();
        assert!(b.abs() <= 0.05 && d <= 0.011, "{b} {d}");
    }
}
