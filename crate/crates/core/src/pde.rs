//! Time integration of `u_t = u_xx + f(x,u)` on a truncated line, in the lab
//! frame or in a frame moving with speed `c` (`w_t + c w_z - w_zz = f(z - ct, w)`).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::envelopes::{eval_appendix, AppendixParams};
use crate::error::{Error, Result};
use crate::interp::Hermite;
use crate::linalg::Tridiagonal;
use crate::reaction::SpatialReaction;
use crate::waves::WaveProfile;

/// Threshold for the boundary-contamination monitor.
pub const BOUNDARY_THRESHOLD: f64 = 1e-6;
/// Excess over `[0,1]` below which a clamp is not counted as an event.
pub const CLAMP_SLACK: f64 = 1e-12;

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct SimGrid {
    pub x_min: f64,
    pub x_max: f64,
    pub h: f64,
    pub n: usize,
}

impl SimGrid {
    pub fn new(x_min: f64, x_max: f64, h: f64) -> Result<Self> {
        if !(h > 0.0) || !(x_max > x_min) {
            return Err(Error::Config(format!(
                "invalid grid [{x_min}, {x_max}] with spacing {h}"
            )));
        }
        let cells = (x_max - x_min) / h;
        if (cells - cells.round()).abs() > 1e-8 * cells.max(1.0) {
            return Err(Error::Config(format!(
                "spacing {h} does not divide [{x_min}, {x_max}]"
            )));
        }
        let n = cells.round() as usize + 1;
        if n < 5 {
            return Err(Error::Config("grid needs at least 5 nodes".into()));
        }
        Ok(Self { x_min, x_max, h, n })
    }

    #[inline]
    pub fn x(&self, i: usize) -> f64 {
        self.x_min + i as f64 * self.h
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.x(i)).collect()
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Default)]
#[serde(tag = "frame", rename_all = "lowercase")]
pub enum Frame {
    #[default]
    Lab,
    Moving {
        speed: f64,
    },
}

impl Frame {
    pub fn speed(&self) -> f64 {
        match self {
            Frame::Lab => 0.0,
            Frame::Moving { speed } => *speed,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Snapshot {
    pub t: f64,
    pub u: Vec<f64>,
    pub frame: Frame,
}

/// Largest deviation of the end values from their asymptotic states.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Default)]
pub struct BoundaryReport {
    pub left_asymptote: f64,
    pub right_asymptote: f64,
    pub max_left: f64,
    pub max_right: f64,
    pub threshold: f64,
    pub flagged: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Trajectory {
    pub grid: SimGrid,
    pub snapshots: Vec<Snapshot>,
    pub dt: f64,
    pub frame: Frame,
    pub reaction_fingerprint: String,
    pub boundary_report: BoundaryReport,
    pub clamp_events: usize,
    pub steps: usize,
}

impl Trajectory {
    pub fn times(&self) -> Vec<f64> {
        self.snapshots.iter().map(|s| s.t).collect()
    }

    pub fn t_start(&self) -> f64 {
        self.snapshots[0].t
    }

    pub fn t_end(&self) -> f64 {
        self.snapshots.last().unwrap().t
    }

    /// Index of the snapshot closest to `t`.
    pub fn nearest(&self, t: f64) -> usize {
        let k = self.snapshots.partition_point(|s| s.t < t);
        if k == 0 {
            0
        } else if k >= self.snapshots.len() {
            self.snapshots.len() - 1
        } else if (self.snapshots[k].t - t).abs() < (t - self.snapshots[k - 1].t).abs() {
            k
        } else {
            k - 1
        }
    }

    /// Centered (one-sided at the ends) time derivative at snapshot `k`.
    pub fn time_derivative(&self, k: usize) -> Vec<f64> {
        let s = &self.snapshots;
        let (a, b) = if s.len() < 2 {
            return vec![0.0; self.grid.n];
        } else if k == 0 {
            (0, 1)
        } else if k + 1 >= s.len() {
            (s.len() - 2, s.len() - 1)
        } else {
            (k - 1, k + 1)
        };
        let dt = s[b].t - s[a].t;
        s[a].u
            .iter()
            .zip(&s[b].u)
            .map(|(x, y)| (y - x) / dt)
            .collect()
    }

    /// Field at time `t` by cubic Hermite interpolation in time with
    /// finite-difference slopes. `None` outside the stored window.
    pub fn at(&self, t: f64) -> Option<Vec<f64>> {
        let s = &self.snapshots;
        if s.is_empty() || t < s[0].t - 1e-12 || t > s[s.len() - 1].t + 1e-12 {
            return None;
        }
        if s.len() == 1 {
            return Some(s[0].u.clone());
        }
        let k = (s.partition_point(|q| q.t <= t).max(1) - 1).min(s.len() - 2);
        let (t0, t1) = (s[k].t, s[k + 1].t);
        let dt = t1 - t0;
        let tau = ((t - t0) / dt).clamp(0.0, 1.0);
        if tau == 0.0 {
            return Some(s[k].u.clone());
        }
        if tau == 1.0 {
            return Some(s[k + 1].u.clone());
        }
        let d0 = self.time_derivative(k);
        let d1 = self.time_derivative(k + 1);
        Some(
            (0..self.grid.n)
                .map(|i| {
                    crate::interp::hermite_segment(s[k].u[i], s[k + 1].u[i], d0[i], d1[i], dt, tau)
                        .0
                })
                .collect(),
        )
    }
}

/// Crank–Nicolson diffusion with Heun reaction and second-order upwind
/// advection; homogeneous Neumann ends via ghost nodes.
struct Stepper<'a> {
    r: &'a SpatialReaction,
    grid: SimGrid,
    dt: f64,
    speed: f64,
    solver: Tridiagonal,
    // scratch
    rhs: Vec<f64>,
    g0: Vec<f64>,
    g1: Vec<f64>,
    bu: Vec<f64>,
    star: Vec<f64>,
}

impl<'a> Stepper<'a> {
    fn new(r: &'a SpatialReaction, grid: SimGrid, dt: f64, speed: f64) -> Result<Self> {
        let n = grid.n;
        let k = 0.5 * dt / (grid.h * grid.h);
        let mut lower = vec![-k; n];
        let mut upper = vec![-k; n];
        let diag = vec![1.0 + 2.0 * k; n];
        // ghost node u_{-1} = u_1 doubles the inner coupling at the ends
        upper[0] = -2.0 * k;
        lower[n - 1] = -2.0 * k;
        lower[0] = 0.0;
        upper[n - 1] = 0.0;
        let solver = Tridiagonal::factor(&lower, &diag, &upper)?;
        Ok(Self {
            r,
            grid,
            dt,
            speed,
            solver,
            rhs: vec![0.0; n],
            g0: vec![0.0; n],
            g1: vec![0.0; n],
            bu: vec![0.0; n],
            star: vec![0.0; n],
        })
    }

    fn apply_b(&mut self, u: &[f64]) {
        let n = self.grid.n;
        let k = 0.5 * self.dt / (self.grid.h * self.grid.h);
        self.bu[0] = u[0] + 2.0 * k * (u[1] - u[0]);
        for i in 1..n - 1 {
            self.bu[i] = u[i] + k * (u[i - 1] - 2.0 * u[i] + u[i + 1]);
        }
        self.bu[n - 1] = u[n - 1] + 2.0 * k * (u[n - 2] - u[n - 1]);
    }

    // reaction minus advection at time t
    fn forcing(
        r: &SpatialReaction,
        grid: &SimGrid,
        speed: f64,
        t: f64,
        u: &[f64],
        out: &mut [f64],
    ) {
        let shift = speed * t;
        let h = grid.h;
        for i in 0..grid.n {
            let x = grid.x(i) - shift;
            out[i] = r.eval(x, u[i]);
        }
        if speed != 0.0 {
            // upwind for c > 0: information enters from the left
            out[1] -= speed * (u[1] - u[0]) / h;
            for i in 2..grid.n {
                out[i] -= speed * (3.0 * u[i] - 4.0 * u[i - 1] + u[i - 2]) / (2.0 * h);
            }
        }
    }

    /// Advances `u` from `t` to `t + dt` in place; returns the number of clamp events.
    fn step(&mut self, t: f64, u: &mut [f64]) -> usize {
        let n = self.grid.n;
        let dt = self.dt;
        self.apply_b(u);
        Self::forcing(self.r, &self.grid, self.speed, t, u, &mut self.g0);
        for i in 0..n {
            self.star[i] = self.bu[i] + dt * self.g0[i];
        }
        self.solver.solve_in_place(&mut self.star);
        Self::forcing(
            self.r,
            &self.grid,
            self.speed,
            t + dt,
            &self.star,
            &mut self.g1,
        );
        for i in 0..n {
            self.rhs[i] = self.bu[i] + 0.5 * dt * (self.g0[i] + self.g1[i]);
        }
        self.solver.solve_in_place(&mut self.rhs);
        let mut events = 0;
        for (ui, &v) in u.iter_mut().zip(&self.rhs) {
            if !(-CLAMP_SLACK..=1.0 + CLAMP_SLACK).contains(&v) {
                events += 1;
            }
            *ui = v.clamp(0.0, 1.0);
        }
        events
    }
}

fn nearest_state(v: f64) -> f64 {
    if v < 0.01 {
        0.0
    } else if v > 0.99 {
        1.0
    } else {
        v
    }
}

fn whole_steps(span: f64, dt: f64, what: &str) -> Result<usize> {
    let q = span / dt;
    if q < -1e-9 || (q - q.round()).abs() > 1e-6 * q.abs().max(1.0) {
        return Err(Error::Config(format!(
            "{what} {span} is not a whole number of steps of {dt}"
        )));
    }
    Ok(q.round() as usize)
}

/// Integrates from `t0` to `t_end`, storing a snapshot every `snapshot_every`.
#[allow(clippy::too_many_arguments)]
pub fn simulate(
    r: &SpatialReaction,
    grid: &SimGrid,
    u0: &[f64],
    t0: f64,
    t_end: f64,
    dt: f64,
    frame: Frame,
    snapshot_every: f64,
) -> Result<Trajectory> {
    if u0.len() != grid.n {
        return Err(Error::Config(format!(
            "initial field has {} values for {} nodes",
            u0.len(),
            grid.n
        )));
    }
    if let Some((i, v)) = u0
        .iter()
        .enumerate()
        .find(|(_, v)| !(0.0..=1.0).contains(*v))
    {
        return Err(Error::Precondition(format!(
            "initial value {v} at node {i} lies outside [0,1]"
        )));
    }
    if !(dt > 0.0) || !(t_end >= t0) {
        return Err(Error::Config(format!(
            "invalid time window [{t0}, {t_end}] with step {dt}"
        )));
    }
    let lf = r.lipschitz_bound();
    if dt > 0.5 / lf {
        return Err(Error::Config(format!(
            "time step {dt} exceeds the reaction limit 0.5/L_f = {}",
            0.5 / lf
        )));
    }
    let speed = frame.speed();
    if speed < 0.0 {
        return Err(Error::Config(
            "moving-frame speed must be nonnegative".into(),
        ));
    }
    if speed * dt / grid.h > 1.0 {
        return Err(Error::Config(format!(
            "advection CFL number {} exceeds 1",
            speed * dt / grid.h
        )));
    }
    if dt / (grid.h * grid.h) > 1.0 {
        log::warn!(
            "dt/h^2 = {} exceeds 1; the discrete comparison principle may fail",
            dt / (grid.h * grid.h)
        );
    }
    let total = whole_steps(t_end - t0, dt, "time window")?;
    let every = whole_steps(snapshot_every, dt, "snapshot cadence")?.max(1);

    let mut stepper = Stepper::new(r, *grid, dt, speed)?;
    let mut u = u0.to_vec();
    let left_asym = nearest_state(u0[0]);
    let right_asym = nearest_state(u0[grid.n - 1]);
    let mut max_left = (u[0] - left_asym).abs();
    let mut max_right = (u[grid.n - 1] - right_asym).abs();
    let mut snapshots = vec![Snapshot {
        t: t0,
        u: u.clone(),
        frame,
    }];
    let mut clamp_events = 0;
    for step in 0..total {
        let t = t0 + step as f64 * dt;
        clamp_events += stepper.step(t, &mut u);
        max_left = max_left.max((u[0] - left_asym).abs());
        max_right = max_right.max((u[grid.n - 1] - right_asym).abs());
        let done = step + 1;
        if done % every == 0 || done == total {
            snapshots.push(Snapshot {
                t: t0 + done as f64 * dt,
                u: u.clone(),
                frame,
            });
        }
    }
    let flagged = max_left > BOUNDARY_THRESHOLD || max_right > BOUNDARY_THRESHOLD;
    if flagged {
        log::warn!("boundary contamination: left {max_left:e}, right {max_right:e}");
    }
    if clamp_events > 0 {
        log::warn!("{clamp_events} clamp events during integration");
    }
    Ok(Trajectory {
        grid: *grid,
        snapshots,
        dt,
        frame,
        reaction_fingerprint: r.fingerprint(),
        boundary_report: BoundaryReport {
            left_asymptote: left_asym,
            right_asymptote: right_asym,
            max_left,
            max_right,
            threshold: BOUNDARY_THRESHOLD,
            flagged,
        },
        clamp_events,
        steps: total,
    })
}

/// Resamples a lab-frame trajectory onto `z = x + ct`; outside the lab
/// domain the end values are continued flat.
pub fn to_moving_frame(traj: &Trajectory, c: f64, z_grid: Option<&SimGrid>) -> Result<Trajectory> {
    if traj.frame != Frame::Lab {
        return Err(Error::Config(
            "trajectory is already in a moving frame".into(),
        ));
    }
    let zg = *z_grid.unwrap_or(&traj.grid);
    let xs = traj.grid.nodes();
    let frame = if c == 0.0 {
        Frame::Lab
    } else {
        Frame::Moving { speed: c }
    };
    let snapshots = traj
        .snapshots
        .par_iter()
        .map(|s| {
            let interp = Hermite::pchip(xs.clone(), s.u.clone());
            let u = (0..zg.n)
                .map(|i| {
                    let x = zg.x(i) - c * s.t;
                    if x <= traj.grid.x_min {
                        s.u[0]
                    } else if x >= traj.grid.x_max {
                        s.u[traj.grid.n - 1]
                    } else {
                        interp.eval(x).clamp(0.0, 1.0)
                    }
                })
                .collect();
            Snapshot { t: s.t, u, frame }
        })
        .collect();
    Ok(Trajectory {
        grid: zg,
        snapshots,
        frame,
        ..traj.clone()
    })
}

/// Pairwise ordering of the backward-construction runs.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PairOrdering {
    pub n_smaller: u32,
    pub n_larger: u32,
    /// `min (u_larger - u_smaller)` over shared snapshots and nodes.
    pub min_difference: f64,
    pub at_t: f64,
    pub at_x: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MonotonicityReport {
    pub pairs: Vec<PairOrdering>,
    /// `min` over pairs of `min_difference`.
    pub worst_ordering: f64,
    /// Initialization contract: largest `|u_n(-n) - w⁻(-n)|` at nodes.
    pub init_mismatch: f64,
    /// Min discrete `∂_t u` of the largest run over all nodes after one time unit.
    pub min_dudt_all: f64,
    /// Min discrete `∂_t u` over the transition zone `η ≤ u ≤ 1-η` for early times.
    pub delta: f64,
    pub delta_window: (f64, f64),
    pub eta: f64,
}

/// Options for the backward construction of the entire solution.
#[derive(Debug, Clone, Copy)]
pub struct EntireOptions {
    pub dt: f64,
    pub t_end: f64,
    pub snapshot_every: f64,
    /// Level defining the transition zone for the `∂_t u ≥ δ` measurement.
    pub eta: f64,
    /// Upper end of the early-time window for `δ`.
    pub delta_until: f64,
}

/// `w⁻(-n, ·)` on the grid.
pub fn appendix_initial(
    p: &AppendixParams,
    wave1: &WaveProfile,
    grid: &SimGrid,
    n: u32,
) -> Result<Vec<f64>> {
    let t = -(n as f64);
    (0..grid.n)
        .map(|i| eval_appendix(p, wave1, t, grid.x(i)).map(|(lo, _)| lo))
        .collect()
}

/// Runs `simulate` from `t = -n` with `w⁻(-n, ·)` for each `n` and measures
/// the ordering of successive runs and the positivity of `∂_t u`.
pub fn construct_entire(
    r: &SpatialReaction,
    wave1: &WaveProfile,
    appendix: &AppendixParams,
    n_list: &[u32],
    grid: &SimGrid,
    opts: EntireOptions,
) -> Result<(Vec<Trajectory>, MonotonicityReport)> {
    if n_list.len() < 2 {
        return Err(Error::Config("n_list needs at least two entries".into()));
    }
    if n_list.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::Config("n_list must be strictly increasing".into()));
    }
    for &n in n_list {
        if -(n as f64) > appendix.t1 {
            return Err(Error::Precondition(format!(
                "start time -{n} is later than the validity threshold T1 = {}",
                appendix.t1
            )));
        }
    }
    let runs: Vec<Result<(Trajectory, f64)>> = n_list
        .par_iter()
        .map(|&n| {
            let u0 = appendix_initial(appendix, wave1, grid, n)?;
            let tr = simulate(
                r,
                grid,
                &u0,
                -(n as f64),
                opts.t_end,
                opts.dt,
                Frame::Lab,
                opts.snapshot_every,
            )?;
            let mismatch = tr.snapshots[0]
                .u
                .iter()
                .zip(&u0)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max);
            Ok((tr, mismatch))
        })
        .collect();
    let mut trajs = Vec::with_capacity(runs.len());
    let mut init_mismatch = 0.0f64;
    for run in runs {
        let (tr, m) = run?;
        init_mismatch = init_mismatch.max(m);
        trajs.push(tr);
    }

    let mut pairs = Vec::new();
    for k in 1..trajs.len() {
        let (small, large) = (&trajs[k - 1], &trajs[k]);
        let mut worst = PairOrdering {
            n_smaller: n_list[k - 1],
            n_larger: n_list[k],
            min_difference: f64::INFINITY,
            at_t: f64::NAN,
            at_x: f64::NAN,
        };
        for s in &small.snapshots {
            let j = large.nearest(s.t);
            if (large.snapshots[j].t - s.t).abs() > 1e-9 {
                continue;
            }
            for (i, (a, b)) in large.snapshots[j].u.iter().zip(&s.u).enumerate() {
                let d = a - b;
                if d < worst.min_difference {
                    worst.min_difference = d;
                    worst.at_t = s.t;
                    worst.at_x = grid.x(i);
                }
            }
        }
        pairs.push(worst);
    }
    let worst_ordering = pairs
        .iter()
        .map(|p| p.min_difference)
        .fold(f64::INFINITY, f64::min);

    let big = trajs.last().unwrap();
    let t_start = big.t_start();
    let mut min_all = f64::INFINITY;
    let mut delta = f64::INFINITY;
    let window = (t_start + 1.0, opts.delta_until.min(big.t_end()));
    for k in 1..big.snapshots.len().saturating_sub(1) {
        let s = &big.snapshots[k];
        if s.t < t_start + 1.0 {
            continue;
        }
        let d = big.time_derivative(k);
        min_all = min_all.min(d.iter().cloned().fold(f64::INFINITY, f64::min));
        if s.t <= window.1 {
            if let Some(zone) = crate::frontmetrics::zone_interval(&s.u, opts.eta) {
                delta = d[zone.0..=zone.1].iter().fold(delta, |m, &v| m.min(v));
            }
        }
    }
    Ok((
        trajs,
        MonotonicityReport {
            pairs,
            worst_ordering,
            init_mismatch,
            min_dudt_all: min_all,
            delta,
            delta_window: window,
            eta: opts.eta,
        },
    ))
}

/// One perturbation of the uniqueness probe.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ProbeCase {
    pub epsilon: f64,
    pub bump_center: f64,
    pub bump_sign: f64,
    /// Late-time L∞ distance without alignment.
    pub raw_distance: f64,
    /// Late-time L∞ distance after the optimal time shift.
    pub aligned_distance: f64,
    pub time_shift: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ProbeReport {
    pub base_n: u32,
    pub cases: Vec<ProbeCase>,
    pub max_distance: f64,
    pub late_window: (f64, f64),
}

/// Options for the uniqueness probe.
#[derive(Debug, Clone, Copy)]
pub struct ProbeOptions {
    pub dt: f64,
    pub t_end: f64,
    pub snapshot_every: f64,
    /// Level `η` with `∂_u f ≤ -β` on `[0, 2η]` and `[1-2η, 1]`.
    pub eta: f64,
    pub seed: u64,
    /// Fraction of the run counted as late time.
    pub late_fraction: f64,
}

/// Smooth bump of unit height and width about 1.
fn bump(x: f64, center: f64) -> f64 {
    let s = x - center;
    (-s * s).exp()
}

/// Runs the base orbit and one perturbed orbit per amplitude and measures
/// how far they stay apart at late times, after optimal time-shift alignment.
pub fn uniqueness_probe(
    r: &SpatialReaction,
    wave1: &WaveProfile,
    appendix: &AppendixParams,
    base_n: u32,
    perturbations: &[f64],
    grid: &SimGrid,
    opts: ProbeOptions,
) -> Result<(Trajectory, ProbeReport)> {
    for &eps in perturbations {
        if !(eps >= 0.0) || eps > 0.5 * opts.eta {
            return Err(Error::Config(format!(
                "perturbation amplitude {eps} must lie in [0, eta/2 = {}]",
                0.5 * opts.eta
            )));
        }
    }
    let u0 = appendix_initial(appendix, wave1, grid, base_n)?;
    let t0 = -(base_n as f64);
    // bumps sit inside the initial transition zone, drawn deterministically from the seed
    let zone = crate::frontmetrics::zone_interval(&u0, opts.eta).ok_or_else(|| {
        Error::Config("initial data has no transition zone for the perturbation".into())
    })?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut inits = Vec::new();
    for &eps in perturbations {
        let center = grid.x(rng.gen_range(zone.0..=zone.1));
        let sign = if rng.gen_bool(0.5) { 1.0 } else { -1.0 };
        // projected back onto [0,1]; the data vanish identically left of the origin
        let u: Vec<f64> = (0..grid.n)
            .map(|i| (u0[i] + sign * eps * bump(grid.x(i), center)).clamp(0.0, 1.0))
            .collect();
        inits.push((eps, center, sign, u));
    }
    let base = simulate(
        r,
        grid,
        &u0,
        t0,
        opts.t_end,
        opts.dt,
        Frame::Lab,
        opts.snapshot_every,
    )?;
    let late_start = opts.t_end - opts.late_fraction * (opts.t_end - t0);
    let cases: Vec<Result<ProbeCase>> = inits
        .into_par_iter()
        .map(|(eps, center, sign, u)| {
            let tr = simulate(
                r,
                grid,
                &u,
                t0,
                opts.t_end,
                opts.dt,
                Frame::Lab,
                opts.snapshot_every,
            )?;
            let raw = late_distance(&tr, &base, late_start, 0.0);
            let (shift, aligned) = align_orbits(&tr, &base, late_start, 1.0);
            Ok(ProbeCase {
                epsilon: eps,
                bump_center: center,
                bump_sign: sign,
                raw_distance: raw,
                aligned_distance: aligned.min(raw),
                time_shift: if aligned < raw { shift } else { 0.0 },
            })
        })
        .collect();
    let cases: Vec<ProbeCase> = cases.into_iter().collect::<Result<_>>()?;
    let max_distance = cases.iter().map(|c| c.aligned_distance).fold(0.0, f64::max);
    Ok((
        base,
        ProbeReport {
            base_n,
            cases,
            max_distance,
            late_window: (late_start, opts.t_end),
        },
    ))
}

/// `max` over snapshots of `a` with `t ≥ from` of `‖a(t) - b(t + shift)‖∞`.
/// Times where `b(t + shift)` is not stored are skipped.
pub fn late_distance(a: &Trajectory, b: &Trajectory, from: f64, shift: f64) -> f64 {
    let mut worst = 0.0f64;
    for s in a.snapshots.iter().filter(|s| s.t >= from - 1e-12) {
        if let Some(v) = b.at(s.t + shift) {
            let d =
                s.u.iter()
                    .zip(&v)
                    .map(|(x, y)| (x - y).abs())
                    .fold(0.0, f64::max);
            worst = worst.max(d);
        }
    }
    worst
}

/// Golden-section search for the time shift minimizing [`late_distance`]
/// within `±bracket`; returns `(shift, distance)`.
pub fn align_orbits(a: &Trajectory, b: &Trajectory, from: f64, bracket: f64) -> (f64, f64) {
    // keep the comparison window inside b's storage for every trial shift
    let to = a.t_end().min(b.t_end() - bracket);
    let window: Vec<&Snapshot> = a
        .snapshots
        .iter()
        .filter(|s| s.t >= from - 1e-12 && s.t <= to + 1e-12)
        .collect();
    let cost = |sh: f64| -> f64 {
        let mut worst = 0.0f64;
        for s in &window {
            if let Some(v) = b.at(s.t + sh) {
                worst = worst.max(
                    s.u.iter()
                        .zip(&v)
                        .map(|(x, y)| (x - y).abs())
                        .fold(0.0, f64::max),
                );
            }
        }
        worst
    };
    let (s, d) = crate::frontmetrics::golden_section(cost, -bracket, bracket, 1e-6);
    let d0 = cost(0.0);
    if d0 <= d {
        (0.0, d0)
    } else {
        (s, d)
    }
}
