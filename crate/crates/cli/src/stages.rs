//! One function per command. Each reads its inputs from earlier stages,
//! writes its artifacts and returns the stage's verification report.

use std::path::Path;

use frontlab::envelopes::{
    check_ordering, derive_appendix, derive_lower, derive_upper1, derive_upper2, eval_appendix,
    residual_sign_check, AppendixEnvelope, AppendixParams, Envelope, LowerEnvelope, ProbeGrid,
    Side, Upper1Envelope, Upper2Envelope,
};
use frontlab::frontmetrics::{
    decay_check, fit_shift, shift_series, speed_series, trajectory_zone, DecayWindow,
};
use frontlab::lyapunov::{auto_m, eval_q, lyapunov_series, LyapunovOptions};
use frontlab::pde::{
    align_orbits, construct_entire, simulate, to_moving_frame, uniqueness_probe, EntireOptions,
    Frame, ProbeOptions, SimGrid, Trajectory,
};
use frontlab::reaction::{validate_bistable, NonlinearityKind, SpatialReaction, VALIDATION_POINTS};
use frontlab::store::{read_profile, read_trajectory, write_profile, write_trajectory};
use frontlab::waves::{solve_wave, WaveProfile};
use serde_json::json;

use crate::artifacts::Layout;
use crate::config::{CutoffChoice, CutoffSlope, GridSpec, RunConfig};
use crate::error::CliError;
use crate::report::{Check, VerificationReport};

pub struct Context<'a> {
    pub cfg: &'a RunConfig,
    pub base: &'a Path,
    pub out: Layout,
}

impl Context<'_> {
    fn reaction(&self) -> Result<SpatialReaction, CliError> {
        self.cfg.reaction(self.base)
    }

    fn report(&self, stage: &str) -> VerificationReport {
        VerificationReport::new(stage, &self.out.config_hash)
    }

    fn waves(&self, by: &str) -> Result<(WaveProfile, WaveProfile), CliError> {
        self.out.require("wave", by)?;
        let dir = self.out.root.join("wave");
        Ok((read_profile(&dir, "phi1")?, read_profile(&dir, "phi2")?))
    }

    fn trajectory(&self, by: &str) -> Result<Trajectory, CliError> {
        self.out.require("simulate", by)?;
        Ok(read_trajectory(
            &self.out.root.join("simulate").join("trajectory"),
        )?)
    }
}

fn grid(g: &GridSpec) -> Result<SimGrid, CliError> {
    Ok(SimGrid::new(g.x_min, g.x_max, g.h)?)
}

// closed-form speed of the cubic family, if the term is one
fn cubic_speed(kind: &NonlinearityKind) -> Option<f64> {
    match kind {
        NonlinearityKind::Cubic { theta, scale } => {
            Some((scale / 2.0).sqrt() * (1.0 - 2.0 * theta))
        }
        _ => None,
    }
}

fn appendix(r: &SpatialReaction, wave1: &WaveProfile) -> Result<AppendixParams, CliError> {
    Ok(derive_appendix(wave1, &r.f1)?)
}

pub fn validate(cx: &Context) -> Result<VerificationReport, CliError> {
    let mut rep = cx.report("validate");
    let r = cx.reaction()?;
    let v1 = validate_bistable(&r.f1, VALIDATION_POINTS, 1e-12)?;
    let v2 = validate_bistable(&r.f2, VALIDATION_POINTS, 1e-12)?;
    for (name, v) in [("f1", &v1), ("f2", &v2)] {
        let failing: Vec<&str> = v
            .checks
            .iter()
            .filter(|c| !c.passed)
            .map(|c| c.name.as_str())
            .collect();
        rep.check(Check::holds(
            &format!("{name} is bistable"),
            v.passed,
            format!("failing: {failing:?}"),
        ));
        rep.measure(&format!("{name}.integral"), v.integral);
        if let Some(t) = v.theta {
            rep.measure(&format!("{name}.theta"), t);
        }
    }
    rep.measure("c_f", r.c_f);
    rep.measure("lipschitz", r.lipschitz_bound());
    cx.out.write_json(
        "validate",
        "validation.json",
        &json!({ "f1": v1, "f2": v2, "c_f": r.c_f }),
    )?;
    Ok(rep)
}

pub fn wave(cx: &Context) -> Result<VerificationReport, CliError> {
    let mut rep = cx.report("wave");
    let r = cx.reaction()?;
    let w = cx.cfg.wave;
    let dir = cx.out.stage_dir("wave")?;
    for (name, f) in [("phi1", &r.f1), ("phi2", &r.f2)] {
        log::info!("solving the travelling wave {name}");
        let p = solve_wave(f, w.z_min, w.z_max, w.h, w.tol)?;
        write_profile(&dir, name, &p)?;
        rep.measure(&format!("{name}.speed"), p.speed);
        rep.measure(&format!("{name}.lambda"), p.lambda);
        rep.measure(&format!("{name}.mu"), p.mu);
        rep.measure(&format!("{name}.c_phi"), p.c_phi);
        rep.check(Check::at_most(
            &format!("{name} residual"),
            p.residual_norm,
            1e-3,
            "discrete residual of the profile ODE",
        ));
        if let Some(c) = cubic_speed(&f.kind) {
            rep.check(Check::at_most(
                &format!("{name} speed error"),
                (p.speed - c).abs(),
                1e-6,
                format!("closed form {c}"),
            ));
        }
        if p.used_shooting_fallback {
            rep.warn(format!(
                "{name}: Newton failed, the shooting fallback produced the profile"
            ));
        }
    }
    Ok(rep)
}

pub fn simulate_stage(cx: &Context) -> Result<VerificationReport, CliError> {
    let (wave1, _) = cx.waves("simulate")?;
    let mut rep = cx.report("simulate");
    let r = cx.reaction()?;
    let ap = appendix(&r, &wave1)?;
    let t = cx.cfg.time;
    if t.t0 > ap.t1 {
        return Err(CliError::Config(format!(
            "time.t0 = {} is later than the early-time threshold T1 = {}",
            t.t0, ap.t1
        )));
    }
    let g = grid(&cx.cfg.grid)?;
    let u0 = (0..g.n)
        .map(|i| eval_appendix(&ap, &wave1, t.t0, g.x(i)).map(|p| p.0))
        .collect::<Result<Vec<_>, _>>()?;
    log::info!(
        "simulating {} nodes over [{}, {}] with dt {}",
        g.n,
        t.t0,
        t.t_end,
        t.dt
    );
    let tr = simulate(
        &r,
        &g,
        &u0,
        t.t0,
        t.t_end,
        t.dt,
        Frame::Lab,
        t.snapshot_every,
    )?;
    write_trajectory(&cx.out.stage_dir("simulate")?.join("trajectory"), &tr)?;
    cx.out.write_json("simulate", "appendix.json", &ap)?;
    rep.check(Check::at_most(
        "clamp events",
        tr.clamp_events as f64,
        0.0,
        "post-step clamping to [0,1]",
    ));
    let b = tr.boundary_report;
    rep.measure("boundary.max_left", b.max_left);
    rep.measure("boundary.max_right", b.max_right);
    rep.measure("steps", tr.steps as f64);
    if b.flagged {
        rep.warn(format!(
            "boundary contamination above {:e} (left {:.3e}, right {:.3e})",
            b.threshold, b.max_left, b.max_right
        ));
    }
    Ok(rep)
}

pub fn entire(cx: &Context) -> Result<VerificationReport, CliError> {
    let (wave1, _) = cx.waves("entire")?;
    let mut rep = cx.report("entire");
    let r = cx.reaction()?;
    let ap = appendix(&r, &wave1)?;
    let e = &cx.cfg.entire;
    let g = grid(&cx.cfg.grid)?;
    let opts = EntireOptions {
        dt: cx.cfg.time.dt,
        t_end: e.t_end,
        snapshot_every: cx.cfg.time.snapshot_every,
        eta: e.eta,
        delta_until: ap.t1,
    };
    log::info!("backward construction for n in {:?}", e.n_list);
    let (_, mono) = construct_entire(&r, &wave1, &ap, &e.n_list, &g, opts)?;
    cx.out.write_json("entire", "monotonicity.json", &mono)?;
    rep.check(Check::at_least(
        "ordering in n",
        mono.worst_ordering,
        -e.ordering_tol,
        "min of u_n - u_(n-1)",
    ));
    rep.check(Check::at_least(
        "zone slope",
        mono.delta,
        f64::MIN_POSITIVE,
        "min time derivative on the transition zone",
    ));
    rep.check(Check::at_most(
        "initial data",
        mono.init_mismatch,
        0.0,
        "start equals the early-time subsolution",
    ));
    rep.measure("delta", mono.delta);

    let p = &cx.cfg.probe;
    let pg = grid(&p.grid)?;
    let popts = ProbeOptions {
        dt: p.dt,
        t_end: p.t_end,
        snapshot_every: cx.cfg.time.snapshot_every,
        eta: e.eta,
        seed: cx.cfg.seed,
        late_fraction: p.late_fraction,
    };
    let mut bases = Vec::new();
    let mut probes = Vec::new();
    for &n in &p.base_n {
        log::info!("uniqueness probe from t = -{n}");
        let (base, pr) = uniqueness_probe(&r, &wave1, &ap, n, &p.perturbations, &pg, popts)?;
        rep.check(Check::at_most(
            &format!("perturbed orbits from -{n}"),
            pr.max_distance,
            p.tol,
            "late aligned L∞ distance",
        ));
        bases.push((n, base, pr.late_window.0));
        probes.push(pr);
    }
    let mut pairs = Vec::new();
    for k in 1..bases.len() {
        let (n0, a, from) = &bases[k - 1];
        let (n1, b, _) = &bases[k];
        let (shift, d) = align_orbits(a, b, *from, 1.0);
        rep.check(Check::at_most(
            &format!("orbits from -{n0} and -{n1}"),
            d,
            p.tol,
            format!("time shift {shift:.6}"),
        ));
        pairs.push(json!({ "n": [n0, n1], "time_shift": shift, "distance": d }));
    }
    cx.out.write_json(
        "entire",
        "probe.json",
        &json!({ "probes": probes, "base_pairs": pairs }),
    )?;
    Ok(rep)
}

// dense rows at the start of the window and a sweep to its end
fn probe_grids(
    t0: f64,
    t1: f64,
    x_min: f64,
    x_max: f64,
    nt: usize,
    h: f64,
    dt: f64,
) -> [ProbeGrid; 2] {
    let nx = ((x_max - x_min) / h).round() as usize + 1;
    let g = |a: f64, b: f64| ProbeGrid {
        t_min: a,
        t_max: b,
        nt,
        x_min,
        x_max,
        nx,
        h,
        dt,
    };
    [g(t0, (t0 + 10.0).min(t1)), g(t0, t1)]
}

pub fn envelopes(cx: &Context) -> Result<VerificationReport, CliError> {
    let (wave1, wave2) = cx.waves("envelopes")?;
    let traj = cx.trajectory("envelopes")?;
    let mut rep = cx.report("envelopes");
    let r = cx.reaction()?;
    let sec = cx.cfg.envelopes;
    let ap = appendix(&r, &wave1)?;
    let lower = derive_lower(&r, &wave1, &wave2, &traj)?;
    let upper1 = derive_upper1(&r, &wave1, &traj, &lower)?;
    let upper2 = derive_upper2(&r, &wave1, &wave2, &traj, &lower, &upper1)?;
    cx.out.write_json(
        "envelopes",
        "ledger.json",
        &json!({ "lower": lower, "upper_phi1": upper1, "upper_phi2": upper2, "appendix": ap }),
    )?;

    let (x_min, x_max) = (traj.grid.x_min, traj.grid.x_max);
    let t_end = traj.t_end();
    let envs: [(&str, &dyn Envelope, f64, f64, f64, f64); 5] = [
        (
            "lower",
            &LowerEnvelope {
                params: &lower,
                wave2: &wave2,
            },
            lower.t_lambda,
            t_end,
            x_min,
            x_max + lower.beta_minus_final,
        ),
        (
            "upper phi1",
            &Upper1Envelope {
                params: &upper1,
                wave1: &wave1,
            },
            upper1.t_plus,
            t_end,
            x_min - upper1.beta1_plus,
            x_max,
        ),
        (
            "upper phi2",
            &Upper2Envelope {
                params: &upper2,
                wave2: &wave2,
            },
            upper2.t_start,
            t_end,
            x_min - upper2.beta2_plus,
            x_max,
        ),
        (
            "w-",
            &AppendixEnvelope {
                params: &ap,
                wave1: &wave1,
                side: Side::Lower,
            },
            traj.t_start(),
            ap.t1,
            x_min,
            x_max,
        ),
        (
            "w+",
            &AppendixEnvelope {
                params: &ap,
                wave1: &wave1,
                side: Side::Upper,
            },
            traj.t_start(),
            ap.t1,
            x_min,
            x_max,
        ),
    ];
    let mut orderings = Vec::new();
    let mut residuals = Vec::new();
    for (name, env, t0, t1, a, b) in envs {
        let o = check_ordering(&traj, env, sec.ordering_tol)?;
        rep.check(Check::at_most(
            &format!("{name} ordering"),
            o.worst,
            sec.ordering_tol,
            format!("worst at t = {}, x = {}", o.at_t, o.at_x),
        ));
        orderings.push(json!({ "envelope": name, "report": o }));
        if t1 <= t0 {
            rep.warn(format!("{name}: empty residual window"));
            continue;
        }
        let (mut worst, mut evaluated, mut at) = (f64::NEG_INFINITY, 0, (f64::NAN, f64::NAN));
        for g in probe_grids(t0, t1, a, b, sec.probe_nt, sec.probe_h, traj.dt) {
            let res = residual_sign_check(env, &r, &g);
            evaluated += res.evaluated;
            if res.worst_wrong_sign > worst {
                worst = res.worst_wrong_sign;
                at = (res.at_t, res.at_x);
            }
        }
        if evaluated == 0 {
            rep.warn(format!("{name}: no smooth probe points"));
        } else {
            rep.check(Check::at_most(
                &format!("{name} residual sign"),
                worst,
                sec.residual_tol,
                format!("worst at t = {}, x = {}", at.0, at.1),
            ));
        }
        residuals.push(json!({ "envelope": name, "worst_wrong_sign": worst, "evaluated": evaluated, "at_t": at.0, "at_x": at.1 }));
    }
    cx.out
        .write_json("envelopes", "ordering.json", &orderings)?;
    cx.out
        .write_json("envelopes", "residuals.json", &residuals)?;
    rep.measure("omega", lower.omega);
    rep.measure("rho", lower.rho);
    rep.measure("T_upper2", upper2.t_start);
    rep.measure("M", ap.drift);
    rep.measure("T", ap.t_front);
    rep.measure("T1", ap.t1);
    Ok(rep)
}

pub fn lyapunov(cx: &Context) -> Result<VerificationReport, CliError> {
    let (_, wave2) = cx.waves("lyapunov")?;
    let mut traj = cx.trajectory("lyapunov")?;
    let mut rep = cx.report("lyapunov");
    let r = cx.reaction()?;
    let sec = cx.cfg.lyapunov;
    let c2 = wave2.speed;
    let m = match sec.m {
        CutoffSlope::Fixed(m) => Some(m),
        CutoffSlope::Named(CutoffChoice::Auto) => Some(auto_m(c2, sec.eta)),
        CutoffSlope::Named(CutoffChoice::None) => None,
    };
    traj.snapshots.retain(|s| s.t >= sec.from);
    let zg = SimGrid::new(sec.z_min, sec.z_max, traj.grid.h)?;
    let moving = to_moving_frame(&traj, c2, Some(&zg))?;
    let opts = LyapunovOptions {
        m,
        eta: sec.eta,
        x0: cx.cfg.reaction.x0,
        tol: sec.tol,
    };
    let s = lyapunov_series(&moving, &r.f2, c2, opts)?;
    cx.out.write_text("lyapunov", "lyapunov.csv", &s.to_csv())?;
    cx.out.write_json("lyapunov", "series.json", &s)?;

    let n = s.times.len();
    let interior = |v: &[f64]| v[1..n - 1].iter().map(|x| x.abs()).fold(0.0, f64::max);
    rep.check(Check::holds(
        "energy bounded",
        s.sup_abs_l.is_finite(),
        format!("sup |L| = {}", s.sup_abs_l),
    ));
    rep.check(Check::at_most(
        "energy identity",
        interior(&s.identity_residual),
        sec.tol,
        "|L' + Q - X| with X the cutoff cross term",
    ));
    rep.check(Check::at_most(
        "late dissipation",
        s.late_min_q,
        sec.late_q_tol,
        "min Q over the final quarter",
    ));
    let mut q_wave = 0.0f64;
    for beta in [-2.0, 0.0, 3.0] {
        let u: Vec<f64> = zg.nodes().iter().map(|&z| wave2.eval(z + beta)).collect();
        q_wave = q_wave.max(eval_q(&u, &zg, c2, &r.f2).value);
    }
    rep.check(Check::at_most(
        "dissipation of the front",
        q_wave,
        sec.wave_q_tol,
        "Q of shifted phi2",
    ));
    rep.measure("sup_abs_L", s.sup_abs_l);
    if let Some(m) = m {
        rep.measure("m", m);
    }
    if let Some(t) = s.vanishing_time {
        rep.measure("vanishing_time", t);
        rep.measure("defect_after_vanishing_time", s.tail_max_defect(t));
    }
    if let Some(t) = s.settle_time {
        rep.measure("settle_time", t);
    }
    rep.measure("max_strip_term", interior(&s.strip_terms));
    if s.truncated_snapshots > 0 {
        rep.warn(format!(
            "{} snapshots have integrands above the truncation level at the grid ends",
            s.truncated_snapshots
        ));
    }
    Ok(rep)
}

pub fn metrics(cx: &Context) -> Result<VerificationReport, CliError> {
    let (wave1, wave2) = cx.waves("metrics")?;
    let traj = cx.trajectory("metrics")?;
    let mut rep = cx.report("metrics");
    let r = cx.reaction()?;
    let sec = cx.cfg.metrics;
    let c2 = wave2.speed;
    let mut series = speed_series(&traj, sec.level)?;
    let quarter = traj.t_end() - 0.25 * (traj.t_end() - traj.t_start());
    let (times, betas, dists) = shift_series(&traj, &wave2, quarter)?;
    let offset = traj.snapshots.len() - times.len();
    series.shifts = vec![f64::NAN; traj.snapshots.len()];
    series.distances = vec![f64::NAN; traj.snapshots.len()];
    series.shifts[offset..].copy_from_slice(&betas);
    series.distances[offset..].copy_from_slice(&dists);
    cx.out
        .write_text("metrics", "front_series.csv", &series.to_csv())?;

    let rel = (series.terminal_speed + c2).abs() / c2;
    rep.check(Check::at_most(
        "terminal speed",
        rel,
        sec.speed_rel_tol,
        format!("{} against -{c2}", series.terminal_speed),
    ));
    let (beta, dist) = fit_shift(traj.snapshots.last().unwrap(), &traj.grid, &wave2)?;
    rep.check(Check::at_most(
        "final distance",
        dist,
        sec.dist_tol,
        format!("beta = {beta}"),
    ));
    let drift = betas.iter().map(|b| (b - beta).abs()).fold(0.0, f64::max);
    rep.check(Check::at_most(
        "shift stability",
        drift,
        sec.beta_tol,
        "max |beta(t) - beta(end)| over the last quarter",
    ));
    rep.measure("speed1", wave1.speed);
    rep.measure("speed2", c2);
    rep.measure("terminal_speed", series.terminal_speed);
    rep.measure("beta", beta);

    let mut late = traj.clone();
    let k = traj.snapshots.len();
    late.snapshots = traj.snapshots[k.saturating_sub(3)..].to_vec();
    let moving = to_moving_frame(&late, c2, None)?;
    let decay = decay_check(
        &moving,
        c2,
        sec.decay_eta,
        DecayWindow::at(moving.snapshots[1].t),
    )?;
    rep.check(Check::holds(
        "decay away from the front",
        decay.passed,
        "fitted sigma above c2/2 on both sides",
    ));
    for f in &decay.fits {
        if f.skipped.is_none() {
            rep.measure(
                &format!("decay.{}.{:?}", f.quantity, f.side).to_lowercase(),
                f.rate,
            );
        }
    }
    cx.out.write_json("metrics", "decay.json", &decay)?;

    let ap = appendix(&r, &wave1)?;
    let zones: Vec<_> = (1..k - 1)
        .filter(|&j| traj.snapshots[j].t <= ap.t1)
        .map(|j| trajectory_zone(&traj, j, cx.cfg.entire.eta))
        .collect::<Result<_, _>>()?;
    let delta = zones
        .iter()
        .filter_map(|z| z.min_dudt)
        .fold(f64::INFINITY, f64::min);
    if delta.is_finite() {
        rep.measure("early_zone_min_dudt", delta);
    }
    cx.out.write_json("metrics", "zones.json", &zones)?;
    Ok(rep)
}
