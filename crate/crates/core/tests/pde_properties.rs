use frontlab::envelopes::derive_appendix;
use frontlab::frontmetrics::{front_position, speed_series, FRONT_LEVEL};
use frontlab::interp::BlendKind;
use frontlab::pde::{
    appendix_initial, construct_entire, simulate, to_moving_frame, uniqueness_probe, EntireOptions,
    Frame, ProbeOptions, SimGrid,
};
use frontlab::reaction::{BistableNonlinearity, SpatialReaction};
use frontlab::waves::solve_wave;
use frontlab::Error;
use proptest::prelude::*;

fn cubic(theta: f64) -> BistableNonlinearity {
    BistableNonlinearity::cubic(theta, 1.0).unwrap()
}

fn pair() -> SpatialReaction {
    SpatialReaction::new(cubic(0.2), cubic(0.3), 2.0, BlendKind::Quintic).unwrap()
}

fn max_gap(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10))]

    #[test]
    fn ordered_data_stay_ordered(seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let r = pair();
        let g = SimGrid::new(-9.95, 9.95, 0.1).unwrap();
        let u0: Vec<f64> = (0..g.n).map(|_| rng.gen_range(0.0..1.0)).collect();
        let v0: Vec<f64> = u0.iter().map(|&u| u + rng.gen_range(0.0..=(1.0 - u))).collect();
        let a = simulate(&r, &g, &u0, 0.0, 10.0, 0.01, Frame::Lab, 0.01).unwrap();
        let b = simulate(&r, &g, &v0, 0.0, 10.0, 0.01, Frame::Lab, 0.01).unwrap();
        for (sa, sb) in a.snapshots.iter().zip(&b.snapshots) {
            for (x, y) in sa.u.iter().zip(&sb.u) {
                prop_assert!(*x <= y + 1e-10, "t {}: {} > {}", sa.t, x, y);
            }
        }
        prop_assert_eq!(a.clamp_events + b.clamp_events, 0);
    }

    #[test]
    fn moving_frame_front_sits_at_shifted_position(c in 0.05f64..0.6) {
        let r = SpatialReaction::homogeneous(cubic(0.3)).unwrap();
        let g = SimGrid::new(-30.0, 30.0, 0.05).unwrap();
        let u0: Vec<f64> = g.nodes().iter().map(|x| 0.5 * (1.0 + (x / 2.0).tanh())).collect();
        let lab = simulate(&r, &g, &u0, 0.0, 4.0, 0.01, Frame::Lab, 1.0).unwrap();
        let moving = to_moving_frame(&lab, c, None).unwrap();
        for (s, m) in lab.snapshots.iter().zip(&moving.snapshots) {
            let p = front_position(s, &lab.grid, FRONT_LEVEL).unwrap();
            let q = front_position(m, &moving.grid, FRONT_LEVEL).unwrap();
            prop_assert!((q - (p + c * s.t)).abs() < 2e-3, "t {}: {} vs {}", s.t, q, p + c * s.t);
        }
    }
}

#[test]
fn exact_wave_travels_at_its_speed() {
    let f = cubic(0.2);
    let r = SpatialReaction::homogeneous(f.clone()).unwrap();
    let p = solve_wave(&f, -60.0, 60.0, 0.05, 1e-8).unwrap();
    let g = SimGrid::new(-60.0, 60.0, 0.05).unwrap();
    let u0: Vec<f64> = g.nodes().iter().map(|&x| p.eval(x + 20.0)).collect();
    let tr = simulate(&r, &g, &u0, 0.0, 50.0, 0.005, Frame::Lab, 1.0).unwrap();
    let s = speed_series(&tr, FRONT_LEVEL).unwrap();
    let c1 = 0.6 / std::f64::consts::SQRT_2;
    assert!(
        (s.terminal_speed + c1).abs() <= 0.01 * c1,
        "{}",
        s.terminal_speed
    );
    let drift = (s.positions[50] - s.positions[0]) / 50.0;
    assert!((drift + c1).abs() <= 0.01 * c1, "{drift}");
    assert_eq!(tr.clamp_events, 0);
}

#[test]
fn interior_zero_is_an_equilibrium_of_the_homogeneous_problem() {
    let r = SpatialReaction::homogeneous(cubic(0.2)).unwrap();
    let g = SimGrid::new(-10.0, 10.0, 0.1).unwrap();
    let tr = simulate(&r, &g, &vec![0.2; g.n], 0.0, 20.0, 0.01, Frame::Lab, 1.0).unwrap();
    for s in &tr.snapshots {
        assert!(s.u.iter().all(|&v| (v - 0.2).abs() < 1e-12));
    }
}

#[test]
fn front_data_increase_in_time() {
    let r = pair();
    let g = SimGrid::new(-40.0, 40.0, 0.1).unwrap();
    let u0: Vec<f64> = g
        .nodes()
        .iter()
        .map(|&x| 1.0 / (1.0 + (-(x - 10.0) / std::f64::consts::SQRT_2).exp()))
        .collect();
    let tr = simulate(&r, &g, &u0, 0.0, 30.0, 0.01, Frame::Lab, 0.5).unwrap();
    for k in 1..tr.snapshots.len() - 1 {
        if tr.snapshots[k].t < 1.0 {
            continue;
        }
        let d = tr.time_derivative(k);
        let m = d.iter().cloned().fold(f64::INFINITY, f64::min);
        assert!(m >= -1e-8, "t {}: {m}", tr.snapshots[k].t);
    }
}

#[test]
fn moving_frame_keeps_the_exact_wave_still() {
    let f = cubic(0.3);
    let r = SpatialReaction::homogeneous(f.clone()).unwrap();
    let p = solve_wave(&f, -60.0, 60.0, 0.05, 1e-8).unwrap();
    let g = SimGrid::new(-50.0, 50.0, 0.05).unwrap();
    let u0: Vec<f64> = g.nodes().iter().map(|&x| p.eval(x)).collect();
    let lab = simulate(&r, &g, &u0, 0.0, 5.0, 0.005, Frame::Lab, 1.0).unwrap();
    // resample the exact solution φ(x + ct) itself, so only interpolation error remains
    let mut exact = lab.clone();
    for s in &mut exact.snapshots {
        s.u = g
            .nodes()
            .iter()
            .map(|&x| p.eval(x + p.speed * s.t))
            .collect();
    }
    let zg = SimGrid::new(-20.0, 20.0, 0.05).unwrap();
    let moving = to_moving_frame(&exact, p.speed, Some(&zg)).unwrap();
    let first = &moving.snapshots[0].u;
    for s in &moving.snapshots {
        assert!(max_gap(&s.u, first) <= 1e-6, "t {}", s.t);
    }
}

fn final_field(h: f64, dt: f64) -> Vec<f64> {
    let r = pair();
    let g = SimGrid::new(-20.0, 20.0, h).unwrap();
    let u0: Vec<f64> = g
        .nodes()
        .iter()
        .map(|&x| 0.5 * (1.0 + (x / 2.0).tanh()))
        .collect();
    simulate(&r, &g, &u0, 0.0, 2.0, dt, Frame::Lab, 2.0)
        .unwrap()
        .snapshots
        .pop()
        .unwrap()
        .u
}

// L∞ gap on the coarse nodes, which every finer grid contains
fn coarse_gap(coarse: &[f64], fine: &[f64]) -> f64 {
    let stride = (fine.len() - 1) / (coarse.len() - 1);
    coarse
        .iter()
        .enumerate()
        .map(|(i, v)| (v - fine[i * stride]).abs())
        .fold(0.0, f64::max)
}

#[test]
fn self_convergence_is_second_order() {
    let (h, dt) = (0.2, 0.02);
    let coarse = final_field(h, dt);
    let mid = final_field(h / 2.0, dt / 4.0);
    let fine = final_field(h / 4.0, dt / 16.0);
    let e1 = coarse_gap(&coarse, &mid);
    let e2 = coarse_gap(&mid, &fine);
    assert!(e1 <= 4.5 * e2, "{e1} vs {e2}");
    assert!(e1 >= 3.0 * e2, "{e1} vs {e2}");
}

#[test]
fn entire_construction_starts_on_the_subsolution() {
    let r = pair();
    let w1 = solve_wave(&r.f1, -60.0, 60.0, 0.05, 1e-8).unwrap();
    let ap = derive_appendix(&w1, &r.f1).unwrap();
    let g = SimGrid::new(-60.0, 30.0, 0.1).unwrap();
    let opts = EntireOptions {
        dt: 0.01,
        t_end: -15.0,
        snapshot_every: 0.5,
        eta: 0.05,
        delta_until: ap.t1,
    };
    let (runs, rep) = construct_entire(&r, &w1, &ap, &[20, 30], &g, opts).unwrap();
    assert_eq!(rep.init_mismatch, 0.0);
    for (tr, n) in runs.iter().zip([20u32, 30]) {
        assert_eq!(
            tr.snapshots[0].u,
            appendix_initial(&ap, &w1, &g, n).unwrap()
        );
    }
    assert!(rep.worst_ordering >= -1e-4, "{}", rep.worst_ordering);
    assert!(matches!(
        construct_entire(&r, &w1, &ap, &[20], &g, opts),
        Err(Error::Config(_))
    ));
}

#[test]
fn probe_perturbations_of_either_sign_stay_in_range() {
    let r = pair();
    let w1 = solve_wave(&r.f1, -60.0, 60.0, 0.05, 1e-8).unwrap();
    let ap = derive_appendix(&w1, &r.f1).unwrap();
    let g = SimGrid::new(-60.0, 30.0, 0.2).unwrap();
    // Gronwall: sup-norm gaps grow at most like e^{Lt}
    let growth = (r.lipschitz_bound() * 5.0).exp();
    let mut signs = Vec::new();
    for seed in 0..6 {
        let opts = ProbeOptions {
            dt: 0.02,
            t_end: -15.0,
            snapshot_every: 1.0,
            eta: 0.05,
            seed,
            late_fraction: 0.5,
        };
        let (base, rep) = uniqueness_probe(&r, &w1, &ap, 20, &[1e-3, 2e-2], &g, opts).unwrap();
        assert_eq!(base.clamp_events, 0);
        for c in &rep.cases {
            assert!(c.raw_distance <= c.epsilon * growth, "{c:?}");
            signs.push(c.bump_sign);
        }
    }
    assert!(signs.contains(&1.0) && signs.contains(&-1.0), "{signs:?}");
}
