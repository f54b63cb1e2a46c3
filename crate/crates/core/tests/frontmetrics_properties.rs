use frontlab::frontmetrics::{
    decay_check, fit_shift, front_position, speed_series, transition_zone, DecayWindow, Side,
    FRONT_LEVEL,
};
use frontlab::pde::{simulate, Frame, SimGrid, Snapshot, Trajectory};
use frontlab::reaction::{BistableNonlinearity, SpatialReaction};
use frontlab::waves::{solve_wave, WaveProfile};
use frontlab::Error;
use proptest::prelude::*;
use std::sync::OnceLock;

fn phi2() -> &'static WaveProfile {
    static P: OnceLock<WaveProfile> = OnceLock::new();
    P.get_or_init(|| {
        solve_wave(
            &BistableNonlinearity::cubic(0.3, 1.0).unwrap(),
            -60.0,
            60.0,
            0.05,
            1e-8,
        )
        .unwrap()
    })
}

fn sampled(g: &SimGrid, f: impl Fn(f64) -> f64) -> Snapshot {
    Snapshot {
        t: 0.0,
        u: g.nodes().into_iter().map(f).collect(),
        frame: Frame::Lab,
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10))]

    #[test]
    fn fitting_a_translate_adds_the_translation(base in -3.0f64..3.0, delta in -4.0f64..4.0) {
        let p = phi2();
        let g = SimGrid::new(-30.0, 30.0, 0.05).unwrap();
        let (b0, _) = fit_shift(&sampled(&g, |x| p.eval(x + base)), &g, p).unwrap();
        let (b1, _) = fit_shift(&sampled(&g, |x| p.eval(x - delta + base)), &g, p).unwrap();
        prop_assert!((b1 - (b0 - delta)).abs() <= 1e-6, "{} vs {}", b1, b0 - delta);
    }
}

#[test]
fn exact_profile_fits_with_no_shift() {
    let p = phi2();
    let g = SimGrid::new(-30.0, 30.0, 0.05).unwrap();
    let (b, d) = fit_shift(&sampled(&g, |x| p.eval(x)), &g, p).unwrap();
    assert!(b.abs() <= 1e-10 && d <= 1e-10, "{b} {d}");
    let (b, d) = fit_shift(&sampled(&g, |x| p.eval(x + 1.5)), &g, p).unwrap();
    assert!((b - 1.5).abs() <= 1e-6 && d <= 1e-6, "{b} {d}");
}

#[test]
fn small_perturbation_barely_moves_the_fit() {
    let p = phi2();
    let g = SimGrid::new(-30.0, 30.0, 0.05).unwrap();
    let s = sampled(&g, |x| (p.eval(x) + 0.01 * (0.7 * x).sin()).clamp(0.0, 1.0));
    let (b, d) = fit_shift(&s, &g, p).unwrap();
    assert!(b.abs() <= 0.05 && d <= 0.011, "{b} {d}");
}

#[test]
fn far_data_fail_the_basin_guard() {
    let p = phi2();
    let g = SimGrid::new(-30.0, 30.0, 0.05).unwrap();
    let s = sampled(&g, |x| {
        if (x - 3.0).abs() < 2.0 {
            0.9
        } else {
            p.eval(x) * 0.2
        }
    });
    assert!(matches!(fit_shift(&s, &g, p), Err(Error::Fit(_))));
}

#[test]
fn flat_states_have_no_front() {
    let g = SimGrid::new(-10.0, 10.0, 0.1).unwrap();
    assert!(matches!(
        front_position(&sampled(&g, |_| 0.3), &g, FRONT_LEVEL),
        Err(Error::Extraction { .. })
    ));
    let r = SpatialReaction::homogeneous(BistableNonlinearity::cubic(0.3, 1.0).unwrap()).unwrap();
    let tr = simulate(&r, &g, &vec![0.0; g.n], 0.0, 2.0, 0.01, Frame::Lab, 1.0).unwrap();
    assert!(matches!(
        speed_series(&tr, FRONT_LEVEL),
        Err(Error::Extraction { .. })
    ));
    let z = transition_zone(&sampled(&g, |_| 1.0), &g, 0.2, None).unwrap();
    assert_eq!(z.interval, None);
}

#[test]
fn tail_fits_of_the_exact_profile_recover_the_decay_rates() {
    let p = phi2();
    let g = SimGrid::new(-40.0, 40.0, 0.05).unwrap();
    let u: Vec<f64> = g.nodes().iter().map(|&z| p.eval(z)).collect();
    let frame = Frame::Moving { speed: p.speed };
    let snapshots = (0..3)
        .map(|k| Snapshot {
            t: 10.0 + k as f64,
            u: u.clone(),
            frame,
        })
        .collect();
    let traj = Trajectory {
        grid: g,
        snapshots,
        dt: 0.01,
        frame,
        reaction_fingerprint: String::new(),
        boundary_report: Default::default(),
        clamp_events: 0,
        steps: 0,
    };
    let rep = decay_check(&traj, p.speed, 0.05, DecayWindow::at(11.0)).unwrap();
    assert!(rep.passed);
    for f in rep.fits.iter().filter(|f| f.quantity != "time_derivative") {
        let expected = match f.side {
            Side::Left => p.lambda,
            Side::Right => p.mu,
        };
        assert!(
            (f.rate - expected).abs() <= 0.02 * expected,
            "{} {:?}: {}",
            f.quantity,
            f.side,
            f.rate
        );
    }
    assert!(rep
        .fits
        .iter()
        .filter(|f| f.quantity == "time_derivative")
        .all(|f| f.skipped.is_some()));
}
