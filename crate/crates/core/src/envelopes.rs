//! Explicit sub- and supersolutions bracketing the front: the late-time lower
//! envelope along `φ₂`, the upper envelopes along `φ₁` and `φ₂`, and the early-time
//! pair `w±` built from two `φ₁` fronts. Each comes with a ledger of its constants.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::frontmetrics::profile_level_position;
use crate::pde::{Frame, Trajectory};
use crate::reaction::{BistableNonlinearity, SpatialReaction, VALIDATION_POINTS};
use crate::waves::{EnvelopeConstants, WaveProfile};

/// Resolution of the shift scans before bisection refinement.
pub const SHIFT_STEP: f64 = 1e-3;
/// Largest shift considered by the scans.
pub const SHIFT_MAX: f64 = 400.0;
/// Pointwise slack allowed when comparing a shifted profile with stored data.
pub const SHIFT_SLACK: f64 = 1e-10;
/// Relative tolerance under which the two tail rates count as equal.
pub const RATE_TIE: f64 = 1e-6;

type Bindings = BTreeMap<String, String>;

fn bind(map: &mut Bindings, key: &str, why: impl Into<String>) {
    map.insert(key.to_string(), why.into());
}

/// `sup_{[0,1]} |f'|` on the validation grid.
pub fn sup_slope(f: &BistableNonlinearity) -> f64 {
    (0..=VALIDATION_POINTS)
        .map(|i| f.slope(i as f64 / VALIDATION_POINTS as f64).abs())
        .fold(0.0, f64::max)
}

/// Decay exponent shared by all envelope corrections.
pub fn omega_for(r: &SpatialReaction) -> f64 {
    [
        r.f1.derivative_at_0,
        r.f1.derivative_at_1,
        r.f2.derivative_at_0,
        r.f2.derivative_at_1,
    ]
    .iter()
    .map(|d| d.abs() / 4.0)
    .fold(1.0, f64::min)
}

const MODULUS_SAMPLES: usize = 400;

// which of the four endpoint-modulus conditions fails at width `rho`, if any
fn modulus_failure(r: &SpatialReaction, omega: f64, rho: f64) -> Option<&'static str> {
    for (name, f) in [("f1", &r.f1), ("f2", &r.f2)] {
        for k in 0..=MODULUS_SAMPLES {
            let s = rho * k as f64 / MODULUS_SAMPLES as f64;
            if (f.slope(s) - f.derivative_at_0).abs() > omega {
                return Some(if name == "f1" {
                    "f1 near 0"
                } else {
                    "f2 near 0"
                });
            }
            if (f.slope(1.0 - s) - f.derivative_at_1).abs() > omega {
                return Some(if name == "f1" {
                    "f1 near 1"
                } else {
                    "f2 near 1"
                });
            }
        }
    }
    None
}

/// Largest width `ρ ≤ 1` on which both slopes stay within `ω` of their
/// endpoint values, with the condition that binds.
pub fn derive_rho(r: &SpatialReaction, omega: f64) -> (f64, &'static str) {
    if modulus_failure(r, omega, 1.0).is_none() {
        return (1.0, "cap at 1");
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..80 {
        let mid = 0.5 * (lo + hi);
        if modulus_failure(r, omega, mid).is_none() {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    (lo, modulus_failure(r, omega, hi).unwrap_or("f1 near 0"))
}

/// Half-width of the core of `p`: outside `[-A, A]` the profile is within `level` of 0 or 1.
pub fn core_half_width(p: &WaveProfile, level: f64) -> f64 {
    let right = profile_level_position(p, 1.0 - level);
    let left = profile_level_position(p, level);
    right.max(-left).max(0.0)
}

/// `min φ'` over `[-a, a]`.
pub fn min_slope(p: &WaveProfile, a: f64) -> f64 {
    let n = 4000;
    (0..=n)
        .map(|k| p.eval_slope(-a + 2.0 * a * k as f64 / n as f64))
        .fold(f64::INFINITY, f64::min)
}

// smallest shift on the scan grid satisfying a monotone predicate, refined by bisection
fn smallest_shift<P: Fn(f64) -> bool>(pred: P) -> Option<f64> {
    let kmax = (SHIFT_MAX / SHIFT_STEP).round() as usize;
    if !pred(kmax as f64 * SHIFT_STEP) {
        return None;
    }
    if pred(0.0) {
        return Some(0.0);
    }
    let (mut lo, mut hi) = (0usize, kmax);
    while hi - lo > 1 {
        let mid = (lo + hi) / 2;
        if pred(mid as f64 * SHIFT_STEP) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let (mut a, mut b) = (lo as f64 * SHIFT_STEP, hi as f64 * SHIFT_STEP);
    for _ in 0..40 {
        let m = 0.5 * (a + b);
        if pred(m) {
            b = m;
        } else {
            a = m;
        }
    }
    Some(b)
}

fn require_lab(traj: &Trajectory) -> Result<()> {
    if traj.frame != Frame::Lab {
        return Err(Error::Config(
            "envelope derivations need a lab-frame trajectory".into(),
        ));
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct LowerEnvelopeParams {
    pub omega: f64,
    pub rho: f64,
    pub a_minus: f64,
    pub delta2_minus: f64,
    pub mu2_minus: f64,
    /// Absolute time at which the comparison starts.
    pub t_lambda: f64,
    /// Shift found at `t_λ`.
    pub beta_minus: f64,
    /// Shift of the final bound `φ₂(x + c₂t - β) - C e^{-ωt}`.
    pub beta_minus_final: f64,
    pub c_minus: f64,
    pub zeta_minus: f64,
    pub zeta_plus: f64,
    pub sup_df2: f64,
    pub speed2: f64,
    /// Initial value of the drift correction.
    pub drift0: f64,
    pub bindings: Bindings,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Upper1EnvelopeParams {
    pub omega: f64,
    pub mu_plus: f64,
    pub a_plus: f64,
    pub delta1_plus: f64,
    pub t_plus: f64,
    pub beta_raw: f64,
    /// Shift of the final bound `φ₁(x + c₁t + β) + C e^{-ωt}`.
    pub beta1_plus: f64,
    pub c1_plus: f64,
    pub sup_df1: f64,
    pub speed1: f64,
    pub drift0: f64,
    pub zeta_minus: f64,
    pub zeta_plus: f64,
    pub bindings: Bindings,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Upper2EnvelopeParams {
    /// Start time of the comparison.
    pub t_start: f64,
    pub gamma: f64,
    pub c_f: f64,
    pub c_phi2: f64,
    /// Decay rate of `1 - φ₂`.
    pub lambda: f64,
    pub delta2_plus: f64,
    pub beta: f64,
    /// Effective decay rate of the correction.
    pub eta: f64,
    pub omega: f64,
    pub omega_reduced: bool,
    pub rho: f64,
    pub a_minus: f64,
    pub x0: f64,
    pub speed2: f64,
    pub sup_df2: f64,
    /// Forcing amplitude `C_f C_φ₂ e^{λ(x0 - c₂T)}`.
    pub forcing: f64,
    pub zeta_tilde_minus: f64,
    pub zeta_tilde_plus: f64,
    /// Shift of the final bound, `β + V(∞)`.
    pub beta2_plus: f64,
    /// Prefactor of the final bound `C e^{-ηt}`.
    pub c2_plus: f64,
    pub bindings: Bindings,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct AppendixParams {
    /// Drift coefficient in `ξ' = M e^{λ(c₁t + ξ)}`.
    #[serde(rename = "M")]
    pub drift: f64,
    /// Last time with `c₁t + ξ(t) ≤ 0`.
    #[serde(rename = "T")]
    pub t_front: f64,
    /// Validity limit of the pair.
    #[serde(rename = "T1")]
    pub t1: f64,
    /// Constant of `|f₁(u+v) - f₁(u) - f₁(v)| ≤ L uv`.
    #[serde(rename = "L")]
    pub c11: f64,
    #[serde(rename = "L1")]
    pub margin_plus: f64,
    #[serde(rename = "L2")]
    pub margin_minus: f64,
    /// Lower bound constant for the correction term when `λ < μ`.
    pub c_tilde: Option<f64>,
    pub lambda: f64,
    pub mu: f64,
    pub speed1: f64,
    pub theta1: f64,
    pub envelope: EnvelopeConstants,
    pub bindings: Bindings,
}

/// Constants shared by the late-time envelopes.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct SharedRates {
    pub omega: f64,
    pub rho: f64,
    pub mu_minus: f64,
}

pub fn shared_rates(r: &SpatialReaction) -> (SharedRates, &'static str) {
    let omega = omega_for(r);
    let (rho, binding) = derive_rho(r, omega);
    (
        SharedRates {
            omega,
            rho,
            mu_minus: (rho / 2.0).min(0.5),
        },
        binding,
    )
}

// zeta bounds where both fronts are within `level` of their end states at time t
fn compact_bounds(wave1: &WaveProfile, wave2: &WaveProfile, t: f64, level: f64) -> (f64, f64) {
    let plus = (profile_level_position(wave1, 1.0 - level) - wave1.speed * t)
        .max(profile_level_position(wave2, 1.0 - level) - wave2.speed * t);
    let minus = (profile_level_position(wave1, level) - wave1.speed * t)
        .min(profile_level_position(wave2, level) - wave2.speed * t);
    (minus.min(0.0), plus.max(0.0))
}

/// Lower envelope constants: earliest snapshot where the run is within `μ₂⁻/2`
/// of the `φ₁` front outside the core, and the smallest lag of `φ₂` below it.
pub fn derive_lower(
    r: &SpatialReaction,
    wave1: &WaveProfile,
    wave2: &WaveProfile,
    traj: &Trajectory,
) -> Result<LowerEnvelopeParams> {
    require_lab(traj)?;
    let (rates, rho_binding) = shared_rates(r);
    let SharedRates {
        omega,
        rho,
        mu_minus,
    } = rates;
    let mut bindings = Bindings::new();
    bind(
        &mut bindings,
        "omega",
        "quarter of the smallest endpoint slope, capped at 1",
    );
    bind(
        &mut bindings,
        "rho",
        format!("largest width with slope modulus ≤ omega; binding: {rho_binding}"),
    );
    let a_minus = core_half_width(wave2, rho / 2.0);
    bind(
        &mut bindings,
        "a_minus",
        "phi2 within rho/2 of its limits outside [-A, A]",
    );
    let delta2_minus = min_slope(wave2, a_minus);
    let closeness = mu_minus / 2.0;
    let g = &traj.grid;
    let xs = g.nodes();

    let mut found = None;
    for s in &traj.snapshots {
        let (zm, zp) = compact_bounds(wave1, wave2, s.t, closeness);
        let outside = xs
            .iter()
            .zip(&s.u)
            .filter(|(&x, _)| x < zm || x > zp)
            .map(|(&x, &v)| (v - wave1.eval(x + wave1.speed * s.t)).abs())
            .fold(0.0, f64::max);
        if outside <= closeness {
            found = Some((s, zm, zp));
            break;
        }
    }
    let Some((snap, zm, zp)) = found else {
        return Err(Error::Derivation(format!(
            "no snapshot is within {closeness:.3e} of the first front outside its core; the run starts too late"
        )));
    };
    bind(
        &mut bindings,
        "t_lambda",
        "earliest snapshot close to the first front outside the core",
    );
    let t = snap.t;
    let core: Vec<(f64, f64)> = xs
        .iter()
        .zip(&snap.u)
        .filter(|(&x, _)| x >= zm && x <= zp)
        .map(|(&x, &v)| (x, v))
        .collect();
    let beta_minus = smallest_shift(|b| {
        core.iter()
            .all(|&(x, v)| wave2.eval(x + wave2.speed * t - b) <= v + SHIFT_SLACK)
    })
    .ok_or_else(|| Error::Derivation("no admissible lag for the lower envelope".into()))?;
    bind(
        &mut bindings,
        "beta_minus",
        "smallest lag putting phi2 below the run on the core",
    );
    let sup_df2 = sup_slope(&r.f2);
    let drift0 = 4.0 * sup_df2 * mu_minus / (delta2_minus * omega);
    Ok(LowerEnvelopeParams {
        omega,
        rho,
        a_minus,
        delta2_minus,
        mu2_minus: mu_minus,
        t_lambda: t,
        beta_minus,
        beta_minus_final: beta_minus + drift0,
        c_minus: mu_minus * (omega * t).exp(),
        zeta_minus: zm,
        zeta_plus: zp,
        sup_df2,
        speed2: wave2.speed,
        drift0,
        bindings,
    })
}

/// `v⁻(s) = μ₂⁻ e^{-ωs}`.
pub fn lower_correction(p: &LowerEnvelopeParams, s: f64) -> f64 {
    p.mu2_minus * (-p.omega * s).exp()
}

/// `V₂⁻(s)`, the lag that grows as the correction decays.
pub fn lower_drift(p: &LowerEnvelopeParams, s: f64) -> f64 {
    p.drift0 * (-p.omega * s).exp()
}

fn lower_raw(p: &LowerEnvelopeParams, wave2: &WaveProfile, s: f64, x1: f64) -> f64 {
    let xi = x1 + p.speed2 * (s + p.t_lambda) - p.beta_minus + lower_drift(p, s) - p.drift0;
    wave2.eval(xi) - lower_correction(p, s)
}

/// Lower envelope at time `s` after `t_λ`.
pub fn eval_lower(p: &LowerEnvelopeParams, wave2: &WaveProfile, s: f64, x1: f64) -> f64 {
    lower_raw(p, wave2, s, x1).max(0.0)
}

/// Mirror of [`derive_lower`] for the `φ₁` upper envelope, started at the same snapshot.
pub fn derive_upper1(
    r: &SpatialReaction,
    wave1: &WaveProfile,
    traj: &Trajectory,
    lower: &LowerEnvelopeParams,
) -> Result<Upper1EnvelopeParams> {
    require_lab(traj)?;
    let mut bindings = Bindings::new();
    let k = traj.nearest(lower.t_lambda);
    let snap = &traj.snapshots[k];
    let t = snap.t;
    let a_plus = core_half_width(wave1, lower.rho / 2.0);
    let delta1_plus = min_slope(wave1, a_plus);
    let core: Vec<(f64, f64)> = traj
        .grid
        .nodes()
        .into_iter()
        .zip(snap.u.iter().cloned())
        .filter(|&(x, _)| x >= lower.zeta_minus && x <= lower.zeta_plus)
        .collect();
    let beta_raw = smallest_shift(|b| {
        core.iter()
            .all(|&(x, v)| wave1.eval(x + wave1.speed * t + b) + SHIFT_SLACK >= v)
    })
    .ok_or_else(|| Error::Derivation("no admissible lead for the first upper envelope".into()))?;
    bind(
        &mut bindings,
        "beta_raw",
        "smallest lead putting phi1 above the run on the core",
    );
    let sup_df1 = sup_slope(&r.f1);
    let drift0 = 4.0 * sup_df1 * lower.mu2_minus / (delta1_plus * lower.omega);
    Ok(Upper1EnvelopeParams {
        omega: lower.omega,
        mu_plus: lower.mu2_minus,
        a_plus,
        delta1_plus,
        t_plus: t,
        beta_raw,
        beta1_plus: beta_raw + drift0,
        c1_plus: lower.mu2_minus * (lower.omega * t).exp(),
        sup_df1,
        speed1: wave1.speed,
        drift0,
        zeta_minus: lower.zeta_minus,
        zeta_plus: lower.zeta_plus,
        bindings,
    })
}

fn upper1_raw(p: &Upper1EnvelopeParams, wave1: &WaveProfile, t: f64, x1: f64) -> f64 {
    let s = t - p.t_plus;
    let decay = (-p.omega * s).exp();
    let xi = x1 + p.speed1 * t + p.beta_raw - p.drift0 * decay + p.drift0;
    wave1.eval(xi) + p.mu_plus * decay
}

/// `min(φ₁(x₁ + c₁t + β₁⁺) + C₁⁺ e^{-ωt}, 1)`.
pub fn eval_upper1(
    wave1: &WaveProfile,
    beta1_plus: f64,
    c1_plus: f64,
    omega: f64,
    t: f64,
    x1: f64,
) -> f64 {
    (wave1.eval(x1 + wave1.speed * t + beta1_plus) + c1_plus * (-omega * t).exp()).min(1.0)
}

/// Constants of the `φ₂` upper envelope. `T` is the first snapshot time after the
/// smallest time satisfying the three start conditions.
pub fn derive_upper2(
    r: &SpatialReaction,
    wave1: &WaveProfile,
    wave2: &WaveProfile,
    traj: &Trajectory,
    lower: &LowerEnvelopeParams,
    upper1: &Upper1EnvelopeParams,
) -> Result<Upper2EnvelopeParams> {
    require_lab(traj)?;
    let mut bindings = Bindings::new();
    let lambda = wave2.mu;
    let c2 = wave2.speed;
    let mut omega = lower.omega;
    let omega_reduced = omega >= lambda * c2;
    if omega_reduced {
        omega = 0.5 * lambda * c2;
        bind(&mut bindings, "omega", "reduced to half the forcing rate");
    }
    let rho = lower.rho;
    let gamma = rho / 8.0;
    bind(&mut bindings, "gamma", "rho/8");
    let c_f = r.c_f;
    let c_phi2 = wave2.c_phi;
    let a_minus = lower.a_minus;
    let x0 = r.x0;
    let c_max = lower.c_minus.max(upper1.c1_plus);
    let conditions = |t: f64| -> [bool; 3] {
        [
            c_max * (-omega * t).exp() <= gamma / 2.0,
            a_minus - c2 * t <= -x0,
            c_f * c_phi2 / (lambda * c2) * (lambda * (x0 - c2 * t)).exp() <= rho / 4.0,
        ]
    };
    let start = lower.t_lambda.max(upper1.t_plus);
    let t_end = traj.t_end();
    if !conditions(t_end).iter().all(|&c| c) {
        return Err(Error::Derivation(format!(
            "the run ends at {t_end} before any admissible start time"
        )));
    }
    let (mut lo, mut hi) = (start, t_end);
    if conditions(lo).iter().all(|&c| c) {
        hi = lo;
    }
    while hi - lo > 1e-9 {
        let m = 0.5 * (lo + hi);
        if conditions(m).iter().all(|&c| c) {
            hi = m;
        } else {
            lo = m;
        }
    }
    let names = [
        "decay of both earlier corrections",
        "core left of the transition zone",
        "forcing below rho/4",
    ];
    let just_before = conditions(hi - 1e-6);
    let binding = names
        .iter()
        .zip(just_before)
        .filter(|(_, ok)| !ok)
        .map(|(n, _)| *n)
        .collect::<Vec<_>>();
    let k = traj.snapshots.partition_point(|s| s.t < hi || s.t <= start);
    if k >= traj.snapshots.len() {
        return Err(Error::Derivation(format!(
            "no snapshot at or after the admissible start {hi}"
        )));
    }
    let snap = &traj.snapshots[k];
    let t_start = snap.t;
    bind(
        &mut bindings,
        "t_start",
        format!(
            "first snapshot after {hi:.6}; binding: {}",
            binding.join(", ")
        ),
    );
    let ztm =
        (profile_level_position(wave1, gamma / 2.0) - wave1.speed * t_start - upper1.beta1_plus)
            .min(profile_level_position(wave2, gamma) - c2 * t_start)
            .min(0.0);
    let ztp = (profile_level_position(wave2, 1.0 - gamma) - c2 * t_start + lower.beta_minus_final)
        .max(0.0);
    let core: Vec<(f64, f64)> = traj
        .grid
        .nodes()
        .into_iter()
        .zip(snap.u.iter().cloned())
        .filter(|&(x, _)| x >= ztm && x <= ztp)
        .collect();
    let beta = smallest_shift(|b| {
        core.iter()
            .all(|&(x, v)| wave2.eval(x + c2 * t_start + b) + SHIFT_SLACK >= v)
    })
    .ok_or_else(|| Error::Derivation("no admissible lead for the second upper envelope".into()))?;
    bind(
        &mut bindings,
        "beta",
        "smallest lead putting phi2 above the run on the core",
    );
    let delta2_plus = min_slope(wave2, a_minus);
    let forcing = c_f * c_phi2 * (lambda * (x0 - c2 * t_start)).exp();
    let mut p = Upper2EnvelopeParams {
        t_start,
        gamma,
        c_f,
        c_phi2,
        lambda,
        delta2_plus,
        beta,
        eta: omega.min(lambda * c2),
        omega,
        omega_reduced,
        rho,
        a_minus,
        x0,
        speed2: c2,
        sup_df2: lower.sup_df2,
        forcing,
        zeta_tilde_minus: ztm,
        zeta_tilde_plus: ztp,
        beta2_plus: 0.0,
        c2_plus: 0.0,
        bindings,
    };
    p.beta2_plus = beta + upper2_drift(&p, f64::INFINITY);
    let d = forcing / (omega - lambda * c2);
    p.c2_plus = (gamma - d) * (omega * t_start).exp();
    bind(
        &mut p.bindings,
        "eta",
        "smaller of omega and the forcing rate",
    );
    Ok(p)
}

fn upper2_split(p: &Upper2EnvelopeParams) -> (f64, f64) {
    let d = p.forcing / (p.omega - p.lambda * p.speed2);
    (p.gamma - d, d)
}

/// `v₂⁺(t)`.
pub fn upper2_correction(p: &Upper2EnvelopeParams, t: f64) -> f64 {
    let (a, d) = upper2_split(p);
    let s = t - p.t_start;
    a * (-p.omega * s).exp() + d * (-p.lambda * p.speed2 * s).exp()
}

/// Forcing term driving `v₂⁺`.
pub fn upper2_forcing(p: &Upper2EnvelopeParams, t: f64) -> f64 {
    p.forcing * (-p.lambda * p.speed2 * (t - p.t_start)).exp()
}

/// `V₂⁺(t)`, closed form of the integrated correction.
pub fn upper2_drift(p: &Upper2EnvelopeParams, t: f64) -> f64 {
    let (a, d) = upper2_split(p);
    let s = t - p.t_start;
    let k = p.lambda * p.speed2;
    let integral = a * (-(-p.omega * s).exp_m1()) / p.omega + d * (-(-k * s).exp_m1()) / k;
    (p.sup_df2 + p.omega) / p.delta2_plus * integral
}

fn upper2_raw(p: &Upper2EnvelopeParams, wave2: &WaveProfile, t: f64, x1: f64) -> f64 {
    wave2.eval(x1 + p.speed2 * t + p.beta + upper2_drift(p, t)) + upper2_correction(p, t)
}

/// `φ₂` upper envelope at absolute time `t ≥ T`.
pub fn eval_upper2(p: &Upper2EnvelopeParams, wave2: &WaveProfile, t: f64, x1: f64) -> Result<f64> {
    if t < p.t_start {
        return Err(Error::Domain(format!(
            "upper envelope starts at {}, asked for {t}",
            p.t_start
        )));
    }
    Ok(upper2_raw(p, wave2, t, x1).min(1.0))
}

/// Largest `|f₁(u+v) - f₁(u) - f₁(v)| / (uv)` over `u, v > 0`, `u + v ≤ 1`.
pub fn c11_constant(f: &BistableNonlinearity) -> f64 {
    let n = 400;
    // the ratio tends to |f''(0)| as u, v → 0
    let d = 1e-6;
    let mut best: f64 = ((f.slope(d) - f.derivative_at_0) / d).abs();
    for i in 1..=n {
        let u = i as f64 / n as f64;
        for j in 1..=(n - i) {
            let v = j as f64 / n as f64;
            best = best.max((f.value(u + v) - f.value(u) - f.value(v)).abs() / (u * v));
        }
    }
    best
}

/// Front-pair correction for the supersolution.
fn pair_excess(f: &BistableNonlinearity, a: f64, b: f64) -> f64 {
    f.value(a) + f.value(b) - f.value(a + b)
}

// smallest offset ℓ ≥ 0 with `test(zp, zm)` true for all sampled zp ≥ ℓ and zm ≤ -zp
fn scan_margin<F: Fn(f64, f64) -> bool>(test: F) -> Option<f64> {
    let far = 40.0;
    let step = 0.05;
    let holds = |l: f64| -> bool {
        let mut zp = l;
        while zp <= far {
            let mut zm = -zp;
            while zm >= -far {
                if !test(zp, zm) {
                    return false;
                }
                zm -= 0.25;
            }
            zp += 0.25;
        }
        true
    };
    let mut l = 0.0;
    while l <= far {
        if holds(l) {
            return Some(l);
        }
        l += step;
    }
    None
}

/// Constants of the early-time pair `w±`.
pub fn derive_appendix(wave1: &WaveProfile, f1: &BistableNonlinearity) -> Result<AppendixParams> {
    let mut bindings = Bindings::new();
    let env = wave1.envelope;
    let (lambda, mu, c1) = (wave1.lambda, wave1.mu, wave1.speed);
    if !(c1 > 0.0) {
        return Err(Error::Precondition(format!(
            "the early-time pair needs a positive speed, got {c1}"
        )));
    }
    let l = c11_constant(f1);
    let theta1 = f1.theta()?;
    let lambda_dominates = lambda >= mu * (1.0 - RATE_TIE);
    let (b0, g0, g1) = (env.beta0, env.gamma0, env.gamma1);

    let mut candidates = vec![
        ("M gamma0 > L beta0^2", l * b0 * b0 / g0),
        ("c1 M > L beta0", l * b0 / c1),
    ];
    let (margin_plus, margin_minus, c_tilde) = if lambda_dominates {
        candidates.push(("M gamma1 > L beta0", l * b0 / g1));
        (0.0, 0.0, None)
    } else {
        let l1 = scan_margin(|zp, zm| pair_excess(f1, wave1.eval(zp), wave1.eval(zm)) >= 0.0)
            .ok_or_else(|| {
                Error::Derivation("no margin makes the supersolution correction nonnegative".into())
            })?;
        let h = |yp: f64, ym: f64| {
            let (a, b) = (wave1.eval(yp), wave1.eval(ym));
            f1.value(a) - f1.value(b) - f1.value(a - b)
        };
        let l2 = scan_margin(|yp, ym| h(yp, ym) < 0.0).ok_or_else(|| {
            Error::Derivation("no margin makes the subsolution correction negative".into())
        })?;
        let mut ct = f64::INFINITY;
        let mut yp = l2;
        while yp <= 40.0 {
            let mut ym = -yp;
            while ym >= -40.0 {
                ct = ct.min(-h(yp, ym) / wave1.eval(ym));
                ym -= 0.25;
            }
            yp += 0.25;
        }
        candidates.push((
            "M gamma1 e^{-mu L1} > L beta0",
            l * b0 * (mu * l1).exp() / g1,
        ));
        bind(
            &mut bindings,
            "L1",
            "sign scan of the supersolution correction",
        );
        bind(
            &mut bindings,
            "L2",
            "sign scan of the subsolution correction",
        );
        (l1, l2, Some(ct))
    };
    let (name, worst) =
        candidates
            .iter()
            .cloned()
            .fold(("", 0.0), |acc, c| if c.1 > acc.1 { c } else { acc });
    let drift = 2.0 * worst;
    bind(&mut bindings, "M", format!("twice the bound from {name}"));
    bind(
        &mut bindings,
        "L",
        "sampled C11 ratio over u, v > 0 with u + v ≤ 1",
    );
    let t_front = ((c1 / (c1 + drift)).ln()) / (lambda * c1);
    bind(&mut bindings, "T", "c1 T + xi(T) = 0");
    let mut p = AppendixParams {
        drift,
        t_front,
        t1: t_front,
        c11: l,
        margin_plus,
        margin_minus,
        c_tilde,
        lambda,
        mu,
        speed1: c1,
        theta1,
        envelope: env,
        bindings,
    };

    let holds = |t: f64| -> bool {
        appendix_conditions(&p, wave1, t)
            .map(|c| c.iter().all(|x| x.1))
            .unwrap_or(false)
    };
    let mut lo = t_front - 200.0;
    if !holds(lo) {
        return Err(Error::Derivation(
            "validity conditions fail even far in the past".into(),
        ));
    }
    let t1 = if holds(t_front) {
        t_front
    } else {
        let mut hi = t_front;
        while hi - lo > 1e-9 {
            let m = 0.5 * (lo + hi);
            if holds(m) {
                lo = m;
            } else {
                hi = m;
            }
        }
        lo
    };
    let failing: Vec<String> = appendix_conditions(&p, wave1, (t1 + 1e-6).min(t_front + 1.0))
        .map(|c| {
            c.into_iter()
                .filter(|x| !x.1)
                .map(|x| x.0.to_string())
                .collect()
        })
        .unwrap_or_default();
    p.t1 = t1;
    let why = if failing.is_empty() {
        "equal to T".to_string()
    } else {
        format!("binding: {}", failing.join(", "))
    };
    bind(&mut p.bindings, "T1", why);
    Ok(p)
}

/// Time-dependent validity conditions of the pair at `t`, by name.
pub fn appendix_conditions(
    p: &AppendixParams,
    wave1: &WaveProfile,
    t: f64,
) -> Result<Vec<(&'static str, bool)>> {
    let xi = appendix_xi(p, t)?;
    let (lambda, mu, c1) = (p.lambda, p.mu, p.speed1);
    let env = &p.envelope;
    let ratio = p.c11 * env.beta0 / p.drift;
    let mut out = vec![(
        "phi1(c1 t + xi) <= theta1/2",
        wave1.eval(c1 * t + xi) <= p.theta1 / 2.0,
    )];
    let lag = c1 * t - xi;
    if p.c_tilde.is_none() {
        let v = env.gamma1 * (-mu * lag).exp() - env.delta0 * (lambda * lag).exp() - ratio;
        out.push(("subsolution tail, lambda >= mu", v > 0.0));
    } else {
        let ct = p.c_tilde.unwrap_or(0.0);
        out.push((
            "subsolution far field, lambda < mu",
            p.drift * env.delta0 * (lambda * (c1 * t + xi)).exp() < ct * env.beta0,
        ));
        let v = env.gamma1 * (-lambda * lag - (mu - lambda) * p.margin_minus).exp()
            - env.delta0 * (lambda * lag).exp()
            - ratio;
        out.push(("subsolution near field, lambda < mu", v > 0.0));
    }
    Ok(out)
}

/// `ξ(t) = -ln(1 - M e^{λc₁t}/c₁)/λ`.
pub fn appendix_xi(p: &AppendixParams, t: f64) -> Result<f64> {
    let a = p.drift * (p.lambda * p.speed1 * t).exp() / p.speed1;
    if !(a < 1.0) {
        return Err(Error::Domain(format!(
            "the front shift is undefined at t = {t}"
        )));
    }
    Ok(-(-a).ln_1p() / p.lambda)
}

/// `M e^{λ(c₁t + ξ(t))}`, the rate at which `ξ` grows.
pub fn appendix_xi_rate(p: &AppendixParams, t: f64) -> Result<f64> {
    let xi = appendix_xi(p, t)?;
    Ok(p.drift * (p.lambda * (p.speed1 * t + xi)).exp())
}

/// `(w⁻, w⁺)` at `(t, x1)`.
pub fn eval_appendix(
    p: &AppendixParams,
    wave1: &WaveProfile,
    t: f64,
    x1: f64,
) -> Result<(f64, f64)> {
    let xi = appendix_xi(p, t)?;
    let c1t = p.speed1 * t;
    if x1 >= 0.0 {
        let lo = (wave1.eval(x1 + c1t - xi) - wave1.eval(-x1 + c1t - xi)).max(0.0);
        let hi = (wave1.eval(x1 + c1t + xi) + wave1.eval(-x1 + c1t + xi)).min(1.0);
        Ok((lo, hi))
    } else {
        Ok((0.0, (2.0 * wave1.eval(c1t + xi)).min(1.0)))
    }
}

/// Which way an envelope bounds the solution.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Lower,
    Upper,
}

/// An explicit comparison function on a time window.
pub trait Envelope: Sync {
    fn side(&self) -> Side;
    /// Closed time window on which the bound is claimed.
    fn window(&self) -> (f64, f64);
    /// Clamped value at absolute time `t`.
    fn value(&self, t: f64, x1: f64) -> f64;
    /// Smooth branch label and unclamped value, `None` where a clamp is active.
    fn smooth(&self, t: f64, x1: f64) -> Option<(u8, f64)>;
}

pub struct LowerEnvelope<'a> {
    pub params: &'a LowerEnvelopeParams,
    pub wave2: &'a WaveProfile,
}

impl Envelope for LowerEnvelope<'_> {
    fn side(&self) -> Side {
        Side::Lower
    }
    fn window(&self) -> (f64, f64) {
        (self.params.t_lambda, f64::INFINITY)
    }
    fn value(&self, t: f64, x1: f64) -> f64 {
        eval_lower(self.params, self.wave2, t - self.params.t_lambda, x1)
    }
    fn smooth(&self, t: f64, x1: f64) -> Option<(u8, f64)> {
        let v = lower_raw(self.params, self.wave2, t - self.params.t_lambda, x1);
        (v > 0.0).then_some((0, v))
    }
}

pub struct Upper1Envelope<'a> {
    pub params: &'a Upper1EnvelopeParams,
    pub wave1: &'a WaveProfile,
}

impl Envelope for Upper1Envelope<'_> {
    fn side(&self) -> Side {
        Side::Upper
    }
    fn window(&self) -> (f64, f64) {
        (self.params.t_plus, f64::INFINITY)
    }
    fn value(&self, t: f64, x1: f64) -> f64 {
        upper1_raw(self.params, self.wave1, t, x1).min(1.0)
    }
    fn smooth(&self, t: f64, x1: f64) -> Option<(u8, f64)> {
        let v = upper1_raw(self.params, self.wave1, t, x1);
        (v < 1.0).then_some((0, v))
    }
}

pub struct Upper2Envelope<'a> {
    pub params: &'a Upper2EnvelopeParams,
    pub wave2: &'a WaveProfile,
}

impl Envelope for Upper2Envelope<'_> {
    fn side(&self) -> Side {
        Side::Upper
    }
    fn window(&self) -> (f64, f64) {
        (self.params.t_start, f64::INFINITY)
    }
    fn value(&self, t: f64, x1: f64) -> f64 {
        upper2_raw(self.params, self.wave2, t, x1).min(1.0)
    }
    fn smooth(&self, t: f64, x1: f64) -> Option<(u8, f64)> {
        let v = upper2_raw(self.params, self.wave2, t, x1);
        (v < 1.0).then_some((0, v))
    }
}

/// One member of the early-time pair.
pub struct AppendixEnvelope<'a> {
    pub params: &'a AppendixParams,
    pub wave1: &'a WaveProfile,
    pub side: Side,
}

impl Envelope for AppendixEnvelope<'_> {
    fn side(&self) -> Side {
        self.side
    }
    fn window(&self) -> (f64, f64) {
        (f64::NEG_INFINITY, self.params.t1)
    }
    fn value(&self, t: f64, x1: f64) -> f64 {
        match eval_appendix(self.params, self.wave1, t, x1) {
            Ok((lo, hi)) => match self.side {
                Side::Lower => lo,
                Side::Upper => hi,
            },
            Err(_) => f64::NAN,
        }
    }
    fn smooth(&self, t: f64, x1: f64) -> Option<(u8, f64)> {
        let p = self.params;
        let xi = appendix_xi(p, t).ok()?;
        let c1t = p.speed1 * t;
        let w = self.wave1;
        match (self.side, x1 >= 0.0) {
            (Side::Upper, true) => {
                let v = w.eval(x1 + c1t + xi) + w.eval(-x1 + c1t + xi);
                (v < 1.0).then_some((1, v))
            }
            (Side::Upper, false) => {
                let v = 2.0 * w.eval(c1t + xi);
                (v < 1.0).then_some((0, v))
            }
            (Side::Lower, true) => {
                let v = w.eval(x1 + c1t - xi) - w.eval(-x1 + c1t - xi);
                (v > 0.0).then_some((1, v))
            }
            (Side::Lower, false) => Some((0, 0.0)),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ViolationReport {
    pub side: Side,
    /// Largest signed violation; negative when the bound holds strictly.
    pub worst: f64,
    pub at_t: f64,
    pub at_x: f64,
    pub samples: usize,
    pub tol: f64,
    pub passed: bool,
}

/// Worst violation of the envelope's bound over all stored snapshots in its window.
pub fn check_ordering(traj: &Trajectory, env: &dyn Envelope, tol: f64) -> Result<ViolationReport> {
    if traj.frame != Frame::Lab {
        return Err(Error::Config(
            "ordering checks run on lab-frame trajectories".into(),
        ));
    }
    let (a, b) = env.window();
    let picked: Vec<_> = traj
        .snapshots
        .iter()
        .filter(|s| s.t >= a && s.t <= b)
        .collect();
    if picked.is_empty() {
        return Err(Error::Config(format!(
            "envelope window [{a}, {b}] misses the run [{}, {}]",
            traj.t_start(),
            traj.t_end()
        )));
    }
    let side = env.side();
    let g = traj.grid;
    let worst = picked
        .par_iter()
        .map(|s| {
            let mut best = (f64::NEG_INFINITY, s.t, g.x_min);
            for (i, &v) in s.u.iter().enumerate() {
                let x = g.x(i);
                let e = env.value(s.t, x);
                let d = match side {
                    Side::Lower => e - v,
                    Side::Upper => v - e,
                };
                if d > best.0 {
                    best = (d, s.t, x);
                }
            }
            best
        })
        .reduce(
            || (f64::NEG_INFINITY, 0.0, 0.0),
            |p, q| if q.0 > p.0 { q } else { p },
        );
    Ok(ViolationReport {
        side,
        worst: worst.0,
        at_t: worst.1,
        at_x: worst.2,
        samples: picked.len() * g.n,
        tol,
        passed: worst.0 <= tol,
    })
}

/// Probe points for residual checks; differences use steps `h/4` and `dt/4`.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct ProbeGrid {
    pub t_min: f64,
    pub t_max: f64,
    pub nt: usize,
    pub x_min: f64,
    pub x_max: f64,
    pub nx: usize,
    pub h: f64,
    pub dt: f64,
}

impl ProbeGrid {
    fn t(&self, k: usize) -> f64 {
        if self.nt <= 1 {
            self.t_min
        } else {
            self.t_min + (self.t_max - self.t_min) * k as f64 / (self.nt - 1) as f64
        }
    }
    fn x(&self, i: usize) -> f64 {
        if self.nx <= 1 {
            self.x_min
        } else {
            self.x_min + (self.x_max - self.x_min) * i as f64 / (self.nx - 1) as f64
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ResidualReport {
    pub side: Side,
    /// `max 𝓛` for a lower envelope, `-min 𝓛` for an upper one.
    pub worst_wrong_sign: f64,
    pub at_t: f64,
    pub at_x: f64,
    pub evaluated: usize,
    pub skipped: usize,
}

/// `𝓛E = E_t - E_xx - f(x, E)` at `(t, x)` by centered differences, when the
/// whole stencil lies on one smooth branch inside the window.
pub fn envelope_residual(
    env: &dyn Envelope,
    r: &SpatialReaction,
    t: f64,
    x: f64,
    k: f64,
    q: f64,
) -> Option<f64> {
    let (a, b) = env.window();
    if t - k < a || t + k > b {
        return None;
    }
    let (br, c) = env.smooth(t, x)?;
    let mut vals = [0.0; 4];
    for (slot, (tt, xx)) in [(t - k, x), (t + k, x), (t, x - q), (t, x + q)]
        .into_iter()
        .enumerate()
    {
        let (bb, v) = env.smooth(tt, xx)?;
        if bb != br {
            return None;
        }
        vals[slot] = v;
    }
    let dt = (vals[1] - vals[0]) / (2.0 * k);
    let dxx = (vals[3] - 2.0 * c + vals[2]) / (q * q);
    Some(dt - dxx - r.eval(x, c))
}

/// Largest residual of the wrong sign over the probe grid.
pub fn residual_sign_check(
    env: &dyn Envelope,
    r: &SpatialReaction,
    probe: &ProbeGrid,
) -> ResidualReport {
    let side = env.side();
    let (k, q) = (probe.dt / 4.0, probe.h / 4.0);
    let rows: Vec<(f64, f64, f64, usize, usize)> = (0..probe.nt)
        .into_par_iter()
        .map(|kt| {
            let t = probe.t(kt);
            let mut best = (f64::NEG_INFINITY, t, probe.x_min);
            let (mut ev, mut sk) = (0, 0);
            for i in 0..probe.nx {
                let x = probe.x(i);
                match envelope_residual(env, r, t, x, k, q) {
                    Some(l) => {
                        ev += 1;
                        let wrong = match side {
                            Side::Lower => l,
                            Side::Upper => -l,
                        };
                        if wrong > best.0 {
                            best = (wrong, t, x);
                        }
                    }
                    None => sk += 1,
                }
            }
            (best.0, best.1, best.2, ev, sk)
        })
        .collect();
    let mut out = ResidualReport {
        side,
        worst_wrong_sign: f64::NEG_INFINITY,
        at_t: f64::NAN,
        at_x: f64::NAN,
        evaluated: 0,
        skipped: 0,
    };
    for (w, t, x, ev, sk) in rows {
        out.evaluated += ev;
        out.skipped += sk;
        if w > out.worst_wrong_sign {
            out.worst_wrong_sign = w;
            out.at_t = t;
            out.at_x = x;
        }
    }
    out
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct SlidingOptions {
    pub epsilon: f64,
    pub sigma: f64,
    pub beta_rate: f64,
    pub eta_level: f64,
    pub t0: f64,
    pub tol: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SlidingReport {
    /// Largest `v - W⁺`.
    pub worst_upper: f64,
    /// Largest `W⁻ - v`.
    pub worst_lower: f64,
    pub samples: usize,
    /// Largest damping rate allowed by the slopes near 0 and 1.
    pub damping_bound: f64,
    pub insufficient_damping: bool,
    pub passed: bool,
}

/// `min -∂_u f` over `s ∈ [0, 2η] ∪ [1-2η, 1]` and the sampled positions.
pub fn damping_bound(r: &SpatialReaction, xs: &[f64], eta_level: f64) -> f64 {
    let n = 50;
    let mut best = f64::INFINITY;
    for &x in xs {
        for k in 0..=n {
            let s = 2.0 * eta_level * k as f64 / n as f64;
            best = best.min(-r.slope(x, s)).min(-r.slope(x, 1.0 - s));
        }
    }
    best
}

/// Smallest sliding speed `σ` with `σβδ ≥ β + sup|∂_u f|`.
pub fn sliding_sigma(beta_rate: f64, delta: f64, sup_df: f64) -> f64 {
    (beta_rate + sup_df) / (beta_rate * delta)
}

/// Checks `W⁻(t) ≤ v(t₀+t) ≤ W⁺(t)` where `W±` slide the stored run `u` in time
/// and add `±εe^{-βt}`. `v` defaults to `u` itself.
pub fn sliding_check(
    r: &SpatialReaction,
    traj: &Trajectory,
    other: Option<&Trajectory>,
    o: SlidingOptions,
) -> Result<SlidingReport> {
    if !(o.epsilon >= 0.0 && o.epsilon < o.eta_level) {
        return Err(Error::Precondition(format!(
            "perturbation {} must lie in [0, {}) for the sliding argument",
            o.epsilon, o.eta_level
        )));
    }
    let v = other.unwrap_or(traj);
    let xs = traj.grid.nodes();
    let bound = damping_bound(r, &xs, o.eta_level);
    let lag = o.sigma * o.epsilon;
    let picked: Vec<_> = v
        .snapshots
        .iter()
        .filter(|s| s.t >= o.t0 && s.t - lag >= traj.t_start() && s.t + lag <= traj.t_end())
        .collect();
    if picked.is_empty() {
        return Err(Error::Config(
            "no stored times fit the sliding window".into(),
        ));
    }
    let worst = picked
        .par_iter()
        .map(|s| {
            let t = s.t - o.t0;
            let slide = lag * (-(-o.beta_rate * t).exp_m1());
            let bump = o.epsilon * (-o.beta_rate * t).exp();
            let ahead = traj.at(s.t + slide).expect("inside the stored window");
            let behind = traj.at(s.t - slide).expect("inside the stored window");
            let mut w = (f64::NEG_INFINITY, f64::NEG_INFINITY);
            for i in 0..s.u.len() {
                let hi = (ahead[i] + bump).min(1.0);
                let lo = (behind[i] - bump).max(0.0);
                w.0 = w.0.max(s.u[i] - hi);
                w.1 = w.1.max(lo - s.u[i]);
            }
            w
        })
        .reduce(
            || (f64::NEG_INFINITY, f64::NEG_INFINITY),
            |a, b| (a.0.max(b.0), a.1.max(b.1)),
        );
    let insufficient = o.beta_rate > bound;
    Ok(SlidingReport {
        worst_upper: worst.0,
        worst_lower: worst.1,
        samples: picked.len(),
        damping_bound: bound,
        insufficient_damping: insufficient,
        passed: !insufficient && worst.0 <= o.tol && worst.1 <= o.tol,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct StabilityReport {
    pub t0: f64,
    pub epsilon: f64,
    pub initial_distance: f64,
    /// `sup_{t ≥ t₀}` of the distance to the shifted profile.
    pub delta: f64,
}

fn profile_distance(traj: &Trajectory, k: usize, wave: &WaveProfile, beta: f64) -> f64 {
    let s = &traj.snapshots[k];
    let off = (wave.speed - s.frame.speed()) * s.t + beta;
    s.u.iter()
        .enumerate()
        .map(|(i, &v)| (v - wave.eval(traj.grid.x(i) + off)).abs())
        .fold(0.0, f64::max)
}

/// Largest distance to `φ₂(x + c₂t + β)` after `t₀`, given closeness `ε < ρ/4` at `t₀`.
pub fn stability_delta(
    traj: &Trajectory,
    wave2: &WaveProfile,
    beta: f64,
    t0: f64,
    epsilon: f64,
    rho: f64,
) -> Result<StabilityReport> {
    if !(epsilon < rho / 4.0) {
        return Err(Error::Precondition(format!(
            "closeness {epsilon} must stay below rho/4 = {}",
            rho / 4.0
        )));
    }
    let k0 = traj.snapshots.partition_point(|s| s.t < t0 - 1e-12);
    if k0 >= traj.snapshots.len() {
        return Err(Error::Precondition(format!(
            "the run ends before t0 = {t0}"
        )));
    }
    let initial = profile_distance(traj, k0, wave2, beta);
    if initial > epsilon {
        return Err(Error::Precondition(format!(
            "the run is {initial:.3e} from the front at t0, above {epsilon}"
        )));
    }
    let delta = (k0..traj.snapshots.len())
        .into_par_iter()
        .map(|k| profile_distance(traj, k, wave2, beta))
        .reduce(|| 0.0, f64::max);
    Ok(StabilityReport {
        t0: traj.snapshots[k0].t,
        epsilon,
        initial_distance: initial,
        delta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::interp::BlendKind;
    use crate::waves::solve_wave;

    fn pair() -> SpatialReaction {
        SpatialReaction::new(
            BistableNonlinearity::cubic(0.2, 1.0).unwrap(),
            BistableNonlinearity::cubic(0.3, 1.0).unwrap(),
            2.0,
            BlendKind::Quintic,
        )
        .unwrap()
    }

    fn wave(theta: f64) -> WaveProfile {
        solve_wave(
            &BistableNonlinearity::cubic(theta, 1.0).unwrap(),
            -60.0,
            60.0,
            0.05,
            1e-8,
        )
        .unwrap()
    }

    #[test]
    fn omega_and_rho_for_the_cubic_pair() {
        let r = pair();
        assert!((omega_for(&r) - 0.05).abs() < 1e-15);
        let (rho, binding) = derive_rho(&r, 0.05);
        // f1 near 1: (4 - 2θ)s - 3s² = ω
        let root = (3.6 - (3.6f64 * 3.6 - 12.0 * 0.05).sqrt()) / 6.0;
        assert!((rho - root).abs() < 1e-9, "{rho} vs {root}");
        assert_eq!(binding, "f1 near 1");
    }

    #[test]
    fn c11_constant_of_a_cubic() {
        // f(u+v) - f(u) - f(v) = uv(2(1+θ) - 3(u+v)), largest at u+v → 0
        let f = BistableNonlinearity::cubic(0.2, 1.0).unwrap();
        let l = c11_constant(&f);
        assert!((l - 2.4).abs() < 1e-4, "{l}");
    }

    #[test]
    fn appendix_constants_and_shift() {
        let w1 = wave(0.2);
        let f1 = BistableNonlinearity::cubic(0.2, 1.0).unwrap();
        let p = derive_appendix(&w1, &f1).unwrap();
        let env = w1.envelope;
        assert!(p.drift * env.gamma0 > p.c11 * env.beta0 * env.beta0);
        assert!(p.drift * env.gamma1 > p.c11 * env.beta0);
        assert!(p.speed1 * p.drift > p.c11 * env.beta0);
        assert!(p.t1 <= p.t_front);
        // 1 - M e^{λc₁T}/c₁ = c₁/(c₁+M)
        let a = p.drift * (p.lambda * p.speed1 * p.t_front).exp() / p.speed1;
        assert!((1.0 - a - p.speed1 / (p.speed1 + p.drift)).abs() < 1e-12);
        let xi_t = appendix_xi(&p, p.t_front).unwrap();
        assert!(xi_t > 0.0 && (p.speed1 * p.t_front + xi_t).abs() < 1e-9);
        assert!(appendix_xi(&p, p.t_front + 50.0).is_err());
        for t in [-200.0, -40.0, -12.0, p.t1] {
            let xi = appendix_xi(&p, t).unwrap();
            let h = 1e-5;
            let d = (appendix_xi(&p, t + h).unwrap() - appendix_xi(&p, t - h).unwrap()) / (2.0 * h);
            let rate = appendix_xi_rate(&p, t).unwrap();
            assert!((d - rate).abs() <= 1e-8 * rate.max(1e-3));
            assert!(xi >= 0.0);
        }
        assert!(appendix_xi(&p, -400.0).unwrap() < 1e-30);
    }

    #[test]
    fn appendix_pair_brackets_the_front() {
        let w1 = wave(0.2);
        let f1 = BistableNonlinearity::cubic(0.2, 1.0).unwrap();
        let p = derive_appendix(&w1, &f1).unwrap();
        for t in [-80.0, -40.0, p.t1] {
            let (lo0, _) = eval_appendix(&p, &w1, t, 0.0).unwrap();
            assert_eq!(lo0, 0.0);
            for k in -200..=400 {
                let x = k as f64 * 0.25;
                let (lo, hi) = eval_appendix(&p, &w1, t, x).unwrap();
                let phi = w1.eval(x + w1.speed * t);
                assert!(lo <= phi + 1e-15 && phi <= hi + 1e-15 && lo <= hi);
            }
        }
    }

    #[test]
    fn upper2_corrections_solve_their_odes() {
        let p = Upper2EnvelopeParams {
            t_start: 36.0,
            gamma: 0.014 / 8.0,
            c_f: 0.1,
            c_phi2: 7.0 / 3.0,
            lambda: std::f64::consts::FRAC_1_SQRT_2,
            delta2_plus: 0.005,
            beta: 1.0,
            eta: 0.05,
            omega: 0.05,
            omega_reduced: false,
            rho: 0.014,
            a_minus: 8.0,
            x0: 2.0,
            speed2: 0.4 * std::f64::consts::FRAC_1_SQRT_2,
            sup_df2: 0.7,
            forcing: 1e-4,
            zeta_tilde_minus: -10.0,
            zeta_tilde_plus: 10.0,
            beta2_plus: 0.0,
            c2_plus: 0.0,
            bindings: Bindings::new(),
        };
        assert!((upper2_correction(&p, p.t_start) - p.gamma).abs() < 1e-18);
        assert_eq!(upper2_drift(&p, p.t_start), 0.0);
        for k in 0..200 {
            let t = p.t_start + k as f64 * 0.7;
            let h = 1e-4;
            let dv = (upper2_correction(&p, t + h) - upper2_correction(&p, t - h)) / (2.0 * h);
            let rhs = -p.omega * upper2_correction(&p, t) + upper2_forcing(&p, t);
            assert!((dv - rhs).abs() <= 1e-10);
            let v = upper2_correction(&p, t);
            assert!(v >= 0.0 && v <= p.rho / 2.0);
            let dv = (upper2_drift(&p, t + h) - upper2_drift(&p, t - h)) / (2.0 * h);
            assert!((dv - (p.sup_df2 + p.omega) / p.delta2_plus * v).abs() <= 1e-8);
        }
        assert!(upper2_drift(&p, f64::INFINITY).is_finite());
    }
}
