//! Bistable reaction terms and their spatial blend across the transition zone.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::interp::{BlendKind, Hermite};

/// Number of uniform samples used by validation and sup-norm estimates.
pub const VALIDATION_POINTS: usize = 1000;
/// Minimum number of rows of a tabulated nonlinearity.
pub const MIN_TABLE_POINTS: usize = 256;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum NonlinearityKind {
    /// `s·u(1-u)(u-θ)`.
    Cubic { theta: f64, scale: f64 },
    /// Samples `(u, f, f')` joined by cubic Hermite pieces.
    Tabulated {
        table: Hermite,
        // cumulative integral of f at the knots
        cumulative: Vec<f64>,
    },
}

/// A reaction term `f` on `[0,1]` with cached endpoint data.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct BistableNonlinearity {
    pub kind: NonlinearityKind,
    /// `sup |f'|` over `[0,1]`.
    pub lipschitz_bound: f64,
    pub derivative_at_0: f64,
    pub derivative_at_1: f64,
    /// Interior zero; `None` when no sign change was found.
    pub theta: Option<f64>,
    /// `∫₀¹ f`.
    pub potential_at_1: f64,
}

/// Value, derivative and potential `F(u) = ∫₀ᵘ f` at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation {
    pub value: f64,
    pub derivative: f64,
    pub potential: f64,
}

impl BistableNonlinearity {
    pub fn cubic(theta: f64, scale: f64) -> Result<Self> {
        if !(theta > 0.0 && theta < 1.0) {
            return Err(Error::Config(format!(
                "cubic theta must lie in (0,1), got {theta}"
            )));
        }
        if !(scale > 0.0 && scale.is_finite()) {
            return Err(Error::Config(format!(
                "cubic scale must be positive, got {scale}"
            )));
        }
        let d = |u: f64| scale * (-3.0 * u * u + 2.0 * (1.0 + theta) * u - theta);
        // |f'| peaks at an endpoint or at the vertex of the parabola
        let vertex = (1.0 + theta) / 3.0;
        let lipschitz_bound = d(0.0).abs().max(d(1.0).abs()).max(d(vertex).abs());
        Ok(Self {
            kind: NonlinearityKind::Cubic { theta, scale },
            lipschitz_bound,
            derivative_at_0: d(0.0),
            derivative_at_1: d(1.0),
            theta: Some(theta),
            potential_at_1: scale * (1.0 - 2.0 * theta) / 12.0,
        })
    }

    /// Builds a tabulated nonlinearity from strictly increasing `u` samples.
    pub fn tabulated(u: Vec<f64>, f: Vec<f64>, df: Vec<f64>) -> Result<Self> {
        if u.len() < MIN_TABLE_POINTS {
            return Err(Error::Config(format!(
                "tabulated nonlinearity needs at least {MIN_TABLE_POINTS} rows, got {}",
                u.len()
            )));
        }
        if f.len() != u.len() || df.len() != u.len() {
            return Err(Error::Config(
                "table columns u, f, df differ in length".into(),
            ));
        }
        if u.windows(2).any(|w| w[1] <= w[0])
            || u.iter().chain(&f).chain(&df).any(|v| !v.is_finite())
        {
            return Err(Error::Config(
                "table u column must be finite and strictly increasing".into(),
            ));
        }
        let mut cumulative = vec![0.0; u.len()];
        for i in 1..u.len() {
            let dx = u[i] - u[i - 1];
            cumulative[i] = cumulative[i - 1]
                + dx * (f[i - 1] + f[i]) / 2.0
                + dx * dx * (df[i - 1] - df[i]) / 12.0;
        }
        let table = Hermite::new(u, f, df);
        let mut out = Self {
            kind: NonlinearityKind::Tabulated { table, cumulative },
            lipschitz_bound: 0.0,
            derivative_at_0: f64::NAN,
            derivative_at_1: f64::NAN,
            theta: None,
            potential_at_1: f64::NAN,
        };
        if let Ok(e) = out.evaluate(0.0) {
            out.derivative_at_0 = e.derivative;
        }
        if let Ok(e) = out.evaluate(1.0) {
            out.derivative_at_1 = e.derivative;
        }
        out.lipschitz_bound = (0..=VALIDATION_POINTS)
            .filter_map(|i| out.evaluate(i as f64 / VALIDATION_POINTS as f64).ok())
            .map(|e| e.derivative.abs())
            .fold(0.0, f64::max);
        out.potential_at_1 = out.evaluate(1.0).map(|e| e.potential).unwrap_or(f64::NAN)
            - out.evaluate(0.0).map(|e| e.potential).unwrap_or(f64::NAN);
        out.theta = out.find_theta();
        Ok(out)
    }

    /// Reads a CSV with header columns `u,f,df`.
    pub fn from_table_csv(path: &std::path::Path) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            u: f64,
            f: f64,
            df: f64,
        }
        let mut rdr = csv::Reader::from_path(path)?;
        let (mut u, mut f, mut df) = (vec![], vec![], vec![]);
        for row in rdr.deserialize() {
            let r: Row = row?;
            u.push(r.u);
            f.push(r.f);
            df.push(r.df);
        }
        Self::tabulated(u, f, df)
    }

    /// Interior zero, or a precondition error when there is none.
    pub fn theta(&self) -> Result<f64> {
        self.theta
            .ok_or_else(|| Error::Precondition("nonlinearity has no interior zero".into()))
    }

    // first sign change from negative to positive on the validation grid, refined by bisection
    fn find_theta(&self) -> Option<f64> {
        let n = VALIDATION_POINTS;
        let mut bracket = None;
        for i in 1..n {
            let a = i as f64 / n as f64;
            let b = (i + 1) as f64 / n as f64;
            let fa = self.value(a);
            let fb = self.value(b);
            if fa <= 0.0 && fb > 0.0 && b < 1.0 {
                bracket = Some((a, b));
                break;
            }
        }
        let (mut a, mut b) = bracket?;
        if self.value(a) == 0.0 {
            return Some(a);
        }
        for _ in 0..200 {
            let m = 0.5 * (a + b);
            if m <= a || m >= b {
                break;
            }
            if self.value(m) > 0.0 {
                b = m;
            } else {
                a = m;
            }
        }
        Some(0.5 * (a + b))
    }

    /// `f(u), f'(u), F(u)`. Outside `[0,1]` the term is extended linearly.
    pub fn evaluate(&self, u: f64) -> Result<Evaluation> {
        if u.is_nan() {
            return Err(Error::Domain("u is NaN".into()));
        }
        match &self.kind {
            NonlinearityKind::Cubic { theta, scale } => Ok(cubic_eval(*theta, *scale, u)),
            NonlinearityKind::Tabulated { table, cumulative } => {
                let (lo, hi) = (table.x_min(), table.x_max());
                let inside = |v: f64| v >= lo && v <= hi;
                if (0.0..=1.0).contains(&u) {
                    if !inside(u) {
                        return Err(Error::Domain(format!(
                            "u = {u} outside table support [{lo}, {hi}]"
                        )));
                    }
                    return Ok(table_eval(table, cumulative, u));
                }
                if u < 0.0 {
                    if !inside(0.0) {
                        return Err(Error::Domain(format!("u = {u} and table does not reach 0")));
                    }
                    let e0 = table_eval(table, cumulative, 0.0);
                    let s = e0.derivative;
                    Ok(Evaluation {
                        value: e0.value + s * u,
                        derivative: s,
                        potential: e0.potential + e0.value * u + 0.5 * s * u * u,
                    })
                } else {
                    if !inside(1.0) {
                        return Err(Error::Domain(format!("u = {u} and table does not reach 1")));
                    }
                    let e1 = table_eval(table, cumulative, 1.0);
                    let s = e1.derivative;
                    let d = u - 1.0;
                    Ok(Evaluation {
                        value: e1.value + s * d,
                        derivative: s,
                        potential: e1.potential + e1.value * d + 0.5 * s * d * d,
                    })
                }
            }
        }
    }

    /// Fast value for hot loops. Tabulated kinds are clamped to their support.
    #[inline]
    pub fn value(&self, u: f64) -> f64 {
        match &self.kind {
            NonlinearityKind::Cubic { theta, scale } => {
                if u < 0.0 {
                    -scale * theta * u
                } else if u > 1.0 {
                    scale * (theta - 1.0) * (u - 1.0)
                } else {
                    scale * u * (1.0 - u) * (u - theta)
                }
            }
            NonlinearityKind::Tabulated { .. } => self.evaluate_clamped(u).value,
        }
    }

    /// `f(1 - y)` evaluated without forming `1 - y` where a closed form allows it,
    /// so values near the upper state keep their relative precision.
    #[inline]
    pub fn value_near_one(&self, y: f64) -> f64 {
        match &self.kind {
            NonlinearityKind::Cubic { theta, scale } => {
                if y < 0.0 {
                    scale * (1.0 - theta) * y
                } else if y > 1.0 {
                    -scale * theta * (1.0 - y)
                } else {
                    scale * (1.0 - y) * y * (1.0 - theta - y)
                }
            }
            NonlinearityKind::Tabulated { .. } => self.value(1.0 - y),
        }
    }

    /// Fast derivative for hot loops.
    #[inline]
    pub fn slope(&self, u: f64) -> f64 {
        match &self.kind {
            NonlinearityKind::Cubic { theta, scale } => {
                let v = u.clamp(0.0, 1.0);
                scale * (-3.0 * v * v + 2.0 * (1.0 + theta) * v - theta)
            }
            NonlinearityKind::Tabulated { .. } => self.evaluate_clamped(u).derivative,
        }
    }

    /// Potential `F(u)`.
    pub fn potential(&self, u: f64) -> f64 {
        self.evaluate_clamped(u).potential
    }

    fn evaluate_clamped(&self, u: f64) -> Evaluation {
        match &self.kind {
            NonlinearityKind::Cubic { theta, scale } => cubic_eval(*theta, *scale, u),
            NonlinearityKind::Tabulated { table, cumulative } => match self.evaluate(u) {
                Ok(e) => e,
                Err(_) => table_eval(table, cumulative, u.clamp(table.x_min(), table.x_max())),
            },
        }
    }

    /// Stable digest of the definition, used to tie artifacts to inputs.
    pub fn fingerprint(&self) -> String {
        let bytes = serde_json::to_vec(&self.kind).expect("nonlinearity serializes");
        hex::encode(Sha256::digest(bytes))
    }
}

fn cubic_eval(theta: f64, s: f64, u: f64) -> Evaluation {
    let fp0 = -s * theta;
    let fp1 = s * (theta - 1.0);
    let f1 = s * (1.0 - 2.0 * theta) / 12.0;
    if u < 0.0 {
        return Evaluation {
            value: fp0 * u,
            derivative: fp0,
            potential: 0.5 * fp0 * u * u,
        };
    }
    if u > 1.0 {
        let d = u - 1.0;
        return Evaluation {
            value: fp1 * d,
            derivative: fp1,
            potential: f1 + 0.5 * fp1 * d * d,
        };
    }
    let u2 = u * u;
    Evaluation {
        value: s * u * (1.0 - u) * (u - theta),
        derivative: s * (-3.0 * u2 + 2.0 * (1.0 + theta) * u - theta),
        potential: s * (-u2 * u2 / 4.0 + (1.0 + theta) * u2 * u / 3.0 - theta * u2 / 2.0),
    }
}

fn table_eval(table: &Hermite, cumulative: &[f64], u: f64) -> Evaluation {
    let (value, derivative) = table.eval_with_slope(u);
    // the knot-based cumulative table starts at the first knot; shift so F(0) = 0
    let base0 = if table.x_min() <= 0.0 && 0.0 <= table.x_max() {
        table_cumulative_at(table, cumulative, 0.0)
    } else {
        0.0
    };
    Evaluation {
        value,
        derivative,
        potential: table_cumulative_at(table, cumulative, u) - base0,
    }
}

// exact integral of the Hermite pieces from the first knot to `u`
fn table_cumulative_at(table: &Hermite, cumulative: &[f64], u: f64) -> f64 {
    let x = &table.x;
    let i = match x.partition_point(|&v| v <= u) {
        0 => 0,
        p => (p - 1).min(x.len() - 2),
    };
    let dx = x[i + 1] - x[i];
    let t = (u - x[i]) / dx;
    let t2 = t * t;
    let t3 = t2 * t;
    let t4 = t3 * t;
    cumulative[i]
        + dx * ((t4 / 2.0 - t3 + t) * table.y[i] + (-t4 / 2.0 + t3) * table.y[i + 1])
        + dx * dx
            * ((t4 / 4.0 - 2.0 * t3 / 3.0 + t2 / 2.0) * table.d[i]
                + (t4 / 4.0 - t3 / 3.0) * table.d[i + 1])
}

/// One checked condition of a validation report.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ConditionCheck {
    /// `F2`, `F3`, `F4` or `F8`.
    pub name: String,
    pub passed: bool,
    /// Sample point that decided the outcome, if any.
    pub witness_u: Option<f64>,
    pub witness_value: f64,
    pub detail: String,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ValidationReport {
    pub checks: Vec<ConditionCheck>,
    pub passed: bool,
    pub theta: Option<f64>,
    pub integral: f64,
}

impl ValidationReport {
    pub fn check(&self, name: &str) -> Option<&ConditionCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

/// Checks endpoint zeros, endpoint stability, sign structure and positive
/// mass. Sign-structure failure stops the report before the mass check.
pub fn validate_bistable(
    f: &BistableNonlinearity,
    grid_size: usize,
    tol: f64,
) -> Result<ValidationReport> {
    if grid_size < 100 {
        return Err(Error::Precondition(format!(
            "validation grid needs at least 100 points, got {grid_size}"
        )));
    }
    let mut checks = Vec::new();
    let eval = |u: f64| f.evaluate(u);

    // F2: zeros at both ends
    let (r0, r1) = match (eval(0.0), eval(1.0)) {
        (Ok(a), Ok(b)) => (a.value, b.value),
        _ => (f64::NAN, f64::NAN),
    };
    let worst = if r0.abs() >= r1.abs() || r1.is_nan() {
        (0.0, r0)
    } else {
        (1.0, r1)
    };
    checks.push(ConditionCheck {
        name: "F2".into(),
        passed: r0.abs() <= tol && r1.abs() <= tol,
        witness_u: Some(worst.0),
        witness_value: worst.1,
        detail: format!("f(0) = {r0:e}, f(1) = {r1:e}"),
    });

    // F3: stable endpoints
    let (d0, d1) = (f.derivative_at_0, f.derivative_at_1);
    let f3 = d0 < 0.0 && d1 < 0.0;
    checks.push(ConditionCheck {
        name: "F3".into(),
        passed: f3,
        witness_u: Some(if d0 < 0.0 { 1.0 } else { 0.0 }),
        witness_value: if d0 < 0.0 { d1 } else { d0 },
        detail: format!("f'(0) = {d0}, f'(1) = {d1}"),
    });

    // F4: f < 0 on (0, θ), f > 0 on (θ, 1); the three roots are added to the grid
    let theta = f.theta;
    let mut f4 = ConditionCheck {
        name: "F4".into(),
        passed: theta.is_some(),
        witness_u: None,
        witness_value: 0.0,
        detail: match theta {
            Some(t) => format!("interior zero at {t}"),
            None => "no interior sign change".into(),
        },
    };
    if let Some(th) = theta {
        let th_res = eval(th).map(|e| e.value).unwrap_or(f64::NAN);
        if !(th_res.abs() <= tol.max(1e-9)) {
            f4.passed = false;
            f4.witness_u = Some(th);
            f4.witness_value = th_res;
            f4.detail = format!("interior zero residual {th_res:e}");
        }
        for i in 1..grid_size {
            let u = i as f64 / grid_size as f64;
            if (u - th).abs() < 1e-12 {
                continue;
            }
            let v = match eval(u) {
                Ok(e) => e.value,
                Err(_) => f64::NAN,
            };
            let ok = if u < th { v < 0.0 } else { v > 0.0 };
            if !ok && f4.passed {
                f4.passed = false;
                f4.witness_u = Some(u);
                f4.witness_value = v;
                f4.detail = format!("sign violated at u = {u} (f = {v:e}, theta = {th})");
            }
        }
    }
    let f4_passed = f4.passed;
    checks.push(f4);

    let integral = f.potential_at_1;
    if f4_passed {
        checks.push(ConditionCheck {
            name: "F8".into(),
            passed: integral > 0.0,
            witness_u: None,
            witness_value: integral,
            detail: format!("integral over [0,1] = {integral}"),
        });
    }
    let passed = checks.iter().all(|c| c.passed) && f4_passed;
    Ok(ValidationReport {
        checks,
        passed,
        theta,
        integral,
    })
}

/// `f(x,u) = χ(x)f₁(u) + (1-χ(x))f₂(u)` with `χ` rising across `[-x0, 0]`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SpatialReaction {
    pub f1: BistableNonlinearity,
    pub f2: BistableNonlinearity,
    pub x0: f64,
    pub blend: BlendKind,
    /// Smallest constant with `|f₁(u) - f₂(u)| ≤ C_f |1-u|`.
    pub c_f: f64,
}

impl SpatialReaction {
    /// Validates both terms, the ordering of their zeros and the pointwise order `f₂ ≤ f₁`.
    pub fn new(
        f1: BistableNonlinearity,
        f2: BistableNonlinearity,
        x0: f64,
        blend: BlendKind,
    ) -> Result<Self> {
        if !(x0 > 0.0 && x0.is_finite()) {
            return Err(Error::Config(format!(
                "transition width x0 must be positive, got {x0}"
            )));
        }
        for (name, f) in [("f1", &f1), ("f2", &f2)] {
            let rep = validate_bistable(f, VALIDATION_POINTS, 1e-9)?;
            if !rep.passed {
                let failed: Vec<_> = rep
                    .checks
                    .iter()
                    .filter(|c| !c.passed)
                    .map(|c| c.detail.clone())
                    .collect();
                return Err(Error::Precondition(format!(
                    "{name} is not bistable: {}",
                    failed.join("; ")
                )));
            }
        }
        let (t1, t2) = (f1.theta()?, f2.theta()?);
        if t1 >= t2 {
            return Err(Error::Precondition(format!(
                "interior zeros must satisfy theta1 < theta2, got {t1} and {t2}"
            )));
        }
        Self::assemble(f1, f2, x0, blend)
    }

    /// Homogeneous medium with the same term on both sides.
    pub fn homogeneous(f: BistableNonlinearity) -> Result<Self> {
        let rep = validate_bistable(&f, VALIDATION_POINTS, 1e-9)?;
        if !rep.passed {
            return Err(Error::Precondition("nonlinearity is not bistable".into()));
        }
        Self::assemble(f.clone(), f, 1.0, BlendKind::Quintic)
    }

    fn assemble(
        f1: BistableNonlinearity,
        f2: BistableNonlinearity,
        x0: f64,
        blend: BlendKind,
    ) -> Result<Self> {
        for i in 0..=VALIDATION_POINTS {
            let u = i as f64 / VALIDATION_POINTS as f64;
            let (a, b) = (f1.value(u), f2.value(u));
            if b > a + 1e-12 {
                return Err(Error::Precondition(format!(
                    "f2 exceeds f1 at u = {u} ({b} > {a})"
                )));
            }
        }
        let mut r = Self {
            f1,
            f2,
            x0,
            blend,
            c_f: 0.0,
        };
        r.c_f = derive_cf(&r);
        Ok(r)
    }

    /// Weight of `f₁` at position `x1`.
    #[inline]
    pub fn chi(&self, x1: f64) -> f64 {
        if x1 >= 0.0 {
            1.0
        } else if x1 <= -self.x0 {
            0.0
        } else {
            self.blend.value((x1 + self.x0) / self.x0)
        }
    }

    #[inline]
    pub fn eval(&self, x1: f64, u: f64) -> f64 {
        let w = self.chi(x1);
        if w == 1.0 {
            self.f1.value(u)
        } else if w == 0.0 {
            self.f2.value(u)
        } else {
            w * self.f1.value(u) + (1.0 - w) * self.f2.value(u)
        }
    }

    /// `∂_u f(x1, u)`.
    #[inline]
    pub fn slope(&self, x1: f64, u: f64) -> f64 {
        let w = self.chi(x1);
        w * self.f1.slope(u) + (1.0 - w) * self.f2.slope(u)
    }

    /// Largest Lipschitz constant of the two terms.
    pub fn lipschitz_bound(&self) -> f64 {
        self.f1.lipschitz_bound.max(self.f2.lipschitz_bound)
    }

    pub fn is_homogeneous(&self) -> bool {
        self.f1 == self.f2
    }

    pub fn fingerprint(&self) -> String {
        let desc = serde_json::json!({
            "f1": self.f1.kind,
            "f2": self.f2.kind,
            "x0": self.x0,
            "blend": self.blend,
        });
        hex::encode(Sha256::digest(
            serde_json::to_vec(&desc).expect("reaction serializes"),
        ))
    }
}

pub fn eval_spatial(r: &SpatialReaction, x1: f64, u: f64) -> f64 {
    r.eval(x1, u)
}

/// `sup_{u∈[0,1)} |f₁(u) - f₂(u)| / (1-u)`, sampled densely, with the limit at `u = 1`
/// taken from the endpoint derivatives.
pub fn derive_cf(r: &SpatialReaction) -> f64 {
    let n = 10 * VALIDATION_POINTS;
    let mut best = (r.f1.derivative_at_1 - r.f2.derivative_at_1).abs();
    for i in 0..n {
        let u = i as f64 / n as f64;
        let ratio = (r.f1.value(u) - r.f2.value(u)).abs() / (1.0 - u);
        best = best.max(ratio);
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn pair() -> SpatialReaction {
        SpatialReaction::new(
            BistableNonlinearity::cubic(0.2, 1.0).unwrap(),
            BistableNonlinearity::cubic(0.3, 1.0).unwrap(),
            2.0,
            BlendKind::Quintic,
        )
        .unwrap()
    }

    #[test]
    fn cubic_endpoint_values() {
        let f = BistableNonlinearity::cubic(0.2, 1.0).unwrap();
        let e = f.evaluate(0.0).unwrap();
        assert_eq!((e.value, e.derivative, e.potential), (0.0, -0.2, 0.0));
        let e = f.evaluate(1.0).unwrap();
        assert_eq!(e.value, 0.0);
        assert_abs_diff_eq!(e.derivative, -0.8, epsilon = 1e-15);
        assert_abs_diff_eq!(e.potential, 0.05, epsilon = 1e-15);
        let e = f.evaluate(0.2).unwrap();
        assert_eq!(e.value, 0.0);
        assert!(e.derivative > 0.0 && e.potential < 0.0);
    }

    #[test]
    fn linear_extension_outside_unit_interval() {
        let f = BistableNonlinearity::cubic(0.3, 2.0).unwrap();
        let below = f.evaluate(-0.1).unwrap();
        assert_abs_diff_eq!(below.value, -0.6 * -0.1, epsilon = 1e-15);
        let above = f.evaluate(1.1).unwrap();
        assert_abs_diff_eq!(above.value, 2.0 * -0.7 * 0.1, epsilon = 1e-15);
        assert_eq!(f.value(1.1), above.value);
    }

    #[test]
    fn validation_outcomes() {
        let ok =
            validate_bistable(&BistableNonlinearity::cubic(0.2, 1.0).unwrap(), 1000, 1e-9).unwrap();
        assert!(ok.passed);
        assert_abs_diff_eq!(ok.integral, 0.05, epsilon = 1e-15);

        let bad =
            validate_bistable(&BistableNonlinearity::cubic(0.6, 1.0).unwrap(), 1000, 1e-9).unwrap();
        assert!(!bad.passed);
        assert!(!bad.check("F8").unwrap().passed);
        assert_abs_diff_eq!(bad.integral, -0.2 / 12.0, epsilon = 1e-15);

        let n = 300;
        let u: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
        let zero = BistableNonlinearity::tabulated(u, vec![0.0; n], vec![0.0; n]).unwrap();
        let rep = validate_bistable(&zero, 1000, 1e-9).unwrap();
        assert!(!rep.check("F3").unwrap().passed);
        assert!(rep.check("F8").is_none());
    }

    #[test]
    fn small_validation_grid_is_rejected() {
        let f = BistableNonlinearity::cubic(0.2, 1.0).unwrap();
        assert!(validate_bistable(&f, 50, 1e-9).is_err());
    }

    #[test]
    fn tabulated_cubic_matches_closed_form() {
        let n = 401;
        let u: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
        let cf = BistableNonlinearity::cubic(0.25, 1.0).unwrap();
        let f = u.iter().map(|&v| cf.value(v)).collect();
        let df = u.iter().map(|&v| cf.slope(v)).collect();
        let tf = BistableNonlinearity::tabulated(u, f, df).unwrap();
        assert_abs_diff_eq!(tf.theta.unwrap(), 0.25, epsilon = 1e-12);
        assert_abs_diff_eq!(tf.potential_at_1, cf.potential_at_1, epsilon = 1e-14);
        for i in 0..=97 {
            let v = i as f64 / 97.0;
            let a = tf.evaluate(v).unwrap();
            let b = cf.evaluate(v).unwrap();
            assert_abs_diff_eq!(a.value, b.value, epsilon = 1e-14);
            assert_abs_diff_eq!(a.potential, b.potential, epsilon = 1e-14);
        }
        assert!(validate_bistable(&tf, 1000, 1e-9).unwrap().passed);
    }

    #[test]
    fn table_without_full_support_errors_inside_unit_interval() {
        let n = 300;
        let u: Vec<f64> = (0..n).map(|i| 0.5 * i as f64 / (n - 1) as f64).collect();
        let t = BistableNonlinearity::tabulated(u, vec![0.0; n], vec![0.0; n]).unwrap();
        assert!(matches!(t.evaluate(0.8), Err(Error::Domain(_))));
        assert!(t.evaluate(0.3).is_ok());
    }

    #[test]
    fn spatial_examples() {
        let r = pair();
        assert_abs_diff_eq!(eval_spatial(&r, 0.5, 0.4), 0.048, epsilon = 1e-15);
        assert_abs_diff_eq!(eval_spatial(&r, -3.0, 0.4), 0.024, epsilon = 1e-15);
        for u in [0.1, 0.4, 0.77] {
            let mid = eval_spatial(&r, -1.0, u);
            assert_abs_diff_eq!(mid, 0.5 * (r.f1.value(u) + r.f2.value(u)), epsilon = 1e-15);
        }
        assert_eq!(eval_spatial(&r, 0.0, 0.4), r.f1.value(0.4));
        assert_eq!(eval_spatial(&r, -2.0, 0.4), r.f2.value(0.4));
    }

    #[test]
    fn cf_closed_forms() {
        assert_abs_diff_eq!(pair().c_f, 0.1, epsilon = 1e-12);
        let r = SpatialReaction::new(
            BistableNonlinearity::cubic(0.1, 1.0).unwrap(),
            BistableNonlinearity::cubic(0.45, 1.0).unwrap(),
            1.0,
            BlendKind::Cubic,
        )
        .unwrap();
        assert_abs_diff_eq!(r.c_f, 0.35, epsilon = 1e-12);
        let h =
            SpatialReaction::homogeneous(BistableNonlinearity::cubic(0.2, 1.0).unwrap()).unwrap();
        assert_eq!(h.c_f, 0.0);
    }

    #[test]
    fn ordering_of_zeros_is_enforced() {
        let e = SpatialReaction::new(
            BistableNonlinearity::cubic(0.3, 1.0).unwrap(),
            BistableNonlinearity::cubic(0.2, 1.0).unwrap(),
            2.0,
            BlendKind::Quintic,
        );
        assert!(matches!(e, Err(Error::Precondition(_))));
    }
}
