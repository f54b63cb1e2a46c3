use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub value: f64,
    /// `value <= bound` unless `lower` is set, then `value >= bound`.
    pub bound: f64,
    pub lower: bool,
    pub detail: String,
}

impl Check {
    pub fn at_most(name: &str, value: f64, bound: f64, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed: value <= bound,
            value,
            bound,
            lower: false,
            detail: detail.into(),
        }
    }

    pub fn at_least(name: &str, value: f64, bound: f64, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed: value >= bound,
            value,
            bound,
            lower: true,
            detail: detail.into(),
        }
    }

    pub fn holds(name: &str, ok: bool, detail: impl Into<String>) -> Self {
        let v = if ok { 1.0 } else { 0.0 };
        Self {
            name: name.into(),
            passed: ok,
            value: v,
            bound: 1.0,
            lower: true,
            detail: detail.into(),
        }
    }
}

/// Outcome of one stage, written to `<out>/<stage>/report.json`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct VerificationReport {
    pub stage: String,
    pub config_hash: String,
    pub checks: Vec<Check>,
    pub measurements: BTreeMap<String, f64>,
    pub warnings: Vec<String>,
    pub passed: bool,
}

impl VerificationReport {
    pub fn new(stage: &str, config_hash: &str) -> Self {
        Self {
            stage: stage.into(),
            config_hash: config_hash.into(),
            checks: vec![],
            measurements: BTreeMap::new(),
            warnings: vec![],
            passed: true,
        }
    }

    pub fn check(&mut self, c: Check) {
        self.passed &= c.passed;
        self.checks.push(c);
    }

    pub fn measure(&mut self, name: &str, v: f64) {
        self.measurements.insert(name.into(), v);
    }

    pub fn warn(&mut self, w: impl Into<String>) {
        let w = w.into();
        log::warn!("{}: {w}", self.stage);
        self.warnings.push(w);
    }

    pub fn text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "[{}] {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.stage
        );
        for c in &self.checks {
            let rel = if c.lower { ">=" } else { "<=" };
            let mark = if c.passed { "ok  " } else { "FAIL" };
            let _ = writeln!(
                out,
                "  {mark} {}: {:.6e} {rel} {:.3e}  {}",
                c.name, c.value, c.bound, c.detail
            );
        }
        for (k, v) in &self.measurements {
            let _ = writeln!(out, "  - {k} = {v:.8}");
        }
        for w in &self.warnings {
            let _ = writeln!(out, "  ! {w}");
        }
        out
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Summary {
    pub config_hash: String,
    pub stages: Vec<VerificationReport>,
    pub passed: bool,
}

impl Summary {
    pub fn new(config_hash: &str, stages: Vec<VerificationReport>) -> Self {
        let passed = stages.iter().all(|s| s.passed);
        Self {
            config_hash: config_hash.into(),
            stages,
            passed,
        }
    }

    pub fn text(&self) -> String {
        let mut out: String = self.stages.iter().map(VerificationReport::text).collect();
        let _ = writeln!(
            out,
            "overall: {}",
            if self.passed { "PASS" } else { "FAIL" }
        );
        out
    }
}
