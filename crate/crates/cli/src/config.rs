//! Experiment configuration. One JSON file per experiment; unknown keys are
//! rejected and parse errors carry the key path.

use std::fs;
use std::path::{Path, PathBuf};

use frontlab::interp::BlendKind;
use frontlab::reaction::{BistableNonlinearity, SpatialReaction};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum NonlinearitySpec {
    /// `scale · u(1-u)(u-θ)`.
    Cubic {
        theta: f64,
        #[serde(default = "one")]
        scale: f64,
    },
    /// CSV with columns `u,f,df`, resolved against the config's directory.
    Table { path: PathBuf },
}

fn one() -> f64 {
    1.0
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ReactionSpec {
    pub f1: NonlinearitySpec,
    pub f2: NonlinearitySpec,
    pub x0: f64,
    #[serde(default)]
    pub blend: BlendKind,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub x_min: f64,
    pub x_max: f64,
    pub h: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct TimeSpec {
    /// Start time; the run starts from the early-time subsolution, so `t0 ≤ T1`.
    pub t0: f64,
    pub t_end: f64,
    pub dt: f64,
    #[serde(default = "one")]
    pub snapshot_every: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct WaveSpec {
    pub z_min: f64,
    pub z_max: f64,
    pub h: f64,
    pub tol: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct EnvelopeSpec {
    pub ordering_tol: f64,
    pub residual_tol: f64,
    /// Probe rows per time window.
    pub probe_nt: usize,
    /// Probe spacing in x.
    pub probe_h: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct EntireSpec {
    pub n_list: Vec<u32>,
    pub t_end: f64,
    pub eta: f64,
    pub ordering_tol: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct ProbeSpec {
    pub base_n: Vec<u32>,
    pub perturbations: Vec<f64>,
    pub grid: GridSpec,
    pub dt: f64,
    pub t_end: f64,
    pub late_fraction: f64,
    pub tol: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(rename_all = "lowercase")]
pub enum CutoffChoice {
    Auto,
    None,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum CutoffSlope {
    Fixed(f64),
    Named(CutoffChoice),
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct LyapunovSpec {
    pub m: CutoffSlope,
    /// Decay rate entering the admissible range of `m`.
    pub eta: f64,
    pub z_min: f64,
    pub z_max: f64,
    /// Snapshots before this time are left out of the series.
    pub from: f64,
    /// Bound on the energy identity residual including the cutoff cross term.
    pub tol: f64,
    /// Bound on the smallest dissipation over the final quarter.
    pub late_q_tol: f64,
    /// Bound on the dissipation of the exact second front.
    pub wave_q_tol: f64,
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct MetricsSpec {
    pub level: f64,
    pub speed_rel_tol: f64,
    pub dist_tol: f64,
    pub beta_tol: f64,
    pub decay_eta: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub reaction: ReactionSpec,
    pub grid: GridSpec,
    pub time: TimeSpec,
    pub wave: WaveSpec,
    pub envelopes: EnvelopeSpec,
    pub entire: EntireSpec,
    pub probe: ProbeSpec,
    pub lyapunov: LyapunovSpec,
    pub metrics: MetricsSpec,
    pub output: PathBuf,
    /// Seeds the uniqueness-probe perturbations only.
    pub seed: u64,
}

fn positive(name: &str, v: f64) -> Result<(), CliError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(CliError::Config(format!(
            "{name} must be positive, got {v}"
        )))
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<(Self, PathBuf), CliError> {
        let text = fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        let de = &mut serde_json::Deserializer::from_str(&text);
        let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
            CliError::Config(format!(
                "{}: at `{}`: {}",
                path.display(),
                e.path(),
                e.inner()
            ))
        })?;
        cfg.validate()?;
        let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok((cfg, base))
    }

    pub fn validate(&self) -> Result<(), CliError> {
        positive("reaction.x0", self.reaction.x0)?;
        positive("grid.h", self.grid.h)?;
        positive("time.dt", self.time.dt)?;
        positive("time.snapshot_every", self.time.snapshot_every)?;
        positive("wave.h", self.wave.h)?;
        positive("wave.tol", self.wave.tol)?;
        positive("envelopes.ordering_tol", self.envelopes.ordering_tol)?;
        positive("envelopes.residual_tol", self.envelopes.residual_tol)?;
        positive("envelopes.probe_h", self.envelopes.probe_h)?;
        positive("entire.eta", self.entire.eta)?;
        positive("entire.ordering_tol", self.entire.ordering_tol)?;
        positive("probe.dt", self.probe.dt)?;
        positive("probe.grid.h", self.probe.grid.h)?;
        positive("probe.tol", self.probe.tol)?;
        positive("lyapunov.eta", self.lyapunov.eta)?;
        positive("lyapunov.tol", self.lyapunov.tol)?;
        positive("lyapunov.late_q_tol", self.lyapunov.late_q_tol)?;
        positive("lyapunov.wave_q_tol", self.lyapunov.wave_q_tol)?;
        positive("metrics.level", self.metrics.level)?;
        positive("metrics.speed_rel_tol", self.metrics.speed_rel_tol)?;
        positive("metrics.dist_tol", self.metrics.dist_tol)?;
        positive("metrics.beta_tol", self.metrics.beta_tol)?;
        positive("metrics.decay_eta", self.metrics.decay_eta)?;
        if let CutoffSlope::Fixed(m) = self.lyapunov.m {
            positive("lyapunov.m", m)?;
        }
        if self.grid.x_max <= self.grid.x_min || self.wave.z_max <= self.wave.z_min {
            return Err(CliError::Config("grid bounds must be increasing".into()));
        }
        if self.time.t_end <= self.time.t0 {
            return Err(CliError::Config("time.t_end must exceed time.t0".into()));
        }
        if self.envelopes.probe_nt < 2 {
            return Err(CliError::Config(
                "envelopes.probe_nt must be at least 2".into(),
            ));
        }
        if self.entire.n_list.len() < 2 {
            return Err(CliError::Config(
                "entire.n_list needs at least two entries".into(),
            ));
        }
        if self.probe.base_n.is_empty() {
            return Err(CliError::Config(
                "probe.base_n needs at least one entry".into(),
            ));
        }
        if !(self.probe.late_fraction > 0.0 && self.probe.late_fraction <= 1.0) {
            return Err(CliError::Config(
                "probe.late_fraction must lie in (0, 1]".into(),
            ));
        }
        if !(self.metrics.level < 1.0) {
            return Err(CliError::Config("metrics.level must lie in (0, 1)".into()));
        }
        Ok(())
    }

    /// Hex SHA-256 of the canonical serialization.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("configs always serialize");
        hex::encode(Sha256::digest(text.as_bytes()))
    }

    pub fn reaction(&self, base: &Path) -> Result<SpatialReaction, CliError> {
        let build = |s: &NonlinearitySpec| -> Result<BistableNonlinearity, CliError> {
            match s {
                NonlinearitySpec::Cubic { theta, scale } => {
                    Ok(BistableNonlinearity::cubic(*theta, *scale)?)
                }
                NonlinearitySpec::Table { path } => {
                    Ok(BistableNonlinearity::from_table_csv(&base.join(path))?)
                }
            }
        };
        let f1 = build(&self.reaction.f1)?;
        let f2 = build(&self.reaction.f2)?;
        Ok(SpatialReaction::new(
            f1,
            f2,
            self.reaction.x0,
            self.reaction.blend,
        )?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn default_config() -> RunConfig {
        let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/default.json");
        RunConfig::load(&path).unwrap().0
    }

    #[test]
    fn round_trip_is_bit_identical() {
        let c = default_config();
        let text = serde_json::to_string_pretty(&c).unwrap();
        let back: RunConfig = serde_json::from_str(&text).unwrap();
        assert_eq!(back, c);
        assert_eq!(serde_json::to_string_pretty(&back).unwrap(), text);
        assert_eq!(back.hash(), c.hash());
    }

    #[test]
    fn unknown_keys_report_their_path() {
        let mut v = serde_json::to_value(default_config()).unwrap();
        v["grid"]["spacing"] = serde_json::json!(0.1);
        let text = v.to_string();
        let de = &mut serde_json::Deserializer::from_str(&text);
        let err = serde_path_to_error::deserialize::<_, RunConfig>(de).unwrap_err();
        assert_eq!(err.path().to_string(), "grid.spacing");
    }

    #[test]
    fn cutoff_accepts_number_or_keyword() {
        for (text, want) in [
            ("0.07", CutoffSlope::Fixed(0.07)),
            ("\"auto\"", CutoffSlope::Named(CutoffChoice::Auto)),
            ("\"none\"", CutoffSlope::Named(CutoffChoice::None)),
        ] {
            assert_eq!(serde_json::from_str::<CutoffSlope>(text).unwrap(), want);
        }
    }

    #[test]
    fn invalid_values_are_config_errors() {
        let mut c = default_config();
        c.grid.h = -0.1;
        assert!(matches!(c.validate(), Err(CliError::Config(_))));
        let mut c = default_config();
        c.entire.n_list = vec![40];
        assert!(matches!(c.validate(), Err(CliError::Config(_))));
    }
}
