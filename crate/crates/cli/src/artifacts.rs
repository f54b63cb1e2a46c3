//! Output tree: `<out>/<stage>/<name>` plus `<out>/manifest.json`, which maps
//! every artifact to its SHA-256 and ties the tree to the config hash.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;
use crate::report::VerificationReport;

pub const STAGES: [&str; 7] = [
    "validate",
    "wave",
    "simulate",
    "entire",
    "envelopes",
    "lyapunov",
    "metrics",
];

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Manifest {
    pub config_hash: String,
    pub tool_version: String,
    pub artifacts: BTreeMap<String, String>,
}

pub struct Layout {
    pub root: PathBuf,
    pub config_hash: String,
}

impl Layout {
    pub fn stage_dir(&self, stage: &str) -> Result<PathBuf, CliError> {
        let d = self.root.join(stage);
        fs::create_dir_all(&d)?;
        Ok(d)
    }

    pub fn write_json<T: Serialize>(&self, stage: &str, name: &str, v: &T) -> Result<(), CliError> {
        let path = self.stage_dir(stage)?.join(name);
        fs::write(path, serde_json::to_string_pretty(v)? + "\n")?;
        Ok(())
    }

    pub fn write_text(&self, stage: &str, name: &str, text: &str) -> Result<(), CliError> {
        fs::write(self.stage_dir(stage)?.join(name), text)?;
        Ok(())
    }

    pub fn write_root(&self, name: &str, text: &str) -> Result<(), CliError> {
        fs::create_dir_all(&self.root)?;
        fs::write(self.root.join(name), text)?;
        Ok(())
    }

    pub fn read_report(&self, stage: &str) -> Option<VerificationReport> {
        let text = fs::read_to_string(self.root.join(stage).join("report.json")).ok()?;
        serde_json::from_str(&text).ok()
    }

    /// Fails unless `stage` has run with the current config.
    pub fn require(&self, stage: &str, by: &str) -> Result<(), CliError> {
        match self.read_report(stage) {
            None => Err(CliError::Dependency(format!(
                "`{by}` needs the outputs of `{stage}` in {}; run the `{stage}` command first",
                self.root.display()
            ))),
            Some(r) if r.config_hash != self.config_hash => Err(CliError::Dependency(format!(
                "outputs of `{stage}` in {} come from a different config; rerun `{stage}`",
                self.root.display()
            ))),
            Some(_) => Ok(()),
        }
    }

    pub fn finish_stage(&self, report: &VerificationReport) -> Result<(), CliError> {
        self.write_json(&report.stage, "report.json", report)?;
        self.write_manifest()
    }

    pub fn write_manifest(&self) -> Result<(), CliError> {
        let mut artifacts = BTreeMap::new();
        collect(&self.root, &self.root, &mut artifacts)?;
        let m = Manifest {
            config_hash: self.config_hash.clone(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            artifacts,
        };
        fs::write(
            self.root.join("manifest.json"),
            serde_json::to_string_pretty(&m)? + "\n",
        )?;
        Ok(())
    }
}

fn collect(root: &Path, dir: &Path, out: &mut BTreeMap<String, String>) -> Result<(), CliError> {
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if path.is_dir() {
            collect(root, &path, out)?;
        } else {
            let rel = path.strip_prefix(root).expect("walk stays under the root");
            let key = rel
                .components()
                .map(|c| c.as_os_str().to_string_lossy())
                .collect::<Vec<_>>()
                .join("/");
            if key == "manifest.json" {
                continue;
            }
            out.insert(key, hex::encode(Sha256::digest(fs::read(&path)?)));
        }
    }
    Ok(())
}
