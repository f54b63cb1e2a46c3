//! On-disk layout for trajectories and wave profiles.
//!
//! A trajectory directory holds `manifest.json` and one `snapshot_<t>.csv`
//! (columns `x,u`) per stored time. Floats are written in shortest round-trip
//! form so a reload is bit-identical.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pde::{BoundaryReport, Frame, SimGrid, Snapshot, Trajectory};
use crate::waves::{WaveProfile, WaveSummary};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SnapshotEntry {
    pub t: f64,
    pub file: String,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct TrajectoryManifest {
    pub grid: SimGrid,
    pub dt: f64,
    pub frame: Frame,
    pub reaction_hash: String,
    pub boundary_report: BoundaryReport,
    pub clamp_events: usize,
    pub steps: usize,
    pub snapshots: Vec<SnapshotEntry>,
}

pub fn snapshot_file_name(t: f64) -> String {
    format!("snapshot_{t:.6}.csv")
}

pub fn write_trajectory(dir: &Path, traj: &Trajectory) -> Result<TrajectoryManifest> {
    fs::create_dir_all(dir)?;
    let mut entries = Vec::with_capacity(traj.snapshots.len());
    for s in &traj.snapshots {
        let name = snapshot_file_name(s.t);
        let mut w = csv::Writer::from_path(dir.join(&name))?;
        w.write_record(["x", "u"])?;
        for (i, v) in s.u.iter().enumerate() {
            w.write_record([traj.grid.x(i).to_string(), v.to_string()])?;
        }
        w.flush()?;
        entries.push(SnapshotEntry { t: s.t, file: name });
    }
    let manifest = TrajectoryManifest {
        grid: traj.grid,
        dt: traj.dt,
        frame: traj.frame,
        reaction_hash: traj.reaction_fingerprint.clone(),
        boundary_report: traj.boundary_report,
        clamp_events: traj.clamp_events,
        steps: traj.steps,
        snapshots: entries,
    };
    fs::write(
        dir.join("manifest.json"),
        serde_json::to_string_pretty(&manifest)?,
    )?;
    Ok(manifest)
}

pub fn read_trajectory(dir: &Path) -> Result<Trajectory> {
    let text = fs::read_to_string(dir.join("manifest.json"))?;
    let m: TrajectoryManifest = serde_json::from_str(&text)?;
    let mut snapshots = Vec::with_capacity(m.snapshots.len());
    for e in &m.snapshots {
        let mut r = csv::Reader::from_path(dir.join(&e.file))?;
        let mut u = Vec::with_capacity(m.grid.n);
        for rec in r.records() {
            let rec = rec?;
            let v: f64 = rec
                .get(1)
                .ok_or_else(|| Error::Config(format!("{}: missing u column", e.file)))?
                .parse()
                .map_err(|err| Error::Config(format!("{}: {err}", e.file)))?;
            u.push(v);
        }
        if u.len() != m.grid.n {
            return Err(Error::Config(format!(
                "{}: {} rows for {} nodes",
                e.file,
                u.len(),
                m.grid.n
            )));
        }
        snapshots.push(Snapshot {
            t: e.t,
            u,
            frame: m.frame,
        });
    }
    Ok(Trajectory {
        grid: m.grid,
        snapshots,
        dt: m.dt,
        frame: m.frame,
        reaction_fingerprint: m.reaction_hash,
        boundary_report: m.boundary_report,
        clamp_events: m.clamp_events,
        steps: m.steps,
    })
}

/// Profile sidecar, everything needed to rebuild the profile together with the CSV.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ProfileSidecar {
    #[serde(flatten)]
    pub summary: WaveSummary,
}

/// Writes `<stem>.csv` (`z,phi,dphi,gap`) and `<stem>.json`.
pub fn write_profile(dir: &Path, stem: &str, p: &WaveProfile) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut w = csv::Writer::from_path(dir.join(format!("{stem}.csv")))?;
    w.write_record(["z", "phi", "dphi", "gap"])?;
    for i in 0..p.z.len() {
        w.write_record([
            p.z[i].to_string(),
            p.phi[i].to_string(),
            p.dphi[i].to_string(),
            p.gap[i].to_string(),
        ])?;
    }
    w.flush()?;
    let side = ProfileSidecar {
        summary: p.summary(),
    };
    fs::write(
        dir.join(format!("{stem}.json")),
        serde_json::to_string_pretty(&side)?,
    )?;
    Ok(())
}

pub fn read_profile(dir: &Path, stem: &str) -> Result<WaveProfile> {
    let side: ProfileSidecar =
        serde_json::from_str(&fs::read_to_string(dir.join(format!("{stem}.json")))?)?;
    let mut r = csv::Reader::from_path(dir.join(format!("{stem}.csv")))?;
    let (mut z, mut phi, mut dphi, mut gap) = (vec![], vec![], vec![], vec![]);
    for rec in r.records() {
        let rec = rec?;
        let col = |k: usize| -> Result<f64> {
            rec.get(k)
                .and_then(|s| s.parse().ok())
                .ok_or_else(|| Error::Config(format!("{stem}.csv: malformed row")))
        };
        z.push(col(0)?);
        phi.push(col(1)?);
        dphi.push(col(2)?);
        gap.push(col(3)?);
    }
    let s = side.summary;
    let mut p = WaveProfile::from_parts(
        z,
        phi,
        gap,
        dphi,
        s.speed,
        s.theta,
        s.lambda,
        s.mu,
        s.residual_norm,
    )?;
    p.newton_iterations = s.newton_iterations;
    p.used_shooting_fallback = s.used_shooting_fallback;
    Ok(p)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::reaction::{BistableNonlinearity, SpatialReaction};
    use crate::waves::solve_wave;

    #[test]
    fn trajectory_round_trip_is_exact() {
        let r =
            SpatialReaction::homogeneous(BistableNonlinearity::cubic(0.3, 1.0).unwrap()).unwrap();
        let g = SimGrid::new(-5.0, 5.0, 0.1).unwrap();
        let u0: Vec<f64> = g
            .nodes()
            .iter()
            .map(|x| 0.5 * (1.0 + (x / 3.0).tanh()))
            .collect();
        let tr = crate::pde::simulate(&r, &g, &u0, -1.0, 1.0, 0.01, Frame::Lab, 0.5).unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_trajectory(dir.path(), &tr).unwrap();
        assert!(dir.path().join("snapshot_-1.000000.csv").exists());
        assert_eq!(read_trajectory(dir.path()).unwrap(), tr);
    }

    #[test]
    fn profile_round_trip_is_exact() {
        let p = solve_wave(
            &BistableNonlinearity::cubic(0.2, 1.0).unwrap(),
            -40.0,
            40.0,
            0.1,
            1e-8,
        )
        .unwrap();
        let dir = tempfile::tempdir().unwrap();
        write_profile(dir.path(), "phi1", &p).unwrap();
        let q = read_profile(dir.path(), "phi1").unwrap();
        assert_eq!(q.phi, p.phi);
        assert_eq!(q.summary(), p.summary());
        assert_eq!(q.eval(1.234), p.eval(1.234));
    }
}
