use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use sha2::{Digest, Sha256};

const STAGES: [&str; 7] = [
    "validate",
    "wave",
    "simulate",
    "entire",
    "envelopes",
    "lyapunov",
    "metrics",
];

fn default_config() -> Value {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/default.json");
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

// short coarse run; long enough for every stage to have data, too short to converge
fn small_config() -> Value {
    let mut c = default_config();
    c["grid"] = json!({ "x_min": -60.0, "x_max": 40.0, "h": 0.1 });
    c["time"] = json!({ "t0": -40.0, "t_end": 120.0, "dt": 0.01, "snapshot_every": 1.0 });
    c["wave"] = json!({ "z_min": -40.0, "z_max": 40.0, "h": 0.1, "tol": 1e-8 });
    c["entire"] = json!({ "n_list": [20, 30], "t_end": 0.0, "eta": 0.05, "ordering_tol": 1e-3 });
    c["probe"] = json!({
        "base_n": [20, 30], "perturbations": [1e-3],
        "grid": { "x_min": -60.0, "x_max": 40.0, "h": 0.2 },
        "dt": 0.02, "t_end": 20.0, "late_fraction": 0.25, "tol": 1e-2
    });
    c["lyapunov"]["z_min"] = json!(-30.0);
    c["lyapunov"]["z_max"] = json!(30.0);
    c
}

fn write_config(dir: &Path, name: &str, v: &Value) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, serde_json::to_string_pretty(v).unwrap()).unwrap();
    p
}

fn frontlab(args: &[&str], config: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_frontlab"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .env("RUST_LOG", "warn")
        .output()
        .unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn all_writes_every_report_and_a_consistent_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "small.json", &small_config());
    let out = tmp.path().join("out");
    let o = frontlab(&["all"], &cfg, &out);
    // the short run has not settled, so some late-time checks fail
    assert_eq!(o.status.code(), Some(1), "{}", stderr(&o));

    let summary = read_json(&out.join("report.json"));
    assert_eq!(summary["passed"], json!(false));
    let hash = summary["config_hash"].as_str().unwrap().to_string();
    let names: Vec<&str> = summary["stages"]
        .as_array()
        .unwrap()
        .iter()
        .map(|s| s["stage"].as_str().unwrap())
        .collect();
    assert_eq!(names, STAGES);
    for s in ["validate", "wave", "simulate", "entire", "envelopes"] {
        assert_eq!(
            read_json(&out.join(s).join("report.json"))["passed"],
            json!(true),
            "{s}"
        );
    }
    let text = fs::read_to_string(out.join("report.txt")).unwrap();
    assert!(text.ends_with("overall: FAIL\n"));

    let manifest = read_json(&out.join("manifest.json"));
    assert_eq!(manifest["config_hash"], json!(hash));
    let listed: BTreeMap<String, String> =
        serde_json::from_value(manifest["artifacts"].clone()).unwrap();
    for (rel, sha) in &listed {
        let bytes = fs::read(out.join(rel)).unwrap();
        assert_eq!(&hex::encode(Sha256::digest(bytes)), sha, "{rel}");
    }
    for want in [
        "wave/phi1.csv",
        "simulate/trajectory/manifest.json",
        "lyapunov/lyapunov.csv",
        "metrics/front_series.csv",
    ] {
        assert!(
            listed.contains_key(want),
            "{want} missing from the manifest"
        );
    }
}

#[test]
fn wave_outputs_are_bit_identical_across_runs() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "small.json", &small_config());
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert_eq!(frontlab(&["wave"], &cfg, &a).status.code(), Some(0));
    assert_eq!(
        frontlab(&["wave", "--threads", "2"], &cfg, &b)
            .status
            .code(),
        Some(0)
    );
    for name in ["phi1.csv", "phi2.csv", "phi1.json", "phi2.json"] {
        assert_eq!(
            fs::read(a.join("wave").join(name)).unwrap(),
            fs::read(b.join("wave").join(name)).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn stage_without_its_inputs_is_a_dependency_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "small.json", &small_config());
    let out = tmp.path().join("out");
    assert_eq!(frontlab(&["wave"], &cfg, &out).status.code(), Some(0));
    let o = frontlab(&["envelopes"], &cfg, &out);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("`simulate`"), "{}", stderr(&o));
    assert!(!out.join("envelopes").join("report.json").exists());
}

#[test]
fn outputs_of_another_config_are_not_reused() {
    let tmp = tempfile::tempdir().unwrap();
    let first = write_config(tmp.path(), "a.json", &small_config());
    let mut changed = small_config();
    changed["time"]["t_end"] = json!(100.0);
    let second = write_config(tmp.path(), "b.json", &changed);
    let out = tmp.path().join("out");
    assert_eq!(frontlab(&["wave"], &first, &out).status.code(), Some(0));
    let o = frontlab(&["simulate"], &second, &out);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("different config"), "{}", stderr(&o));
}

#[test]
fn unknown_config_key_names_its_path() {
    let tmp = tempfile::tempdir().unwrap();
    let mut c = small_config();
    c["grid"]["spacing"] = json!(0.1);
    let cfg = write_config(tmp.path(), "bad.json", &c);
    let o = frontlab(&["validate"], &cfg, &tmp.path().join("out"));
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("grid.spacing"), "{}", stderr(&o));
}

#[test]
fn invalid_values_and_late_start_are_config_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let mut c = small_config();
    c["wave"]["h"] = json!(0.0);
    let cfg = write_config(tmp.path(), "zero.json", &c);
    assert_eq!(
        frontlab(&["validate"], &cfg, &tmp.path().join("o1"))
            .status
            .code(),
        Some(2)
    );

    let mut c = small_config();
    c["time"]["t0"] = json!(0.0);
    let cfg = write_config(tmp.path(), "late.json", &c);
    let out = tmp.path().join("o2");
    assert_eq!(frontlab(&["wave"], &cfg, &out).status.code(), Some(0));
    let o = frontlab(&["simulate"], &cfg, &out);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("T1"), "{}", stderr(&o));
}

#[test]
fn report_needs_every_stage() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "small.json", &small_config());
    let out = tmp.path().join("out");
    assert_eq!(frontlab(&["validate"], &cfg, &out).status.code(), Some(0));
    assert_eq!(frontlab(&["report"], &cfg, &out).status.code(), Some(2));
}
