use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn squeeze(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_squeeze")).args(args).arg("--out-dir").arg(out).output().unwrap()
}

fn fresh_dir(name: &str) -> PathBuf {
    let dir = Path::new(env!("CARGO_TARGET_TMPDIR")).join(name);
    let _ = fs::remove_dir_all(&dir);
    dir
}

fn read_csv(path: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(path).unwrap().lines().map(|l| l.split(',').map(str::to_string).collect()).collect()
}

#[test]
fn reruns_are_byte_identical() {
    let args = ["optimize", "--n-particles", "60", "--steps", "2", "--starts", "4", "--seed", "11"];
    let (a, b) = (fresh_dir("rerun_a"), fresh_dir("rerun_b"));
    assert!(squeeze(&args, &a).status.success());
    assert!(squeeze(&args, &b).status.success());
    for file in ["protocol.json", "optimize_history.csv"] {
        assert_eq!(fs::read(a.join(file)).unwrap(), fs::read(b.join(file)).unwrap(), "{file}");
    }
    assert!(a.join("manifest_optimize.json").exists());
}

#[test]
fn protocol_file_has_expected_schema() {
    let dir = fresh_dir("schema");
    assert!(squeeze(&["optimize", "--n-particles", "40", "--steps", "3", "--starts", "2"], &dir).status.success());
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join("protocol.json")).unwrap()).unwrap();
    assert_eq!(v["n_particles"], 40);
    assert!(v["xi2"].as_f64().unwrap() < 1.0);
    assert!(v["seed"].is_u64());
    let segments = v["segments"].as_array().unwrap();
    assert_eq!(segments.len(), 3);
    for s in segments {
        assert!(s["theta_rad"].is_f64() && s["duration_inv_chi"].as_f64().unwrap() >= 0.0);
    }
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.join("manifest_optimize.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "optimize");
}

#[test]
fn zero_noise_envelope_collapses() {
    let dir = fresh_dir("noise");
    let args = ["noise", "--n-particles", "50", "--steps", "2", "--starts", "2", "--rel-error", "0", "--trials", "5"];
    assert!(squeeze(&args, &dir).status.success());
    let rows = read_csv(&dir.join("noise_eps_0.csv"));
    assert_eq!(rows[0], ["time", "xi2_mean", "xi2_lo", "xi2_hi", "xi2_ideal"]);
    for r in &rows[1..] {
        assert!(r[1] == r[2] && r[2] == r[3] && r[3] == r[4], "{r:?}");
    }
}

#[test]
fn invalid_input_exits_nonzero() {
    let dir = fresh_dir("invalid");
    assert!(!squeeze(&["optimize", "--n-particles", "0"], &dir).status.success());
    assert!(!squeeze(&["noise", "--rel-error", "-0.1", "--n-particles", "20"], &dir).status.success());
    assert!(!squeeze(&["scaling", "--schemes", "bogus"], &dir).status.success());
    assert!(!squeeze(&["landscape", "--no-such-flag"], &dir).status.success());
}
