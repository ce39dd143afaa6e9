use std::path::Path;
use std::process::Command;

fn land_sim(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_land-sim")).args(args).output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

fn shipped(name: &str) -> String {
    format!("{}/../../configs/{name}", env!("CARGO_MANIFEST_DIR"))
}

#[test]
fn run_writes_trial_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = land_sim(&["run", "--config", &shipped("pd.toml"), "--seed", "3", "--out", out]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(dir.path().join("trial_pd_seed3.csv").exists());
    let summary = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 2);
    assert!(summary.lines().nth(1).unwrap().starts_with("pd,3,"));
}

#[test]
fn controller_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = land_sim(&["run", "--config", &shipped("default.toml"), "--controller", "pid", "--out", out]);
    assert_eq!(o.status.code(), Some(0));
    assert!(dir.path().join("trial_pid_seed1.csv").exists());
}

#[test]
fn config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let bad = write(dir.path(), "bad.toml", "max_duration = -1.0\n");
    assert_eq!(land_sim(&["run", "--config", &bad, "--out", out]).status.code(), Some(2));
    let typo = write(dir.path(), "typo.toml", "[camera]\nfocal = 3.0\n");
    assert_eq!(land_sim(&["experiment", "--config", &typo, "--trials", "1", "--out", out]).status.code(), Some(2));
    let missing = dir.path().join("none.toml");
    assert_eq!(land_sim(&["run", "--config", missing.to_str().unwrap(), "--out", out]).status.code(), Some(2));
    let ok = shipped("default.toml");
    let o = land_sim(&["experiment", "--config", &ok, "--trials", "3", "--seeds", "1,2", "--out", out]);
    assert_eq!(o.status.code(), Some(2));
    let o = land_sim(&["detector-sweep", "--config", &ok, "--frames", "100", "--presets", "akaze", "--out", out]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn timeout_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "blind.toml", "max_duration = 3.0\n[noise]\npreset = \"sift-like\"\ndropout_rate = 1.0\n");
    let o = land_sim(&["run", "--config", &cfg, "--out", dir.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    let csv = std::fs::read_to_string(dir.path().join("trial_pd_seed1.csv")).unwrap();
    assert!(csv.trim_end().ends_with(",timeout"));
}

#[test]
fn sweeps_write_their_tables() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let cfg = shipped("default.toml");
    let o = land_sim(&["detector-sweep", "--config", &cfg, "--frames", "100", "--presets", "zero,sift-like", "--out", out]);
    assert_eq!(o.status.code(), Some(0));
    let zero = std::fs::read_to_string(dir.path().join("detector_zero.csv")).unwrap();
    assert_eq!(zero.lines().count(), 6);
    let o = land_sim(&["wind-sweep", "--config", &cfg, "--bias-list", "0.25", "--seeds", "1", "--out", out]);
    assert_eq!(o.status.code(), Some(0));
    let wind = std::fs::read_to_string(dir.path().join("wind_sweep.csv")).unwrap();
    assert!(wind.lines().nth(1).unwrap().starts_with("0.25,1,1,"));
}
