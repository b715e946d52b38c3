use std::path::Path;
use std::process::{Command, Output};

fn roskit(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_roskit"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env("ROSKIT_THREADS", "2")
        .output()
        .expect("run roskit")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn reduce_prints_anchor_values_and_table() {
    let dir = tempfile::tempdir().unwrap();
    let o = roskit(&["reduce"], dir.path());
    assert!(o.status.success(), "{o:?}");
    let text = stdout(&o);
    assert!(text.contains("A_rd = -0.0723"), "{text}");
    assert!(text.contains("IEPFC"));
    let table: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("table.json")).unwrap()).unwrap();
    assert_eq!(table.as_array().unwrap().len(), 5);
}

#[test]
fn mode_one_simulation_breaks_the_limit() {
    let dir = tempfile::tempdir().unwrap();
    let o = roskit(&["simulate", "--policy", "mode1-only", "--horizon", "10"], dir.path());
    assert!(o.status.success(), "{o:?}");
    let csv = std::fs::read_to_string(dir.path().join("simulate_mode1-only.csv")).unwrap();
    let mut lines = csv.lines();
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    let col = header.iter().position(|h| *h == "dw").unwrap();
    let nadir = lines
        .map(|l| l.split(',').nth(col).unwrap().parse::<f64>().unwrap())
        .fold(f64::INFINITY, f64::min);
    assert!(nadir < -0.5, "{nadir}");
}

#[test]
fn ros_then_guard_evaluation() {
    let dir = tempfile::tempdir().unwrap();
    let o = roskit(&["ros", "--mode", "2", "--quick"], dir.path());
    assert!(o.status.success(), "{o:?}");
    assert!(dir.path().join("ros_mode2.json").exists());

    let o = roskit(&["guard-eval", "--mode", "2", "--state", "0,0,0,0"], dir.path());
    assert!(o.status.success(), "{o:?}");
    assert!(stdout(&o).contains("inside"), "{}", stdout(&o));

    let o = roskit(&["guard-eval", "--mode", "2"], dir.path());
    assert!(o.status.success(), "{o:?}");
    let crossings: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("crossings_mode2.json")).unwrap()).unwrap();
    assert!(!crossings.as_array().unwrap().is_empty());

    let o = roskit(&["deadband", "--mode", "2"], dir.path());
    assert!(o.status.success(), "{o:?}");
    assert!(stdout(&o).contains("safe"));
}

#[test]
fn ros_output_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        let o = roskit(&["ros", "--mode", "3", "--quick", "--seed", "7"], d.path());
        assert!(o.status.success(), "{o:?}");
    }
    let read = |d: &tempfile::TempDir| std::fs::read(d.path().join("ros_mode3.json")).unwrap();
    assert_eq!(read(&a), read(&b));
}

#[test]
fn deadband_without_ros_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = roskit(&["deadband", "--mode", "2"], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("missing region of safety"));
}

#[test]
fn unsafe_mode_reports_verification_infeasible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"study": {"disturbance": 0.5}}"#).unwrap();
    let o = roskit(
        &["ros", "--mode", "1", "--quick", "--config", cfg.to_str().unwrap()],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(2), "{o:?}");
}

#[test]
fn unknown_config_keys_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"study": {"degre": 6}}"#).unwrap();
    let o = roskit(&["reduce", "--config", cfg.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("unknown field"));
}

#[test]
fn plant_file_is_resolved_next_to_the_config() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("plant.json"),
        r#"{"modes": [{"id": 1, "k_ie": 0.0, "k_pc": 0.0}]}"#,
    )
    .unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(&cfg, r#"{"plant_file": "plant.json"}"#).unwrap();
    let o = roskit(&["reduce", "--config", cfg.to_str().unwrap()], dir.path());
    assert!(o.status.success(), "{o:?}");
    assert!(!stdout(&o).contains("IEPFC"));
}

#[test]
fn sdpa_export_writes_a_problem() {
    let dir = tempfile::tempdir().unwrap();
    let o = roskit(&["export-sdpa", "--mode", "2", "--quick"], dir.path());
    assert!(o.status.success(), "{o:?}");
    let file = std::fs::read_dir(dir.path())
        .unwrap()
        .map(|e| e.unwrap().path())
        .find(|p| p.extension().is_some_and(|e| e == "dat-s"))
        .expect("sdpa file");
    let text = std::fs::read_to_string(file).unwrap();
    let m: usize = text.lines().next().unwrap().trim().parse().unwrap();
    assert!(m > 0);
}

#[test]
fn quantify_emits_series() {
    let dir = tempfile::tempdir().unwrap();
    let o = roskit(&["quantify", "--mode", "5", "--points", "5"], dir.path());
    assert!(o.status.success(), "{o:?}");
    let csv = std::fs::read_to_string(dir.path().join("quantify_mode5.csv")).unwrap();
    assert_eq!(csv.lines().count(), 6);
    assert!(stdout(&o).contains("H_e(0) = 6.0000"));
}

#[test]
fn missing_mode_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = roskit(&["ros"], dir.path());
    assert_eq!(o.status.code(), Some(1));
}
