use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_metastable"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_config(kind: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    let mut args = vec![
        kind,
        "--config",
        config.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    run(&args)
}

fn write_config(dir: &TempDir, text: &str) -> PathBuf {
    let path = dir.path().join("config.json");
    fs::write(&path, text).unwrap();
    path
}

fn summary(out: &Path) -> serde_json::Value {
    serde_json::from_slice(&fs::read(out.join("summary.json")).unwrap()).unwrap()
}

fn column(csv: &str, name: &str) -> Vec<String> {
    let mut lines = csv.lines();
    let idx = lines
        .next()
        .unwrap()
        .split(',')
        .position(|h| h == name)
        .unwrap();
    lines
        .map(|l| l.split(',').nth(idx).unwrap().to_owned())
        .collect()
}

#[test]
fn three_well_capacity_matches_hand_value() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let o = run_config(
        "capacity",
        &configs().join("capacity_three_well.json"),
        &out,
        &[],
    );
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let csv = fs::read_to_string(out.join("pairs.csv")).unwrap();
    let q = column(&csv, "q");
    let cap = column(&csv, "capacity");
    let hit = q
        .iter()
        .zip(&cap)
        .find(|(q, _)| q.parse::<f64>().unwrap() == 0.1)
        .map(|(_, c)| c.parse::<f64>().unwrap())
        .unwrap();
    assert!((hit - 0.1 / (2.0 * 2.1)).abs() <= 1e-10, "{hit}");
    assert!((hit - 0.0238095).abs() <= 1e-7);
    assert!(summary(&out)["pass"].as_bool().unwrap());
}

#[test]
fn reruns_are_byte_identical() {
    let dir = TempDir::new().unwrap();
    for (kind, file) in [
        ("capacity", "capacity_three_well.json"),
        ("trace", "trace_six_state.json"),
    ] {
        let (a, b) = (
            dir.path().join(format!("{kind}-a")),
            dir.path().join(format!("{kind}-b")),
        );
        let config = configs().join(file);
        assert_eq!(run_config(kind, &config, &a, &[]).status.code(), Some(0));
        assert_eq!(
            run_config(kind, &config, &b, &["--threads", "1"])
                .status
                .code(),
            Some(0)
        );
        let mut names: Vec<_> = fs::read_dir(&a)
            .unwrap()
            .map(|e| e.unwrap().file_name())
            .collect();
        names.sort();
        assert!(names.len() >= 4);
        for name in names {
            assert_eq!(
                fs::read(a.join(&name)).unwrap(),
                fs::read(b.join(&name)).unwrap(),
                "{name:?}"
            );
        }
    }
}

#[test]
fn csv_uses_lf_and_seventeen_digits() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    run_config(
        "capacity",
        &configs().join("capacity_two_state.json"),
        &out,
        &[],
    );
    let bytes = fs::read(out.join("measure.csv")).unwrap();
    assert!(!bytes.contains(&b'\r'));
    let text = String::from_utf8(bytes).unwrap();
    assert_eq!(
        column(&text, "mu"),
        ["5.0000000000000000e-1", "5.0000000000000000e-1"]
    );
}

#[test]
fn misscaled_theta_fails_the_limit_check() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let o = run_config(
        "reduce",
        &configs().join("reduce_misscaled.json"),
        &out,
        &[],
    );
    assert_eq!(
        o.status.code(),
        Some(1),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let s = summary(&out);
    assert!(!s["pass"].as_bool().unwrap());
    let failed: Vec<&str> = s["checks"]
        .as_array()
        .unwrap()
        .iter()
        .filter(|c| !c["pass"].as_bool().unwrap())
        .map(|c| c["name"].as_str().unwrap())
        .collect();
    assert!(
        failed.iter().any(|n| n.starts_with("limit_max_rel_error")),
        "{failed:?}"
    );
}

#[test]
fn correctly_scaled_reduce_passes() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        r#"{"model": {"chain": {"symmetric-3-well": {"q": 0.05}}}, "run": {"seed": 10}}"#,
    );
    let out = dir.path().join("out");
    let o = run_config("reduce", &cfg, &out, &[]);
    assert_eq!(
        o.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let resolved: serde_json::Value =
        serde_json::from_slice(&fs::read(out.join("config.resolved.json")).unwrap()).unwrap();
    assert_eq!(resolved["reduction"]["f"], serde_json::json!([0.0, 1.0]));
    assert_eq!(
        resolved["run"]["checkpoints"],
        serde_json::json!([0.5, 1.0, 2.0])
    );
}

#[test]
fn misspelled_key_is_a_schema_error_naming_it() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        r#"{"model": {"potential": {"family": "quartic-double-well-1d", "coefficients": [1, 1]}, "epsilonn": 0.1}}"#,
    );
    let o = run_config("ek", &cfg, &dir.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("epsilonn"));
    assert!(
        !dir.path().join("out").exists(),
        "nothing written before validation"
    );
}

#[test]
fn negative_dt_is_a_schema_error() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        r#"{"model": {"potential": {"family": "quartic-double-well-1d", "coefficients": [1, 1]}}, "run": {"dt": -0.001}}"#,
    );
    assert_eq!(
        run_config("ek", &cfg, &dir.path().join("out"), &[])
            .status
            .code(),
        Some(3)
    );
}

#[test]
fn malformed_json_is_a_parse_error() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, r#"{"model": {"chain": "#);
    assert_eq!(
        run_config("capacity", &cfg, &dir.path().join("out"), &[])
            .status
            .code(),
        Some(2)
    );
}

#[test]
fn unknown_flag_is_a_usage_error() {
    assert_eq!(run(&["capacity", "--bogus"]).status.code(), Some(2));
}

#[test]
fn missing_config_file_is_a_runtime_failure() {
    let dir = TempDir::new().unwrap();
    let o = run_config(
        "capacity",
        &dir.path().join("absent.json"),
        &dir.path().join("out"),
        &[],
    );
    assert_eq!(o.status.code(), Some(4));
}

#[test]
fn minimal_two_state_config_echoes_defaults_and_seed() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("out");
    let o = run_config(
        "capacity",
        &configs().join("capacity_two_state.json"),
        &out,
        &["--seed", "77"],
    );
    assert_eq!(o.status.code(), Some(0));
    let resolved: serde_json::Value =
        serde_json::from_slice(&fs::read(out.join("config.resolved.json")).unwrap()).unwrap();
    assert_eq!(resolved["experiment"], "capacity");
    assert_eq!(
        resolved["partition"]["states"],
        serde_json::json!([[0], [1]])
    );
    assert_eq!(resolved["run"]["seed"], 77);
    assert_eq!(resolved["run"]["tolerances"]["residual"], 1e-10);
    let s = summary(&out);
    assert_eq!(s["seed"], 77);
    assert!(s["pass"].as_bool().unwrap());
    let csv = fs::read_to_string(out.join("pairs.csv")).unwrap();
    let heuristic: f64 = column(&csv, "heuristic_time")[0].parse().unwrap();
    let exact: f64 = column(&csv, "mean_hitting_time")[0].parse().unwrap();
    assert!((heuristic - exact).abs() <= 1e-12);
}

#[test]
fn sde_excursion_small_run() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        &dir,
        r#"{"model": {"potential": {"family": "quartic-double-well-1d", "coefficients": [1, 1]}, "epsilon": [0.2, 0.1]},
            "run": {"seed": 3, "n": 50, "t": 0.5}}"#,
    );
    let out = dir.path().join("out");
    let o = run_config("sde-excursion", &cfg, &out, &[]);
    assert!(
        matches!(o.status.code(), Some(0 | 1)),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    let csv = fs::read_to_string(out.join("excursion.csv")).unwrap();
    for v in column(&csv, "mean") {
        let v: f64 = v.parse().unwrap();
        assert!((0.0..=0.5).contains(&v));
    }
}
