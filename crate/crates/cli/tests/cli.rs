use std::path::Path;
use std::process::{Command, Output};

fn crsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_crsim"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn simulate(dir: &Path) -> std::path::PathBuf {
    let data = dir.join("d.csv");
    let out = crsim(&[
        "simulate",
        "--scenario",
        "Alt3",
        "--n1",
        "120",
        "--n2",
        "150",
        "--seed",
        "5",
        "--out",
        path(&data),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    data
}

#[test]
fn simulate_is_reproducible() {
    let a = crsim(&[
        "simulate",
        "--rates1",
        "0.002,0.001",
        "--rates2",
        "0.001,0.002",
        "--n1",
        "40",
        "--n2",
        "50",
        "--seed",
        "3",
    ]);
    let b = crsim(&[
        "--threads",
        "3",
        "simulate",
        "--rates1",
        "0.002,0.001",
        "--rates2",
        "0.001,0.002",
        "--n1",
        "40",
        "--n2",
        "50",
        "--seed",
        "3",
    ]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let text = String::from_utf8(a.stdout).unwrap();
    assert!(text.starts_with("group,time,state\n"));
    assert_eq!(text.lines().count(), 91);
}

#[test]
fn test_report_is_versioned_and_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulate(dir.path());
    let run = |threads: &str| {
        let out = crsim(&[
            "--threads",
            threads,
            "test",
            "--data",
            path(&data),
            "--censoring",
            "adm:90",
            "--epsilon",
            "0.12",
            "--bootstrap",
            "200",
            "--seed",
            "8",
        ]);
        assert_eq!(
            out.status.code(),
            Some(0),
            "{}",
            String::from_utf8_lossy(&out.stderr)
        );
        out.stdout
    };
    let one = run("1");
    assert_eq!(one, run("4"));
    let json: serde_json::Value = serde_json::from_slice(&one).unwrap();
    assert_eq!(json["schema_version"], 1);
    assert_eq!(json["kind"], "test");
    assert_eq!(json["bootstrap_stats"].as_array().unwrap().len(), 200);
    assert_eq!(json["n1"], 120);
}

#[test]
fn config_file_and_flag_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let data = simulate(dir.path());
    let cfg = dir.path().join("run.toml");
    std::fs::write(
        &cfg,
        "measure = \"int\"\nepsilon = 0.0015\ncensoring = \"adm:90\"\nbootstrap = 150\nseed = 2\n",
    )
    .unwrap();
    let out_path = dir.path().join("r.json");
    let out = crsim(&[
        "test",
        "--data",
        path(&data),
        "--config",
        path(&cfg),
        "--bootstrap",
        "120",
        "--out",
        path(&out_path),
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(out.stdout.is_empty());
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out_path).unwrap()).unwrap();
    assert_eq!(json["config"]["measure"], "int");
    assert_eq!(json["config"]["bootstrap"], 120);

    // A grid on the command line replaces the configured epsilon.
    let out = crsim(&[
        "scan",
        "--data",
        path(&data),
        "--config",
        path(&cfg),
        "--measure",
        "prob",
        "--grid",
        "0.05:0.15:0.05",
    ]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let json: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(json["kind"], "scan");
    assert_eq!(json["grid"].as_array().unwrap().len(), 3);
}

#[test]
fn input_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "group,time,state\n1,10,1\n2,5,2\n1,0,1\n").unwrap();
    let out = crsim(&[
        "test",
        "--data",
        path(&bad),
        "--censoring",
        "adm:90",
        "--epsilon",
        "0.1",
    ]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 4"));

    let data = simulate(dir.path());
    for args in [
        vec![
            "test",
            "--data",
            path(&data),
            "--censoring",
            "weibull",
            "--epsilon",
            "0.1",
        ],
        vec!["test", "--data", path(&data), "--censoring", "adm:90"],
        vec![
            "test",
            "--data",
            path(&data),
            "--censoring",
            "adm:90",
            "--epsilon",
            "1.5",
        ],
        vec![
            "test",
            "--data",
            path(&data),
            "--censoring",
            "exp",
            "--epsilon",
            "0.1",
        ],
        vec![
            "scan",
            "--data",
            path(&data),
            "--censoring",
            "adm:90",
            "--grid",
            "0.3:0.1:0.01",
        ],
        vec![
            "test",
            "--data",
            path(&data),
            "--censoring",
            "adm:90",
            "--epsilon",
            "0.1",
            "--bootstrap",
            "10",
        ],
        vec!["frobnicate"],
    ] {
        let out = crsim(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn study_writes_results_csv() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("study.toml");
    std::fs::write(
        &cfg,
        "scenarios = [\"Alt5\", \"Null\"]\ncensorings = [\"adm\"]\nsizes = [[40, 40]]\nmeasures = [\"prob\", \"int\"]\nn_sim = 5\nbootstrap = 100\nseed = 3\n",
    )
    .unwrap();
    let out = crsim(&["study", "--config", path(&cfg)]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(
        lines[0],
        "scenario,censoring,n1,n2,measure,n_sim,B,alpha,rejections,rate,seed"
    );
    assert_eq!(lines.len(), 5);
    assert!(lines[1].starts_with("Alt5,adm,40,40,prob,5,100,0.05,"));
}

#[test]
fn thresholds_table() {
    let out = crsim(&["thresholds"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("0.11805"));
    assert_eq!(text.lines().count(), 5);
}
