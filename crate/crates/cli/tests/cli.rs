use std::path::Path;
use std::process::{Command, Output};

fn liegen(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_liegen"))
        .args(args)
        .current_dir(dir)
        .output()
        .unwrap()
}

fn write_config(dir: &Path, json: &str) -> String {
    let p = dir.join("cfg.json");
    std::fs::write(&p, json).unwrap();
    p.to_str().unwrap().to_string()
}

#[test]
fn oracle_run_writes_all_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("o");
    let cfg = write_config(
        dir.path(),
        &format!(r#"{{"experiment":"oracle-crosscheck","seed":1,"order":3,"out_dir":{:?}}}"#, out),
    );
    let o = liegen(&["run", "--config", &cfg], dir.path());
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let traj = std::fs::read_to_string(out.join("trajectory.csv")).unwrap();
    assert!(traj.starts_with("t,x1,x2\n"));
    let errors = std::fs::read_to_string(out.join("errors.csv")).unwrap();
    assert!(errors.starts_with("eps,order,error\n"));
    assert_eq!(errors.lines().count(), 3);
    let plot = std::fs::read_to_string(out.join("plot.gp")).unwrap();
    assert!(plot.contains("'errors.csv'") && plot.contains("'trajectory.csv'"));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["pass"], true);
    assert!(summary["diagnostics"]["max_discrepancy"].as_f64().unwrap() <= 1e-9);
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), r#"{"experiment":"oracle-crosscheck","colour":"red"}"#);
    assert_eq!(liegen(&["run", "--config", &cfg], dir.path()).status.code(), Some(2));
    let cfg = write_config(dir.path(), r#"{"experiment":"vdp-averaging","order":9}"#);
    assert_eq!(liegen(&["run", "--config", &cfg], dir.path()).status.code(), Some(2));
    let missing = dir.path().join("nope.json");
    let o = liegen(&["run", "--config", missing.to_str().unwrap()], dir.path());
    assert_eq!(o.status.code(), Some(2));
    let o = Command::new(env!("CARGO_BIN_EXE_liegen"))
        .args(["oracle", "--out", "x"])
        .current_dir(dir.path())
        .env("LIEGEN_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn violated_tolerance_exits_with_one() {
    // at ε ~ 1e-4 the order-4 error sits at roundoff, so no slope survives
    let dir = tempfile::tempdir().unwrap();
    let o = liegen(
        &["magnus-linear", "--eps", "2e-4,1e-4", "--order", "4", "--out", "m"],
        dir.path(),
    );
    assert_eq!(o.status.code(), Some(1));
    let summary = std::fs::read_to_string(dir.path().join("m/summary.json")).unwrap();
    assert!(summary.contains("\"pass\": false"));
}

#[test]
fn shortcut_matches_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_liegen"))
        .args(["magnus-linear", "--eps", "0.1,0.05", "--order", "2", "--out", "a"])
        .current_dir(dir.path())
        .env("LIEGEN_THREADS", "1")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(0));
    let cfg = write_config(
        dir.path(),
        r#"{"experiment":"magnus-linear-order","eps":[0.1,0.05],"order":2,"out_dir":"b"}"#,
    );
    assert_eq!(liegen(&["run", "--config", &cfg], dir.path()).status.code(), Some(0));
    for f in ["summary.json", "errors.csv", "trajectory.csv", "plot.gp"] {
        let a = std::fs::read(dir.path().join("a").join(f)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(f)).unwrap();
        assert_eq!(a, b, "{f} differs");
    }
}
