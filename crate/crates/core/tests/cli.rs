//! End-to-end checks of the command-line interface: subcommands, file
//! outputs and exit codes (0 success, 2 validation, 3 numerical, 4 i/o).

use std::path::{Path, PathBuf};
use std::process::Command;

fn qomor() -> Command {
    Command::new(env!("CARGO_BIN_EXE_qomor"))
}

fn temp_dir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("qomor_cli_{tag}"));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn write_prebalanced(dir: &Path) -> PathBuf {
    let sys = qomor::systems::LdqoSystem::new(
        qomor::DenseMatrix::from_nested(&[&[-0.25, -1.0 / 3.0], &[-1.0 / 3.0, -1.5]]).unwrap(),
        qomor::DenseMatrix::from_nested(&[&[1.0, 0.0], &[1.0, 2.0f64.sqrt()]]).unwrap(),
        qomor::DenseMatrix::from_nested(&[&[0.0, 1.0], &[1.0, 1.0]]).unwrap(),
    )
    .unwrap();
    let path = dir.join("prebalanced.json");
    qomor::systems::write_system(&sys, &path).unwrap();
    path
}

#[test]
fn generate_reduce_hsv_simulate_pipeline() {
    let dir = temp_dir("pipeline");
    let sys = dir.join("sys.json");
    let status = qomor()
        .args(["generate", "--model", "random", "--n", "8", "--m", "1", "--seed", "5"])
        .arg("--out")
        .arg(&sys)
        .status()
        .unwrap();
    assert!(status.success());

    let hsv = dir.join("hsv.csv");
    let status = qomor()
        .args(["hsv", "--method", "spbt"])
        .arg("--input")
        .arg(&sys)
        .arg("--out")
        .arg(&hsv)
        .status()
        .unwrap();
    assert!(status.success());
    let text = std::fs::read_to_string(&hsv).unwrap();
    assert!(text.starts_with("index,sigma,normalized"));
    assert_eq!(text.lines().count(), 9);

    let red = dir.join("red.json");
    let out = qomor()
        .args(["reduce", "--method", "spbt", "--order", "3"])
        .arg("--input")
        .arg(&sys)
        .arg("--out")
        .arg(&red)
        .output()
        .unwrap();
    assert!(out.status.success());
    let diag: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(diag["order"], 3);
    assert_eq!(diag["stability_ok"], true);
    let reduced = qomor::systems::read_system(&red).unwrap();
    assert_eq!(reduced.order(), 3);

    let traj = dir.join("traj.csv");
    let status = qomor()
        .args([
            "simulate",
            "--signal",
            "exp_decay:rate=0.25",
            "--t-final",
            "5",
            "--dt",
            "0.001",
        ])
        .arg("--input")
        .arg(&red)
        .arg("--out")
        .arg(&traj)
        .status()
        .unwrap();
    assert!(status.success());
    assert_eq!(std::fs::read_to_string(&traj).unwrap().lines().count(), 5002);
}

#[test]
fn reduce_supports_a_threshold_policy() {
    let dir = temp_dir("threshold");
    let sys = write_prebalanced(&dir);
    // sigma = (2, 1): threshold 0.9 keeps only the first direction
    let red = dir.join("red.json");
    let out = qomor()
        .args(["reduce", "--method", "spbt", "--threshold", "0.9"])
        .arg("--input")
        .arg(&sys)
        .arg("--out")
        .arg(&red)
        .output()
        .unwrap();
    assert!(out.status.success());
    let diag: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(diag["order"], 1);
    // exactly one of --order / --threshold must be given
    let status = qomor()
        .args(["reduce", "--method", "spbt"])
        .arg("--input")
        .arg(&sys)
        .arg("--out")
        .arg(&red)
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn bounds_reports_consistent_values() {
    let dir = temp_dir("bounds");
    let sys = write_prebalanced(&dir);
    let out = qomor()
        .args(["bounds", "--order", "1", "--signal", "exp_decay", "--t-final", "20"])
        .arg("--input")
        .arg(&sys)
        .output()
        .unwrap();
    assert!(out.status.success());
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let h2e = doc["h2_error"].as_f64().unwrap();
    assert!((h2e * h2e - 5.0).abs() < 1e-8);
    // two input channels driven by the same scalar
    assert_eq!(doc["u_tensor_l2"].as_f64().unwrap(), 2.0);
    assert!((doc["hsv_identity"].as_f64().unwrap() - 5.0).abs() < 1e-8);
    assert!(doc["corollary_bound"].as_f64().unwrap() >= 5.0 - 1e-8);
    let observed = doc["observed_linf"].as_f64().unwrap();
    let bound = doc["linf_bound"].as_f64().unwrap();
    assert!(observed <= bound * (1.0 + 1e-6) + 1e-8);
}

#[test]
fn compare_runs_a_config_sweep() {
    let dir = temp_dir("compare");
    let sys = write_prebalanced(&dir);
    let config = dir.join("experiment.json");
    std::fs::write(
        &config,
        format!(
            r#"{{
  "system": {{"file": "{}"}},
  "methods": ["spbt", "ltbt"],
  "orders": [1, 2],
  "signals": [{{"kind": "exp_decay", "amplitude": 1.0, "rate": 0.25}}],
  "integrator": {{"dt": 0.001, "t_final": 10.0}}
}}"#,
            sys.display()
        ),
    )
    .unwrap();
    let results = dir.join("results");
    let status = qomor()
        .arg("compare")
        .arg("--config")
        .arg(&config)
        .arg("--out-dir")
        .arg(&results)
        .env("QOMOR_THREADS", "2")
        .status()
        .unwrap();
    assert!(status.success());
    assert!(results.join("summary.json").exists());
    assert!(results.join("hsv_spbt.csv").exists());
    assert!(results.join("hsv_ltbt.csv").exists());
    assert!(results.join("traj_spbt_r1_exp_decay.csv").exists());
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(results.join("summary.json")).unwrap())
            .unwrap();
    assert_eq!(summary["schema"], 1);
    // this weight is indefinite, so the linear-rewrite method fails
    // as a single recorded cell while the SPBT cells proceed
    let cells = summary["cells"].as_array().unwrap();
    assert_eq!(cells.len(), 3);
    for cell in cells {
        match cell["method"].as_str().unwrap() {
            "spbt" => assert!(cell.get("error").is_none(), "{cell}"),
            "ltbt" => assert!(cell["error"].as_str().unwrap().contains("indefinite")),
            other => panic!("unexpected method {other}"),
        }
    }
}

#[test]
fn exit_code_2_on_validation_errors() {
    let dir = temp_dir("exit2");
    let sys = write_prebalanced(&dir);
    // unknown signal name
    let status = qomor()
        .args(["simulate", "--signal", "sawtooth", "--t-final", "1", "--dt", "0.01"])
        .arg("--input")
        .arg(&sys)
        .arg("--out")
        .arg(dir.join("t.csv"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
    // msd generator needs an even state dimension
    let status = qomor()
        .args(["generate", "--model", "msd", "--n", "7"])
        .arg("--out")
        .arg(dir.join("bad.json"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(2));
}

#[test]
fn exit_code_3_on_numerical_failures() {
    let dir = temp_dir("exit3");
    // unstable system: Gramian solve must fail with the numerical code
    let sys = qomor::systems::LdqoSystem::new(
        qomor::DenseMatrix::from_diagonal(&[0.5, -1.0]),
        qomor::DenseMatrix::column(&[1.0, 1.0]),
        qomor::DenseMatrix::identity(2),
    )
    .unwrap();
    let path = dir.join("unstable.json");
    qomor::systems::write_system(&sys, &path).unwrap();
    let status = qomor()
        .args(["hsv", "--method", "spbt"])
        .arg("--input")
        .arg(&path)
        .arg("--out")
        .arg(dir.join("h.csv"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(3));
    // order beyond the numerical rank
    let prebalanced = write_prebalanced(&dir);
    let status = qomor()
        .args(["reduce", "--method", "spbt", "--order", "5"])
        .arg("--input")
        .arg(&prebalanced)
        .arg("--out")
        .arg(dir.join("r.json"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(3));
}

#[test]
fn exit_code_4_on_io_failures() {
    let dir = temp_dir("exit4");
    let status = qomor()
        .args(["hsv", "--method", "spbt"])
        .arg("--input")
        .arg(dir.join("does_not_exist.json"))
        .arg("--out")
        .arg(dir.join("h.csv"))
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(4));
}

#[test]
fn qbtbt_reduce_writes_a_qb_model() {
    let dir = temp_dir("qbtbt");
    let sys_path = dir.join("sys.json");
    let status = qomor()
        .args(["generate", "--model", "random", "--n", "4", "--m", "1", "--seed", "9"])
        .arg("--out")
        .arg(&sys_path)
        .status()
        .unwrap();
    assert!(status.success());
    let red = dir.join("red_qb.json");
    let status = qomor()
        .args(["reduce", "--method", "qbtbt", "--order", "3", "--qb-iters", "1"])
        .arg("--input")
        .arg(&sys_path)
        .arg("--out")
        .arg(&red)
        .status()
        .unwrap();
    assert!(status.success());
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&red).unwrap()).unwrap();
    assert_eq!(doc["type"], "qb");
    assert_eq!(doc["order"], 3);
    assert!(doc["matrices"]["h_qb"].is_array());
}
