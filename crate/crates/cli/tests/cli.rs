//! End-to-end tests of the binary: exit codes, artifact emission, seed
//! plumbing and byte-level determinism of reports.

use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pantolab"))
}

fn write(path: &Path, text: &str) {
    std::fs::write(path, text).unwrap();
}

const DET_CONFIG: &str = r#"{
  "equation": {
    "kind": "det_pantograph",
    "a": 0.5, "b": -1.0, "q": 0.5, "x0": 1.0,
    "forcing": { "kind": "zero" }
  },
  "grid": { "mode": "uniform_time", "h": 0.001, "t_end": 1.0 },
  "diagnostics": [ { "diag": "kappa" } ]
}"#;

#[test]
fn simulate_writes_trajectory_and_report() {
    let dir = tempdir();
    let cfg = dir.join("det.json");
    write(&cfg, DET_CONFIG);
    let out = dir.join("run");
    let status = bin()
        .args(["simulate", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(
        status.status.success(),
        "{}",
        String::from_utf8_lossy(&status.stderr)
    );
    assert!(out.join("trajectory.csv").exists());
    assert!(out.join("report.json").exists());
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["diagnostics"]["kappa"], -1.0);
    // x(1) should match the trajectory terminal value to solver accuracy.
    let terminal = report["terminal"][0].as_f64().unwrap();
    assert!((terminal - 0.6435026592814430).abs() < 1e-7);
}

#[test]
fn invalid_config_exits_two() {
    let dir = tempdir();
    let cfg = dir.join("bad.json");
    write(&cfg, &DET_CONFIG.replace("\"q\": 0.5", "\"q\": 1.5"));
    let out = bin()
        .args(["simulate", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("params.q"), "stderr: {err}");
}

#[test]
fn unknown_suite_exits_two() {
    let out = bin().args(["verify", "does_not_exist"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn ensemble_reports_are_byte_identical_across_runs() {
    let dir = tempdir();
    let cfg = dir.join("ens.json");
    write(
        &cfg,
        r#"{
  "equation": {
    "kind": "stoch_pantograph",
    "a": 0.5, "b": -1.0, "q": 0.5, "x0": 1.0,
    "forcing": { "kind": "zero" },
    "noise": { "kind": "constant", "c": 0.3 },
    "method": "euler_maruyama"
  },
  "grid": { "mode": "uniform_time", "h": 0.01, "t_end": 5.0 },
  "seed": 42,
  "ensemble": { "paths": 8 }
}"#,
    );
    let run = |out: &Path, threads: &str| {
        let st = bin()
            .args(["ensemble", "--config"])
            .arg(&cfg)
            .arg("--out")
            .arg(out)
            .args(["--threads", threads])
            .output()
            .unwrap();
        assert!(
            st.status.success(),
            "{}",
            String::from_utf8_lossy(&st.stderr)
        );
        std::fs::read(out.join("ensemble.json")).unwrap()
    };
    let a = run(&dir.join("a"), "1");
    let b = run(&dir.join("b"), "4");
    assert_eq!(a, b, "ensemble reports differ across thread counts");
}

#[test]
fn env_seed_is_lowest_priority() {
    let dir = tempdir();
    let cfg = dir.join("ens.json");
    // No seed in the config: only PANTOLAB_SEED makes it valid.
    write(
        &cfg,
        r#"{
  "equation": {
    "kind": "stoch_pantograph",
    "a": 0.5, "b": -1.0, "q": 0.5, "x0": 1.0,
    "forcing": { "kind": "zero" },
    "noise": { "kind": "constant", "c": 0.3 },
    "method": "euler_maruyama"
  },
  "grid": { "mode": "uniform_time", "h": 0.01, "t_end": 2.0 },
  "ensemble": { "paths": 2 }
}"#,
    );
    let no_seed = bin()
        .args(["ensemble", "--config"])
        .arg(&cfg)
        .env_remove("PANTOLAB_SEED")
        .output()
        .unwrap();
    assert_eq!(no_seed.status.code(), Some(2));
    let with_env = bin()
        .args(["ensemble", "--config"])
        .arg(&cfg)
        .env("PANTOLAB_SEED", "123")
        .output()
        .unwrap();
    assert!(with_env.status.success());
    // The --seed flag overrides the environment.
    let with_flag = bin()
        .args(["ensemble", "--config"])
        .arg(&cfg)
        .args(["--seed", "9"])
        .env("PANTOLAB_SEED", "123")
        .output()
        .unwrap();
    assert!(with_flag.status.success());
    let env_json = String::from_utf8_lossy(&with_env.stdout);
    let flag_json = String::from_utf8_lossy(&with_flag.stdout);
    assert!(env_json.contains("\"seed\": 123"));
    assert!(flag_json.contains("\"seed\": 9"));
}

#[test]
fn numeric_failure_exits_three() {
    // Multiplicative growth at rate lambda = 4.875 overflows f64 well
    // before t = 400: the solver reports a non-finite state and the CLI
    // maps it to exit code 3.
    let dir = tempdir();
    let cfg = dir.join("blow.json");
    write(
        &cfg,
        r#"{
  "equation": { "kind": "multiplicative", "a": 0.5, "b": 5.0, "q": 0.5, "sigma": 0.5, "x0": 1.0 },
  "grid": { "mode": "geometric", "t0": 0.01, "steps_per_qfold": 16, "t_end": 400.0 },
  "seed": 1
}"#,
    );
    let out = bin()
        .args(["simulate", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(
        out.status.code(),
        Some(3),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn construct_emits_manufactured_table() {
    let dir = tempdir();
    let cfg = dir.join("cons.json");
    write(
        &cfg,
        r#"{ "z": { "form": "pure_power", "d": 1.0, "kappa": -1.0 },
             "a": 0.5, "b": -1.0, "q": 0.5,
             "t_start": 1.0, "t_end": 4.0, "points": 3 }"#,
    );
    let out = bin()
        .args(["construct", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("t,phi,z"));
    // At t = 1: phi = -1/t² = -1, z = 1.
    let row: Vec<f64> = lines
        .next()
        .unwrap()
        .split(',')
        .map(|v| v.parse().unwrap())
        .collect();
    assert_eq!(row, vec![1.0, -1.0, 1.0]);
}

#[test]
fn diagnose_reads_back_emitted_csv() {
    let dir = tempdir();
    let cfg = dir.join("det.json");
    write(&cfg, DET_CONFIG);
    let out = dir.join("run");
    assert!(bin()
        .args(["simulate", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .status()
        .unwrap()
        .success());
    let diag = bin()
        .args(["diagnose", "--csv"])
        .arg(out.join("trajectory.csv"))
        .arg("--config")
        .arg(&cfg)
        .output()
        .unwrap();
    assert!(diag.status.success());
    let parsed: serde_json::Value = serde_json::from_slice(&diag.stdout).unwrap();
    assert_eq!(parsed["kappa"], -1.0);
}

#[test]
fn shipped_configs_are_valid() {
    let root = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    for name in [
        "det_longrun.json",
        "stochastic_decay.json",
        "multidim_stable.json",
        "multiplicative_growth.json",
    ] {
        let text = std::fs::read_to_string(root.join(name)).unwrap();
        pantolab::scenario::ScenarioConfig::from_json(&text)
            .unwrap_or_else(|e| panic!("{name}: {e}"));
    }
    // The deterministic one runs end to end through the binary.
    let out = bin()
        .args(["simulate", "--config"])
        .arg(root.join("det_longrun.json"))
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    // And the construct config emits its table.
    let out = bin()
        .args(["construct", "--config"])
        .arg(root.join("manufactured_table.json"))
        .output()
        .unwrap();
    assert!(out.status.success());
}

#[test]
fn verify_writes_report_json() {
    let dir = tempdir();
    let st = bin()
        .args(["verify", "solver_core", "--seed", "42", "--out"])
        .arg(&dir)
        .output()
        .unwrap();
    assert!(
        st.status.success(),
        "{}",
        String::from_utf8_lossy(&st.stderr)
    );
    let text = std::fs::read_to_string(dir.join("verify_solver_core.json")).unwrap();
    let report: serde_json::Value = serde_json::from_str(&text).unwrap();
    assert_eq!(report["suite"], "solver_core");
    assert_eq!(report["pass"], true);
    let out = String::from_utf8_lossy(&st.stdout);
    assert!(out.contains("PASS C1"), "table missing: {out}");
}

fn tempdir() -> std::path::PathBuf {
    let base = std::env::temp_dir().join(format!(
        "pantolab-cli-test-{}-{:?}",
        std::process::id(),
        std::thread::current().id()
    ));
    std::fs::create_dir_all(&base).unwrap();
    base
}
