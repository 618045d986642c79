//! End-to-end tests of the command-line interface: exit codes, artifact
//! layout, determinism of emitted files, and doc/flag parity of `--help`.

use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_statepred");

fn run(args: &[&str]) -> Output {
    Command::new(BIN)
        .args(args)
        .output()
        .expect("binary should run")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

/// Benchmark configuration with an explicit gain (no synthesis) and a short
/// run, for fast tests.
fn quick_config() -> String {
    let gain_rows = [
        "[10.28, 0.22]",
        "[4.32, 58.8]",
        "[512.0, 2960.0]",
        "[9680.0, 83900.0]",
        "[1.16e5, 1.5e6]",
        "[7.96e5, 1.38e7]",
    ]
    .join(", ");
    format!(
        r#"
version = 1

[model]
a = [[0.0, 1.0], [-9.0, 3.0]]
b_u = [[0.0], [1.0]]
b_omega = [[0.0], [1.0]]
c_x = [[1.0, 0.0], [0.0, 1.0]]
d_omega = [[0.0], [0.0]]
delay = 0.5

[disturbance]
kind = "sinusoid"
amplitude = 3.0
freq = 2.0

[observer]
r = 3
gain = [{gain_rows}]

[simulation]
horizon = 0.5
zoh_period = 0.05
dt = 0.001
t_end = 3.0
k_fb = [[45.0, 18.0]]
x0 = [0.0, 0.0]
"#
    )
}

fn write(dir: &Path, name: &str, contents: &str) -> std::path::PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, contents).unwrap();
    path
}

#[test]
fn simulate_writes_trace_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "exp.toml", &quick_config());
    let out_dir = dir.path().join("out");

    let out = run(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "stderr: {}", stderr(&out));

    let trace = std::fs::read_to_string(out_dir.join("trace.csv")).unwrap();
    assert!(trace.starts_with("t,x1,x2,u1,omega1,err_proposed,err_lechappe,err_sanz"));
    assert!(out_dir.join("plot_errors.py").exists());

    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["command"], "simulate");
    assert_eq!(manifest["config"]["version"], 1);
    for file in manifest["outputs"].as_array().unwrap() {
        assert!(out_dir.join(file.as_str().unwrap()).exists());
    }
    assert!(manifest["metrics"]["max_err_proposed"].as_f64().unwrap() > 0.0);
}

#[test]
fn simulate_reruns_are_bit_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "exp.toml", &quick_config());
    let mut traces = Vec::new();
    for name in ["a", "b"] {
        let out_dir = dir.path().join(name);
        let out = run(&[
            "simulate",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out_dir.to_str().unwrap(),
            "--seed",
            "7",
        ]);
        assert!(out.status.success(), "stderr: {}", stderr(&out));
        traces.push(std::fs::read(out_dir.join("trace.csv")).unwrap());
    }
    assert_eq!(traces[0], traces[1]);
}

#[test]
fn missing_section_exits_2_with_key_path() {
    let dir = tempfile::tempdir().unwrap();
    let broken = quick_config().replace("[model]", "[not_model]");
    let cfg = write(dir.path(), "exp.toml", &broken);
    let out = run(&["bounds", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("model"), "stderr: {}", stderr(&out));
}

#[test]
fn unknown_key_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let broken = quick_config().replace("delay = 0.5", "delay = 0.5\nmystery_knob = 1.0");
    let cfg = write(dir.path(), "exp.toml", &broken);
    let out = run(&["bounds", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("mystery_knob"));
}

#[test]
fn incommensurate_dt_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let broken = quick_config().replace("dt = 0.001", "dt = 0.0003");
    let cfg = write(dir.path(), "exp.toml", &broken);
    let out_dir = dir.path().join("out");
    let out = run(&[
        "simulate",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn unobservable_design_exits_3_naming_the_assumption() {
    let dir = tempfile::tempdir().unwrap();
    let config = r#"
version = 1

[model]
a = [[0.0, 1.0], [-9.0, 3.0]]
b_u = [[0.0], [1.0]]
b_omega = [[0.0], [1.0]]
c_x = [[0.0, 0.0], [0.0, 0.0]]
d_omega = [[0.0], [0.0]]
delay = 0.5

[disturbance]
kind = "sinusoid"
amplitude = 3.0
freq = 2.0

[observer]
r = 3

[design.region]
kind = "disk"
center = 0.0
radius = 40.0
"#;
    let cfg = write(dir.path(), "exp.toml", config);
    let out_dir = dir.path().join("out");
    let out = run(&[
        "design",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3), "stderr: {}", stderr(&out));
    assert!(stderr(&out).contains("observable"));
}

#[test]
fn design_writes_certificate() {
    let dir = tempfile::tempdir().unwrap();
    let config = r#"
version = 1

[model]
a = [[0.0, 1.0], [-9.0, 3.0]]
b_u = [[0.0], [1.0]]
b_omega = [[0.0], [1.0]]
c_x = [[1.0, 0.0], [0.0, 1.0]]
d_omega = [[0.0], [0.0]]
delay = 0.5

[disturbance]
kind = "sinusoid"
amplitude = 3.0
freq = 2.0

[observer]
r = 1

[design]
n_candidates = 32
seed = 1

[design.region]
kind = "disk"
center = 0.0
radius = 30.0
"#;
    let cfg = write(dir.path(), "exp.toml", config);
    let out_dir = dir.path().join("out");
    let out = run(&[
        "design",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    assert!(stdout(&out).contains("alpha*delta"));

    let cert: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("certificate.json")).unwrap())
            .unwrap();
    assert_eq!(cert["certified"], true);
    assert_eq!(cert["gain"].as_array().unwrap().len(), 4);
    // every eigenvalue inside the disk of radius 30
    for z in cert["eigenvalues"].as_array().unwrap() {
        let (re, im) = (z[0].as_f64().unwrap(), z[1].as_f64().unwrap());
        assert!((re * re + im * im).sqrt() < 30.0);
    }
}

#[test]
fn verify_gain_empty_matrix_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "exp.toml", &quick_config());
    let gain = write(dir.path(), "gain.toml", "l = []\n");
    let out = run(&[
        "verify-gain",
        "--config",
        cfg.to_str().unwrap(),
        "--gain",
        gain.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn verify_gain_dimension_mismatch_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "exp.toml", &quick_config());
    let gain = write(dir.path(), "gain.toml", "l = [[1.0, 2.0], [3.0, 4.0]]\n");
    let out = run(&[
        "verify-gain",
        "--config",
        cfg.to_str().unwrap(),
        "--gain",
        gain.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn verify_gain_zero_gain_reports_stability_failure() {
    // the open-loop plant is unstable, so L = 0 cannot pass the decay
    // condition for any positive definite P
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "exp.toml", &quick_config());
    let zeros = "l = [[0.0, 0.0], [0.0, 0.0], [0.0, 0.0], [0.0, 0.0], [0.0, 0.0], [0.0, 0.0]]\n";
    let gain = write(dir.path(), "gain.toml", zeros);
    let out = run(&[
        "verify-gain",
        "--config",
        cfg.to_str().unwrap(),
        "--gain",
        gain.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let text = stdout(&out);
    let decay_line = text
        .lines()
        .find(|l| l.contains("stability/decay"))
        .unwrap_or_else(|| panic!("no decay verdict line in: {text}"));
    assert!(decay_line.contains("FAIL"), "stdout: {text}");
    assert!(text.contains("NOT CERTIFIED"));
}

#[test]
fn bounds_prints_budget() {
    let dir = tempfile::tempdir().unwrap();
    let with_design = quick_config()
        + "\n[design]\nalpha = 3.0e4\ndelta = 5.0\n\n[design.region]\nkind = \"disk\"\ncenter = 0.0\nradius = 40.0\n";
    let cfg = write(dir.path(), "exp.toml", &with_design);
    let out = run(&["bounds", "--config", cfg.to_str().unwrap()]);
    assert!(out.status.success(), "stderr: {}", stderr(&out));
    let text = stdout(&out);
    assert!(text.contains("remainder bound"));
    assert!(text.contains("total budget"));
}

#[test]
fn reproduce_table2_emits_nine_rows() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("t2");
    let out = run(&["reproduce", "table2", "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "stderr: {}", stderr(&out));

    let csv = std::fs::read_to_string(out_dir.join("table2.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "omega_rad_s,method,max_err");
    assert_eq!(lines.count(), 9);
    assert!(stdout(&out).contains("ratio"));
    assert!(out_dir.join("manifest.json").exists());
}

#[test]
fn help_lists_every_documented_flag() {
    // doc/flag parity: every command and flag named in the README's
    // interface section must appear in --help
    let top = stdout(&run(&["--help"]));
    for command in ["simulate", "reproduce", "design", "verify-gain", "bounds"] {
        assert!(top.contains(command), "--help missing {command}");
    }
    assert!(top.contains("--log-level"));

    for (args, flags) in [
        (vec!["simulate", "--help"], vec!["--config", "--out", "--seed"]),
        (vec!["reproduce", "table2", "--help"], vec!["--out"]),
        (vec!["design", "--help"], vec!["--config", "--out"]),
        (vec!["verify-gain", "--help"], vec!["--config", "--gain"]),
        (vec!["bounds", "--help"], vec!["--config"]),
    ] {
        let text = stdout(&run(&args));
        for flag in flags {
            assert!(text.contains(flag), "{args:?} help missing {flag}");
        }
    }
}
