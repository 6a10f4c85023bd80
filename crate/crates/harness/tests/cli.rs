use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn nsac(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_nsac"))
        .args(args)
        .output()
        .expect("run nsac")
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("run.cfg");
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

fn text(out: &Output) -> String {
    format!(
        "{}{}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    )
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    for body in [
        "nn = 3\n",
        "snapshot_every = 0\n",
        "eps = -1\n",
        "t_end = 1.0\n",
    ] {
        let cfg = write_config(dir.path(), body);
        let out = nsac(&[
            "simulate",
            "--config",
            &cfg,
            "--out",
            dir.path().join("o").to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(2), "{body}: {}", text(&out));
    }
}

#[test]
fn missing_inputs_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    let out = nsac(&[
        "simulate",
        "--config",
        "/nonexistent/run.cfg",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));
    let out = nsac(&["report", "--in", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(text(&out).contains("diagnostics.csv"), "{}", text(&out));
}

#[test]
fn simulate_then_report() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "n = 48\neps = 0.08\nt_end = 0.002\nsnapshot_every = 10\n",
    );
    let run = dir.path().join("run");
    let out = nsac(&[
        "simulate",
        "--config",
        &cfg,
        "--out",
        run.to_str().unwrap(),
        "--assert",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out));
    let diag = fs::read_to_string(run.join("diagnostics.csv")).unwrap();
    let mut lines = diag.lines();
    assert!(lines
        .next()
        .unwrap()
        .starts_with("t,E,E_kin,E_equip,E_tilt,E_vol,E_total"));
    assert!(lines.count() >= 2);
    for f in ["terms.csv", "radius.csv", "run.txt"] {
        assert!(run.join(f).is_file(), "{f}");
    }

    let out = nsac(&["report", "--in", run.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out));
    for f in ["summary.csv", "energy.svg", "errors.svg"] {
        let body = fs::read_to_string(run.join(f)).unwrap();
        assert!(!body.is_empty(), "{f}");
    }
    assert!(fs::read_to_string(run.join("energy.svg"))
        .unwrap()
        .starts_with("<svg"));
}

#[test]
fn sweep_assert_matches_printed_checks_and_report_has_rate_plots() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "t_end = 0.002\nsnapshot_every = 20\n");
    let sweep = dir.path().join("sweep");
    let out = nsac(&[
        "sweep",
        "--config",
        &cfg,
        "--eps",
        "0.2,0.16,0.12",
        "--out",
        sweep.to_str().unwrap(),
        "--assert",
    ]);
    let stdout = String::from_utf8_lossy(&out.stdout).to_string();
    let expected = if stdout.contains("FAIL") { 4 } else { 0 };
    assert_eq!(out.status.code(), Some(expected), "{}", text(&out));
    assert_eq!(
        stdout.lines().filter(|l| l.contains("slope")).count(),
        3,
        "{stdout}"
    );
    let table = fs::read_to_string(sweep.join("sweep.csv")).unwrap();
    assert_eq!(table.lines().count(), 4);

    let out = nsac(&["report", "--in", sweep.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out));
    for f in [
        "rate_L1_err.svg",
        "rate_E0_plus_Evol0.svg",
        "rate_L2_vel.svg",
    ] {
        let svg = fs::read_to_string(sweep.join(f)).unwrap();
        assert_eq!(svg.matches("class=\"marker\"").count(), 3, "{f}");
        assert_eq!(svg.matches("class=\"fit\"").count(), 1, "{f}");
    }
    assert!(sweep.join("summary.csv").is_file());
}

#[test]
fn validate_calibration_writes_conditions() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "n = 128\n");
    let out_dir = dir.path().join("cal");
    let out = nsac(&[
        "validate-calibration",
        "--config",
        &cfg,
        "--out",
        out_dir.to_str().unwrap(),
        "--assert",
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out));
    let csv = fs::read_to_string(out_dir.join("conditions.csv")).unwrap();
    assert!(csv.starts_with("condition_id,measured_constant,max_residual,argmax_cell"));
    for id in [
        "unit_bound",
        "interface_normal",
        "interface_curvature",
        "weight_sign",
    ] {
        assert!(csv.contains(id), "{id}");
    }
}
