//! End-to-end checks of the `raman-nli` binary: subcommands, outputs,
//! exit codes and overrides.

use std::path::Path;
use std::process::{Command, Output};

const DESK: &str = include_str!("../fixtures/desk.toml");
const DESK3: &str = include_str!("../fixtures/desk3.toml");
const CASE_STUDY: &str = include_str!("../fixtures/case_study.toml");

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_raman-nli")
}

fn run(args: &[&str]) -> Output {
    Command::new(bin()).args(args).output().unwrap()
}

fn write_config(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn solve_emits_case_study_profiles() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), "cs.toml", CASE_STUDY);
    let out = tmp.path().join("out");
    let res = run(&["solve", "--config", &config, "--out-dir", out.to_str().unwrap()]);
    assert!(res.status.success());
    let body = std::fs::read_to_string(out.join("profiles_span1.csv")).unwrap();
    let mut lines = body.lines();
    let header = lines.next().unwrap();
    // z column + 76 channels + 5 pumps
    assert_eq!(header.split(',').count(), 82);
    assert_eq!(header.split(',').filter(|c| c.starts_with("pump_")).count(), 5);
    // 95 km at 50 m steps: 1901 grid rows
    assert_eq!(lines.count(), 1901);
    assert!(out.join("manifest.json").exists());
}

#[test]
fn nli_on_zero_power_config_reports_zeros() {
    let tmp = tempfile::tempdir().unwrap();
    let zero = DESK3.replace("power_dbm = 3.0", "power_dbm = -inf");
    let config = write_config(tmp.path(), "zero.toml", &zero);
    let out = tmp.path().join("out");
    let res = run(&["nli", "--config", &config, "--out-dir", out.to_str().unwrap()]);
    assert!(res.status.success(), "stderr: {}", String::from_utf8_lossy(&res.stderr));
    let body = std::fs::read_to_string(out.join("nli.csv")).unwrap();
    for line in body.lines().skip(1) {
        let total: f64 = line.split(',').nth(1).unwrap().parse().unwrap();
        assert_eq!(total, 0.0);
    }
}

#[test]
fn compare_stays_below_gate_on_desk_scenario() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), "desk.toml", DESK);
    let out = tmp.path().join("out");
    let res = run(&["compare", "--config", &config, "--out-dir", out.to_str().unwrap()]);
    assert!(res.status.success());
    let body = std::fs::read_to_string(out.join("compare.csv")).unwrap();
    for line in body.lines().skip(1) {
        let delta: f64 = line.split(',').nth(3).unwrap().parse().unwrap();
        assert!(delta.abs() <= 0.5, "delta {delta} dB");
        assert!(line.ends_with("split"));
    }
}

#[test]
fn malformed_config_exits_2_with_machine_readable_error() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), "bad.toml", "channels = 5\n");
    let res = run(&["nli", "--config", &config]);
    assert_eq!(res.status.code(), Some(2));
    let err: serde_json::Value =
        serde_json::from_str(String::from_utf8_lossy(&res.stderr).trim()).unwrap();
    assert_eq!(err["error"]["kind"], "config");
}

#[test]
fn overlapping_channels_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = DESK3.replace("spacing_ghz = 150.0", "spacing_ghz = 50.0");
    let config = write_config(tmp.path(), "overlap.toml", &bad);
    let res = run(&["solve", "--config", &config]);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn solver_non_convergence_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let strict = format!(
        "{DESK}\n[solver]\nbvp_tolerance = 1e-15\nmax_iterations = 1\n"
    );
    let config = write_config(tmp.path(), "strict.toml", &strict);
    let res = run(&["solve", "--config", &config, "--out-dir", tmp.path().join("o").to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(3));
    let err: serde_json::Value =
        serde_json::from_str(String::from_utf8_lossy(&res.stderr).trim()).unwrap();
    assert_eq!(err["error"]["kind"], "solver");
}

#[test]
fn quadrature_non_convergence_exits_4() {
    let tmp = tempfile::tempdir().unwrap();
    let strict = format!(
        "{DESK}\n[oracle]\nrefine_tol_db = 1e-12\nmax_refinements = 0\n"
    );
    let config = write_config(tmp.path(), "strict.toml", &strict);
    let res = run(&["oracle", "--config", &config, "--out-dir", tmp.path().join("o").to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(4));
    let err: serde_json::Value =
        serde_json::from_str(String::from_utf8_lossy(&res.stderr).trim()).unwrap();
    assert_eq!(err["error"]["kind"], "quadrature");
}

#[test]
fn out_dir_env_var_is_honored() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), "d3.toml", DESK3);
    let out = tmp.path().join("from_env");
    let res = Command::new(bin())
        .args(["fit", "--config", &config])
        .env("RAMAN_NLI_OUT_DIR", out.to_str().unwrap())
        .current_dir(tmp.path())
        .output()
        .unwrap();
    assert!(res.status.success());
    assert!(out.join("fits.csv").exists());
    assert!(out.join("overlay_span1.csv").exists());
}

#[test]
fn rho_file_scales_the_report() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), "d3.toml", DESK3);
    let rho = write_config(
        tmp.path(),
        "rho.csv",
        "span,channel_thz,rho\n1,192.85,2.0\n1,193.0,2.0\n1,193.15,2.0\n",
    );
    let out_a = tmp.path().join("a");
    let out_b = tmp.path().join("b");
    assert!(run(&["nli", "--config", &config, "--out-dir", out_a.to_str().unwrap()])
        .status
        .success());
    assert!(run(&[
        "nli",
        "--config",
        &config,
        "--rho-file",
        &rho,
        "--out-dir",
        out_b.to_str().unwrap()
    ])
    .status
    .success());
    let parse = |p: &Path| -> Vec<f64> {
        std::fs::read_to_string(p.join("nli.csv"))
            .unwrap()
            .lines()
            .skip(1)
            .map(|l| l.split(',').nth(1).unwrap().parse().unwrap())
            .collect()
    };
    for (a, b) in parse(&out_a).iter().zip(parse(&out_b).iter()) {
        assert!((b / a - 2.0).abs() < 1e-12, "rho scaling {} -> {}", a, b);
    }
}

#[test]
fn bad_rho_file_exits_2() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), "d3.toml", DESK3);
    let rho = write_config(tmp.path(), "rho.csv", "span,channel_thz,rho\n7,192.85,2.0\n");
    let res = run(&["nli", "--config", &config, "--rho-file", &rho]);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn json_format_mirrors_everything() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), "d3.toml", DESK3);
    let out = tmp.path().join("out");
    let res = run(&[
        "all",
        "--config",
        &config,
        "--format",
        "json",
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert!(res.status.success());
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("run.json")).unwrap()).unwrap();
    for key in ["link", "solution", "fits", "nli", "oracle", "compare"] {
        assert!(doc.get(key).is_some(), "run.json missing {key}");
    }
    // The manifest lists every artifact with its digest.
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["subcommand"], "all");
    assert!(manifest["outputs"]
        .as_array()
        .unwrap()
        .iter()
        .any(|o| o["name"] == "run.json"));
}

#[test]
fn step_override_changes_grid_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), "d3.toml", DESK3);
    let out = tmp.path().join("out");
    let res = run(&[
        "solve",
        "--config",
        &config,
        "--step-m",
        "100",
        "--out-dir",
        out.to_str().unwrap(),
    ]);
    assert!(res.status.success());
    let body = std::fs::read_to_string(out.join("profiles_span1.csv")).unwrap();
    // 120 km at 100 m: 1201 rows
    assert_eq!(body.lines().count() - 1, 1201);
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["overrides"]["step_m"], "100");
}
