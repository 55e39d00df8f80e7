//! End-to-end runs of the `graflow` binary: exit codes, diagnostics and
//! artifacts.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use graflow::manifest::RunManifest;
use graflow::run::{read_convergence, CONVERGENCE_FILE, FLOW_FILE, MANIFEST_FILE};
use serde_json::{json, Value};
use tempfile::TempDir;

fn graflow(args: &[&str], threads: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_graflow"));
    cmd.args(args).env_remove("GRAFLOW_THREADS");
    if let Some(t) = threads {
        cmd.env("GRAFLOW_THREADS", t);
    }
    cmd.output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exited normally")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write_config(dir: &Path, name: &str, cfg: &Value) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, serde_json::to_string_pretty(cfg).unwrap()).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn flat() -> Value {
    json!({
        "scenario": "flat", "k": 2, "n": 4,
        "box": {"lo": [-1, -1], "hi": [1, 1]},
        "h": 0.125, "t_range": [0, 0.05]
    })
}

fn grim(h: f64) -> Value {
    json!({
        "scenario": "grim-reaper", "k": 1, "n": 2,
        "box": {"lo": [-1.2], "hi": [1.2]},
        "h": h, "cfl": 0.9, "t_range": [-0.25, 0.0]
    })
}

fn translation(h: f64) -> Value {
    json!({
        "scenario": "forced-translation", "k": 1, "n": 2,
        "box": {"lo": [-1], "hi": [1]},
        "h": h, "t_range": [0, 0.25],
        "params": {"velocity": [0.7]}
    })
}

fn simulate(dir: &TempDir, cfg: &Value, threads: Option<&str>) -> (Output, PathBuf) {
    let config = write_config(dir.path(), "config.json", cfg);
    let out = dir.path().join("out");
    (
        graflow(&["simulate", "--config", s(&config), "--out", s(&out)], threads),
        out,
    )
}

#[test]
fn flat_simulation_passes_with_roundoff_residuals() {
    let dir = TempDir::new().unwrap();
    let (out, art) = simulate(&dir, &flat(), None);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let m = RunManifest::read(&art.join(MANIFEST_FILE)).unwrap();
    assert!(m.passed);
    let names: Vec<_> = m.checks.iter().map(|c| c.name.as_str()).collect();
    assert_eq!(
        names,
        [
            "solution_error",
            "brakke",
            "brakke_one_sided",
            "identity",
            "motion_law",
            "duality"
        ]
    );
    let r = &m.residuals;
    for v in [r.error, r.brakke, r.identity, r.motion_law, r.duality] {
        assert!(v.unwrap() <= 1e-10, "{r:?}");
    }
    assert!(art.join(FLOW_FILE).is_file());
    assert_eq!(m.config_hash.len(), 64);
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(stdout.lines().filter(|l| l.contains(" PASS ")).count(), 6, "{stdout}");
}

#[test]
fn grim_reaper_meets_the_error_bound() {
    let dir = TempDir::new().unwrap();
    let (out, art) = simulate(&dir, &grim(1.0 / 64.0), None);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let m = RunManifest::read(&art.join(MANIFEST_FILE)).unwrap();
    assert!(m.residuals.error.unwrap() <= 5e-3);
}

#[test]
fn failed_check_exits_one() {
    let dir = TempDir::new().unwrap();
    let mut cfg = grim(1.0 / 16.0);
    cfg["verification"] = json!({"error_tol": 1e-9});
    let (out, art) = simulate(&dir, &cfg, None);
    assert_eq!(code(&out), 1, "{}", stderr(&out));
    let m = RunManifest::read(&art.join(MANIFEST_FILE)).unwrap();
    let err = m.checks.iter().find(|c| c.name == "solution_error").unwrap();
    assert!(!err.passed && err.tolerance == 1e-9);
    assert!(String::from_utf8_lossy(&out.stdout).contains("solution_error     FAIL"));
}

#[test]
fn malformed_config_reports_line_and_column() {
    let dir = TempDir::new().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, "{\n  \"scenario\": \"flat\",\n  \"k\": ,\n}\n").unwrap();
    let out = graflow(&["simulate", "--config", s(&path), "--out", s(dir.path())], None);
    assert_eq!(code(&out), 2);
    let msg = stderr(&out);
    assert!(msg.contains("line 3, column 8"), "{msg}");
}

#[test]
fn unknown_key_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let mut cfg = flat();
    cfg["colour"] = json!("blue");
    let (out, _) = simulate(&dir, &cfg, None);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("colour"));
}

#[test]
fn missing_output_directory_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let config = write_config(dir.path(), "c.json", &flat());
    let out = graflow(&["simulate", "--config", s(&config)], None);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("output directory"));
}

#[test]
fn solver_abort_exits_three() {
    let dir = TempDir::new().unwrap();
    let mut cfg = grim(1.0 / 16.0);
    cfg.as_object_mut().unwrap().remove("cfl");
    cfg["dt"] = json!(0.01);
    let (out, _) = simulate(&dir, &cfg, None);
    assert_eq!(code(&out), 3, "{}", stderr(&out));
    assert!(stderr(&out).contains("CFL"));
}

#[test]
fn verify_reproduces_the_simulation() {
    let dir = TempDir::new().unwrap();
    let (out, art) = simulate(&dir, &grim(1.0 / 32.0), None);
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let config = dir.path().join("config.json");
    let checked = dir.path().join("checked");
    let out = graflow(
        &[
            "verify",
            "--config",
            s(&config),
            "--flow",
            s(&art.join(FLOW_FILE)),
            "--out",
            s(&checked),
        ],
        None,
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let a = RunManifest::read(&art.join(MANIFEST_FILE)).unwrap();
    let b = RunManifest::read(&checked.join(MANIFEST_FILE)).unwrap();
    assert_eq!(b.command, "verify");
    assert_eq!(a.config_hash, b.config_hash);
    assert_eq!(a.residuals, b.residuals);
    assert_eq!(a.checks, b.checks);
}

#[test]
fn verify_rejects_a_dump_with_nan_and_names_the_node() {
    let dir = TempDir::new().unwrap();
    let (out, art) = simulate(&dir, &flat(), None);
    assert_eq!(code(&out), 0);
    let dump = std::fs::read_to_string(art.join(FLOW_FILE)).unwrap();
    let mut lines: Vec<String> = dump.lines().map(String::from).collect();
    // Node 20 of level 0, component 0 (two components per node).
    let row = 1 + 2 * 20;
    let mut cells: Vec<String> = lines[row].split(',').map(String::from).collect();
    let node: Vec<f64> = cells[..2].iter().map(|c| c.parse().unwrap()).collect();
    *cells.last_mut().unwrap() = "NaN".into();
    lines[row] = cells.join(",");
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, lines.join("\n") + "\n").unwrap();
    let config = dir.path().join("config.json");
    let out = graflow(
        &[
            "verify",
            "--config",
            s(&config),
            "--flow",
            s(&bad),
            "--out",
            s(&dir.path().join("v")),
        ],
        None,
    );
    assert_eq!(code(&out), 2);
    let msg = stderr(&out);
    assert!(
        msg.contains("non-finite") && msg.contains(&format!("{node:?}")),
        "{msg}"
    );
}

#[test]
fn verify_rejects_a_dump_of_another_grid() {
    let dir = TempDir::new().unwrap();
    let (out, art) = simulate(&dir, &flat(), None);
    assert_eq!(code(&out), 0);
    let mut other = flat();
    other["h"] = json!(0.25);
    let config = write_config(dir.path(), "other.json", &other);
    let out = graflow(
        &[
            "verify",
            "--config",
            s(&config),
            "--flow",
            s(&art.join(FLOW_FILE)),
            "--out",
            s(&dir.path().join("v")),
        ],
        None,
    );
    assert_eq!(code(&out), 2, "{}", stderr(&out));
}

#[test]
fn converge_on_flat_reports_roundoff_and_no_orders() {
    let dir = TempDir::new().unwrap();
    let config = write_config(dir.path(), "flat.json", &flat());
    let out_dir = dir.path().join("conv");
    let out = graflow(
        &[
            "converge",
            "--config",
            s(&config),
            "--levels",
            "2",
            "--out",
            s(&out_dir),
        ],
        None,
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let rows = read_convergence(&out_dir.join(CONVERGENCE_FILE)).unwrap();
    assert_eq!(rows.len(), 2);
    for r in &rows {
        for v in [
            r.error,
            r.brakke_residual,
            r.identity_residual,
            r.motion_law_residual,
            r.duality_residual,
        ] {
            assert!(v.unwrap() <= 1e-10, "{r:?}");
        }
        assert!(r.error_order.is_none() && r.brakke_order.is_none());
    }
    assert!(String::from_utf8_lossy(&out.stdout).contains("n/a"));
}

#[test]
fn converge_on_grim_reaper_is_second_order() {
    let dir = TempDir::new().unwrap();
    let config = write_config(dir.path(), "grim.json", &grim(1.0 / 16.0));
    let out_dir = dir.path().join("conv");
    let out = graflow(
        &[
            "converge",
            "--config",
            s(&config),
            "--levels",
            "3",
            "--out",
            s(&out_dir),
        ],
        None,
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let rows = read_convergence(&out_dir.join(CONVERGENCE_FILE)).unwrap();
    assert_eq!(rows.len(), 3);
    assert!(rows[0].error_order.is_none());
    for r in &rows[1..] {
        let p = r.error_order.unwrap();
        assert!((1.7..=2.2).contains(&p), "{r:?}");
    }
}

#[test]
fn converge_on_translation_has_first_order_brakke_residual() {
    let dir = TempDir::new().unwrap();
    let config = write_config(dir.path(), "ft.json", &translation(1.0 / 16.0));
    let out_dir = dir.path().join("conv");
    let out = graflow(
        &[
            "converge",
            "--config",
            s(&config),
            "--levels",
            "3",
            "--out",
            s(&out_dir),
        ],
        None,
    );
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    let rows = read_convergence(&out_dir.join(CONVERGENCE_FILE)).unwrap();
    for r in &rows[1..] {
        assert!(r.brakke_order.unwrap() >= 1.0, "{r:?}");
    }
}

#[test]
fn converge_needs_two_levels() {
    let dir = TempDir::new().unwrap();
    let config = write_config(dir.path(), "flat.json", &flat());
    let out = graflow(
        &[
            "converge",
            "--config",
            s(&config),
            "--levels",
            "1",
            "--out",
            s(dir.path()),
        ],
        None,
    );
    assert_eq!(code(&out), 2);
}

#[test]
fn thread_count_does_not_change_the_artifacts() {
    let one = TempDir::new().unwrap();
    let three = TempDir::new().unwrap();
    let (a, art_a) = simulate(&one, &grim(1.0 / 32.0), Some("1"));
    let (b, art_b) = simulate(&three, &grim(1.0 / 32.0), Some("3"));
    assert_eq!((code(&a), code(&b)), (0, 0));
    let read = |p: &Path| std::fs::read(p).unwrap();
    assert!(read(&art_a.join(FLOW_FILE)) == read(&art_b.join(FLOW_FILE)));
    let (mut ma, mut mb) = (
        RunManifest::read(&art_a.join(MANIFEST_FILE)).unwrap(),
        RunManifest::read(&art_b.join(MANIFEST_FILE)).unwrap(),
    );
    ma.wall_times = Default::default();
    mb.wall_times = Default::default();
    assert_eq!(ma, mb);
}

#[test]
fn bad_thread_count_is_a_config_error() {
    let dir = TempDir::new().unwrap();
    let (out, _) = simulate(&dir, &flat(), Some("zero"));
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("GRAFLOW_THREADS"));
}
