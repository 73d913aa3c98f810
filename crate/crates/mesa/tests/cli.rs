use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use mesa::initial::BarrierRadii;
use mesa::scenario::{preset, InitialSpec};

fn mesa(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mesa")).args(args).output().expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn run_then_verify_is_idempotent() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("hs");
    let run = mesa(&["run", "--preset", "radial-hs", "--out", path(&out), "--gnuplot", "--strict"]);
    assert_eq!(code(&run), 0, "{}", String::from_utf8_lossy(&run.stderr));
    for f in ["grid.json", "frames/index.csv", "frames/frame_00000.csv", "ledger.csv", "traces.csv", "trajectory.csv", "manifest.json", "report.json", "report.txt", "plot.gnuplot"] {
        assert!(out.join(f).exists(), "{f} missing");
    }
    let report = fs::read(out.join("report.json")).unwrap();
    let first = mesa(&["verify", "--out", path(&out)]);
    let second = mesa(&["verify", "--out", path(&out)]);
    assert_eq!(code(&first), 0, "{}", String::from_utf8_lossy(&first.stdout));
    assert_eq!(first.stdout, second.stdout);
    assert_eq!(fs::read(out.join("report.json")).unwrap(), report);
}

#[test]
fn missing_config_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = mesa(&["run", "--config", path(&dir.path().join("nope.json")), "--out", path(dir.path())]);
    assert_eq!(code(&out), 2);
}

#[test]
fn bad_m_list_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = mesa(&["sweep-m", "--preset", "figure1", "--m", "10,abc", "--out", path(dir.path())]);
    assert_eq!(code(&out), 2);
}

#[test]
fn corrupt_frame_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("run");
    assert_eq!(code(&mesa(&["run", "--preset", "shrink", "--out", path(&out)])), 0);
    let frame = out.join("frames/frame_00003.csv");
    let text = fs::read_to_string(&frame).unwrap();
    fs::write(&frame, text + "1.0,not-a-number\n").unwrap();
    assert_eq!(code(&mesa(&["verify", "--out", path(&out)])), 3);
}

#[test]
fn csv_initial_data_relative_to_config() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = preset("radial-hs").unwrap();
    cfg.t_end = 0.1;
    let setup = cfg.setup().unwrap();
    let rho = cfg.initial_density(&setup.grid, &setup.f).unwrap();
    let mut w = csv::Writer::from_path(dir.path().join("rho0.csv")).unwrap();
    w.write_record(["x", "rho"]).unwrap();
    for (x, r) in setup.grid.nodes.iter().zip(&rho) {
        w.write_record([x.to_string(), r.to_string()]).unwrap();
    }
    w.flush().unwrap();
    cfg.solver = mesa::scenario::SolverKind::Limit;
    cfg.initial = InitialSpec::Csv { path: "rho0.csv".into() };
    let config = dir.path().join("scenario.json");
    fs::write(&config, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    let out = mesa(&["run", "--config", path(&config), "--out", path(&dir.path().join("run"))]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn strict_run_with_failing_check_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = preset("figure1").unwrap();
    cfg.t_end = 0.02;
    cfg.n_cells = 200;
    cfg.barriers = Some(BarrierRadii { upper: 0.3, lower: 0.2 });
    cfg.name = "tight-barrier".into();
    let config = dir.path().join("scenario.json");
    fs::write(&config, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
    let out = dir.path().join("run");
    let lax = mesa(&["run", "--config", path(&config), "--out", path(&out)]);
    assert_eq!(code(&lax), 0);
    let strict = mesa(&["run", "--config", path(&config), "--out", path(&out), "--strict"]);
    assert_eq!(code(&strict), 4, "{}", String::from_utf8_lossy(&strict.stdout));
}

#[test]
fn oracle_compare_passes_on_classical_front() {
    let dir = tempfile::tempdir().unwrap();
    let out = mesa(&["oracle-compare", "--preset", "radial-hs", "--out", path(dir.path())]);
    assert_eq!(code(&out), 0);
    let cmp: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("oracle.json")).unwrap()).unwrap();
    assert_eq!(cmp["passed"], serde_json::Value::Bool(true));
}
