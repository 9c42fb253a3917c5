//! End-to-end tests that drive the `boussinesq` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn binary() -> Command {
    Command::new(env!("CARGO_BIN_EXE_boussinesq"))
}

fn write_config(dir: &Path, text: &str) -> PathBuf {
    let path = dir.join("case.cfg");
    fs::write(&path, text).unwrap();
    path
}

fn invoke(cmd: &str, config: &Path, out: &Path, extra: &[&str]) -> Output {
    binary()
        .arg(cmd)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(extra)
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn coarse(data: &str, physics: &str, extra: &str) -> String {
    format!(
        "[domain]\npreset = unit_square\n\n[mesh]\ntarget_h = 0.0625\n\n[physics]\n{physics}\n\n[data]\n{data}\n\n[output]\nsnapshot_times = 0.25, 0.5\n\n{extra}"
    )
}

const BENCH_DATA: &str = "omega0 = sin(2*pi*x)*sin(2*pi*y)\ntheta0 = sin(pi*x)*sin(pi*y)";
const ZERO_DATA: &str = "omega0 = 0\ntheta0 = 0";

fn csv_rows(path: &Path) -> (Vec<String>, Vec<Vec<f64>>) {
    let text = fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header: Vec<String> = lines.next().unwrap().split(',').map(str::to_string).collect();
    let rows = lines
        .map(|l| l.split(',').map(|v| v.parse::<f64>().unwrap()).collect())
        .collect();
    (header, rows)
}

#[test]
fn zero_data_run_reports_zero_norms() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &coarse(ZERO_DATA, "nu = 0.01\nt_end = 0.5", ""));
    let out = dir.path().join("out");
    let o = invoke("run", &cfg, &out, &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (header, rows) = csv_rows(&out.join("diagnostics.csv"));
    assert_eq!(header.len(), 18);
    assert!(rows.len() >= 3);
    for row in &rows {
        assert_eq!(row.len(), header.len());
        for (name, v) in header.iter().zip(row).skip(2) {
            assert_eq!(*v, 0.0, "column {name} nonzero");
        }
    }
    let manifest = fs::read_to_string(out.join("manifest.txt")).unwrap();
    assert!(manifest.contains("[mesh_stats]"));
    assert!(manifest.contains("diagnostics.csv"));
}

#[test]
fn benchmark_run_is_bitwise_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &coarse(BENCH_DATA, "nu = 0\nt_end = 0.5", ""));
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    assert!(invoke("run", &cfg, &a, &[]).status.success());
    assert!(invoke("run", &cfg, &b, &[]).status.success());
    let ca = fs::read(a.join("diagnostics.csv")).unwrap();
    let cb = fs::read(b.join("diagnostics.csv")).unwrap();
    assert!(!ca.is_empty());
    assert_eq!(ca, cb);
}

#[test]
fn zero_end_time_writes_a_single_row() {
    let dir = tempfile::tempdir().unwrap();
    let text = coarse(BENCH_DATA, "nu = 0\nt_end = 0", "").replace("snapshot_times = 0.25, 0.5\n", "");
    let cfg = write_config(dir.path(), &text);
    let out = dir.path().join("out");
    let o = invoke("run", &cfg, &out, &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let (_, rows) = csv_rows(&out.join("diagnostics.csv"));
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0][0], 0.0);
}

#[test]
fn snapshots_are_written_when_requested() {
    let dir = tempfile::tempdir().unwrap();
    let text = coarse(BENCH_DATA, "nu = 0\nt_end = 0.5", "").replace("[output]\n", "[output]\nvtk = true\n");
    let cfg = write_config(dir.path(), &text);
    let out = dir.path().join("out");
    assert!(invoke("run", &cfg, &out, &[]).status.success());
    for k in 0..3 {
        let vtk = fs::read_to_string(out.join(format!("snapshot_{k:03}.vtk"))).unwrap();
        assert!(vtk.starts_with("# vtk DataFile"));
    }
}

#[test]
fn verify_on_zero_data_passes_every_check() {
    let dir = tempfile::tempdir().unwrap();
    let verify = "[verify]\nchecks = transport, energy, thermal, gronwall, regularity, elliptic\np = 2, 4, 8, inf\nsamples = 2\n";
    let cfg = write_config(dir.path(), &coarse(ZERO_DATA, "nu = 0.01\nt_end = 0.5", verify));
    let out = dir.path().join("out");
    let o = invoke("verify", &cfg, &out, &[]);
    let text = stdout(&o);
    assert_eq!(o.status.code(), Some(0), "{text}{}", stderr(&o));
    assert!(!text.contains("FAIL"), "{text}");
    for name in ["transport p=inf", "energy", "thermal", "gronwall", "regularity", "elliptic"] {
        assert!(text.contains(&format!("PASS {name}")), "missing {name}: {text}");
    }
    assert!(out.join("verify_report.txt").exists());
}

#[test]
fn verify_flags_an_oversized_time_step() {
    let dir = tempfile::tempdir().unwrap();
    let text = format!(
        "[domain]\npreset = unit_square\n\n[mesh]\ntarget_h = 0.03125\n\n[physics]\nnu = 0\nt_end = 1\ndt_max = 1\ncfl = 5\n\n[data]\n{BENCH_DATA}\n\n[verify]\nchecks = energy\n"
    );
    let cfg = write_config(dir.path(), &text);
    let o = invoke("verify", &cfg, &dir.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(1), "{}{}", stdout(&o), stderr(&o));
    assert!(stdout(&o).contains("FAIL energy"), "{}", stdout(&o));
}

#[test]
fn transport_only_coupling_respects_every_exponent() {
    let dir = tempfile::tempdir().unwrap();
    let verify = "[verify]\nchecks = transport\np = 2, 4, 8, inf\n";
    let physics = "nu = 0\nt_end = 0.5\ncoupling = transport_only";
    let cfg = write_config(dir.path(), &coarse(BENCH_DATA, physics, verify));
    let o = invoke("verify", &cfg, &dir.path().join("out"), &[]);
    let text = stdout(&o);
    assert_eq!(o.status.code(), Some(0), "{text}");
    for p in ["2", "4", "8", "inf"] {
        assert!(text.contains(&format!("PASS transport p={p}")), "{text}");
    }
}

#[test]
fn viscosity_sweep_on_zero_data_passes() {
    let dir = tempfile::tempdir().unwrap();
    let sweep = "[sweep]\nkind = viscosity\nvalues = 0.1, 0.05, 0.025\n";
    let cfg = write_config(dir.path(), &coarse(ZERO_DATA, "nu = 0\nt_end = 0.5", sweep));
    let out = dir.path().join("out");
    let o = invoke("sweep", &cfg, &out, &["--jobs", "2"]);
    assert_eq!(o.status.code(), Some(0), "{}{}", stdout(&o), stderr(&o));
    assert!(out.join("sweep.csv").exists());
    assert!(out.join("sweep_summary.txt").exists());
}

#[test]
fn stability_sweep_reports_each_criterion() {
    let dir = tempfile::tempdir().unwrap();
    let sweep = "[sweep]\nkind = stability\nvalues = 0.01, 0.005, 0.0025\nprofile = sin(pi*x)*sin(pi*y)\njobs = 3\n";
    let cfg = write_config(dir.path(), &coarse(BENCH_DATA, "nu = 0\nt_end = 0.5", sweep));
    let out = dir.path().join("out");
    let o = invoke("sweep", &cfg, &out, &[]);
    let text = stdout(&o);
    assert!(o.status.code() == Some(0) || o.status.code() == Some(1), "{}", stderr(&o));
    let verdicts = text.lines().filter(|l| l.starts_with("PASS") || l.starts_with("FAIL")).count();
    assert_eq!(verdicts, 3, "{text}");
    let csv = fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert_eq!(csv.lines().filter(|l| !l.starts_with("beta")).count(), 1 + 3);
    assert!(csv.lines().any(|l| l.starts_with("beta,")));
}

#[test]
fn singular_initial_data_aborts_without_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let data = "omega0 = 1/x\ntheta0 = 0";
    let cfg = write_config(dir.path(), &coarse(data, "nu = 0\nt_end = 0.5", ""));
    let out = dir.path().join("out");
    let o = invoke("run", &cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).starts_with("error:"), "{}", stderr(&o));
    assert!(!out.join("diagnostics.csv").exists());
}

#[test]
fn config_errors_cite_the_offending_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[physics]\nt_end = 1\nnu = -1\n");
    let o = invoke("run", &cfg, &dir.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 3"), "{}", stderr(&o));

    let cfg = write_config(dir.path(), "[physics]\nnu = 0\nt_end = 1\nrho = 2\n");
    let o = invoke("run", &cfg, &dir.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("line 4"), "{}", stderr(&o));
}

#[test]
fn missing_config_file_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = invoke("run", &dir.path().join("absent.cfg"), &dir.path().join("out"), &[]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn mesh_command_writes_a_vtk_grid() {
    let dir = tempfile::tempdir().unwrap();
    let text = "[domain]\nvertices = 0, 0; 2, 0; 2, 1; 0, 1\n\n[mesh]\ntarget_h = 0.125\n\n[physics]\nnu = 0\nt_end = 0\n\n[data]\nomega0 = 0\ntheta0 = 0\n";
    let cfg = write_config(dir.path(), text);
    let out = dir.path().join("out");
    let o = invoke("mesh", &cfg, &out, &[]);
    assert!(o.status.success(), "{}", stderr(&o));
    let vtk = fs::read_to_string(out.join("mesh.vtk")).unwrap();
    assert!(vtk.contains("UNSTRUCTURED_GRID"));
    let manifest = fs::read_to_string(out.join("manifest.txt")).unwrap();
    assert!(manifest.contains("mesh.vtk"));
}

#[test]
fn reentrant_corners_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let text = "[domain]\nvertices = 0, 0; 2, 0; 2, 1; 1, 1; 1, 2; 0, 2\n\n[physics]\nnu = 0\nt_end = 0\n\n[data]\nomega0 = 0\ntheta0 = 0\n";
    let cfg = write_config(dir.path(), text);
    let out = dir.path().join("out");
    let o = invoke("mesh", &cfg, &out, &[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("not admissible"), "{}", stderr(&o));
    assert!(!out.join("mesh.vtk").exists());
}

#[test]
fn shipped_configs_parse() {
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut seen = 0;
    for entry in fs::read_dir(root).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "cfg") {
            boussinesq_cli::load_config(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            seen += 1;
        }
    }
    assert!(seen >= 4);
}
