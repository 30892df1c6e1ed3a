use std::path::Path;
use std::process::{Command, Output};

fn mdbench(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mdbench"))
        .args(args)
        .current_dir(dir)
        .env_remove("MDBENCH_OUT_DIR")
        .output()
        .expect("spawn mdbench")
}

fn data_rows(path: &Path) -> Vec<String> {
    let text = std::fs::read_to_string(path).unwrap();
    text.lines().filter(|l| !l.starts_with('#')).skip(1).map(str::to_string).collect()
}

#[test]
fn run_writes_thermo_every_ten_steps() {
    let dir = tempfile::tempdir().unwrap();
    let out = mdbench(dir.path(), &["run", "--cells", "6", "--iters", "200", "--mode", "baseline", "--out-dir", "o"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = data_rows(&dir.path().join("o/thermo_baseline.csv"));
    assert_eq!(rows.len(), 21);
    let t0: f64 = rows[0].split(',').nth(1).unwrap().parse().unwrap();
    assert!(rows[0].starts_with("0,") && (t0 - 1.44).abs() < 1e-12, "{}", rows[0]);
    assert!(rows[20].starts_with("200,"));
    assert_eq!(data_rows(&dir.path().join("o/timing.csv")).len(), 1);
}

#[test]
fn both_modes_write_summary_and_tdr() {
    let dir = tempfile::tempdir().unwrap();
    let out = mdbench(dir.path(), &["run", "--cells", "6", "--iters", "40", "--reneigh", "5", "--mode", "both", "--out-dir", "o"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["thermo_baseline.csv", "thermo_offpath.csv", "tdr.csv", "summary.csv"] {
        assert!(dir.path().join("o").join(f).exists(), "{f}");
    }
    assert_eq!(data_rows(&dir.path().join("o/timing.csv")).len(), 2);
}

#[test]
fn sync_debug_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = mdbench(
        dir.path(),
        &["run", "--cells", "6", "--iters", "30", "--reneigh", "5", "--nodes", "2", "--mode", "offpath-sync-debug", "--out-dir", "o"],
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("bitwise identical"));
}

#[test]
fn config_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["run", "--cells", "2"][..],
        &["run", "--set", "no_such_key=1"],
        &["run", "--reneigh", "0"],
        &["run", "--throttle", "0.5"],
        &["run", "--config", "missing.conf"],
    ] {
        let out = mdbench(dir.path(), args);
        assert_eq!(out.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
}

#[test]
fn config_file_then_flags() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("run.conf"), "# desk run\ncells = 5\niters = 500\nthermo = 5\n").unwrap();
    let out = mdbench(dir.path(), &["run", "--config", "run.conf", "--iters", "20", "--nodes", "1", "--out-dir", "o"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(data_rows(&dir.path().join("o/thermo_baseline.csv")).len(), 5);
}

#[test]
fn env_sets_output_directory() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_mdbench"))
        .args(["run", "--cells", "5", "--iters", "10", "--nodes", "1"])
        .current_dir(dir.path())
        .env("MDBENCH_OUT_DIR", "from-env")
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(dir.path().join("from-env/thermo_baseline.csv").exists());
}

#[test]
fn socket_transport_runs_worker_processes() {
    let dir = tempfile::tempdir().unwrap();
    let common = ["--cells", "6", "--iters", "30", "--reneigh", "5", "--nodes", "2", "--mode", "offpath"];
    let sock = mdbench(dir.path(), &[&["run"][..], &common, &["--transport", "socket", "--out-dir", "s"]].concat());
    assert!(sock.status.success(), "{}", String::from_utf8_lossy(&sock.stderr));
    let local = mdbench(dir.path(), &[&["run"][..], &common, &["--out-dir", "l"]].concat());
    assert!(local.status.success());
    assert_eq!(
        data_rows(&dir.path().join("s/thermo_offpath.csv")),
        data_rows(&dir.path().join("l/thermo_offpath.csv"))
    );
}

#[test]
fn sweep_table_shape() {
    let dir = tempfile::tempdir().unwrap();
    let out = mdbench(
        dir.path(),
        &["sweep", "--cells", "5,6", "--reneigh", "1..3", "--iters", "20", "--nodes", "1", "--out-dir", "o"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = data_rows(&dir.path().join("o/sweep.csv"));
    assert_eq!(rows.len(), 6);
    assert!(rows.iter().all(|r| r.split(',').count() == 13));
}

#[test]
fn report_compares_two_thermo_files() {
    let dir = tempfile::tempdir().unwrap();
    let a = mdbench(dir.path(), &["run", "--cells", "5", "--iters", "40", "--nodes", "1", "--reneigh", "1", "--out-dir", "a"]);
    let b = mdbench(dir.path(), &["run", "--cells", "5", "--iters", "40", "--nodes", "1", "--reneigh", "10", "--out-dir", "b"]);
    assert!(a.status.success() && b.status.success());
    let out = mdbench(
        dir.path(),
        &["report", "--test", "b/thermo_baseline.csv", "--reference", "a/thermo_baseline.csv", "--out-dir", "r"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).contains("alpha"));
    assert_eq!(data_rows(&dir.path().join("r/tdr.csv")).len(), 1);
}

#[test]
fn model_predicts() {
    let dir = tempfile::tempdir().unwrap();
    let out = mdbench(dir.path(), &["model", "--cells", "6", "--iters", "60", "--reneigh", "5", "--nodes", "1", "--out-dir", "o"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("o/model.csv").exists());
    let short = mdbench(dir.path(), &["model", "--cells", "6", "--iters", "10", "--nodes", "1", "--out-dir", "o"]);
    assert!(!short.status.success());
}
