use std::path::Path;
use std::process::{Command, Output};

fn tdgl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tdgl")).args(args).output().unwrap()
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("run.toml");
    std::fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

const SMALL: &str = "[discretization]\nh = [0.25, 0.125]\n[model]\nfinal_time = 0.5\n";

#[test]
fn mms_study_writes_errors_with_rate_row() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("out");
    let o = tdgl(&["--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("errors.csv")).unwrap();
    assert_eq!(csv.lines().count(), 4);
    assert!(csv.lines().last().unwrap().starts_with("mixed,rate,"));
    assert_eq!(String::from_utf8(o.stdout).unwrap(), csv);
    let summary = std::fs::read_to_string(out.join("summary.txt")).unwrap();
    assert!(summary.contains("seconds"));
}

#[test]
fn overrides_apply() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let out = dir.path().join("g");
    let o = tdgl(&["--config", &cfg, "--out", out.to_str().unwrap(), "--scheme", "galerkin", "--levels", "1", "--deterministic"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = std::fs::read_to_string(out.join("errors.csv")).unwrap();
    assert_eq!(csv.lines().count(), 2);
    assert!(csv.lines().nth(1).unwrap().starts_with("galerkin,0,"));
    assert!(!std::fs::read_to_string(out.join("summary.txt")).unwrap().contains("seconds"));
}

#[test]
fn deterministic_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SMALL);
    let mut outputs = Vec::new();
    for name in ["a", "b"] {
        let out = dir.path().join(name);
        assert!(tdgl(&["--config", &cfg, "--out", out.to_str().unwrap(), "--deterministic"]).status.success());
        let files: Vec<Vec<u8>> = ["errors.csv", "energy_mixed_level0.csv", "energy_mixed_level1.csv", "summary.txt"]
            .iter()
            .map(|f| std::fs::read(out.join(f)).unwrap())
            .collect();
        outputs.push(files);
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "[model]\neta = 1.0\nkapa = 1.0\n");
    let o = tdgl(&["--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8(o.stderr).unwrap();
    assert!(err.contains("line 3") && err.contains("kapa"), "{err}");

    let cfg = write_config(dir.path(), "[discretization]\nh = [0.1]\ntau = 2.0\n");
    let o = tdgl(&["--config", &cfg]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8(o.stderr).unwrap().contains("discretization.tau"));

    let o = tdgl(&["--config", dir.path().join("missing.toml").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let o = tdgl(&["--config", &write_config(dir.path(), SMALL), "--levels", "0"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn solver_failure_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    // the physical scenario needs more than one Newton iteration per step
    let cfg = write_config(
        dir.path(),
        "[scenario]\nkind = \"physical\"\n[discretization]\nh = [0.25]\ntau = 0.1\n[solver]\nnewton_max_iter = 1\n",
    );
    let out = dir.path().join("o");
    let o = tdgl(&["--config", &cfg, "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8(o.stderr).unwrap().contains("newton"));
}
