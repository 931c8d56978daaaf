use std::fs;
use std::process::Command;

fn ekman(args: &[&str], config: &str) -> (i32, tempfile::TempDir) {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, config).unwrap();
    let out = dir.path().join("out");
    let status = Command::new(env!("CARGO_BIN_EXE_ekman"))
        .args(args)
        .arg("--config")
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    (status.status.code().unwrap(), dir)
}

#[test]
fn modes_passes_and_writes_a_summary() {
    let (code, dir) = ekman(&["modes", "--seedless"], "radius = 2\nepsilon = 1e-3\n");
    assert_eq!(code, 0);
    assert!(dir.path().join("out/summary.json").is_file());
    assert!(dir.path().join("out/point_000/modes.csv").is_file());
}

#[test]
fn bad_config_exits_with_two() {
    let (code, _dir) = ekman(&["modes"], "no_such_key = 3\n");
    assert_eq!(code, 2);
}

#[test]
fn failed_check_exits_with_one() {
    let (code, _dir) = ekman(&["modes", "--parallel", "1"], "radius = 2\nepsilon = 1e-3\ntol.eigen = 0\n");
    assert_eq!(code, 1);
}
