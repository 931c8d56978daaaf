use ekman_core::exec::Execution;
use ekman_core::harness::{run, run_command, Command, ExperimentSpec};
use std::fs;

fn bl_spec() -> ExperimentSpec {
    ExperimentSpec::parse("kind = bl_scaling\nepsilon = 1e-3, 1e-4, 1e-5\n").unwrap()
}

#[test]
fn reruns_are_byte_identical() {
    let spec = bl_spec();
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    run(&spec, a.path(), Execution::default()).unwrap();
    run(&spec, b.path(), Execution::Sequential).unwrap();
    for f in ["points.csv", "summary.json"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn every_check_carries_a_tolerance() {
    let dir = tempfile::tempdir().unwrap();
    let s = run(&bl_spec(), dir.path(), Execution::default()).unwrap();
    assert!(!s.checks.is_empty());
    assert!(s.checks.iter().all(|c| c.tolerance.is_finite() && !c.rule.is_empty()));
    assert!(s.passed);
    for p in &s.points {
        assert!(dir.path().join(&p.dir).is_dir(), "{}", p.dir);
    }
}

#[test]
fn empty_grid_is_rejected() {
    let spec = ExperimentSpec::parse("epsilon = []").unwrap();
    let dir = tempfile::tempdir().unwrap();
    assert!(run(&spec, dir.path(), Execution::Sequential).is_err());
}

#[test]
fn compare_attributes_the_direct_norm() {
    let spec = ExperimentSpec::parse("epsilon = 1e-2\nt_end = 0.05\nnz = 128").unwrap();
    let dir = tempfile::tempdir().unwrap();
    let s = run_command(Command::Compare, &spec, dir.path(), Execution::Sequential).unwrap();
    assert!(s.passed, "{:?}", s.checks);
    assert!(dir.path().join("point_000/compare.csv").is_file());
}
