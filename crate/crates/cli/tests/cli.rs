use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use nalgebra::DMatrix;
use opinf_core::benchmarks::{Benchmark, BenchmarkConfig, BenchmarkName};
use opinf_core::{exact_opinf, io, pod_basis, SnapshotMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const BIN: &str = env!("CARGO_BIN_EXE_exact-opinf");
const SMALL: &str = "N = 32\nT = 0.2\n";

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(BIN)
        .current_dir(dir)
        .env_remove("EXACTOPINF_THREADS")
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn small_config(dir: &Path) {
    fs::write(dir.join("small.toml"), SMALL).unwrap();
}

#[test]
fn pod_of_identity_snapshots_is_first_unit_vector() {
    let dir = tempfile::tempdir().unwrap();
    let snaps = SnapshotMatrix::new(DMatrix::identity(3, 3), DMatrix::zeros(0, 3), vec![0.0, 1.0, 2.0]).unwrap();
    fs::write(dir.path().join("id.csv"), io::snapshots_to_string(&snaps)).unwrap();
    let o = run(dir.path(), &["pod", "id.csv", "-n", "1", "-o", "basis.csv"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let basis = io::load_basis(&dir.path().join("basis.csv")).unwrap();
    assert_eq!(basis.modes().as_slice(), &[1.0, 0.0, 0.0]);
}

#[test]
fn pod_reports_rank_with_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    let states = DMatrix::from_column_slice(3, 2, &[1.0, 2.0, 0.0, 2.0, 4.0, 0.0]);
    let snaps = SnapshotMatrix::new(states, DMatrix::zeros(0, 2), vec![0.0, 1.0]).unwrap();
    fs::write(dir.path().join("r1.csv"), io::snapshots_to_string(&snaps)).unwrap();
    let o = run(dir.path(), &["pod", "r1.csv", "-n", "2", "-o", "basis.csv"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stdout(&o).contains("numerical_rank=1"));
}

#[test]
fn pod_of_random_file_matches_library() {
    let dir = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2020);
    let states = DMatrix::from_fn(20, 50, |_, _| rng.random_range(-1.0..1.0));
    let times = (0..50).map(|k| k as f64).collect();
    let snaps = SnapshotMatrix::new(states, DMatrix::zeros(0, 50), times).unwrap();
    fs::write(dir.path().join("rand.csv"), io::snapshots_to_string(&snaps)).unwrap();
    let o = run(dir.path(), &["pod", "rand.csv", "-n", "7", "-o", "basis.csv"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let from_cli = io::load_basis(&dir.path().join("basis.csv")).unwrap();
    assert_eq!(from_cli, pod_basis(&snaps, 7).unwrap());
}

#[test]
fn builtin_inference_matches_library_and_round_trips() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    small_config(d);
    let o = run(d, &["snapshots", "burgers", "--config", "small.toml", "-o", "snaps.csv"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = run(d, &["pod", "snaps.csv", "-n", "5", "-o", "basis.csv"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let o = run(
        d,
        &[
            "infer", "--benchmark", "burgers", "--config", "small.toml", "--basis", "basis.csv", "--dt", "0.05",
            "--degrees", "1,2", "--inputs", "0", "-o", "op.csv", "--ensemble-out", "ens.csv",
        ],
    );
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("n=5 n_f=20 "));

    let config = BenchmarkConfig::from_toml_str(SMALL, "small").unwrap();
    let bench = Benchmark::build(BenchmarkName::Burgers, &config).unwrap();
    let pod = pod_basis(&bench.pod_snapshots().unwrap(), 5).unwrap();
    let lib = exact_opinf(bench.fom.as_ref(), pod.modes(), 0.05).unwrap();
    assert_eq!(io::load_operator(&d.join("op.csv")).unwrap(), lib.operator);

    // the stored ensemble reproduces the operator file byte for byte
    let o = run(d, &["infer", "--ensemble", "ens.csv", "-o", "op2.csv"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(fs::read(d.join("op.csv")).unwrap(), fs::read(d.join("op2.csv")).unwrap());

    let o = run(d, &["diagnose", "op.csv", "op2.csv"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let row = stdout(&o).lines().nth(1).unwrap().to_string();
    assert!(row.starts_with("5,20,0.0000000000000000e0,"), "{row}");

    let o = run(d, &["infer", "--ensemble", "ens.csv", "--degrees", "1,2,3", "-o", "op3.csv"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn malformed_ensemble_exits_two_with_line_number() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let text = "# exact-opinf ensemble v1 {\"n\":1,\"I\":[1],\"N_u\":0,\"dt\":0.1}\npair,xbar1,xdot1\nx(1),1.0,-1.0,7\n";
    fs::write(d.join("bad.csv"), text).unwrap();
    let o = run(d, &["infer", "--ensemble", "bad.csv", "-o", "op.csv"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("bad.csv:3"), "{}", stderr(&o));
    assert!(!d.join("op.csv").exists());

    fs::write(d.join("cfg.toml"), "N = 32\nbogus = 1\n").unwrap();
    let o = run(d, &["experiment", "burgers", "--config", "cfg.toml"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("cfg.toml:2"), "{}", stderr(&o));
}

#[test]
fn experiment_writes_tables_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    small_config(d);
    let common = ["experiment", "burgers", "--config", "small.toml", "--n-max", "4", "--dt", "0.1", "--nested"];
    let mut a: Vec<&str> = common.to_vec();
    a.extend(["--out", "a", "--threads", "1"]);
    let o = run(d, &a);
    assert!(o.status.success(), "{}\n{}", stdout(&o), stderr(&o));
    assert!(stdout(&o).contains("PASS burgers"));

    let mut b: Vec<&str> = common.to_vec();
    b.extend(["--out", "b"]);
    let o = Command::new(BIN).current_dir(d).env("EXACTOPINF_THREADS", "3").args(&b).output().unwrap();
    assert!(o.status.success(), "{}", stderr(&o));

    for f in [
        "operator_errors.csv",
        "cond_P.csv",
        "dt_estimate.csv",
        "energy_violation.csv",
        "symmetry_violation.csv",
        "spectra.csv",
        "nestedness.csv",
        "failures.csv",
    ] {
        let x = fs::read(d.join("a").join(f)).unwrap_or_else(|_| panic!("missing {f}"));
        assert_eq!(x, fs::read(d.join("b").join(f)).unwrap(), "{f} differs across thread counts");
    }

    let spectra = fs::read_to_string(d.join("a/spectra.csv")).unwrap();
    let mut rows = 0;
    for line in spectra.lines().skip(2) {
        let cols: Vec<f64> = line.split(',').skip(2).map(|v| v.parse().unwrap()).collect();
        assert!((cols[0] - cols[1]).abs() < 1e-10);
        rows += 1;
    }
    assert_eq!(rows, 1 + 2 + 3 + 4);
}

#[test]
fn threshold_failures_are_listed_with_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    fs::write(d.join("ci.toml"), "N = 32\nT = 0.01\n").unwrap();
    let o = run(d, &["experiment", "chafee-infante", "--config", "ci.toml", "--n-max", "3", "--out", "out"]);
    assert_eq!(o.status.code(), Some(1));
    let out = stdout(&o);
    assert!(out.lines().all(|l| l.starts_with("FAIL check=")), "{out}");
    assert!(out.contains("check=dt_estimate"));
    let listed = fs::read_to_string(d.join("out/failures.csv")).unwrap();
    assert_eq!(listed.lines().count(), 2 + out.lines().count());
}

#[test]
fn out_of_range_sweep_needs_force() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    small_config(d);
    let o = run(d, &["experiment", "burgers", "--config", "small.toml", "--n-max", "11", "--dt", "0.1", "--no-cond"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("documented range"));
}
