use std::fs;
use std::path::Path;
use std::process::Command;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use fantope::datagen::random_projection;
use fantope::geometry::fantope_project;
use fantope::harness::io::{read_matrix_csv, read_trace_csv, write_quadratic, TRACE_FILE};
use fantope::harness::{
    cmd_diagnose, cmd_generate, cmd_solve, cmd_sweep, read_sweep_table, InitSpec, Method, ReferenceSpec,
    RunConfig, SolverSpec,
};
use fantope::solvers::Termination;
use fantope::spectral::SymMatrix;
use fantope::Error;

const BIN: &str = env!("CARGO_BIN_EXE_fantope");

fn small_config(out: &Path, extra: &str) -> RunConfig {
    let text = format!(
        "[model]\nmodel = spiked\nn = 12\nk = 2\nm = 60\np = 0.1\nseeds = 0..3\n[output]\ndir = {}\n{extra}",
        out.display()
    );
    RunConfig::parse(&text).unwrap()
}

fn files(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut out: Vec<_> = fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .map(|p| (p.file_name().unwrap().to_string_lossy().into_owned(), fs::read(&p).unwrap()))
        .collect();
    out.sort();
    out
}

#[test]
fn generate_is_byte_identical_on_rerun() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), "");
    let first = cmd_generate(&cfg).unwrap();
    assert_eq!(first.len(), 3);
    let before: Vec<_> = first.iter().map(|d| files(d)).collect();
    cmd_generate(&cfg).unwrap();
    let after: Vec<_> = first.iter().map(|d| files(d)).collect();
    assert_eq!(before, after);
}

#[test]
fn twenty_seeds_give_twenty_directories() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = small_config(tmp.path(), "");
    cfg.seeds = (0..20).collect();
    assert_eq!(cmd_generate(&cfg).unwrap().len(), 20);
    assert_eq!(fs::read_dir(tmp.path()).unwrap().count(), 20);
}

#[test]
fn quadratic_instance_solves_to_projection_oracle() {
    let tmp = tempfile::tempdir().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let (n, k) = (9, 3);
    let m = &(&random_projection(n, k, &mut rng).matrix() * 1.4) + &SymMatrix::from_fn(n, |i, j| {
        0.01 * ((i * 7 + j * 3) % 5) as f64 - 0.02
    });
    write_quadratic(&tmp.path().join("quad"), &m, k).unwrap();
    let (oracle, _) = fantope_project(&m, k).unwrap();
    for method in Method::ALL {
        let spec = SolverSpec {
            method,
            init: InitSpec::RandomProjection,
            reference: ReferenceSpec::HighPrecision,
            stop: fantope::solvers::StopRule { gap_tol: 1e-14, ..Default::default() },
            ..SolverSpec::default()
        };
        let out = tmp.path().join(method.as_str());
        let result = cmd_solve(&tmp.path().join("quad"), &spec, &out).unwrap();
        assert_eq!(result.termination, Termination::GapTol, "{method:?}");
        let x = read_matrix_csv(&out.join("solution.csv")).unwrap();
        let err = (&x - oracle.matrix().as_matrix()).norm();
        // Frank-Wolfe's distance scales like sqrt(gap), so it gets the looser bound.
        let tol = if method == Method::Fw { 1e-6 } else { 1e-8 };
        assert!(err <= tol, "{method:?}: {err:e}");
    }
}

#[test]
fn goi_and_pgd_traces_agree_on_distance_to_truth() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), "");
    let dir = &cmd_generate(&cfg).unwrap()[0];
    let mut traces = Vec::new();
    for method in [Method::Goi, Method::Pgd] {
        let spec = SolverSpec { method, ..SolverSpec::default() };
        let out = tmp.path().join(format!("run-{}", method.as_str()));
        cmd_solve(dir, &spec, &out).unwrap();
        traces.push(read_trace_csv(&out.join(TRACE_FILE)).unwrap());
    }
    let (goi, pgd) = (&traces[0], &traces[1]);
    let fin = |t: &Vec<fantope::solvers::IterRecord>| t.last().unwrap().dist_ref.unwrap();
    assert!((fin(goi) - fin(pgd)).abs() < 1e-6);
    assert_eq!(goi[0].dist_ref, pgd[0].dist_ref);
}

#[test]
fn diagnose_reports_gap_at_pca_and_missing_file() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = small_config(tmp.path(), "");
    let dir = &cmd_generate(&cfg).unwrap()[0];
    let spec = SolverSpec { method: Method::Pgd, stop: fantope::solvers::StopRule { max_iters: 0, ..Default::default() }, ..SolverSpec::default() };
    cmd_solve(dir, &spec, &tmp.path().join("pca")).unwrap();
    let report = cmd_diagnose(dir, &tmp.path().join("pca/solution.csv")).unwrap();
    let gap: f64 = report.get("duality_gap").unwrap().parse().unwrap();
    assert!(gap > 1e-4, "gap at PCA {gap}");
    assert!(report.get("pca_recovery_error").is_some());

    let err = cmd_diagnose(dir, &tmp.path().join("missing.csv")).unwrap_err();
    assert!(matches!(err, Error::FileNotFound(_)));
}

#[test]
fn sweep_twice_gives_identical_tables() {
    let tmp = tempfile::tempdir().unwrap();
    let sweep = "[sweep]\nvary = p\nvalues = 0.1, 0.3\n";
    let a = small_config(&tmp.path().join("a"), sweep);
    let b = small_config(&tmp.path().join("b"), sweep);
    let rows = cmd_sweep(&a).unwrap();
    cmd_sweep(&b).unwrap();
    let ta = fs::read(tmp.path().join("a/table.csv")).unwrap();
    let tb = fs::read(tmp.path().join("b/table.csv")).unwrap();
    assert_eq!(ta, tb);
    assert_eq!(read_sweep_table(&tmp.path().join("a/table.csv")).unwrap(), rows);
    assert!(rows[0].eigen_gap > rows[1].eigen_gap);
}

#[test]
fn empty_seed_list_is_rejected() {
    let err = RunConfig::parse("[model]\nseeds = \n").unwrap_err();
    assert!(matches!(err, Error::Config(_)));
}

#[test]
fn cli_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let ini = tmp.path().join("run.ini");
    fs::write(&ini, format!("[model]\nn = 8\nk = 2\nm = 40\nseeds = 1\n[output]\ndir = {}\n", tmp.path().join("out").display())).unwrap();
    let run = |args: &[&str]| Command::new(BIN).args(args).output().unwrap();

    let gen = run(&["generate", "--config", ini.to_str().unwrap()]);
    assert!(gen.status.success(), "{}", String::from_utf8_lossy(&gen.stderr));
    let inst = tmp.path().join("out/instance-0001");
    let inst = inst.to_str().unwrap();

    let bad_solver = run(&["solve", inst, "--solver", "newton"]);
    assert_eq!(bad_solver.status.code(), Some(2));

    let out = tmp.path().join("s");
    let ok = run(&["solve", inst, "--solver", "pgd-convex", "--out", out.to_str().unwrap()]);
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stderr));
    assert!(String::from_utf8_lossy(&ok.stdout).contains("termination = gap-tol"));

    let capped = run(&["solve", inst, "--solver", "fw", "--max-iters", "1", "--tol", "0", "--out", out.to_str().unwrap()]);
    assert_eq!(capped.status.code(), Some(1));
    assert!(out.join("trace.csv").exists());

    let missing = run(&["diagnose", inst, tmp.path().join("nope.csv").to_str().unwrap()]);
    assert_eq!(missing.status.code(), Some(2));

    fs::write(&ini, "[model]\np = 0.6\n").unwrap();
    let bad_p = run(&["generate", "--config", ini.to_str().unwrap()]);
    assert_eq!(bad_p.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&bad_p.stderr).contains("p must be in (0,0.5]"));
}
