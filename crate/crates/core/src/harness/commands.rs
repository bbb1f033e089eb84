use std::fs;
use std::path::{Path, PathBuf};

use crate::certificates::{
    build_dual_certificate, eigen_gap, kkt_residuals, numerical_rank, quadratic_growth_probe, DiagnosticReport,
};
use crate::datagen::{generate_instance, pca_projection, random_fantope_point, random_projection, sample_rng};
use crate::error::{Error, Result};
use crate::geometry::{fantope_project, pnk_project, FantopePoint, ProjectionMatrix};
use crate::par::{map_items, Execution};
use crate::solvers::{
    duality_gap, solve_frank_wolfe, solve_goi, solve_pgd_convex, solve_pgd_nonconvex, SolveOptions, SolveTrace,
    StepPolicy, StopRule, Termination,
};
use crate::spectral::SymMatrix;

use super::config::{BenchSpec, InitSpec, Method, ReferenceSpec, RunConfig, SolverSpec, SweepAxis};
use super::io::{
    fmt_f64, instance_dir, load_problem, read_matrix_csv, write_instance, write_key_values, write_matrix_csv,
    write_trace_csv, Problem, RunResult, RESULT_FILE, SOLUTION_FILE, TRACE_FILE,
};

/// ChaCha stream for random initializations; sample streams count up from 1.
const INIT_STREAM: u64 = u64::MAX;

/// Gap tolerance of the high-precision reference solve.
pub const REFERENCE_GAP_TOL: f64 = 1e-10;

/// Samples drawn by the quadratic-growth probe in diagnostics.
pub const GROWTH_SAMPLES: usize = 200;

/// Writes one instance directory per seed under the configured output dir.
pub fn cmd_generate(cfg: &RunConfig) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    let mut dirs = Vec::with_capacity(cfg.seeds.len());
    for &seed in &cfg.seeds {
        let instance = generate_instance(&cfg.model_for(seed), Execution::default())?;
        let dir = instance_dir(&cfg.out_dir, seed);
        write_instance(&dir, &instance, &cfg.objective)?;
        dirs.push(dir);
    }
    Ok(dirs)
}

/// Starting point before it is adapted to a method.
enum Start {
    Projection(ProjectionMatrix),
    Fantope(FantopePoint),
}

impl Start {
    fn into_projection(self, k: usize) -> Result<ProjectionMatrix> {
        match self {
            Start::Projection(p) => Ok(p),
            Start::Fantope(x) => pnk_project(x.matrix(), k),
        }
    }

    fn into_fantope(self) -> FantopePoint {
        match self {
            Start::Projection(p) => FantopePoint::from(&p),
            Start::Fantope(x) => x,
        }
    }
}

/// PCA initialization: top-k eigenspace of the scatter matrix, or of the
/// target for a quadratic problem.
pub fn pca_start(problem: &Problem) -> Result<ProjectionMatrix> {
    match problem {
        Problem::Huber { instance, .. } => pca_projection(&instance.data, problem.k()),
        Problem::Quadratic { target, k } => pnk_project(target, *k),
    }
}

fn build_start(problem: &Problem, init: &InitSpec) -> Result<Start> {
    let (n, k) = (problem.n(), problem.k());
    let mut rng = sample_rng(problem.seed(), INIT_STREAM);
    Ok(match init {
        InitSpec::Pca => Start::Projection(pca_start(problem)?),
        InitSpec::RandomProjection => Start::Projection(random_projection(n, k, &mut rng)),
        InitSpec::RandomFantope => Start::Fantope(random_fantope_point(n, k, 3, &mut rng)),
        InitSpec::File(path) => {
            let m = read_matrix_csv(path)?;
            if m.nrows() != n {
                return Err(Error::Input(format!("{}: expected {n} rows, got {}", path.display(), m.nrows())));
            }
            if m.ncols() == k && k != n {
                Start::Projection(ProjectionMatrix::from_frame(crate::spectral::OrthoFrame::new(m)?))
            } else if m.ncols() == n {
                Start::Fantope(FantopePoint::new(SymMatrix::new(m)?, k)?)
            } else {
                return Err(Error::Input(format!(
                    "{}: expected an {n}x{k} frame or an {n}x{n} matrix",
                    path.display()
                )));
            }
        }
    })
}

/// Convex PGD from PCA to gap [`REFERENCE_GAP_TOL`]; the closed-form
/// projection for quadratic problems.
pub fn high_precision_solution(problem: &Problem, exec: Execution) -> Result<(SymMatrix, SolveTrace)> {
    if let Problem::Quadratic { target, k } = problem {
        let (x, _) = fantope_project(target, *k)?;
        let trace = SolveTrace {
            records: Vec::new(),
            termination: Termination::GapTol,
            budget_violations: 0,
            iterates: Vec::new(),
            failure: None,
        };
        return Ok((x.into_matrix(), trace));
    }
    let objective = problem.objective(exec);
    let opts = SolveOptions {
        stop: StopRule { gap_tol: REFERENCE_GAP_TOL, ..StopRule::default() },
        ..SolveOptions::default()
    };
    let init = FantopePoint::from(&pca_start(problem)?);
    let out = solve_pgd_convex(objective.as_ref(), problem.k(), &init, &StepPolicy::EmpiricalLambda, None, &opts)?;
    Ok((out.solution.into_matrix(), out.trace))
}

fn reference_point(problem: &Problem, spec: ReferenceSpec, exec: Execution) -> Result<Option<SymMatrix>> {
    match (spec, problem) {
        (ReferenceSpec::None, _) => Ok(None),
        (ReferenceSpec::Truth, Problem::Huber { instance, .. }) => Ok(Some(instance.truth.matrix())),
        _ => Ok(Some(high_precision_solution(problem, exec)?.0)),
    }
}

/// Runs the configured method on an in-memory problem.
pub fn solve_problem(problem: &Problem, spec: &SolverSpec, exec: Execution) -> Result<(SymMatrix, SolveTrace)> {
    let objective = problem.objective(exec);
    let k = problem.k();
    let step = spec.step.unwrap_or_else(|| spec.method.default_step(problem.samples().is_some()));
    let opts = SolveOptions {
        stop: spec.stop,
        reference: reference_point(problem, spec.reference, exec)?,
        ..SolveOptions::default()
    };
    let start = build_start(problem, &spec.init)?;
    let obj = objective.as_ref();
    Ok(match spec.method {
        Method::Goi => {
            let p = start.into_projection(k)?;
            let out = solve_goi(obj, k, p.frame(), &step, &opts)?;
            (out.solution.matrix(), out.trace)
        }
        Method::Pgd => {
            let out = solve_pgd_nonconvex(obj, k, &start.into_projection(k)?, &step, &opts)?;
            (out.solution.matrix(), out.trace)
        }
        Method::PgdConvex => {
            let out = solve_pgd_convex(obj, k, &start.into_fantope(), &step, None, &opts)?;
            (out.solution.into_matrix(), out.trace)
        }
        Method::Fw => {
            let out = solve_frank_wolfe(obj, k, &start.into_fantope(), &step, &opts)?;
            (out.solution.into_matrix(), out.trace)
        }
    })
}

/// Solves the instance in `instance`, writing `solution.csv`, `trace.csv` and
/// `result.txt` into `out`. Artifacts are written whatever the termination.
pub fn cmd_solve(instance: &Path, spec: &SolverSpec, out: &Path) -> Result<RunResult> {
    let problem = load_problem(instance)?;
    let (x, trace) = solve_problem(&problem, spec, Execution::default())?;
    fs::create_dir_all(out)?;
    write_matrix_csv(&out.join(SOLUTION_FILE), "x", x.as_matrix())?;
    write_trace_csv(&out.join(TRACE_FILE), &trace.records)?;
    let last = trace.last();
    let result = RunResult {
        method: spec.method.as_str().to_string(),
        termination: trace.termination,
        iterations: trace.iterations(),
        f: last.f,
        gap: last.gap,
        budget_violations: trace.budget_violations,
        failure: trace.failure.clone(),
    };
    write_key_values(&out.join(RESULT_FILE), &result.to_report())?;
    Ok(result)
}

/// Gap, recovery, certificate and growth diagnostics at `x`.
pub fn diagnose(problem: &Problem, x: &SymMatrix, exec: Execution) -> Result<DiagnosticReport> {
    let (n, k) = (problem.n(), problem.k());
    if x.dim() != n {
        return Err(Error::Input(format!("solution is {0}x{0}, instance has n={n}", x.dim())));
    }
    let objective = problem.objective(exec);
    let obj = objective.as_ref();
    let mut r = DiagnosticReport::default();
    r.push("n", n);
    r.push("k", k);
    r.push("f", fmt_f64(obj.value(x)));
    r.push("duality_gap", fmt_f64(duality_gap(x, obj, k)?));
    let gap = eigen_gap(x, obj, k)?;
    r.push("eigen_gap", fmt_f64(gap.gap));
    r.push("lambda_n_minus_k", fmt_f64(gap.lambda_nk));
    r.push("lambda_n_minus_k_plus_1", fmt_f64(gap.lambda_nk1));
    r.push("r_star", gap.r_star);
    if let Some(truth) = problem.truth() {
        let p = truth.matrix();
        r.push("recovery_error", fmt_f64((x - &p).norm()));
        r.push("pca_recovery_error", fmt_f64((&pca_start(problem)?.matrix() - &p).norm()));
    }

    let x_star = pnk_project(x, k)?;
    match build_dual_certificate(&x_star, obj) {
        Ok(cert) => {
            let xm = x_star.matrix();
            let kkt = kkt_residuals(&xm, &cert, obj, k)?;
            r.push("certificate", "ok");
            r.push("dual_s", fmt_f64(cert.s));
            r.push("kkt_residual", fmt_f64(kkt.max()));
            r.push("kkt_stationarity", fmt_f64(kkt.stationarity));
            r.push("kkt_complementarity_z1", fmt_f64(kkt.complementarity_z1));
            r.push("kkt_complementarity_z2", fmt_f64(kkt.complementarity_z2));
            r.push("kkt_dual_infeasibility", fmt_f64(kkt.dual_infeasibility));
            r.push("kkt_primal_infeasibility", fmt_f64(kkt.primal_infeasibility));
            r.push("rank_z1", numerical_rank(&cert.z1)?);
            r.push("rank_z2", numerical_rank(&cert.z2)?);
            r.push("z1_z2_norm", fmt_f64((cert.z1.as_matrix() * cert.z2.as_matrix()).norm()));
            let mut rng = sample_rng(problem.seed(), INIT_STREAM - 1);
            let growth = quadratic_growth_probe(&xm, obj, k, gap.gap, GROWTH_SAMPLES, &mut rng);
            r.push("growth_samples", growth.samples);
            r.push("growth_violations", growth.violations);
            r.push("growth_worst_slack", fmt_f64(growth.worst_slack));
        }
        Err(e) => r.push("certificate", format!("failed: {e}")),
    }
    Ok(r)
}

pub fn cmd_diagnose(instance: &Path, solution: &Path) -> Result<DiagnosticReport> {
    if !solution.exists() {
        return Err(Error::FileNotFound(solution.to_path_buf()));
    }
    let problem = load_problem(instance)?;
    let x = SymMatrix::new(read_matrix_csv(solution)?)?;
    diagnose(&problem, &x, Execution::default())
}

/// Per-iteration factorization timings of GOI (QR) against nonconvex PGD
/// (eigendecomposition).
#[derive(Clone, Debug, PartialEq)]
pub struct BenchSummary {
    pub mean_qr_ns: f64,
    pub mean_eig_ns: f64,
    /// `mean_eig_ns / mean_qr_ns` over all repetitions.
    pub ratio: f64,
    /// The same ratio per repetition.
    pub rep_ratios: Vec<f64>,
    pub ratio_variance: f64,
}

impl BenchSummary {
    pub fn to_report(&self) -> DiagnosticReport {
        let mut r = DiagnosticReport::default();
        r.push("reps", self.rep_ratios.len());
        r.push("mean_qr_ns", fmt_f64(self.mean_qr_ns));
        r.push("mean_eig_ns", fmt_f64(self.mean_eig_ns));
        r.push("ratio_eig_over_qr", fmt_f64(self.ratio));
        r.push("ratio_rep_mean", fmt_f64(mean(&self.rep_ratios)));
        r.push("ratio_rep_variance", fmt_f64(self.ratio_variance));
        r
    }
}

fn mean(v: &[f64]) -> f64 {
    if v.is_empty() {
        return f64::NAN;
    }
    v.iter().sum::<f64>() / v.len() as f64
}

/// Unbiased sample variance; 0 for fewer than two values.
fn variance(v: &[f64]) -> f64 {
    if v.len() < 2 {
        return 0.0;
    }
    let mu = mean(v);
    v.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / (v.len() - 1) as f64
}

/// One timed iteration in `bench.csv`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct BenchRow {
    pub rep: usize,
    pub method: Method,
    pub iter: usize,
    pub fact_time_ns: u64,
}

/// Runs GOI and nonconvex PGD from PCA for `spec.iters` iterations each,
/// `spec.reps` times.
pub fn bench_problem(problem: &Problem, spec: &BenchSpec, exec: Execution) -> Result<(BenchSummary, Vec<BenchRow>)> {
    let objective = problem.objective(exec);
    let obj = objective.as_ref();
    let k = problem.k();
    let step = Method::Goi.default_step(problem.samples().is_some());
    let opts = SolveOptions {
        stop: StopRule { gap_tol: f64::NEG_INFINITY, max_iters: spec.iters, stall_tol: -1.0 },
        ..SolveOptions::default()
    };
    let init = pca_start(problem)?;
    let mut rows = Vec::new();
    let (mut qr_all, mut eig_all, mut ratios) = (Vec::new(), Vec::new(), Vec::new());
    for rep in 0..spec.reps {
        let goi = solve_goi(obj, k, init.frame(), &step, &opts)?.trace;
        let pgd = solve_pgd_nonconvex(obj, k, &init, &step, &opts)?.trace;
        let mut times = |method: Method, trace: &SolveTrace| -> Vec<f64> {
            trace.records[1..]
                .iter()
                .map(|r| {
                    rows.push(BenchRow { rep, method, iter: r.iter, fact_time_ns: r.fact_time_ns });
                    r.fact_time_ns as f64
                })
                .collect()
        };
        let qr = times(Method::Goi, &goi);
        let eig = times(Method::Pgd, &pgd);
        ratios.push(mean(&eig) / mean(&qr));
        qr_all.extend(qr);
        eig_all.extend(eig);
    }
    let (mean_qr_ns, mean_eig_ns) = (mean(&qr_all), mean(&eig_all));
    let summary = BenchSummary {
        mean_qr_ns,
        mean_eig_ns,
        ratio: mean_eig_ns / mean_qr_ns,
        ratio_variance: variance(&ratios),
        rep_ratios: ratios,
    };
    Ok((summary, rows))
}

/// Writes `bench.csv` (`rep,method,iter,fact_time_ns`) and
/// `bench_summary.txt` into `out`.
pub fn cmd_bench(instance: &Path, spec: &BenchSpec, out: &Path) -> Result<BenchSummary> {
    let problem = load_problem(instance)?;
    let (summary, rows) = bench_problem(&problem, spec, Execution::default())?;
    fs::create_dir_all(out)?;
    let mut text = String::from("rep,method,iter,fact_time_ns\n");
    for r in rows {
        text.push_str(&format!("{},{},{},{}\n", r.rep, r.method.as_str(), r.iter, r.fact_time_ns));
    }
    fs::write(out.join("bench.csv"), text)?;
    write_key_values(&out.join("bench_summary.txt"), &summary.to_report())?;
    Ok(summary)
}

/// One seed of a sweep.
#[derive(Clone, Debug, PartialEq)]
pub struct Trial {
    pub value: f64,
    pub seed: u64,
    pub eigen_gap: f64,
    pub recovery: f64,
    pub pca_recovery: f64,
    pub dual_gap: f64,
    pub iterations: usize,
}

/// Seed-averaged row of the sweep table.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub value: f64,
    pub seeds: usize,
    pub eigen_gap: f64,
    pub eigen_gap_min: f64,
    pub recovery: f64,
    pub pca_recovery: f64,
    pub max_dual_gap: f64,
}

pub const SWEEP_COLUMNS: [&str; 6] = ["seeds", "eigen_gap", "eigen_gap_min", "recovery_xstar", "recovery_pca", "max_dual_gap"];

/// High-precision solve and Table-style diagnostics for one model config.
pub fn run_trial(cfg: &RunConfig, model: crate::datagen::ModelConfig, value: f64) -> Result<Trial> {
    let instance = generate_instance(&model, Execution::Sequential)?;
    let problem = Problem::Huber { instance, params: cfg.objective };
    let (x, trace) = high_precision_solution(&problem, Execution::Sequential)?;
    let objective = problem.objective(Execution::Sequential);
    let p = problem.truth().expect("Huber problems carry a truth").matrix();
    Ok(Trial {
        value,
        seed: model.seed,
        eigen_gap: eigen_gap(&x, objective.as_ref(), model.k)?.gap,
        recovery: (&x - &p).norm(),
        pca_recovery: (&pca_start(&problem)?.matrix() - &p).norm(),
        dual_gap: trace.final_gap(),
        iterations: trace.iterations(),
    })
}

/// Averages trials per value, seeds in ascending order.
pub fn aggregate(values: &[f64], trials: &[Trial]) -> Vec<SweepRow> {
    values
        .iter()
        .map(|&v| {
            let mut ts: Vec<&Trial> = trials.iter().filter(|t| t.value == v).collect();
            ts.sort_by_key(|t| t.seed);
            let col = |f: fn(&Trial) -> f64| ts.iter().map(|t| f(t)).collect::<Vec<_>>();
            SweepRow {
                value: v,
                seeds: ts.len(),
                eigen_gap: mean(&col(|t| t.eigen_gap)),
                eigen_gap_min: col(|t| t.eigen_gap).into_iter().fold(f64::INFINITY, f64::min),
                recovery: mean(&col(|t| t.recovery)),
                pca_recovery: mean(&col(|t| t.pca_recovery)),
                max_dual_gap: col(|t| t.dual_gap).into_iter().fold(f64::NEG_INFINITY, f64::max),
            }
        })
        .collect()
}

pub fn sweep_table_text(axis: SweepAxis, rows: &[SweepRow]) -> String {
    let mut out = format!("{},{}\n", axis.as_str(), SWEEP_COLUMNS.join(","));
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.value,
            r.seeds,
            fmt_f64(r.eigen_gap),
            fmt_f64(r.eigen_gap_min),
            fmt_f64(r.recovery),
            fmt_f64(r.pca_recovery),
            fmt_f64(r.max_dual_gap)
        ));
    }
    out
}

pub fn read_sweep_table(path: &Path) -> Result<Vec<SweepRow>> {
    let m = read_matrix_csv(path)?;
    if m.ncols() != SWEEP_COLUMNS.len() + 1 {
        return Err(Error::Parse { path: path.to_path_buf(), msg: format!("expected {} columns", SWEEP_COLUMNS.len() + 1) });
    }
    Ok(m.row_iter()
        .map(|r| SweepRow {
            value: r[0],
            seeds: r[1] as usize,
            eigen_gap: r[2],
            eigen_gap_min: r[3],
            recovery: r[4],
            pca_recovery: r[5],
            max_dual_gap: r[6],
        })
        .collect())
}

/// Runs every (value, seed) pair, in parallel when enabled, and writes
/// `table.csv` plus one `trial.txt` per run directory under the output dir.
pub fn cmd_sweep(cfg: &RunConfig) -> Result<Vec<SweepRow>> {
    cfg.validate()?;
    let sweep = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| Error::Config("sweep needs a [sweep] section".into()))?;
    let mut jobs = Vec::new();
    for &v in &sweep.values {
        for &seed in &cfg.seeds {
            let mut model = cfg.model_for(seed);
            match sweep.axis {
                SweepAxis::P => model.p = v,
                SweepAxis::N => model.n = v as usize,
            }
            model.validate()?;
            jobs.push((v, model));
        }
    }
    let trials = map_items(&jobs, Execution::default(), |(v, model)| run_trial(cfg, *model, *v))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    for t in &trials {
        let dir = instance_dir(&cfg.out_dir.join(format!("{}-{}", sweep.axis.as_str(), t.value)), t.seed);
        fs::create_dir_all(&dir)?;
        let mut kv = DiagnosticReport::default();
        kv.push(sweep.axis.as_str(), t.value);
        kv.push("seed", t.seed);
        kv.push("eigen_gap", fmt_f64(t.eigen_gap));
        kv.push("recovery_error", fmt_f64(t.recovery));
        kv.push("pca_recovery_error", fmt_f64(t.pca_recovery));
        kv.push("duality_gap", fmt_f64(t.dual_gap));
        kv.push("iterations", t.iterations);
        write_key_values(&dir.join("trial.txt"), &kv)?;
    }
    let rows = aggregate(&sweep.values, &trials);
    fs::create_dir_all(&cfg.out_dir)?;
    fs::write(cfg.out_dir.join("table.csv"), sweep_table_text(sweep.axis, &rows))?;
    Ok(rows)
}
