use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use fantope::harness::{
    cmd_bench, cmd_diagnose, cmd_generate, cmd_solve, cmd_sweep, io, InitSpec, Method, RunConfig, SolverSpec,
};
use fantope::solvers::{StepPolicy, Termination};
use fantope::Error;

#[derive(Parser)]
#[command(name = "fantope", version, about = "Rank-k projection and Fantope solvers with a robust-PCA harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write one instance directory per seed.
    Generate {
        #[arg(long)]
        config: PathBuf,
        /// Generate only this seed instead of the configured list.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Solve an instance and write solution.csv, trace.csv and result.txt.
    Solve {
        /// Instance directory written by `generate`.
        instance: PathBuf,
        #[command(flatten)]
        solver: SolverArgs,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Print eigen-gap, recovery, certificate and growth diagnostics.
    Diagnose {
        instance: PathBuf,
        /// Solution CSV (an n x n matrix).
        solution: PathBuf,
        /// Also write the report to this file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Time QR (GOI) against eigendecomposition (nonconvex PGD) per iteration.
    Bench {
        instance: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        reps: Option<usize>,
        #[arg(long)]
        iters: Option<usize>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Solve every (value, seed) pair of the sweep grid and write table.csv.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct SolverArgs {
    /// Run config whose [solver] section provides defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_parser = ["goi", "pgd", "pgd-convex", "fw"])]
    solver: Option<String>,
    /// pca, random-projection, random-fantope or file:PATH.
    #[arg(long)]
    init: Option<String>,
    /// Step rule, e.g. empirical-lambda, inverse-beta, theorem-goi, fixed.
    #[arg(long)]
    step: Option<String>,
    #[arg(long)]
    step_value: Option<f64>,
    /// Duality-gap tolerance.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
}

impl SolverArgs {
    fn resolve(&self) -> fantope::Result<SolverSpec> {
        let mut spec = match &self.config {
            Some(path) => RunConfig::load(path)?.solver,
            None => SolverSpec::default(),
        };
        if let Some(s) = &self.solver {
            spec.method = s.parse::<Method>()?;
        }
        if let Some(init) = &self.init {
            spec.init = init.parse::<InitSpec>()?;
        }
        if let Some(kind) = &self.step {
            spec.step = Some(StepPolicy::parse(kind, self.step_value)?);
        }
        if let Some(tol) = self.tol {
            spec.stop.gap_tol = tol;
        }
        if let Some(it) = self.max_iters {
            spec.stop.max_iters = it;
        }
        Ok(spec)
    }
}

fn load_config(path: &Path, seed: Option<u64>, out: &Option<PathBuf>) -> fantope::Result<RunConfig> {
    let mut cfg = RunConfig::load(path)?;
    if let Some(s) = seed {
        cfg.seeds = vec![s];
    }
    if let Some(dir) = out {
        cfg.out_dir = dir.clone();
    }
    Ok(cfg)
}

fn exit_code(err: &Error) -> u8 {
    match err {
        Error::Config(_) | Error::FileNotFound(_) | Error::Parse { .. } | Error::Input(_) => 2,
        _ => 1,
    }
}

fn run(cli: Cli) -> fantope::Result<u8> {
    match cli.command {
        Command::Generate { config, seed, out } => {
            let cfg = load_config(&config, seed, &out)?;
            for dir in cmd_generate(&cfg)? {
                println!("{}", dir.display());
            }
        }
        Command::Solve { instance, solver, out } => {
            let spec = solver.resolve()?;
            let result = cmd_solve(&instance, &spec, &out)?;
            print!("{}", result.to_report().to_text());
            if result.termination != Termination::GapTol {
                eprintln!("solver stopped with {} (artifacts in {})", result.termination, out.display());
                return Ok(1);
            }
        }
        Command::Diagnose { instance, solution, out } => {
            let report = cmd_diagnose(&instance, &solution)?;
            print!("{}", report.to_text());
            if let Some(path) = out {
                io::write_key_values(&path, &report)?;
            }
        }
        Command::Bench { instance, config, reps, iters, out } => {
            let mut spec = match config {
                Some(path) => RunConfig::load(&path)?.bench,
                None => Default::default(),
            };
            spec.reps = reps.unwrap_or(spec.reps);
            spec.iters = iters.unwrap_or(spec.iters);
            if spec.reps == 0 || spec.iters == 0 {
                return Err(Error::Config("--reps and --iters must be >= 1".into()));
            }
            let summary = cmd_bench(&instance, &spec, &out)?;
            print!("{}", summary.to_report().to_text());
        }
        Command::Sweep { config, seed, out } => {
            let cfg = load_config(&config, seed, &out)?;
            let rows = cmd_sweep(&cfg)?;
            let axis = cfg.sweep.as_ref().map(|s| s.axis).expect("validated by cmd_sweep");
            print!("{}", fantope::harness::sweep_table_text(axis, &rows));
        }
    }
    Ok(0)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
