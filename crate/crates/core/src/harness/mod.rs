//! Experiment driver behind the `fantope` binary: instance generation,
//! solves, diagnostics, timing and seed sweeps, all reading and writing
//! plain CSV and `key = value` files.

mod commands;
pub mod config;
pub mod io;

pub use commands::{
    aggregate, bench_problem, cmd_bench, cmd_diagnose, cmd_generate, cmd_solve, cmd_sweep, diagnose,
    high_precision_solution, pca_start, read_sweep_table, run_trial, solve_problem, sweep_table_text,
    BenchRow, BenchSummary, SweepRow, Trial, GROWTH_SAMPLES, REFERENCE_GAP_TOL, SWEEP_COLUMNS,
};
pub use config::{BenchSpec, InitSpec, Method, ReferenceSpec, RunConfig, SolverSpec, SweepAxis, SweepSpec};
pub use io::{load_problem, Problem, RunResult};
