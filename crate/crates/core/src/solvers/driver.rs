use std::time::Instant;

use crate::error::{Error, Result};
use crate::geometry::{lmo_decomp, ProjectionMatrix};
use crate::objective::Objective;
use crate::spectral::{sym_eig, SymMatrix};

use super::trace::{IterRecord, SolveTrace, Termination};
use super::SolveOptions;

/// State at `X_t` handed to a method's update rule.
pub(super) struct Point<'a> {
    pub x: &'a SymMatrix,
    pub grad: &'a SymMatrix,
    pub vertex: &'a ProjectionMatrix,
    pub gap: f64,
    /// Time spent decomposing the gradient at this point.
    pub grad_eig_ns: u64,
}

pub(super) struct Update {
    pub next: SymMatrix,
    pub step: f64,
    pub fact_time_ns: u64,
    pub rank_flag: Option<bool>,
    pub proj_rank: Option<usize>,
    pub budget_violation: bool,
}

struct Evaluated {
    f: f64,
    grad: SymMatrix,
    vertex: ProjectionMatrix,
    gap: f64,
    eig_ns: u64,
}

fn evaluate(objective: &dyn Objective, x: &SymMatrix, k: usize) -> Result<Evaluated> {
    let (f, grad) = objective.value_and_grad(x);
    if !f.is_finite() || !grad.is_finite() {
        return Err(Error::Input("objective returned a non-finite value or gradient".into()));
    }
    let start = Instant::now();
    let decomp = sym_eig(&grad)?;
    let eig_ns = start.elapsed().as_nanos() as u64;
    let vertex = lmo_decomp(&decomp, k);
    let gap = (x - &vertex.matrix()).dot(&grad);
    Ok(Evaluated { f, grad, vertex, gap, eig_ns })
}

/// Runs `update` until the gap, iteration, or stall rule fires.
///
/// An `Err(Error::DegenerateFrame)` from `update` ends the run with that
/// termination reason and the trace so far; other errors propagate.
pub(super) fn drive(
    objective: &dyn Objective,
    k: usize,
    x0: SymMatrix,
    opts: &SolveOptions,
    mut update: impl FnMut(&Point<'_>) -> Result<Update>,
) -> Result<(SymMatrix, SolveTrace)> {
    if x0.dim() != objective.dim() {
        return Err(Error::Input(format!(
            "initial point is {0}x{0}, objective expects {1}x{1}",
            x0.dim(),
            objective.dim()
        )));
    }
    let stop = opts.stop;
    let reference = opts.reference.as_ref();
    let dist = |x: &SymMatrix| reference.map(|r| (x - r).norm());

    let mut x = x0;
    let mut cur = evaluate(objective, &x, k)?;
    let mut trace = SolveTrace {
        records: vec![IterRecord {
            iter: 0,
            f: cur.f,
            gap: cur.gap,
            rank_flag: None,
            proj_rank: None,
            dist_ref: dist(&x),
            vertex_dist_ref: reference.map(|r| (&cur.vertex.matrix() - r).norm()),
            step: 0.0,
            fact_time_ns: 0,
        }],
        termination: Termination::MaxIters,
        budget_violations: 0,
        iterates: Vec::new(),
        failure: None,
    };
    if opts.record_iterates {
        trace.iterates.push(x.clone());
    }

    let mut iter = 0;
    loop {
        if cur.gap <= stop.gap_tol {
            trace.termination = Termination::GapTol;
            break;
        }
        if iter >= stop.max_iters {
            trace.termination = Termination::MaxIters;
            break;
        }
        let point = Point {
            x: &x,
            grad: &cur.grad,
            vertex: &cur.vertex,
            gap: cur.gap,
            grad_eig_ns: cur.eig_ns,
        };
        let up = match update(&point) {
            Ok(up) => up,
            Err(Error::DegenerateFrame(msg)) => {
                trace.termination = Termination::DegenerateFrame;
                trace.failure = Some(msg);
                break;
            }
            Err(e) => return Err(e),
        };
        iter += 1;
        let moved = (&up.next - &x).norm();
        x = up.next;
        cur = evaluate(objective, &x, k)?;
        if up.budget_violation {
            trace.budget_violations += 1;
        }
        trace.records.push(IterRecord {
            iter,
            f: cur.f,
            gap: cur.gap,
            rank_flag: up.rank_flag,
            proj_rank: up.proj_rank,
            dist_ref: dist(&x),
            vertex_dist_ref: reference.map(|r| (&cur.vertex.matrix() - r).norm()),
            step: up.step,
            fact_time_ns: up.fact_time_ns,
        });
        if opts.record_iterates {
            trace.iterates.push(x.clone());
        }
        if moved <= stop.stall_tol && cur.gap > stop.gap_tol {
            trace.termination = Termination::StalledStationary;
            break;
        }
    }
    Ok((x, trace))
}
