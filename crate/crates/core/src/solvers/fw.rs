use crate::error::{Error, Result};
use crate::geometry::FantopePoint;
use crate::objective::Objective;

use super::driver::{drive, Update};
use super::{SolveOptions, SolveOutcome, StepPolicy};

/// Interval width at which the exact line search stops.
const LINESEARCH_TOL: f64 = 1e-10;

/// Minimizes a unimodal `f` on `[lo, hi]` to an interval of width `tol`.
///
/// Returns the best of the final midpoint and the two endpoints, so a
/// minimizer sitting exactly on a boundary is found exactly.
pub fn golden_section(f: impl Fn(f64) -> f64, lo: f64, hi: f64, tol: f64) -> f64 {
    let inv_phi = (5f64.sqrt() - 1.0) / 2.0;
    let (mut a, mut b) = (lo, hi);
    let mut c = b - inv_phi * (b - a);
    let mut d = a + inv_phi * (b - a);
    let (mut fc, mut fd) = (f(c), f(d));
    while b - a > tol {
        if fc <= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - inv_phi * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + inv_phi * (b - a);
            fd = f(d);
        }
    }
    let mid = 0.5 * (a + b);
    [(mid, f(mid)), (lo, f(lo)), (hi, f(hi))]
        .into_iter()
        .fold((mid, f64::INFINITY), |best, cand| if cand.1 < best.1 { cand } else { best })
        .0
}

/// Minimizer over `[0, 1]` of `eta * (-gap) + eta^2 * beta * dist_sq / 2`.
pub fn surrogate_step(gap: f64, beta: f64, dist_sq: f64) -> f64 {
    if dist_sq <= 0.0 {
        return 0.0;
    }
    (gap / (beta * dist_sq)).clamp(0.0, 1.0)
}

/// Frank-Wolfe over the Fantope with the vertex `V_t` from the linear
/// minimization oracle and either an exact or a surrogate line search.
pub fn solve_frank_wolfe(
    objective: &dyn Objective,
    k: usize,
    init: &FantopePoint,
    linesearch: &StepPolicy,
    opts: &SolveOptions,
) -> Result<SolveOutcome<FantopePoint>> {
    if init.k() != k || init.dim() != objective.dim() {
        return Err(Error::Input("Frank-Wolfe init does not match (n, k)".into()));
    }
    let beta = opts.metadata_for(objective).beta;
    let exact = match linesearch {
        StepPolicy::FwExactLineSearch => true,
        StepPolicy::FwQuadraticSurrogate => false,
        other => {
            return Err(Error::Input(format!(
                "Frank-Wolfe needs a line-search policy, got {other:?}"
            )))
        }
    };
    let (x, trace) = drive(objective, k, init.matrix().clone(), opts, |pt| {
        let v = pt.vertex.matrix();
        let eta = if exact {
            let seg = objective.segment(pt.x, &v);
            golden_section(seg, 0.0, 1.0, LINESEARCH_TOL)
        } else {
            surrogate_step(pt.gap, beta, (&v - pt.x).as_matrix().norm_squared())
        };
        Ok(Update {
            next: pt.x.lerp(&v, eta),
            step: eta,
            fact_time_ns: pt.grad_eig_ns,
            rank_flag: None,
            proj_rank: None,
            budget_violation: false,
        })
    })?;
    Ok(SolveOutcome { solution: FantopePoint::new_unchecked(x, k), trace })
}
