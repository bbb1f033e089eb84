use std::time::Instant;

use crate::error::{Error, Result};
use crate::geometry::ProjectionMatrix;
use crate::objective::Objective;
use crate::spectral::{qr_orthonormalize, OrthoFrame};

use super::driver::{drive, Update};
use super::{SolveOptions, SolveOutcome, StepPolicy};

/// Gradient orthogonal iteration.
///
/// Each step forms `Z = Q_t - eta * grad f(Q_t Q_t^T) Q_t` (equivalently
/// `W_{t+1} Q_t` with `W_{t+1} = Y_t - eta * grad f(Y_t)`) and
/// re-orthonormalizes it with a single thin QR. Every iterate is an exact
/// rank-k projection.
pub fn solve_goi(
    objective: &dyn Objective,
    k: usize,
    init: &OrthoFrame,
    policy: &StepPolicy,
    opts: &SolveOptions,
) -> Result<SolveOutcome<ProjectionMatrix>> {
    if init.ncols() != k || init.nrows() != objective.dim() {
        return Err(Error::Input(format!(
            "GOI init frame is {}x{}, expected {}x{k}",
            init.nrows(),
            init.ncols(),
            objective.dim()
        )));
    }
    let eta = policy.fixed_step(objective, &opts.metadata_for(objective))?;
    let mut frame = init.clone();
    let (_, trace) = drive(objective, k, init.projection(), opts, |pt| {
        let q = frame.as_matrix();
        let z = q - (pt.grad.as_matrix() * q) * eta;
        let start = Instant::now();
        let (next, _) = qr_orthonormalize(&z)?;
        let fact_time_ns = start.elapsed().as_nanos() as u64;
        let y = next.projection();
        frame = next;
        Ok(Update {
            next: y,
            step: eta,
            fact_time_ns,
            rank_flag: None,
            proj_rank: None,
            budget_violation: false,
        })
    })?;
    Ok(SolveOutcome { solution: ProjectionMatrix::from_frame(frame), trace })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objective::QuadraticLoss;
    use crate::solvers::Termination;
    use crate::spectral::SymMatrix;

    #[test]
    fn optimum_is_fixed_point() {
        let frame = OrthoFrame::canonical(4, &[1, 3]);
        let loss = QuadraticLoss::new(frame.projection());
        let out = solve_goi(&loss, 2, &frame, &StepPolicy::Fixed(0.5), &SolveOptions::default()).unwrap();
        assert_eq!(out.trace.termination, Termination::GapTol);
        assert_eq!(out.trace.iterations(), 0);
        assert!((&out.solution.matrix() - &frame.projection()).norm() < 1e-15);
    }

    #[test]
    fn saddle_frame_stalls() {
        // grad at e2 e2^T is diag(-1, 1, 0), so Z = 0.5 e2 and the frame
        // never moves although the gap is 2.
        let loss = QuadraticLoss::new(SymMatrix::from_diagonal(&[1.0, 0.0, 0.0]));
        let init = OrthoFrame::canonical(3, &[1]);
        let out = solve_goi(&loss, 1, &init, &StepPolicy::Fixed(0.5), &SolveOptions::default()).unwrap();
        assert_eq!(out.trace.termination, Termination::StalledStationary);
        assert_eq!(out.trace.iterations(), 1);
        assert!((out.trace.final_gap() - 2.0).abs() < 1e-12);
        assert!((&out.solution.matrix() - &init.projection()).norm() < 1e-15);
    }

    #[test]
    fn degenerate_step_reports_termination() {
        // grad at e2 e2^T is diag(-1, 2, 0), so eta = 0.5 sends Z to zero.
        let loss = QuadraticLoss::new(SymMatrix::from_diagonal(&[1.0, -1.0, 0.0]));
        let init = OrthoFrame::canonical(3, &[1]);
        let out = solve_goi(&loss, 1, &init, &StepPolicy::Fixed(0.5), &SolveOptions::default()).unwrap();
        assert_eq!(out.trace.termination, Termination::DegenerateFrame);
        assert!(out.trace.failure.is_some());
        assert_eq!(out.trace.records.len(), 1);
    }

    #[test]
    fn rejects_mismatched_frame() {
        let loss = QuadraticLoss::new(SymMatrix::identity(3));
        let init = OrthoFrame::canonical(3, &[0, 1]);
        assert!(solve_goi(&loss, 1, &init, &StepPolicy::Fixed(0.5), &SolveOptions::default()).is_err());
    }
}
