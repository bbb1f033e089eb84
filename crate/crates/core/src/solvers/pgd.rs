use std::time::Instant;

use crate::error::{Error, Result};
use crate::geometry::{
    fantope_project_decomp, pnk_project_decomp, projection_rank_at_most, FantopePoint,
    ProjectionMatrix,
};
use crate::objective::Objective;
use crate::spectral::sym_eig;

use super::driver::{drive, Update};
use super::{SolveOptions, SolveOutcome, StepPolicy};

/// Nonconvex projected gradient: `X_{t+1} = Pi_{P_{n,k}}[X_t - eta grad f(X_t)]`.
///
/// The rank flag of each record says whether the Fantope projection of the
/// same shifted point is rank k, i.e. whether this step coincides with a
/// convex projected gradient step.
pub fn solve_pgd_nonconvex(
    objective: &dyn Objective,
    k: usize,
    init: &ProjectionMatrix,
    policy: &StepPolicy,
    opts: &SolveOptions,
) -> Result<SolveOutcome<ProjectionMatrix>> {
    if init.k() != k || init.dim() != objective.dim() {
        return Err(Error::Input(format!(
            "PGD init is rank {} in dim {}, expected rank {k} in dim {}",
            init.k(),
            init.dim(),
            objective.dim()
        )));
    }
    let eta = policy.fixed_step(objective, &opts.metadata_for(objective))?;
    let mut current = init.clone();
    let (_, trace) = drive(objective, k, init.matrix(), opts, |pt| {
        let w = pt.x - &(pt.grad * eta);
        let start = Instant::now();
        let d = sym_eig(&w)?;
        let fact_time_ns = start.elapsed().as_nanos() as u64;
        let coincides = projection_rank_at_most(&d, k, k);
        current = pnk_project_decomp(&d, k);
        Ok(Update {
            next: current.matrix(),
            step: eta,
            fact_time_ns,
            rank_flag: Some(coincides),
            proj_rank: None,
            budget_violation: false,
        })
    })?;
    Ok(SolveOutcome { solution: current, trace })
}

/// Convex projected gradient: `X_{t+1} = Pi_{F_{n,k}}[X_t - eta grad f(X_t)]`.
///
/// With a rank budget `r'`, each step first checks whether the projection has
/// rank at most `r'` (so a rank-`r'` eigensolver would suffice) and counts
/// violations; the full projection is used either way.
pub fn solve_pgd_convex(
    objective: &dyn Objective,
    k: usize,
    init: &FantopePoint,
    policy: &StepPolicy,
    budget: Option<RankBudget>,
    opts: &SolveOptions,
) -> Result<SolveOutcome<FantopePoint>> {
    if init.k() != k || init.dim() != objective.dim() {
        return Err(Error::Input("convex PGD init does not match (n, k)".into()));
    }
    if let Some(b) = budget {
        b.validate(k, objective.dim())?;
    }
    let eta = policy.fixed_step(objective, &opts.metadata_for(objective))?;
    let limit = budget.map_or(k, |b| b.r_prime);
    let (x, trace) = drive(objective, k, init.matrix().clone(), opts, |pt| {
        let w = pt.x - &(pt.grad * eta);
        let start = Instant::now();
        let d = sym_eig(&w)?;
        let fact_time_ns = start.elapsed().as_nanos() as u64;
        let violation = budget.is_some() && !projection_rank_at_most(&d, k, limit);
        let (next, wf) = fantope_project_decomp(&d, k);
        Ok(Update {
            next: next.into_matrix(),
            step: eta,
            fact_time_ns,
            rank_flag: Some(wf.rank <= limit),
            proj_rank: Some(wf.rank),
            budget_violation: violation,
        })
    })?;
    Ok(SolveOutcome { solution: FantopePoint::new_unchecked(x, k), trace })
}

/// Rank cap `r'` with `k <= r' <= n - 1` for the convex PGD projections.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct RankBudget {
    pub r_prime: usize,
}

impl RankBudget {
    pub fn validate(&self, k: usize, n: usize) -> Result<()> {
        if self.r_prime < k || self.r_prime + 1 > n {
            return Err(Error::Input(format!(
                "rank budget r'={} outside [k, n-1] = [{k}, {}]",
                self.r_prime,
                n.saturating_sub(1)
            )));
        }
        Ok(())
    }
}
