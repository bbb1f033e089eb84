//! Iterative methods over `P_{n,k}` and the Fantope.
//!
//! All four solvers share one driver: it evaluates `f` and `grad f` at the
//! current iterate, computes the linear minimization vertex `V_t` (which
//! gives the duality gap `<X_t - V_t, grad f(X_t)>`), checks the stopping
//! rule, and then asks the method for the next iterate.

mod driver;
mod fw;
mod goi;
mod pgd;
mod trace;

use crate::error::{Error, Result};
use crate::geometry::lmo_decomp;
use crate::objective::{Objective, ObjectiveMetadata};
use crate::spectral::{sym_eig, SymMatrix};

pub use fw::{golden_section, solve_frank_wolfe, surrogate_step};
pub use goi::solve_goi;
pub use pgd::{solve_pgd_convex, solve_pgd_nonconvex, RankBudget};
pub use trace::{IterRecord, SolveTrace, Termination};

/// Step-size rule.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StepPolicy {
    Fixed(f64),
    /// `1 / beta`.
    InverseBeta,
    /// `1 / (5 max(beta, G))`.
    TheoremGoi,
    /// `1 / lambda_1(sum_i q_i q_i^T)`.
    EmpiricalLambda,
    /// Frank-Wolfe exact line search over `[0, 1]`.
    FwExactLineSearch,
    /// Frank-Wolfe minimizer of the `beta`-quadratic upper model.
    FwQuadraticSurrogate,
}

impl StepPolicy {
    /// The fixed step `eta` for the projection-type methods.
    pub fn fixed_step(&self, objective: &dyn Objective, meta: &ObjectiveMetadata) -> Result<f64> {
        let eta = match *self {
            StepPolicy::Fixed(v) => v,
            StepPolicy::InverseBeta => 1.0 / meta.beta,
            StepPolicy::TheoremGoi => 1.0 / (5.0 * meta.beta.max(meta.g_bound)),
            StepPolicy::EmpiricalLambda => {
                let lambda = objective.empirical_lambda().ok_or_else(|| {
                    Error::Input("empirical-lambda step needs a sample-based objective".into())
                })?;
                1.0 / lambda
            }
            StepPolicy::FwExactLineSearch | StepPolicy::FwQuadraticSurrogate => {
                return Err(Error::Input(format!("{self:?} is a Frank-Wolfe line search, not a fixed step")))
            }
        };
        if !(eta > 0.0 && eta.is_finite()) {
            return Err(Error::Input(format!("step size must be positive and finite, got {eta}")));
        }
        Ok(eta)
    }

    pub fn parse(kind: &str, value: Option<f64>) -> Result<Self> {
        match kind {
            "fixed" => value
                .map(StepPolicy::Fixed)
                .ok_or_else(|| Error::Config("step kind 'fixed' needs a value".into())),
            "inverse-beta" => Ok(StepPolicy::InverseBeta),
            "theorem-goi" => Ok(StepPolicy::TheoremGoi),
            "empirical-lambda" => Ok(StepPolicy::EmpiricalLambda),
            "fw-exact-linesearch" => Ok(StepPolicy::FwExactLineSearch),
            "fw-quadratic-surrogate" => Ok(StepPolicy::FwQuadraticSurrogate),
            other => Err(Error::Config(format!("unknown step kind '{other}'"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct StopRule {
    pub gap_tol: f64,
    pub max_iters: usize,
    /// An update moving the iterate by at most this much (Frobenius) while
    /// the gap is still above `gap_tol` ends the run as stalled.
    pub stall_tol: f64,
}

impl Default for StopRule {
    fn default() -> Self {
        Self { gap_tol: 1e-10, max_iters: 10_000, stall_tol: 1e-15 }
    }
}

#[derive(Clone, Debug, Default)]
pub struct SolveOptions {
    pub stop: StopRule,
    /// Point to log distances against; never computed implicitly.
    pub reference: Option<SymMatrix>,
    /// Overrides the objective's analytic metadata for step-size rules.
    pub metadata: Option<ObjectiveMetadata>,
    /// Keep every iterate in the trace.
    pub record_iterates: bool,
}

impl SolveOptions {
    pub(crate) fn metadata_for(&self, objective: &dyn Objective) -> ObjectiveMetadata {
        self.metadata.unwrap_or_else(|| objective.analytic_metadata())
    }
}

/// Final point plus the full iteration trace.
#[derive(Clone, Debug)]
pub struct SolveOutcome<T> {
    pub solution: T,
    pub trace: SolveTrace,
}

/// `dg(X) = <X - V, grad f(X)>` with `V` the linear minimization vertex.
///
/// Non-negative up to round-off, and an upper bound on `f(X) - f*` over the
/// Fantope.
pub fn duality_gap(x: &SymMatrix, objective: &dyn Objective, k: usize) -> Result<f64> {
    let (_, g) = objective.value_and_grad(x);
    let d = sym_eig(&g)?;
    let v = lmo_decomp(&d, k).matrix();
    Ok((x - &v).dot(&g))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::fantope_project;
    use crate::objective::QuadraticLoss;

    #[test]
    fn gap_zero_at_optimum() {
        let m = SymMatrix::from_diagonal(&[2.0, 1.0, 0.0, -1.0]);
        let loss = QuadraticLoss::new(m.clone());
        let (xs, _) = fantope_project(&m, 2).unwrap();
        assert!(duality_gap(xs.matrix(), &loss, 2).unwrap().abs() < 1e-9);
    }

    #[test]
    fn gap_bounds_suboptimality() {
        let m = SymMatrix::from_diagonal(&[0.9, 0.7, 0.2, 0.1]);
        let loss = QuadraticLoss::new(m.clone());
        let (xs, _) = fantope_project(&m, 1).unwrap();
        let fstar = loss.value(xs.matrix());
        let x = SymMatrix::from_diagonal(&[0.0, 0.0, 0.5, 0.5]);
        let gap = duality_gap(&x, &loss, 1).unwrap();
        assert!(gap >= loss.value(&x) - fstar - 1e-9);
        assert!(gap >= 0.0);
    }

    #[test]
    fn goi_safe_step_is_exact() {
        let loss = QuadraticLoss::new(SymMatrix::identity(3));
        let meta = ObjectiveMetadata::new(2.0, 7.0, crate::objective::MetadataSource::UserSupplied).unwrap();
        let eta = StepPolicy::TheoremGoi.fixed_step(&loss, &meta).unwrap();
        assert_eq!(eta, 1.0 / 35.0);
        assert_eq!(StepPolicy::InverseBeta.fixed_step(&loss, &meta).unwrap(), 0.5);
        assert!(StepPolicy::EmpiricalLambda.fixed_step(&loss, &meta).is_err());
        assert!(StepPolicy::Fixed(-1.0).fixed_step(&loss, &meta).is_err());
    }

    #[test]
    fn parse_policies() {
        assert_eq!(StepPolicy::parse("fixed", Some(0.5)).unwrap(), StepPolicy::Fixed(0.5));
        assert!(StepPolicy::parse("fixed", None).is_err());
        assert_eq!(StepPolicy::parse("theorem-goi", None).unwrap(), StepPolicy::TheoremGoi);
        assert!(StepPolicy::parse("nope", None).is_err());
    }
}
