use std::fmt;
use std::str::FromStr;

use crate::error::Error;
use crate::spectral::SymMatrix;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Termination {
    GapTol,
    MaxIters,
    StalledStationary,
    DegenerateFrame,
}

impl Termination {
    pub fn as_str(&self) -> &'static str {
        match self {
            Termination::GapTol => "gap-tol",
            Termination::MaxIters => "max-iters",
            Termination::StalledStationary => "stalled-stationary",
            Termination::DegenerateFrame => "degenerate-frame",
        }
    }
}

impl fmt::Display for Termination {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Termination {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self, Error> {
        match s {
            "gap-tol" => Ok(Termination::GapTol),
            "max-iters" => Ok(Termination::MaxIters),
            "stalled-stationary" => Ok(Termination::StalledStationary),
            "degenerate-frame" => Ok(Termination::DegenerateFrame),
            other => Err(Error::Input(format!("unknown termination reason '{other}'"))),
        }
    }
}

/// One logged iterate. Record 0 is the initial point.
#[derive(Clone, Debug, PartialEq)]
pub struct IterRecord {
    pub iter: usize,
    pub f: f64,
    pub gap: f64,
    /// Nonconvex PGD: whether the Fantope projection of the shifted point
    /// is rank k. Convex PGD: whether the realized projection respects the
    /// rank budget (k when no budget is set).
    pub rank_flag: Option<bool>,
    /// Convex PGD only: rank of the Fantope projection that produced this
    /// iterate.
    pub proj_rank: Option<usize>,
    /// `||X_t - X_ref||_F`.
    pub dist_ref: Option<f64>,
    /// `||V_t - X_ref||_F` for the linear minimization vertex at `X_t`.
    pub vertex_dist_ref: Option<f64>,
    pub step: f64,
    /// Wall time of the factorization (QR or eigendecomposition) that
    /// produced this iterate; gradient and gap evaluations are excluded.
    pub fact_time_ns: u64,
}

#[derive(Clone, Debug)]
pub struct SolveTrace {
    pub records: Vec<IterRecord>,
    pub termination: Termination,
    /// Convex PGD with a rank budget: iterations whose projection exceeded it.
    pub budget_violations: usize,
    /// Populated only when iterates were requested.
    pub iterates: Vec<SymMatrix>,
    /// Message of the error that ended the run, if any.
    pub failure: Option<String>,
}

impl SolveTrace {
    pub fn iterations(&self) -> usize {
        self.records.len().saturating_sub(1)
    }

    pub fn last(&self) -> &IterRecord {
        self.records.last().expect("trace always holds the initial record")
    }

    pub fn final_gap(&self) -> f64 {
        self.last().gap
    }

    pub fn objective_values(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.f).collect()
    }
}
