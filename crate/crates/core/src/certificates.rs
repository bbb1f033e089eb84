//! Optimality diagnostics at a candidate solution `X*`: the eigen-gap of
//! `grad f(X*)`, an explicit strictly complementary dual pair `(Z1, Z2, s)`
//! with `grad f(X*) = Z1 - Z2 + s I`, KKT residuals, and a quadratic-growth
//! probe.

use std::fmt::Write as _;

use rand::Rng;

use crate::datagen::random_fantope_point;
use crate::error::{Error, Result};
use crate::geometry::{lmo_decomp, ProjectionMatrix, RANK_TOL};
use crate::objective::Objective;
use crate::spectral::{sym_eig, SymMatrix};

/// Gap below which the spectrum is treated as having no gap.
pub const DEFAULT_GAP_TOL: f64 = 1e-9;

/// `||X* - V||_F` above which `X*` is not the bottom-k eigenprojection of its
/// own gradient.
pub const DEFAULT_ALIGN_TOL: f64 = 1e-3;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GapReport {
    /// `lambda_{n-k} - lambda_{n-k+1}` of `grad f(X)` (1-based, non-increasing).
    pub gap: f64,
    pub lambda_nk: f64,
    pub lambda_nk1: f64,
    /// Smallest `r >= k` with `mu_r - mu_{r+1} > gap_tol` for the eigenvalues
    /// `mu` of `-grad f(X)`; `n` when no such gap exists.
    pub r_star: usize,
}

pub fn eigen_gap(x: &SymMatrix, objective: &dyn Objective, k: usize) -> Result<GapReport> {
    let (_, g) = objective.value_and_grad(x);
    gap_of_gradient(&g, k, DEFAULT_GAP_TOL)
}

pub fn gap_of_gradient(g: &SymMatrix, k: usize, gap_tol: f64) -> Result<GapReport> {
    let n = g.dim();
    if k == 0 || k >= n {
        return Err(Error::Input(format!("eigen-gap needs 1 <= k < n, got k={k}, n={n}")));
    }
    let lam = sym_eig(g)?.eigenvalues;
    // mu_r = -lambda_{n-r+1}, so mu_r - mu_{r+1} = lambda_{n-r} - lambda_{n-r+1}.
    let r_star = (k..n)
        .find(|&r| lam[n - r - 1] - lam[n - r] > gap_tol)
        .unwrap_or(n);
    Ok(GapReport {
        gap: lam[n - k - 1] - lam[n - k],
        lambda_nk: lam[n - k - 1],
        lambda_nk1: lam[n - k],
        r_star,
    })
}

/// Dual matrices with `grad f(X*) = Z1 - Z2 + s I`, `Z1, Z2 >= 0`.
#[derive(Clone, Debug)]
pub struct DualCertificate {
    pub z1: SymMatrix,
    pub z2: SymMatrix,
    pub s: f64,
}

/// Builds the strictly complementary dual pair at `X*`.
///
/// With `grad f(X*) = sum_i lambda_i u_i u_i^T` and `s` the midpoint of
/// `[lambda_{n-k+1}, lambda_{n-k}]`: `Z1` keeps the top `n-k` eigenpairs
/// shifted by `-s`, and `Z2` the bottom `k` reflected as `s - lambda_i`.
/// Both are PSD with ranks `n-k` and `k`, and `Z1 Z2 = 0`.
pub fn build_dual_certificate(
    x_star: &ProjectionMatrix,
    objective: &dyn Objective,
) -> Result<DualCertificate> {
    build_dual_certificate_with(x_star, objective, DEFAULT_GAP_TOL, DEFAULT_ALIGN_TOL)
}

pub fn build_dual_certificate_with(
    x_star: &ProjectionMatrix,
    objective: &dyn Objective,
    gap_tol: f64,
    align_tol: f64,
) -> Result<DualCertificate> {
    let (n, k) = (x_star.dim(), x_star.k());
    if k >= n {
        return Err(Error::Input(format!("certificate needs k < n, got k={k}, n={n}")));
    }
    let x = x_star.matrix();
    let (_, g) = objective.value_and_grad(&x);
    let d = sym_eig(&g)?;
    let lam = &d.eigenvalues;
    let gap = lam[n - k - 1] - lam[n - k];
    if !(gap > gap_tol) {
        return Err(Error::NoCertificate { gap, tol: gap_tol });
    }
    let misalign = (&lmo_decomp(&d, k).matrix() - &x).norm();
    if misalign > align_tol {
        return Err(Error::Misaligned(misalign));
    }
    let s = 0.5 * (lam[n - k - 1] + lam[n - k]);
    let z1 = d.compose(|i, l| if i < n - k { l - s } else { 0.0 });
    let z2 = d.compose(|i, l| if i >= n - k { s - l } else { 0.0 });
    Ok(DualCertificate { z1, z2, s })
}

/// Individual KKT violations; [`KktResidual::max`] is the scalar residual.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KktResidual {
    /// `||grad f(X) - Z1 + Z2 - s I||_F`.
    pub stationarity: f64,
    /// `|<Z1, X>|`.
    pub complementarity_z1: f64,
    /// `|<Z2, I - X>|`.
    pub complementarity_z2: f64,
    /// `max(0, -lambda_min(Z1), -lambda_min(Z2))`.
    pub dual_infeasibility: f64,
    /// Largest violation of `0 <= X <= I`, `Tr X = k`.
    pub primal_infeasibility: f64,
}

impl KktResidual {
    pub fn max(&self) -> f64 {
        [
            self.stationarity,
            self.complementarity_z1,
            self.complementarity_z2,
            self.dual_infeasibility,
            self.primal_infeasibility,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }
}

pub fn kkt_residuals(
    x: &SymMatrix,
    cert: &DualCertificate,
    objective: &dyn Objective,
    k: usize,
) -> Result<KktResidual> {
    let n = x.dim();
    let (_, g) = objective.value_and_grad(x);
    let stationarity = (&(&g - &cert.z1) + &cert.z2).shifted(-cert.s).norm();
    let complementarity_z1 = cert.z1.dot(x).abs();
    let complementarity_z2 = (cert.z2.trace() - cert.z2.dot(x)).abs();
    let min_eig = |m: &SymMatrix| sym_eig(m).map(|d| d.eigenvalues[n - 1]);
    let dual_infeasibility = 0.0_f64.max(-min_eig(&cert.z1)?).max(-min_eig(&cert.z2)?);
    let dx = sym_eig(x)?;
    let primal_infeasibility = 0.0_f64
        .max(-dx.eigenvalues[n - 1])
        .max(dx.eigenvalues[0] - 1.0)
        .max((x.trace() - k as f64).abs());
    Ok(KktResidual {
        stationarity,
        complementarity_z1,
        complementarity_z2,
        dual_infeasibility,
        primal_infeasibility,
    })
}

/// Max of all KKT violations of `(X, Z1, Z2, s)`.
pub fn kkt_residual(
    x: &SymMatrix,
    cert: &DualCertificate,
    objective: &dyn Objective,
    k: usize,
) -> Result<f64> {
    Ok(kkt_residuals(x, cert, objective, k)?.max())
}

/// Number of eigenvalues above [`RANK_TOL`] in absolute value.
pub fn numerical_rank(m: &SymMatrix) -> Result<usize> {
    Ok(sym_eig(m)?.eigenvalues.iter().filter(|v| v.abs() > RANK_TOL).count())
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GrowthReport {
    pub samples: usize,
    /// Count of samples with `f(X) - f* < (delta/2) ||X - X*||^2 - 1e-8`.
    pub violations: usize,
    /// `min (f(X) - f* - (delta/2) ||X - X*||^2)` over the samples.
    pub worst_slack: f64,
}

/// Samples Fantope points and checks `f(X) - f* >= (delta/2) ||X - X*||_F^2`.
///
/// Each sample mixes `X*` with three random projection matrices using random
/// convex weights. Violations are counted, not raised.
pub fn quadratic_growth_probe<R: Rng + ?Sized>(
    x_star: &SymMatrix,
    objective: &dyn Objective,
    k: usize,
    delta: f64,
    samples: usize,
    rng: &mut R,
) -> GrowthReport {
    let n = x_star.dim();
    let fstar = objective.value(x_star);
    let mut worst = f64::INFINITY;
    let mut violations = 0;
    for _ in 0..samples {
        let other = random_fantope_point(n, k, 3, rng).into_matrix();
        let w: f64 = rng.random();
        let x = x_star.lerp(&other, w);
        let slack = objective.value(&x) - fstar - 0.5 * delta * (&x - x_star).as_matrix().norm_squared();
        if slack < -1e-8 {
            violations += 1;
        }
        worst = worst.min(slack);
    }
    GrowthReport { samples, violations, worst_slack: if samples == 0 { 0.0 } else { worst } }
}

/// Flat `key = value` block consumed by the harness.
#[derive(Clone, Debug, Default)]
pub struct DiagnosticReport {
    pub entries: Vec<(String, String)>,
}

impl DiagnosticReport {
    pub fn push(&mut self, key: &str, value: impl ToString) {
        self.entries.push((key.to_string(), value.to_string()));
    }

    pub fn get(&self, key: &str) -> Option<&str> {
        self.entries.iter().find(|(k, _)| k == key).map(|(_, v)| v.as_str())
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.entries {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    pub fn parse(text: &str) -> Self {
        let entries = text
            .lines()
            .filter_map(|l| l.split_once('='))
            .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
            .collect();
        Self { entries }
    }
}
