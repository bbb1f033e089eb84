//! Projections and linear minimization over the rank-k projection matrices
//! `P_{n,k}` and their convex hull, the Fantope `F_{n,k}`.

use crate::error::{Error, Result};
use crate::spectral::{sym_eig, OrthoFrame, SpectralDecomp, SymMatrix};

/// Eigenvalues above this count toward the rank of a projected point.
pub const RANK_TOL: f64 = 1e-9;

/// Relative gap below which `lambda_k` and `lambda_{k+1}` are treated as tied.
const TIE_TOL: f64 = 1e-10;

/// Bisection stops once `|sum_i clip(gamma_i - theta) - k| <= WATERFILL_TOL`.
const WATERFILL_TOL: f64 = 1e-12;

/// A point of `F_{n,k} = {X : 0 <= X <= I, Tr X = k}`.
#[derive(Clone, Debug)]
pub struct FantopePoint {
    matrix: SymMatrix,
    k: usize,
}

impl FantopePoint {
    /// Validates membership: eigenvalues in `[-1e-10, 1 + 1e-10]` and
    /// `|Tr X - k| <= 1e-10 * k`.
    pub fn new(matrix: SymMatrix, k: usize) -> Result<Self> {
        let n = matrix.dim();
        if k == 0 || k > n {
            return Err(Error::Input(format!("Fantope needs 1 <= k <= n, got k={k}, n={n}")));
        }
        let tr = matrix.trace();
        if (tr - k as f64).abs() > 1e-10 * k as f64 {
            return Err(Error::Input(format!("trace {tr} differs from k={k}")));
        }
        let d = sym_eig(&matrix)?;
        let (hi, lo) = (d.eigenvalues[0], d.eigenvalues[n - 1]);
        if lo < -1e-10 || hi > 1.0 + 1e-10 {
            return Err(Error::Input(format!(
                "eigenvalues [{lo:.3e}, {hi:.3e}] leave [0, 1]"
            )));
        }
        Ok(Self { matrix, k })
    }

    pub(crate) fn new_unchecked(matrix: SymMatrix, k: usize) -> Self {
        Self { matrix, k }
    }

    pub fn matrix(&self) -> &SymMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> SymMatrix {
        self.matrix
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn dim(&self) -> usize {
        self.matrix.dim()
    }
}

impl From<&ProjectionMatrix> for FantopePoint {
    fn from(p: &ProjectionMatrix) -> Self {
        FantopePoint::new_unchecked(p.matrix(), p.k())
    }
}

/// A rank-k orthogonal projection `Q Q^T`, carried by its frame.
#[derive(Clone, Debug)]
pub struct ProjectionMatrix {
    frame: OrthoFrame,
    /// False when the defining spectrum had a tie at the cut, so other
    /// frames give equally valid answers.
    pub unique: bool,
}

impl ProjectionMatrix {
    pub fn from_frame(frame: OrthoFrame) -> Self {
        Self { frame, unique: true }
    }

    pub fn frame(&self) -> &OrthoFrame {
        &self.frame
    }

    pub fn into_frame(self) -> OrthoFrame {
        self.frame
    }

    pub fn k(&self) -> usize {
        self.frame.ncols()
    }

    pub fn dim(&self) -> usize {
        self.frame.nrows()
    }

    pub fn matrix(&self) -> SymMatrix {
        self.frame.projection()
    }
}

/// Water-filling threshold and clipped spectrum of a Fantope projection.
#[derive(Clone, Debug)]
pub struct WaterfillResult {
    pub theta: f64,
    /// `min(max(gamma_i - theta, 0), 1)` in the (non-increasing) eigen order.
    pub clipped: Vec<f64>,
    /// Number of clipped values above [`RANK_TOL`].
    pub rank: usize,
}

fn clipped_sum(gammas: &[f64], theta: f64) -> f64 {
    gammas.iter().map(|g| (g - theta).clamp(0.0, 1.0)).sum()
}

/// Solves `sum_i min(max(gamma_i - theta, 0), 1) = k` by bisection.
///
/// The map is continuous and non-increasing in `theta`, equal to `n` at
/// `gamma_n - 1` and to `0` at `gamma_1`.
pub fn waterfill(gammas: &[f64], k: usize) -> WaterfillResult {
    let target = k as f64;
    let hi_g = gammas.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lo_g = gammas.iter().cloned().fold(f64::INFINITY, f64::min);
    let (mut lo, mut hi) = (lo_g - 1.0, hi_g);
    let mut theta = 0.5 * (lo + hi);
    for _ in 0..200 {
        theta = 0.5 * (lo + hi);
        let s = clipped_sum(gammas, theta);
        if (s - target).abs() <= WATERFILL_TOL {
            break;
        }
        if s > target {
            lo = theta;
        } else {
            hi = theta;
        }
        if hi - lo <= f64::EPSILON * hi.abs().max(lo.abs()).max(1.0) {
            theta = 0.5 * (lo + hi);
            break;
        }
    }
    let clipped: Vec<f64> = gammas.iter().map(|g| (g - theta).clamp(0.0, 1.0)).collect();
    let rank = clipped.iter().filter(|&&c| c > RANK_TOL).count();
    WaterfillResult { theta, clipped, rank }
}

fn check_k(n: usize, k: usize) -> Result<()> {
    if k == 0 || k > n {
        return Err(Error::Input(format!("need 1 <= k <= n, got k={k}, n={n}")));
    }
    Ok(())
}

/// Euclidean projection onto `F_{n,k}`.
pub fn fantope_project(x: &SymMatrix, k: usize) -> Result<(FantopePoint, WaterfillResult)> {
    check_k(x.dim(), k)?;
    let d = sym_eig(x)?;
    Ok(fantope_project_decomp(&d, k))
}

/// [`fantope_project`] from an existing decomposition.
pub fn fantope_project_decomp(d: &SpectralDecomp, k: usize) -> (FantopePoint, WaterfillResult) {
    let wf = waterfill(&d.eigenvalues, k);
    let m = d.compose(|i, _| wf.clipped[i]);
    (FantopePoint::new_unchecked(m, k), wf)
}

/// True iff the Fantope projection of the decomposed matrix has rank `<= r`,
/// tested as `sum_{i<=r} min(gamma_i - gamma_{r+1}, 1) >= k` without
/// computing the projection.
///
/// A slack of `1e-12` absorbs round-off when the point is exactly rank `r`.
pub fn projection_rank_at_most(d: &SpectralDecomp, k: usize, r: usize) -> bool {
    let n = d.dim();
    if r >= n {
        return true;
    }
    if r < k {
        return false;
    }
    let g = &d.eigenvalues;
    let s: f64 = g[..r].iter().map(|gi| (gi - g[r]).min(1.0)).sum();
    s >= k as f64 - 1e-12
}

fn is_tied(a: f64, b: f64, scale: f64) -> bool {
    (a - b).abs() <= TIE_TOL * scale.max(1.0)
}

fn scale_of(d: &SpectralDecomp) -> f64 {
    d.eigenvalues.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
}

/// Projection onto the span of the top-k eigenvectors of `x`, i.e. the
/// nearest point of `P_{n,k}` and a maximizer of `<P, X>` over it.
pub fn pnk_project(x: &SymMatrix, k: usize) -> Result<ProjectionMatrix> {
    check_k(x.dim(), k)?;
    Ok(pnk_project_decomp(&sym_eig(x)?, k))
}

pub fn pnk_project_decomp(d: &SpectralDecomp, k: usize) -> ProjectionMatrix {
    let n = d.dim();
    let unique = k == n || !is_tied(d.eigenvalues[k - 1], d.eigenvalues[k], scale_of(d));
    ProjectionMatrix { frame: d.top_frame(k), unique }
}

/// Linear minimization oracle: `argmin_{V in P_{n,k}} <V, G>`, the projection
/// onto the eigenvectors of the `k` smallest eigenvalues of `G`.
pub fn fantope_lmo(g: &SymMatrix, k: usize) -> Result<ProjectionMatrix> {
    check_k(g.dim(), k)?;
    Ok(lmo_decomp(&sym_eig(g)?, k))
}

pub fn lmo_decomp(d: &SpectralDecomp, k: usize) -> ProjectionMatrix {
    let n = d.dim();
    let unique = k == n || !is_tied(d.eigenvalues[n - k - 1], d.eigenvalues[n - k], scale_of(d));
    ProjectionMatrix { frame: d.bottom_frame(k), unique }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn projection_point_is_fixed() {
        let x = SymMatrix::from_diagonal(&[1.0, 1.0, 0.0, 0.0]);
        let (p, wf) = fantope_project(&x, 2).unwrap();
        assert!((p.matrix() - &x).norm() < 1e-12);
        assert_eq!(wf.rank, 2);
        assert!(wf.theta.abs() < 1e-11);
    }

    #[test]
    fn waterfill_hand_case() {
        // sum clip(gamma - theta) = 1 forces theta = 1 for gammas (2, 1, 0).
        let (p, wf) = fantope_project(&SymMatrix::from_diagonal(&[2.0, 1.0, 0.0]), 1).unwrap();
        assert_abs_diff_eq!(wf.theta, 1.0, epsilon = 1e-11);
        assert!((p.matrix() - &SymMatrix::from_diagonal(&[1.0, 0.0, 0.0])).norm() < 1e-11);
        assert_eq!(wf.rank, 1);
    }

    #[test]
    fn waterfill_symmetric_case() {
        let (p, wf) = fantope_project(&SymMatrix::from_diagonal(&[0.6, 0.6, 0.6]), 1).unwrap();
        assert_abs_diff_eq!(wf.theta, 0.6 - 1.0 / 3.0, epsilon = 1e-11);
        let third = 1.0 / 3.0;
        assert!((p.matrix() - &SymMatrix::from_diagonal(&[third; 3])).norm() < 1e-11);
        assert_eq!(wf.rank, 3);
        let s: f64 = wf.clipped.iter().sum();
        assert_abs_diff_eq!(s, 1.0, epsilon = 1e-10);
    }

    #[test]
    fn rank_test_cases() {
        let d = sym_eig(&SymMatrix::from_diagonal(&[2.0, 1.0, 0.0])).unwrap();
        assert!(projection_rank_at_most(&d, 1, 1));
        let d = sym_eig(&SymMatrix::from_diagonal(&[0.6, 0.6, 0.6])).unwrap();
        assert!(!projection_rank_at_most(&d, 1, 1));
        assert!(projection_rank_at_most(&d, 1, 3));
        let d = sym_eig(&SymMatrix::from_diagonal(&[1.0, 1.0, 0.0, 0.0])).unwrap();
        assert!(projection_rank_at_most(&d, 2, 2));
    }

    #[test]
    fn pnk_cases() {
        let p = pnk_project(&SymMatrix::from_diagonal(&[3.0, 2.0, 1.0]), 2).unwrap();
        assert!(p.unique);
        assert!((&p.matrix() - &SymMatrix::from_diagonal(&[1.0, 1.0, 0.0])).norm() < 1e-14);

        let p = pnk_project(&SymMatrix::identity(3), 1).unwrap();
        assert!(!p.unique);
        let m = p.matrix();
        assert_abs_diff_eq!(m.trace(), 1.0, epsilon = 1e-12);
        assert!((&SymMatrix::symmetrize(m.as_matrix() * m.as_matrix()) - &m).norm() < 1e-12);
    }

    #[test]
    fn lmo_cases() {
        let v = fantope_lmo(&SymMatrix::from_diagonal(&[3.0, 2.0, 1.0]), 1).unwrap();
        assert!(v.unique);
        assert!((&v.matrix() - &SymMatrix::from_diagonal(&[0.0, 0.0, 1.0])).norm() < 1e-14);

        let g = &SymMatrix::identity(4) * -1.0;
        let v = fantope_lmo(&g, 2).unwrap();
        assert!(!v.unique);
        assert_abs_diff_eq!(v.matrix().dot(&g), -2.0, epsilon = 1e-12);
    }

    #[test]
    fn k_out_of_range() {
        let x = SymMatrix::identity(3);
        assert!(fantope_project(&x, 0).is_err());
        assert!(pnk_project(&x, 4).is_err());
    }

    #[test]
    fn fantope_point_validation() {
        assert!(FantopePoint::new(SymMatrix::from_diagonal(&[0.5, 0.5, 0.0]), 1).is_ok());
        assert!(FantopePoint::new(SymMatrix::from_diagonal(&[1.5, -0.5, 0.0]), 1).is_err());
        assert!(FantopePoint::new(SymMatrix::from_diagonal(&[0.5, 0.2, 0.0]), 1).is_err());
    }
}
