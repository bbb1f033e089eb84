//! Dense symmetric kernels: the matrix newtypes, full eigendecomposition,
//! sign-normalized thin QR, and classical orthogonal (subspace) iteration.

use std::ops::{Add, Mul, Sub};

use nalgebra::{DMatrix, SymmetricEigen};

use crate::error::{Error, Result};

/// Dense real symmetric `n x n` matrix.
///
/// Every constructor symmetrizes its input as `(A + A^T) / 2`, so
/// `m[(i, j)] == m[(j, i)]` holds bit-for-bit.
#[derive(Clone, Debug, PartialEq)]
pub struct SymMatrix(DMatrix<f64>);

impl SymMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::Input(format!(
                "symmetric matrix must be square, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.nrows() == 0 {
            return Err(Error::Input("symmetric matrix must have dim >= 1".into()));
        }
        Ok(Self::symmetrize(m))
    }

    /// Symmetrizes without shape checks. Panics on a non-square input.
    pub fn symmetrize(m: DMatrix<f64>) -> Self {
        assert_eq!(m.nrows(), m.ncols(), "symmetrize needs a square matrix");
        let t = m.transpose();
        Self((m + t) * 0.5)
    }

    /// Wraps a matrix already known to be exactly symmetric.
    pub(crate) fn from_exact(m: DMatrix<f64>) -> Self {
        debug_assert!(m.nrows() == m.ncols());
        Self(m)
    }

    pub fn zeros(n: usize) -> Self {
        Self(DMatrix::zeros(n, n))
    }

    pub fn identity(n: usize) -> Self {
        Self(DMatrix::identity(n, n))
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        let n = diag.len();
        Self(DMatrix::from_fn(n, n, |i, j| if i == j { diag[i] } else { 0.0 }))
    }

    pub fn from_fn(n: usize, f: impl FnMut(usize, usize) -> f64) -> Self {
        Self::symmetrize(DMatrix::from_fn(n, n, f))
    }

    pub fn dim(&self) -> usize {
        self.0.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    /// Frobenius inner product `<A, B> = Tr(A B)`.
    pub fn dot(&self, other: &SymMatrix) -> f64 {
        self.0.dot(&other.0)
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        self.0.norm()
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    /// `(1 - t) * self + t * other`.
    pub fn lerp(&self, other: &SymMatrix, t: f64) -> SymMatrix {
        SymMatrix(&self.0 * (1.0 - t) + &other.0 * t)
    }

    /// `self + alpha * I`.
    pub fn shifted(&self, alpha: f64) -> SymMatrix {
        let mut m = self.0.clone();
        for i in 0..m.nrows() {
            m[(i, i)] += alpha;
        }
        SymMatrix(m)
    }

    /// Largest absolute eigenvalue.
    pub fn spectral_norm(&self) -> f64 {
        let eig = SymmetricEigen::new(self.0.clone());
        eig.eigenvalues.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
    }
}

impl Add for &SymMatrix {
    type Output = SymMatrix;
    fn add(self, rhs: &SymMatrix) -> SymMatrix {
        SymMatrix(&self.0 + &rhs.0)
    }
}

impl Sub for &SymMatrix {
    type Output = SymMatrix;
    fn sub(self, rhs: &SymMatrix) -> SymMatrix {
        SymMatrix(&self.0 - &rhs.0)
    }
}

impl Mul<f64> for &SymMatrix {
    type Output = SymMatrix;
    fn mul(self, rhs: f64) -> SymMatrix {
        SymMatrix(&self.0 * rhs)
    }
}

/// `n x k` matrix with orthonormal columns.
#[derive(Clone, Debug, PartialEq)]
pub struct OrthoFrame(DMatrix<f64>);

impl OrthoFrame {
    /// Wraps `q`, re-orthonormalizing it when `||Q^T Q - I||_F > 1e-12 * k`.
    pub fn new(q: DMatrix<f64>) -> Result<Self> {
        if q.ncols() == 0 || q.ncols() > q.nrows() {
            return Err(Error::Input(format!(
                "frame must have 1 <= k <= n columns, got {}x{}",
                q.nrows(),
                q.ncols()
            )));
        }
        if !q.iter().all(|v| v.is_finite()) {
            return Err(Error::Input("frame has non-finite entries".into()));
        }
        let frame = OrthoFrame(q);
        if frame.orthonormality_defect() <= 1e-12 * frame.ncols() as f64 {
            Ok(frame)
        } else {
            Ok(qr_orthonormalize(&frame.0)?.0)
        }
    }

    pub(crate) fn from_orthonormal(q: DMatrix<f64>) -> Self {
        OrthoFrame(q)
    }

    /// Frame built from the canonical basis vectors `e_i`, `i in cols`.
    pub fn canonical(n: usize, cols: &[usize]) -> Self {
        let mut q = DMatrix::zeros(n, cols.len());
        for (j, &i) in cols.iter().enumerate() {
            q[(i, j)] = 1.0;
        }
        OrthoFrame(q)
    }

    pub fn nrows(&self) -> usize {
        self.0.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.0.ncols()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.0
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.0
    }

    /// `||Q^T Q - I||_F`.
    pub fn orthonormality_defect(&self) -> f64 {
        let k = self.0.ncols();
        (self.0.transpose() * &self.0 - DMatrix::<f64>::identity(k, k)).norm()
    }

    /// The projection matrix `Q Q^T`.
    pub fn projection(&self) -> SymMatrix {
        SymMatrix::symmetrize(&self.0 * self.0.transpose())
    }

    /// `||Q1 Q1^T - Q2 Q2^T||_F` without forming either projection.
    ///
    /// For equal ranks this is `sqrt(2) ||(I - Q2 Q2^T) Q1||_F`, which stays
    /// accurate for nearby subspaces.
    pub fn subspace_distance(&self, other: &OrthoFrame) -> f64 {
        if self.ncols() == other.ncols() {
            let residual = &self.0 - &other.0 * (other.0.transpose() * &self.0);
            return std::f64::consts::SQRT_2 * residual.norm();
        }
        let overlap = (self.0.transpose() * &other.0).norm_squared();
        let sq = self.ncols() as f64 + other.ncols() as f64 - 2.0 * overlap;
        sq.max(0.0).sqrt()
    }
}

/// Eigenvalues sorted non-increasing with matching orthonormal eigenvectors.
#[derive(Clone, Debug)]
pub struct SpectralDecomp {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: OrthoFrame,
}

impl SpectralDecomp {
    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// Columns `i in range` of the eigenvector matrix as a frame.
    pub fn frame(&self, range: std::ops::Range<usize>) -> OrthoFrame {
        let q = self.eigenvectors.as_matrix();
        OrthoFrame::from_orthonormal(q.columns(range.start, range.len()).into_owned())
    }

    /// Eigenvectors of the `k` largest eigenvalues.
    pub fn top_frame(&self, k: usize) -> OrthoFrame {
        self.frame(0..k)
    }

    /// Eigenvectors of the `k` smallest eigenvalues.
    pub fn bottom_frame(&self, k: usize) -> OrthoFrame {
        let n = self.dim();
        self.frame(n - k..n)
    }

    /// `sum_i f(lambda_i) u_i u_i^T`.
    pub fn compose(&self, mut f: impl FnMut(usize, f64) -> f64) -> SymMatrix {
        let u = self.eigenvectors.as_matrix();
        let mut scaled = u.clone();
        for (j, &lam) in self.eigenvalues.iter().enumerate() {
            let w = f(j, lam);
            scaled.column_mut(j).scale_mut(w);
        }
        SymMatrix::symmetrize(scaled * u.transpose())
    }

    pub fn reconstruct(&self) -> SymMatrix {
        self.compose(|_, lam| lam)
    }
}

/// Full symmetric eigendecomposition, eigenvalues non-increasing.
///
/// Ties keep the backend's order (stable sort on the original index).
pub fn sym_eig(a: &SymMatrix) -> Result<SpectralDecomp> {
    if !a.is_finite() {
        return Err(Error::Input("sym_eig: non-finite entries".into()));
    }
    let eig = SymmetricEigen::new(a.as_matrix().clone());
    let n = a.dim();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let eigenvalues = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let eigenvectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    Ok(SpectralDecomp {
        eigenvalues,
        eigenvectors: OrthoFrame::from_orthonormal(eigenvectors),
    })
}

/// Thin Householder QR with `R` diagonal forced non-negative.
///
/// Fails with [`Error::DegenerateFrame`] when `min |R_jj| <= 1e-12 * max |R_jj|`.
pub fn qr_orthonormalize(z: &DMatrix<f64>) -> Result<(OrthoFrame, DMatrix<f64>)> {
    let (n, k) = z.shape();
    if k == 0 || k > n {
        return Err(Error::Input(format!("qr: need 1 <= k <= n, got {n}x{k}")));
    }
    if !z.iter().all(|v| v.is_finite()) {
        return Err(Error::DegenerateFrame("non-finite entries".into()));
    }
    let qr = z.clone().qr();
    let mut q = qr.q();
    let mut r = qr.r();
    let diag_max = r.diagonal().iter().fold(0.0_f64, |acc, v| acc.max(v.abs()));
    let diag_min = r.diagonal().iter().fold(f64::INFINITY, |acc, v| acc.min(v.abs()));
    if !(diag_max > 0.0) || diag_min <= 1e-12 * diag_max {
        return Err(Error::DegenerateFrame(format!(
            "rank-deficient {n}x{k} input (|R_jj| range [{diag_min:.3e}, {diag_max:.3e}])"
        )));
    }
    for j in 0..k {
        if r[(j, j)] < 0.0 {
            q.column_mut(j).neg_mut();
            r.row_mut(j).neg_mut();
        }
    }
    Ok((OrthoFrame::from_orthonormal(q), r))
}

/// Subspace iteration `(Q, R) <- QR(A Q)` from `start`.
///
/// `A` must already be PSD (or shifted by the caller); no internal shift is
/// applied. Stops once `||Q_{s+1} Q_{s+1}^T - Q_s Q_s^T||_F <= tol` or after
/// `iters` steps.
pub fn orthogonal_iteration(
    a: &SymMatrix,
    start: &OrthoFrame,
    iters: usize,
    tol: f64,
) -> Result<OrthoFrame> {
    if start.nrows() != a.dim() {
        return Err(Error::Input(format!(
            "orthogonal_iteration: frame has {} rows, matrix is {}x{}",
            start.nrows(),
            a.dim(),
            a.dim()
        )));
    }
    let mut q = start.clone();
    for _ in 0..iters {
        let z = a.as_matrix() * q.as_matrix();
        let (next, _) = qr_orthonormalize(&z)?;
        let change = next.subspace_distance(&q);
        q = next;
        if change <= tol {
            break;
        }
    }
    Ok(q)
}
