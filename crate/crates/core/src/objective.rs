//! Smooth convex losses over symmetric matrices.
//!
//! Every objective returns its value and a gradient that is already
//! symmetrized, `(D + D^T) / 2` for the raw matrix derivative `D`, so the
//! gradient lives in the same space as the iterates.

use nalgebra::{DMatrix, DVector};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::datagen::random_fantope_point;
use crate::error::{Error, Result};
use crate::par::{map_chunks, Execution};
use crate::spectral::{sym_eig, SymMatrix};

/// Samples per work unit in the chunked loss reductions.
const SAMPLE_CHUNK: usize = 64;

/// Random Fantope points probed by [`estimate_metadata`].
const METADATA_PROBES: usize = 32;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum MetadataSource {
    Analytic,
    UserSupplied,
    Estimated,
}

impl MetadataSource {
    pub fn as_str(&self) -> &'static str {
        match self {
            MetadataSource::Analytic => "analytic",
            MetadataSource::UserSupplied => "user-supplied",
            MetadataSource::Estimated => "estimated",
        }
    }
}

/// Smoothness constant and a bound on the gradient's spectral norm over the
/// Fantope.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ObjectiveMetadata {
    pub beta: f64,
    pub g_bound: f64,
    pub source: MetadataSource,
}

impl ObjectiveMetadata {
    pub fn new(beta: f64, g_bound: f64, source: MetadataSource) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) || !(g_bound > 0.0 && g_bound.is_finite()) {
            return Err(Error::Input(format!(
                "metadata needs beta > 0 and G > 0, got beta={beta}, G={g_bound}"
            )));
        }
        Ok(Self { beta, g_bound, source })
    }
}

/// A convex, smooth loss on `S^n`.
pub trait Objective: Sync {
    fn dim(&self) -> usize;

    fn value(&self, x: &SymMatrix) -> f64;

    /// Value and symmetrized gradient in one pass.
    fn value_and_grad(&self, x: &SymMatrix) -> (f64, SymMatrix);

    /// `eta -> f((1 - eta) * from + eta * to)`.
    fn segment<'a>(&'a self, from: &SymMatrix, to: &SymMatrix) -> Box<dyn Fn(f64) -> f64 + 'a> {
        let (from, to) = (from.clone(), to.clone());
        Box::new(move |eta| self.value(&from.lerp(&to, eta)))
    }

    fn analytic_metadata(&self) -> ObjectiveMetadata;

    /// `lambda_1(sum_i q_i q_i^T)` for sample-based losses.
    fn empirical_lambda(&self) -> Option<f64> {
        None
    }
}

/// `Huber_gamma(x)`: quadratic on `|x| <= gamma`, linear beyond.
pub fn huber(x: f64, gamma: f64) -> f64 {
    let ax = x.abs();
    if ax <= gamma {
        0.5 * x * x
    } else {
        gamma * (ax - 0.5 * gamma)
    }
}

/// Derivative of [`huber`].
pub fn huber_derivative(x: f64, gamma: f64) -> f64 {
    if x.abs() <= gamma {
        x
    } else {
        gamma * x.signum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HuberParams {
    pub gamma: f64,
    /// The multiplier `a` in the residual `q - a X q`.
    pub shrink: f64,
}

impl HuberParams {
    pub fn new(gamma: f64, shrink: f64) -> Result<Self> {
        if !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::Input(format!("huber gamma must be > 0, got {gamma}")));
        }
        if !(shrink > 0.0 && shrink <= 1.0) {
            return Err(Error::Input(format!("shrink a must be in (0,1], got {shrink}")));
        }
        Ok(Self { gamma, shrink })
    }
}

/// `m` samples in `R^n`, stored as the columns of an `n x m` matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct SampleSet {
    points: DMatrix<f64>,
}

impl SampleSet {
    pub fn new(points: DMatrix<f64>) -> Result<Self> {
        if points.nrows() == 0 || points.ncols() == 0 {
            return Err(Error::Input("sample set must be nonempty".into()));
        }
        if !points.iter().all(|v| v.is_finite()) {
            return Err(Error::Input("sample set has non-finite entries".into()));
        }
        Ok(Self { points })
    }

    pub fn from_rows(n: usize, rows: &[Vec<f64>]) -> Result<Self> {
        if let Some(bad) = rows.iter().position(|r| r.len() != n) {
            return Err(Error::Input(format!("sample {bad} has wrong length (expected {n})")));
        }
        Self::new(DMatrix::from_fn(n, rows.len(), |i, j| rows[j][i]))
    }

    pub fn n(&self) -> usize {
        self.points.nrows()
    }

    pub fn m(&self) -> usize {
        self.points.ncols()
    }

    pub fn points(&self) -> &DMatrix<f64> {
        &self.points
    }

    pub fn sample(&self, i: usize) -> DVector<f64> {
        self.points.column(i).into_owned()
    }

    /// Unnormalized second moment `sum_i q_i q_i^T`.
    pub fn scatter(&self) -> SymMatrix {
        SymMatrix::symmetrize(&self.points * self.points.transpose())
    }

    /// `lambda_1(sum_i q_i q_i^T)`.
    pub fn scatter_lambda_max(&self) -> f64 {
        sym_eig(&self.scatter()).map(|d| d.eigenvalues[0]).unwrap_or(f64::NAN)
    }
}

/// Per-chunk partial: loss value and the unsymmetrized `sum_i h_i q_i^T`.
struct Partial {
    value: f64,
    outer: DMatrix<f64>,
}

fn reduce(parts: Vec<Partial>, n: usize) -> (f64, DMatrix<f64>) {
    parts.into_iter().fold((0.0, DMatrix::zeros(n, n)), |(v, mut acc), p| {
        acc += p.outer;
        (v + p.value, acc)
    })
}

/// `-(a/2) (A + A^T)` from `A = sum_i h_i q_i^T`.
fn sym_grad(outer: DMatrix<f64>, shrink: f64) -> SymMatrix {
    let t = outer.transpose();
    SymMatrix::from_exact((outer + t) * (-0.5 * shrink))
}

/// Spiked-covariance loss `f(X) = sum_i Huber_gamma(||q_i - a X q_i||)`.
#[derive(Clone, Debug)]
pub struct SpikedLoss {
    data: SampleSet,
    params: HuberParams,
    lambda_max: f64,
    pub exec: Execution,
}

impl SpikedLoss {
    pub fn new(data: SampleSet, params: HuberParams) -> Self {
        let lambda_max = data.scatter_lambda_max();
        Self { data, params, lambda_max, exec: Execution::default() }
    }

    pub fn with_execution(mut self, exec: Execution) -> Self {
        self.exec = exec;
        self
    }

    pub fn data(&self) -> &SampleSet {
        &self.data
    }

    pub fn params(&self) -> HuberParams {
        self.params
    }

    fn chunk(&self, x: &SymMatrix, range: std::ops::Range<usize>, with_grad: bool) -> Partial {
        let HuberParams { gamma, shrink } = self.params;
        let q = self.data.points.columns(range.start, range.len());
        let mut r = q.clone_owned() - (x.as_matrix() * q) * shrink;
        let mut value = 0.0;
        for mut col in r.column_iter_mut() {
            let rho = col.norm();
            value += huber(rho, gamma);
            let w = if rho <= gamma { 1.0 } else { gamma / rho };
            col.scale_mut(w);
        }
        let outer = if with_grad { &r * q.transpose() } else { DMatrix::zeros(0, 0) };
        Partial { value, outer }
    }
}

impl Objective for SpikedLoss {
    fn dim(&self) -> usize {
        self.data.n()
    }

    fn value(&self, x: &SymMatrix) -> f64 {
        map_chunks(self.data.m(), SAMPLE_CHUNK, self.exec, |r| self.chunk(x, r, false).value)
            .into_iter()
            .sum()
    }

    fn value_and_grad(&self, x: &SymMatrix) -> (f64, SymMatrix) {
        let parts = map_chunks(self.data.m(), SAMPLE_CHUNK, self.exec, |r| self.chunk(x, r, true));
        let (value, outer) = reduce(parts, self.dim());
        (value, sym_grad(outer, self.params.shrink))
    }

    fn segment<'a>(&'a self, from: &SymMatrix, to: &SymMatrix) -> Box<dyn Fn(f64) -> f64 + 'a> {
        let q = &self.data.points;
        let a = self.params.shrink;
        let (xq, vq) = (from.as_matrix() * q, to.as_matrix() * q);
        Box::new(move |eta| {
            let mut total = 0.0;
            for j in 0..q.ncols() {
                let mut sq = 0.0;
                for i in 0..q.nrows() {
                    let r = q[(i, j)] - a * ((1.0 - eta) * xq[(i, j)] + eta * vq[(i, j)]);
                    sq += r * r;
                }
                total += huber(sq.sqrt(), self.params.gamma);
            }
            total
        })
    }

    fn analytic_metadata(&self) -> ObjectiveMetadata {
        let HuberParams { gamma, shrink } = self.params;
        let g: f64 = self
            .data
            .points
            .column_iter()
            .map(|q| {
                let nq = q.norm();
                shrink * nq * gamma.min((1.0 + shrink) * nq)
            })
            .sum();
        ObjectiveMetadata {
            beta: shrink * shrink * self.lambda_max,
            g_bound: g.max(f64::MIN_POSITIVE),
            source: MetadataSource::Analytic,
        }
    }

    fn empirical_lambda(&self) -> Option<f64> {
        Some(self.lambda_max)
    }
}

/// Corrupted-entries loss `f(X) = sum_i sum_j Huber_gamma([q_i - a X q_i]_j)`.
#[derive(Clone, Debug)]
pub struct CorruptedLoss {
    data: SampleSet,
    params: HuberParams,
    lambda_max: f64,
    pub exec: Execution,
}

impl CorruptedLoss {
    pub fn new(data: SampleSet, params: HuberParams) -> Self {
        let lambda_max = data.scatter_lambda_max();
        Self { data, params, lambda_max, exec: Execution::default() }
    }

    pub fn with_execution(mut self, exec: Execution) -> Self {
        self.exec = exec;
        self
    }

    pub fn data(&self) -> &SampleSet {
        &self.data
    }

    pub fn params(&self) -> HuberParams {
        self.params
    }

    fn chunk(&self, x: &SymMatrix, range: std::ops::Range<usize>, with_grad: bool) -> Partial {
        let HuberParams { gamma, shrink } = self.params;
        let q = self.data.points.columns(range.start, range.len());
        let mut r = q.clone_owned() - (x.as_matrix() * q) * shrink;
        let mut value = 0.0;
        for v in r.iter_mut() {
            value += huber(*v, gamma);
            *v = huber_derivative(*v, gamma);
        }
        let outer = if with_grad { &r * q.transpose() } else { DMatrix::zeros(0, 0) };
        Partial { value, outer }
    }
}

impl Objective for CorruptedLoss {
    fn dim(&self) -> usize {
        self.data.n()
    }

    fn value(&self, x: &SymMatrix) -> f64 {
        map_chunks(self.data.m(), SAMPLE_CHUNK, self.exec, |r| self.chunk(x, r, false).value)
            .into_iter()
            .sum()
    }

    fn value_and_grad(&self, x: &SymMatrix) -> (f64, SymMatrix) {
        let parts = map_chunks(self.data.m(), SAMPLE_CHUNK, self.exec, |r| self.chunk(x, r, true));
        let (value, outer) = reduce(parts, self.dim());
        (value, sym_grad(outer, self.params.shrink))
    }

    fn segment<'a>(&'a self, from: &SymMatrix, to: &SymMatrix) -> Box<dyn Fn(f64) -> f64 + 'a> {
        let q = &self.data.points;
        let a = self.params.shrink;
        let (xq, vq) = (from.as_matrix() * q, to.as_matrix() * q);
        Box::new(move |eta| {
            let mut total = 0.0;
            for j in 0..q.ncols() {
                for i in 0..q.nrows() {
                    let r = q[(i, j)] - a * ((1.0 - eta) * xq[(i, j)] + eta * vq[(i, j)]);
                    total += huber(r, self.params.gamma);
                }
            }
            total
        })
    }

    fn analytic_metadata(&self) -> ObjectiveMetadata {
        let HuberParams { gamma, shrink } = self.params;
        let cap = gamma * (self.data.n() as f64).sqrt();
        let g: f64 = self
            .data
            .points
            .column_iter()
            .map(|q| {
                let nq = q.norm();
                shrink * nq * cap.min((1.0 + shrink) * nq)
            })
            .sum();
        ObjectiveMetadata {
            beta: shrink * shrink * self.lambda_max,
            g_bound: g.max(f64::MIN_POSITIVE),
            source: MetadataSource::Analytic,
        }
    }

    fn empirical_lambda(&self) -> Option<f64> {
        Some(self.lambda_max)
    }
}

/// `f(X) = 1/2 ||X - M||_F^2`; its Fantope minimizer is the projection of `M`.
#[derive(Clone, Debug)]
pub struct QuadraticLoss {
    target: SymMatrix,
}

impl QuadraticLoss {
    pub fn new(target: SymMatrix) -> Self {
        Self { target }
    }

    pub fn target(&self) -> &SymMatrix {
        &self.target
    }
}

impl Objective for QuadraticLoss {
    fn dim(&self) -> usize {
        self.target.dim()
    }

    fn value(&self, x: &SymMatrix) -> f64 {
        0.5 * (x - &self.target).as_matrix().norm_squared()
    }

    fn value_and_grad(&self, x: &SymMatrix) -> (f64, SymMatrix) {
        let g = x - &self.target;
        (0.5 * g.as_matrix().norm_squared(), g)
    }

    fn analytic_metadata(&self) -> ObjectiveMetadata {
        // ||X||_2 <= 1 on the Fantope.
        ObjectiveMetadata {
            beta: 1.0,
            g_bound: 1.0 + self.target.spectral_norm(),
            source: MetadataSource::Analytic,
        }
    }
}

/// Analytic `beta`, with `G` tightened by probing.
///
/// `G` becomes `min(analytic G, 2 * max ||grad f||_2)` over 32 random Fantope
/// points plus `extra_probes`, and never drops below the largest probed norm.
pub fn estimate_metadata(
    objective: &dyn Objective,
    k: usize,
    extra_probes: &[SymMatrix],
    seed: u64,
) -> Result<ObjectiveMetadata> {
    let n = objective.dim();
    if k == 0 || k > n {
        return Err(Error::Input(format!("need 1 <= k <= n, got k={k}, n={n}")));
    }
    let analytic = objective.analytic_metadata();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut probes: Vec<SymMatrix> = (0..METADATA_PROBES)
        .map(|_| random_fantope_point(n, k, 3, &mut rng).into_matrix())
        .collect();
    probes.extend(extra_probes.iter().cloned());
    let max_seen = probes
        .iter()
        .map(|x| objective.value_and_grad(x).1.spectral_norm())
        .fold(0.0_f64, f64::max);
    let g = analytic.g_bound.min(2.0 * max_seen).max(max_seen);
    ObjectiveMetadata::new(analytic.beta, g, MetadataSource::Estimated)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn huber_branches() {
        assert_abs_diff_eq!(huber(0.05, 0.1), 0.00125, epsilon = 1e-15);
        assert_abs_diff_eq!(huber(0.5, 0.1), 0.045, epsilon = 1e-15);
        assert_abs_diff_eq!(huber(-0.5, 0.1), 0.045, epsilon = 1e-15);
        for g in [0.1, 1.0, 3.0] {
            let quad = 0.5 * g * g;
            let lin = g * (g - 0.5 * g);
            assert_abs_diff_eq!(huber(g, g), quad, epsilon = 1e-15);
            assert_abs_diff_eq!(lin, quad, epsilon = 1e-15);
            assert_abs_diff_eq!(huber(-g, g), quad, epsilon = 1e-15);
        }
    }

    fn e1_sample(n: usize) -> SampleSet {
        let mut q = DMatrix::zeros(n, 1);
        q[(0, 0)] = 1.0;
        SampleSet::new(q).unwrap()
    }

    #[test]
    fn spiked_single_sample_by_hand() {
        let loss = SpikedLoss::new(e1_sample(3), HuberParams::new(0.1, 0.9).unwrap());
        let (v, g) = loss.value_and_grad(&SymMatrix::zeros(3));
        assert_abs_diff_eq!(v, 0.095, epsilon = 1e-15);
        let mut expected = SymMatrix::zeros(3).into_matrix();
        expected[(0, 0)] = -0.09;
        assert_abs_diff_eq!(g.into_matrix(), expected, epsilon = 1e-15);
    }

    #[test]
    fn corrupted_single_sample_by_hand() {
        let loss = CorruptedLoss::new(e1_sample(2), HuberParams::new(0.1, 0.8).unwrap());
        let (v, g) = loss.value_and_grad(&SymMatrix::zeros(2));
        assert_abs_diff_eq!(v, 0.095, epsilon = 1e-15);
        let mut expected = SymMatrix::zeros(2).into_matrix();
        expected[(0, 0)] = -0.08;
        assert_abs_diff_eq!(g.into_matrix(), expected, epsilon = 1e-15);
    }

    #[test]
    fn zero_residual_is_a_floor() {
        // X = I captures every sample exactly when a = 1.
        let mut q = DMatrix::zeros(3, 2);
        q[(0, 0)] = 1.0;
        q[(1, 1)] = 0.6;
        q[(2, 1)] = 0.8;
        let data = SampleSet::new(q).unwrap();
        let p = HuberParams::new(0.1, 1.0).unwrap();
        let frame = crate::spectral::OrthoFrame::new(
            DMatrix::from_column_slice(3, 2, &[1.0, 0.0, 0.0, 0.0, 0.6, 0.8]),
        )
        .unwrap();
        let x = frame.projection();
        for (v, g) in [
            SpikedLoss::new(data.clone(), p).value_and_grad(&x),
            CorruptedLoss::new(data.clone(), p).value_and_grad(&x),
        ] {
            assert!(v.abs() < 1e-28);
            assert!(g.norm() < 1e-14);
        }
    }

    #[test]
    fn quadratic_cases() {
        let m = SymMatrix::identity(2);
        let loss = QuadraticLoss::new(m.clone());
        let (v, g) = loss.value_and_grad(&SymMatrix::zeros(2));
        assert_eq!(v, 1.0);
        assert_eq!(g, &m * -1.0);
        let (v, g) = loss.value_and_grad(&m);
        assert_eq!(v, 0.0);
        assert_eq!(g.norm(), 0.0);
        assert_eq!(loss.analytic_metadata().beta, 1.0);
    }

    #[test]
    fn params_validation() {
        assert!(HuberParams::new(0.0, 0.9).is_err());
        assert!(HuberParams::new(0.1, 0.0).is_err());
        assert!(HuberParams::new(0.1, 1.2).is_err());
        assert!(SampleSet::new(DMatrix::zeros(3, 0)).is_err());
    }

    #[test]
    fn grad_is_exactly_symmetric() {
        let data = SampleSet::new(DMatrix::from_fn(4, 9, |i, j| ((i * 7 + j * 3) % 5) as f64 - 2.0)).unwrap();
        let x = SymMatrix::from_fn(4, |i, j| 0.1 * (i + 2 * j) as f64);
        let p = HuberParams::new(0.5, 0.9).unwrap();
        for g in [
            SpikedLoss::new(data.clone(), p).value_and_grad(&x).1,
            CorruptedLoss::new(data.clone(), p).value_and_grad(&x).1,
        ] {
            let m = g.as_matrix();
            assert_eq!((m - m.transpose()).norm(), 0.0);
        }
    }

    #[test]
    fn segment_matches_value() {
        let data = SampleSet::new(DMatrix::from_fn(5, 20, |i, j| ((i * 3 + j * 11) % 7) as f64 / 7.0 - 0.4)).unwrap();
        let p = HuberParams::new(0.1, 0.8).unwrap();
        let x = SymMatrix::from_diagonal(&[1.0, 0.5, 0.5, 0.0, 0.0]);
        let v = SymMatrix::from_diagonal(&[0.0, 0.0, 1.0, 1.0, 0.0]);
        let spiked = SpikedLoss::new(data.clone(), p);
        let corrupted = CorruptedLoss::new(data, p);
        for obj in [&spiked as &dyn Objective, &corrupted] {
            let seg = obj.segment(&x, &v);
            for eta in [0.0, 0.3, 1.0] {
                assert_abs_diff_eq!(seg(eta), obj.value(&x.lerp(&v, eta)), epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn execution_modes_bit_identical() {
        let data = SampleSet::new(DMatrix::from_fn(6, 300, |i, j| (((i + 1) * (j + 3)) % 13) as f64 / 13.0 - 0.5)).unwrap();
        let p = HuberParams::new(0.1, 0.9).unwrap();
        let x = SymMatrix::from_fn(6, |i, j| if i == j { 0.5 } else { 0.01 * (i + j) as f64 });
        let a = SpikedLoss::new(data.clone(), p).with_execution(Execution::Sequential).value_and_grad(&x);
        let b = SpikedLoss::new(data, p).with_execution(Execution::Parallel).value_and_grad(&x);
        assert_eq!(a.0.to_bits(), b.0.to_bits());
        assert_eq!(a.1, b.1);
    }
}
