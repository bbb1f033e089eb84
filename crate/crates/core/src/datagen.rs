//! Seeded generators for the two robust subspace-recovery models.
//!
//! Streams: for a config seed `s`, the ground truth draws from ChaCha8 stream
//! 0 of key `s`, and sample `i` draws from stream `i + 1`. Every sample is
//! therefore independent of scheduling, and parallel generation reproduces
//! serial generation bit for bit.

use std::fmt;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::geometry::{pnk_project, FantopePoint, ProjectionMatrix};
use crate::objective::SampleSet;
use crate::par::{map_items, Execution};
use crate::spectral::{qr_orthonormalize, SymMatrix};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Model {
    Spiked,
    Corrupted,
}

impl fmt::Display for Model {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Model::Spiked => "spiked",
            Model::Corrupted => "corrupted",
        })
    }
}

impl FromStr for Model {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "spiked" => Ok(Model::Spiked),
            "corrupted" => Ok(Model::Corrupted),
            other => Err(Error::Config(format!(
                "unknown model '{other}' (expected spiked or corrupted)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelConfig {
    pub n: usize,
    pub k: usize,
    pub m: usize,
    /// Per-sample corruption probability.
    pub p: f64,
    pub model: Model,
    pub seed: u64,
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if !(1 <= self.k && self.k < self.n) {
            return Err(Error::Config(format!(
                "k must satisfy 1 <= k < n (k={}, n={})",
                self.k, self.n
            )));
        }
        if self.m == 0 {
            return Err(Error::Config("m must be >= 1".into()));
        }
        if !(self.p > 0.0 && self.p <= 0.5) {
            return Err(Error::Config(format!("p must be in (0,0.5], got {}", self.p)));
        }
        Ok(())
    }
}

/// A generated problem: ground-truth subspace plus samples.
#[derive(Clone, Debug)]
pub struct Instance {
    pub truth: ProjectionMatrix,
    pub data: SampleSet,
    pub config: ModelConfig,
    /// Which samples received the corruption.
    pub corrupted: Vec<bool>,
}

pub fn sample_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn gaussian_vector<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample(StandardNormal))
}

/// Uniform unit vector (normalized standard Gaussian).
pub fn unit_vector<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DVector<f64> {
    loop {
        let z = gaussian_vector(n, rng);
        let norm = z.norm();
        if norm > 0.0 {
            return z / norm;
        }
    }
}

/// Haar-distributed rank-k projection: QR of an `n x k` Gaussian matrix.
pub fn random_projection<R: Rng + ?Sized>(n: usize, k: usize, rng: &mut R) -> ProjectionMatrix {
    assert!(1 <= k && k <= n, "random_projection needs 1 <= k <= n");
    loop {
        let z = DMatrix::from_fn(n, k, |_, _| rng.sample(StandardNormal));
        if let Ok((q, _)) = qr_orthonormalize(&z) {
            return ProjectionMatrix::from_frame(q);
        }
    }
}

/// Random convex combination of `parts` random projections.
pub fn random_fantope_point<R: Rng + ?Sized>(
    n: usize,
    k: usize,
    parts: usize,
    rng: &mut R,
) -> FantopePoint {
    let parts = parts.max(1);
    let mut w: Vec<f64> = (0..parts).map(|_| rng.random::<f64>() + 1e-3).collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|v| *v /= total);
    let mut acc = DMatrix::zeros(n, n);
    for wi in w {
        acc += random_projection(n, k, rng).matrix().into_matrix() * wi;
    }
    FantopePoint::new_unchecked(SymMatrix::symmetrize(acc), k)
}

/// `P z / ||P z||` for a fresh uniform `z`; redraws the null event.
fn subspace_unit<R: Rng + ?Sized>(truth: &DMatrix<f64>, rng: &mut R) -> (DVector<f64>, DVector<f64>) {
    loop {
        let z = unit_vector(truth.nrows(), rng);
        let pz = truth * &z;
        let norm = pz.norm();
        if norm > 0.0 {
            return (z, pz / norm);
        }
    }
}

fn generate(
    config: &ModelConfig,
    exec: Execution,
    sample: impl Fn(&DMatrix<f64>, &mut ChaCha8Rng) -> (DVector<f64>, bool) + Sync + Send,
) -> Result<Instance> {
    config.validate()?;
    let truth = random_projection(config.n, config.k, &mut sample_rng(config.seed, 0));
    let p = truth.matrix().into_matrix();
    let idx: Vec<u64> = (0..config.m as u64).collect();
    let draws = map_items(&idx, exec, |&i| sample(&p, &mut sample_rng(config.seed, i + 1)));
    let mut points = DMatrix::zeros(config.n, config.m);
    let mut corrupted = Vec::with_capacity(config.m);
    for (j, (q, c)) in draws.into_iter().enumerate() {
        points.set_column(j, &q);
        corrupted.push(c);
    }
    Ok(Instance { truth, data: SampleSet::new(points)?, config: *config, corrupted })
}

/// Spiked covariance: an inlier `P z / ||P z||` with probability `1 - p`,
/// otherwise the raw uniform `z`.
pub fn gen_spiked(config: &ModelConfig, exec: Execution) -> Result<Instance> {
    let pc = config.p;
    generate(config, exec, move |truth, rng| {
        let (z, inlier) = subspace_unit(truth, rng);
        if rng.random::<f64>() < pc {
            (z, true)
        } else {
            (inlier, false)
        }
    })
}

/// Corrupted entries: every sample is `P z / ||P z||`; with probability `p`
/// one uniformly chosen coordinate is overwritten with a fair `+-1`.
pub fn gen_corrupted(config: &ModelConfig, exec: Execution) -> Result<Instance> {
    let pc = config.p;
    generate(config, exec, move |truth, rng| {
        let (_, mut q) = subspace_unit(truth, rng);
        if rng.random::<f64>() < pc {
            let j = rng.random_range(0..q.len());
            q[j] = if rng.random::<bool>() { 1.0 } else { -1.0 };
            (q, true)
        } else {
            (q, false)
        }
    })
}

pub fn generate_instance(config: &ModelConfig, exec: Execution) -> Result<Instance> {
    match config.model {
        Model::Spiked => gen_spiked(config, exec),
        Model::Corrupted => gen_corrupted(config, exec),
    }
}

/// Classical PCA: projection onto the top-k eigenvectors of `sum_i q_i q_i^T`.
pub fn pca_projection(data: &SampleSet, k: usize) -> Result<ProjectionMatrix> {
    pnk_project(&data.scatter(), k)
}
