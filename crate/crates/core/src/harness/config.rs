//! INI run configuration.
//!
//! ```ini
//! [model]
//! model = spiked
//! n = 100
//! k = 10
//! m = 500
//! p = 0.1
//! seeds = 0..20
//!
//! [objective]
//! gamma = 0.1
//! a = 0.9
//!
//! [solver]
//! method = pgd-convex
//! step = empirical-lambda
//! tol = 1e-10
//! max_iters = 10000
//! init = pca
//! reference = truth
//!
//! [output]
//! dir = runs/spiked
//!
//! [sweep]
//! vary = p
//! values = 0.05, 0.1, 0.2
//!
//! [bench]
//! reps = 5
//! iters = 10
//! ```
//!
//! Every section is optional; unknown keys are rejected so typos surface.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use ini::Ini;

use crate::datagen::{Model, ModelConfig};
use crate::error::{Error, Result};
use crate::objective::HuberParams;
use crate::solvers::{StepPolicy, StopRule};

pub const DEFAULT_GAMMA: f64 = 0.1;

/// Shrinkage `a` used when the config leaves it out.
pub fn default_shrink(model: Model) -> f64 {
    match model {
        Model::Spiked => 0.9,
        Model::Corrupted => 0.8,
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Goi,
    Pgd,
    PgdConvex,
    Fw,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Goi, Method::Pgd, Method::PgdConvex, Method::Fw];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Goi => "goi",
            Method::Pgd => "pgd",
            Method::PgdConvex => "pgd-convex",
            Method::Fw => "fw",
        }
    }

    /// Step rule used when none is configured.
    pub fn default_step(&self, sample_based: bool) -> StepPolicy {
        match self {
            Method::Fw => StepPolicy::FwExactLineSearch,
            _ if sample_based => StepPolicy::EmpiricalLambda,
            _ => StepPolicy::InverseBeta,
        }
    }
}

impl FromStr for Method {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s.trim())
            .ok_or_else(|| Error::Config(format!("unknown solver '{s}' (expected goi, pgd, pgd-convex or fw)")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum InitSpec {
    Pca,
    RandomProjection,
    RandomFantope,
    File(PathBuf),
}

impl FromStr for InitSpec {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "pca" => Ok(InitSpec::Pca),
            "random-projection" => Ok(InitSpec::RandomProjection),
            "random-fantope" => Ok(InitSpec::RandomFantope),
            other => match other.strip_prefix("file:") {
                Some(path) if !path.is_empty() => Ok(InitSpec::File(PathBuf::from(path))),
                _ => Err(Error::Config(format!(
                    "unknown init '{other}' (expected pca, random-projection, random-fantope or file:PATH)"
                ))),
            },
        }
    }
}

/// Point that `dist_ref` in the trace is measured against.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReferenceSpec {
    None,
    /// Ground-truth projection of the instance.
    Truth,
    /// Convex PGD solved to gap `1e-10` before the actual run.
    HighPrecision,
}

impl FromStr for ReferenceSpec {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "none" => Ok(ReferenceSpec::None),
            "truth" => Ok(ReferenceSpec::Truth),
            "xstar" => Ok(ReferenceSpec::HighPrecision),
            other => Err(Error::Config(format!("unknown reference '{other}' (expected none, truth or xstar)"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverSpec {
    pub method: Method,
    /// `None` picks [`Method::default_step`].
    pub step: Option<StepPolicy>,
    pub stop: StopRule,
    pub init: InitSpec,
    pub reference: ReferenceSpec,
}

impl Default for SolverSpec {
    fn default() -> Self {
        Self {
            method: Method::PgdConvex,
            step: None,
            stop: StopRule::default(),
            init: InitSpec::Pca,
            reference: ReferenceSpec::Truth,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepAxis {
    P,
    N,
}

impl SweepAxis {
    pub fn as_str(&self) -> &'static str {
        match self {
            SweepAxis::P => "p",
            SweepAxis::N => "n",
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepSpec {
    pub axis: SweepAxis,
    pub values: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BenchSpec {
    pub reps: usize,
    pub iters: usize,
}

impl Default for BenchSpec {
    fn default() -> Self {
        Self { reps: 5, iters: 10 }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    /// Model parameters; `seed` is overwritten per run from `seeds`.
    pub model: ModelConfig,
    pub objective: HuberParams,
    pub solver: SolverSpec,
    pub seeds: Vec<u64>,
    pub out_dir: PathBuf,
    pub sweep: Option<SweepSpec>,
    pub bench: BenchSpec,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        if !path.exists() {
            return Err(Error::FileNotFound(path.to_path_buf()));
        }
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text).map_err(|e| match e {
            Error::Config(msg) => Error::Config(format!("{}: {msg}", path.display())),
            other => other,
        })
    }

    pub fn parse(text: &str) -> Result<Self> {
        let ini = Ini::load_from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let sections = Sections(&ini);
        sections.check_known()?;

        let model: Model = sections.get_parsed("model", "model")?.unwrap_or(Model::Spiked);
        let model_cfg = ModelConfig {
            n: sections.get_parsed("model", "n")?.unwrap_or(100),
            k: sections.get_parsed("model", "k")?.unwrap_or(10),
            m: sections.get_parsed("model", "m")?.unwrap_or(500),
            p: sections.get_parsed("model", "p")?.unwrap_or(0.1),
            model,
            seed: 0,
        };
        let seeds = match sections.get("model", "seeds") {
            Some(s) => parse_seeds(s)?,
            None => vec![0],
        };

        let gamma = sections.get_parsed("objective", "gamma")?.unwrap_or(DEFAULT_GAMMA);
        let shrink = sections.get_parsed("objective", "a")?.unwrap_or(default_shrink(model));
        let objective = HuberParams::new(gamma, shrink)
            .map_err(|e| Error::Config(format!("[objective]: {e}")))?;

        let mut solver = SolverSpec::default();
        if let Some(m) = sections.get_parsed("solver", "method")? {
            solver.method = m;
        }
        if let Some(kind) = sections.get("solver", "step") {
            let value = sections.get_parsed("solver", "step_value")?;
            solver.step = Some(StepPolicy::parse(kind.trim(), value)?);
        }
        if let Some(tol) = sections.get_parsed("solver", "tol")? {
            solver.stop.gap_tol = tol;
        }
        if let Some(it) = sections.get_parsed("solver", "max_iters")? {
            solver.stop.max_iters = it;
        }
        if let Some(init) = sections.get_parsed("solver", "init")? {
            solver.init = init;
        }
        if let Some(r) = sections.get_parsed("solver", "reference")? {
            solver.reference = r;
        }

        let out_dir = PathBuf::from(sections.get("output", "dir").unwrap_or("runs"));

        let sweep = match sections.get("sweep", "vary") {
            None => None,
            Some(axis) => {
                let axis = match axis.trim() {
                    "p" => SweepAxis::P,
                    "n" => SweepAxis::N,
                    other => return Err(Error::Config(format!("[sweep] vary must be p or n, got '{other}'"))),
                };
                let values = parse_list::<f64>(sections.get("sweep", "values").unwrap_or(""), "[sweep] values")?;
                if values.is_empty() {
                    return Err(Error::Config("[sweep] values is empty".into()));
                }
                if axis == SweepAxis::N && values.iter().any(|v| v.fract() != 0.0 || *v < 2.0) {
                    return Err(Error::Config("[sweep] n values must be integers >= 2".into()));
                }
                Some(SweepSpec { axis, values })
            }
        };

        let mut bench = BenchSpec::default();
        if let Some(r) = sections.get_parsed("bench", "reps")? {
            bench.reps = r;
        }
        if let Some(i) = sections.get_parsed("bench", "iters")? {
            bench.iters = i;
        }

        let cfg = RunConfig { model: model_cfg, objective, solver, seeds, out_dir, sweep, bench };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Config("[model] seeds is empty".into()));
        }
        self.model.validate()?;
        if !(self.solver.stop.gap_tol >= 0.0) {
            return Err(Error::Config("[solver] tol must be >= 0".into()));
        }
        if self.bench.reps == 0 || self.bench.iters == 0 {
            return Err(Error::Config("[bench] reps and iters must be >= 1".into()));
        }
        Ok(())
    }

    /// Model config for one seed.
    pub fn model_for(&self, seed: u64) -> ModelConfig {
        ModelConfig { seed, ..self.model }
    }
}

const KNOWN: &[(&str, &[&str])] = &[
    ("model", &["model", "n", "k", "m", "p", "seeds"]),
    ("objective", &["gamma", "a"]),
    ("solver", &["method", "step", "step_value", "tol", "max_iters", "init", "reference"]),
    ("output", &["dir"]),
    ("sweep", &["vary", "values"]),
    ("bench", &["reps", "iters"]),
];

struct Sections<'a>(&'a Ini);

impl Sections<'_> {
    fn check_known(&self) -> Result<()> {
        for (section, props) in self.0.iter() {
            let Some(name) = section else {
                if let Some((key, _)) = props.iter().next() {
                    return Err(Error::Config(format!("key '{key}' outside of any section")));
                }
                continue;
            };
            let Some((_, keys)) = KNOWN.iter().find(|(s, _)| *s == name) else {
                return Err(Error::Config(format!("unknown section [{name}]")));
            };
            if let Some((key, _)) = props.iter().find(|(key, _)| !keys.contains(key)) {
                return Err(Error::Config(format!("unknown key '{key}' in [{name}]")));
            }
        }
        Ok(())
    }

    fn get(&self, section: &str, key: &str) -> Option<&str> {
        self.0.get_from(Some(section), key)
    }

    fn get_parsed<T: FromStr>(&self, section: &str, key: &str) -> Result<Option<T>>
    where
        T::Err: std::fmt::Display,
    {
        self.get(section, key)
            .map(|raw| {
                raw.trim()
                    .parse()
                    .map_err(|e| Error::Config(format!("[{section}] {key} = '{raw}': {e}")))
            })
            .transpose()
    }
}

fn parse_list<T: FromStr>(raw: &str, what: &str) -> Result<Vec<T>>
where
    T::Err: std::fmt::Display,
{
    raw.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.parse().map_err(|e| Error::Config(format!("{what}: '{s}': {e}"))))
        .collect()
}

/// `"3"`, `"1, 4, 9"` or the half-open range `"0..20"`.
pub fn parse_seeds(raw: &str) -> Result<Vec<u64>> {
    if let Some((lo, hi)) = raw.split_once("..") {
        let bound = |s: &str| {
            s.trim()
                .parse::<u64>()
                .map_err(|e| Error::Config(format!("[model] seeds range '{raw}': {e}")))
        };
        return Ok((bound(lo)?..bound(hi)?).collect());
    }
    parse_list(raw, "[model] seeds")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_follow_model() {
        let cfg = RunConfig::parse("[model]\nmodel = corrupted\nseeds = 0..3\n").unwrap();
        assert_eq!(cfg.objective.shrink, 0.8);
        assert_eq!(cfg.objective.gamma, 0.1);
        assert_eq!(cfg.seeds, vec![0, 1, 2]);
        assert_eq!(cfg.solver.method, Method::PgdConvex);
    }

    #[test]
    fn rejects_bad_fields_by_name() {
        let err = RunConfig::parse("[model]\np = 0.6\n").unwrap_err().to_string();
        assert!(err.contains("p must be in (0,0.5]"), "{err}");
        let err = RunConfig::parse("[model]\nseeds = \n").unwrap_err().to_string();
        assert!(err.contains("seeds is empty"), "{err}");
        let err = RunConfig::parse("[solver]\nmethod = newton\n").unwrap_err().to_string();
        assert!(err.contains("unknown solver"), "{err}");
        let err = RunConfig::parse("[solver]\nmaxiter = 3\n").unwrap_err().to_string();
        assert!(err.contains("maxiter"), "{err}");
    }

    #[test]
    fn sweep_and_init() {
        let cfg = RunConfig::parse(
            "[solver]\ninit = file:/tmp/x.csv\nstep = fixed\nstep_value = 0.5\n[sweep]\nvary = n\nvalues = 100, 200\n",
        )
        .unwrap();
        assert_eq!(cfg.solver.init, InitSpec::File("/tmp/x.csv".into()));
        assert_eq!(cfg.solver.step, Some(StepPolicy::Fixed(0.5)));
        let sweep = cfg.sweep.unwrap();
        assert_eq!(sweep.axis, SweepAxis::N);
        assert_eq!(sweep.values, vec![100.0, 200.0]);
    }
}
