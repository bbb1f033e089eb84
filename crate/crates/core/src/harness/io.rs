//! On-disk formats. All files are CSV with a header row or `key = value` text.
//!
//! Instance directory:
//!
//! | file            | contents                                           |
//! |-----------------|----------------------------------------------------|
//! | `config.txt`    | model, n, k, m, p, seed, gamma, a                  |
//! | `samples.csv`   | one sample per row, header `q_1..q_n`              |
//! | `truth.csv`     | `n x k` frame of the ground truth, header `u_1..u_k` |
//! | `corrupted.csv` | one `0/1` flag per sample, header `corrupted`      |
//!
//! A quadratic test instance has `config.txt` with `model = quadratic` and a
//! `target.csv` (`n x n`, header `m_1..m_n`) instead of samples.
//!
//! Floats are written in shortest round-trip form, so rereading a file gives
//! the same bits.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;

use crate::certificates::DiagnosticReport;
use crate::datagen::{Instance, Model, ModelConfig};
use crate::error::{Error, Result};
use crate::geometry::ProjectionMatrix;
use crate::objective::{CorruptedLoss, HuberParams, Objective, QuadraticLoss, SampleSet, SpikedLoss};
use crate::par::Execution;
use crate::solvers::{IterRecord, Termination};
use crate::spectral::{OrthoFrame, SymMatrix};

pub const CONFIG_FILE: &str = "config.txt";
pub const SAMPLES_FILE: &str = "samples.csv";
pub const TRUTH_FILE: &str = "truth.csv";
pub const CORRUPTED_FILE: &str = "corrupted.csv";
pub const TARGET_FILE: &str = "target.csv";
pub const SOLUTION_FILE: &str = "solution.csv";
pub const TRACE_FILE: &str = "trace.csv";
pub const RESULT_FILE: &str = "result.txt";

pub const TRACE_HEADER: [&str; 7] = ["iter", "f", "gap", "rank_flag", "dist_ref", "step", "fact_time_ns"];

pub fn fmt_f64(v: f64) -> String {
    format!("{v:e}")
}

fn parse_err(path: &Path, msg: impl ToString) -> Error {
    Error::Parse { path: path.to_path_buf(), msg: msg.to_string() }
}

fn open_reader(path: &Path) -> Result<csv::Reader<fs::File>> {
    if !path.exists() {
        return Err(Error::FileNotFound(path.to_path_buf()));
    }
    csv::Reader::from_path(path).map_err(|e| parse_err(path, e))
}

fn open_writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    csv::Writer::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => parse_err(path, format!("{other:?}")),
    })
}

fn csv_io(path: &Path) -> impl Fn(csv::Error) -> Error + '_ {
    move |e| parse_err(path, e)
}

/// Writes `matrix` row by row under the header `{prefix}_1 .. {prefix}_c`.
pub fn write_matrix_csv(path: &Path, prefix: &str, matrix: &DMatrix<f64>) -> Result<()> {
    let mut w = open_writer(path)?;
    let header: Vec<String> = (1..=matrix.ncols()).map(|j| format!("{prefix}_{j}")).collect();
    w.write_record(&header).map_err(csv_io(path))?;
    for row in matrix.row_iter() {
        w.write_record(row.iter().map(|v| fmt_f64(*v))).map_err(csv_io(path))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_matrix_csv(path: &Path) -> Result<DMatrix<f64>> {
    let mut r = open_reader(path)?;
    let cols = r.headers().map_err(csv_io(path))?.len();
    let mut data = Vec::new();
    let mut rows = 0;
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_io(path))?;
        for field in rec.iter() {
            let v: f64 = field
                .trim()
                .parse()
                .map_err(|e| parse_err(path, format!("row {}: '{field}': {e}", i + 1)))?;
            if !v.is_finite() {
                return Err(parse_err(path, format!("row {}: non-finite value", i + 1)));
            }
            data.push(v);
        }
        rows += 1;
    }
    if rows == 0 || cols == 0 {
        return Err(parse_err(path, "no data rows"));
    }
    Ok(DMatrix::from_row_slice(rows, cols, &data))
}

pub fn write_key_values(path: &Path, report: &DiagnosticReport) -> Result<()> {
    fs::write(path, report.to_text())?;
    Ok(())
}

pub fn read_key_values(path: &Path) -> Result<DiagnosticReport> {
    if !path.exists() {
        return Err(Error::FileNotFound(path.to_path_buf()));
    }
    Ok(DiagnosticReport::parse(&fs::read_to_string(path)?))
}

fn required<T: std::str::FromStr>(kv: &DiagnosticReport, path: &Path, key: &str) -> Result<T>
where
    T::Err: std::fmt::Display,
{
    let raw = kv.get(key).ok_or_else(|| parse_err(path, format!("missing key '{key}'")))?;
    raw.parse().map_err(|e| parse_err(path, format!("{key} = '{raw}': {e}")))
}

/// A loaded problem directory.
#[derive(Clone, Debug)]
pub enum Problem {
    Huber { instance: Instance, params: HuberParams },
    Quadratic { target: SymMatrix, k: usize },
}

impl Problem {
    pub fn n(&self) -> usize {
        match self {
            Problem::Huber { instance, .. } => instance.config.n,
            Problem::Quadratic { target, .. } => target.dim(),
        }
    }

    pub fn k(&self) -> usize {
        match self {
            Problem::Huber { instance, .. } => instance.config.k,
            Problem::Quadratic { k, .. } => *k,
        }
    }

    /// Seed for random initializations; 0 for quadratic instances.
    pub fn seed(&self) -> u64 {
        match self {
            Problem::Huber { instance, .. } => instance.config.seed,
            Problem::Quadratic { .. } => 0,
        }
    }

    pub fn truth(&self) -> Option<&ProjectionMatrix> {
        match self {
            Problem::Huber { instance, .. } => Some(&instance.truth),
            Problem::Quadratic { .. } => None,
        }
    }

    pub fn samples(&self) -> Option<&SampleSet> {
        match self {
            Problem::Huber { instance, .. } => Some(&instance.data),
            Problem::Quadratic { .. } => None,
        }
    }

    pub fn objective(&self, exec: Execution) -> Box<dyn Objective> {
        match self {
            Problem::Huber { instance, params } => match instance.config.model {
                Model::Spiked => Box::new(SpikedLoss::new(instance.data.clone(), *params).with_execution(exec)),
                Model::Corrupted => {
                    Box::new(CorruptedLoss::new(instance.data.clone(), *params).with_execution(exec))
                }
            },
            Problem::Quadratic { target, .. } => Box::new(QuadraticLoss::new(target.clone())),
        }
    }
}

pub fn write_instance(dir: &Path, instance: &Instance, params: &HuberParams) -> Result<()> {
    fs::create_dir_all(dir)?;
    let c = &instance.config;
    let mut kv = DiagnosticReport::default();
    kv.push("model", c.model);
    kv.push("n", c.n);
    kv.push("k", c.k);
    kv.push("m", c.m);
    kv.push("p", c.p);
    kv.push("seed", c.seed);
    kv.push("gamma", params.gamma);
    kv.push("a", params.shrink);
    write_key_values(&dir.join(CONFIG_FILE), &kv)?;
    write_matrix_csv(&dir.join(SAMPLES_FILE), "q", &instance.data.points().transpose())?;
    write_matrix_csv(&dir.join(TRUTH_FILE), "u", instance.truth.frame().as_matrix())?;
    let flags = DMatrix::from_iterator(
        instance.corrupted.len(),
        1,
        instance.corrupted.iter().map(|&c| if c { 1.0 } else { 0.0 }),
    );
    let mut w = open_writer(&dir.join(CORRUPTED_FILE))?;
    w.write_record(["corrupted"]).map_err(csv_io(dir))?;
    for v in flags.iter() {
        w.write_record([if *v > 0.0 { "1" } else { "0" }]).map_err(csv_io(dir))?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_quadratic(dir: &Path, target: &SymMatrix, k: usize) -> Result<()> {
    fs::create_dir_all(dir)?;
    let mut kv = DiagnosticReport::default();
    kv.push("model", "quadratic");
    kv.push("n", target.dim());
    kv.push("k", k);
    write_key_values(&dir.join(CONFIG_FILE), &kv)?;
    write_matrix_csv(&dir.join(TARGET_FILE), "m", target.as_matrix())
}

pub fn load_problem(dir: &Path) -> Result<Problem> {
    if !dir.is_dir() {
        return Err(Error::FileNotFound(dir.to_path_buf()));
    }
    let cfg_path = dir.join(CONFIG_FILE);
    let kv = read_key_values(&cfg_path)?;
    let n: usize = required(&kv, &cfg_path, "n")?;
    let k: usize = required(&kv, &cfg_path, "k")?;
    let model: String = required(&kv, &cfg_path, "model")?;
    if model == "quadratic" {
        let path = dir.join(TARGET_FILE);
        let m = read_matrix_csv(&path)?;
        if m.nrows() != n || m.ncols() != n {
            return Err(parse_err(&path, format!("expected {n}x{n} target")));
        }
        if !(1 <= k && k < n) {
            return Err(parse_err(&cfg_path, format!("need 1 <= k < n, got k={k}, n={n}")));
        }
        return Ok(Problem::Quadratic { target: SymMatrix::new(m)?, k });
    }
    let config = ModelConfig {
        n,
        k,
        m: required(&kv, &cfg_path, "m")?,
        p: required(&kv, &cfg_path, "p")?,
        model: model.parse()?,
        seed: required(&kv, &cfg_path, "seed")?,
    };
    config.validate()?;
    let params = HuberParams::new(required(&kv, &cfg_path, "gamma")?, required(&kv, &cfg_path, "a")?)?;

    let samples_path = dir.join(SAMPLES_FILE);
    let rows = read_matrix_csv(&samples_path)?;
    if rows.ncols() != n || rows.nrows() != config.m {
        return Err(parse_err(
            &samples_path,
            format!("expected {} samples of length {n}, got {}x{}", config.m, rows.nrows(), rows.ncols()),
        ));
    }
    let truth_path = dir.join(TRUTH_FILE);
    let frame = read_matrix_csv(&truth_path)?;
    if frame.nrows() != n || frame.ncols() != k {
        return Err(parse_err(&truth_path, format!("expected {n}x{k} frame")));
    }
    let corrupted_path = dir.join(CORRUPTED_FILE);
    let corrupted = if corrupted_path.exists() {
        let flags = read_matrix_csv(&corrupted_path)?;
        flags.iter().map(|&v| v != 0.0).collect()
    } else {
        vec![false; config.m]
    };
    let instance = Instance {
        truth: ProjectionMatrix::from_frame(OrthoFrame::new(frame)?),
        data: SampleSet::new(rows.transpose())?,
        config,
        corrupted,
    };
    Ok(Problem::Huber { instance, params })
}

fn opt_f64(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

pub fn write_trace_csv(path: &Path, records: &[IterRecord]) -> Result<()> {
    let mut w = open_writer(path)?;
    w.write_record(TRACE_HEADER).map_err(csv_io(path))?;
    for r in records {
        w.write_record([
            r.iter.to_string(),
            fmt_f64(r.f),
            fmt_f64(r.gap),
            r.rank_flag.map(|b| b.to_string()).unwrap_or_default(),
            opt_f64(r.dist_ref),
            fmt_f64(r.step),
            r.fact_time_ns.to_string(),
        ])
        .map_err(csv_io(path))?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a trace written by [`write_trace_csv`]. Columns that the CSV does
/// not carry (`proj_rank`, `vertex_dist_ref`) come back as `None`.
pub fn read_trace_csv(path: &Path) -> Result<Vec<IterRecord>> {
    let mut r = open_reader(path)?;
    let header = r.headers().map_err(csv_io(path))?.clone();
    if header.iter().ne(TRACE_HEADER.iter().copied()) {
        return Err(parse_err(path, format!("unexpected header {header:?}")));
    }
    let mut out = Vec::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec.map_err(csv_io(path))?;
        let bad = |col: &str, e: &dyn std::fmt::Display| parse_err(path, format!("row {}: {col}: {e}", i + 1));
        let num = |j: usize| -> Result<f64> { rec[j].parse().map_err(|e| bad(TRACE_HEADER[j], &e)) };
        let opt = |j: usize| -> Result<Option<f64>> {
            if rec[j].is_empty() {
                Ok(None)
            } else {
                num(j).map(Some)
            }
        };
        out.push(IterRecord {
            iter: rec[0].parse().map_err(|e| bad("iter", &e))?,
            f: num(1)?,
            gap: num(2)?,
            rank_flag: match &rec[3] {
                "" => None,
                s => Some(s.parse().map_err(|e| bad("rank_flag", &e))?),
            },
            proj_rank: None,
            dist_ref: opt(4)?,
            vertex_dist_ref: None,
            step: num(5)?,
            fact_time_ns: rec[6].parse().map_err(|e| bad("fact_time_ns", &e))?,
        });
    }
    Ok(out)
}

/// Summary written next to a solution.
#[derive(Clone, Debug, PartialEq)]
pub struct RunResult {
    pub method: String,
    pub termination: Termination,
    pub iterations: usize,
    pub f: f64,
    pub gap: f64,
    pub budget_violations: usize,
    pub failure: Option<String>,
}

impl RunResult {
    pub fn to_report(&self) -> DiagnosticReport {
        let mut kv = DiagnosticReport::default();
        kv.push("method", &self.method);
        kv.push("termination", self.termination);
        kv.push("iterations", self.iterations);
        kv.push("f", fmt_f64(self.f));
        kv.push("gap", fmt_f64(self.gap));
        kv.push("budget_violations", self.budget_violations);
        if let Some(msg) = &self.failure {
            kv.push("failure", msg.replace('\n', " "));
        }
        kv
    }

    pub fn read(path: &Path) -> Result<Self> {
        let kv = read_key_values(path)?;
        Ok(Self {
            method: required(&kv, path, "method")?,
            termination: required(&kv, path, "termination")?,
            iterations: required(&kv, path, "iterations")?,
            f: required(&kv, path, "f")?,
            gap: required(&kv, path, "gap")?,
            budget_violations: required(&kv, path, "budget_violations")?,
            failure: kv.get("failure").map(str::to_string),
        })
    }
}

/// `dir/instance-<seed>` with the seed zero-padded so listings sort.
pub fn instance_dir(root: &Path, seed: u64) -> PathBuf {
    root.join(format!("instance-{seed:04}"))
}
