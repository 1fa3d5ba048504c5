//! Experiment drivers: linear greedy convergence, `K(ε)` sweeps for both
//! partitioning algorithms, log–log slope fits and partition figures.

mod figure;

use std::fmt::{self, Write as _};
use std::path::Path;
use std::str::FromStr;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

pub use figure::{
    export_partition_figure, library_svg, proximity_raster_csv, proximity_svg, FigureSource, RASTER_RESOLUTION,
};

use crate::error::{Error, Result};
use crate::hp::{build_library, Evaluation, HpConfig, Library};
use crate::param::{mix_seed, ParamBox, TrainingSet};
use crate::problem::{AffineProblem, ProblemKind};
use crate::proximity::{build_library_proximity, ProximityTree, PROXIMITY_MAGIC};
use crate::rb::{estimate_all, greedy_build, GreedyOptions, GreedyTrace, Init};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    /// Longest-edge tensor-product partition.
    Tree,
    /// Anchor proximity partition.
    Proximity,
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Algorithm::Tree => "tree",
            Algorithm::Proximity => "proximity",
        })
    }
}

impl FromStr for Algorithm {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "tree" => Ok(Algorithm::Tree),
            "proximity" => Ok(Algorithm::Proximity),
            _ => Err(Error::InvalidArgument(format!(
                "unknown algorithm '{s}' (expected tree or proximity)"
            ))),
        }
    }
}

/// Greedy on the whole domain with `train_size` random points. The trace
/// CSV lists `n`, the selected parameter and `η_max` after each step.
pub fn run_linear_convergence(
    problem: &AffineProblem,
    n_max: usize,
    train_size: usize,
    seed: u64,
    init: Init,
) -> Result<GreedyTrace> {
    let domain = problem.domain();
    let mut train = TrainingSet::random(&domain, train_size, seed);
    if let Init::Param(mu) = &init {
        domain.check(mu)?;
        if !train.points.contains(mu) {
            train.points[0] = mu.clone();
        }
    }
    let opts = GreedyOptions {
        n_max,
        tol: f64::MIN_POSITIVE,
        init,
    };
    Ok(greedy_build(problem, &train, &opts)?.1)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepStatus {
    Ok,
    DepthExceeded,
}

impl fmt::Display for SweepStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            SweepStatus::Ok => "ok",
            SweepStatus::DepthExceeded => "depth_exceeded",
        })
    }
}

/// One `(N, ε)` cell of a sweep. Partition fields are zero for flagged
/// rows.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub algorithm: Algorithm,
    pub n: usize,
    pub eps: f64,
    pub k: usize,
    pub depth: usize,
    pub quasi_uniformity: f64,
    pub truth_solves: usize,
    /// Size of the serialized library.
    pub bytes: usize,
    /// Leaves whose basis stopped below `N`.
    pub short_leaves: usize,
    pub max_basis: usize,
    pub status: SweepStatus,
    pub wall_seconds: f64,
}

pub const SWEEP_HEADER: &str = "algorithm,N,eps,K,L,xi,truth_solves,bytes,short_leaves,max_basis,status";

/// Settings shared by every cell of a sweep.
#[derive(Debug, Clone)]
pub struct SweepOptions {
    pub train_size: usize,
    pub seed: u64,
    pub init: Init,
    pub max_depth: usize,
}

/// A built partition of either kind.
#[derive(Debug, Clone)]
pub enum Partition {
    Tree(Library),
    Proximity(ProximityTree),
}

impl Partition {
    pub fn num_leaves(&self) -> usize {
        match self {
            Partition::Tree(l) => l.num_leaves(),
            Partition::Proximity(t) => t.num_leaves(),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        match self {
            Partition::Tree(l) => l.to_bytes(),
            Partition::Proximity(t) => t.to_bytes(),
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    /// Reads either file kind, dispatching on the magic bytes.
    pub fn from_bytes(data: &[u8]) -> Result<Self> {
        if data.starts_with(PROXIMITY_MAGIC) {
            Ok(Partition::Proximity(ProximityTree::from_bytes(data)?))
        } else {
            Ok(Partition::Tree(Library::from_bytes(data)?))
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }

    pub fn algorithm(&self) -> Algorithm {
        match self {
            Partition::Tree(_) => Algorithm::Tree,
            Partition::Proximity(_) => Algorithm::Proximity,
        }
    }

    pub fn kind(&self) -> ProblemKind {
        match self {
            Partition::Tree(l) => l.kind(),
            Partition::Proximity(t) => t.kind(),
        }
    }

    pub fn root_box(&self) -> ParamBox {
        match self {
            Partition::Tree(l) => l.root_box().clone(),
            Partition::Proximity(t) => t.root_box(),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Partition::Tree(l) => l.depth(),
            Partition::Proximity(t) => t.depth(),
        }
    }

    pub fn truth_solves(&self) -> usize {
        match self {
            Partition::Tree(l) => l.truth_solves(),
            Partition::Proximity(t) => t.truth_solves(),
        }
    }

    pub fn evaluate(&self, mu: &[f64]) -> Result<Evaluation> {
        match self {
            Partition::Tree(l) => l.evaluate(mu),
            Partition::Proximity(t) => t.evaluate(mu),
        }
    }

    pub fn basis_size(&self, leaf: usize) -> usize {
        self.basis_sizes()[leaf]
    }

    pub fn figure_source(&self) -> FigureSource<'_> {
        match self {
            Partition::Tree(l) => FigureSource::Tree(l),
            Partition::Proximity(t) => FigureSource::Proximity(t),
        }
    }

    fn basis_sizes(&self) -> Vec<usize> {
        match self {
            Partition::Tree(l) => l.leaves().iter().map(|x| x.basis_size()).collect(),
            Partition::Proximity(t) => t.leaves().iter().map(|x| x.basis_size()).collect(),
        }
    }
}

/// Builds one partition.
pub fn build_partition(problem: &AffineProblem, algorithm: Algorithm, cfg: &HpConfig) -> Result<Partition> {
    Ok(match algorithm {
        Algorithm::Tree => Partition::Tree(build_library(problem, cfg)?),
        Algorithm::Proximity => Partition::Proximity(build_library_proximity(problem, cfg)?),
    })
}

fn sweep_cell(
    problem: &AffineProblem,
    algorithm: Algorithm,
    n: usize,
    eps: f64,
    opts: &SweepOptions,
) -> Result<(SweepRecord, Option<Partition>)> {
    let cfg = HpConfig {
        init: opts.init.clone(),
        max_depth: opts.max_depth,
        ..HpConfig::new(n, eps, opts.train_size, opts.seed)
    };
    let start = Instant::now();
    let built = build_partition(problem, algorithm, &cfg);
    let wall_seconds = start.elapsed().as_secs_f64();
    let mut record = SweepRecord {
        algorithm,
        n,
        eps,
        k: 0,
        depth: 0,
        quasi_uniformity: 0.0,
        truth_solves: 0,
        bytes: 0,
        short_leaves: 0,
        max_basis: 0,
        status: SweepStatus::Ok,
        wall_seconds,
    };
    let partition = match built {
        Ok(p) => p,
        Err(Error::DepthExceeded(_)) => {
            record.status = SweepStatus::DepthExceeded;
            return Ok((record, None));
        }
        Err(e) => return Err(e),
    };
    let sizes = partition.basis_sizes();
    record.k = partition.num_leaves();
    record.short_leaves = sizes.iter().filter(|&&s| s < n).count();
    record.max_basis = sizes.iter().copied().max().unwrap_or(0);
    record.bytes = partition.to_bytes().len();
    match &partition {
        Partition::Tree(lib) => {
            record.depth = lib.depth();
            record.quasi_uniformity = lib.partition_stats().quasi_uniformity;
            record.truth_solves = lib.truth_solves();
        }
        Partition::Proximity(tree) => {
            record.depth = tree.depth();
            record.quasi_uniformity = proximity_quasi_uniformity(tree, opts.seed);
            record.truth_solves = tree.truth_solves();
        }
    }
    Ok((record, Some(partition)))
}

/// Monte-Carlo estimate of `min / max` leaf volume for a proximity tree.
fn proximity_quasi_uniformity(tree: &ProximityTree, seed: u64) -> f64 {
    let root = tree.root_box();
    let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(seed ^ 0x5eed));
    let mut counts = vec![0usize; tree.num_leaves()];
    for _ in 0..20_000 {
        if let Ok(k) = tree.locate(&root.sample(&mut rng)) {
            counts[k] += 1;
        }
    }
    let min = counts.iter().copied().min().unwrap_or(0) as f64;
    let max = counts.iter().copied().max().unwrap_or(1).max(1) as f64;
    min / max
}

/// Runs every `(N, ε)` cell, in parallel, returning rows ordered by `N`
/// then decreasing `ε`. When `keep` is given, the partitions of the
/// smallest `ε` for each `N` are returned alongside.
pub fn run_epsilon_sweep(
    problem: &AffineProblem,
    algorithm: Algorithm,
    ns: &[usize],
    eps: &[f64],
    opts: &SweepOptions,
) -> Result<(Vec<SweepRecord>, Vec<(usize, Partition)>)> {
    if eps.is_empty() || ns.is_empty() {
        return Err(Error::InvalidArgument(
            "a sweep needs at least one N and one tolerance".into(),
        ));
    }
    if eps.windows(2).any(|w| !(w[0] > w[1])) {
        return Err(Error::InvalidArgument("tolerances must be strictly decreasing".into()));
    }
    let cells: Vec<(usize, f64)> = ns.iter().flat_map(|&n| eps.iter().map(move |&e| (n, e))).collect();
    let results: Vec<(SweepRecord, Option<Partition>)> = cells
        .par_iter()
        .map(|&(n, e)| sweep_cell(problem, algorithm, n, e, opts))
        .collect::<Result<_>>()?;
    let last = *eps.last().unwrap();
    let mut records = Vec::with_capacity(results.len());
    let mut kept = Vec::new();
    for (record, partition) in results {
        if record.eps == last {
            if let Some(p) = partition {
                kept.push((record.n, p));
            }
        }
        records.push(record);
    }
    Ok((records, kept))
}

/// Sweep rows as CSV. Wall times are left out so that identical runs give
/// identical files; see [`timing_csv`].
pub fn sweep_csv(records: &[SweepRecord]) -> String {
    let mut out = format!("{SWEEP_HEADER}\n");
    for r in records {
        writeln!(
            out,
            "{},{},{:e},{},{},{:e},{},{},{},{},{}",
            r.algorithm,
            r.n,
            r.eps,
            r.k,
            r.depth,
            r.quasi_uniformity,
            r.truth_solves,
            r.bytes,
            r.short_leaves,
            r.max_basis,
            r.status
        )
        .unwrap();
    }
    out
}

pub fn timing_csv(records: &[SweepRecord]) -> String {
    let mut out = String::from("algorithm,N,eps,wall_seconds\n");
    for r in records {
        writeln!(out, "{},{},{:e},{:.3}", r.algorithm, r.n, r.eps, r.wall_seconds).unwrap();
    }
    out
}

/// Parses [`sweep_csv`] output.
pub fn parse_sweep_csv(text: &str) -> Result<Vec<SweepRecord>> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(SWEEP_HEADER) {
        return Err(Error::Format(format!("sweep CSV must start with '{SWEEP_HEADER}'")));
    }
    let bad = |line: &str| Error::Format(format!("malformed sweep row '{line}'"));
    let mut records = Vec::new();
    for line in lines.filter(|l| !l.trim().is_empty()) {
        let f: Vec<&str> = line.trim().split(',').collect();
        if f.len() != 11 {
            return Err(bad(line));
        }
        let num = |i: usize| f[i].parse::<usize>().map_err(|_| bad(line));
        let real = |i: usize| f[i].parse::<f64>().map_err(|_| bad(line));
        records.push(SweepRecord {
            algorithm: f[0].parse()?,
            n: num(1)?,
            eps: real(2)?,
            k: num(3)?,
            depth: num(4)?,
            quasi_uniformity: real(5)?,
            truth_solves: num(6)?,
            bytes: num(7)?,
            short_leaves: num(8)?,
            max_basis: num(9)?,
            status: match f[10] {
                "ok" => SweepStatus::Ok,
                "depth_exceeded" => SweepStatus::DepthExceeded,
                _ => return Err(bad(line)),
            },
            wall_seconds: 0.0,
        });
    }
    Ok(records)
}

/// Least-squares line `log K = intercept + slope · log(1/ε)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub rows: usize,
}

/// Exponent `d / N^{1/d}` of the subdomain-count bound.
pub fn theoretical_slope(d: usize, n: usize) -> f64 {
    d as f64 / (n as f64).powf(1.0 / d as f64)
}

/// Fits `(ε, K)` pairs, ignoring `K = 1` rows.
pub fn fit_slope(points: &[(f64, usize)]) -> Result<SlopeFit> {
    let xy: Vec<(f64, f64)> = points
        .iter()
        .filter(|&&(_, k)| k > 1)
        .map(|&(eps, k)| ((1.0 / eps).ln(), (k as f64).ln()))
        .collect();
    if xy.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "{} rows with K > 1, need at least 3",
            xy.len()
        )));
    }
    let m = xy.len() as f64;
    let mx = xy.iter().map(|p| p.0).sum::<f64>() / m;
    let my = xy.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = xy.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = xy.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = xy.iter().map(|p| (p.1 - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::InsufficientData("all tolerances are equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy == 0.0 { 1.0 } else { sxy * sxy / (sxx * syy) };
    Ok(SlopeFit {
        slope,
        intercept,
        r_squared,
        rows: xy.len(),
    })
}

/// Fits the sweep rows of one `(N, algorithm)`; flagged rows are skipped.
pub fn fit_loglog_slope(records: &[SweepRecord], n: usize, algorithm: Algorithm) -> Result<SlopeFit> {
    let points: Vec<(f64, usize)> = records
        .iter()
        .filter(|r| r.n == n && r.algorithm == algorithm && r.status == SweepStatus::Ok)
        .map(|r| (r.eps, r.k))
        .collect();
    fit_slope(&points)
}

/// Per-leaf estimator maxima over a fresh sample of `factor · train_size`
/// points inside each leaf box.
#[derive(Debug, Clone, PartialEq)]
pub struct VerificationRow {
    pub leaf: usize,
    pub eta_max: f64,
    /// `η_max / ε`
    pub ratio: f64,
}

pub fn verify_library(library: &Library, factor: usize, seed: u64) -> Result<Vec<VerificationRow>> {
    let eps = library.config().eps;
    let size = factor * library.config().train_size;
    library
        .leaves()
        .par_iter()
        .enumerate()
        .map(|(k, leaf)| {
            let sample = TrainingSet::random(&leaf.region, size, leaf.id.seed(mix_seed(seed)));
            let etas = estimate_all(&leaf.model, &library.kind(), &sample.points)?;
            let eta_max = etas.into_iter().fold(0.0, f64::max);
            Ok(VerificationRow {
                leaf: k,
                eta_max,
                ratio: eta_max / eps,
            })
        })
        .collect()
}
