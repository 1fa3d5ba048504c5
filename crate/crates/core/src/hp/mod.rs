//! Nonlinear reduced-basis library: the parameter box is bisected along
//! its longest edge until every leaf's local greedy space meets the
//! tolerance on its own training sample.

pub(crate) mod io;
mod stats;

use std::fmt::{self, Write as _};

use nalgebra::DVector;
use rayon::prelude::*;

pub use io::{LIBRARY_MAGIC, LIBRARY_VERSION};
pub use stats::PartitionStats;

use crate::error::{Error, Result};
use crate::param::{mix_seed, Param, ParamBox, TrainingSet};
use crate::problem::{AffineProblem, ProblemKind};
use crate::rb::{greedy_build, GreedyOptions, Init, ReducedModel};

/// Default bound on the tree depth.
pub const DEFAULT_MAX_DEPTH: usize = 40;

/// Path label of a tree node: `1` for the root, children append `0`/`1`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BoolVec(Vec<bool>);

impl BoolVec {
    pub fn root() -> Self {
        Self(vec![true])
    }

    pub fn from_bits(bits: Vec<bool>) -> Result<Self> {
        if bits.first() != Some(&true) {
            return Err(Error::InvalidArgument("a node label must start with 1".into()));
        }
        Ok(Self(bits))
    }

    pub fn child(&self, bit: bool) -> Self {
        let mut bits = self.0.clone();
        bits.push(bit);
        Self(bits)
    }

    pub fn bits(&self) -> &[bool] {
        &self.0
    }

    /// Tree level, 1 at the root.
    pub fn level(&self) -> usize {
        self.0.len()
    }

    /// Deterministic per-node seed derived from a global seed.
    pub fn seed(&self, global: u64) -> u64 {
        self.0
            .iter()
            .fold(mix_seed(global), |s, &b| mix_seed(s ^ (1 + b as u64)))
    }
}

impl fmt::Display for BoolVec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.0 {
            f.write_char(if b { '1' } else { '0' })?;
        }
        Ok(())
    }
}

/// Bisects `region` at the midpoint of its longest free side (lowest index
/// on ties). Returns `(lower half, upper half, axis)`.
pub fn split_longest_edge(region: &ParamBox) -> Result<(ParamBox, ParamBox, usize)> {
    let mut best: Option<(usize, f64)> = None;
    for j in region.free_axes() {
        let (a, b) = region.interval(j);
        if best.is_none_or(|(_, h)| b - a > h) {
            best = Some((j, b - a));
        }
    }
    let (axis, _) = best.ok_or_else(|| Error::InvalidArgument("box has no free coordinate to split".into()))?;
    let (a, b) = region.interval(axis);
    let (lo, hi) = region.split_at(axis, 0.5 * (a + b));
    Ok((lo, hi, axis))
}

/// Offline settings of [`build_library`].
#[derive(Debug, Clone)]
pub struct HpConfig {
    /// Maximum local basis size `N`.
    pub n: usize,
    /// Leaf tolerance `ε`.
    pub eps: f64,
    pub train_size: usize,
    pub seed: u64,
    /// First greedy parameter at the root; descendants start from a random
    /// training point.
    pub init: Init,
    pub max_depth: usize,
    /// Keep truth-dimension bases (and, for the proximity tree, training
    /// points) in memory after the build.
    pub keep_offline_data: bool,
}

impl HpConfig {
    pub fn new(n: usize, eps: f64, train_size: usize, seed: u64) -> Self {
        Self {
            n,
            eps,
            train_size,
            seed,
            init: Init::Random { seed },
            max_depth: DEFAULT_MAX_DEPTH,
            keep_offline_data: false,
        }
    }

    pub fn with_init(mut self, init: Init) -> Self {
        self.init = init;
        self
    }

    pub fn with_max_depth(mut self, depth: usize) -> Self {
        self.max_depth = depth;
        self
    }

    pub fn keeping_offline_data(mut self) -> Self {
        self.keep_offline_data = true;
        self
    }

    pub(crate) fn validate(&self) -> Result<()> {
        if !(self.eps > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "tolerance must be positive, got {}",
                self.eps
            )));
        }
        if self.n == 0 {
            return Err(Error::InvalidArgument("N must be at least 1".into()));
        }
        if self.train_size < self.n {
            return Err(Error::InvalidArgument(format!(
                "training size {} is smaller than N = {}",
                self.train_size, self.n
            )));
        }
        if self.max_depth == 0 {
            return Err(Error::InvalidArgument("maximum depth must be at least 1".into()));
        }
        Ok(())
    }
}

/// The settings recorded with a built library.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfigEcho {
    pub n: usize,
    pub eps: f64,
    pub train_size: usize,
    pub seed: u64,
}

/// A leaf subdomain with its local reduced model.
#[derive(Debug, Clone)]
pub struct Leaf {
    pub id: BoolVec,
    pub region: ParamBox,
    pub model: ReducedModel,
    pub selected: Vec<Param>,
    /// Estimator maximum over the leaf's training sample.
    pub eta_max: f64,
    /// X-orthonormal basis; only present on freshly built libraries with
    /// `keep_offline_data`.
    pub basis: Option<Vec<DVector<f64>>>,
}

impl Leaf {
    pub fn basis_size(&self) -> usize {
        self.model.dim()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum NodeState {
    Internal {
        axis: usize,
        mid: f64,
        children: [usize; 2],
    },
    Leaf(usize),
}

#[derive(Debug, Clone)]
pub struct TreeNode {
    pub id: BoolVec,
    pub region: ParamBox,
    pub state: NodeState,
}

/// Result of an online query.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub coeffs: DVector<f64>,
    pub leaf: usize,
    pub eta: f64,
}

/// Leaf models over a tensor-product partition of the parameter box.
#[derive(Debug, Clone)]
pub struct Library {
    kind: ProblemKind,
    config: ConfigEcho,
    nodes: Vec<TreeNode>,
    leaves: Vec<Leaf>,
    truth_solves: usize,
}

impl Library {
    pub fn kind(&self) -> ProblemKind {
        self.kind
    }

    pub fn config(&self) -> ConfigEcho {
        self.config
    }

    pub fn root_box(&self) -> &ParamBox {
        &self.nodes[0].region
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    pub fn leaves(&self) -> &[Leaf] {
        &self.leaves
    }

    /// Number of leaves `K`.
    pub fn num_leaves(&self) -> usize {
        self.leaves.len()
    }

    /// Deepest leaf level `L`.
    pub fn depth(&self) -> usize {
        self.leaves.iter().map(|l| l.id.level()).max().unwrap_or(1)
    }

    /// Truth solves spent offline; zero for a loaded library.
    pub fn truth_solves(&self) -> usize {
        self.truth_solves
    }

    /// Index of the leaf containing `μ`. Children split `[a, mid)` /
    /// `[mid, b]`, so every point of the closed root box has one leaf.
    pub fn locate(&self, mu: &[f64]) -> Result<usize> {
        self.root_box().check(mu)?;
        let mut node = 0;
        loop {
            match self.nodes[node].state {
                NodeState::Leaf(k) => return Ok(k),
                NodeState::Internal { axis, mid, children } => {
                    node = if mu[axis] < mid { children[0] } else { children[1] };
                }
            }
        }
    }

    /// Reduced solve and error bound in the leaf containing `μ`.
    pub fn evaluate(&self, mu: &[f64]) -> Result<Evaluation> {
        let leaf = self.locate(mu)?;
        let (coeffs, eta) = self.leaves[leaf].model.estimate(&self.kind, mu)?;
        Ok(Evaluation { coeffs, leaf, eta })
    }

    /// One row per leaf: `k, lower_j, upper_j, …, n, eta_max` (1-based `k`).
    pub fn partition_csv(&self) -> String {
        let d = self.root_box().dim();
        let mut out = String::from("k");
        for j in 1..=d {
            write!(out, ",lower_{j},upper_{j}").unwrap();
        }
        out.push_str(",n,eta_max\n");
        for (k, leaf) in self.leaves.iter().enumerate() {
            write!(out, "{}", k + 1).unwrap();
            for j in 0..d {
                let (a, b) = leaf.region.interval(j);
                write!(out, ",{a},{b}").unwrap();
            }
            writeln!(out, ",{},{:e}", leaf.basis_size(), leaf.eta_max).unwrap();
        }
        out
    }
}

struct NodeOutcome {
    leaf: Option<Leaf>,
    truth_solves: usize,
}

fn build_node(problem: &AffineProblem, cfg: &HpConfig, id: &BoolVec, region: &ParamBox) -> Result<NodeOutcome> {
    let seed = id.seed(cfg.seed);
    let mut train = TrainingSet::random(region, cfg.train_size, seed);
    let init = match (&cfg.init, id.level()) {
        (Init::Param(mu), 1) => {
            train.points[0] = mu.clone();
            Init::Param(mu.clone())
        }
        _ => Init::Random { seed: mix_seed(seed) },
    };
    let opts = GreedyOptions {
        n_max: cfg.n,
        tol: cfg.eps,
        init,
    };
    let (space, trace) = greedy_build(problem, &train, &opts)?;
    let leaf = (trace.final_eta_max <= cfg.eps).then(|| Leaf {
        id: id.clone(),
        region: region.clone(),
        selected: space.selected_params().to_vec(),
        eta_max: trace.final_eta_max,
        basis: cfg.keep_offline_data.then(|| space.basis().to_vec()),
        model: space.into_model(),
    });
    Ok(NodeOutcome {
        leaf,
        truth_solves: trace.truth_solves,
    })
}

/// Builds the library level by level. Nodes of one level are independent
/// and run in parallel; results are merged in a fixed order.
pub fn build_library(problem: &AffineProblem, cfg: &HpConfig) -> Result<Library> {
    cfg.validate()?;
    let root_box = problem.domain();
    if let Init::Param(mu) = &cfg.init {
        root_box.check(mu)?;
    }

    let mut ids = vec![BoolVec::root()];
    let mut regions = vec![root_box];
    let mut states: Vec<Option<NodeState>> = vec![None];
    let mut leaves = Vec::new();
    let mut truth_solves = 0;
    let mut active = vec![0usize];

    while !active.is_empty() {
        let outcomes: Vec<NodeOutcome> = active
            .par_iter()
            .map(|&i| build_node(problem, cfg, &ids[i], &regions[i]))
            .collect::<Result<_>>()?;
        let mut next = Vec::new();
        for (&i, outcome) in active.iter().zip(outcomes) {
            truth_solves += outcome.truth_solves;
            if let Some(leaf) = outcome.leaf {
                states[i] = Some(NodeState::Leaf(leaves.len()));
                leaves.push(leaf);
                continue;
            }
            if ids[i].level() >= cfg.max_depth {
                return Err(Error::DepthExceeded(cfg.max_depth));
            }
            let (lo, hi, axis) = split_longest_edge(&regions[i])?;
            let mid = lo.interval(axis).1;
            let first = ids.len();
            for (bit, child) in [(false, lo), (true, hi)] {
                ids.push(ids[i].child(bit));
                regions.push(child);
                states.push(None);
            }
            states[i] = Some(NodeState::Internal {
                axis,
                mid,
                children: [first, first + 1],
            });
            next.extend([first, first + 1]);
        }
        active = next;
    }

    let nodes = ids
        .into_iter()
        .zip(regions)
        .zip(states)
        .map(|((id, region), state)| TreeNode {
            id,
            region,
            state: state.expect("every node is resolved once the active set is empty"),
        })
        .collect();
    Ok(Library {
        kind: problem.kind(),
        config: ConfigEcho {
            n: cfg.n,
            eps: cfg.eps,
            train_size: cfg.train_size,
            seed: cfg.seed,
        },
        nodes,
        leaves,
        truth_solves,
    })
}

#[cfg(test)]
mod tests;
