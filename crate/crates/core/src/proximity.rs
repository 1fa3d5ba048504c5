//! Anchor-based proximity partitioning, the comparison method for the
//! tensor-product library. A node that misses the tolerance splits into a
//! child keeping its anchor and a child anchored at the estimator argmax;
//! points follow the Euclidean-nearer anchor at every internal node.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::codec::{self, Reader};
use crate::error::{Error, Result};
use crate::hp::io::{read_preamble, write_preamble};
use crate::hp::{BoolVec, ConfigEcho, Evaluation, HpConfig};
use crate::param::{mix_seed, Extent, Param, ParamBox, TrainingSet};
use crate::problem::{AffineProblem, ProblemKind};
use crate::rb::{estimate_all, greedy_build, GreedyOptions, Init, ReducedModel};

pub const PROXIMITY_MAGIC: &[u8; 4] = b"RBPX";
pub const PROXIMITY_VERSION: u32 = 1;
/// Candidate draws per requested training point before giving up.
pub const REJECTION_BUDGET: usize = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub enum AnchorState {
    Internal { children: [usize; 2] },
    Leaf(usize),
}

#[derive(Debug, Clone)]
pub struct AnchorNode {
    pub id: BoolVec,
    pub anchor: Param,
    pub state: AnchorState,
}

#[derive(Debug, Clone)]
pub struct ProximityLeaf {
    pub id: BoolVec,
    pub anchor: Param,
    pub model: ReducedModel,
    pub selected: Vec<Param>,
    pub eta_max: f64,
    /// Training points the leaf was certified on.
    pub train_count: usize,
    /// The points themselves, with `keep_offline_data`.
    pub training: Option<Vec<Param>>,
}

impl ProximityLeaf {
    pub fn basis_size(&self) -> usize {
        self.model.dim()
    }
}

#[derive(Debug, Clone)]
pub struct ProximityTree {
    kind: ProblemKind,
    config: ConfigEcho,
    nodes: Vec<AnchorNode>,
    leaves: Vec<ProximityLeaf>,
    truth_solves: usize,
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Follows nearer anchors from the root until a node without resolved
/// children; `children[i]` is `None` for unresolved nodes.
fn descend(anchors: &[Param], children: &[Option<[usize; 2]>], mu: &[f64]) -> usize {
    let mut node = 0;
    while let Some([c0, c1]) = children[node] {
        node = if squared_distance(mu, &anchors[c0]) <= squared_distance(mu, &anchors[c1]) {
            c0
        } else {
            c1
        };
    }
    node
}

impl ProximityTree {
    pub fn kind(&self) -> ProblemKind {
        self.kind
    }

    pub fn config(&self) -> ConfigEcho {
        self.config
    }

    pub fn root_box(&self) -> ParamBox {
        self.kind.domain()
    }

    pub fn nodes(&self) -> &[AnchorNode] {
        &self.nodes
    }

    pub fn leaves(&self) -> &[ProximityLeaf] {
        &self.leaves
    }

    pub fn num_leaves(&self) -> usize {
        self.leaves.len()
    }

    pub fn depth(&self) -> usize {
        self.leaves.iter().map(|l| l.id.level()).max().unwrap_or(1)
    }

    pub fn truth_solves(&self) -> usize {
        self.truth_solves
    }

    /// Leaf reached by descending to the nearer anchor (child 0 on ties).
    pub fn locate(&self, mu: &[f64]) -> Result<usize> {
        self.root_box().check(mu)?;
        let mut node = 0;
        loop {
            match self.nodes[node].state {
                AnchorState::Leaf(k) => return Ok(k),
                AnchorState::Internal { children: [c0, c1] } => {
                    let d0 = squared_distance(mu, &self.nodes[c0].anchor);
                    let d1 = squared_distance(mu, &self.nodes[c1].anchor);
                    node = if d0 <= d1 { c0 } else { c1 };
                }
            }
        }
    }

    pub fn evaluate(&self, mu: &[f64]) -> Result<Evaluation> {
        let leaf = self.locate(mu)?;
        let (coeffs, eta) = self.leaves[leaf].model.estimate(&self.kind, mu)?;
        Ok(Evaluation { coeffs, leaf, eta })
    }

    /// One row per leaf: `k, anchor_j…, n, eta_max, train_count`.
    pub fn partition_csv(&self) -> String {
        let d = self.root_box().dim();
        let mut out = String::from("k");
        for j in 1..=d {
            write!(out, ",anchor_{j}").unwrap();
        }
        out.push_str(",n,eta_max,train_count\n");
        for (k, leaf) in self.leaves.iter().enumerate() {
            write!(out, "{}", k + 1).unwrap();
            for v in &leaf.anchor {
                write!(out, ",{v}").unwrap();
            }
            writeln!(out, ",{},{:e},{}", leaf.basis_size(), leaf.eta_max, leaf.train_count).unwrap();
        }
        out
    }

    /// Leaf index on a `res × res` grid of cell centres over two free
    /// axes; row `i` runs along the first axis.
    pub fn raster(&self, res: usize) -> Result<Vec<Vec<usize>>> {
        let root = self.root_box();
        let free = root.free_axes();
        if free.len() != 2 {
            return Err(Error::InvalidArgument("rasterizing needs two free parameters".into()));
        }
        let (a0, b0) = root.interval(free[0]);
        let (a1, b1) = root.interval(free[1]);
        let mut mu = root.center();
        let mut grid = vec![vec![0; res]; res];
        for (i, row) in grid.iter_mut().enumerate() {
            mu[free[0]] = a0 + (b0 - a0) * (i as f64 + 0.5) / res as f64;
            for (j, cell) in row.iter_mut().enumerate() {
                mu[free[1]] = a1 + (b1 - a1) * (j as f64 + 0.5) / res as f64;
                *cell = self.locate(&mu)?;
            }
        }
        Ok(grid)
    }

    /// Header and config as for the tensor-product library, then every
    /// node's label, anchor and state, then the leaf models.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = codec::header(PROXIMITY_MAGIC, PROXIMITY_VERSION);
        write_preamble(&mut w, &self.kind, &self.config);
        w.u32(self.nodes.len());
        for node in &self.nodes {
            w.bits(node.id.bits());
            w.f64s(&node.anchor);
            match node.state {
                AnchorState::Internal { children } => {
                    w.u8(0);
                    w.u32(children[0]);
                    w.u32(children[1]);
                }
                AnchorState::Leaf(k) => {
                    w.u8(1);
                    w.u32(k);
                }
            }
        }
        w.u32(self.leaves.len());
        for leaf in &self.leaves {
            w.u32(leaf.train_count);
            w.f64(leaf.eta_max);
            w.model(&leaf.model, &leaf.selected);
        }
        w.finish()
    }

    pub fn from_bytes(data: &[u8]) -> Result<Self> {
        codec::decode(data, PROXIMITY_MAGIC, PROXIMITY_VERSION, parse_body)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}

fn parse_body(mut r: Reader<'_>) -> Result<ProximityTree> {
    let (kind, config) = read_preamble(&mut r)?;
    let d = kind.domain().dim();
    let count = r.u32()?;
    let mut nodes = Vec::new();
    for _ in 0..count {
        let id = BoolVec::from_bits(r.bits()?).map_err(|_| Error::Format("node label must start with 1".into()))?;
        let anchor = r.f64s(d)?;
        let state = match r.u8()? {
            0 => AnchorState::Internal {
                children: [r.u32()?, r.u32()?],
            },
            1 => AnchorState::Leaf(r.u32()?),
            t => return Err(Error::Format(format!("unknown node tag {t}"))),
        };
        nodes.push(AnchorNode { id, anchor, state });
    }
    let k = r.u32()?;
    let mut leaf_of = vec![None; k];
    for (i, node) in nodes.iter().enumerate() {
        match node.state {
            AnchorState::Internal { children } => {
                for (bit, c) in children.into_iter().enumerate() {
                    let ok = c > i && nodes.get(c).is_some_and(|n| n.id == node.id.child(bit == 1));
                    if !ok {
                        return Err(Error::Format(format!("node {} has an invalid child", node.id)));
                    }
                }
            }
            AnchorState::Leaf(l) => match leaf_of.get_mut(l) {
                Some(slot @ None) => *slot = Some(i),
                _ => return Err(Error::Format(format!("node {} has an invalid leaf index", node.id))),
            },
        }
    }
    let mut leaves = Vec::with_capacity(k);
    for slot in leaf_of {
        let node = &nodes[slot.ok_or_else(|| Error::Format("leaf without a node".into()))?];
        let train_count = r.u32()?;
        let eta_max = r.f64()?;
        let (model, selected) = r.model(kind.q_a(), kind.q_f(), d)?;
        leaves.push(ProximityLeaf {
            id: node.id.clone(),
            anchor: node.anchor.clone(),
            model,
            selected,
            eta_max,
            train_count,
            training: None,
        });
    }
    if !r.is_done() {
        return Err(Error::Format("trailing bytes after the last leaf".into()));
    }
    Ok(ProximityTree {
        kind,
        config,
        nodes,
        leaves,
        truth_solves: 0,
    })
}

struct NodeOutcome {
    leaf: Option<ProximityLeaf>,
    /// Estimator argmax after the anchor snapshot; the new child anchor.
    next_anchor: Option<Param>,
    truth_solves: usize,
}

/// Greedy on one node's training points, anchor first.
fn build_node(
    problem: &AffineProblem,
    cfg: &HpConfig,
    id: &BoolVec,
    anchor: &Param,
    mut points: Vec<Param>,
) -> Result<NodeOutcome> {
    points.insert(0, anchor.clone());
    let train = TrainingSet {
        points,
        seed: id.seed(cfg.seed),
        region: problem.domain(),
    };
    let opts = GreedyOptions {
        n_max: cfg.n,
        tol: cfg.eps,
        init: Init::Param(anchor.clone()),
    };
    let (space, trace) = greedy_build(problem, &train, &opts)?;
    if trace.final_eta_max <= cfg.eps {
        return Ok(NodeOutcome {
            leaf: Some(ProximityLeaf {
                id: id.clone(),
                anchor: anchor.clone(),
                selected: space.selected_params().to_vec(),
                eta_max: trace.final_eta_max,
                train_count: train.len(),
                training: cfg.keep_offline_data.then(|| train.points.clone()),
                model: space.into_model(),
            }),
            next_anchor: None,
            truth_solves: trace.truth_solves,
        });
    }
    let one = space.model().truncated(1.min(space.dim()));
    let etas = estimate_all(&one, &problem.kind(), &train.points)?;
    let mut best: Option<usize> = None;
    for (i, &eta) in etas.iter().enumerate().skip(1) {
        if train.points[i] != *anchor && best.is_none_or(|b| eta > etas[b]) {
            best = Some(i);
        }
    }
    let next = best.ok_or_else(|| Error::EmptyRegion(id.to_string()))?;
    Ok(NodeOutcome {
        leaf: None,
        next_anchor: Some(train.points[next].clone()),
        truth_solves: trace.truth_solves,
    })
}

/// Bounding box of `region ∩ {x : |x − keep| ≤ |x − other|}`. The
/// half-space is `a·x ≤ c` with `a = 2(other − keep)`; along each free
/// axis the other coordinates take whichever bound minimizes `a·x`.
fn clip_to_nearer(region: &ParamBox, keep: &[f64], other: &[f64]) -> ParamBox {
    let free = region.free_axes();
    let a: Vec<f64> = keep.iter().zip(other).map(|(k, o)| 2.0 * (o - k)).collect();
    let c: f64 = other.iter().map(|o| o * o).sum::<f64>() - keep.iter().map(|k| k * k).sum::<f64>();
    let low_term = |j: usize| {
        let (l, u) = region.interval(j);
        (a[j] * l).min(a[j] * u)
    };
    let total: f64 = free.iter().map(|&j| low_term(j)).sum();
    let mut axes = region.axes().to_vec();
    for &j in &free {
        let (l, u) = region.interval(j);
        if a[j] == 0.0 {
            continue;
        }
        let bound = (c - (total - low_term(j))) / a[j];
        let pad = 1e-12 * (u - l);
        let (lo, hi) = if a[j] > 0.0 {
            (l, u.min(bound + pad))
        } else {
            (l.max(bound - pad), u)
        };
        if lo < hi {
            axes[j] = Extent::Free { lower: lo, upper: hi };
        }
    }
    ParamBox::new(axes).expect("clipped bounds stay ordered")
}

/// Up to `count` uniform points of node `node`'s membership region, by
/// rejection from its bounding box.
fn sample_region(
    anchors: &[Param],
    children: &[Option<[usize; 2]>],
    node: usize,
    bbox: &ParamBox,
    count: usize,
    seed: u64,
) -> Vec<Param> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut points = Vec::with_capacity(count);
    for _ in 0..REJECTION_BUDGET * count {
        let mu = bbox.sample(&mut rng);
        if descend(anchors, children, &mu) == node {
            points.push(mu);
            if points.len() == count {
                break;
            }
        }
    }
    points
}

/// Builds the proximity tree level by level. Every node draws a fresh
/// training sample of its own membership region (its anchor plus
/// `train_size − 1` uniform points).
pub fn build_library_proximity(problem: &AffineProblem, cfg: &HpConfig) -> Result<ProximityTree> {
    cfg.validate()?;
    let root_box = problem.domain();
    let root_anchor = match &cfg.init {
        Init::Param(mu) => {
            root_box.check(mu)?;
            mu.clone()
        }
        Init::Random { seed } => root_box.sample(&mut ChaCha8Rng::seed_from_u64(mix_seed(*seed))),
    };

    let mut ids = vec![BoolVec::root()];
    let mut anchors = vec![root_anchor];
    let mut bboxes = vec![root_box.clone()];
    let mut children: Vec<Option<[usize; 2]>> = vec![None];
    let mut leaf_index: Vec<Option<usize>> = vec![None];
    let mut leaves = Vec::new();
    let mut truth_solves = 0;
    let mut active = vec![0usize];

    while !active.is_empty() {
        let members: Vec<Vec<Param>> = active
            .par_iter()
            .map(|&i| {
                let points = sample_region(
                    &anchors,
                    &children,
                    i,
                    &bboxes[i],
                    cfg.train_size - 1,
                    ids[i].seed(cfg.seed),
                );
                if points.is_empty() && cfg.train_size > 1 {
                    Err(Error::EmptyRegion(ids[i].to_string()))
                } else {
                    Ok(points)
                }
            })
            .collect::<Result<_>>()?;

        let outcomes: Vec<NodeOutcome> = active
            .par_iter()
            .zip(members)
            .map(|(&i, points)| build_node(problem, cfg, &ids[i], &anchors[i], points))
            .collect::<Result<_>>()?;
        let mut next = Vec::new();
        for (&i, outcome) in active.iter().zip(outcomes) {
            truth_solves += outcome.truth_solves;
            if let Some(leaf) = outcome.leaf {
                leaf_index[i] = Some(leaves.len());
                leaves.push(leaf);
                continue;
            }
            if ids[i].level() >= cfg.max_depth {
                return Err(Error::DepthExceeded(cfg.max_depth));
            }
            let first = ids.len();
            let keep = anchors[i].clone();
            let other = outcome.next_anchor.expect("split nodes carry an anchor");
            let boxes = [
                clip_to_nearer(&bboxes[i], &keep, &other),
                clip_to_nearer(&bboxes[i], &other, &keep),
            ];
            for ((bit, anchor), bbox) in [(false, keep), (true, other)].into_iter().zip(boxes) {
                ids.push(ids[i].child(bit));
                anchors.push(anchor);
                bboxes.push(bbox);
                children.push(None);
                leaf_index.push(None);
            }
            children[i] = Some([first, first + 1]);
            next.extend([first, first + 1]);
        }
        active = next;
    }

    let nodes = ids
        .into_iter()
        .zip(anchors)
        .enumerate()
        .map(|(i, (id, anchor))| AnchorNode {
            id,
            anchor,
            state: match (children[i], leaf_index[i]) {
                (Some(children), _) => AnchorState::Internal { children },
                (None, Some(k)) => AnchorState::Leaf(k),
                (None, None) => unreachable!("every node is resolved once the active set is empty"),
            },
        })
        .collect();
    Ok(ProximityTree {
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
