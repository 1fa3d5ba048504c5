//! Binary library files. Only online data is written: boxes, reduced
//! operators and the residual factor. Layout (little-endian):
//!
//! ```text
//! "RBHP" u32 version
//! str problem descriptor
//! u64 N, f64 ε, u64 train size, u64 seed
//! u32 d, d × (u8 frozen, f64 lower, f64 upper)    root box
//! u32 Q_a, u32 Q_f
//! u32 K
//! K × leaf record
//! [u8; 32] SHA-256 of everything above
//! ```
//!
//! A leaf record holds its label bits, box bounds, `η_max`, `n`, the
//! selected parameters, `Zᵀ A_q Z` and `Zᵀ F_q` row-major, and the columns
//! of the residual factor. The tree is rebuilt on load by replaying the
//! longest-edge splits along each label.

use std::fs;
use std::path::Path;

use super::{split_longest_edge, BoolVec, ConfigEcho, Leaf, Library, NodeState, TreeNode};
use crate::codec::{self, Reader, Writer};
use crate::error::{Error, Result};
use crate::problem::ProblemKind;

pub const LIBRARY_MAGIC: &[u8; 4] = b"RBHP";
pub const LIBRARY_VERSION: u32 = 1;

pub(crate) fn write_preamble(w: &mut Writer, kind: &ProblemKind, config: &ConfigEcho) {
    w.str(&kind.descriptor());
    w.u64(config.n as u64);
    w.f64(config.eps);
    w.u64(config.train_size as u64);
    w.u64(config.seed);
    w.root_box(&kind.domain());
    w.u32(kind.q_a());
    w.u32(kind.q_f());
}

pub(crate) fn read_preamble(r: &mut Reader<'_>) -> Result<(ProblemKind, ConfigEcho)> {
    let kind = ProblemKind::from_descriptor(&r.str()?)?;
    let config = ConfigEcho {
        n: r.u64()? as usize,
        eps: r.f64()?,
        train_size: r.u64()? as usize,
        seed: r.u64()?,
    };
    r.root_box(&kind)?;
    if (r.u32()?, r.u32()?) != (kind.q_a(), kind.q_f()) {
        return Err(Error::Format("affine term counts do not match the problem".into()));
    }
    Ok((kind, config))
}

impl Library {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = codec::header(LIBRARY_MAGIC, LIBRARY_VERSION);
        write_preamble(&mut w, &self.kind, &self.config);
        w.u32(self.leaves.len());
        for leaf in &self.leaves {
            w.bits(leaf.id.bits());
            for j in 0..leaf.region.dim() {
                let (a, b) = leaf.region.interval(j);
                w.f64(a);
                w.f64(b);
            }
            w.f64(leaf.eta_max);
            w.model(&leaf.model, &leaf.selected);
        }
        w.finish()
    }

    pub fn from_bytes(data: &[u8]) -> Result<Self> {
        codec::decode(data, LIBRARY_MAGIC, LIBRARY_VERSION, parse_body)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}

fn parse_body(mut r: Reader<'_>) -> Result<Library> {
    let (kind, config) = read_preamble(&mut r)?;
    let root_box = kind.domain();
    let d = root_box.dim();
    let k = r.u32()?;

    let mut nodes = vec![TreeNode {
        id: BoolVec::root(),
        region: root_box,
        state: NodeState::Leaf(usize::MAX),
    }];
    let mut resolved = vec![false];
    let mut leaves = Vec::new();
    for index in 0..k {
        let id = BoolVec::from_bits(r.bits()?).map_err(|_| Error::Format("leaf label must start with 1".into()))?;
        let bounds = r.f64s(2 * d)?;
        let eta_max = r.f64()?;
        let (model, selected) = r.model(kind.q_a(), kind.q_f(), d)?;

        let node = replay(&mut nodes, &mut resolved, &id)?;
        let region = nodes[node].region.clone();
        if !(0..d).all(|j| region.interval(j) == (bounds[2 * j], bounds[2 * j + 1])) {
            return Err(Error::Format(format!("leaf {id} box does not match its label")));
        }
        nodes[node].state = NodeState::Leaf(index);
        resolved[node] = true;
        leaves.push(Leaf {
            id,
            region,
            model,
            selected,
            eta_max,
            basis: None,
        });
    }
    if !r.is_done() {
        return Err(Error::Format("trailing bytes after the last leaf".into()));
    }
    if resolved.iter().any(|&done| !done) {
        return Err(Error::Format("leaves do not cover the root box".into()));
    }
    Ok(Library {
        kind,
        config,
        nodes,
        leaves,
        truth_solves: 0,
    })
}

/// Walks `id` from the root, splitting unresolved nodes on the way, and
/// returns the node it ends at.
fn replay(nodes: &mut Vec<TreeNode>, resolved: &mut Vec<bool>, id: &BoolVec) -> Result<usize> {
    let mut node = 0;
    for &bit in &id.bits()[1..] {
        if !resolved[node] {
            let (lo, hi, axis) = split_longest_edge(&nodes[node].region)?;
            let mid = lo.interval(axis).1;
            let first = nodes.len();
            for (b, region) in [(false, lo), (true, hi)] {
                nodes.push(TreeNode {
                    id: nodes[node].id.child(b),
                    region,
                    state: NodeState::Leaf(usize::MAX),
                });
                resolved.push(false);
            }
            nodes[node].state = NodeState::Internal {
                axis,
                mid,
                children: [first, first + 1],
            };
            resolved[node] = true;
        }
        node = match nodes[node].state {
            NodeState::Internal { children, .. } => children[bit as usize],
            NodeState::Leaf(_) => return Err(Error::Format(format!("leaf {id} lies below another leaf"))),
        };
    }
    if resolved[node] {
        return Err(Error::Format(format!("leaf {id} is not a leaf of the partition")));
    }
    Ok(node)
}
