//! Triangular meshes of the two physical domains used by the built-in problems.
//!
//! Nodes on the Dirichlet boundary are eliminated; the remaining (interior)
//! nodes are numbered contiguously in node order and form the unknowns of
//! every assembled operator.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::io::Write;
use std::path::Path;

use crate::error::{Error, Result};

/// Which physical boundary the mesh approximates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Boundary {
    UnitSquare,
    Circle { radius: f64 },
}

#[derive(Debug, Clone)]
pub struct Mesh {
    nodes: Vec<[f64; 2]>,
    triangles: Vec<[usize; 3]>,
    on_boundary: Vec<bool>,
    dof_of_node: Vec<Option<usize>>,
    node_of_dof: Vec<usize>,
    boundary: Boundary,
}

impl Mesh {
    /// Builds a mesh from raw connectivity. Triangles are reoriented
    /// counter-clockwise; degenerate triangles are rejected.
    pub fn new(
        nodes: Vec<[f64; 2]>,
        mut triangles: Vec<[usize; 3]>,
        on_boundary: Vec<bool>,
        boundary: Boundary,
    ) -> Result<Self> {
        if on_boundary.len() != nodes.len() {
            return Err(Error::InvalidArgument(
                "boundary flags must match the node count".into(),
            ));
        }
        for tri in &mut triangles {
            if tri.iter().any(|&i| i >= nodes.len()) {
                return Err(Error::InvalidArgument(format!(
                    "triangle {tri:?} references a missing node"
                )));
            }
            let area = signed_area(&nodes[tri[0]], &nodes[tri[1]], &nodes[tri[2]]);
            if area.abs() < 1e-300 {
                return Err(Error::InvalidArgument(format!("degenerate triangle {tri:?}")));
            }
            if area < 0.0 {
                tri.swap(1, 2);
            }
        }
        let mut dof_of_node = vec![None; nodes.len()];
        let mut node_of_dof = Vec::new();
        for (i, &b) in on_boundary.iter().enumerate() {
            if !b {
                dof_of_node[i] = Some(node_of_dof.len());
                node_of_dof.push(i);
            }
        }
        Ok(Self {
            nodes,
            triangles,
            on_boundary,
            dof_of_node,
            node_of_dof,
            boundary,
        })
    }

    pub fn nodes(&self) -> &[[f64; 2]] {
        &self.nodes
    }

    pub fn triangles(&self) -> &[[usize; 3]] {
        &self.triangles
    }

    pub fn boundary(&self) -> Boundary {
        self.boundary
    }

    pub fn is_boundary(&self, node: usize) -> bool {
        self.on_boundary[node]
    }

    pub fn boundary_nodes(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.nodes.len()).filter(|&i| self.on_boundary[i])
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// Number of interior degrees of freedom.
    pub fn num_dofs(&self) -> usize {
        self.node_of_dof.len()
    }

    pub fn dof_of_node(&self, node: usize) -> Option<usize> {
        self.dof_of_node[node]
    }

    pub fn node_of_dof(&self, dof: usize) -> usize {
        self.node_of_dof[dof]
    }

    pub fn triangle_area(&self, t: usize) -> f64 {
        let [a, b, c] = self.triangles[t];
        signed_area(&self.nodes[a], &self.nodes[b], &self.nodes[c])
    }

    pub fn total_area(&self) -> f64 {
        (0..self.triangles.len()).map(|t| self.triangle_area(t)).sum()
    }

    /// Interior dof whose node is closest to `point`.
    pub fn nearest_dof(&self, point: [f64; 2]) -> Option<usize> {
        self.node_of_dof
            .iter()
            .enumerate()
            .min_by(|(_, &a), (_, &b)| dist2(&self.nodes[a], &point).total_cmp(&dist2(&self.nodes[b], &point)))
            .map(|(dof, _)| dof)
    }

    /// Plain-text export: one `x y` line per node, a blank line, then one
    /// `i j k` line per triangle (0-based).
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for [x, y] in &self.nodes {
            writeln!(out, "{x} {y}").unwrap();
        }
        out.push('\n');
        for [i, j, k] in &self.triangles {
            writeln!(out, "{i} {j} {k}").unwrap();
        }
        out
    }

    pub fn write_text(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut f = std::fs::File::create(path)?;
        f.write_all(self.to_text().as_bytes())?;
        Ok(())
    }
}

pub(crate) fn signed_area(a: &[f64; 2], b: &[f64; 2], c: &[f64; 2]) -> f64 {
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

fn dist2(a: &[f64; 2], b: &[f64; 2]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

/// Structured triangulation of the unit square: `n` cells per side, each
/// cell split along its lower-left to upper-right diagonal. Nodes are
/// numbered row by row from the origin.
pub fn generate_unit_square_mesh(n: usize) -> Result<Mesh> {
    if n == 0 {
        return Err(Error::InvalidArgument("n_per_side must be at least 1".into()));
    }
    let h = 1.0 / n as f64;
    let mut nodes = Vec::with_capacity((n + 1) * (n + 1));
    let mut on_boundary = Vec::with_capacity((n + 1) * (n + 1));
    for j in 0..=n {
        for i in 0..=n {
            nodes.push([i as f64 * h, j as f64 * h]);
            on_boundary.push(i == 0 || j == 0 || i == n || j == n);
        }
    }
    let id = |i: usize, j: usize| j * (n + 1) + i;
    let mut triangles = Vec::with_capacity(2 * n * n);
    for j in 0..n {
        for i in 0..n {
            triangles.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
            triangles.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
        }
    }
    Mesh::new(nodes, triangles, on_boundary, Boundary::UnitSquare)
}

/// Concentric-ring triangulation of the disk of the given radius centred at
/// the origin. Ring `k` (of `m`) carries `s * k` equally spaced nodes, which
/// yields exactly `s * m^2` triangles; `(s, m)` with `s` in 5..=8 is chosen
/// to land closest to `target_triangles`.
pub fn generate_disk_mesh(radius: f64, target_triangles: usize) -> Result<Mesh> {
    if !(radius > 0.0) || !radius.is_finite() {
        return Err(Error::InvalidArgument(format!("radius must be positive, got {radius}")));
    }
    if target_triangles < 8 {
        return Err(Error::InvalidArgument(format!(
            "target of {target_triangles} triangles is too small to triangulate a disk (minimum 8)"
        )));
    }
    let (s, m) = ring_layout(target_triangles);

    let mut nodes = vec![[0.0, 0.0]];
    let mut on_boundary = vec![m == 0];
    let mut ring_start = vec![0usize];
    for k in 1..=m {
        ring_start.push(nodes.len());
        let count = s * k;
        let r = radius * k as f64 / m as f64;
        for j in 0..count {
            let phi = 2.0 * PI * j as f64 / count as f64;
            let mut p = [r * phi.cos(), r * phi.sin()];
            if k == m {
                // snap exactly onto the circle
                let norm = (p[0] * p[0] + p[1] * p[1]).sqrt();
                p = [p[0] * radius / norm, p[1] * radius / norm];
            }
            nodes.push(p);
            on_boundary.push(k == m);
        }
    }

    let mut triangles = Vec::with_capacity(s * m * m);
    // centre fan
    for j in 0..s {
        triangles.push([0, ring_start[1] + j, ring_start[1] + (j + 1) % s]);
    }
    for k in 2..=m {
        let (inner_n, outer_n) = (s * (k - 1), s * k);
        let (inner0, outer0) = (ring_start[k - 1], ring_start[k]);
        let (mut i, mut o) = (0usize, 0usize);
        // Advance around both rings, always stepping the one whose next
        // node has the smaller angle.
        while i < inner_n || o < outer_n {
            let next_inner = (i + 1) as f64 / inner_n as f64;
            let next_outer = (o + 1) as f64 / outer_n as f64;
            let a = inner0 + i % inner_n;
            let b = outer0 + o % outer_n;
            if o < outer_n && (i >= inner_n || next_outer <= next_inner) {
                triangles.push([a, b, outer0 + (o + 1) % outer_n]);
                o += 1;
            } else {
                triangles.push([a, b, inner0 + (i + 1) % inner_n]);
                i += 1;
            }
        }
    }
    Mesh::new(nodes, triangles, on_boundary, Boundary::Circle { radius })
}

fn ring_layout(target: usize) -> (usize, usize) {
    let mut best = (8, 1);
    let mut best_err = f64::INFINITY;
    for s in 5..=8usize {
        let m_est = (target as f64 / s as f64).sqrt();
        for m in [m_est.floor() as usize, m_est.ceil() as usize] {
            if m == 0 {
                continue;
            }
            let err = ((s * m * m) as f64 - target as f64).abs();
            if err < best_err {
                best_err = err;
                best = (s, m);
            }
        }
    }
    best
}
