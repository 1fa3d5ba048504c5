//! P1 operator and load assembly.
//!
//! `*_full` variants act on every mesh node and are what the element-level
//! tests inspect; the plain variants restrict to interior dofs, which is how
//! homogeneous Dirichlet conditions are imposed.

use nalgebra::DVector;

use super::mesh::Mesh;
use super::sparse::{BandLayout, CsrMatrix, Factorization};
use crate::error::{Error, Result};

/// Sparse operator over the interior dofs of a mesh.
#[derive(Debug, Clone)]
pub struct OperatorMatrix {
    matrix: CsrMatrix,
    symmetric: bool,
}

impl OperatorMatrix {
    pub fn new(matrix: CsrMatrix, symmetric: bool) -> Self {
        assert_eq!(matrix.nrows(), matrix.ncols());
        Self { matrix, symmetric }
    }

    pub fn csr(&self) -> &CsrMatrix {
        &self.matrix
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows()
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn mul_vec(&self, x: &DVector<f64>) -> DVector<f64> {
        self.matrix.mul_vec(x)
    }

    /// `x^T A y`
    pub fn bilinear(&self, x: &DVector<f64>, y: &DVector<f64>) -> f64 {
        x.dot(&self.matrix.mul_vec(y))
    }
}

/// Axis of a directional derivative.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
}

/// Three-point degree-2 rule on the reference triangle (barycentric
/// coordinates, weights sum to one).
const GAUSS3: [([f64; 3], f64); 3] = [
    ([2.0 / 3.0, 1.0 / 6.0, 1.0 / 6.0], 1.0 / 3.0),
    ([1.0 / 6.0, 2.0 / 3.0, 1.0 / 6.0], 1.0 / 3.0),
    ([1.0 / 6.0, 1.0 / 6.0, 2.0 / 3.0], 1.0 / 3.0),
];

/// Gradients of the three barycentric hat functions on a triangle.
pub(crate) fn hat_gradients(p: &[[f64; 2]; 3]) -> [[f64; 2]; 3] {
    let two_area = (p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]);
    let mut g = [[0.0; 2]; 3];
    for i in 0..3 {
        let (j, k) = ((i + 1) % 3, (i + 2) % 3);
        g[i] = [(p[j][1] - p[k][1]) / two_area, (p[k][0] - p[j][0]) / two_area];
    }
    g
}

fn corners(mesh: &Mesh, t: usize) -> [[f64; 2]; 3] {
    let tri = mesh.triangles()[t];
    [mesh.nodes()[tri[0]], mesh.nodes()[tri[1]], mesh.nodes()[tri[2]]]
}

/// Mean of `weight` over triangle `t` with the given quadrature rule.
pub(crate) fn triangle_mean<F: Fn(f64, f64) -> f64>(p: &[[f64; 2]; 3], rule: &[([f64; 3], f64)], weight: &F) -> f64 {
    rule.iter()
        .map(|(bary, w)| {
            let x = bary[0] * p[0][0] + bary[1] * p[1][0] + bary[2] * p[2][0];
            let y = bary[0] * p[0][1] + bary[1] * p[1][1] + bary[2] * p[2][1];
            w * weight(x, y)
        })
        .sum()
}

/// `∫ weight ∇φ_j·∇φ_i` over all nodes, with the mean of `weight` per
/// triangle taken from `rule`.
pub fn assemble_weighted_stiffness_full_with_rule<F: Fn(f64, f64) -> f64>(
    mesh: &Mesh,
    weight: F,
    rule: &[([f64; 3], f64)],
) -> CsrMatrix {
    let mut triplets = Vec::with_capacity(9 * mesh.triangles().len());
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let p = corners(mesh, t);
        let g = hat_gradients(&p);
        let scale = mesh.triangle_area(t) * triangle_mean(&p, rule, &weight);
        for i in 0..3 {
            for j in 0..3 {
                let v = scale * (g[i][0] * g[j][0] + g[i][1] * g[j][1]);
                triplets.push((tri[i], tri[j], v));
            }
        }
    }
    CsrMatrix::from_triplets(mesh.num_nodes(), mesh.num_nodes(), triplets)
}

pub fn assemble_weighted_stiffness_full<F: Fn(f64, f64) -> f64>(mesh: &Mesh, weight: F) -> CsrMatrix {
    assemble_weighted_stiffness_full_with_rule(mesh, weight, &GAUSS3)
}

/// Weighted stiffness over interior dofs. With `weight ≡ 1` this is the
/// inner-product matrix of the H¹₀ seminorm.
pub fn assemble_weighted_stiffness<F: Fn(f64, f64) -> f64>(mesh: &Mesh, weight: F) -> OperatorMatrix {
    OperatorMatrix::new(restrict(mesh, &assemble_weighted_stiffness_full(mesh, weight)), true)
}

/// Unit-weight stiffness in closed form (no quadrature).
pub fn assemble_stiffness(mesh: &Mesh) -> OperatorMatrix {
    OperatorMatrix::new(
        restrict(
            mesh,
            &assemble_weighted_stiffness_full_with_rule(mesh, |_, _| 1.0, &[([1.0 / 3.0; 3], 1.0)]),
        ),
        true,
    )
}

/// `(C)_{ij} = ∫ (∂φ_j/∂axis) φ_i` over all nodes. The integrand is linear
/// per triangle, so `∫_T φ_i = |T|/3` makes this exact.
pub fn assemble_directional_convection_full(mesh: &Mesh, axis: Axis) -> CsrMatrix {
    let component = match axis {
        Axis::X => 0,
        Axis::Y => 1,
    };
    let mut triplets = Vec::with_capacity(9 * mesh.triangles().len());
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let g = hat_gradients(&corners(mesh, t));
        let third = mesh.triangle_area(t) / 3.0;
        for i in 0..3 {
            for j in 0..3 {
                triplets.push((tri[i], tri[j], g[j][component] * third));
            }
        }
    }
    CsrMatrix::from_triplets(mesh.num_nodes(), mesh.num_nodes(), triplets)
}

pub fn assemble_directional_convection(mesh: &Mesh, axis: Axis) -> OperatorMatrix {
    OperatorMatrix::new(restrict(mesh, &assemble_directional_convection_full(mesh, axis)), false)
}

/// `constant * ∫ φ_i` for every node.
pub fn assemble_load_full(mesh: &Mesh, constant: f64) -> DVector<f64> {
    let mut f = DVector::zeros(mesh.num_nodes());
    for (t, tri) in mesh.triangles().iter().enumerate() {
        let share = constant * mesh.triangle_area(t) / 3.0;
        for &i in tri {
            f[i] += share;
        }
    }
    f
}

pub fn assemble_load(mesh: &Mesh, constant: f64) -> DVector<f64> {
    let full = assemble_load_full(mesh, constant);
    DVector::from_iterator(mesh.num_dofs(), (0..mesh.num_dofs()).map(|d| full[mesh.node_of_dof(d)]))
}

fn restrict(mesh: &Mesh, full: &CsrMatrix) -> CsrMatrix {
    let keep: Vec<Option<usize>> = (0..mesh.num_nodes()).map(|i| mesh.dof_of_node(i)).collect();
    full.restrict(&keep, mesh.num_dofs())
}

/// Expands an interior-dof vector to all nodes (zero on the boundary).
pub fn extend_to_nodes(mesh: &Mesh, u: &DVector<f64>) -> DVector<f64> {
    let mut full = DVector::zeros(mesh.num_nodes());
    for d in 0..mesh.num_dofs() {
        full[mesh.node_of_dof(d)] = u[d];
    }
    full
}

/// One-shot direct solve of `A x = rhs`.
pub fn solve_sparse(a: &OperatorMatrix, rhs: &DVector<f64>) -> Result<DVector<f64>> {
    if rhs.len() != a.dim() {
        return Err(Error::InvalidArgument(format!(
            "right-hand side has {} entries, operator has dimension {}",
            rhs.len(),
            a.dim()
        )));
    }
    let layout = BandLayout::from_pattern(a.csr());
    Factorization::new(&layout, &[a.csr()], &[1.0])?.solve(rhs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::mesh::{generate_disk_mesh, generate_unit_square_mesh};
    use std::f64::consts::PI;

    #[test]
    fn stiffness_rows_sum_to_zero() {
        let mesh = generate_unit_square_mesh(5).unwrap();
        let full = assemble_weighted_stiffness_full(&mesh, |_, _| 1.0);
        for r in 0..full.nrows() {
            let s: f64 = full.row(r).map(|(_, v)| v).sum();
            assert!(s.abs() < 1e-12);
        }
    }

    #[test]
    fn stiffness_is_spd_on_small_mesh() {
        for n in [2, 4, 8] {
            let mesh = generate_unit_square_mesh(n).unwrap();
            let x = assemble_stiffness(&mesh);
            assert!(x.csr().asymmetry() <= 1e-12 * x.csr().max_abs());
            let eig = x.csr().to_dense().symmetric_eigenvalues();
            assert!(eig.min() > 0.0);
        }
        let disk = generate_disk_mesh(1.0, 60).unwrap();
        let eig = assemble_stiffness(&disk).csr().to_dense().symmetric_eigenvalues();
        assert!(eig.min() > 0.0);
    }

    #[test]
    fn two_triangle_element_integrals() {
        // Nodes (0,0),(1,0),(0,1),(1,1); triangles [0,1,3] and [0,3,2].
        let mesh = generate_unit_square_mesh(1).unwrap();
        let k = assemble_weighted_stiffness_full(&mesh, |_, _| 1.0).to_dense();
        // Hand-computed: each right triangle of area 1/2 contributes the
        // usual cotangent stencil.
        let expected_k = nalgebra::DMatrix::from_row_slice(
            4,
            4,
            &[
                1.0, -0.5, -0.5, 0.0, //
                -0.5, 1.0, 0.0, -0.5, //
                -0.5, 0.0, 1.0, -0.5, //
                0.0, -0.5, -0.5, 1.0,
            ],
        );
        assert!((k - expected_k).abs().max() < 1e-14);

        // Lower triangle [0,1,3]: ∇φ0=(-1,0), ∇φ1=(1,-1), ∇φ3=(0,1);
        // upper triangle [0,3,2]: ∇φ0=(0,-1), ∇φ3=(1,0), ∇φ2=(-1,1).
        // C_ij = (∂φ_j/∂x) |T|/3 = (∂φ_j/∂x)/6 per triangle containing i and j.
        let cx = assemble_directional_convection_full(&mesh, Axis::X).to_dense();
        let s = 1.0 / 6.0;
        let expected_cx = nalgebra::DMatrix::from_row_slice(
            4,
            4,
            &[
                -s, s, -s, s, //
                -s, s, 0.0, 0.0, //
                0.0, 0.0, -s, s, //
                -s, s, -s, s,
            ],
        );
        assert!((cx - expected_cx).abs().max() < 1e-14);
    }

    #[test]
    fn convection_is_skew_on_interior() {
        for mesh in [
            generate_unit_square_mesh(9).unwrap(),
            generate_disk_mesh(2f64.sqrt(), 400).unwrap(),
        ] {
            for axis in [Axis::X, Axis::Y] {
                let c = assemble_directional_convection(&mesh, axis);
                assert!(c.csr().symmetric_part_max() <= 1e-12 * c.csr().max_abs());
                // partition of unity: every row sums to zero, and so does
                // every column belonging to an interior node
                let full = assemble_directional_convection_full(&mesh, axis).to_dense();
                for i in 0..full.nrows() {
                    assert!(full.row(i).sum().abs() < 1e-12);
                    if !mesh.is_boundary(i) {
                        assert!(full.column(i).sum().abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn load_vector_totals() {
        let mesh = generate_unit_square_mesh(6).unwrap();
        assert_eq!(assemble_load(&mesh, 0.0).norm(), 0.0);
        assert!((assemble_load_full(&mesh, 3.0).sum() - 3.0).abs() < 1e-12);
        let disk = generate_disk_mesh(2f64.sqrt(), 2500).unwrap();
        let total = assemble_load_full(&disk, 10.0).sum();
        assert!((total - 20.0 * PI).abs() <= 0.02 * 20.0 * PI);
    }

    #[test]
    fn solve_round_trip() {
        let mesh = generate_unit_square_mesh(12).unwrap();
        let x = assemble_stiffness(&mesh);
        let v = DVector::from_fn(x.dim(), |i, _| ((i * 37 % 11) as f64) - 5.0);
        let sol = solve_sparse(&x, &x.mul_vec(&v)).unwrap();
        assert!((sol - &v).norm() <= 1e-9 * v.norm());
        assert_eq!(solve_sparse(&x, &DVector::zeros(x.dim())).unwrap().norm(), 0.0);
        assert!(solve_sparse(&x, &DVector::zeros(3)).is_err());
    }
}
