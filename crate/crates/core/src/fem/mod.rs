//! P1 finite-element truth layer.

pub mod assembly;
pub mod mesh;
pub mod sparse;

pub use assembly::{
    assemble_directional_convection, assemble_load, assemble_stiffness, assemble_weighted_stiffness, extend_to_nodes,
    solve_sparse, Axis, OperatorMatrix,
};
pub use mesh::{generate_disk_mesh, generate_unit_square_mesh, Boundary, Mesh};
pub use sparse::{BandLayout, CsrMatrix, Factorization};
