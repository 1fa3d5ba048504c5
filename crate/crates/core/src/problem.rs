//! Affine parametric problems.
//!
//! [`ProblemKind`] carries everything the online stage needs (θ-functions,
//! coercivity and continuity bounds, parameter domain) and can be rebuilt
//! from its descriptor string. [`AffineProblem`] adds the mesh-dependent
//! operators used offline.

use std::f64::consts::PI;
use std::fmt;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::fem::{
    assemble_directional_convection, assemble_load, assemble_stiffness, assemble_weighted_stiffness,
    generate_disk_mesh, generate_unit_square_mesh, Axis, BandLayout, CsrMatrix, Factorization, Mesh, OperatorMatrix,
};
use crate::param::{Extent, ParamBox};

/// Default coefficient scaling of the diffusion example.
pub const DEFAULT_ALPHA: f64 = 0.105;
/// First zero of the Bessel function `J_0`.
pub const BESSEL_J0_FIRST_ZERO: f64 = 2.404_825_557_695_773;
/// Radius of the convection–diffusion disk, `x² + y² ≤ 2`.
pub const DISK_RADIUS: f64 = std::f64::consts::SQRT_2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ConvDiffCase {
    /// `{0} × [0, 10]`
    I,
    /// `[0, π] × {10}`
    II,
    /// `[0, π] × [0, 10]`
    III,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ProblemKind {
    /// `-∇·(a(μ)∇u) = 1` on the unit square with
    /// `a = 1 + μ₁ ψ₁ + μ₂ ψ₂` on `[-1, 1]²`.
    Diffusion { alpha: f64 },
    /// `-Δu + μ₂(cos μ₁, sin μ₁)·∇u = 10` on the disk of radius √2.
    ConvDiff(ConvDiffCase),
}

impl ProblemKind {
    pub fn diffusion(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(Error::InvalidArgument(format!("alpha must be positive, got {alpha}")));
        }
        let kind = Self::Diffusion { alpha };
        let corner = kind.alpha_lb(&[1.0, 1.0]);
        if corner <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "alpha = {alpha} makes the coercivity bound non-positive on [-1,1]^2 (min {corner:.4})"
            )));
        }
        Ok(kind)
    }

    /// Parses `diffusion`, `convdiff-I`, `convdiff-II` or `convdiff-III`.
    pub fn from_name(name: &str, alpha: f64) -> Result<Self> {
        match name {
            "diffusion" => Self::diffusion(alpha),
            "convdiff-I" => Ok(Self::ConvDiff(ConvDiffCase::I)),
            "convdiff-II" => Ok(Self::ConvDiff(ConvDiffCase::II)),
            "convdiff-III" => Ok(Self::ConvDiff(ConvDiffCase::III)),
            other => Err(Error::InvalidArgument(format!("unknown problem '{other}'"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::Diffusion { .. } => "diffusion",
            Self::ConvDiff(ConvDiffCase::I) => "convdiff-I",
            Self::ConvDiff(ConvDiffCase::II) => "convdiff-II",
            Self::ConvDiff(ConvDiffCase::III) => "convdiff-III",
        }
    }

    /// Round-trippable text form, e.g. `diffusion alpha=0.105`.
    pub fn descriptor(&self) -> String {
        match self {
            Self::Diffusion { alpha } => format!("diffusion alpha={alpha:?}"),
            other => other.name().to_string(),
        }
    }

    pub fn from_descriptor(text: &str) -> Result<Self> {
        let mut parts = text.split_whitespace();
        let name = parts
            .next()
            .ok_or_else(|| Error::Format("empty problem descriptor".into()))?;
        let mut alpha = DEFAULT_ALPHA;
        for p in parts {
            match p.split_once('=') {
                Some(("alpha", v)) => {
                    alpha = v
                        .parse()
                        .map_err(|_| Error::Format(format!("bad alpha in descriptor '{text}'")))?
                }
                _ => return Err(Error::Format(format!("unrecognized descriptor field '{p}'"))),
            }
        }
        Self::from_name(name, alpha)
    }

    pub fn domain(&self) -> ParamBox {
        let axes = match self {
            Self::Diffusion { .. } => vec![
                Extent::Free {
                    lower: -1.0,
                    upper: 1.0,
                },
                Extent::Free {
                    lower: -1.0,
                    upper: 1.0,
                },
            ],
            Self::ConvDiff(ConvDiffCase::I) => {
                vec![
                    Extent::Frozen(0.0),
                    Extent::Free {
                        lower: 0.0,
                        upper: 10.0,
                    },
                ]
            }
            Self::ConvDiff(ConvDiffCase::II) => {
                vec![Extent::Free { lower: 0.0, upper: PI }, Extent::Frozen(10.0)]
            }
            Self::ConvDiff(ConvDiffCase::III) => vec![
                Extent::Free { lower: 0.0, upper: PI },
                Extent::Free {
                    lower: 0.0,
                    upper: 10.0,
                },
            ],
        };
        ParamBox::new(axes).expect("built-in domains are valid")
    }

    pub fn q_a(&self) -> usize {
        3
    }

    pub fn q_f(&self) -> usize {
        1
    }

    /// θ-coefficients of the bilinear form (no domain check).
    pub fn theta_a(&self, mu: &[f64]) -> Vec<f64> {
        match self {
            Self::Diffusion { .. } => vec![1.0, mu[0], mu[1]],
            Self::ConvDiff(_) => vec![1.0, mu[1] * mu[0].cos(), mu[1] * mu[0].sin()],
        }
    }

    pub fn theta_f(&self, _mu: &[f64]) -> Vec<f64> {
        vec![1.0]
    }

    /// Coercivity lower bound in the H¹₀-seminorm.
    pub fn alpha_lb(&self, mu: &[f64]) -> f64 {
        match self {
            Self::Diffusion { alpha } => 1.0 - mu[0].abs() / (alpha * PI * PI) - mu[1].abs() / (4.0 * PI * PI),
            // the convection part is skew and drops out of a(v, v)
            Self::ConvDiff(_) => 1.0,
        }
    }

    /// Continuity upper bound in the H¹₀-seminorm.
    pub fn gamma_ub(&self, mu: &[f64]) -> f64 {
        match self {
            Self::Diffusion { alpha } => 1.0 + mu[0].abs() / (alpha * PI * PI) + mu[1].abs() / (4.0 * PI * PI),
            Self::ConvDiff(_) => 1.0 + poincare_constant(DISK_RADIUS) * mu[1].abs(),
        }
    }

    /// Checked θ evaluation: `(θ_a, θ_f)`.
    pub fn theta_eval(&self, mu: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        self.domain().check(mu)?;
        Ok((self.theta_a(mu), self.theta_f(mu)))
    }
}

impl fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.descriptor())
    }
}

/// `C_P = R / j₀₁`: the L²-to-H¹₀ Poincaré constant of a disk.
pub fn poincare_constant(radius: f64) -> f64 {
    radius / BESSEL_J0_FIRST_ZERO
}

/// Problem selection plus numeric overrides, as accepted by the CLI.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemConfig {
    pub name: String,
    pub alpha: f64,
    /// Cells per side of the unit-square mesh.
    pub mesh_n: usize,
    /// Target triangle count of the disk mesh.
    pub mesh_target: usize,
}

impl ProblemConfig {
    pub fn new(name: &str) -> Self {
        Self {
            name: name.to_string(),
            alpha: DEFAULT_ALPHA,
            mesh_n: 44,
            mesh_target: 3689,
        }
    }

    pub fn with_mesh_n(mut self, n: usize) -> Self {
        self.mesh_n = n;
        self
    }

    pub fn with_mesh_target(mut self, target: usize) -> Self {
        self.mesh_target = target;
        self
    }

    pub fn build(&self) -> Result<AffineProblem> {
        match ProblemKind::from_name(&self.name, self.alpha)? {
            ProblemKind::Diffusion { alpha } => build_diffusion_problem(generate_unit_square_mesh(self.mesh_n)?, alpha),
            ProblemKind::ConvDiff(case) => {
                build_convdiff_problem(generate_disk_mesh(DISK_RADIUS, self.mesh_target)?, case)
            }
        }
    }
}

/// `Σ θ_a^q A_q u = Σ θ_f^q F_q` with `X` the V-inner-product matrix.
#[derive(Debug, Clone)]
pub struct AffineProblem {
    kind: ProblemKind,
    mesh: Mesh,
    a_terms: Vec<OperatorMatrix>,
    f_terms: Vec<DVector<f64>>,
    x: OperatorMatrix,
    layout: BandLayout,
    x_factor: Factorization,
}

impl AffineProblem {
    pub fn new(
        kind: ProblemKind,
        mesh: Mesh,
        a_terms: Vec<OperatorMatrix>,
        f_terms: Vec<DVector<f64>>,
        x: OperatorMatrix,
    ) -> Result<Self> {
        if a_terms.len() != kind.q_a() || f_terms.len() != kind.q_f() {
            return Err(Error::InvalidArgument(format!(
                "expected {} bilinear and {} linear terms, got {} and {}",
                kind.q_a(),
                kind.q_f(),
                a_terms.len(),
                f_terms.len()
            )));
        }
        let n = x.dim();
        if a_terms.iter().any(|a| a.dim() != n) || f_terms.iter().any(|f| f.len() != n) {
            return Err(Error::InvalidArgument("operator dimensions disagree".into()));
        }
        if n == 0 {
            return Err(Error::InvalidArgument("mesh has no interior degrees of freedom".into()));
        }
        let layout = BandLayout::from_pattern(a_terms[0].csr());
        let x_factor = Factorization::new(&layout, &[x.csr()], &[1.0])?;
        Ok(Self {
            kind,
            mesh,
            a_terms,
            f_terms,
            x,
            layout,
            x_factor,
        })
    }

    pub fn kind(&self) -> ProblemKind {
        self.kind
    }

    pub fn mesh(&self) -> &Mesh {
        &self.mesh
    }

    pub fn domain(&self) -> ParamBox {
        self.kind.domain()
    }

    pub fn num_dofs(&self) -> usize {
        self.x.dim()
    }

    pub fn a_terms(&self) -> &[OperatorMatrix] {
        &self.a_terms
    }

    pub fn f_terms(&self) -> &[DVector<f64>] {
        &self.f_terms
    }

    pub fn inner_product(&self) -> &OperatorMatrix {
        &self.x
    }

    pub fn q_a(&self) -> usize {
        self.a_terms.len()
    }

    pub fn q_f(&self) -> usize {
        self.f_terms.len()
    }

    pub fn theta_eval(&self, mu: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
        self.kind.theta_eval(mu)
    }

    pub fn alpha_lb(&self, mu: &[f64]) -> f64 {
        self.kind.alpha_lb(mu)
    }

    pub fn gamma_ub(&self, mu: &[f64]) -> f64 {
        self.kind.gamma_ub(mu)
    }

    /// `A(μ) = Σ θ_a^q A_q` as a sparse matrix.
    pub fn operator_at(&self, mu: &[f64]) -> Result<CsrMatrix> {
        let (theta_a, _) = self.theta_eval(mu)?;
        let triplets = self
            .a_terms
            .iter()
            .zip(&theta_a)
            .flat_map(|(a, &w)| a.csr().triplets().map(move |(r, c, v)| (r, c, w * v)))
            .collect();
        Ok(CsrMatrix::from_triplets(self.num_dofs(), self.num_dofs(), triplets))
    }

    /// `F(μ) = Σ θ_f^q F_q`.
    pub fn rhs_at(&self, mu: &[f64]) -> Result<DVector<f64>> {
        let (_, theta_f) = self.theta_eval(mu)?;
        let mut f = DVector::zeros(self.num_dofs());
        for (fq, w) in self.f_terms.iter().zip(theta_f) {
            f.axpy(w, fq, 1.0);
        }
        Ok(f)
    }

    /// Truth solution `u_𝒩(μ)`.
    pub fn truth_solve(&self, mu: &[f64]) -> Result<DVector<f64>> {
        let (theta_a, _) = self.theta_eval(mu)?;
        let terms: Vec<&CsrMatrix> = self.a_terms.iter().map(OperatorMatrix::csr).collect();
        let factor = Factorization::new(&self.layout, &terms, &theta_a)?;
        factor.solve(&self.rhs_at(mu)?)
    }

    /// Riesz representer in the V-inner product: solves `X r = v`.
    pub fn riesz(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        self.x_factor.solve(v)
    }

    pub fn x_norm(&self, v: &DVector<f64>) -> f64 {
        self.x.bilinear(v, v).max(0.0).sqrt()
    }
}

/// Diffusion example on the unit square, `𝒟 = [-1, 1]²`.
pub fn build_diffusion_problem(mesh: Mesh, alpha: f64) -> Result<AffineProblem> {
    let kind = ProblemKind::diffusion(alpha)?;
    let psi1 = move |x: f64, y: f64| ((2.0 * PI * x).cos() + (2.0 * PI * y).cos()) / (2.0 * alpha * PI * PI);
    let psi2 = |x: f64, y: f64| ((4.0 * PI * x).cos() + (4.0 * PI * y).cos()) / (8.0 * PI * PI);
    let stiffness = assemble_stiffness(&mesh);
    let a_terms = vec![
        stiffness.clone(),
        assemble_weighted_stiffness(&mesh, psi1),
        assemble_weighted_stiffness(&mesh, psi2),
    ];
    let f_terms = vec![assemble_load(&mesh, 1.0)];
    AffineProblem::new(kind, mesh, a_terms, f_terms, stiffness)
}

/// Convection–diffusion example on the disk of radius √2.
pub fn build_convdiff_problem(mesh: Mesh, case: ConvDiffCase) -> Result<AffineProblem> {
    let stiffness = assemble_stiffness(&mesh);
    let a_terms = vec![
        stiffness.clone(),
        assemble_directional_convection(&mesh, Axis::X),
        assemble_directional_convection(&mesh, Axis::Y),
    ];
    let f_terms = vec![assemble_load(&mesh, 10.0)];
    AffineProblem::new(ProblemKind::ConvDiff(case), mesh, a_terms, f_terms, stiffness)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diffusion_alpha_validation() {
        let k = ProblemKind::diffusion(0.105).unwrap();
        let lb = k.alpha_lb(&[1.0, 1.0]);
        assert!(lb > 0.0 && (lb - 0.0096).abs() < 5e-4, "{lb}");
        assert_eq!(k.alpha_lb(&[0.0, 0.0]), 1.0);
        assert_eq!(k.gamma_ub(&[0.0, 0.0]), 1.0);
        assert!(ProblemKind::diffusion(0.05).is_err());
        assert!(ProblemKind::diffusion(-1.0).is_err());
    }

    #[test]
    fn theta_values() {
        let d = ProblemKind::diffusion(0.105).unwrap();
        assert_eq!(d.theta_eval(&[0.3, -0.7]).unwrap().0, vec![1.0, 0.3, -0.7]);
        assert!(d.theta_eval(&[1.2, 0.0]).is_err());

        let c = ProblemKind::ConvDiff(ConvDiffCase::III);
        assert_eq!(c.theta_eval(&[0.0, 10.0]).unwrap().0, vec![1.0, 10.0, 0.0]);
        let t = c.theta_eval(&[PI / 2.0, 4.0]).unwrap().0;
        assert!(t[1].abs() <= 1e-12 * 4.0);
        assert!((t[2] - 4.0).abs() < 1e-15);
    }

    #[test]
    fn frozen_case_domains() {
        let d = ProblemKind::ConvDiff(ConvDiffCase::I).domain();
        assert_eq!(d.effective_dim(), 1);
        assert_eq!(d.interval(0), (0.0, 0.0));
        assert_eq!(d.interval(1), (0.0, 10.0));
        let d = ProblemKind::ConvDiff(ConvDiffCase::II).domain();
        assert_eq!(d.interval(1), (10.0, 10.0));
        assert!(ProblemKind::ConvDiff(ConvDiffCase::II).theta_eval(&[1.0, 9.0]).is_err());
    }

    #[test]
    fn descriptor_round_trip() {
        for k in [
            ProblemKind::diffusion(0.105).unwrap(),
            ProblemKind::diffusion(0.2).unwrap(),
            ProblemKind::ConvDiff(ConvDiffCase::I),
            ProblemKind::ConvDiff(ConvDiffCase::II),
            ProblemKind::ConvDiff(ConvDiffCase::III),
        ] {
            assert_eq!(ProblemKind::from_descriptor(&k.descriptor()).unwrap(), k);
        }
        assert!(ProblemKind::from_descriptor("heat").is_err());
        assert!(ProblemKind::from_descriptor("diffusion beta=1").is_err());
    }

    #[test]
    fn poincare_constant_of_the_disk() {
        let cp = poincare_constant(DISK_RADIUS);
        assert!((cp - 0.588).abs() < 1e-3);
        // cross-check: smallest eigenvalue of the FE Dirichlet Laplacian
        // (stiffness vs consistent mass) approximates 1/C_P^2 from above
        let mesh = generate_disk_mesh(DISK_RADIUS, 300).unwrap();
        let k = assemble_stiffness(&mesh).csr().to_dense();
        let m = crate::fem::assembly::tests_support::consistent_mass(&mesh);
        let l = m.cholesky().unwrap();
        let linv = l.l().try_inverse().unwrap();
        let sym = &linv * k * linv.transpose();
        let lambda = sym.symmetric_eigenvalues().min();
        let exact = 1.0 / (cp * cp);
        assert!(lambda >= exact * 0.999 && lambda <= exact * 1.05, "{lambda} vs {exact}");
    }
}
