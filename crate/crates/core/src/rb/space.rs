//! Offline construction of reduced-basis spaces.

use nalgebra::DVector;

use super::model::ReducedModel;
use crate::error::Result;
use crate::fem::OperatorMatrix;
use crate::param::Param;
use crate::problem::AffineProblem;

/// A snapshot is dropped when Gram–Schmidt leaves less than this fraction of
/// its X-norm.
pub const DEPENDENCE_TOLERANCE: f64 = 1e-10;
/// Relative remainder below which a Riesz representer adds no new direction
/// to the residual factor.
const RESIDUAL_RANK_TOLERANCE: f64 = 1e-13;

/// Modified Gram–Schmidt (two passes) in the X-inner product. Returns the
/// orthonormal vectors and the indices of the snapshots that were kept.
pub fn orthonormalize(snapshots: &[DVector<f64>], x: &OperatorMatrix) -> (Vec<DVector<f64>>, Vec<usize>) {
    let mut basis: Vec<DVector<f64>> = Vec::new();
    let mut kept = Vec::new();
    for (k, s) in snapshots.iter().enumerate() {
        if let Some(z) = orthogonalize_against(&basis, s, x) {
            basis.push(z);
            kept.push(k);
        }
    }
    (basis, kept)
}

fn orthogonalize_against(basis: &[DVector<f64>], v: &DVector<f64>, x: &OperatorMatrix) -> Option<DVector<f64>> {
    let norm0 = x.bilinear(v, v).max(0.0).sqrt();
    if norm0 == 0.0 || !norm0.is_finite() {
        return None;
    }
    let mut w = v.clone();
    for _ in 0..2 {
        for z in basis {
            let t = x.bilinear(z, &w);
            w.axpy(-t, z, 1.0);
        }
    }
    let norm = x.bilinear(&w, &w).max(0.0).sqrt();
    if norm < DEPENDENCE_TOLERANCE * norm0 {
        None
    } else {
        Some(w / norm)
    }
}

/// A reduced-basis space together with the truth-dimension data needed to
/// extend it: basis `Z`, the raw residual vectors `F_q`, `A_q ξ_i`, their
/// Riesz representers and an X-orthonormal basis of the representer span.
#[derive(Debug, Clone)]
pub struct RbSpace {
    model: ReducedModel,
    num_dofs: usize,
    basis: Vec<DVector<f64>>,
    selected: Vec<Param>,
    raw: Vec<DVector<f64>>,
    riesz: Vec<DVector<f64>>,
    span: Vec<DVector<f64>>,
    x_span: Vec<DVector<f64>>,
}

impl RbSpace {
    /// The `n = 0` space: only the load representers are computed.
    pub fn empty(problem: &AffineProblem) -> Result<Self> {
        let mut space = Self {
            model: ReducedModel::empty(problem.q_a(), problem.q_f()),
            num_dofs: problem.num_dofs(),
            basis: Vec::new(),
            selected: Vec::new(),
            raw: Vec::new(),
            riesz: Vec::new(),
            span: Vec::new(),
            x_span: Vec::new(),
        };
        for f in problem.f_terms() {
            space.push_residual_term(problem, f.clone())?;
        }
        Ok(space)
    }

    pub fn model(&self) -> &ReducedModel {
        &self.model
    }

    pub fn into_model(self) -> ReducedModel {
        self.model
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    pub fn basis(&self) -> &[DVector<f64>] {
        &self.basis
    }

    pub fn selected_params(&self) -> &[Param] {
        &self.selected
    }

    /// Riesz representers in residual-index order.
    pub fn riesz_representers(&self) -> &[DVector<f64>] {
        &self.riesz
    }

    /// `Z c`
    pub fn reconstruct(&self, coeffs: &DVector<f64>) -> DVector<f64> {
        let mut u = DVector::zeros(self.num_dofs);
        for (z, &c) in self.basis.iter().zip(coeffs.iter()) {
            u.axpy(c, z, 1.0);
        }
        u
    }

    /// Orthogonalizes `snapshot` against the basis and, unless it is
    /// dependent, appends it and extends every reduced quantity. Returns
    /// whether the basis grew.
    pub fn try_extend(&mut self, problem: &AffineProblem, snapshot: &DVector<f64>, mu: Option<Param>) -> Result<bool> {
        let Some(xi) = orthogonalize_against(&self.basis, snapshot, problem.inner_product()) else {
            return Ok(false);
        };
        self.append_orthonormal(problem, xi, mu)?;
        Ok(true)
    }

    /// Appends a vector that is already X-orthonormal to the basis.
    pub fn append_orthonormal(&mut self, problem: &AffineProblem, xi: DVector<f64>, mu: Option<Param>) -> Result<()> {
        let n = self.basis.len();
        let q_f = self.model.q_f;
        let q_a = self.model.q_a;
        let a_xi: Vec<DVector<f64>> = problem.a_terms().iter().map(|a| a.mul_vec(&xi)).collect();

        for (q, aq) in self.model.reduced_a.iter_mut().enumerate() {
            let mut grown = aq.clone().resize(n + 1, n + 1, 0.0);
            for j in 0..n {
                // column: z_jᵀ A_q ξ ; row: ξᵀ A_q z_j
                grown[(j, n)] = self.basis[j].dot(&a_xi[q]);
                grown[(n, j)] = xi.dot(&self.raw[q_f + j * q_a + q]);
            }
            grown[(n, n)] = xi.dot(&a_xi[q]);
            *aq = grown;
        }
        for (q, fq) in self.model.reduced_f.iter_mut().enumerate() {
            let mut grown = fq.clone().resize_vertically(n + 1, 0.0);
            grown[n] = xi.dot(&problem.f_terms()[q]);
            *fq = grown;
        }
        self.basis.push(xi);
        if let Some(mu) = mu {
            self.selected.push(mu);
        }
        for r in a_xi {
            self.push_residual_term(problem, r)?;
        }
        Ok(())
    }

    fn push_residual_term(&mut self, problem: &AffineProblem, raw: DVector<f64>) -> Result<()> {
        let rep = problem.riesz(&raw)?;
        let m = self.riesz.len();

        let mut gram = self.model.gram.clone().resize(m + 1, m + 1, 0.0);
        for k in 0..m {
            let g = 0.5 * (rep.dot(&self.raw[k]) + self.riesz[k].dot(&raw));
            gram[(k, m)] = g;
            gram[(m, k)] = g;
        }
        gram[(m, m)] = rep.dot(&raw);
        self.model.gram = gram;

        // X-orthonormal Gram–Schmidt of the representer, two passes
        let x = problem.inner_product();
        let norm0 = rep.dot(&raw).max(0.0).sqrt();
        let mut v = rep.clone();
        let mut coords = vec![0.0; self.span.len()];
        for _ in 0..2 {
            for (j, xs) in self.x_span.iter().enumerate() {
                let t = xs.dot(&v);
                v.axpy(-t, &self.span[j], 1.0);
                coords[j] += t;
            }
        }
        let xv = x.mul_vec(&v);
        let rem = v.dot(&xv).max(0.0).sqrt();
        if norm0 > 0.0 && rem > RESIDUAL_RANK_TOLERANCE * norm0 {
            coords.push(rem);
            self.span.push(v / rem);
            self.x_span.push(xv / rem);
        }
        self.model.factor.push(coords);

        self.raw.push(raw);
        self.riesz.push(rep);
        Ok(())
    }

    /// Drops the truth-dimension residual data, keeping basis and model.
    pub fn shrink(&mut self) {
        self.raw = Vec::new();
        self.riesz = Vec::new();
        self.span = Vec::new();
        self.x_span = Vec::new();
    }

    /// The space spanned by the first `k` basis vectors.
    pub fn truncated(&self, k: usize) -> Self {
        let m = self.model.q_f + k * self.model.q_a;
        let rank = self.model.factor[..m].iter().map(Vec::len).max().unwrap_or(0);
        Self {
            model: self.model.truncated(k),
            num_dofs: self.num_dofs,
            basis: self.basis[..k].to_vec(),
            selected: self.selected[..k.min(self.selected.len())].to_vec(),
            raw: self.raw.get(..m).map(<[_]>::to_vec).unwrap_or_default(),
            riesz: self.riesz.get(..m).map(<[_]>::to_vec).unwrap_or_default(),
            span: self.span.get(..rank).map(<[_]>::to_vec).unwrap_or_default(),
            x_span: self.x_span.get(..rank).map(<[_]>::to_vec).unwrap_or_default(),
        }
    }
}

/// Builds all reduced operators and residual data for an X-orthonormal
/// basis (`Q_f + Q_a·n` Riesz solves).
pub fn project_reduced(problem: &AffineProblem, basis: &[DVector<f64>]) -> Result<RbSpace> {
    let mut space = RbSpace::empty(problem)?;
    for z in basis {
        space.append_orthonormal(problem, z.clone(), None)?;
    }
    Ok(space)
}
