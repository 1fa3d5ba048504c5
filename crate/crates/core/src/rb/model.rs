//! Online data of one reduced-basis space and its evaluation.
//!
//! Residual bookkeeping uses a single index over all affine residual
//! contributions: `q` for the load terms `F_q`, then `Q_f + i·Q_a + q` for
//! `A_q ξ_i`. Appending a basis vector appends `Q_a` columns, so a prefix
//! of the columns describes a prefix of the basis.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::problem::ProblemKind;

/// Reduced systems whose 1-norm condition estimate exceeds this are rejected.
pub const MAX_CONDITION: f64 = 1e14;
/// Negative squared residuals (relative to `Σ w_k² G_kk`) beyond this
/// signal corrupt offline data; smaller ones are cancellation and clamp to 0.
pub const CORRUPT_THRESHOLD: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct ReducedModel {
    pub(crate) q_a: usize,
    pub(crate) q_f: usize,
    /// `Zᵀ A_q Z`, one `n×n` matrix per affine term.
    pub(crate) reduced_a: Vec<DMatrix<f64>>,
    /// `Zᵀ F_q`.
    pub(crate) reduced_f: Vec<DVector<f64>>,
    /// Coordinates of each Riesz representer in an X-orthonormal basis of
    /// their span; column `k` has as many rows as the rank after it was
    /// added, so the columns form an upper-trapezoidal factor `T` with
    /// `‖Σ w_k R_k‖_X = ‖T w‖₂`.
    pub(crate) factor: Vec<Vec<f64>>,
    /// `(R_k, R_l)_X`, the Gram matrix of the representers.
    pub(crate) gram: DMatrix<f64>,
}

impl ReducedModel {
    pub(crate) fn empty(q_a: usize, q_f: usize) -> Self {
        Self {
            q_a,
            q_f,
            reduced_a: vec![DMatrix::zeros(0, 0); q_a],
            reduced_f: vec![DVector::zeros(0); q_f],
            factor: Vec::new(),
            gram: DMatrix::zeros(0, 0),
        }
    }

    /// Basis size `n`.
    pub fn dim(&self) -> usize {
        self.reduced_f.first().map_or(0, |f| f.len())
    }

    pub fn q_a(&self) -> usize {
        self.q_a
    }

    pub fn q_f(&self) -> usize {
        self.q_f
    }

    pub fn reduced_a(&self) -> &[DMatrix<f64>] {
        &self.reduced_a
    }

    pub fn reduced_f(&self) -> &[DVector<f64>] {
        &self.reduced_f
    }

    pub fn residual_factor(&self) -> &[Vec<f64>] {
        &self.factor
    }

    pub fn residual_gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    /// Number of residual contributions, `Q_f + n·Q_a`.
    pub fn residual_terms(&self) -> usize {
        self.q_f + self.dim() * self.q_a
    }

    /// Solves `(Σ θ_a^q A_q^N) c = Σ θ_f^q F_q^N` with partial pivoting.
    pub fn solve(&self, theta_a: &[f64], theta_f: &[f64]) -> Result<DVector<f64>> {
        let n = self.dim();
        if n == 0 {
            return Ok(DVector::zeros(0));
        }
        let mut a = DMatrix::zeros(n, n);
        for (aq, &w) in self.reduced_a.iter().zip(theta_a) {
            a += aq * w;
        }
        let mut f = DVector::zeros(n);
        for (fq, &w) in self.reduced_f.iter().zip(theta_f) {
            f.axpy(w, fq, 1.0);
        }
        let norm1 = one_norm(&a);
        let lu = a.lu();
        let inv = lu.try_inverse().ok_or(Error::IllConditioned(f64::INFINITY))?;
        let cond = norm1 * one_norm(&inv);
        if !(cond <= MAX_CONDITION) {
            return Err(Error::IllConditioned(cond));
        }
        lu.solve(&f).ok_or(Error::IllConditioned(cond))
    }

    fn residual_weights(&self, theta_a: &[f64], theta_f: &[f64], coeffs: &DVector<f64>) -> Vec<f64> {
        let mut w = Vec::with_capacity(self.residual_terms());
        w.extend_from_slice(&theta_f[..self.q_f]);
        for i in 0..coeffs.len() {
            w.extend(theta_a[..self.q_a].iter().map(|t| -t * coeffs[i]));
        }
        w
    }

    /// `‖R_N(μ)‖_V` for coefficients `coeffs`, from the triangular factor.
    /// Cost depends on `n` and `Q` only.
    pub fn residual_norm(&self, theta_a: &[f64], theta_f: &[f64], coeffs: &DVector<f64>) -> f64 {
        let w = self.residual_weights(theta_a, theta_f, coeffs);
        let rank = self.factor.iter().map(Vec::len).max().unwrap_or(0);
        let mut y = vec![0.0; rank];
        for (col, &wk) in self.factor.iter().zip(&w) {
            for (yi, &t) in y.iter_mut().zip(col) {
                *yi += wk * t;
            }
        }
        y.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Same quantity through the quadratic expansion
    /// `Σ θ_f θ_f' G_ff − 2 Σ θ_f θ_a c G_fa + Σ θ_a θ_a' c c' G_aa`.
    pub fn residual_norm_gram(&self, theta_a: &[f64], theta_f: &[f64], coeffs: &DVector<f64>) -> Result<f64> {
        let w = DVector::from_vec(self.residual_weights(theta_a, theta_f, coeffs));
        let sq = w.dot(&(&self.gram * &w));
        let scale: f64 = (0..w.len()).map(|k| w[k] * w[k] * self.gram[(k, k)]).sum();
        if sq < -CORRUPT_THRESHOLD * scale.max(f64::MIN_POSITIVE) {
            return Err(Error::CorruptResidual(sq));
        }
        Ok(sq.max(0.0).sqrt())
    }

    /// Reduced solve followed by `‖R‖ / α_LB(μ)`; no domain check.
    pub fn estimate(&self, kind: &ProblemKind, mu: &[f64]) -> Result<(DVector<f64>, f64)> {
        let theta_a = kind.theta_a(mu);
        let theta_f = kind.theta_f(mu);
        let c = self.solve(&theta_a, &theta_f)?;
        let r = self.residual_norm(&theta_a, &theta_f, &c);
        Ok((c, r / kind.alpha_lb(mu)))
    }

    /// The model of the first `k` basis vectors.
    pub fn truncated(&self, k: usize) -> Self {
        assert!(k <= self.dim());
        let m = self.q_f + k * self.q_a;
        Self {
            q_a: self.q_a,
            q_f: self.q_f,
            reduced_a: self
                .reduced_a
                .iter()
                .map(|a| a.view((0, 0), (k, k)).into_owned())
                .collect(),
            reduced_f: self.reduced_f.iter().map(|f| f.rows(0, k).into_owned()).collect(),
            factor: self.factor[..m].to_vec(),
            gram: self.gram.view((0, 0), (m, m)).into_owned(),
        }
    }

    /// Rebuilds the Gram matrix as `TᵀT` (used after loading from disk).
    pub(crate) fn gram_from_factor(factor: &[Vec<f64>]) -> DMatrix<f64> {
        let m = factor.len();
        DMatrix::from_fn(m, m, |k, l| factor[k].iter().zip(&factor[l]).map(|(a, b)| a * b).sum())
    }
}

fn one_norm(a: &DMatrix<f64>) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}
