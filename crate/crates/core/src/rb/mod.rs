//! Linear reduced-basis engine: snapshot orthonormalization, Galerkin
//! projection, online solves, the residual-based error estimator and the
//! greedy algorithm.

pub mod greedy;
pub mod model;
pub mod space;

use nalgebra::DVector;

pub use greedy::{estimate_all, greedy_build, GreedyOptions, GreedyStep, GreedyTrace, Init};
pub use model::ReducedModel;
pub use space::{orthonormalize, project_reduced, RbSpace};

use crate::error::{Error, Result};
use crate::problem::AffineProblem;

/// Reduced coefficients `c` at `μ`.
pub fn rb_solve(space: &RbSpace, problem: &AffineProblem, mu: &[f64]) -> Result<DVector<f64>> {
    let (theta_a, theta_f) = problem.theta_eval(mu)?;
    if space.dim() == 0 {
        return Err(Error::InvalidArgument("reduced solve needs a non-empty basis".into()));
    }
    space.model().solve(&theta_a, &theta_f)
}

/// `‖R_N(μ)‖_V` for the given coefficients.
pub fn residual_norm(space: &RbSpace, problem: &AffineProblem, mu: &[f64], coeffs: &DVector<f64>) -> Result<f64> {
    let (theta_a, theta_f) = problem.theta_eval(mu)?;
    if coeffs.len() != space.dim() {
        return Err(Error::InvalidArgument(format!(
            "{} coefficients for a basis of size {}",
            coeffs.len(),
            space.dim()
        )));
    }
    Ok(space.model().residual_norm(&theta_a, &theta_f, coeffs))
}

/// `η_N(μ) = ‖R_N(μ)‖_V / α_LB(μ)`.
pub fn error_estimator(space: &RbSpace, problem: &AffineProblem, mu: &[f64]) -> Result<f64> {
    problem.domain().check(mu)?;
    Ok(space.model().estimate(&problem.kind(), mu)?.1)
}

/// `u_𝒩(μ) − Z c(μ)`.
pub fn error_vector(problem: &AffineProblem, space: &RbSpace, mu: &[f64]) -> Result<DVector<f64>> {
    let truth = problem.truth_solve(mu)?;
    let coeffs = space
        .model()
        .solve(&problem.kind().theta_a(mu), &problem.kind().theta_f(mu))?;
    Ok(truth - space.reconstruct(&coeffs))
}

/// `‖u_𝒩(μ) − Z c(μ)‖_X` through one truth solve.
pub fn true_error(problem: &AffineProblem, space: &RbSpace, mu: &[f64]) -> Result<f64> {
    Ok(problem.x_norm(&error_vector(problem, space, mu)?))
}

/// `√(eᵀ A(μ) e)`; a norm only for coercive symmetric `A(μ)`.
pub fn energy_error(problem: &AffineProblem, space: &RbSpace, mu: &[f64]) -> Result<f64> {
    let e = error_vector(problem, space, mu)?;
    let a = problem.operator_at(mu)?;
    Ok(e.dot(&a.mul_vec(&e)).max(0.0).sqrt())
}
