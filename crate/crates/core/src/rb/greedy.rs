//! Weak-greedy snapshot selection driven by the residual error estimator.

use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::model::ReducedModel;
use super::space::RbSpace;
use crate::error::{Error, Result};
use crate::param::{Param, TrainingSet};
use crate::problem::{AffineProblem, ProblemKind};

/// How the first greedy parameter is chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum Init {
    /// A specific parameter, which must be a training point.
    Param(Param),
    /// Uniformly random training point from a seeded stream.
    Random { seed: u64 },
}

#[derive(Debug, Clone)]
pub struct GreedyOptions {
    pub n_max: usize,
    pub tol: f64,
    pub init: Init,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GreedyStep {
    /// Basis size after this step.
    pub n: usize,
    pub param: Param,
    /// `max_{μ∈E} η_n(μ)` after adding `param`.
    pub eta_max: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct GreedyTrace {
    pub steps: Vec<GreedyStep>,
    /// Estimator maximum of the returned space over the training set.
    pub final_eta_max: f64,
    /// Truth solves performed, including snapshots that were dropped.
    pub truth_solves: usize,
}

impl GreedyTrace {
    /// CSV with columns `n, mu_1..mu_d, eta_max`.
    pub fn to_csv(&self, dim: usize) -> String {
        let mut out = String::from("n");
        for j in 1..=dim {
            write!(out, ",mu_{j}").unwrap();
        }
        out.push_str(",eta_max\n");
        for s in &self.steps {
            write!(out, "{}", s.n).unwrap();
            for v in &s.param {
                write!(out, ",{v:e}").unwrap();
            }
            writeln!(out, ",{:e}", s.eta_max).unwrap();
        }
        out
    }
}

/// Estimator values at every point; evaluated in parallel, returned in
/// input order.
pub fn estimate_all(model: &ReducedModel, kind: &ProblemKind, points: &[Param]) -> Result<Vec<f64>> {
    points
        .par_iter()
        .map(|mu| model.estimate(kind, mu).map(|(_, eta)| eta))
        .collect()
}

/// Index of the largest value among allowed entries, lowest index on ties.
fn argmax(values: &[f64], allowed: impl Fn(usize) -> bool) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, &v) in values.iter().enumerate() {
        if !allowed(i) {
            continue;
        }
        if best.is_none_or(|b| v > values[b]) {
            best = Some(i);
        }
    }
    best
}

/// Greedy construction over `train`: one truth solve per iteration, then an
/// estimator sweep; stops when the maximum drops to `tol` or the basis
/// reaches `n_max`.
pub fn greedy_build(
    problem: &AffineProblem,
    train: &TrainingSet,
    opts: &GreedyOptions,
) -> Result<(RbSpace, GreedyTrace)> {
    if train.is_empty() {
        return Err(Error::InvalidArgument("training set is empty".into()));
    }
    if opts.n_max == 0 {
        return Err(Error::InvalidArgument("N_max must be at least 1".into()));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "tolerance must be positive, got {}",
            opts.tol
        )));
    }
    let kind = problem.kind();
    let domain = problem.domain();
    for p in &train.points {
        domain.check(p)?;
    }
    let mut current = match &opts.init {
        Init::Param(mu) => train
            .points
            .iter()
            .position(|p| p == mu)
            .ok_or_else(|| Error::InvalidArgument(format!("initial parameter {mu:?} is not a training point")))?,
        Init::Random { seed } => ChaCha8Rng::seed_from_u64(*seed).random_range(0..train.len()),
    };

    let mut space = RbSpace::empty(problem)?;
    let mut trace = GreedyTrace::default();
    let mut excluded = vec![false; train.len()];
    loop {
        let mu = train.points[current].clone();
        let snapshot = problem.truth_solve(&mu)?;
        trace.truth_solves += 1;
        let grew = space.try_extend(problem, &snapshot, Some(mu.clone()))?;
        excluded[current] = true;

        let etas = estimate_all(space.model(), &kind, &train.points)?;
        let eta_max = etas.iter().copied().fold(0.0, f64::max);
        trace.final_eta_max = eta_max;
        if grew {
            trace.steps.push(GreedyStep {
                n: space.dim(),
                param: mu,
                eta_max,
            });
        }
        if eta_max <= opts.tol || space.dim() >= opts.n_max {
            break;
        }
        match argmax(&etas, |i| !excluded[i]) {
            Some(next) => current = next,
            None => break,
        }
    }
    Ok((space, trace))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmax_ties_take_lowest_index() {
        assert_eq!(argmax(&[1.0, 3.0, 3.0, 2.0], |_| true), Some(1));
        assert_eq!(argmax(&[1.0, 3.0, 3.0, 2.0], |i| i != 1), Some(2));
        assert_eq!(argmax(&[1.0], |_| false), None);
    }
}
