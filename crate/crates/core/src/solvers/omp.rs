use super::recursion::local_correction;
use super::{alpha, Problem, SolverTrajectory};
use crate::hilbert::AmbientVector;

/// Rejection threshold for new directions, relative to `‖u‖`.
const DEPENDENCE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OmpStep {
    pub omega: usize,
    /// `‖u − P_{W_m} u‖²`.
    pub sq_error: f64,
    /// Error of one optimal-ξ recursion step taken from the same iterate.
    pub rec_sq_error: f64,
    /// Whether the direction enlarged `W_m`.
    pub accepted: bool,
}

/// Stochastic OMP: `u⁽ᵐ⁺¹⁾ = P_{W_m} u` with `W_m` spanned by all correction directions so far.
///
/// `W_m` is kept as an `a`-orthonormal basis built by modified Gram–Schmidt with one
/// re-orthogonalization pass.
#[derive(Debug, Clone)]
pub struct OmpState<'a> {
    problem: &'a Problem,
    basis: Vec<AmbientVector>,
    gram_basis: Vec<AmbientVector>,
    iterate: AmbientVector,
    m: usize,
    sq_error: f64,
}

impl<'a> OmpState<'a> {
    pub fn new(problem: &'a Problem) -> Self {
        Self {
            problem,
            basis: Vec::new(),
            gram_basis: Vec::new(),
            iterate: AmbientVector::zeros(problem.space().dim()),
            m: 0,
            sq_error: problem.target_norm().powi(2),
        }
    }

    pub fn iterate(&self) -> &AmbientVector {
        &self.iterate
    }

    pub fn sq_error(&self) -> f64 {
        self.sq_error
    }

    /// Dimension of `W_m`.
    pub fn rank(&self) -> usize {
        self.basis.len()
    }

    pub fn step(&mut self, omega: usize) -> OmpStep {
        let problem = self.problem;
        let space = problem.space();
        let corr = local_correction(problem, &self.iterate, self.sq_error.sqrt(), omega);
        let a = alpha(self.m);

        let rec_sq_error = {
            let mut w = problem.target() - &self.iterate * a;
            if !corr.vanishes {
                let xi = w.dot(&corr.gram_direction) / corr.sq_norm;
                w.axpy(-xi, &corr.direction, 1.0);
            }
            space.sq_norm(&w)
        };

        let mut accepted = false;
        if !corr.vanishes {
            let mut v = corr.direction;
            for _ in 0..2 {
                for (q, gq) in self.basis.iter().zip(&self.gram_basis) {
                    let c = v.dot(gq);
                    v.axpy(-c, q, 1.0);
                }
            }
            let nrm = space.norm(&v);
            if nrm > DEPENDENCE_TOL * problem.target_norm() && nrm > 0.0 {
                v /= nrm;
                let gv = space.apply_gram(&v);
                let coeff = problem.functional(&v);
                self.iterate.axpy(coeff, &v, 1.0);
                self.basis.push(v);
                self.gram_basis.push(gv);
                accepted = true;
            }
        }
        self.m += 1;
        if accepted {
            self.sq_error = space.sq_norm(&(problem.target() - &self.iterate));
        }
        OmpStep {
            omega,
            sq_error: self.sq_error,
            rec_sq_error,
            accepted,
        }
    }
}

pub(super) fn run<F>(problem: &Problem, m_max: usize, keep_iterates: bool, mut next_index: F) -> SolverTrajectory
where
    F: FnMut(&OmpState<'_>) -> usize,
{
    let mut state = OmpState::new(problem);
    let mut sq_errors = Vec::with_capacity(m_max + 1);
    sq_errors.push(state.sq_error());
    let mut iterates = keep_iterates.then(|| vec![state.iterate().clone()]);
    let mut chosen = Vec::with_capacity(m_max);
    for _ in 0..m_max {
        let omega = next_index(&state);
        let out = state.step(omega);
        sq_errors.push(out.sq_error);
        chosen.push(omega);
        if let Some(its) = iterates.as_mut() {
            its.push(state.iterate().clone());
        }
    }
    SolverTrajectory {
        iterates,
        sq_errors,
        chosen,
        xis: Vec::new(),
    }
}
