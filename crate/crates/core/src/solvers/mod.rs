//! Incremental subspace correction iterations.
//!
//! All variants start from `u⁽⁰⁾ = 0` and track the squared energy error
//! `δ_m² = ‖u − u⁽ᵐ⁾‖²` against the known solution `u`:
//!
//! * [`Variant::Random`]: `u⁽ᵐ⁺¹⁾ = α_m u⁽ᵐ⁾ + ξ_m R_ω r_ω` with `ω` drawn i.i.d. from `ρ`
//!   and `ξ_m` minimizing the next error.
//! * [`Variant::Omp`]: orthogonal projection of `u` onto the span of all correction
//!   directions drawn so far.
//! * [`Variant::Greedy`]: the same update as `Random` with `ω` maximizing the local
//!   residual norm over a finite candidate pool.
//! * [`Variant::Noisy`]: `Random` with an additive zero-mean perturbation after every update.

mod greedy;
mod omp;
mod recursion;

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::hilbert::{AmbientVector, InnerProductSpace, SubspaceFamily};
use crate::measures::{DiscreteMeasure, RandomStream};

pub use greedy::select_greedy;
pub use omp::{OmpState, OmpStep};
pub use recursion::{RecState, StepOutcome, XiRule};

/// How the local right-hand sides are assembled.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RhsMode {
    /// `a(u − u⁽ᵐ⁾, R_ω ·)` from the known error.
    #[default]
    Direct,
    /// `F(R_ω ·) − a(u⁽ᵐ⁾, R_ω ·)`, using only the functional `F = a(u, ·)`.
    Functional,
}

/// The variational problem `a(u, v) = F(v)` with its solution known, so errors can be tracked.
#[derive(Debug, Clone)]
pub struct Problem {
    family: Arc<SubspaceFamily>,
    target: AmbientVector,
    /// `G u`, so that `F(v) = (G u) · v`.
    functional: AmbientVector,
    target_norm: f64,
    rhs_mode: RhsMode,
}

impl Problem {
    pub fn new(family: Arc<SubspaceFamily>, target: AmbientVector) -> Result<Self> {
        family.space().check(&target)?;
        let functional = family.space().apply_gram(&target);
        let target_norm = family.space().norm(&target);
        Ok(Self {
            family,
            target,
            functional,
            target_norm,
            rhs_mode: RhsMode::Direct,
        })
    }

    pub fn with_rhs_mode(mut self, mode: RhsMode) -> Self {
        self.rhs_mode = mode;
        self
    }

    pub fn family(&self) -> &SubspaceFamily {
        &self.family
    }

    pub fn family_arc(&self) -> &Arc<SubspaceFamily> {
        &self.family
    }

    pub fn space(&self) -> &InnerProductSpace {
        self.family.space()
    }

    pub fn target(&self) -> &AmbientVector {
        &self.target
    }

    pub fn target_norm(&self) -> f64 {
        self.target_norm
    }

    pub fn rhs_mode(&self) -> RhsMode {
        self.rhs_mode
    }

    /// `F(v) = a(u, v)`.
    pub fn functional(&self, v: &AmbientVector) -> f64 {
        self.functional.dot(v)
    }

    pub(crate) fn functional_vector(&self) -> &AmbientVector {
        &self.functional
    }
}

/// Record of one run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SolverTrajectory {
    /// `u⁽⁰⁾ ..= u⁽ᵐᵃˣ⁾` when requested.
    pub iterates: Option<Vec<AmbientVector>>,
    /// `δ_m²` for `m = 0..=m_max`.
    pub sq_errors: Vec<f64>,
    /// `ω_m` for `m = 0..m_max`.
    pub chosen: Vec<usize>,
    /// Step sizes `ξ_m`; empty for OMP.
    pub xis: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum XiSchedule {
    Optimal,
    /// `ξ_m = xi0 / (m + 1)`.
    Prescribed { xi0: f64 },
}

impl Default for XiSchedule {
    fn default() -> Self {
        XiSchedule::Optimal
    }
}

/// Additive noise with `E ε = 0` and `E‖ε‖² = sigma²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub sigma: f64,
    pub xi_schedule: XiSchedule,
}

impl NoiseSpec {
    pub fn new(sigma: f64, xi_schedule: XiSchedule) -> Result<Self> {
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(Error::invalid(format!("noise sigma must be >= 0, got {sigma}")));
        }
        if let XiSchedule::Prescribed { xi0 } = xi_schedule {
            if !xi0.is_finite() {
                return Err(Error::invalid("prescribed xi0 must be finite"));
            }
        }
        Ok(Self { sigma, xi_schedule })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Variant {
    Random,
    Omp,
    /// Weak greedy selection over `pool` (all indices when `None`).
    Greedy { beta: f64, pool: Option<Vec<usize>> },
    Noisy(NoiseSpec),
}

impl Variant {
    pub fn name(&self) -> &'static str {
        match self {
            Variant::Random => "random",
            Variant::Omp => "omp",
            Variant::Greedy { .. } => "greedy",
            Variant::Noisy(_) => "noisy",
        }
    }

    /// Whether trajectories depend on the random stream.
    pub fn is_stochastic(&self) -> bool {
        !matches!(self, Variant::Greedy { .. })
    }
}

/// `α_m = 1 − 1/(m+2)`.
pub fn alpha(m: usize) -> f64 {
    1.0 - alpha_bar(m)
}

/// `ᾱ_m = 1/(m+2)`.
pub fn alpha_bar(m: usize) -> f64 {
    1.0 / (m as f64 + 2.0)
}

/// Step size minimizing `‖u − α_m u_m − ξ d‖` over `ξ`; zero for a zero direction.
pub fn xi_optimal(problem: &Problem, u_m: &AmbientVector, m: usize, direction: &AmbientVector) -> f64 {
    let space = problem.space();
    let g_dir = space.apply_gram(direction);
    let denom = direction.dot(&g_dir);
    if denom > 0.0 {
        (problem.functional(direction) - alpha(m) * u_m.dot(&g_dir)) / denom
    } else {
        0.0
    }
}

fn check_measure(problem: &Problem, measure: &DiscreteMeasure) -> Result<()> {
    if measure.len() != problem.family().len() {
        return Err(Error::invalid(format!(
            "measure has {} atoms but the family has {} subspaces",
            measure.len(),
            problem.family().len()
        )));
    }
    Ok(())
}

/// Runs `variant` for `m_max` steps. Greedy ignores `measure` and `stream`.
pub fn run(
    problem: &Problem,
    measure: &DiscreteMeasure,
    variant: &Variant,
    m_max: usize,
    stream: &mut RandomStream,
    keep_iterates: bool,
) -> Result<SolverTrajectory> {
    match variant {
        Variant::Random => {
            check_measure(problem, measure)?;
            Ok(recursion::run_sampled(
                problem,
                m_max,
                keep_iterates,
                None,
                |_| measure.sample(stream),
            ))
        }
        Variant::Noisy(noise) => {
            check_measure(problem, measure)?;
            Ok(recursion::run_noisy(problem, measure, *noise, m_max, stream, keep_iterates))
        }
        Variant::Omp => {
            check_measure(problem, measure)?;
            Ok(omp::run(problem, m_max, keep_iterates, |_| measure.sample(stream)))
        }
        Variant::Greedy { beta, pool } => {
            let pool: Vec<usize> = match pool {
                Some(p) => p.clone(),
                None => (0..problem.family().len()).collect(),
            };
            greedy::run(problem, *beta, m_max, &pool, keep_iterates)
        }
    }
}

/// Randomized incremental correction with optimal steps.
pub fn run_random(
    problem: &Problem,
    measure: &DiscreteMeasure,
    m_max: usize,
    stream: &mut RandomStream,
) -> Result<SolverTrajectory> {
    run(problem, measure, &Variant::Random, m_max, stream, false)
}

/// Stochastic orthogonal matching pursuit.
pub fn run_omp(
    problem: &Problem,
    measure: &DiscreteMeasure,
    m_max: usize,
    stream: &mut RandomStream,
) -> Result<SolverTrajectory> {
    run(problem, measure, &Variant::Omp, m_max, stream, false)
}

/// Weak greedy selection over `pool`; picks the pool maximum, which satisfies the
/// weak rule for every `beta`.
pub fn run_greedy(problem: &Problem, beta: f64, m_max: usize, pool: &[usize]) -> Result<SolverTrajectory> {
    greedy::run(problem, beta, m_max, pool, false)
}

/// Randomized correction with additive noise after every update.
pub fn run_noisy(
    problem: &Problem,
    measure: &DiscreteMeasure,
    noise: NoiseSpec,
    m_max: usize,
    stream: &mut RandomStream,
) -> Result<SolverTrajectory> {
    run(problem, measure, &Variant::Noisy(noise), m_max, stream, false)
}

#[cfg(test)]
mod tests;
