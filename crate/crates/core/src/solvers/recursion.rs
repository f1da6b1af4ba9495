use nalgebra::DVector;

use super::{alpha, NoiseSpec, Problem, RhsMode, SolverTrajectory, XiSchedule};
use crate::hilbert::{AmbientVector, ZERO_RESIDUAL_TOL};
use crate::measures::{DiscreteMeasure, RandomStream};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum XiRule {
    Optimal,
    Fixed(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub omega: usize,
    pub xi: f64,
    /// `δ_{m+1}²`.
    pub sq_error: f64,
    /// `‖r_ω⁽ᵐ⁾‖_ω`.
    pub local_residual_norm: f64,
}

/// Local correction for the current iterate.
#[derive(Debug, Clone)]
pub struct Correction {
    /// `r_ω⁽ᵐ⁾ = T_ω e⁽ᵐ⁾` in local coordinates.
    pub local: DVector<f64>,
    /// `R_ω r_ω⁽ᵐ⁾`.
    pub direction: AmbientVector,
    /// `G R_ω r_ω⁽ᵐ⁾`.
    pub gram_direction: AmbientVector,
    pub sq_norm: f64,
    /// Whether the direction is below the zero-residual tolerance.
    pub vanishes: bool,
}

/// State of the recursion `u⁽ᵐ⁺¹⁾ = α_m u⁽ᵐ⁾ + ξ_m R_ω r_ω⁽ᵐ⁾` after `m` steps.
#[derive(Debug, Clone)]
pub struct RecState<'a> {
    problem: &'a Problem,
    iterate: AmbientVector,
    m: usize,
    sq_error: f64,
}

impl<'a> RecState<'a> {
    pub fn new(problem: &'a Problem) -> Self {
        Self {
            problem,
            iterate: AmbientVector::zeros(problem.space().dim()),
            m: 0,
            sq_error: problem.target_norm().powi(2),
        }
    }

    pub fn problem(&self) -> &'a Problem {
        self.problem
    }

    pub fn iterate(&self) -> &AmbientVector {
        &self.iterate
    }

    pub fn steps(&self) -> usize {
        self.m
    }

    pub fn sq_error(&self) -> f64 {
        self.sq_error
    }

    pub fn error(&self) -> AmbientVector {
        self.problem.target() - &self.iterate
    }

    pub fn correction(&self, omega: usize) -> Correction {
        local_correction(self.problem, &self.iterate, self.sq_error.sqrt(), omega)
    }

    /// One step with the error-minimizing `ξ_m`.
    pub fn step(&mut self, omega: usize) -> StepOutcome {
        self.step_with(omega, XiRule::Optimal)
    }

    pub fn step_with(&mut self, omega: usize, rule: XiRule) -> StepOutcome {
        let corr = self.correction(omega);
        let a = alpha(self.m);
        let xi = if corr.vanishes {
            0.0
        } else {
            match rule {
                XiRule::Optimal => {
                    let num = match self.problem.rhs_mode() {
                        RhsMode::Direct => {
                            (self.problem.target() - &self.iterate * a).dot(&corr.gram_direction)
                        }
                        RhsMode::Functional => {
                            self.problem.functional(&corr.direction)
                                - a * self.iterate.dot(&corr.gram_direction)
                        }
                    };
                    num / corr.sq_norm
                }
                XiRule::Fixed(xi) => xi,
            }
        };
        self.iterate *= a;
        if xi != 0.0 {
            self.iterate.axpy(xi, &corr.direction, 1.0);
        }
        self.m += 1;
        self.refresh_error();
        StepOutcome {
            omega,
            xi,
            sq_error: self.sq_error,
            local_residual_norm: self
                .problem
                .family()
                .subspaces()[omega]
                .local_norm(&corr.local),
        }
    }

    /// Adds `eps` to the iterate.
    pub fn perturb(&mut self, eps: &AmbientVector) {
        self.iterate += eps;
        self.refresh_error();
    }

    fn refresh_error(&mut self) {
        let e = self.error();
        self.sq_error = self.problem.space().sq_norm(&e);
    }
}

pub(crate) fn local_correction(
    problem: &Problem,
    iterate: &AmbientVector,
    error_norm: f64,
    omega: usize,
) -> Correction {
    let family = problem.family();
    let rhs = match problem.rhs_mode() {
        RhsMode::Direct => family.local_rhs(omega, &(problem.target() - iterate)),
        RhsMode::Functional => {
            let basis = family.subspaces()[omega].basis();
            basis.tr_mul(problem.functional_vector()) - family.local_rhs(omega, iterate)
        }
    };
    let local = family.solve_local(omega, &rhs);
    let direction = family.apply_r_unchecked(omega, &local);
    let gram_direction = family.gram_of_correction(omega, &local);
    let sq_norm = direction.dot(&gram_direction).max(0.0);
    let vanishes = !(sq_norm.sqrt() > ZERO_RESIDUAL_TOL * error_norm);
    Correction {
        local,
        direction,
        gram_direction,
        sq_norm,
        vanishes,
    }
}

pub(super) fn run_sampled<F>(
    problem: &Problem,
    m_max: usize,
    keep_iterates: bool,
    xi_schedule: Option<XiSchedule>,
    mut next_index: F,
) -> SolverTrajectory
where
    F: FnMut(&RecState<'_>) -> usize,
{
    let mut state = RecState::new(problem);
    let mut traj = start_trajectory(&state, m_max, keep_iterates);
    for m in 0..m_max {
        let omega = next_index(&state);
        let out = state.step_with(omega, xi_rule(xi_schedule, m));
        record(&mut traj, &state, out);
    }
    traj
}

pub(super) fn run_noisy(
    problem: &Problem,
    measure: &DiscreteMeasure,
    noise: NoiseSpec,
    m_max: usize,
    stream: &mut RandomStream,
    keep_iterates: bool,
) -> SolverTrajectory {
    let space = problem.space();
    let d = space.dim();
    let coord_sd = noise.sigma / (d as f64).sqrt();
    let mut state = RecState::new(problem);
    let mut traj = start_trajectory(&state, m_max, keep_iterates);
    for m in 0..m_max {
        let omega = measure.sample(stream);
        let out = state.step_with(omega, xi_rule(Some(noise.xi_schedule), m));
        // No draws at sigma = 0 so the index sequence matches the noiseless run.
        let out = if noise.sigma > 0.0 {
            let z = AmbientVector::from_fn(d, |_, _| coord_sd * stream.standard_normal());
            state.perturb(&space.from_orthonormal(&z));
            StepOutcome {
                sq_error: state.sq_error(),
                ..out
            }
        } else {
            out
        };
        record(&mut traj, &state, out);
    }
    traj
}

fn xi_rule(schedule: Option<XiSchedule>, m: usize) -> XiRule {
    match schedule {
        None | Some(XiSchedule::Optimal) => XiRule::Optimal,
        Some(XiSchedule::Prescribed { xi0 }) => XiRule::Fixed(xi0 / (m as f64 + 1.0)),
    }
}

pub(super) fn start_trajectory(state: &RecState<'_>, m_max: usize, keep_iterates: bool) -> SolverTrajectory {
    let mut sq_errors = Vec::with_capacity(m_max + 1);
    sq_errors.push(state.sq_error());
    SolverTrajectory {
        iterates: keep_iterates.then(|| vec![state.iterate().clone()]),
        sq_errors,
        chosen: Vec::with_capacity(m_max),
        xis: Vec::with_capacity(m_max),
    }
}

pub(super) fn record(traj: &mut SolverTrajectory, state: &RecState<'_>, out: StepOutcome) {
    traj.sq_errors.push(out.sq_error);
    traj.chosen.push(out.omega);
    traj.xis.push(out.xi);
    if let Some(its) = traj.iterates.as_mut() {
        its.push(state.iterate().clone());
    }
}
