use super::recursion::{local_correction, record, start_trajectory, RecState};
use super::{Problem, SolverTrajectory};
use crate::error::{Error, Result};

/// Index in `pool` with the largest local residual `‖T_ω e⁽ᵐ⁾‖_ω`; ties go to the
/// earliest pool entry. Returns the index and the attained norm.
pub fn select_greedy(state: &RecState<'_>, pool: &[usize]) -> (usize, f64) {
    let problem = state.problem();
    let family = problem.family();
    let err = state.sq_error().sqrt();
    let mut best = (pool[0], f64::NEG_INFINITY);
    for &omega in pool {
        let corr = local_correction(problem, state.iterate(), err, omega);
        let r = family.subspaces()[omega].local_norm(&corr.local);
        if r > best.1 {
            best = (omega, r);
        }
    }
    best
}

pub(super) fn run(
    problem: &Problem,
    beta: f64,
    m_max: usize,
    pool: &[usize],
    keep_iterates: bool,
) -> Result<SolverTrajectory> {
    if !(beta > 0.0 && beta <= 1.0) {
        return Err(Error::invalid(format!("beta must lie in (0, 1], got {beta}")));
    }
    if pool.is_empty() {
        return Err(Error::invalid("greedy candidate pool is empty"));
    }
    if let Some(&bad) = pool.iter().find(|&&w| w >= problem.family().len()) {
        return Err(Error::UnknownIndex(bad));
    }
    let mut state = RecState::new(problem);
    let mut traj = start_trajectory(&state, m_max, keep_iterates);
    for _ in 0..m_max {
        let (omega, _) = select_greedy(&state, pool);
        let out = state.step(omega);
        record(&mut traj, &state, out);
    }
    Ok(traj)
}
