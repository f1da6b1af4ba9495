use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::measures::{DiscreteMeasure, RandomStream};
use crate::solvers::{self, OmpState, Problem, RecState, Variant, XiRule, XiSchedule};

/// Largest number of weighted sample sequences the enumeration oracle will visit.
pub const ENUMERATION_BUDGET: f64 = 1e7;

/// Runs handed out per scheduling batch. Results inside a batch are reduced in run order,
/// so the output does not depend on the thread count.
const BATCH: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExpectationMode {
    MonteCarlo,
    Enumeration,
}

/// Estimates of `E(δ_m²)` for `m = 0..=m_max`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpectationCurve {
    pub means: Vec<f64>,
    /// Standard errors of the means; zero for exact curves, infinite for a single run.
    pub stderrs: Vec<f64>,
    pub runs: usize,
    pub mode: ExpectationMode,
}

impl ExpectationCurve {
    pub fn exact(means: Vec<f64>) -> Self {
        let stderrs = vec![0.0; means.len()];
        Self {
            means,
            stderrs,
            runs: 1,
            mode: ExpectationMode::Enumeration,
        }
    }

    pub fn m_max(&self) -> usize {
        self.means.len().saturating_sub(1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Execution {
    Sequential,
    /// Data-parallel over runs; sequential when built without the `parallel` feature.
    #[default]
    Parallel,
}

/// Running mean and sum of squared deviations per index.
#[derive(Debug, Clone)]
pub struct CurveAccumulator {
    n: usize,
    mean: Vec<f64>,
    m2: Vec<f64>,
}

impl CurveAccumulator {
    pub fn new(len: usize) -> Self {
        Self {
            n: 0,
            mean: vec![0.0; len],
            m2: vec![0.0; len],
        }
    }

    pub fn push(&mut self, sample: &[f64]) {
        self.n += 1;
        let n = self.n as f64;
        for ((mu, m2), &x) in self.mean.iter_mut().zip(self.m2.iter_mut()).zip(sample) {
            let delta = x - *mu;
            *mu += delta / n;
            *m2 += delta * (x - *mu);
        }
    }

    pub fn count(&self) -> usize {
        self.n
    }

    pub fn finish(self) -> ExpectationCurve {
        let n = self.n as f64;
        let stderrs = self
            .m2
            .iter()
            .map(|&m2| {
                if self.n < 2 {
                    f64::INFINITY
                } else {
                    (m2.max(0.0) / (n - 1.0) / n).sqrt()
                }
            })
            .collect();
        ExpectationCurve {
            means: self.mean,
            stderrs,
            runs: self.n,
            mode: ExpectationMode::MonteCarlo,
        }
    }
}

/// Evaluates `f` once per run with the stream derived from `(seed, run)` and hands the
/// results to `sink` in run order.
pub fn mc_runs<T, F, S>(runs: usize, seed: u64, exec: Execution, f: F, mut sink: S) -> Result<()>
where
    T: Send,
    F: Fn(u64, &mut RandomStream) -> Result<T> + Sync,
    S: FnMut(u64, T) -> Result<()>,
{
    let mut start = 0;
    while start < runs {
        let end = (start + BATCH).min(runs);
        let batch = eval_batch(start as u64..end as u64, seed, exec, &f);
        for (r, out) in (start as u64..).zip(batch) {
            sink(r, out?)?;
        }
        start = end;
    }
    Ok(())
}

fn eval_batch<T, F>(range: std::ops::Range<u64>, seed: u64, exec: Execution, f: &F) -> Vec<Result<T>>
where
    T: Send,
    F: Fn(u64, &mut RandomStream) -> Result<T> + Sync,
{
    let one = |r: u64| f(r, &mut RandomStream::for_run(seed, r));
    match exec {
        #[cfg(feature = "parallel")]
        Execution::Parallel => {
            use rayon::prelude::*;
            let (lo, hi) = (range.start as usize, range.end as usize);
            (lo..hi).into_par_iter().map(|r| one(r as u64)).collect()
        }
        _ => range.map(one).collect(),
    }
}

/// Monte Carlo estimate of `E(δ_m²)` over `runs` independent trajectories.
/// Greedy selection has a single sample path, which is returned as an exact curve.
pub fn mc_expectation(
    problem: &Problem,
    measure: &DiscreteMeasure,
    variant: &Variant,
    m_max: usize,
    runs: usize,
    seed: u64,
    exec: Execution,
) -> Result<ExpectationCurve> {
    if runs == 0 {
        return Err(Error::invalid("runs must be at least 1"));
    }
    if !variant.is_stochastic() {
        let t = solvers::run(problem, measure, variant, m_max, &mut RandomStream::new(seed), false)?;
        return Ok(ExpectationCurve::exact(t.sq_errors));
    }
    let mut acc = CurveAccumulator::new(m_max + 1);
    mc_runs(
        runs,
        seed,
        exec,
        |_, stream| solvers::run(problem, measure, variant, m_max, stream, false).map(|t| t.sq_errors),
        |_, errs| {
            acc.push(&errs);
            Ok(())
        },
    )?;
    Ok(acc.finish())
}

trait Branch: Clone {
    fn advance(&mut self, omega: usize) -> f64;
}

#[derive(Clone)]
struct RecBranch<'a> {
    state: RecState<'a>,
    schedule: XiSchedule,
}

impl Branch for RecBranch<'_> {
    fn advance(&mut self, omega: usize) -> f64 {
        let rule = match self.schedule {
            XiSchedule::Optimal => XiRule::Optimal,
            XiSchedule::Prescribed { xi0 } => XiRule::Fixed(xi0 / (self.state.steps() as f64 + 1.0)),
        };
        self.state.step_with(omega, rule).sq_error
    }
}

impl Branch for OmpState<'_> {
    fn advance(&mut self, omega: usize) -> f64 {
        self.step(omega).sq_error
    }
}

/// Exact `E(δ_m²)` by summing over every sample sequence in the support of `ρ^m`.
pub fn enumerate_expectation(
    problem: &Problem,
    measure: &DiscreteMeasure,
    variant: &Variant,
    m_max: usize,
) -> Result<ExpectationCurve> {
    if measure.len() != problem.family().len() {
        return Err(Error::invalid("measure and family sizes differ"));
    }
    let support: Vec<(usize, f64)> = measure
        .weights()
        .iter()
        .copied()
        .enumerate()
        .filter(|&(_, w)| w > 0.0)
        .collect();
    let mut sums = vec![0.0; m_max + 1];
    sums[0] = problem.target_norm().powi(2);
    let check_budget = || {
        let required = (support.len() as f64).powi(m_max as i32);
        if required > ENUMERATION_BUDGET {
            Err(Error::BudgetExceeded {
                required,
                budget: ENUMERATION_BUDGET,
            })
        } else {
            Ok(())
        }
    };
    match variant {
        Variant::Greedy { .. } => {
            let t = solvers::run(problem, measure, variant, m_max, &mut RandomStream::new(0), false)?;
            return Ok(ExpectationCurve::exact(t.sq_errors));
        }
        Variant::Random => {
            check_budget()?;
            let root = RecBranch {
                state: RecState::new(problem),
                schedule: XiSchedule::Optimal,
            };
            descend(&root, 1.0, 0, m_max, &support, &mut sums);
        }
        Variant::Noisy(noise) if noise.sigma == 0.0 => {
            check_budget()?;
            let root = RecBranch {
                state: RecState::new(problem),
                schedule: noise.xi_schedule,
            };
            descend(&root, 1.0, 0, m_max, &support, &mut sums);
        }
        Variant::Noisy(_) => {
            return Err(Error::Unsupported(
                "noise with sigma > 0 has a continuous distribution and cannot be enumerated".into(),
            ))
        }
        Variant::Omp => {
            check_budget()?;
            descend(&OmpState::new(problem), 1.0, 0, m_max, &support, &mut sums);
        }
    }
    Ok(ExpectationCurve::exact(sums))
}

fn descend<B: Branch>(state: &B, prob: f64, m: usize, m_max: usize, support: &[(usize, f64)], sums: &mut [f64]) {
    if m == m_max {
        return;
    }
    for &(omega, w) in support {
        let mut next = state.clone();
        let err = next.advance(omega);
        let p = prob * w;
        sums[m + 1] += p * err;
        descend(&next, p, m + 1, m_max, support, sums);
    }
}
