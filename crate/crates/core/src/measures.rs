//! Discrete probability measures on the index set and the seeded random streams
//! that drive the stochastic iterations.

use nalgebra::DVector;
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::weighted::WeightedAliasIndex;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

const MASS_TOL: f64 = 1e-12;

/// Probability weights `ρ_i > 0` on the index set `0..len`, with an alias table for O(1) draws.
#[derive(Debug, Clone)]
pub struct DiscreteMeasure {
    weights: Vec<f64>,
    alias: WeightedAliasIndex<f64>,
}

impl PartialEq for DiscreteMeasure {
    fn eq(&self, other: &Self) -> bool {
        self.weights == other.weights
    }
}

impl DiscreteMeasure {
    /// Weights must be positive and sum to one within `1e-12`.
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::invalid("measure needs at least one atom"));
        }
        if let Some((i, w)) = weights.iter().enumerate().find(|(_, w)| !(**w > 0.0) || !w.is_finite()) {
            return Err(Error::invalid(format!("weight {i} is {w}, weights must be positive")));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > MASS_TOL {
            return Err(Error::invalid(format!("weights sum to {total}, expected 1")));
        }
        let alias = WeightedAliasIndex::new(weights.clone())
            .map_err(|e| Error::invalid(format!("alias table: {e}")))?;
        Ok(Self { weights, alias })
    }

    /// Rescales positive weights to unit mass.
    pub fn normalized(weights: Vec<f64>) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0) || !total.is_finite() {
            return Err(Error::invalid("weights must have positive finite total"));
        }
        Self::new(weights.into_iter().map(|w| w / total).collect())
    }

    pub fn uniform(n: usize) -> Result<Self> {
        Self::normalized(vec![1.0; n])
    }

    /// `ρ_i ∝ ratio^i`.
    pub fn geometric(n: usize, ratio: f64) -> Result<Self> {
        if !(ratio > 0.0) || !ratio.is_finite() {
            return Err(Error::invalid(format!("geometric ratio must be positive, got {ratio}")));
        }
        Self::normalized((0..n).map(|i| ratio.powi(i as i32)).collect())
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn weight(&self, i: usize) -> f64 {
        self.weights[i]
    }

    pub fn sample(&self, stream: &mut RandomStream) -> usize {
        self.alias.sample(stream)
    }

    /// Exact `Σ_i ρ_i f(i)`.
    pub fn expect<F>(&self, f: F) -> f64
    where
        F: Fn(usize) -> f64,
    {
        self.weights.iter().enumerate().map(|(i, w)| w * f(i)).sum()
    }

    /// Exact `Σ_i ρ_i f(i)` for vector-valued `f`; every `f(i)` must have length `dim`.
    pub fn expect_vector<F>(&self, dim: usize, f: F) -> Result<DVector<f64>>
    where
        F: Fn(usize) -> DVector<f64>,
    {
        let mut acc = DVector::zeros(dim);
        for (i, w) in self.weights.iter().enumerate() {
            let v = f(i);
            if v.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: v.len(),
                });
            }
            acc.axpy(*w, &v, 1.0);
        }
        Ok(acc)
    }
}

/// Deterministic generator keyed by `(seed, stream)`.
///
/// ChaCha supports 2^64 independent streams per seed, so run `r` of an experiment
/// with seed `s` always draws from stream `r` of `s` regardless of scheduling.
#[derive(Debug, Clone)]
pub struct RandomStream {
    seed: u64,
    stream: u64,
    rng: ChaCha8Rng,
}

impl RandomStream {
    pub fn new(seed: u64) -> Self {
        Self::for_run(seed, 0)
    }

    pub fn for_run(seed: u64, run: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(run);
        Self {
            seed,
            stream: run,
            rng,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.rng)
    }
}

impl RngCore for RandomStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}
