//! Randomized, greedy and orthogonal-matching-pursuit variants of incremental
//! subspace correction for quadratic variational problems, together with the
//! spectral toolbox for the smoothness classes that govern their convergence and a
//! harness that checks expected-error bounds by Monte Carlo and exact enumeration.

pub mod error;
pub mod harness;
pub mod hilbert;
pub mod instances;
pub mod measures;
pub mod solvers;
pub mod spectral;

pub use error::{Error, Result};
pub use hilbert::{AmbientVector, InnerProductSpace, LocalSubspace, SubspaceFamily};
pub use measures::{DiscreteMeasure, RandomStream};
