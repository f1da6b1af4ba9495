//! Builders for the concrete settings: orthonormal bases, general unit dictionaries,
//! kernel point evaluations, and collective approximation of a subspace.

mod collective;
mod rkhs;

use std::sync::Arc;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::hilbert::{AmbientVector, InnerProductSpace, LocalSubspace, SubspaceFamily};
use crate::measures::{DiscreteMeasure, RandomStream};
use crate::solvers::Problem;
use crate::spectral::{covariance_operator, spectral_decomp, SpectralDecomposition};

pub use collective::{collective_instance, sigma_eps, CollectiveInstance, CollectiveSpec, CollectiveTracker};
pub use rkhs::{rkhs_instance, Kernel, RkhsInstance, RkhsSpec, DEFAULT_JITTER};

/// A subspace family with its sampling measure, ready to pose problems on.
#[derive(Debug, Clone)]
pub struct Instance {
    family: Arc<SubspaceFamily>,
    measure: DiscreteMeasure,
    /// Unit atoms spanning one-dimensional subspaces, when the family is of that form.
    atoms: Option<Vec<AmbientVector>>,
    orthonormal: bool,
}

impl Instance {
    /// Pairs an arbitrary family with a measure over its indices.
    pub fn from_family(family: SubspaceFamily, measure: DiscreteMeasure) -> Result<Self> {
        if family.len() != measure.len() {
            return Err(Error::invalid(format!(
                "{} subspaces but {} weights",
                family.len(),
                measure.len()
            )));
        }
        Ok(Self {
            family: Arc::new(family),
            measure,
            atoms: None,
            orthonormal: false,
        })
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

    pub fn measure(&self) -> &DiscreteMeasure {
        &self.measure
    }

    pub fn atoms(&self) -> Option<&[AmbientVector]> {
        self.atoms.as_deref()
    }

    pub fn is_orthonormal(&self) -> bool {
        self.orthonormal
    }

    pub fn problem(&self, target: AmbientVector) -> Result<Problem> {
        Problem::new(self.family.clone(), target)
    }

    /// Covariance operator of the unit atoms under the instance measure.
    pub fn covariance(&self) -> Result<DMatrix<f64>> {
        let atoms = self
            .atoms
            .as_ref()
            .ok_or_else(|| Error::Unsupported("covariance operator needs a unit-atom family".into()))?;
        covariance_operator(self.space(), atoms, &self.measure)
    }

    pub fn decomposition(&self) -> Result<SpectralDecomposition> {
        spectral_decomp(&self.covariance()?, self.space())
    }
}

/// `R^d` with the canonical basis as atoms; `Λ = 1` and `L = diag(ρ)`.
pub fn orthonormal_instance(dim: usize, measure: DiscreteMeasure) -> Result<Instance> {
    if measure.len() != dim {
        return Err(Error::invalid(format!(
            "orthonormal instance in dimension {dim} needs {dim} weights, got {}",
            measure.len()
        )));
    }
    let space = InnerProductSpace::euclidean(dim)?;
    let atoms: Vec<AmbientVector> = (0..dim)
        .map(|i| {
            let mut e = AmbientVector::zeros(dim);
            e[i] = 1.0;
            e
        })
        .collect();
    let mut inst = unit_dictionary_instance(space, atoms, measure)?;
    inst.orthonormal = true;
    Ok(inst)
}

/// One-dimensional spans of `a`-normalized atoms with natural injections.
pub fn unit_dictionary_instance(
    space: InnerProductSpace,
    atoms: Vec<AmbientVector>,
    measure: DiscreteMeasure,
) -> Result<Instance> {
    if atoms.len() != measure.len() {
        return Err(Error::invalid(format!(
            "{} atoms but {} weights",
            atoms.len(),
            measure.len()
        )));
    }
    let subs = atoms
        .iter()
        .enumerate()
        .map(|(i, a)| {
            space.check(a)?;
            let n = space.norm(a);
            if (n - 1.0).abs() > 1e-10 {
                return Err(Error::invalid(format!("atom {i} has norm {n}, expected 1")));
            }
            LocalSubspace::span_of(&space, a)
        })
        .collect::<Result<Vec<_>>>()?;
    let family = SubspaceFamily::new(space, subs)?;
    let mut inst = Instance::from_family(family, measure)?;
    inst.atoms = Some(atoms);
    Ok(inst)
}

/// I.i.d. standard normal vectors normalized in the `a`-norm.
pub fn random_unit_atoms(space: &InnerProductSpace, count: usize, stream: &mut RandomStream) -> Vec<AmbientVector> {
    (0..count)
        .map(|_| loop {
            let v = AmbientVector::from_fn(space.dim(), |_, _| stream.standard_normal());
            let n = space.norm(&v);
            if n > 0.0 {
                break v / n;
            }
        })
        .collect()
}
