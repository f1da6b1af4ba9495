use nalgebra::{DMatrix, DVector};

use super::{unit_dictionary_instance, Instance};
use crate::error::{Error, Result};
use crate::hilbert::{AmbientVector, InnerProductSpace, LocalSubspace, SubspaceFamily};
use crate::measures::{DiscreteMeasure, RandomStream};
use crate::spectral::{hs_norm, SpectralDecomposition};

const ORTHO_TOL: f64 = 1e-10;
const RANK_TOL: f64 = 1e-12;

/// Approximation of the span of an `a`-orthonormal `Φ = (φ_1, …, φ_n)` by one dictionary.
#[derive(Debug, Clone)]
pub struct CollectiveSpec {
    space: InnerProductSpace,
    phi: DMatrix<f64>,
    dictionary: Vec<AmbientVector>,
}

impl CollectiveSpec {
    pub fn new(space: InnerProductSpace, phi: DMatrix<f64>, dictionary: Vec<AmbientVector>) -> Result<Self> {
        let d = space.dim();
        if phi.nrows() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: phi.nrows(),
            });
        }
        if phi.ncols() == 0 {
            return Err(Error::invalid("target subspace must have n >= 1"));
        }
        let gp = if space.is_euclidean() {
            phi.tr_mul(&phi)
        } else {
            phi.tr_mul(&(space.gram() * &phi))
        };
        let dev = (gp - DMatrix::identity(phi.ncols(), phi.ncols())).amax();
        if dev > ORTHO_TOL {
            return Err(Error::invalid(format!("phi is not orthonormal (deviation {dev:.3e})")));
        }
        if dictionary.is_empty() {
            return Err(Error::invalid("dictionary is empty"));
        }
        Ok(Self {
            space,
            phi,
            dictionary,
        })
    }

    /// Euclidean `R^d`, a random orthonormal `Φ` and `atoms` random unit atoms.
    pub fn random(ambient_dim: usize, n: usize, atoms: usize, stream: &mut RandomStream) -> Result<Self> {
        if n == 0 || n > ambient_dim {
            return Err(Error::invalid(format!("need 1 <= n <= d, got n = {n}, d = {ambient_dim}")));
        }
        let space = InnerProductSpace::euclidean(ambient_dim)?;
        let g = DMatrix::from_fn(ambient_dim, n, |_, _| stream.standard_normal());
        let phi = g.qr().q();
        let dictionary = super::random_unit_atoms(&space, atoms, stream);
        Self::new(space, phi, dictionary)
    }

    pub fn space(&self) -> &InnerProductSpace {
        &self.space
    }

    pub fn ambient_dim(&self) -> usize {
        self.space.dim()
    }

    pub fn n(&self) -> usize {
        self.phi.ncols()
    }

    pub fn phi(&self) -> &DMatrix<f64> {
        &self.phi
    }

    pub fn dictionary(&self) -> &[AmbientVector] {
        &self.dictionary
    }
}

/// `V = H^n` with `a(u, v) = Σ_i (u_i, v_i)`, vectors stacked component after component,
/// and `V_ω = {c ω : c ∈ R^n}`.
#[derive(Debug, Clone)]
pub struct CollectiveInstance {
    spec: CollectiveSpec,
    instance: Instance,
    component_instance: Instance,
}

pub fn collective_instance(spec: CollectiveSpec, measure: DiscreteMeasure) -> Result<CollectiveInstance> {
    let component_instance = unit_dictionary_instance(spec.space.clone(), spec.dictionary.clone(), measure.clone())?;
    let (d, n) = (spec.ambient_dim(), spec.n());
    let space = if spec.space.is_euclidean() {
        InnerProductSpace::euclidean(d * n)?
    } else {
        let mut g = DMatrix::zeros(d * n, d * n);
        for i in 0..n {
            g.view_mut((i * d, i * d), (d, d)).copy_from(spec.space.gram());
        }
        InnerProductSpace::new(g)?
    };
    let subs = spec
        .dictionary
        .iter()
        .map(|w| {
            let mut b = DMatrix::zeros(d * n, n);
            for i in 0..n {
                b.view_mut((i * d, i), (d, 1)).copy_from(w);
            }
            LocalSubspace::restricted(&space, b)
        })
        .collect::<Result<Vec<_>>>()?;
    let instance = Instance::from_family(SubspaceFamily::new(space, subs)?, measure)?;
    Ok(CollectiveInstance {
        spec,
        instance,
        component_instance,
    })
}

impl CollectiveInstance {
    pub fn spec(&self) -> &CollectiveSpec {
        &self.spec
    }

    /// The instance on `H^n`.
    pub fn instance(&self) -> &Instance {
        &self.instance
    }

    /// The unit-dictionary instance on `H` with the same atoms and measure.
    pub fn component_instance(&self) -> &Instance {
        &self.component_instance
    }

    /// `Φ` as one stacked vector.
    pub fn target(&self) -> AmbientVector {
        stack(&self.spec.phi)
    }

    pub fn components(&self, v: &AmbientVector) -> Vec<AmbientVector> {
        let d = self.spec.ambient_dim();
        (0..self.spec.n())
            .map(|i| v.rows(i * d, d).into_owned())
            .collect()
    }

    /// `‖Φ‖²_{A_2} = Σ_i ‖φ_i‖²_{H^{1/2}_L}` with `L` the covariance on `H`.
    pub fn phi_a2_sq(&self, decomp: &SpectralDecomposition) -> Result<f64> {
        self.spec
            .phi
            .column_iter()
            .map(|c| hs_norm(&c.into_owned(), 0.5, decomp).map(|x| x * x))
            .sum()
    }

    /// `Σ_i ‖φ_i‖²_{H^s_L}`.
    pub fn phi_hs_sq(&self, s: f64, decomp: &SpectralDecomposition) -> Result<f64> {
        self.spec
            .phi
            .column_iter()
            .map(|c| hs_norm(&c.into_owned(), s, decomp).map(|x| x * x))
            .sum()
    }

    pub fn tracker(&self) -> CollectiveTracker {
        CollectiveTracker::new(&self.spec)
    }
}

fn stack(phi: &DMatrix<f64>) -> AmbientVector {
    AmbientVector::from_column_slice(phi.as_slice())
}

/// `σ` and `ε` for `W_{m−1}` grown one atom at a time.
#[derive(Debug, Clone)]
pub struct CollectiveTracker {
    space: InnerProductSpace,
    /// Orthonormal basis of `W` in whitened coordinates.
    basis: Vec<DVector<f64>>,
    /// Whitened `(I − P_W) Φ`.
    residual: DMatrix<f64>,
    phi_norm: f64,
}

impl CollectiveTracker {
    pub fn new(spec: &CollectiveSpec) -> Self {
        let residual = spec.space.to_orthonormal_mat(&spec.phi);
        Self {
            space: spec.space.clone(),
            basis: Vec::new(),
            phi_norm: residual.norm(),
            residual,
        }
    }

    /// Extends `W` by `w`; returns whether the dimension grew.
    pub fn add(&mut self, w: &AmbientVector) -> Result<bool> {
        self.space.check(w)?;
        let mut q = self.space.to_orthonormal(w);
        let scale = q.norm();
        if scale == 0.0 {
            return Ok(false);
        }
        for _ in 0..2 {
            for b in &self.basis {
                let c = b.dot(&q);
                q.axpy(-c, b, 1.0);
            }
        }
        let nrm = q.norm();
        if nrm <= RANK_TOL * scale {
            return Ok(false);
        }
        q /= nrm;
        let coef = q.tr_mul(&self.residual);
        self.residual -= &q * coef;
        self.basis.push(q);
        Ok(true)
    }

    pub fn rank(&self) -> usize {
        self.basis.len()
    }

    /// `(σ, ε)` for the current `W`.
    pub fn sigma_eps(&self) -> (f64, f64) {
        let eps = self.residual.norm();
        // Values below roundoff of the full norm are exact zeros.
        if eps <= 1e-14 * self.phi_norm {
            return (0.0, 0.0);
        }
        let sigma = self.residual.clone().singular_values().max();
        (sigma.min(eps), eps)
    }
}

/// `σ = sup_{v ∈ V_n, ‖v‖=1} ‖v − P_W v‖` and `ε = (Σ_i ‖φ_i − P_W φ_i‖²)^{1/2}`.
pub fn sigma_eps(spec: &CollectiveSpec, w_basis: &[AmbientVector]) -> Result<(f64, f64)> {
    let mut t = CollectiveTracker::new(spec);
    for w in w_basis {
        t.add(w)?;
    }
    Ok(t.sigma_eps())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solvers::{run, Variant};
    use approx::assert_relative_eq;
    use nalgebra::{dmatrix, dvector};

    #[test]
    fn containment_gives_zero() {
        let mut s = RandomStream::new(1);
        let spec = CollectiveSpec::random(6, 2, 8, &mut s).unwrap();
        let w: Vec<AmbientVector> = spec.phi().column_iter().map(|c| c.into_owned()).collect();
        assert_eq!(sigma_eps(&spec, &w).unwrap(), (0.0, 0.0));
    }

    #[test]
    fn orthogonal_line() {
        let space = InnerProductSpace::euclidean(2).unwrap();
        let spec = CollectiveSpec::new(space, dmatrix![1.0; 0.0], vec![dvector![0.0, 1.0]]).unwrap();
        let (sig, eps) = sigma_eps(&spec, &[dvector![0.0, 1.0]]).unwrap();
        assert_relative_eq!(sig, 1.0, epsilon = 1e-14);
        assert_relative_eq!(eps, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn sigma_eps_norm_equivalence() {
        let mut s = RandomStream::new(2);
        for _ in 0..20 {
            let spec = CollectiveSpec::random(10, 3, 5, &mut s).unwrap();
            let (sig, eps) = sigma_eps(&spec, spec.dictionary()).unwrap();
            assert!(sig <= eps + 1e-14 && eps <= 3f64.sqrt() * sig + 1e-14, "{sig} {eps}");
        }
    }

    #[test]
    fn lambda_and_target_norm() {
        let mut s = RandomStream::new(3);
        let spec = CollectiveSpec::random(5, 3, 7, &mut s).unwrap();
        let c = collective_instance(spec, DiscreteMeasure::uniform(7).unwrap()).unwrap();
        assert_relative_eq!(c.instance().family().lambda(), 1.0, epsilon = 1e-12);
        assert_relative_eq!(c.instance().space().sq_norm(&c.target()), 3.0, epsilon = 1e-12);
    }

    #[test]
    fn single_component_matches_unit_dictionary() {
        let mut s = RandomStream::new(4);
        let spec = CollectiveSpec::random(4, 1, 6, &mut s).unwrap();
        let c = collective_instance(spec, DiscreteMeasure::uniform(6).unwrap()).unwrap();
        let u = c.target();
        let a = run(&c.instance().problem(u.clone()).unwrap(), c.instance().measure(), &Variant::Random, 30, &mut RandomStream::new(8), false).unwrap();
        let ci = c.component_instance();
        let b = run(&ci.problem(u).unwrap(), ci.measure(), &Variant::Random, 30, &mut RandomStream::new(8), false).unwrap();
        assert_eq!(a.chosen, b.chosen);
        for (x, y) in a.sq_errors.iter().zip(&b.sq_errors) {
            assert_relative_eq!(x, y, epsilon = 1e-13);
        }
    }

    #[test]
    fn components_stay_in_selected_span() {
        let mut s = RandomStream::new(5);
        let spec = CollectiveSpec::random(8, 2, 16, &mut s).unwrap();
        let c = collective_instance(spec, DiscreteMeasure::uniform(16).unwrap()).unwrap();
        let p = c.instance().problem(c.target()).unwrap();
        let t = run(&p, c.instance().measure(), &Variant::Random, 12, &mut RandomStream::new(6), true).unwrap();
        let its = t.iterates.as_ref().unwrap();
        let mut tracker = c.tracker();
        for m in 1..=12 {
            tracker.add(&c.spec().dictionary()[t.chosen[m - 1]]).unwrap();
            let chosen: Vec<AmbientVector> = t.chosen[..m].iter().map(|&w| c.spec().dictionary()[w].clone()).collect();
            let w = DMatrix::from_columns(&chosen);
            for comp in c.components(&its[m]) {
                let x = w.clone().svd(true, true).solve(&comp, 1e-12).unwrap();
                assert!((&w * x - &comp).norm() <= 1e-10 * comp.norm().max(1.0));
            }
            let (sig, eps) = tracker.sigma_eps();
            assert!(sig <= eps + 1e-14);
            assert!(eps <= t.sq_errors[m].sqrt() + 1e-12);
        }
    }

    #[test]
    fn rejects_non_orthonormal_phi() {
        let space = InnerProductSpace::euclidean(2).unwrap();
        assert!(CollectiveSpec::new(space, dmatrix![2.0; 0.0], vec![dvector![1.0, 0.0]]).is_err());
    }
}
