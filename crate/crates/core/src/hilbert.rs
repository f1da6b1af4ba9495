//! Finite-dimensional Hilbert space machinery.
//!
//! The ambient space `V` is `R^d` with the energy inner product
//! `a(u, v) = uᵀ G v` for an SPD Gram matrix `G`. Each correction subspace
//! `V_ω` is described by a basis matrix `B_ω` (its columns span `R_ω(V_ω)`)
//! and a local Gram matrix realizing `a_ω`. The embedding `R_ω` is
//! multiplication by `B_ω`, and the local solve `T_ω` is the adjoint of `R_ω`
//! with respect to the two inner products:
//!
//! ```text
//! a_ω(T_ω v, v_ω) = a(v, R_ω v_ω)   for all v_ω
//! ```

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use crate::error::{Error, Result};

/// Coefficients of an element of the ambient space in the computational basis.
pub type AmbientVector = DVector<f64>;

const SYMMETRY_TOL: f64 = 1e-12;
const PIVOT_TOL: f64 = 1e-12;
const RANK_TOL: f64 = 1e-10;

/// Relative size below which a local correction `R_ω T_ω e` counts as zero.
pub const ZERO_RESIDUAL_TOL: f64 = 1e-14;

fn validate_spd(mut m: DMatrix<f64>, what: &str) -> Result<(DMatrix<f64>, Cholesky<f64, Dyn>)> {
    if !m.is_square() || m.nrows() == 0 {
        return Err(Error::invalid(format!(
            "{what} must be a non-empty square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid(format!("{what} has non-finite entries")));
    }
    let scale = m.amax().max(f64::MIN_POSITIVE);
    let asym = (&m - m.transpose()).amax();
    if asym > SYMMETRY_TOL * scale {
        return Err(Error::NotPositiveDefinite(format!(
            "{what} is not symmetric (max asymmetry {asym:.3e})"
        )));
    }
    m = (&m + m.transpose()) * 0.5;

    let max_diag = m.diagonal().max();
    let chol = Cholesky::new(m.clone()).ok_or_else(|| {
        Error::NotPositiveDefinite(format!("{what} has no Cholesky factorization"))
    })?;
    let min_pivot = chol
        .l_dirty()
        .diagonal()
        .iter()
        .map(|l| l * l)
        .fold(f64::INFINITY, f64::min);
    if !(min_pivot > PIVOT_TOL * max_diag) {
        return Err(Error::NotPositiveDefinite(format!(
            "{what} has Cholesky pivot {min_pivot:.3e} below {PIVOT_TOL:e} x max diagonal {max_diag:.3e}"
        )));
    }
    Ok((m, chol))
}

/// `(V, a)` realized through an SPD Gram matrix.
#[derive(Debug, Clone)]
pub struct InnerProductSpace {
    gram: DMatrix<f64>,
    /// Lower Cholesky factor `C` with `G = C Cᵀ`.
    factor: DMatrix<f64>,
    euclidean: bool,
}

impl InnerProductSpace {
    pub fn new(gram: DMatrix<f64>) -> Result<Self> {
        let (gram, chol) = validate_spd(gram, "Gram matrix")?;
        let euclidean = gram == DMatrix::identity(gram.nrows(), gram.ncols());
        Ok(Self {
            factor: chol.unpack(),
            gram,
            euclidean,
        })
    }

    /// `R^d` with the standard dot product.
    pub fn euclidean(dim: usize) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dimension must be positive"));
        }
        Ok(Self {
            gram: DMatrix::identity(dim, dim),
            factor: DMatrix::identity(dim, dim),
            euclidean: true,
        })
    }

    pub fn dim(&self) -> usize {
        self.gram.nrows()
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }

    pub fn is_euclidean(&self) -> bool {
        self.euclidean
    }

    pub fn check(&self, v: &AmbientVector) -> Result<()> {
        if v.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: v.len(),
            });
        }
        Ok(())
    }

    /// `G v`, the Riesz representer of `a(v, ·)` in coefficient space.
    pub fn apply_gram(&self, v: &AmbientVector) -> AmbientVector {
        if self.euclidean {
            v.clone()
        } else {
            &self.gram * v
        }
    }

    /// `a(u, v)`.
    pub fn inner(&self, u: &AmbientVector, v: &AmbientVector) -> Result<f64> {
        self.check(u)?;
        self.check(v)?;
        Ok(self.inner_unchecked(u, v))
    }

    pub(crate) fn inner_unchecked(&self, u: &AmbientVector, v: &AmbientVector) -> f64 {
        if self.euclidean {
            u.dot(v)
        } else {
            u.dot(&(&self.gram * v))
        }
    }

    pub fn sq_norm(&self, v: &AmbientVector) -> f64 {
        debug_assert_eq!(v.len(), self.dim());
        self.inner_unchecked(v, v).max(0.0)
    }

    pub fn norm(&self, v: &AmbientVector) -> f64 {
        self.sq_norm(v).sqrt()
    }

    /// Coordinates of `v` in an `a`-orthonormal basis (`Cᵀ v`).
    pub fn to_orthonormal(&self, v: &AmbientVector) -> AmbientVector {
        if self.euclidean {
            v.clone()
        } else {
            self.factor.tr_mul(v)
        }
    }

    /// Inverse of [`Self::to_orthonormal`] (`C⁻ᵀ w`).
    pub fn from_orthonormal(&self, w: &AmbientVector) -> AmbientVector {
        if self.euclidean {
            return w.clone();
        }
        self.factor
            .tr_solve_lower_triangular(w)
            .expect("Cholesky factor has a nonzero diagonal")
    }

    /// `Cᵀ M` applied column-wise.
    pub(crate) fn to_orthonormal_mat(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        if self.euclidean {
            m.clone()
        } else {
            self.factor.tr_mul(m)
        }
    }

    /// `C⁻¹ M`.
    pub(crate) fn lower_solve_mat(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        if self.euclidean {
            return m.clone();
        }
        self.factor
            .solve_lower_triangular(m)
            .expect("Cholesky factor has a nonzero diagonal")
    }

    pub(crate) fn from_orthonormal_mat(&self, m: &DMatrix<f64>) -> DMatrix<f64> {
        if self.euclidean {
            return m.clone();
        }
        self.factor
            .tr_solve_lower_triangular(m)
            .expect("Cholesky factor has a nonzero diagonal")
    }
}

/// One correction space `V_ω` together with `R_ω` and `a_ω`.
#[derive(Debug, Clone)]
pub struct LocalSubspace {
    basis: DMatrix<f64>,
    local_gram: DMatrix<f64>,
    local_chol: Cholesky<f64, Dyn>,
}

impl LocalSubspace {
    pub fn new(basis: DMatrix<f64>, local_gram: DMatrix<f64>) -> Result<Self> {
        let k = basis.ncols();
        if k == 0 || basis.nrows() == 0 {
            return Err(Error::invalid("local subspace needs at least one basis column"));
        }
        if local_gram.nrows() != k {
            return Err(Error::DimensionMismatch {
                expected: k,
                found: local_gram.nrows(),
            });
        }
        let sv = basis.clone().singular_values();
        let (smax, smin) = (sv.max(), sv.min());
        if !(smax > 0.0) || smin <= RANK_TOL * smax {
            return Err(Error::invalid(format!(
                "basis is rank deficient (singular values {smin:.3e} .. {smax:.3e})"
            )));
        }
        let (local_gram, local_chol) = validate_spd(local_gram, "local Gram matrix")?;
        Ok(Self {
            basis,
            local_gram,
            local_chol,
        })
    }

    /// Span of `basis` with `a_ω` the restriction of `a`, so that `R_ω` is the natural injection.
    pub fn restricted(space: &InnerProductSpace, basis: DMatrix<f64>) -> Result<Self> {
        if basis.nrows() != space.dim() {
            return Err(Error::DimensionMismatch {
                expected: space.dim(),
                found: basis.nrows(),
            });
        }
        let local_gram = if space.is_euclidean() {
            basis.tr_mul(&basis)
        } else {
            basis.tr_mul(&(space.gram() * &basis))
        };
        Self::new(basis, local_gram)
    }

    /// One-dimensional span of `atom`.
    pub fn span_of(space: &InnerProductSpace, atom: &AmbientVector) -> Result<Self> {
        Self::restricted(space, DMatrix::from_column_slice(atom.len(), 1, atom.as_slice()))
    }

    pub fn dim(&self) -> usize {
        self.basis.ncols()
    }

    pub fn basis(&self) -> &DMatrix<f64> {
        &self.basis
    }

    pub fn local_gram(&self) -> &DMatrix<f64> {
        &self.local_gram
    }

    /// `‖v_ω‖_ω`.
    pub fn local_norm(&self, v_local: &DVector<f64>) -> f64 {
        v_local.dot(&(&self.local_gram * v_local)).max(0.0).sqrt()
    }

    fn solve(&self, rhs: &DVector<f64>) -> DVector<f64> {
        self.local_chol.solve(rhs)
    }
}

/// The indexed family `{V_ω, a_ω, R_ω}` over a finite index set `0..len`.
#[derive(Debug, Clone)]
pub struct SubspaceFamily {
    space: InnerProductSpace,
    subspaces: Vec<LocalSubspace>,
    /// `B_ωᵀ G`, so that the right-hand side of the local problem is one product.
    adjoints: Vec<DMatrix<f64>>,
    lambda: f64,
}

impl SubspaceFamily {
    pub fn new(space: InnerProductSpace, subspaces: Vec<LocalSubspace>) -> Result<Self> {
        if subspaces.is_empty() {
            return Err(Error::invalid("subspace family is empty"));
        }
        for s in &subspaces {
            if s.basis.nrows() != space.dim() {
                return Err(Error::DimensionMismatch {
                    expected: space.dim(),
                    found: s.basis.nrows(),
                });
            }
        }
        let adjoints = subspaces
            .iter()
            .map(|s| {
                if space.is_euclidean() {
                    s.basis.transpose()
                } else {
                    s.basis.tr_mul(space.gram())
                }
            })
            .collect();
        let mut family = Self {
            space,
            subspaces,
            adjoints,
            lambda: 0.0,
        };
        family.lambda = family.lambda_bound();
        Ok(family)
    }

    pub fn space(&self) -> &InnerProductSpace {
        &self.space
    }

    pub fn len(&self) -> usize {
        self.subspaces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.subspaces.is_empty()
    }

    pub fn subspace(&self, omega: usize) -> Result<&LocalSubspace> {
        self.subspaces.get(omega).ok_or(Error::UnknownIndex(omega))
    }

    pub fn subspaces(&self) -> &[LocalSubspace] {
        &self.subspaces
    }

    /// Cached value of [`Self::lambda_bound`].
    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    /// `R_ω v_local = B_ω v_local`.
    pub fn apply_r(&self, omega: usize, v_local: &DVector<f64>) -> Result<AmbientVector> {
        let sub = self.subspace(omega)?;
        if v_local.len() != sub.dim() {
            return Err(Error::DimensionMismatch {
                expected: sub.dim(),
                found: v_local.len(),
            });
        }
        Ok(&sub.basis * v_local)
    }

    /// `T_ω v`: solves `A_ω t = B_ωᵀ G v`.
    pub fn apply_t(&self, omega: usize, v: &AmbientVector) -> Result<DVector<f64>> {
        self.subspace(omega)?;
        self.space.check(v)?;
        Ok(self.apply_t_unchecked(omega, v))
    }

    pub(crate) fn apply_t_unchecked(&self, omega: usize, v: &AmbientVector) -> DVector<f64> {
        self.subspaces[omega].solve(&(&self.adjoints[omega] * v))
    }

    /// Local solve from an already assembled right-hand side `a(·, R_ω e_i)`.
    pub(crate) fn solve_local(&self, omega: usize, rhs: &DVector<f64>) -> DVector<f64> {
        self.subspaces[omega].solve(rhs)
    }

    /// `B_ωᵀ G v`, i.e. the functionals `a(v, R_ω e_i)` for the local basis.
    pub(crate) fn local_rhs(&self, omega: usize, v: &AmbientVector) -> DVector<f64> {
        &self.adjoints[omega] * v
    }

    /// `G R_ω t`, computed through the stored adjoint.
    pub(crate) fn gram_of_correction(&self, omega: usize, t: &DVector<f64>) -> AmbientVector {
        self.adjoints[omega].tr_mul(t)
    }

    pub(crate) fn apply_r_unchecked(&self, omega: usize, t: &DVector<f64>) -> AmbientVector {
        &self.subspaces[omega].basis * t
    }

    /// `max_ω ‖R_ω‖_{V_ω → V}`, the largest generalized singular value over the family.
    pub fn lambda_bound(&self) -> f64 {
        self.subspaces
            .iter()
            .zip(&self.adjoints)
            .map(|(sub, adj)| {
                // A_ω^{-1/2} (B_ωᵀ G B_ω) A_ω^{-1/2} in Cholesky form.
                let s = adj * &sub.basis;
                let l = sub.local_chol.l();
                let x = l
                    .solve_lower_triangular(&s)
                    .expect("local Cholesky factor is nonsingular");
                let m = l
                    .solve_lower_triangular(&x.transpose())
                    .expect("local Cholesky factor is nonsingular");
                let m = (&m + m.transpose()) * 0.5;
                SymmetricEigen::new(m).eigenvalues.max().max(0.0).sqrt()
            })
            .fold(0.0, f64::max)
    }

    /// Normalized local correction direction `R_ω T_ω e / ‖R_ω T_ω e‖`, or zero when the
    /// correction vanishes relative to `‖e‖`.
    pub fn psi_tilde(&self, omega: usize, e: &AmbientVector) -> Result<AmbientVector> {
        self.subspace(omega)?;
        self.space.check(e)?;
        let dir = self.apply_r_unchecked(omega, &self.apply_t_unchecked(omega, e));
        let n = self.space.norm(&dir);
        if n > ZERO_RESIDUAL_TOL * self.space.norm(e) {
            Ok(dir / n)
        } else {
            Ok(AmbientVector::zeros(e.len()))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use nalgebra::dmatrix;
    use nalgebra::dvector;

    fn e(d: usize, i: usize) -> AmbientVector {
        let mut v = AmbientVector::zeros(d);
        v[i] = 1.0;
        v
    }

    fn coordinate_family(d: usize) -> SubspaceFamily {
        let space = InnerProductSpace::euclidean(d).unwrap();
        let subs = (0..d)
            .map(|i| LocalSubspace::span_of(&space, &e(d, i)).unwrap())
            .collect();
        SubspaceFamily::new(space, subs).unwrap()
    }

    #[test]
    fn inner_examples() {
        let id = InnerProductSpace::euclidean(2).unwrap();
        assert_eq!(id.inner(&dvector![1.0, 0.0], &dvector![0.0, 1.0]).unwrap(), 0.0);
        assert_eq!(id.inner(&dvector![3.0, 4.0], &dvector![3.0, 4.0]).unwrap(), 25.0);
        let g = InnerProductSpace::new(dmatrix![2.0, 1.0; 1.0, 2.0]).unwrap();
        assert_eq!(g.inner(&dvector![1.0, 0.0], &dvector![0.0, 1.0]).unwrap(), 1.0);
        assert!(!g.is_euclidean());
    }

    #[test]
    fn inner_rejects_mismatch() {
        let id = InnerProductSpace::euclidean(2).unwrap();
        let err = id.inner(&dvector![1.0], &dvector![0.0, 1.0]).unwrap_err();
        assert_eq!(err, Error::DimensionMismatch { expected: 2, found: 1 });
    }

    #[test]
    fn gram_validation() {
        assert!(matches!(
            InnerProductSpace::new(dmatrix![1.0, 2.0; 2.0, 1.0]),
            Err(Error::NotPositiveDefinite(_))
        ));
        assert!(matches!(
            InnerProductSpace::new(dmatrix![1.0, 0.5; 0.0, 1.0]),
            Err(Error::NotPositiveDefinite(_))
        ));
        assert!(InnerProductSpace::new(dmatrix![1.0, 0.0; 0.0, 1e-14]).is_err());
        // Identity given explicitly is recognized.
        assert!(InnerProductSpace::new(DMatrix::identity(3, 3)).unwrap().is_euclidean());
    }

    #[test]
    fn orthonormal_coordinates_round_trip() {
        let g = InnerProductSpace::new(dmatrix![4.0, 1.0, 0.0; 1.0, 3.0, 0.5; 0.0, 0.5, 2.0]).unwrap();
        let v = dvector![0.3, -1.0, 2.0];
        let w = g.to_orthonormal(&v);
        assert_relative_eq!(w.norm_squared(), g.sq_norm(&v), epsilon = 1e-12);
        assert_relative_eq!(g.from_orthonormal(&w), v, epsilon = 1e-12);
    }

    #[test]
    fn apply_r_examples() {
        let fam = coordinate_family(3);
        assert_eq!(fam.apply_r(0, &dvector![2.5]).unwrap(), dvector![2.5, 0.0, 0.0]);
        assert_eq!(fam.apply_r(1, &dvector![0.0]).unwrap(), AmbientVector::zeros(3));

        let space = InnerProductSpace::euclidean(3).unwrap();
        let basis = DMatrix::from_columns(&[e(3, 0), e(3, 1)]);
        let sub = LocalSubspace::restricted(&space, basis).unwrap();
        let fam = SubspaceFamily::new(space, vec![sub]).unwrap();
        assert_eq!(fam.apply_r(0, &dvector![1.0, 2.0]).unwrap(), dvector![1.0, 2.0, 0.0]);
        assert_eq!(fam.apply_r(5, &dvector![1.0]).unwrap_err(), Error::UnknownIndex(5));
    }

    #[test]
    fn apply_t_examples() {
        let fam = coordinate_family(2);
        assert_eq!(fam.apply_t(0, &dvector![5.0, 3.0]).unwrap(), dvector![5.0]);
        assert_eq!(fam.apply_t(1, &dvector![0.0, 0.0]).unwrap(), dvector![0.0]);
    }

    #[test]
    fn lambda_examples() {
        assert_relative_eq!(coordinate_family(4).lambda(), 1.0, epsilon = 1e-14);

        let space = InnerProductSpace::euclidean(2).unwrap();
        let scaled = LocalSubspace::new(dmatrix![2.0; 0.0], dmatrix![1.0]).unwrap();
        let fam = SubspaceFamily::new(space.clone(), vec![scaled]).unwrap();
        assert_relative_eq!(fam.lambda_bound(), 2.0, epsilon = 1e-14);

        let diag = LocalSubspace::new(dmatrix![1.0; 1.0], dmatrix![1.0]).unwrap();
        let fam = SubspaceFamily::new(space, vec![diag]).unwrap();
        assert_relative_eq!(fam.lambda_bound(), 2f64.sqrt(), epsilon = 1e-14);
    }

    #[test]
    fn rank_deficient_basis_rejected() {
        let space = InnerProductSpace::euclidean(3).unwrap();
        let basis = dmatrix![1.0, 2.0; 1.0, 2.0; 0.0, 0.0];
        assert!(LocalSubspace::restricted(&space, basis).is_err());
        assert!(LocalSubspace::span_of(&space, &AmbientVector::zeros(3)).is_err());
        assert!(SubspaceFamily::new(space, vec![]).is_err());
    }

    #[test]
    fn psi_tilde_examples() {
        let fam = coordinate_family(2);
        assert_eq!(fam.psi_tilde(0, &dvector![0.0, 7.0]).unwrap(), dvector![0.0, 0.0]);
        assert_eq!(fam.psi_tilde(0, &dvector![3.0, 4.0]).unwrap(), dvector![1.0, 0.0]);
        assert_eq!(fam.psi_tilde(0, &dvector![-3.0, 4.0]).unwrap(), dvector![-1.0, 0.0]);
    }
}
