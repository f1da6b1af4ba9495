//! Covariance operators, their spectra, and the smoothness-class norms that enter
//! the convergence bounds.
//!
//! For a measure `ρ` on unit atoms `ω̂` the covariance operator is
//! `L v = Σ_ω ρ_ω a(v, ω̂) ω̂`. With eigenpairs `(μ_k, ψ_k)` of `L` the scale
//! `H^s_L` is normed by `‖u‖²_{H^s} = Σ_k μ_k^{-2s} a(u, ψ_k)²`, and the class
//! `A_2` of `ρ`-expectations coincides with `H^{1/2}_L`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hilbert::{AmbientVector, InnerProductSpace, SubspaceFamily};
use crate::measures::{DiscreteMeasure, RandomStream};

const UNIT_TOL: f64 = 1e-10;
const EIGEN_DROP_TOL: f64 = 1e-12;
const KERNEL_TOL: f64 = 1e-10;
const RANGE_TOL: f64 = 1e-10;
const CONDITION_WARN: f64 = 1e-10;

/// Matrix of `L v = Σ_ω ρ_ω a(v, ω̂) ω̂` acting on coefficient vectors.
///
/// The result is `a`-self-adjoint and positive semi-definite with `a`-trace one.
pub fn covariance_operator(
    space: &InnerProductSpace,
    atoms: &[AmbientVector],
    measure: &DiscreteMeasure,
) -> Result<DMatrix<f64>> {
    if atoms.len() != measure.len() {
        return Err(Error::invalid(format!(
            "{} atoms but the measure has {} weights",
            atoms.len(),
            measure.len()
        )));
    }
    let d = space.dim();
    let mut outer = DMatrix::zeros(d, d);
    for (i, atom) in atoms.iter().enumerate() {
        space.check(atom)?;
        let n = space.norm(atom);
        if (n - 1.0).abs() > UNIT_TOL {
            return Err(Error::invalid(format!("atom {i} has norm {n}, expected 1")));
        }
        outer.ger(measure.weight(i), atom, atom, 1.0);
    }
    Ok(if space.is_euclidean() {
        outer
    } else {
        outer * space.gram()
    })
}

/// Eigenpairs of an `a`-self-adjoint PSD operator, in descending order.
#[derive(Debug, Clone)]
pub struct SpectralDecomposition {
    /// All eigenvalues, descending, with negative round-off clamped to zero.
    eigenvalues: Vec<f64>,
    /// `a`-orthonormal eigenvectors as columns, matching `eigenvalues`.
    eigenvectors: DMatrix<f64>,
    /// `G ψ_k`, so that `a(u, ψ_k)` is a dot product.
    gram_eigenvectors: DMatrix<f64>,
    rank: usize,
}

impl SpectralDecomposition {
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Retained eigenvalues `μ_1 ≥ … ≥ μ_rank > 0`.
    pub fn retained(&self) -> &[f64] {
        &self.eigenvalues[..self.rank]
    }

    pub fn eigenvectors(&self) -> &DMatrix<f64> {
        &self.eigenvectors
    }

    pub fn eigenvector(&self, k: usize) -> AmbientVector {
        self.eigenvectors.column(k).into_owned()
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn dim(&self) -> usize {
        self.eigenvalues.len()
    }

    /// `a(u, ψ_k)` for every `k`.
    pub fn coefficients(&self, u: &AmbientVector) -> DVector<f64> {
        self.gram_eigenvectors.tr_mul(u)
    }

    /// Component of `u` in `Ker(L)`, measured in the energy norm.
    pub fn kernel_norm(&self, u: &AmbientVector) -> f64 {
        let c = self.coefficients(u);
        c.rows_range(self.rank..).norm()
    }
}

/// Eigen-decomposition of `l` in the `a`-inner product; eigenvalues below
/// `1e-12 μ_max` are assigned to `Ker(L)`.
pub fn spectral_decomp(l: &DMatrix<f64>, space: &InnerProductSpace) -> Result<SpectralDecomposition> {
    let d = space.dim();
    if l.nrows() != d || l.ncols() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: l.nrows(),
        });
    }
    // In a-orthonormal coordinates w = Cᵀ v the operator is Cᵀ L C⁻ᵀ, symmetric.
    let sym = {
        let left = space.to_orthonormal_mat(l);
        let s = space.lower_solve_mat(&left.transpose()).transpose();
        (&s + s.transpose()) * 0.5
    };
    let eig = SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
    let ortho = DMatrix::from_fn(d, d, |r, c| eig.eigenvectors[(r, order[c])]);
    let eigenvectors = space.from_orthonormal_mat(&ortho);
    let gram_eigenvectors = if space.is_euclidean() {
        eigenvectors.clone()
    } else {
        space.gram() * &eigenvectors
    };
    let mu_max = eigenvalues.first().copied().unwrap_or(0.0);
    let rank = eigenvalues
        .iter()
        .take_while(|&&mu| mu > 0.0 && mu >= EIGEN_DROP_TOL * mu_max)
        .count();
    Ok(SpectralDecomposition {
        eigenvalues,
        eigenvectors,
        gram_eigenvectors,
        rank,
    })
}

/// `‖u‖_{H^s_L} = (Σ_k μ_k^{-2s} a(u, ψ_k)²)^{1/2}`.
pub fn hs_norm(u: &AmbientVector, s: f64, decomp: &SpectralDecomposition) -> Result<f64> {
    if u.len() != decomp.dim() {
        return Err(Error::DimensionMismatch {
            expected: decomp.dim(),
            found: u.len(),
        });
    }
    let c = decomp.coefficients(u);
    let total = c.norm();
    let off = c.rows_range(decomp.rank..).norm();
    if off > KERNEL_TOL * total {
        return Err(Error::NotInClass {
            class: "H^s_L",
            residual: off,
        });
    }
    let sq: f64 = decomp
        .retained()
        .iter()
        .zip(c.iter())
        .map(|(mu, ck)| mu.powf(-2.0 * s) * ck * ck)
        .sum();
    Ok(sq.sqrt())
}

/// `u = Σ_k μ_k^s c_k ψ_k` over the retained eigenpairs; `coeffs` may be shorter than the rank.
pub fn make_hs_element(decomp: &SpectralDecomposition, s: f64, coeffs: &[f64]) -> Result<AmbientVector> {
    if !(s >= 0.0) {
        return Err(Error::invalid(format!("smoothness s must be >= 0, got {s}")));
    }
    if coeffs.len() > decomp.rank {
        return Err(Error::invalid(format!(
            "{} coefficients but only {} retained eigenpairs",
            coeffs.len(),
            decomp.rank
        )));
    }
    let mut u = AmbientVector::zeros(decomp.dim());
    for (k, (c, mu)) in coeffs.iter().zip(decomp.retained()).enumerate() {
        u.axpy(mu.powf(s) * c, &decomp.eigenvectors.column(k), 1.0);
    }
    Ok(u)
}

/// [`make_hs_element`] with Gaussian coefficients rescaled so that `‖u‖_{H^s_L} = norm`.
pub fn random_hs_element(
    decomp: &SpectralDecomposition,
    s: f64,
    norm: f64,
    stream: &mut RandomStream,
) -> Result<AmbientVector> {
    let mut c: Vec<f64> = (0..decomp.rank).map(|_| stream.standard_normal()).collect();
    let n = c.iter().map(|x| x * x).sum::<f64>().sqrt();
    c.iter_mut().for_each(|x| *x *= norm / n);
    make_hs_element(decomp, s, &c)
}

/// `‖u‖_{A_2}`: the least `(Σ_ω ρ_ω ‖v_ω‖²_ω)^{1/2}` over representations
/// `u = Σ_ω ρ_ω R_ω v_ω`, computed as a weighted least-norm solution.
///
/// In `a`-orthonormal ambient coordinates and `a_ω`-orthonormal local coordinates the
/// constraint reads `Σ_ω √ρ_ω M_ω z_ω = û` with `z_ω = √ρ_ω v̂_ω`, so the norm is
/// `‖A⁺ û‖` for the stacked matrix `A = [√ρ_ω M_ω]`.
pub fn a2_norm(family: &SubspaceFamily, measure: &DiscreteMeasure, u: &AmbientVector) -> Result<f64> {
    if measure.len() != family.len() {
        return Err(Error::invalid("measure and family sizes differ"));
    }
    let z = least_norm_local(family, measure.weights(), u)?;
    Ok(z.iter().map(|zi| zi.norm_squared()).sum::<f64>().sqrt())
}

/// The representation `u = Σ_ω R_ω v_ω` of least `Σ_ω ‖v_ω‖²_ω`, one entry per subspace.
/// Its `Σ_ω ‖v_ω‖_ω` is an admissible input to [`a1_upper`].
pub fn least_norm_representation(family: &SubspaceFamily, u: &AmbientVector) -> Result<Vec<(usize, DVector<f64>)>> {
    let ones = vec![1.0; family.len()];
    let z = least_norm_local(family, &ones, u)?;
    Ok(z
        .into_iter()
        .enumerate()
        .map(|(i, zi)| {
            let l = local_factor(family, i);
            let v = l.transpose().solve_upper_triangular(&zi).expect("nonsingular local factor");
            (i, v)
        })
        .collect())
}

fn local_factor(family: &SubspaceFamily, i: usize) -> DMatrix<f64> {
    family.subspaces()[i]
        .local_gram()
        .clone()
        .cholesky()
        .expect("local Gram was validated SPD")
        .unpack()
}

/// Least-norm `z` with `Σ_ω √w_ω M_ω z_ω = û`, split per subspace, where `z_ω` are
/// `a_ω`-orthonormal local coordinates.
fn least_norm_local(family: &SubspaceFamily, weights: &[f64], u: &AmbientVector) -> Result<Vec<DVector<f64>>> {
    let space = family.space();
    space.check(u)?;
    let d = space.dim();
    let dims: Vec<usize> = family.subspaces().iter().map(|s| s.dim()).collect();
    let cols: usize = dims.iter().sum();
    let split = |z: &DVector<f64>| {
        let mut out = Vec::with_capacity(dims.len());
        let mut offset = 0;
        for &k in &dims {
            out.push(z.rows(offset, k).into_owned());
            offset += k;
        }
        out
    };
    let mut stacked = DMatrix::zeros(d, cols);
    let mut offset = 0;
    for (i, sub) in family.subspaces().iter().enumerate() {
        // M_ω = Cᵀ B_ω L_ω^{-T}, with L_ω the local Cholesky factor.
        let local_l = local_factor(family, i);
        let b = space.to_orthonormal_mat(sub.basis());
        let m = local_l
            .solve_lower_triangular(&b.transpose())
            .expect("nonsingular local factor")
            .transpose();
        stacked
            .columns_mut(offset, sub.dim())
            .copy_from(&(m * weights[i].sqrt()));
        offset += sub.dim();
    }
    let target = space.to_orthonormal(u);
    let unorm = target.norm();
    if unorm == 0.0 {
        return Ok(split(&DVector::zeros(cols)));
    }
    let svd = stacked.svd(true, true);
    let smax = svd.singular_values.max();
    let cutoff = EIGEN_DROP_TOL.sqrt() * smax;
    let kept: Vec<f64> = svd.singular_values.iter().copied().filter(|&s| s > cutoff).collect();
    if let Some(smin) = kept.iter().copied().reduce(f64::min) {
        if (smin / smax).powi(2) < CONDITION_WARN {
            log::warn!(
                "least-norm problem is ill-conditioned: sigma_min^2/sigma_max^2 = {:.3e}",
                (smin / smax).powi(2)
            );
        }
    }
    let u_mat = svd.u.as_ref().expect("requested U");
    let v_t = svd.v_t.as_ref().expect("requested V^T");
    let proj = u_mat.tr_mul(&target);
    let mut z = DVector::zeros(cols);
    let mut captured = DVector::zeros(d);
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s > cutoff {
            z.axpy(proj[k] / s, &v_t.row(k).transpose(), 1.0);
            captured.axpy(proj[k], &u_mat.column(k), 1.0);
        }
    }
    let residual = (&target - captured).norm();
    if residual > RANGE_TOL * unorm {
        return Err(Error::NotInClass {
            class: "A_2",
            residual,
        });
    }
    Ok(split(&z))
}

/// Exponent of the `ℓ_q` norm in the `A_q^γ` classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Exponent {
    One,
    Two,
    Infinity,
}

/// Weight sequence `γ` of the `A_q^γ` classes.
#[derive(Debug, Clone, PartialEq)]
pub enum Gamma {
    Ones,
    Rho,
    SqrtRho,
    Custom(Vec<f64>),
}

/// Whether the family consists of `dim` one-dimensional spans of an `a`-orthonormal basis
/// with `a_ω` the restriction of `a`.
pub fn is_orthonormal_family(family: &SubspaceFamily) -> bool {
    let space = family.space();
    if family.len() != space.dim() || family.subspaces().iter().any(|s| s.dim() != 1) {
        return false;
    }
    let cols: Vec<AmbientVector> = family
        .subspaces()
        .iter()
        .map(|s| s.basis().column(0).into_owned())
        .collect();
    for (i, ci) in cols.iter().enumerate() {
        let lg = family.subspaces()[i].local_gram()[(0, 0)];
        if (lg - space.sq_norm(ci)).abs() > UNIT_TOL * lg.max(1.0) {
            return false;
        }
        for (j, cj) in cols.iter().enumerate() {
            let g = space.inner_unchecked(ci, cj);
            let target = if i == j { 1.0 } else { 0.0 };
            if (g - target).abs() > UNIT_TOL {
                return false;
            }
        }
    }
    true
}

/// `‖{γ_i^{-1} |c_i|}‖_{ℓ_q}` with `c_i = a(u, e_i)`, for orthonormal families where the
/// representation is unique.
pub fn aq_gamma_norms_orthonormal(
    family: &SubspaceFamily,
    measure: &DiscreteMeasure,
    u: &AmbientVector,
    q: Exponent,
    gamma: &Gamma,
) -> Result<f64> {
    if !is_orthonormal_family(family) {
        return Err(Error::Unsupported(
            "explicit A_q^gamma norms need an orthonormal family".into(),
        ));
    }
    if measure.len() != family.len() {
        return Err(Error::invalid("measure and family sizes differ"));
    }
    family.space().check(u)?;
    let n = family.len();
    let g: Vec<f64> = match gamma {
        Gamma::Ones => vec![1.0; n],
        Gamma::Rho => measure.weights().to_vec(),
        Gamma::SqrtRho => measure.weights().iter().map(|w| w.sqrt()).collect(),
        Gamma::Custom(v) => {
            if v.len() != n || v.iter().any(|x| !(*x > 0.0)) {
                return Err(Error::invalid("custom gamma needs one positive weight per atom"));
            }
            v.clone()
        }
    };
    let space = family.space();
    let scaled = family.subspaces().iter().zip(&g).map(|(sub, gi)| {
        let c = space.inner_unchecked(u, &sub.basis().column(0).into_owned());
        c.abs() / gi
    });
    Ok(match q {
        Exponent::One => scaled.sum(),
        Exponent::Two => scaled.map(|x| x * x).sum::<f64>().sqrt(),
        Exponent::Infinity => scaled.fold(0.0, f64::max),
    })
}

/// `Σ_j ‖v_j‖_{ω_j}` for a representation `u = Σ_j R_{ω_j} v_j`, an upper bound on `‖u‖_{A_1}`.
pub fn a1_upper(
    family: &SubspaceFamily,
    representation: &[(usize, DVector<f64>)],
    u: &AmbientVector,
) -> Result<f64> {
    let space = family.space();
    space.check(u)?;
    let mut sum = AmbientVector::zeros(space.dim());
    let mut total = 0.0;
    for (omega, v) in representation {
        sum += family.apply_r(*omega, v)?;
        total += family.subspace(*omega)?.local_norm(v);
    }
    let mismatch = space.norm(&(&sum - u));
    if mismatch > RANGE_TOL * space.norm(u).max(1.0) {
        return Err(Error::invalid(format!(
            "representation misses u by {mismatch:.3e}"
        )));
    }
    Ok(total)
}

/// One `‖u‖_{H^s_L}` entry of a [`SmoothnessClassReport`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HsNorm {
    pub s: f64,
    pub norm: f64,
}

/// Class norms of one element; entries are absent where undefined or not computed.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SmoothnessClassReport {
    pub a2_norm: Option<f64>,
    pub a1_upper: Option<f64>,
    pub ainf_rho_norm: Option<f64>,
    pub hs_norms: Vec<HsNorm>,
}

impl SmoothnessClassReport {
    pub fn hs(&self, s: f64) -> Option<f64> {
        self.hs_norms.iter().find(|h| h.s == s).map(|h| h.norm)
    }
}
