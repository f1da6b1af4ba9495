use super::bounds::{BoundInputs, SpectralProfile};
use crate::error::{Error, Result};
use crate::hilbert::AmbientVector;
use crate::instances::{CollectiveInstance, Instance};
use crate::spectral::{
    a1_upper, a2_norm, aq_gamma_norms_orthonormal, hs_norm, least_norm_representation, Exponent, Gamma, HsNorm,
    SmoothnessClassReport, SpectralDecomposition,
};

/// Class norms of `u`. Entries are absent where `u` is outside the class or the instance
/// has no covariance operator.
pub fn class_norms(instance: &Instance, u: &AmbientVector, s_list: &[f64]) -> Result<SmoothnessClassReport> {
    let family = instance.family();
    let measure = instance.measure();
    let a2 = not_in_class_to_none(a2_norm(family, measure, u))?;
    let (a1, ainf) = if instance.is_orthonormal() {
        (
            Some(aq_gamma_norms_orthonormal(family, measure, u, Exponent::One, &Gamma::Ones)?),
            Some(aq_gamma_norms_orthonormal(family, measure, u, Exponent::Infinity, &Gamma::Rho)?),
        )
    } else {
        let rep = not_in_class_to_none(least_norm_representation(family, u))?;
        (rep.map(|r| a1_upper(family, &r, u)).transpose()?, None)
    };
    let mut hs_norms = Vec::new();
    if instance.atoms().is_some() && !s_list.is_empty() {
        let dec = instance.decomposition()?;
        for &s in s_list {
            if let Some(norm) = not_in_class_to_none(hs_norm(u, s, &dec))? {
                hs_norms.push(HsNorm { s, norm });
            }
        }
    }
    Ok(SmoothnessClassReport {
        a2_norm: a2,
        a1_upper: a1,
        ainf_rho_norm: ainf,
        hs_norms,
    })
}

fn not_in_class_to_none<T>(r: Result<T>) -> Result<Option<T>> {
    match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::NotInClass { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Bound inputs for a target on a unit-atom or general instance.
pub fn bound_inputs(
    instance: &Instance,
    u: &AmbientVector,
    norms: &SmoothnessClassReport,
    decomp: Option<&SpectralDecomposition>,
    interpolation_s: Option<f64>,
) -> BoundInputs {
    let h_half = norms.hs(0.5);
    let hs = interpolation_s.and_then(|s| norms.hs(s).map(|n| (s, n)));
    BoundInputs {
        lambda: instance.family().lambda(),
        u_norm: instance.space().norm(u),
        a2: norms.a2_norm,
        h_half,
        a1: norms.a1_upper,
        beta: None,
        hs,
        profile: decomp.map(|d| SpectralProfile::new(d, std::slice::from_ref(u))),
        collective: false,
    }
}

/// Bound inputs for the stacked target `Φ` of a collective instance.
pub fn collective_bound_inputs(c: &CollectiveInstance, decomp: &SpectralDecomposition) -> Result<BoundInputs> {
    let phi: Vec<AmbientVector> = c.spec().phi().column_iter().map(|col| col.into_owned()).collect();
    let a2_sq = c.phi_a2_sq(decomp)?;
    Ok(BoundInputs {
        lambda: c.instance().family().lambda(),
        u_norm: c.instance().space().norm(&c.target()),
        a2: None,
        h_half: Some(a2_sq.sqrt()),
        a1: None,
        beta: None,
        hs: None,
        profile: Some(SpectralProfile::new(decomp, &phi)),
        collective: true,
    })
}
