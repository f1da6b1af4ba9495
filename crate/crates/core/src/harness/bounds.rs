use serde::{Deserialize, Serialize};

use super::expectation::ExpectationCurve;
use crate::error::{Error, Result};
use crate::hilbert::AmbientVector;
use crate::instances::Instance;
use crate::solvers::Variant;
use crate::spectral::SpectralDecomposition;

/// `(2(1+√2))²`, the constant of the interpolation-space rate bound.
pub const ECVR_CONSTANT: f64 = (2.0 * (1.0 + std::f64::consts::SQRT_2)) * (2.0 * (1.0 + std::f64::consts::SQRT_2));

/// Slack, in standard errors, before a Monte Carlo mean counts as above a bound.
pub const SIGMA_RULE: f64 = 3.0;

/// Relative slack absorbing roundoff when both sides are exact.
const ROUNDOFF: f64 = 1e-12;

pub const EC2: &str = "ec2";
pub const ECV: &str = "ecv";
pub const EC2A: &str = "ec2a";
pub const ECVA: &str = "ecva";
pub const CG1: &str = "cg1";
pub const EC2B: &str = "ec2b";
pub const ECVB: &str = "ecvb";
pub const ECVR: &str = "ecvr";

/// Spectral coefficients `a(u, ψ_k)²` of the target (summed over components for stacked
/// targets), used to build the truncation `h = Σ_{μ_k ≥ (m+1)^{-1}} a(u, ψ_k) ψ_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralProfile {
    mu: Vec<f64>,
    sq_coeffs: Vec<f64>,
    kernel_sq: f64,
}

/// Norms entering the truncation bounds for one `m`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Truncation {
    /// `‖h‖²_{H^{1/2}_L}`.
    pub h_half_sq: f64,
    /// `‖h‖²`.
    pub h_sq: f64,
    /// `‖u − h‖²`.
    pub rest_sq: f64,
}

impl SpectralProfile {
    pub fn new(decomp: &SpectralDecomposition, components: &[AmbientVector]) -> Self {
        let rank = decomp.rank();
        let mut sq_coeffs = vec![0.0; rank];
        let mut kernel_sq = 0.0;
        for u in components {
            let c = decomp.coefficients(u);
            for (k, ck) in c.iter().enumerate() {
                if k < rank {
                    sq_coeffs[k] += ck * ck;
                } else {
                    kernel_sq += ck * ck;
                }
            }
        }
        Self {
            mu: decomp.retained().to_vec(),
            sq_coeffs,
            kernel_sq,
        }
    }

    pub fn truncation(&self, m: usize) -> Truncation {
        let threshold = 1.0 / (m as f64 + 1.0);
        let mut t = Truncation {
            h_half_sq: 0.0,
            h_sq: 0.0,
            rest_sq: self.kernel_sq,
        };
        for (&mu, &c2) in self.mu.iter().zip(&self.sq_coeffs) {
            if mu >= threshold {
                t.h_half_sq += c2 / mu;
                t.h_sq += c2;
            } else {
                t.rest_sq += c2;
            }
        }
        t
    }
}

/// Quantities the bound formulas consume; absent entries skip the bounds that need them.
#[derive(Debug, Clone, Default)]
pub struct BoundInputs {
    pub lambda: f64,
    /// `‖u‖` (or `‖Φ‖` for stacked targets).
    pub u_norm: f64,
    pub a2: Option<f64>,
    /// `‖u‖_{H^{1/2}_L}`.
    pub h_half: Option<f64>,
    /// Any upper bound on `‖u‖_{A_1}`.
    pub a1: Option<f64>,
    pub beta: Option<f64>,
    /// `(s, ‖u‖_{H^s_L})`.
    pub hs: Option<(f64, f64)>,
    pub profile: Option<SpectralProfile>,
    /// Stacked target `Φ`; the spectral bounds take their collective names.
    pub collective: bool,
}

/// One named bound as a function of `m`; `values` is `None` when inputs were missing.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundCurve {
    pub name: &'static str,
    pub values: Option<Vec<f64>>,
}

impl BoundCurve {
    fn from_fn(name: &'static str, present: bool, m_max: usize, f: impl Fn(f64) -> f64) -> Self {
        let values = present.then(|| (0..=m_max).map(|m| f(m as f64 + 1.0)).collect());
        Self { name, values }
    }
}

/// `2(‖u − h‖ + (b_h + ‖u‖²)^{1/2} / (m+1)^{1/2})`, squared.
fn squared_k_functional(rest_sq: f64, b_h: f64, u_sq: f64, m1: f64) -> f64 {
    let r = 2.0 * (rest_sq.sqrt() + ((b_h + u_sq) / m1).sqrt());
    r * r
}

/// Bound curves applicable to `variant`. Greedy selection gets the deterministic bound,
/// randomized selection and OMP the expectation bounds; noisy runs get none.
pub fn bound_curves(inputs: &BoundInputs, m_max: usize, variant: &Variant) -> Vec<BoundCurve> {
    let u = inputs.u_norm;
    let lam = inputs.lambda;
    let mut out = Vec::new();
    match variant {
        Variant::Greedy { beta, .. } => {
            let beta = inputs.beta.unwrap_or(*beta);
            let a1 = inputs.a1.unwrap_or(f64::NAN);
            out.push(BoundCurve::from_fn(CG1, inputs.a1.is_some(), m_max, |m1| {
                2.0 * ((lam / beta).powi(2) * a1 * a1 + u * u) / m1
            }));
        }
        Variant::Random | Variant::Omp => {
            let a2 = inputs.a2.unwrap_or(f64::NAN);
            let h = inputs.h_half.unwrap_or(f64::NAN);
            let (ec2a, ecva) = if inputs.collective { (EC2B, ECVB) } else { (EC2A, ECVA) };
            if !inputs.collective {
                out.push(BoundCurve::from_fn(EC2, inputs.a2.is_some(), m_max, |m1| {
                    (lam * a2 + u).powi(2) / m1
                }));
                let profile = inputs.profile.as_ref();
                out.push(BoundCurve {
                    name: ECV,
                    values: profile.map(|p| {
                        (0..=m_max)
                            .map(|m| {
                                let t = p.truncation(m);
                                let b_h = (lam * t.h_half_sq.sqrt() + t.h_sq.sqrt()).powi(2);
                                squared_k_functional(t.rest_sq, b_h, u * u, m as f64 + 1.0)
                            })
                            .collect()
                    }),
                });
            }
            out.push(BoundCurve::from_fn(ec2a, inputs.h_half.is_some(), m_max, |m1| h * h / m1));
            out.push(BoundCurve {
                name: ecva,
                values: inputs.profile.as_ref().map(|p| {
                    (0..=m_max)
                        .map(|m| {
                            let t = p.truncation(m);
                            squared_k_functional(t.rest_sq, t.h_half_sq, u * u, m as f64 + 1.0)
                        })
                        .collect()
                }),
            });
            let (s, hs) = inputs.hs.unwrap_or((f64::NAN, f64::NAN));
            out.push(BoundCurve::from_fn(ECVR, inputs.hs.is_some(), m_max, |m1| {
                ECVR_CONSTANT * m1.powf(-2.0 * s) * hs * hs
            }));
        }
        Variant::Noisy(_) => {}
    }
    out
}

/// `Σ_j (u, e_j)² (1 − ρ_j)^m`, the least expected error of any method using `m` sampled atoms.
pub fn lower_bound_curve(instance: &Instance, u: &AmbientVector, m_max: usize) -> Result<Vec<f64>> {
    if !instance.is_orthonormal() {
        return Err(Error::Unsupported(
            "the lower bound curve needs an orthonormal instance".into(),
        ));
    }
    instance.space().check(u)?;
    let rho = instance.measure().weights();
    Ok((0..=m_max)
        .map(|m| {
            u.iter()
                .zip(rho)
                .map(|(c, r)| c * c * (1.0 - r).powi(m as i32))
                .sum()
        })
        .collect())
}

/// `argmax_{t ∈ [0,1]} t^{2r} (1 − t)^m = 2r / (m + 2r)`.
pub fn worst_case_weight(m: usize, r: f64) -> f64 {
    2.0 * r / (m as f64 + 2.0 * r)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub slope: f64,
    pub intercept: f64,
    /// Points actually used after dropping nonpositive entries.
    pub points: usize,
}

/// Least-squares fit of `log curve[m]` against `log(m+1)` over `m_min..=m_max`.
pub fn rate_fit(curve: &[f64], m_min: usize, m_max: usize) -> Result<RateFit> {
    if m_min > m_max || m_max >= curve.len() {
        return Err(Error::invalid(format!(
            "fit window {m_min}..={m_max} outside curve of length {}",
            curve.len()
        )));
    }
    let pts: Vec<(f64, f64)> = (m_min..=m_max)
        .filter(|&m| curve[m] > 0.0 && curve[m].is_finite())
        .map(|m| (((m + 1) as f64).ln(), curve[m].ln()))
        .collect();
    let dropped = m_max - m_min + 1 - pts.len();
    if dropped > 0 {
        log::warn!("rate fit dropped {dropped} nonpositive entries");
    }
    if pts.len() < 2 {
        return Err(Error::Numerical("rate fit needs two positive points".into()));
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let slope = sxy / sxx;
    Ok(RateFit {
        slope,
        intercept: my - slope * mx,
        points: pts.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundStatus {
    Satisfied,
    Violated,
    Skipped,
}

/// Comparison of one bound curve against an expectation curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub name: String,
    pub status: BoundStatus,
    pub satisfied: bool,
    /// `min_m (bound_m − mean_m) / stderr_m`; infinite where the standard error is zero.
    pub worst_margin_sigma: f64,
    pub worst_m: Option<usize>,
    #[serde(skip)]
    pub values: Option<Vec<f64>>,
}

impl BoundCheck {
    pub fn skipped(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            status: BoundStatus::Skipped,
            satisfied: false,
            worst_margin_sigma: f64::NAN,
            worst_m: None,
            values: None,
        }
    }
}

/// `mean_m ≤ bound_m + 3·stderr_m` at every `m`.
pub fn check_bound(curve: &ExpectationCurve, name: &str, values: &[f64]) -> BoundCheck {
    check_bound_from(curve, name, values, 0)
}

/// [`check_bound`] restricted to `m ≥ m_start`.
pub fn check_bound_from(curve: &ExpectationCurve, name: &str, values: &[f64], m_start: usize) -> BoundCheck {
    let mut satisfied = true;
    let mut worst = f64::INFINITY;
    let mut worst_m = None;
    for m in m_start..curve.means.len().min(values.len()) {
        let (mean, se, b) = (curve.means[m], curve.stderrs[m], values[m]);
        let slack = SIGMA_RULE * se + ROUNDOFF * b.abs().max(mean.abs());
        if !(mean <= b + slack) {
            satisfied = false;
        }
        let margin = if se > 0.0 {
            (b - mean) / se
        } else if mean <= b + slack {
            f64::INFINITY
        } else {
            f64::NEG_INFINITY
        };
        if worst_m.is_none() || margin < worst {
            worst = margin;
            worst_m = Some(m);
        }
    }
    BoundCheck {
        name: name.to_string(),
        status: if satisfied {
            BoundStatus::Satisfied
        } else {
            BoundStatus::Violated
        },
        satisfied,
        worst_margin_sigma: worst,
        worst_m,
        values: Some(values.to_vec()),
    }
}

/// Runs below this count get the low-power flag.
pub const LOW_POWER_RUNS: usize = 30;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub checks: Vec<BoundCheck>,
    pub runs: usize,
    /// Too few runs for the standard-error rule to falsify anything.
    pub low_power: bool,
}

impl BoundReport {
    pub fn evaluate(curve: &ExpectationCurve, bounds: &[BoundCurve]) -> Self {
        let checks = bounds
            .iter()
            .map(|b| match &b.values {
                Some(v) => check_bound(curve, b.name, v),
                None => BoundCheck::skipped(b.name),
            })
            .collect();
        Self {
            checks,
            runs: curve.runs,
            low_power: curve.mode == super::ExpectationMode::MonteCarlo && curve.runs < LOW_POWER_RUNS,
        }
    }

    pub fn all_satisfied(&self) -> bool {
        self.checks
            .iter()
            .all(|c| c.status != BoundStatus::Violated)
    }

    pub fn get(&self, name: &str) -> Option<&BoundCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}
