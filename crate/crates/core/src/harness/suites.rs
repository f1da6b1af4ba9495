//! Verification suites. Each suite builds its instance from a fixed seed, runs the
//! relevant solvers and reports one outcome per check.

use std::time::Instant;

use nalgebra::{dmatrix, DMatrix};
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::bounds::{
    bound_curves, check_bound, lower_bound_curve, rate_fit, BoundReport, BoundStatus, EC2B, ECVB, ECVR_CONSTANT,
};
use super::expectation::{enumerate_expectation, mc_expectation, mc_runs, CurveAccumulator, Execution};
use super::norms::{bound_inputs, class_norms, collective_bound_inputs};
use crate::error::{Error, Result};
use crate::hilbert::{AmbientVector, InnerProductSpace, LocalSubspace, SubspaceFamily};
use crate::instances::{
    collective_instance, orthonormal_instance, random_unit_atoms, rkhs_instance, unit_dictionary_instance,
    CollectiveSpec, Instance, Kernel, RkhsSpec,
};
use crate::measures::{DiscreteMeasure, RandomStream};
use crate::solvers::{self, alpha, alpha_bar, NoiseSpec, OmpState, RecState, Variant, XiRule, XiSchedule};
use crate::spectral::{a2_norm, aq_gamma_norms_orthonormal, hs_norm, make_hs_element, Exponent, Gamma};

pub const SUITES: [&str; 11] = [
    "enumeration",
    "theorem1-orthonormal",
    "omp-optimality",
    "norm-identity",
    "lemma1-chain",
    "greedy",
    "interpolation",
    "rkhs",
    "collective",
    "noisy-plateau",
    "invariants",
];

pub const DEFAULT_SEED: u64 = 20_170_601;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SuiteOptions {
    pub seed: u64,
    pub exec: Execution,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        Self {
            seed: DEFAULT_SEED,
            exec: Execution::Parallel,
        }
    }
}

impl SuiteOptions {
    fn stream(&self, tag: u64) -> RandomStream {
        RandomStream::for_run(self.seed, 1_000_000 + tag)
    }

    fn mc_seed(&self, tag: u64) -> u64 {
        self.seed.wrapping_add(tag)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckOutcome {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: String,
    pub checks: Vec<CheckOutcome>,
    pub seconds: f64,
}

impl SuiteReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&CheckOutcome> {
        self.checks.iter().find(|c| c.name == name)
    }
}

struct Checks(Vec<CheckOutcome>);

impl Checks {
    fn push(&mut self, name: impl Into<String>, passed: bool, detail: impl Into<String>) {
        self.0.push(CheckOutcome {
            name: name.into(),
            passed,
            detail: detail.into(),
        });
    }

    fn bounds(&mut self, prefix: &str, report: &BoundReport) {
        for c in &report.checks {
            if c.status == BoundStatus::Skipped {
                continue;
            }
            self.push(
                format!("{prefix}{}", c.name),
                c.satisfied,
                format!("worst margin {:.3} sigma at m = {:?}", c.worst_margin_sigma, c.worst_m),
            );
        }
    }
}

pub fn run_suite(name: &str, opts: &SuiteOptions) -> Result<SuiteReport> {
    let start = Instant::now();
    let mut c = Checks(Vec::new());
    match name {
        "enumeration" => enumeration(opts, &mut c)?,
        "theorem1-orthonormal" => inverse_rate(opts, &mut c)?,
        "omp-optimality" => omp_optimality(opts, &mut c)?,
        "norm-identity" => norm_identity(opts, &mut c)?,
        "lemma1-chain" => lemma1_chain(opts, &mut c)?,
        "greedy" => greedy(opts, &mut c)?,
        "interpolation" => interpolation(opts, &mut c)?,
        "rkhs" => rkhs(opts, &mut c)?,
        "collective" => collective(opts, &mut c)?,
        "noisy-plateau" => noisy_plateau(opts, &mut c)?,
        "invariants" => invariants(opts, &mut c)?,
        other => {
            return Err(Error::invalid(format!(
                "unknown suite {other:?}; expected one of {} or \"all\"",
                SUITES.join(", ")
            )))
        }
    }
    Ok(SuiteReport {
        suite: name.to_string(),
        checks: c.0,
        seconds: start.elapsed().as_secs_f64(),
    })
}

/// `"all"` expands to every suite.
pub fn run_suites(name: &str, opts: &SuiteOptions) -> Result<Vec<SuiteReport>> {
    if name == "all" {
        SUITES.iter().map(|s| run_suite(s, opts)).collect()
    } else {
        run_suite(name, opts).map(|r| vec![r])
    }
}

fn unit(d: usize, i: usize) -> AmbientVector {
    let mut e = AmbientVector::zeros(d);
    e[i] = 1.0;
    e
}

fn gaussian_vector(d: usize, s: &mut RandomStream) -> AmbientVector {
    AmbientVector::from_fn(d, |_, _| s.standard_normal())
}

fn random_unit_coeffs(n: usize, s: &mut RandomStream) -> Vec<f64> {
    let v = gaussian_vector(n, s);
    let nrm = v.norm();
    v.iter().map(|x| x / nrm).collect()
}

/// Orthonormal `R^16` with uniform weights and `u` of unit `H^{1/2}_L` norm.
pub fn inverse_rate_setup(seed: u64) -> Result<(Instance, AmbientVector)> {
    let d = 16;
    let inst = orthonormal_instance(d, DiscreteMeasure::uniform(d)?)?;
    let dec = inst.decomposition()?;
    let mut s = RandomStream::for_run(seed, 2_000_001);
    let u = make_hs_element(&dec, 0.5, &random_unit_coeffs(d, &mut s))?;
    Ok((inst, u))
}

/// Slopes of the `1/(m+1)` regime are fitted on this window.
const RATE_WINDOW: (usize, usize) = (16, 256);
const RATE_RANGE: (f64, f64) = (-1.15, -0.85);

fn inverse_rate_checks(
    c: &mut Checks,
    prefix: &str,
    inst: &Instance,
    u: &AmbientVector,
    runs: usize,
    seed: u64,
    exec: Execution,
) -> Result<()> {
    let m_max = 256;
    let norms = class_norms(inst, u, &[0.5])?;
    let dec = inst.decomposition()?;
    let h = norms.hs(0.5).ok_or_else(|| Error::invalid("target is not in H^{1/2}_L"))?;
    c.push(format!("{prefix}unit-h-half-norm"), (h - 1.0).abs() <= 1e-9, format!("norm {h:.12}"));
    let inputs = bound_inputs(inst, u, &norms, Some(&dec), None);
    let curve = mc_expectation(&inst.problem(u.clone())?, inst.measure(), &Variant::Random, m_max, runs, seed, exec)?;
    let report = BoundReport::evaluate(&curve, &bound_curves(&inputs, m_max, &Variant::Random));
    c.bounds(prefix, &report);
    let simple: Vec<f64> = (0..=m_max).map(|m| 1.0 / (m as f64 + 1.0)).collect();
    let chk = check_bound(&curve, "inverse-m", &simple);
    c.push(
        format!("{prefix}mean-below-inverse-m"),
        chk.satisfied,
        format!("worst margin {:.3} sigma at m = {:?}", chk.worst_margin_sigma, chk.worst_m),
    );
    let fit = rate_fit(&curve.means, RATE_WINDOW.0, RATE_WINDOW.1)?;
    c.push(
        format!("{prefix}rate-slope"),
        fit.slope >= RATE_RANGE.0 && fit.slope <= RATE_RANGE.1,
        format!(
            "slope {:.4} on m in [{}, {}], required [{}, {}]",
            fit.slope, RATE_WINDOW.0, RATE_WINDOW.1, RATE_RANGE.0, RATE_RANGE.1
        ),
    );
    Ok(())
}

fn enumeration(opts: &SuiteOptions, c: &mut Checks) -> Result<()> {
    let inst = orthonormal_instance(2, DiscreteMeasure::uniform(2)?)?;
    let p = inst.problem(unit(2, 0))?;
    let exact = enumerate_expectation(&p, inst.measure(), &Variant::Random, 2)?;
    for (m, want) in [1.0, 0.5, 11.0 / 36.0].into_iter().enumerate() {
        let got = exact.means[m];
        c.push(format!("exact-m{m}"), (got - want).abs() <= 1e-12, format!("{got:.15} vs {want:.15}"));
    }
    let mc = mc_expectation(&p, inst.measure(), &Variant::Random, 2, 10_000, opts.mc_seed(1), opts.exec)?;
    for m in 1..=2 {
        let z = (mc.means[m] - exact.means[m]) / mc.stderrs[m];
        c.push(format!("mc-agrees-m{m}"), z.abs() <= 4.0, format!("deviation {z:.3} sigma"));
    }
    let omp = enumerate_expectation(&p, inst.measure(), &Variant::Omp, 8)?;
    let dev = omp
        .means
        .iter()
        .enumerate()
        .map(|(m, v)| (v - 0.5f64.powi(m as i32)).abs())
        .fold(0.0, f64::max);
    c.push("omp-geometric", dev <= 1e-12, format!("max deviation {dev:.3e}"));
    Ok(())
}

fn inverse_rate(opts: &SuiteOptions, c: &mut Checks) -> Result<()> {
    let (inst, u) = inverse_rate_setup(opts.seed)?;
    inverse_rate_checks(c, "", &inst, &u, 2000, opts.mc_seed(2), opts.exec)
}

fn omp_optimality(opts: &SuiteOptions, c: &mut Checks) -> Result<()> {
    let m_max = 8;
    let mut s = opts.stream(3);
    for d in [2usize, 3] {
        for (label, rho) in [("uniform", DiscreteMeasure::uniform(d)?), ("skewed", DiscreteMeasure::geometric(d, 0.3)?)] {
            let inst = orthonormal_instance(d, rho)?;
            let mut eq_dev: f64 = 0.0;
            let mut dominance: f64 = f64::INFINITY;
            for _ in 0..3 {
                let u = gaussian_vector(d, &mut s);
                let scale = u.norm_squared();
                let p = inst.problem(u.clone())?;
                let lb = lower_bound_curve(&inst, &u, m_max)?;
                let omp = enumerate_expectation(&p, inst.measure(), &Variant::Omp, m_max)?;
                let rec = enumerate_expectation(&p, inst.measure(), &Variant::Random, m_max)?;
                for m in 0..=m_max {
                    eq_dev = eq_dev.max((omp.means[m] - lb[m]).abs() / scale);
                    dominance = dominance.min((rec.means[m] - lb[m]) / scale);
                }
            }
            c.push(
                format!("omp-equals-lower-bound-d{d}-{label}"),
                eq_dev <= 1e-12,
                format!("max relative deviation {eq_dev:.3e}"),
            );
            c.push(
                format!("rec-dominates-lower-bound-d{d}-{label}"),
                dominance >= -1e-12,
                format!("min relative gap {dominance:.3e}"),
            );
        }
    }
    Ok(())
}

/// Atoms `e_1` and `(e_1 + e_2)/√2` with equal weights.
pub fn two_atom_instance() -> Result<Instance> {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    unit_dictionary_instance(
        InnerProductSpace::euclidean(2)?,
        vec![unit(2, 0), AmbientVector::from_vec(vec![r, r])],
        DiscreteMeasure::uniform(2)?,
    )
}

fn norm_identity(opts: &SuiteOptions, c: &mut Checks) -> Result<()> {
    let two = two_atom_instance()?;
    let dec = two.decomposition()?;
    let e2 = unit(2, 1);
    let a2_e2 = a2_norm(two.family(), two.measure(), &e2)?.powi(2);
    c.push("two-atom-e2", (a2_e2 - 6.0).abs() <= 1e-10, format!("||e2||^2 = {a2_e2:.12}"));
    let mut s = opts.stream(4);
    let rel = |inst: &Instance, dec: &crate::spectral::SpectralDecomposition, u: &AmbientVector| -> Result<f64> {
        let a = a2_norm(inst.family(), inst.measure(), u)?.powi(2);
        let h = hs_norm(u, 0.5, dec)?.powi(2);
        Ok((a - h).abs() / h)
    };
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        worst = worst.max(rel(&two, &dec, &gaussian_vector(2, &mut s))?);
    }
    c.push("two-atom-random", worst <= 1e-8, format!("max relative deviation {worst:.3e}"));
    let d = 8;
    let space = InnerProductSpace::euclidean(d)?;
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let atoms = random_unit_atoms(&space, 2 * d, &mut s);
        let w: Vec<f64> = (0..2 * d).map(|_| s.random_range(0.5..1.5)).collect();
        let inst = unit_dictionary_instance(space.clone(), atoms, DiscreteMeasure::normalized(w)?)?;
        let dec = inst.decomposition()?;
        for _ in 0..20 {
            worst = worst.max(rel(&inst, &dec, &gaussian_vector(d, &mut s))?);
        }
    }
    c.push("frames-d8", worst <= 1e-8, format!("max relative deviation {worst:.3e}"));
    Ok(())
}

fn lemma1_chain(opts: &SuiteOptions, c: &mut Checks) -> Result<()> {
    let mut s = opts.stream(5);
    let trials = 500;
    let (mut ordered, mut strict) = (0, 0);
    let mut svd_dev: f64 = 0.0;
    for _ in 0..trials {
        let d = s.random_range(2..=10usize);
        let w: Vec<f64> = (0..d).map(|_| s.random_range(0.05..1.0)).collect();
        let inst = orthonormal_instance(d, DiscreteMeasure::normalized(w)?)?;
        let u = gaussian_vector(d, &mut s);
        let (fam, rho) = (inst.family(), inst.measure());
        let a1 = aq_gamma_norms_orthonormal(fam, rho, &u, Exponent::One, &Gamma::Ones)?;
        let a2 = aq_gamma_norms_orthonormal(fam, rho, &u, Exponent::Two, &Gamma::SqrtRho)?;
        let ainf = aq_gamma_norms_orthonormal(fam, rho, &u, Exponent::Infinity, &Gamma::Rho)?;
        svd_dev = svd_dev.max((a2_norm(fam, rho, &u)? - a2).abs() / a2);
        let tol = 1e-12 * ainf;
        if a1 <= a2 + tol && a2 <= ainf + tol {
            ordered += 1;
        }
        if a2 - a1 > 1e-9 * a2 && ainf - a2 > 1e-9 * ainf {
            strict += 1;
        }
    }
    c.push("ordering", ordered == trials, format!("{ordered}/{trials} trials ordered"));
    let frac = strict as f64 / trials as f64;
    c.push("strict-fraction", frac >= 0.95, format!("{:.1}% strict", 100.0 * frac));
    c.push("a2-matches-least-norm", svd_dev <= 1e-10, format!("max relative deviation {svd_dev:.3e}"));
    Ok(())
}

fn greedy(opts: &SuiteOptions, c: &mut Checks) -> Result<()> {
    let m_max = 256;
    let mut s = opts.stream(6);
    let variant = Variant::Greedy { beta: 1.0, pool: None };
    let ortho = orthonormal_instance(16, DiscreteMeasure::uniform(16)?)?;
    let space8 = InnerProductSpace::euclidean(8)?;
    let frame = unit_dictionary_instance(
        space8.clone(),
        random_unit_atoms(&space8, 32, &mut s),
        DiscreteMeasure::uniform(32)?,
    )?;
    for (label, inst) in [("orthonormal-d16", ortho), ("frame-d8", frame)] {
        let u = gaussian_vector(inst.space().dim(), &mut s);
        let norms = class_norms(&inst, &u, &[])?;
        let mut inputs = bound_inputs(&inst, &u, &norms, None, None);
        inputs.beta = Some(1.0);
        let curve = mc_expectation(&inst.problem(u)?, inst.measure(), &variant, m_max, 1, 0, opts.exec)?;
        let report = BoundReport::evaluate(&curve, &bound_curves(&inputs, m_max, &variant));
        c.bounds(&format!("{label}-"), &report);
        if report.checks.is_empty() || report.checks.iter().any(|k| k.status == BoundStatus::Skipped) {
            c.push(format!("{label}-cg1"), false, "A_1 norm unavailable");
        }
    }
    Ok(())
}

/// Orthonormal `R^64` with `ρ_j ∝ 0.8^j`.
pub fn interpolation_instance() -> Result<Instance> {
    orthonormal_instance(64, DiscreteMeasure::geometric(64, 0.8)?)
}

fn interpolation(opts: &SuiteOptions, c: &mut Checks) -> Result<()> {
    let (m_max, runs) = (512, 1000);
    let inst = interpolation_instance()?;
    let dec = inst.decomposition()?;
    for (i, s) in [0.125, 0.25, 0.375].into_iter().enumerate() {
        // ‖u‖_{H^s_L} = 1 with equal weight on every eigenvector.
        let u = make_hs_element(&dec, s, &[0.125; 64])?;
        let hs = hs_norm(&u, s, &dec)?;
        let curve = mc_expectation(
            &inst.problem(u.clone())?,
            inst.measure(),
            &Variant::Random,
            m_max,
            runs,
            opts.mc_seed(7 + i as u64),
            opts.exec,
        )?;
        let with = |cst: f64| -> Vec<f64> { (0..=m_max).map(|m| cst * (m as f64 + 1.0).powf(-2.0 * s) * hs * hs).collect() };
        for (name, cst) in [("ecvr", ECVR_CONSTANT), ("ecvr-24", 24.0)] {
            let chk = check_bound(&curve, name, &with(cst));
            c.push(
                format!("s{s}-{name}"),
                chk.satisfied,
                format!("worst margin {:.3} sigma at m = {:?}", chk.worst_margin_sigma, chk.worst_m),
            );
        }
        let fit = rate_fit(&curve.means, 32, 512)?;
        c.push(
            format!("s{s}-slope"),
            (fit.slope + 2.0 * s).abs() <= 0.2,
            format!("slope {:.4}, target {:.3} +- 0.2", fit.slope, -2.0 * s),
        );
    }
    Ok(())
}

/// Gaussian kernel of width 0.1 on 64 equispaced nodes of `[0, 1]` with uniform weights.
pub fn rkhs_setup() -> Result<crate::instances::RkhsInstance> {
    rkhs_instance(
        RkhsSpec::equispaced(Kernel::Gaussian { width: 0.1 }, 64),
        DiscreteMeasure::uniform(64)?,
    )
}

fn rkhs(opts: &SuiteOptions, c: &mut Checks) -> Result<()> {
    let k = rkhs_setup()?;
    let inst = k.instance();
    let n = inst.space().dim();
    let mut s = opts.stream(8);
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let f = gaussian_vector(n, &mut s);
        let vals: Vec<f64> = (0..n).map(|i| k.evaluate_raw(&f, i)).collect();
        let scale = vals.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        for (i, v) in vals.iter().enumerate() {
            let lhs = inst.space().inner(&unit(n, i), &f)?;
            worst = worst.max((lhs - v).abs() / scale);
        }
    }
    c.push("reproducing-property", worst <= 1e-9, format!("max relative deviation {worst:.3e}"));

    let g = gaussian_vector(n, &mut s);
    let lg = k.integral_operator(&g);
    let dec = inst.decomposition()?;
    let scale = hs_norm(&lg, 0.5, &dec)?;
    let u = lg / scale;
    let a2 = a2_norm(inst.family(), inst.measure(), &u)?;
    c.push("integral-image-in-a2", a2.is_finite() && (a2 - 1.0).abs() <= 1e-6, format!("||u||_A2 = {a2:.9}"));

    inverse_rate_checks(c, "", inst, &u, 2000, opts.mc_seed(9), opts.exec)
}

fn collective(opts: &SuiteOptions, c: &mut Checks) -> Result<()> {
    let (m_max, runs) = (256, 500);
    let spec = CollectiveSpec::random(32, 4, 64, &mut opts.stream(10))?;
    let ci = collective_instance(spec, DiscreteMeasure::uniform(64)?)?;
    let dec = ci.component_instance().decomposition()?;
    let inputs = collective_bound_inputs(&ci, &dec)?;
    let problem = ci.instance().problem(ci.target())?;
    let mut acc = CurveAccumulator::new(m_max + 1);
    let mut violations = 0usize;
    let mut worst_ratio: f64 = 0.0;
    mc_runs(
        runs,
        opts.mc_seed(10),
        opts.exec,
        |_, stream| {
            let t = solvers::run_random(&problem, ci.instance().measure(), m_max, stream)?;
            let mut tracker = ci.tracker();
            let mut bad = 0usize;
            let mut ratio: f64 = 0.0;
            for m in 1..=m_max {
                tracker.add(&ci.spec().dictionary()[t.chosen[m - 1]])?;
                let (sig, eps) = tracker.sigma_eps();
                let delta = t.sq_errors[m].sqrt();
                let tol = 1e-12 * t.sq_errors[0].sqrt();
                if !(sig <= eps + tol && eps <= delta + tol) {
                    bad += 1;
                }
                if delta > 0.0 {
                    ratio = ratio.max(eps / delta);
                }
            }
            Ok((t.sq_errors, bad, ratio))
        },
        |_, (errs, bad, ratio)| {
            acc.push(&errs);
            violations += bad;
            worst_ratio = worst_ratio.max(ratio);
            Ok(())
        },
    )?;
    c.push(
        "sigma-eps-delta-chain",
        violations == 0,
        format!("{violations} violating steps over {runs} runs; max eps/delta {worst_ratio:.4}"),
    );
    let curve = acc.finish();
    let report = BoundReport::evaluate(&curve, &bound_curves(&inputs, m_max, &Variant::Random));
    // The collective bounds are stated from m = 1 on.
    for b in &report.checks {
        if b.name == EC2B || b.name == ECVB {
            let values = b.values.as_ref().expect("computed");
            let chk = super::bounds::check_bound_from(&curve, &b.name, values, 1);
            c.push(
                b.name.clone(),
                chk.satisfied,
                format!("worst margin {:.3} sigma at m = {:?}", chk.worst_margin_sigma, chk.worst_m),
            );
        }
    }
    Ok(())
}

fn noisy_plateau(opts: &SuiteOptions, c: &mut Checks) -> Result<()> {
    let (m_max, runs, sigma) = (10_000, 400, 0.05);
    let (inst, u) = inverse_rate_setup(opts.seed)?;
    let norms = class_norms(&inst, &u, &[])?;
    let a2 = norms.a2_norm.ok_or_else(|| Error::invalid("target outside A_2"))?;
    let b = (inst.family().lambda() * a2 + inst.space().norm(&u)).powi(2);
    let noise = Variant::Noisy(NoiseSpec::new(sigma, XiSchedule::Optimal)?);
    let curve = mc_expectation(&inst.problem(u)?, inst.measure(), &noise, m_max, runs, opts.mc_seed(11), opts.exec)?;
    let (argmin, min) = curve
        .means
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::INFINITY), |acc, (m, v)| if v < acc.1 { (m, v) } else { acc });
    let floor = sigma * sigma / 4.0;
    c.push(
        "plateau-above-quarter-sigma-sq",
        min >= floor,
        format!("min mean {min:.4e} at m = {argmin}, floor {floor:.4e}, final {:.4e}", curve.means[m_max]),
    );
    let mut worst = f64::INFINITY;
    let mut worst_m = 0;
    for m in 0..m_max {
        let (a, ab) = (alpha(m), alpha_bar(m));
        let rhs = a * a * curve.means[m] + ab * ab * b + sigma * sigma;
        let se = (curve.stderrs[m + 1].powi(2) + a.powi(4) * curve.stderrs[m].powi(2)).sqrt();
        let margin = (rhs - curve.means[m + 1]) / se;
        if margin < worst {
            worst = margin;
            worst_m = m;
        }
    }
    c.push(
        "noisy-recursion",
        worst >= -3.0,
        format!("worst margin {worst:.3} sigma at m = {worst_m}"),
    );
    Ok(())
}

/// A family with non-Euclidean Gram, mixed subspace dimensions and non-restricted local forms.
pub fn block_family(seed: u64) -> Result<(SubspaceFamily, DiscreteMeasure)> {
    let mut s = RandomStream::for_run(seed, 3_000_001);
    let d = 5;
    let a = DMatrix::from_fn(d, d, |_, _| s.standard_normal());
    let space = InnerProductSpace::new(a.tr_mul(&a) + DMatrix::identity(d, d))?;
    let mut subs = Vec::new();
    for k in [1usize, 2, 3, 2] {
        let basis = DMatrix::from_fn(d, k, |_, _| s.standard_normal());
        let m = DMatrix::from_fn(k, k, |_, _| s.standard_normal());
        subs.push(LocalSubspace::new(basis, m.tr_mul(&m) + DMatrix::identity(k, k) * 0.5)?);
    }
    let fam = SubspaceFamily::new(space, subs)?;
    Ok((fam, DiscreteMeasure::normalized(vec![1.0, 2.0, 3.0, 4.0])?))
}

fn invariants(opts: &SuiteOptions, c: &mut Checks) -> Result<()> {
    let mut s = opts.stream(12);
    let mut instances: Vec<(&str, Instance)> = Vec::new();
    instances.push(("orthonormal", orthonormal_instance(6, DiscreteMeasure::geometric(6, 0.7)?)?));
    let skew = InnerProductSpace::new(dmatrix![2.0, 0.4, 0.0; 0.4, 1.0, 0.2; 0.0, 0.2, 1.5])?;
    let atoms = random_unit_atoms(&skew, 7, &mut s);
    instances.push(("dictionary", unit_dictionary_instance(skew, atoms, DiscreteMeasure::uniform(7)?)?));
    let k = rkhs_instance(
        RkhsSpec::equispaced(Kernel::MinPlusOne, 12),
        DiscreteMeasure::uniform(12)?,
    )?;
    instances.push(("rkhs", k.instance().clone()));
    let ci = collective_instance(CollectiveSpec::random(6, 2, 9, &mut s)?, DiscreteMeasure::uniform(9)?)?;
    instances.push(("collective", ci.instance().clone()));
    let (fam, rho) = block_family(opts.seed)?;
    instances.push(("blocks", Instance::from_family(fam, rho)?));

    for (label, inst) in &instances {
        let fam = inst.family();
        let space = inst.space();
        let d = space.dim();

        let mut adj: f64 = 0.0;
        for _ in 0..50 {
            let w = gaussian_vector(d, &mut s);
            for omega in 0..fam.len() {
                let sub = fam.subspace(omega)?;
                let v = gaussian_vector(sub.dim(), &mut s);
                let lhs = space.inner(&fam.apply_r(omega, &v)?, &w)?;
                let rhs = v.dot(&(sub.local_gram() * fam.apply_t(omega, &w)?));
                adj = adj.max((lhs - rhs).abs() / lhs.abs().max(rhs.abs()).max(1e-300));
            }
        }
        c.push(format!("{label}-adjoint-identity"), adj <= 1e-10, format!("max relative deviation {adj:.3e}"));

        let u = gaussian_vector(d, &mut s);
        let p = inst.problem(u.clone())?;
        let mut state = RecState::new(&p);
        let (mut energy, mut xi_viol): (f64, usize) = (0.0, 0);
        for step in 0..200 {
            let m = state.steps();
            let e = state.error();
            let w = &e * alpha(m) + &u * alpha_bar(m);
            let omega = inst.measure().sample(&mut s);
            let psi = fam.psi_tilde(omega, &e)?;
            if step < 20 {
                for _ in 0..100 {
                    let mut trial = state.clone();
                    let opt = trial.clone().step(omega);
                    let alt = trial.step_with(omega, XiRule::Fixed(opt.xi + s.standard_normal()));
                    if alt.sq_error.sqrt() < opt.sq_error.sqrt() - 1e-12 {
                        xi_viol += 1;
                    }
                }
            }
            let out = state.step(omega);
            if psi.norm() > 0.0 {
                let expect = space.sq_norm(&w) - space.inner(&w, &psi)?.powi(2);
                let scale = space.sq_norm(&w).max(1e-300);
                energy = energy.max((out.sq_error - expect).abs() / scale);
            }
        }
        c.push(format!("{label}-energy-identity"), energy <= 1e-10, format!("max relative deviation {energy:.3e}"));
        c.push(format!("{label}-xi-optimality"), xi_viol == 0, format!("{xi_viol} improving perturbations"));

        let mut mono = 0usize;
        for _ in 0..20 {
            let mut omp = OmpState::new(&p);
            let mut prev = omp.sq_error();
            for _ in 0..40 {
                let st = omp.step(inst.measure().sample(&mut s));
                if st.sq_error > prev * (1.0 + 1e-12) + 1e-300 || st.sq_error > st.rec_sq_error * (1.0 + 1e-10) + 1e-28 {
                    mono += 1;
                }
                prev = st.sq_error;
            }
        }
        c.push(format!("{label}-omp-monotone"), mono == 0, format!("{mono} violations"));

        let pool: Vec<usize> = (0..fam.len()).collect();
        let mut st = RecState::new(&p);
        let mut dom = 0usize;
        for _ in 0..30 {
            let (w, best) = solvers::select_greedy(&st, &pool);
            for &o in &pool {
                let r = fam.subspaces()[o].local_norm(&st.correction(o).local);
                if r > best {
                    dom += 1;
                }
            }
            st.step(w);
        }
        c.push(format!("{label}-greedy-dominance"), dom == 0, format!("{dom} violations"));

        let a = mc_expectation(&p, inst.measure(), &Variant::Random, 30, 300, opts.seed, Execution::Sequential)?;
        let b = mc_expectation(&p, inst.measure(), &Variant::Random, 30, 300, opts.seed, Execution::Parallel)?;
        let again = mc_expectation(&p, inst.measure(), &Variant::Random, 30, 300, opts.seed, Execution::Parallel)?;
        c.push(format!("{label}-determinism"), a == b && b == again, "sequential, parallel and repeat runs compared bitwise");
    }
    Ok(())
}
