use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

use schwarz_rand::harness::{
    bound_curves, bound_inputs, class_norms, enumerate_expectation, lower_bound_curve, mc_expectation, rate_fit,
    worst_case_weight, BoundReport, Execution,
};
use schwarz_rand::instances::{orthonormal_instance, random_unit_atoms, unit_dictionary_instance, Instance};
use schwarz_rand::solvers::{run_random, RecState, Variant};
use schwarz_rand::spectral::{a2_norm, hs_norm};
use schwarz_rand::{AmbientVector, DiscreteMeasure, InnerProductSpace, RandomStream};

fn weights(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.05f64..1.0, n)
}

fn vector(n: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-1.0f64..1.0, n).prop_filter("nonzero", |v| v.iter().any(|x| x.abs() > 1e-3))
}

fn spd(d: usize, seed: u64) -> InnerProductSpace {
    let mut s = RandomStream::new(seed);
    let a = DMatrix::from_fn(d, d, |_, _| s.standard_normal());
    InnerProductSpace::new(a.tr_mul(&a) + DMatrix::identity(d, d)).unwrap()
}

fn frame(d: usize, atoms: usize, seed: u64) -> Instance {
    let space = spd(d, seed);
    let a = random_unit_atoms(&space, atoms, &mut RandomStream::new(seed + 1));
    unit_dictionary_instance(space, a, DiscreteMeasure::uniform(atoms).unwrap()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn adjoint_identity_on_frames(seed in 0u64..1000, d in 2usize..6, extra in 0usize..4) {
        let inst = frame(d, d + extra, seed);
        let fam = inst.family();
        let mut s = RandomStream::new(seed ^ 0xabc);
        let w = AmbientVector::from_fn(d, |_, _| s.standard_normal());
        for omega in 0..fam.len() {
            let v = DVector::from_element(1, s.standard_normal());
            let lhs = inst.space().inner(&fam.apply_r(omega, &v).unwrap(), &w).unwrap();
            let sub = fam.subspace(omega).unwrap();
            let rhs = v.dot(&(sub.local_gram() * fam.apply_t(omega, &w).unwrap()));
            prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()));
        }
    }

    #[test]
    fn a2_equals_half_order_norm(seed in 0u64..1000, d in 2usize..6, extra in 0usize..4, u in vector(5)) {
        let inst = frame(d, d + extra, seed);
        let u = AmbientVector::from_iterator(d, u.into_iter().take(d));
        let dec = inst.decomposition().unwrap();
        let a2 = a2_norm(inst.family(), inst.measure(), &u).unwrap();
        let h = hs_norm(&u, 0.5, &dec).unwrap();
        prop_assert!((a2 * a2 - h * h).abs() <= 1e-8 * h * h);
    }

    #[test]
    fn error_never_exceeds_start(seed in 0u64..1000, w in weights(5), u in vector(5)) {
        let inst = orthonormal_instance(5, DiscreteMeasure::normalized(w).unwrap()).unwrap();
        let p = inst.problem(AmbientVector::from_vec(u)).unwrap();
        let t = run_random(&p, inst.measure(), 50, &mut RandomStream::new(seed)).unwrap();
        prop_assert!(t.sq_errors.iter().all(|&e| e <= t.sq_errors[0] * (1.0 + 1e-12)));
    }

    #[test]
    fn enumerated_curves_dominate_lower_bound(w in weights(3), u in vector(3)) {
        let inst = orthonormal_instance(3, DiscreteMeasure::normalized(w).unwrap()).unwrap();
        let u = AmbientVector::from_vec(u);
        let p = inst.problem(u.clone()).unwrap();
        let lb = lower_bound_curve(&inst, &u, 6).unwrap();
        let rec = enumerate_expectation(&p, inst.measure(), &Variant::Random, 6).unwrap();
        let omp = enumerate_expectation(&p, inst.measure(), &Variant::Omp, 6).unwrap();
        let scale = u.norm_squared();
        for m in 0..=6 {
            prop_assert!(rec.means[m] >= lb[m] - 1e-12 * scale);
            prop_assert!((omp.means[m] - lb[m]).abs() <= 1e-12 * scale);
        }
    }

    #[test]
    fn enumerated_orthonormal_curve_meets_inverse_m(w in weights(3), u in vector(3)) {
        let inst = orthonormal_instance(3, DiscreteMeasure::normalized(w).unwrap()).unwrap();
        let u = AmbientVector::from_vec(u);
        let norms = class_norms(&inst, &u, &[0.5]).unwrap();
        let dec = inst.decomposition().unwrap();
        let inputs = bound_inputs(&inst, &u, &norms, Some(&dec), None);
        let p = inst.problem(u).unwrap();
        let exact = enumerate_expectation(&p, inst.measure(), &Variant::Random, 7).unwrap();
        let report = BoundReport::evaluate(&exact, &bound_curves(&inputs, 7, &Variant::Random));
        prop_assert!(report.all_satisfied(), "{:?}", report.checks);
    }

    #[test]
    fn worst_case_weight_maximizes(m in 1usize..200, r in 0.05f64..2.0) {
        let t0 = worst_case_weight(m, r);
        let f = |t: f64| t.powf(2.0 * r) * (1.0 - t).powi(m as i32);
        for k in 1..100 {
            let t = k as f64 / 100.0;
            prop_assert!(f(t) <= f(t0) * (1.0 + 1e-12));
        }
    }
}

#[test]
fn rate_fit_recovers_power_laws() {
    for theta in [0.25, 0.5, 1.0, 1.5] {
        let curve: Vec<f64> = (0..=512).map(|m| 3.0 * (m as f64 + 1.0).powf(-theta)).collect();
        let fit = rate_fit(&curve, 32, 512).unwrap();
        assert!((fit.slope + theta).abs() < 0.01, "theta {theta}: {}", fit.slope);
    }
    let flat = vec![2.0; 100];
    assert!(rate_fit(&flat, 1, 99).unwrap().slope.abs() < 1e-12);
}

#[test]
fn schedules_agree_bitwise_on_frames() {
    let inst = frame(5, 9, 17);
    let u = AmbientVector::from_vec(vec![0.3, -1.0, 0.2, 0.0, 0.7]);
    let p = inst.problem(u).unwrap();
    for variant in [Variant::Random, Variant::Omp] {
        let a = mc_expectation(&p, inst.measure(), &variant, 40, 700, 99, Execution::Sequential).unwrap();
        let b = mc_expectation(&p, inst.measure(), &variant, 40, 700, 99, Execution::Parallel).unwrap();
        assert_eq!(a, b);
    }
}

#[test]
fn recursion_state_matches_run() {
    let inst = frame(4, 6, 3);
    let u = AmbientVector::from_vec(vec![1.0, 0.5, -0.5, 0.25]);
    let p = inst.problem(u).unwrap();
    let t = run_random(&p, inst.measure(), 30, &mut RandomStream::new(5)).unwrap();
    let mut st = RecState::new(&p);
    for (m, &omega) in t.chosen.iter().enumerate() {
        let out = st.step(omega);
        assert_eq!(out.sq_error, t.sq_errors[m + 1]);
    }
}
