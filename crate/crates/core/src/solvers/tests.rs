use approx::assert_relative_eq;
use nalgebra::{dmatrix, dvector};
use proptest::prelude::*;

use super::*;
use crate::instances::{orthonormal_instance, random_unit_atoms, unit_dictionary_instance, Instance};
use crate::hilbert::InnerProductSpace;

fn ortho(d: usize) -> Instance {
    orthonormal_instance(d, DiscreteMeasure::uniform(d).unwrap()).unwrap()
}

fn skewed_dictionary(seed: u64) -> Instance {
    let space = InnerProductSpace::new(dmatrix![
        2.0, 0.4, 0.0, 0.1;
        0.4, 1.0, 0.2, 0.0;
        0.0, 0.2, 1.5, 0.3;
        0.1, 0.0, 0.3, 1.2
    ])
    .unwrap();
    let atoms = random_unit_atoms(&space, 9, &mut RandomStream::new(seed));
    unit_dictionary_instance(space, atoms, DiscreteMeasure::geometric(9, 0.8).unwrap()).unwrap()
}

fn random_target(inst: &Instance, seed: u64) -> AmbientVector {
    let mut s = RandomStream::new(seed);
    AmbientVector::from_fn(inst.space().dim(), |_, _| s.standard_normal())
}

#[test]
fn alpha_values() {
    assert_eq!(alpha(0), 0.5);
    assert_relative_eq!(alpha(1), 2.0 / 3.0);
    assert!((0..1000).all(|m| alpha(m) < alpha(m + 1) && alpha(m) < 1.0));
    assert_relative_eq!(alpha(7) + alpha_bar(7), 1.0);
}

#[test]
fn xi_optimal_examples() {
    let inst = ortho(3);
    let p = inst.problem(dvector![1.0, 0.0, 0.0]).unwrap();
    let z = AmbientVector::zeros(3);
    assert_relative_eq!(xi_optimal(&p, &z, 0, &dvector![1.0, 0.0, 0.0]), 1.0);
    assert_eq!(xi_optimal(&p, &z, 0, &z), 0.0);
}

#[test]
fn zero_target_is_fixed_point() {
    let inst = skewed_dictionary(1);
    let p = inst.problem(AmbientVector::zeros(4)).unwrap();
    for v in [
        Variant::Random,
        Variant::Omp,
        Variant::Greedy { beta: 1.0, pool: None },
        Variant::Noisy(NoiseSpec::new(0.0, XiSchedule::Optimal).unwrap()),
    ] {
        let t = run(&p, inst.measure(), &v, 25, &mut RandomStream::new(2), false).unwrap();
        assert!(t.sq_errors.iter().all(|&e| e == 0.0), "{}", v.name());
    }
}

#[test]
fn greedy_hand_example() {
    let inst = ortho(2);
    let p = inst.problem(dvector![1.0, 0.5]).unwrap();
    let t = run_greedy(&p, 1.0, 2, &[0, 1]).unwrap();
    assert_eq!(t.chosen, vec![0, 1]);
    assert_relative_eq!(t.sq_errors[0], 1.25, epsilon = 1e-14);
    assert_relative_eq!(t.sq_errors[1], 0.25, epsilon = 1e-14);
    assert_relative_eq!(t.sq_errors[2], 1.0 / 9.0, epsilon = 1e-14);
}

#[test]
fn greedy_rejects_bad_arguments() {
    let inst = ortho(2);
    let p = inst.problem(dvector![1.0, 0.5]).unwrap();
    assert!(run_greedy(&p, 0.0, 2, &[0, 1]).is_err());
    assert!(run_greedy(&p, 1.5, 2, &[0, 1]).is_err());
    assert!(run_greedy(&p, 1.0, 2, &[]).is_err());
    assert_eq!(run_greedy(&p, 1.0, 2, &[0, 5]).unwrap_err(), Error::UnknownIndex(5));
}

#[test]
fn greedy_selects_pool_maximum() {
    let inst = skewed_dictionary(3);
    let p = inst.problem(random_target(&inst, 4)).unwrap();
    let pool: Vec<usize> = (0..9).collect();
    let mut state = RecState::new(&p);
    for _ in 0..20 {
        let (w, best) = select_greedy(&state, &pool);
        for &o in &pool {
            let c = state.correction(o);
            assert!(inst.family().subspaces()[o].local_norm(&c.local) <= best);
        }
        state.step(w);
    }
}

#[test]
fn measure_size_is_checked() {
    let inst = ortho(3);
    let p = inst.problem(dvector![1.0, 0.0, 0.0]).unwrap();
    let wrong = DiscreteMeasure::uniform(2).unwrap();
    assert!(run_random(&p, &wrong, 3, &mut RandomStream::new(0)).is_err());
}

#[test]
fn energy_identity_each_step() {
    let inst = skewed_dictionary(5);
    let p = inst.problem(random_target(&inst, 6)).unwrap();
    let mut state = RecState::new(&p);
    let mut s = RandomStream::new(7);
    let space = inst.space();
    for _ in 0..200 {
        let m = state.steps();
        let w = &state.error() * alpha(m) + p.target() * alpha_bar(m);
        let omega = inst.measure().sample(&mut s);
        let psi = inst.family().psi_tilde(omega, &state.error()).unwrap();
        let out = state.step(omega);
        if psi.norm() > 0.0 {
            let expect = space.sq_norm(&w) - space.inner(&w, &psi).unwrap().powi(2);
            assert!((out.sq_error - expect).abs() <= 1e-10 * expect.abs().max(1e-300) + 1e-15, "{} {expect}", out.sq_error);
        }
    }
}

#[test]
fn optimal_xi_cannot_be_improved() {
    let inst = skewed_dictionary(8);
    let p = inst.problem(random_target(&inst, 9)).unwrap();
    let mut s = RandomStream::new(10);
    let mut state = RecState::new(&p);
    for _ in 0..15 {
        let omega = inst.measure().sample(&mut s);
        let mut best = state.clone();
        let out = best.step(omega);
        for _ in 0..100 {
            let mut other = state.clone();
            let xi = out.xi + s.standard_normal();
            let alt = other.step_with(omega, XiRule::Fixed(xi));
            assert!(alt.sq_error.sqrt() >= out.sq_error.sqrt() - 1e-12);
        }
        state = best;
    }
}

#[test]
fn functional_mode_matches_direct() {
    let inst = skewed_dictionary(11);
    let u = random_target(&inst, 12);
    let direct = inst.problem(u.clone()).unwrap();
    let functional = inst.problem(u).unwrap().with_rhs_mode(RhsMode::Functional);
    for v in [Variant::Random, Variant::Omp, Variant::Greedy { beta: 1.0, pool: None }] {
        let a = run(&direct, inst.measure(), &v, 300, &mut RandomStream::new(13), false).unwrap();
        let b = run(&functional, inst.measure(), &v, 300, &mut RandomStream::new(13), false).unwrap();
        assert_eq!(a.chosen, b.chosen);
        for (x, y) in a.sq_errors.iter().zip(&b.sq_errors) {
            assert!((x - y).abs() <= 1e-12 * a.sq_errors[0], "{} {x} {y}", v.name());
        }
    }
}

#[test]
fn omp_monotone_and_beats_recursion_step() {
    let inst = skewed_dictionary(14);
    let p = inst.problem(random_target(&inst, 15)).unwrap();
    let mut s = RandomStream::new(16);
    let mut state = OmpState::new(&p);
    let mut prev = state.sq_error();
    for _ in 0..60 {
        let step = state.step(inst.measure().sample(&mut s));
        assert!(step.sq_error <= prev * (1.0 + 1e-12) + 1e-300);
        assert!(step.sq_error <= step.rec_sq_error * (1.0 + 1e-10) + 1e-28);
        prev = step.sq_error;
    }
    assert!(state.rank() <= 4);
    assert!(prev < 1e-20 * p.target_norm().powi(2));
}

#[test]
fn omp_orthonormal_two_dims() {
    let inst = ortho(2);
    let p = inst.problem(dvector![1.0, 0.0]).unwrap();
    let t = run_omp(&p, inst.measure(), 4, &mut RandomStream::new(3)).unwrap();
    assert!(t.xis.is_empty());
    for m in 1..=4 {
        let hit = t.chosen[..m].contains(&0);
        assert_eq!(t.sq_errors[m], if hit { 0.0 } else { 1.0 });
    }
}

#[test]
fn zero_noise_is_bitwise_random() {
    let inst = skewed_dictionary(17);
    let p = inst.problem(random_target(&inst, 18)).unwrap();
    let noisy = NoiseSpec::new(0.0, XiSchedule::Optimal).unwrap();
    let a = run(&p, inst.measure(), &Variant::Random, 100, &mut RandomStream::for_run(19, 4), true).unwrap();
    let b = run(&p, inst.measure(), &Variant::Noisy(noisy), 100, &mut RandomStream::for_run(19, 4), true).unwrap();
    assert_eq!(a, b);
}

#[test]
fn prescribed_schedule_is_used() {
    let inst = ortho(3);
    let p = inst.problem(dvector![1.0, 2.0, 3.0]).unwrap();
    let noise = NoiseSpec::new(0.1, XiSchedule::Prescribed { xi0: 0.5 }).unwrap();
    let t = run_noisy(&p, inst.measure(), noise, 10, &mut RandomStream::new(0)).unwrap();
    for (m, xi) in t.xis.iter().enumerate() {
        assert_relative_eq!(*xi, 0.5 / (m as f64 + 1.0));
    }
    assert!(NoiseSpec::new(-1.0, XiSchedule::Optimal).is_err());
    assert!(NoiseSpec::new(f64::NAN, XiSchedule::Optimal).is_err());
}

#[test]
fn zero_direction_keeps_shrinking() {
    // u = e_1 and ω = e_2: the correction vanishes and the iterate is only rescaled.
    let inst = ortho(2);
    let p = inst.problem(dvector![1.0, 0.0]).unwrap();
    let mut st = RecState::new(&p);
    let out = st.step(0);
    assert_eq!(out.sq_error, 0.0);
    let out = st.step(1);
    assert_eq!(out.xi, 0.0);
    assert_relative_eq!(out.sq_error, 1.0 / 9.0, epsilon = 1e-15);
}

#[test]
fn iterates_recorded_on_request() {
    let inst = ortho(2);
    let p = inst.problem(dvector![1.0, 1.0]).unwrap();
    let t = run(&p, inst.measure(), &Variant::Random, 5, &mut RandomStream::new(0), true).unwrap();
    let its = t.iterates.unwrap();
    assert_eq!(its.len(), 6);
    for (it, e) in its.iter().zip(&t.sq_errors) {
        assert_relative_eq!((p.target() - it).norm_squared(), *e, epsilon = 1e-14);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn random_errors_never_exceed_shrunk_start(seed in 0u64..10_000, d in 1usize..6) {
        let inst = ortho(d);
        let u = random_target(&inst, seed);
        let p = inst.problem(u).unwrap();
        let t = run_random(&p, inst.measure(), 30, &mut RandomStream::new(seed)).unwrap();
        // ξ = 0 keeps ‖w‖ ≤ α_m δ_m + ᾱ_m ‖u‖ ≤ ‖u‖.
        let u2 = t.sq_errors[0];
        for e in &t.sq_errors {
            prop_assert!(*e <= u2 * (1.0 + 1e-12));
        }
    }

    #[test]
    fn run_is_pure_function_of_stream(seed in 0u64..10_000, run_id in 0u64..64) {
        let inst = skewed_dictionary(seed);
        let p = inst.problem(random_target(&inst, seed + 1)).unwrap();
        let a = run_random(&p, inst.measure(), 20, &mut RandomStream::for_run(seed, run_id)).unwrap();
        let b = run_random(&p, inst.measure(), 20, &mut RandomStream::for_run(seed, run_id)).unwrap();
        prop_assert_eq!(a, b);
    }
}
