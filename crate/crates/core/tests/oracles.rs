mod common;

use std::sync::Arc;

use smpx::composite::eig_as_composite;
use smpx::geometry::Point;
use smpx::instance::{generate, GeneratorParams, InstanceKind};
use smpx::solver::{constant_stepsize, rmsa_run, smp_run, NoEvaluation, RunSeed, StepsizePolicy};
use smpx::vi::{calibrate_noise, default_probes, err_nash_saddle, ExactOracle, SignNoiseOracle, StochasticOracle};
use smpx::RandomStream;

#[test]
fn eig_oracle_is_unbiased_by_enumeration() {
    let mut s = RandomStream::from_seed(31);
    for (n, sizes) in [(2, vec![1, 1]), (3, vec![2, 1]), (4, vec![2, 2]), (4, vec![1, 1, 1])] {
        let inst = common::small_eig_instance(n, &sizes, &mut s);
        let setup = inst.setup().unwrap();
        for _ in 0..25 {
            let z = setup.random_point(&mut s);
            assert!(common::enumeration_bias(&inst, &z).unwrap() < 1e-12);
        }
    }
}

#[test]
fn eig_draw_frequencies_match_weights() {
    let mut s = RandomStream::from_seed(5);
    let inst = Arc::new(common::small_eig_instance(3, &[2, 2], &mut s));
    let setup = inst.setup().unwrap();
    let z = setup.random_point(&mut s);
    let f = inst.exact_operator(&z).unwrap();
    let mut mean = f.zeros_like();
    let draws = 200_000;
    let mut stream = RandomStream::new(1, 0);
    for _ in 0..draws {
        mean.axpy(1.0 / draws as f64, &inst.sample_xi(&z, &mut stream).unwrap()).unwrap();
    }
    // Entries of Ξ are bounded by a few units; 5 standard errors.
    assert!(mean.sub(&f).unwrap().max_abs() < 5.0 * 4.0 / (draws as f64).sqrt());
}

#[test]
fn composite_view_matches_eig_instance() {
    let mut s = RandomStream::from_seed(77);
    for sizes in [vec![2, 3], vec![1, 2, 2]] {
        let inst = Arc::new(common::small_eig_instance(4, &sizes, &mut s));
        let cp = Arc::new(eig_as_composite(&inst).unwrap());
        let setup = inst.setup().unwrap();
        let sad_e = inst.saddle_instance().unwrap();
        let sad_c = cp.saddle_instance(cp.problem().unwrap());
        for _ in 0..20 {
            let z = setup.random_point(&mut s);
            let d = inst.exact_operator(&z).unwrap().sub(&cp.operator(&z).unwrap()).unwrap();
            assert!(d.max_abs() < 1e-12);
            let ge = err_nash_saddle(&sad_e, &z).unwrap();
            let gc = err_nash_saddle(&sad_c, &z).unwrap();
            assert!((ge - gc).abs() < 1e-12);
            assert!(ge >= -1e-12);
        }
    }
}

#[test]
fn solver_counts_oracle_calls_and_stays_feasible() {
    let p = GeneratorParams { n: 5, blocks: vec![2, 2], ..Default::default() };
    let f = generate(InstanceKind::EigMin, &p, 3).unwrap();
    let inst = Arc::new(f.eig().unwrap().clone());
    let prob = inst.problem().unwrap();
    let oracle = inst.averaged_oracle(2).unwrap();
    let g = constant_stepsize(1.0, 2f64.sqrt(), prob.lip_l, 3.0, 300).unwrap();
    let cps = [1, 10, 100, 300];
    let smp = smp_run(&prob, &oracle, StepsizePolicy::constant(g, 300).unwrap(), RunSeed::new(1, 2), &cps, &NoEvaluation)
        .unwrap();
    let rmsa =
        rmsa_run(&prob, &oracle, StepsizePolicy::constant(g, 300).unwrap(), RunSeed::new(1, 2), &cps, &NoEvaluation)
            .unwrap();
    // One call to Ξ_k is one oracle call regardless of k.
    assert_eq!(smp.oracle_calls, 600);
    assert_eq!(rmsa.oracle_calls, 300);
    for (cp, &t) in smp.checkpoints.iter().zip(&cps) {
        assert_eq!(cp.t, t);
        assert_eq!(cp.oracle_calls, 2 * t as u64);
        assert!(prob.setup.contains(&cp.averaged, 1e-9));
    }
    let again = smp_run(&prob, &oracle, StepsizePolicy::constant(g, 300).unwrap(), RunSeed::new(1, 2), &cps, &NoEvaluation)
        .unwrap();
    assert!(smp.same_trajectory(&again));
    let other = smp_run(&prob, &oracle, StepsizePolicy::constant(g, 300).unwrap(), RunSeed::new(1, 3), &cps, &NoEvaluation)
        .unwrap();
    assert!(!smp.same_trajectory(&other));
}

#[test]
fn stepsize_above_limit_is_rejected() {
    let p = GeneratorParams { n: 4, blocks: vec![2, 2], ..Default::default() };
    let f = generate(InstanceKind::BilinearSimplexSpectahedron, &p, 1).unwrap();
    let inst = Arc::new(f.eig().unwrap().clone());
    let prob = inst.problem().unwrap();
    let too_big = 1.01 / (3f64.sqrt() * prob.lip_l);
    let r = smp_run(
        &prob,
        &inst.exact_oracle(),
        StepsizePolicy::constant(too_big, 10).unwrap(),
        RunSeed::new(0, 0),
        &[10],
        &NoEvaluation,
    );
    assert!(matches!(r, Err(smpx::Error::Config(_))));
}

#[test]
fn sign_noise_level_is_exact() {
    let p = GeneratorParams { n: 4, blocks: vec![2, 3], ..Default::default() };
    let f = generate(InstanceKind::EigMin, &p, 2).unwrap();
    let inst = Arc::new(f.eig().unwrap().clone());
    let prob = inst.problem().unwrap();
    let o = SignNoiseOracle::new(&prob, 0.3).unwrap();
    let probes = default_probes(&prob.setup, 3, 1);
    let cal = calibrate_noise(&o, &prob, &probes, 50, 4).unwrap();
    assert!((cal.m - o.noise_m()).abs() < 1e-12);
    let exact = ExactOracle::new(prob.operator.clone());
    assert_eq!(calibrate_noise(&exact, &prob, &probes, 5, 4).unwrap().m, 0.0);
    let z: Point = prob.setup.center();
    assert!(exact.sample(&z, &mut RandomStream::new(0, 0)).unwrap().is_finite());
}
