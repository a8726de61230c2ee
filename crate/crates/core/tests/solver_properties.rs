use anisoeig::rearrangement::symmetrize;
use anisoeig::solver::*;
use anisoeig::{NormSpec, ScalarField};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn norms() -> Vec<NormSpec> {
    vec![
        NormSpec::euclidean(2).unwrap(),
        NormSpec::ellipse(2, &[4.0, 0.0, 0.0, 1.0]).unwrap(),
        NormSpec::power(2, 3.0).unwrap(),
    ]
}

fn domains(h: f64) -> Vec<ScalarField> {
    let ell = NormSpec::ellipse(2, &[2.0, 0.5, 0.5, 1.0]).unwrap();
    vec![
        ScalarField::disk(1.0, h).unwrap(),
        ScalarField::square(1.0, h).unwrap(),
        ScalarField::rectangle(1.4, 0.6, h).unwrap(),
        ScalarField::wulff(&ell, 0.6, h).unwrap(),
        ScalarField::annulus(0.25, 1.0, h).unwrap(),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(10))]

    #[test]
    fn converged_output_is_positive_normalized_and_monotone(
        which in 0usize..3,
        dom in 0usize..5,
        p in 1.5f64..3.0,
        t in 0.0f64..1.0,
        seed in any::<u64>(),
    ) {
        let q = 1.2 + t * (p - 1.2);
        let domain = &domains(1.0 / 24.0)[dom];
        let cfg = SolveConfig::new(p, q, norms()[which].clone()).with_seed(seed);
        let res = minimize(domain, &cfg).unwrap();
        prop_assert!(res.field.masked_values().iter().all(|&v| v > 0.0));
        prop_assert!((res.q_norm - 1.0).abs() < 1e-12);
        prop_assert!((res.field.weighted_norm(q) - 1.0).abs() < 1e-10);
        for w in res.quotient_history.windows(2) {
            prop_assert!(w[1] <= w[0] * (1.0 + 1e-12), "{} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn quotient_is_scale_invariant(which in 0usize..3, c in 0.01f64..100.0, p in 1.5f64..3.0, seed in any::<u64>()) {
        let dom = ScalarField::disk(1.0, 1.0 / 16.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let u = dom.map_values(|_, _| 0.0).unwrap();
        let vals: Vec<f64> = u.mask().iter().map(|&m| if m { rng.random_range(0.5..1.5) } else { 0.0 }).collect();
        let u = u.with_values(vals).unwrap();
        let cu = u.with_values(u.values().iter().map(|v| c * v).collect()).unwrap();
        let spec = &norms()[which];
        let a = rayleigh_quotient(&u, spec, p, 2.0f64.min(p)).unwrap();
        let b = rayleigh_quotient(&cu, spec, p, 2.0f64.min(p)).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * a);
    }
}

#[test]
fn weak_residual_is_scale_invariant() {
    let spec = NormSpec::euclidean(2).unwrap();
    let dom = ScalarField::disk(1.0, 1.0 / 32.0).unwrap();
    let res = minimize(&dom, &SolveConfig::new(2.5, 2.0, spec.clone())).unwrap();
    let a = weak_residual(&res.field, &spec, 2.5, 2.0).unwrap();
    let scaled = res.field.with_values(res.field.values().iter().map(|v| 7.3 * v).collect()).unwrap();
    let b = weak_residual(&scaled, &spec, 2.5, 2.0).unwrap();
    assert!((a - b).abs() <= 1e-10 * a.max(1e-300), "{a} vs {b}");
}

#[test]
fn eigenvalue_is_mesh_consistent() {
    for spec in norms() {
        for (p, q) in [(2.0, 2.0), (2.5, 2.0)] {
            let cfg = SolveConfig::new(p, q, spec.clone());
            let coarse = minimize(&ScalarField::square(1.0, 1.0 / 16.0).unwrap(), &cfg).unwrap();
            let fine = minimize(&ScalarField::square(1.0, 1.0 / 32.0).unwrap(), &cfg).unwrap();
            assert!(coarse.lambda >= fine.lambda * 0.97, "{} vs {}", coarse.lambda, fine.lambda);
        }
    }
}

#[test]
fn faber_krahn_precondition_on_test_domains() {
    for spec in norms() {
        for domain in domains(1.0 / 32.0) {
            let cfg = SolveConfig::new(2.0, 2.0, spec.clone());
            let lam = minimize(&domain, &cfg).unwrap().lambda;
            let star = minimize(&symmetrize(&domain, &spec).unwrap(), &cfg).unwrap().lambda;
            assert!(lam >= star * 0.98, "{} {lam} vs {star}", spec.variant_name());
        }
    }
}

#[test]
fn disconnected_domain_is_rejected() {
    let dom =
        ScalarField::from_predicate(1.0 / 16.0, [1.0, 0.5], |x, _| x.abs() > 0.3 && x.abs() < 0.9).unwrap();
    let cfg = SolveConfig::new(2.0, 2.0, NormSpec::euclidean(2).unwrap());
    assert!(minimize(&dom, &cfg).is_err());
}

#[test]
fn restarts_are_deterministic() {
    let dom = ScalarField::rectangle(1.0, 0.7, 1.0 / 24.0).unwrap();
    let cfg = SolveConfig::new(2.5, 2.0, NormSpec::euclidean(2).unwrap()).with_restarts(3);
    let a = minimize(&dom, &cfg).unwrap();
    let b = minimize(&dom, &cfg).unwrap();
    assert_eq!(a.lambda.to_bits(), b.lambda.to_bits());
    assert_eq!(a.field.values(), b.field.values());
    assert!(a.restart_spread <= 1e-3);
}
