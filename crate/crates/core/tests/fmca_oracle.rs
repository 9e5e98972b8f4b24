mod common;

use cfss::fmca::{build_design, solve_fmca};
use cfss::simulate::{simulate_dataset, Scenario};
use cfss::{fixtures, BasisSpec, ScenarioSpec};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn production_eigenvalues(ds: &cfss::SpatialDataset, spec: BasisSpec) -> Vec<f64> {
    let basis = spec.build(ds.horizon()).unwrap();
    let design = build_design(ds, &basis).unwrap();
    solve_fmca(&design, 0.9).unwrap().eigenvalues
}

#[test]
fn tiny_instances_match_closed_form_reduction() {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let mut checked = 0;
    for _ in 0..200 {
        let n = rand::Rng::gen_range(&mut rng, 3..=5);
        let k = rand::Rng::gen_range(&mut rng, 2..=n.min(3));
        let j = rand::Rng::gen_range(&mut rng, 2..=3);
        let t = rand::Rng::gen_range(&mut rng, 1.0..20.0);
        let ds = common::random_dataset(&mut rng, k, n, j, t);
        for (linear, spec) in [(true, BasisSpec::bspline(2, 1)), (false, BasisSpec::bspline(1, 0))] {
            let oracle = common::oracle_eigenvalues(&ds, linear);
            if oracle.is_empty() {
                continue;
            }
            let prod = production_eigenvalues(&ds, spec);
            assert_eq!(prod.len(), oracle.len(), "{prod:?} vs {oracle:?}");
            for (a, b) in prod.iter().zip(&oracle) {
                assert!((a - b).abs() <= 1e-10, "{a} vs {b}");
            }
            checked += 1;
        }
    }
    assert!(checked > 300);
}

#[test]
fn simulated_scores_are_centered_and_uncorrelated() {
    let locs = fixtures::departements();
    for (scenario, strength) in [(Scenario::I, 0.0), (Scenario::I, 0.75), (Scenario::II, 0.3), (Scenario::III, 0.5)] {
        let spec = ScenarioSpec::new(scenario, strength, fixtures::cluster_idf());
        let ds = simulate_dataset(&locs, &spec, 9).unwrap();
        for size in [10, 20] {
            let basis = BasisSpec::bspline(size, 3).build(ds.horizon()).unwrap();
            let design = build_design(&ds, &basis).unwrap();
            let enc = solve_fmca(&design, 0.9).unwrap();
            let c = common::check_encoding(&enc.scores, &enc.eigenvalues, ds.horizon());
            assert!(c.mean_ratio < 1e-8, "{c:?}");
            assert!(c.offdiag_rel < 1e-6, "{c:?}");
            assert!(c.diag_rel < 1e-6, "{c:?}");
            assert!(c.lambda_over_t < 1.0, "{c:?}");
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn eigenvalues_bounded_by_horizon(seed in any::<u64>(), n in 4usize..30, j in 2usize..4) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let t = 5.0;
        let ds = common::random_dataset(&mut rng, 3, n, j, t);
        let basis = BasisSpec::bspline(6, 2).build(t).unwrap();
        let design = build_design(&ds, &basis).unwrap();
        match solve_fmca(&design, 0.9) {
            Ok(enc) => {
                prop_assert!(enc.eigenvalues.iter().all(|&l| l > 0.0 && l <= t * (1.0 + 1e-9)));
                prop_assert!(enc.eigenvalues.windows(2).all(|w| w[0] >= w[1]));
                let c = common::check_encoding(&enc.scores, &enc.eigenvalues, t);
                prop_assert!(c.mean_ratio < 1e-8);
                prop_assert!(c.offdiag_rel < 1e-6);
            }
            Err(cfss::Error::NoVariation) => {}
            Err(e) => prop_assert!(false, "{e}"),
        }
    }
}
