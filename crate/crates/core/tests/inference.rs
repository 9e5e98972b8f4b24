mod common;

use cfss::nalgebra::DMatrix;
use cfss::rank::{tyler_ranks, TylerOptions};
use cfss::scan::{dwass_pvalue, enumerate_windows, find_mlc, permutation_pvalue};
use cfss::Location;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

fn line(k: usize) -> Vec<Location> {
    (0..k).map(|i| Location::new(format!("s{i}"), i as f64, 0.0)).collect()
}

#[test]
fn p_value_is_the_dwass_ratio_of_recorded_nulls() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for trial in 0..20 {
        let k = 6;
        let n = 30;
        let location_of: Vec<usize> = (0..n).map(|i| i % k).collect();
        let z = DMatrix::from_fn(n, 2, |_, _| StandardNormal.sample(&mut rng));
        let ranks = tyler_ranks(&z, TylerOptions::default()).unwrap();
        let windows = enumerate_windows(&common::random_locations(&mut rng, k), &[5; 6]);
        let p = 19 + 20 * trial;
        let out = permutation_pvalue(&ranks, &windows, &location_of, p, trial as u64).unwrap();
        let (_, observed) = find_mlc(&ranks, &windows, &location_of).unwrap();
        let exceed = out.null_statistics.iter().filter(|&&s| s >= observed).count();
        assert_eq!(out.null_statistics.len(), p);
        assert_eq!(out.exceedances, exceed);
        assert_eq!(out.p_value, (1 + exceed) as f64 / (1 + p) as f64);
    }
}

#[test]
fn separated_cluster_gives_smallest_p_value() {
    let k = 10;
    let per = 10;
    let n = k * per;
    let location_of: Vec<usize> = (0..n).map(|i| i / per).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let z = DMatrix::from_fn(n, 2, |i, c| {
        let base: f64 = StandardNormal.sample(&mut rng);
        if location_of[i] < 3 && c == 0 {
            base + 20.0
        } else {
            base
        }
    });
    let ranks = tyler_ranks(&z, TylerOptions::default()).unwrap();
    let windows = enumerate_windows(&line(k), &vec![per; k]);
    let out = permutation_pvalue(&ranks, &windows, &location_of, 999, 5).unwrap();
    assert_eq!(out.exceedances, 0);
    assert_eq!(out.p_value, 0.001);
    assert_eq!(dwass_pvalue(0, 999), 0.001);
}

#[test]
fn null_p_values_are_super_uniform() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    let trials = 300;
    let mut p_values = Vec::with_capacity(trials);
    for t in 0..trials {
        let k = 8;
        let n = 40;
        let location_of: Vec<usize> = (0..n).map(|i| i % k).collect();
        let z = DMatrix::from_fn(n, 2, |_, _| StandardNormal.sample(&mut rng));
        let ranks = tyler_ranks(&z, TylerOptions::default()).unwrap();
        let locs = common::random_locations(&mut rng, k);
        let windows = enumerate_windows(&locs, &[5; 8]);
        p_values.push(permutation_pvalue(&ranks, &windows, &location_of, 99, t as u64).unwrap().p_value);
    }
    for alpha in [0.05, 0.1, 0.2] {
        let rate = p_values.iter().filter(|&&p| p <= alpha).count() as f64 / trials as f64;
        let band = 3.0 * (alpha * (1.0 - alpha) / trials as f64).sqrt();
        assert!(rate <= alpha + band, "alpha {alpha}: rate {rate}");
    }
}

#[test]
fn permutations_do_not_depend_on_thread_count() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let n = 50;
    let location_of: Vec<usize> = (0..n).map(|i| i % 5).collect();
    let z = DMatrix::from_fn(n, 3, |_, _| rng.gen_range(-1.0..1.0));
    let ranks = tyler_ranks(&z, TylerOptions::default()).unwrap();
    let windows = enumerate_windows(&line(5), &[10; 5]);
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| permutation_pvalue(&ranks, &windows, &location_of, 200, 77).unwrap())
    };
    let a = run(1);
    let b = run(4);
    assert_eq!(a.null_statistics, b.null_statistics);
    assert_eq!(a.p_value, b.p_value);
}
