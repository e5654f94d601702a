mod common;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use lineopt::bench::brute_force;
use lineopt::catalog::default_catalog;
use lineopt::evaluator::{CountingEvaluator, MemoEvaluator, SimEvaluator};
use lineopt::freestage::{reduce_space, DevMode, ReducedSpace};
use lineopt::solvers::{run_solver, RunOptions, SolverKind};
use lineopt::space::random_config;

#[test]
fn traces_are_exact_monotone_and_reproducible() {
    let c = default_catalog();
    let space = reduce_space(&c, 0.025, DevMode::Yes).unwrap();
    let eval = CountingEvaluator::new(SimEvaluator::new(&c));
    for kind in SolverKind::ALL {
        eval.reset();
        let a = run_solver(kind, &space, RunOptions::new(120, 11), &eval).unwrap();
        assert_eq!(eval.calls() as usize, a.len(), "{kind}");
        assert_eq!(a.len(), 120);
        assert!(a.entries.windows(2).all(|w| w[1].best_so_far <= w[0].best_so_far));
        assert!(a.entries.iter().enumerate().all(|(i, e)| e.eval_index == i + 1));
        let b = run_solver(kind, &space, RunOptions::new(120, 11), &eval).unwrap();
        assert_eq!(a.to_csv_string(), b.to_csv_string());
        let other = run_solver(kind, &space, RunOptions::new(120, 12), &eval).unwrap();
        assert_ne!(a.to_csv_string(), other.to_csv_string());
    }
}

#[test]
fn best_of_300_runs_finds_the_toy_optimum() {
    let c = default_catalog();
    let space = common::toy_space(&c);
    let eval = MemoEvaluator::new(SimEvaluator::new(&c));
    let optimum = brute_force(&space, &eval, 1_000).unwrap().cost;
    for kind in SolverKind::ALL {
        let best = (0..300)
            .map(|seed| run_solver(kind, &space, RunOptions::new(240, seed), &eval).unwrap().best_cost())
            .fold(f64::INFINITY, f64::min);
        assert_eq!(best, optimum, "{kind}");
    }
}

#[test]
fn random_configs_are_uniform_over_the_space() {
    let c = default_catalog();
    let space = common::toy_space(&c);
    let n = space.total_size() as usize;
    let draws = 100_000;
    let mut counts = vec![0usize; n];
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    for _ in 0..draws {
        let config = random_config(&space, &mut rng);
        let [i, j, k] = space.triple_of(&config).expect("draw inside the space");
        counts[((i * 8 + j) * 6 + k) as usize] += 1;
    }
    let expected = draws as f64 / n as f64;
    let stat: f64 = counts.iter().map(|&o| (o as f64 - expected).powi(2) / expected).sum();
    let p = 1.0 - ChiSquared::new((n - 1) as f64).unwrap().cdf(stat);
    assert!(p > 0.001, "chi2 {stat}, p {p}");
}

#[test]
fn single_state_space_always_draws_that_state() {
    let c = default_catalog();
    let base = reduce_space(&c, 0.05, DevMode::No).unwrap();
    let lists = std::array::from_fn(|k| vec![base.stage(k)[k + 1]]);
    let space = ReducedSpace::from_lists(0.05, DevMode::No, base.annual_target(), lists).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for _ in 0..20 {
        assert_eq!(space.triple_of(&random_config(&space, &mut rng)), Some([0, 0, 0]));
    }
    let trace = run_solver(SolverKind::Sa, &space, RunOptions::new(240, 0), &SimEvaluator::new(&c)).unwrap();
    assert_eq!(trace.len(), 1);
}
