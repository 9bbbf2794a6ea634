mod common;

use common::{full_pgd, rel_diff, rng, synthetic, uniform_instance};
use interprox::{
    fit_path, fit_single, lambda_max, objective, Coefficients, DesignData, PathConfig, PenaltyConfig, Setting,
    SolverOptions,
};

#[test]
fn path_matches_cold_oracle() {
    let data = synthetic(Setting::Hierarchical, 100, 30, 4, 21);
    let config = PathConfig {
        n_lambda: 5,
        lambda_min_ratio: 0.1,
        ..PathConfig::default()
    };
    let path = fit_path(&data, &config, None).unwrap();
    assert_eq!(path.entries.len(), 5);
    for e in &path.entries {
        let pen = e.penalty();
        let oracle = full_pgd(&data, &pen, None, 1e-9, 200_000);
        let ours = objective(&data, &e.coef, &pen).unwrap();
        assert!(rel_diff(ours, oracle.objective) < 1e-5, "lambda1 {}: {ours} vs {}", e.lambda1, oracle.objective);
    }
}

#[test]
fn lambda_max_brackets_the_zero_solution() {
    let mut r = rng(2);
    for _ in 0..10 {
        let data = uniform_instance(&mut r, 30, 5);
        for ratio in [2.0, 3.0] {
            let lmax = lambda_max(&data, ratio).unwrap();
            let fit = |f: f64| {
                let pen = PenaltyConfig::new(f * lmax, ratio * f * lmax).unwrap();
                fit_single(&data, &pen, None, SolverOptions::default()).unwrap().coef
            };
            assert!(fit(1.0).support(0.0).is_empty());
            assert!(!fit(0.99).support(0.0).is_empty());
        }
    }
}

#[test]
fn zero_is_optimal_at_lambda_max_without_pair_penalty() {
    let mut r = rng(3);
    for _ in 0..10 {
        let data = uniform_instance(&mut r, 30, 5);
        let lmax = lambda_max(&data, 0.0).unwrap();
        let pen = PenaltyConfig::new(lmax, 0.0).unwrap();
        let oracle = full_pgd(&data, &pen, None, 1e-12, 100_000);
        let zero = objective(&data, &Coefficients::zeros(5), &pen).unwrap();
        assert!(zero <= oracle.objective * (1.0 + 1e-12));
    }
}

#[test]
fn warm_and_cold_agree() {
    let data = synthetic(Setting::MainOnly, 80, 25, 5, 3);
    let config = PathConfig {
        n_lambda: 12,
        ..PathConfig::default()
    };
    let path = fit_path(&data, &config, None).unwrap();
    for e in &path.entries {
        let pen = e.penalty();
        let cold = fit_single(&data, &pen, None, SolverOptions::default()).unwrap();
        let a = objective(&data, &e.coef, &pen).unwrap();
        let b = objective(&data, &cold.coef, &pen).unwrap();
        assert!(rel_diff(a, b) < 1e-5, "{a} vs {b}");
    }
}

#[test]
fn constant_response_gives_single_entry() {
    let mut r = rng(4);
    let base = uniform_instance(&mut r, 20, 4);
    let data = DesignData::prepared(20, 4, base.x().to_vec(), vec![3.0; 20], false).unwrap();
    let path = fit_path(&data, &PathConfig::default(), None).unwrap();
    assert_eq!(path.entries.len(), 1);
    assert_eq!(path.entries[0].lambda1, 0.0);
    assert!(path.entries[0].coef.support(0.0).is_empty());
    assert_eq!(path.entries[0].coef.intercept, 3.0);
}

#[test]
fn thread_count_does_not_change_results() {
    let data = synthetic(Setting::Hierarchical, 120, 40, 4, 5);
    let config = PathConfig {
        n_lambda: 15,
        ..PathConfig::default()
    };
    let one = fit_path(&data, &config, Some(1)).unwrap();
    let two = fit_path(&data, &config, Some(2)).unwrap();
    let coefs = |p: &interprox::FitPath| p.entries.iter().map(|e| e.coef.clone()).collect::<Vec<Coefficients>>();
    assert_eq!(coefs(&one), coefs(&two));
}

#[test]
fn max_support_stops_early() {
    let data = synthetic(Setting::Hierarchical, 100, 30, 5, 6);
    let config = PathConfig {
        max_support: Some(3),
        ..PathConfig::default()
    };
    let path = fit_path(&data, &config, None).unwrap();
    assert!(path.stopped_early);
    assert!(path.entries.last().unwrap().support_len() > 3);
    assert!(path.entries[..path.entries.len() - 1].iter().all(|e| e.support_len() <= 3));
}
