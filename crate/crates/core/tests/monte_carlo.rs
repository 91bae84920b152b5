//! Monte Carlo properties of the engine, generators and experiment drivers
//! at desk scale.

use rayon::prelude::*;

use seqtest::analysis::{fit_coin_tail_rate, oracle_sample_size};
use seqtest::engine::{run_batch, run_sequential, Sidedness};
use seqtest::sim::rng::{cell_seed, trial_rng};
use seqtest::sim::{
    gen_coin_stream, gen_gaussian_pair_stream, run_moment_check, run_power_experiment, run_stopping_experiment,
    run_type1_experiment, stopping_times, ExperimentConfig, ExperimentKind, GaussianPairStream, SpecGrid,
};
use seqtest::thresholds::{sequential_threshold, ThresholdMode, ThresholdPolicy};
use seqtest::{Family, ProblemSpec, WalkState};

fn config(experiment: ExperimentKind, deltas: Vec<f64>, n_max: u64, trials: u64, seed: u64) -> ExperimentConfig {
    ExperimentConfig {
        experiment,
        family: None,
        spec: SpecGrid { deltas, d: 10, sigma: 1.0, rho: None },
        policy: ThresholdPolicy::practical(0.05),
        n_max,
        trials,
        alpha_grid: vec![],
        seed,
        output_path: None,
        sidedness: None,
        n_grid: None,
        rescale_bound: None,
        batch_policy: None,
    }
}

fn mean_var(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    let m = v.iter().sum::<f64>() / n;
    (m, v.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0))
}

#[test]
fn gaussian_stream_moments() {
    let null: Vec<f64> = gen_gaussian_pair_stream(10, 0.0, 1.0, 1).unwrap().take(100_000).map(|h| h.value).collect();
    let (m, v) = mean_var(&null);
    assert!(m.abs() <= 3.0 * (40.0f64 / 1e5).sqrt(), "mean {m}");
    assert!((v - 40.0).abs() <= 0.05 * 40.0, "var {v}");

    let alt: Vec<f64> = gen_gaussian_pair_stream(10, 1.0, 1.0, 2).unwrap().take(100_000).map(|h| h.value).collect();
    let (m, v) = mean_var(&alt);
    assert!((m - 1.0).abs() <= 3.0 * (44.0f64 / 1e5).sqrt(), "mean {m}");
    assert!((v - 44.0).abs() <= 0.05 * 44.0, "var {v}");

    let a: Vec<f64> = gen_gaussian_pair_stream(10, 0.5, 1.0, 3).unwrap().take(100).map(|h| h.value).collect();
    let b: Vec<f64> = gen_gaussian_pair_stream(10, 0.5, 1.0, 3).unwrap().take(100).map(|h| h.value).collect();
    assert_eq!(a, b);
}

#[test]
fn coin_stream_means() {
    assert!(gen_coin_stream(1.0, 0).unwrap().take(1000).all(|h| h.value == 1.0));
    for (rho, seed) in [(0.5, 4), (0.6, 5)] {
        let m = gen_coin_stream(rho, seed).unwrap().take(100_000).map(|h| h.value).sum::<f64>() / 1e5;
        let sd = (1.0 - (2.0 * rho - 1.0f64).powi(2)).sqrt();
        assert!((m - (2.0 * rho - 1.0)).abs() <= 3.0 * sd / 1e5f64.sqrt(), "rho {rho}: mean {m}");
    }
}

#[test]
fn biased_coin_is_detected() {
    let seed = cell_seed(11, 0);
    let rejected = (0..1000u64)
        .into_par_iter()
        .filter(|&trial| {
            let stream = seqtest::sim::CoinStream::new(0.6, trial_rng(seed, trial)).unwrap().map(Ok);
            run_sequential(stream, ThresholdPolicy::practical(0.05), 100_000, Sidedness::OneSidedUpper)
                .unwrap()
                .rejected()
        })
        .count();
    assert!(rejected >= 950, "{rejected} / 1000");
}

#[test]
fn hoeffding_batch_controls_type1() {
    let seed = cell_seed(12, 0);
    let policy = ThresholdPolicy::new(ThresholdMode::BatchHoeffding, 0.05);
    let trials = 10_000u64;
    let rejected = (0..trials)
        .into_par_iter()
        .filter(|&trial| {
            let stream = seqtest::sim::CoinStream::new(0.5, trial_rng(seed, trial)).unwrap().map(Ok);
            run_batch(stream, 10_000, policy, Sidedness::OneSidedUpper).unwrap().rejected()
        })
        .count();
    let frac = rejected as f64 / trials as f64;
    assert!(frac <= 0.05 + 2.0 * (0.05f64 * 0.95 / 1e4).sqrt(), "{frac}");
}

#[test]
fn slightly_larger_constant_halves_violations() {
    let mut cfg = config(ExperimentKind::Type1Coin, vec![0.0], 10_000, 10_000, 13);
    cfg.policy = ThresholdPolicy::practical(0.05).with_c(2.2);
    cfg.alpha_grid = vec![0.01, 0.05, 0.1];
    for (alpha, frac) in run_type1_experiment(&cfg).unwrap().terminal {
        assert!(frac <= alpha / 2.0, "alpha {alpha}: {frac}");
    }
}

#[test]
fn type1_gaussian_is_controlled() {
    let mut cfg = config(ExperimentKind::Type1Gaussian, vec![0.0], 5000, 1000, 14);
    cfg.alpha_grid = vec![0.05, 0.1];
    for (alpha, frac) in run_type1_experiment(&cfg).unwrap().terminal {
        assert!(frac <= alpha + 2.0 * (alpha * (1.0 - alpha) / 1000.0).sqrt(), "alpha {alpha}: {frac}");
    }
}

#[test]
fn power_experiment_properties() {
    let mut cfg = config(ExperimentKind::PowerCurve, vec![0.0, 0.5, 1.0], 4000, 1000, 15);
    cfg.n_grid = Some(vec![250, 1000, 4000]);
    let rows = run_power_experiment(&cfg).unwrap();
    for r in &rows {
        let p = r.batch_power_pred;
        let se = (p * (1.0 - p) / cfg.trials as f64).sqrt();
        if r.delta == 0.0 {
            let se0 = (0.05f64 * 0.95 / cfg.trials as f64).sqrt();
            assert!((r.batch_power_emp - 0.05).abs() <= 2.0 * se0, "{r:?}");
            assert!(r.seq_power <= 0.05 + 2.0 * se0, "{r:?}");
        }
        let batch_se = (r.batch_power_emp * (1.0 - r.batch_power_emp) / cfg.trials as f64).sqrt();
        assert!(r.seq_power <= r.batch_power_emp + 2.0 * batch_se.max(se), "{r:?}");
    }
    for cell in rows.chunks(3) {
        assert!(cell.windows(2).all(|w| w[0].seq_power <= w[1].seq_power));
    }
}

#[test]
fn null_moment_band() {
    let cfg = config(ExperimentKind::MomentCheck, vec![0.0], 100, 10_000, 16);
    let r = run_moment_check(&cfg).unwrap()[0];
    assert!(r.mean_z <= 3.0, "{r:?}");
}

#[test]
fn median_stopping_within_envelope_of_oracle() {
    let cfg = config(ExperimentKind::StoppingDistribution, vec![2.5, 1.6, 1.0, 0.64], 100_000, 300, 17);
    let r = run_stopping_experiment(&cfg).unwrap();
    for row in &r.rows {
        let spec = ProblemSpec::isotropic(10, 1.0, row.delta).unwrap();
        let n_star = oracle_sample_size(&spec, 0.05, 0.5).unwrap() as f64;
        assert!(row.q50 <= 4.0 * n_star, "δ {}: median {} vs n* {n_star}", row.delta, row.q50);
    }
}

#[test]
fn coin_tail_rate_scales_with_delta_squared() {
    let mut cfg = config(ExperimentKind::StoppingDistribution, vec![0.1], 200_000, 2000, 18);
    cfg.family = Some(Family::Coin);
    let rates: Vec<f64> = [0.1, 0.14, 0.2]
        .iter()
        .enumerate()
        .map(|(cell, &delta)| {
            let taus: Vec<u64> = stopping_times(&cfg, delta, cell as u64, Sidedness::OneSidedUpper)
                .unwrap()
                .into_iter()
                .map(|(t, _)| t)
                .collect();
            fit_coin_tail_rate(&taus, delta, 50).unwrap()
        })
        .collect();
    let (lo, hi) = rates.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &k| (lo.min(k), hi.max(k)));
    assert!(lo > 0.0 && hi / lo <= 2.0, "rates {rates:?}");
}

#[test]
fn theoretical_threshold_dominates_oracle_under_null() {
    let alpha = 0.05;
    let (d, n_max, trials) = (10, 2000usize, 200u64);
    let v0 = 4.0 * d as f64;
    let theoretical = ThresholdPolicy::theoretical(alpha);
    let oracle = ThresholdPolicy::oracle(alpha, v0);
    let seed = cell_seed(19, 0);
    let per_trial: Vec<Vec<bool>> = (0..trials)
        .into_par_iter()
        .map(|trial| {
            let mut walk = WalkState::new();
            GaussianPairStream::new(d, 0.0, 1.0, trial_rng(seed, trial))
                .unwrap()
                .take(n_max)
                .map(|h| {
                    walk.push(h.value);
                    sequential_threshold(&walk, &theoretical).unwrap() >= sequential_threshold(&walk, &oracle).unwrap()
                })
                .collect()
        })
        .collect();
    for n in 0..n_max {
        let ok = per_trial.iter().filter(|t| t[n]).count();
        assert!(ok as f64 >= 0.95 * trials as f64, "n = {}: {ok}", n + 1);
    }
}
