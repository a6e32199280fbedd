//! Statistical and numerical checks against independent oracles.

mod common;

use common::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use wealth_exchange::exchange::{EconomyState, ModelParams, RedistributionPolicy};
use wealth_exchange::experiment::equilibration_check;
use wealth_exchange::probit::inverse_normal_cdf;
use wealth_exchange::stats::{fit_exponential, fit_lognormal_slope, EmpiricalCcdf, WealthHistogram};

#[test]
fn series_oracle_sanity() {
    assert_eq!(normal_cdf(0.0), 0.5);
    assert!((normal_cdf(1.0) - 0.841_344_746_068_542_9).abs() < 1e-15);
    assert!((normal_cdf(-3.0) - 0.001_349_898_031_630_094_6).abs() < 1e-15);
}

#[test]
fn probit_matches_bisection_at_975() {
    let z = bisect_quantile(0.975);
    assert!((z - 1.959964).abs() < 1e-6, "{z}");
    assert!((inverse_normal_cdf(0.975).unwrap() - z).abs() < 1e-9);
}

#[test]
fn probit_round_trip() {
    let mut worst = 0.0f64;
    let n = 20_000;
    for k in 0..=n {
        // log-spaced toward both ends of (1e-8, 1 - 1e-8)
        let u = k as f64 / n as f64;
        let tail = 10f64.powf(-8.0 + 7.7 * u.min(1.0 - u) * 2.0);
        let p = if u < 0.5 { tail } else { 1.0 - tail };
        let p = p.clamp(1e-8, 1.0 - 1e-8);
        let back = normal_cdf(inverse_normal_cdf(p).unwrap());
        worst = worst.max((back - p).abs());
    }
    assert!(worst <= 1e-9, "worst round-trip error {worst:e}");
}

#[test]
fn exponential_fit_recovers_temperature() {
    for (t, seed) in [(0.5, 1), (1.0, 2), (2.0, 3)] {
        let got = recovered_temperature(t, seed);
        assert!(relative_error(got, t) < 0.02, "T = {t}: got {got}");
    }
}

#[test]
fn exact_lognormal_ccdf_gives_inverse_sigma() {
    for sigma in [0.3, 0.5, 1.0, 2.0] {
        let pts: Vec<(f64, f64)> = (1..400)
            .map(|k| {
                let w = k as f64 * 0.025;
                (w, normal_cdf(-w.ln() / sigma))
            })
            .collect();
        let fit = fit_lognormal_slope(&EmpiricalCcdf::from_points(pts), 0.5).unwrap();
        assert!(relative_error(fit.slope, 1.0 / sigma) < 1e-6, "sigma = {sigma}: {}", fit.slope);
    }
}

#[test]
fn exact_exponential_ccdf_gives_temperature() {
    for t in [0.5, 1.0, 2.0] {
        let pts: Vec<(f64, f64)> = (0..200).map(|k| (k as f64 * 0.05 * t, (-0.05 * k as f64).exp())).collect();
        let fit = fit_exponential(&EmpiricalCcdf::from_points(pts)).unwrap();
        assert!(relative_error(fit.temperature(), t) < 1e-12);
    }
}

#[test]
fn lognormal_fit_recovers_inverse_sigma() {
    for (sigma, seed) in [(0.5, 4), (1.0, 5)] {
        let got = recovered_inverse_sigma(sigma, seed);
        assert!(relative_error(got, 1.0 / sigma) < 0.02, "sigma = {sigma}: got {got}");
    }
}

#[test]
fn first_bin_density_of_exponential() {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let exp = Exp::new(1.0).unwrap();
    let mut hist = WealthHistogram::new(0.05, 200).unwrap();
    for _ in 0..1_000_000 {
        hist.record(exp.sample(&mut rng)).unwrap();
    }
    let want = (1.0 - (-0.05f64).exp()) / 0.05;
    assert!(relative_error(hist.density(0), want) < 0.02);
}

#[test]
fn pair_sampling_is_uniform() {
    let n = 10;
    let params = ModelParams::new(n, n as f64, 0.0, RedistributionPolicy::UniformAll).unwrap();
    let mut state = EconomyState::new(params, 8).unwrap();
    let draws = 1_000_000;
    let mut counts = vec![0u64; n];
    for _ in 0..draws {
        let (i, j) = state.sample_pair();
        assert_ne!(i, j);
        counts[i] += 1;
        counts[j] += 1;
    }
    let p = 2.0 / n as f64;
    let sd = (draws as f64 * p * (1.0 - p)).sqrt();
    for (a, &c) in counts.iter().enumerate() {
        let z = (c as f64 - draws as f64 * p) / sd;
        assert!(z.abs() < 3.0, "agent {a}: z = {z}");
    }
}

#[test]
fn long_runs_conserve_wealth() {
    for policy in [RedistributionPolicy::UniformAll, RedistributionPolicy::PoorestFraction(0.2)] {
        let params = ModelParams::new(1000, 1000.0, 0.3, policy).unwrap();
        let mut state = EconomyState::new(params, 9).unwrap();
        state.run_trades(2_000_000);
        assert!(state.relative_drift() <= 1e-9, "{policy}: {}", state.relative_drift());
        assert!(state.wealth().iter().all(|&w| w >= 0.0));
    }
}

#[test]
fn gibbs_economy_equilibrates() {
    let params = ModelParams::new(1000, 1000.0, 0.0, RedistributionPolicy::UniformAll).unwrap();
    let mut state = EconomyState::new(params, 10).unwrap();
    state.run_sweeps(1000);
    let distance = equilibration_check(&mut state, 1000, 0.05, 200).unwrap();
    assert!(distance < 0.02, "block L1 distance {distance}");
    // regression pin from the first run with this seed
    assert!((distance - 0.01387).abs() < 1e-12, "block L1 distance moved to {distance}");
}
