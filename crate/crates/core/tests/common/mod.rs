//! Independent oracles shared by the integration suites.
#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, LogNormal};
use wealth_exchange::exchange::{EconomyState, ModelParams, RedistributionPolicy};
use wealth_exchange::rng::{rng_from_seed, SimRng};
use wealth_exchange::stats::{empirical_ccdf, fit_exponential, fit_lognormal_slope, modal_wealth, WealthHistogram};

/// Standard normal CDF from the everywhere-convergent positive series
/// `erf(x) = 2/sqrt(pi) * exp(-x^2) * sum_n 2^n x^(2n+1) / (1*3*...*(2n+1))`.
/// All terms are positive, so there is no cancellation inside the sum.
pub fn normal_cdf(z: f64) -> f64 {
    let x = z.abs() / std::f64::consts::SQRT_2;
    let mut term = x;
    let mut sum = x;
    let mut n = 0.0;
    while term > sum * 1e-17 {
        n += 1.0;
        term *= 2.0 * x * x / (2.0 * n + 1.0);
        sum += term;
    }
    let erf = 2.0 / std::f64::consts::PI.sqrt() * (-x * x).exp() * sum;
    if z >= 0.0 {
        0.5 + 0.5 * erf
    } else {
        0.5 - 0.5 * erf
    }
}

/// Root of `normal_cdf(z) = p` by bisection on [-40, 40].
pub fn bisect_quantile(p: f64) -> f64 {
    let (mut lo, mut hi) = (-40.0f64, 40.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if normal_cdf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

pub const SYNTHETIC_SAMPLES: usize = 1_000_000;

/// Histogram of `SYNTHETIC_SAMPLES` draws, binned at 5% of the mean
/// with 200 bins, as the simulator bins wealth.
fn synthetic_histogram<D: Distribution<f64>>(dist: D, mean: f64, seed: u64) -> WealthHistogram {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut hist = WealthHistogram::new(0.05 * mean, 200).unwrap();
    for _ in 0..SYNTHETIC_SAMPLES {
        hist.record(dist.sample(&mut rng)).unwrap();
    }
    hist
}

/// Temperature recovered by `fit_exponential` from exponential samples.
pub fn recovered_temperature(t: f64, seed: u64) -> f64 {
    let hist = synthetic_histogram(Exp::new(1.0 / t).unwrap(), t, seed);
    fit_exponential(&empirical_ccdf(&hist).unwrap()).unwrap().temperature()
}

/// `1 / sigma` recovered by `fit_lognormal_slope` from `LogNormal(0, sigma)`.
pub fn recovered_inverse_sigma(sigma: f64, seed: u64) -> f64 {
    let mean = (0.5 * sigma * sigma).exp();
    let hist = synthetic_histogram(LogNormal::new(0.0, sigma).unwrap(), mean, seed);
    let ccdf = empirical_ccdf(&hist).unwrap();
    fit_lognormal_slope(&ccdf, modal_wealth(&hist).unwrap()).unwrap().slope
}

pub fn relative_error(got: f64, want: f64) -> f64 {
    (got - want).abs() / want.abs()
}

/// Plain trade loop: full sort for the beneficiaries every trade, same
/// draw order as the engine.
pub struct Reference {
    pub wealth: Vec<f64>,
    tax_rate: f64,
    policy: RedistributionPolicy,
    rng: SimRng,
}

impl Reference {
    pub fn new(params: &ModelParams, seed: u64) -> Self {
        Self {
            wealth: vec![params.total_wealth / params.n_agents as f64; params.n_agents],
            tax_rate: params.tax_rate,
            policy: params.policy,
            rng: rng_from_seed(seed),
        }
    }

    /// Full sort every trade, ties by index.
    fn beneficiaries(&self) -> Vec<usize> {
        let n = self.wealth.len();
        let k = match self.policy {
            RedistributionPolicy::UniformAll => n,
            RedistributionPolicy::PoorestFraction(q) => ((q * n as f64).floor() as usize).clamp(1, n),
        };
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| self.wealth[a].partial_cmp(&self.wealth[b]).unwrap().then(a.cmp(&b)));
        let mut s = order[..k].to_vec();
        s.sort();
        s
    }

    pub fn step(&mut self) -> (usize, usize, Vec<usize>) {
        let n = self.wealth.len();
        let i = self.rng.random_range(0..n);
        let mut j = self.rng.random_range(0..n - 1);
        if j >= i {
            j += 1;
        }
        let eps: f64 = self.rng.random();
        let total = self.wealth[i] + self.wealth[j];
        self.wealth[i] = (1.0 - self.tax_rate) * eps * total;
        self.wealth[j] = (1.0 - self.tax_rate) * (1.0 - eps) * total;
        let pool = self.tax_rate * total;
        let s = self.beneficiaries();
        let share = pool / s.len() as f64;
        for &r in &s {
            self.wealth[r] += share;
        }
        (i, j, s)
    }
}

/// First trade at which the engine and the reference disagree on the
/// pair, the beneficiaries or any bit of the wealth vector, on an economy
/// of ten agents.
pub fn lockstep_divergence(
    tax_rate: f64,
    policy: RedistributionPolicy,
    seed: u64,
    trades: usize,
) -> Result<(), usize> {
    let params = ModelParams::new(10, 10.0, tax_rate, policy).unwrap();
    let mut engine = EconomyState::new(params, seed).unwrap();
    let mut reference = Reference::new(&params, seed);
    for t in 0..trades {
        let outcome = engine.trade_step();
        let (i, j, s) = reference.step();
        let same = (outcome.i, outcome.j) == (i, j)
            && outcome.beneficiaries == s
            && engine
                .wealth()
                .iter()
                .zip(&reference.wealth)
                .all(|(a, b)| a.to_bits() == b.to_bits());
        if !same {
            return Err(t);
        }
    }
    Ok(())
}
