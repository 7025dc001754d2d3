//! Kolmogorov–Smirnov tests on integer samples.

use rand::distr::Distribution;
use rand_chacha::ChaCha8Rng;
use rand_distr::Binomial;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use super::EvalError;
use crate::parallel::map_range;
use crate::rng::stream;

pub const DEFAULT_BOOTSTRAP: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Reference {
    /// Poisson with the sample mean as its rate.
    FittedPoisson,
    /// Empirical distribution of a second sample.
    Empirical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum PValueMethod {
    ParametricBootstrap { replicates: usize },
    Asymptotic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KSResult {
    pub statistic: f64,
    pub p_value: f64,
    pub n: usize,
    /// Size of the second sample for two-sample tests.
    pub n_reference: Option<usize>,
    pub reference: Reference,
    pub method: PValueMethod,
}

impl KSResult {
    pub fn rejects(&self, alpha: f64) -> bool {
        self.p_value < alpha
    }
}

/// Counts per value `0..=max`.
fn histogram(sample: &[u64]) -> Vec<u64> {
    let max = sample.iter().copied().max().unwrap_or(0) as usize;
    let mut h = vec![0u64; max + 1];
    for &x in sample {
        h[x as usize] += 1;
    }
    h
}

fn poisson_ln_pmf(k: u64, rate: f64) -> f64 {
    -rate + k as f64 * rate.ln() - ln_gamma(k as f64 + 1.0)
}

/// `sup_x |F_n(x) - F(x)|` against Poisson(`rate`). Both CDFs are step functions
/// jumping at integers, and past the sample maximum `|1 - F|` only shrinks, so
/// the supremum is attained on `0..=max`.
fn poisson_statistic(hist: &[u64], n: u64, rate: f64) -> f64 {
    if rate <= 0.0 {
        // Poisson(0) is a point mass at 0, as is any sample with mean 0.
        return 0.0;
    }
    let mut cum_n = 0u64;
    let mut cum_p = 0.0f64;
    let mut d = 0.0f64;
    for (k, &c) in hist.iter().enumerate() {
        cum_n += c;
        cum_p += poisson_ln_pmf(k as u64, rate).exp();
        d = d.max((cum_n as f64 / n as f64 - cum_p.min(1.0)).abs());
    }
    d
}

/// Histogram of `n` iid Poisson(`rate`) draws via sequential conditional binomials.
fn poisson_histogram(n: u64, rate: f64, rng: &mut ChaCha8Rng) -> Vec<u64> {
    let mut hist = Vec::new();
    let mut remaining = n;
    let mut mass_left = 1.0f64;
    let mut k = 0u64;
    while remaining > 0 {
        let p = poisson_ln_pmf(k, rate).exp();
        let conditional = if mass_left <= 1e-300 { 1.0 } else { (p / mass_left).clamp(0.0, 1.0) };
        let c = if conditional >= 1.0 {
            remaining
        } else {
            Binomial::new(remaining, conditional)
                .expect("probability in [0, 1)")
                .sample(rng)
        };
        hist.push(c);
        remaining -= c;
        mass_left -= p;
        k += 1;
        // deep in the tail the residual mass is pure rounding error
        if mass_left < 1e-12 && k as f64 > rate {
            hist.push(remaining);
            remaining = 0;
        }
    }
    hist
}

/// One-sample KS against a Poisson whose rate is the sample mean. The p-value
/// comes from a parametric bootstrap that re-estimates the rate on every
/// resample: `(1 + #{D* >= D}) / (B + 1)`.
pub fn ks_poisson(sample: &[u64], bootstrap_n: usize, seed: u64) -> Result<KSResult, EvalError> {
    if sample.is_empty() {
        return Err(EvalError::EmptySample);
    }
    let n = sample.len() as u64;
    let rate = sample.iter().sum::<u64>() as f64 / n as f64;
    let hist = histogram(sample);
    let statistic = poisson_statistic(&hist, n, rate);
    if rate == 0.0 {
        return Ok(KSResult {
            statistic,
            p_value: 1.0,
            n: sample.len(),
            n_reference: None,
            reference: Reference::FittedPoisson,
            method: PValueMethod::ParametricBootstrap {
                replicates: bootstrap_n,
            },
        });
    }

    let exceed: usize = map_range(0..bootstrap_n, |b| {
        let mut rng = stream(seed, b as u64);
        let resample = poisson_histogram(n, rate, &mut rng);
        let total: u64 = resample.iter().enumerate().map(|(k, &c)| k as u64 * c).sum();
        let d = poisson_statistic(&resample, n, total as f64 / n as f64);
        usize::from(d >= statistic - 1e-12)
    })
    .into_iter()
    .sum();
    Ok(KSResult {
        statistic,
        p_value: (1 + exceed) as f64 / (bootstrap_n + 1) as f64,
        n: sample.len(),
        n_reference: None,
        reference: Reference::FittedPoisson,
        method: PValueMethod::ParametricBootstrap {
            replicates: bootstrap_n,
        },
    })
}

/// Two-sample KS with the asymptotic Kolmogorov p-value.
pub fn ks_two_sample(a: &[u64], b: &[u64]) -> Result<KSResult, EvalError> {
    if a.is_empty() || b.is_empty() {
        return Err(EvalError::EmptySample);
    }
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_unstable();
    b.sort_unstable();
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut ia, mut ib) = (0usize, 0usize);
    let mut d = 0.0f64;
    while ia < a.len() && ib < b.len() {
        let x = a[ia].min(b[ib]);
        while ia < a.len() && a[ia] == x {
            ia += 1;
        }
        while ib < b.len() && b[ib] == x {
            ib += 1;
        }
        d = d.max((ia as f64 / na - ib as f64 / nb).abs());
    }
    let en = (na * nb / (na + nb)).sqrt();
    let p_value = if d == 0.0 {
        1.0
    } else {
        kolmogorov_sf((en + 0.12 + 0.11 / en) * d)
    };
    Ok(KSResult {
        statistic: d,
        p_value,
        n: a.len(),
        n_reference: Some(b.len()),
        reference: Reference::Empirical,
        method: PValueMethod::Asymptotic,
    })
}

/// Survival function of the Kolmogorov distribution.
pub(crate) fn kolmogorov_sf(x: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    if x < 1.18 {
        // Jacobi-theta form converges fast for small x
        let y = (-std::f64::consts::PI.powi(2) / (8.0 * x * x)).exp();
        let mut s = 0.0;
        let mut k = 1i32;
        loop {
            let term = y.powi(k * k);
            s += term;
            if term < 1e-17 {
                break;
            }
            k += 2;
        }
        (1.0 - (2.0 * std::f64::consts::PI).sqrt() / x * s).clamp(0.0, 1.0)
    } else {
        let mut s = 0.0;
        for k in 1..=100 {
            let term = (-2.0 * (k * k) as f64 * x * x).exp();
            s += if k % 2 == 1 { term } else { -term };
            if term < 1e-17 {
                break;
            }
        }
        (2.0 * s).clamp(0.0, 1.0)
    }
}
