//! Synthetic corpora drawn from a known creativity surface.
//!
//! Each researcher receives an initial history at `T1`, then at every step `j`
//! publishes a Poisson(`λ(h, j)`) number of papers and moves to the cohort of
//! their new total. Histories beyond `I` read row `I`.

use std::io::Write;

use rand::distr::Distribution;
use rand_distr::{Gamma, Poisson, Zeta, Zipf};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::PublicationCorpus;
use crate::creativity::{CreativityModel, ModelError, ModelParams};
use crate::matrix::Grid;
use crate::parallel::map_range;
use crate::rng::{stream, substream};

#[derive(Debug, Error)]
pub enum OracleError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("invalid generator: {0}")]
    Invalid(String),
    #[error("population {0} is too small for tail fitting (need at least 1000)")]
    PopulationTooSmall(usize),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// The true rate surface `λ(i, j)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum Surface {
    /// `e^a · i^ν · e^{β (j - 1)}`
    PowerLaw { a: f64, nu: f64, beta: f64 },
    /// `e^{α_i + β_i (j - 1)}` per cohort; the last row repeats above its length.
    Rows { alpha: Vec<f64>, beta: Vec<f64> },
    Matrix { lambda: Grid<f64> },
}

impl Surface {
    pub fn flat(rate: f64) -> Self {
        Surface::PowerLaw {
            a: rate.ln(),
            nu: 0.0,
            beta: 0.0,
        }
    }

    pub fn rate(&self, i: usize, j: usize) -> f64 {
        let t = (j - 1) as f64;
        match self {
            Surface::PowerLaw { a, nu, beta } => (a + nu * (i as f64).ln() + beta * t).exp(),
            Surface::Rows { alpha, beta } => {
                let k = i.min(alpha.len()) - 1;
                (alpha[k] + beta[k] * t).exp()
            }
            Surface::Matrix { lambda } => *lambda.get(i.min(lambda.rows()), j),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum InitialHistory {
    /// Discrete power law `p(h) ∝ h^{-exponent}` on `1..=max`.
    Lotka { exponent: f64, max: u64 },
    Fixed { h: u64 },
    /// Uniform on `min..=max`.
    Uniform { min: u64, max: u64 },
}

/// Replaces the Poisson draws of one cohort by a Poisson–Gamma mixture with
/// the same mean, variance `λ + λ²/shape`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HeavyTail {
    pub cohort: u64,
    pub shape: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorSpec {
    pub params: ModelParams,
    pub surface: Surface,
    pub population: usize,
    pub initial: InitialHistory,
    #[serde(default)]
    pub heavy_tail: Option<HeavyTail>,
    pub seed: u64,
}

impl GeneratorSpec {
    /// Lotka-distributed initial histories (exponent 2) on `1..=K`.
    pub fn new(params: ModelParams, surface: Surface, population: usize, seed: u64) -> Self {
        let max = params.train_cohorts as u64;
        Self {
            params,
            surface,
            population,
            initial: InitialHistory::Lotka { exponent: 2.0, max },
            heavy_tail: None,
            seed,
        }
    }

    pub fn validate(&self) -> Result<(), OracleError> {
        self.params.validate()?;
        let invalid = |m: &str| Err(OracleError::Invalid(m.to_string()));
        match &self.surface {
            Surface::Rows { alpha, beta } if alpha.is_empty() || alpha.len() != beta.len() => {
                return invalid("row coefficients must be non-empty and of equal length");
            }
            Surface::Matrix { lambda } if lambda.rows() == 0 || lambda.cols() != self.params.steps => {
                return invalid("rate matrix needs J columns");
            }
            _ => {}
        }
        match self.initial {
            InitialHistory::Lotka { exponent, max } if exponent.is_nan() || exponent <= 0.0 || max == 0 => {
                return invalid("Lotka initial history needs exponent > 0 and max >= 1");
            }
            InitialHistory::Uniform { min, max } if min > max => return invalid("uniform initial history needs min <= max"),
            _ => {}
        }
        if let Some(h) = self.heavy_tail {
            if !(h.shape > 0.0 && h.shape.is_finite()) {
                return invalid("heavy-tail shape must be positive");
            }
        }
        let truth = self.true_lambda();
        if let Some((i, j, &value)) = truth.cells().find(|(_, _, v)| !(**v > 0.0 && v.is_finite())) {
            return Err(ModelError::NonPositiveRate { i, j, value }.into());
        }
        Ok(())
    }

    /// The surface on the `I × J` grid.
    pub fn true_lambda(&self) -> Grid<f64> {
        Grid::from_fn(self.params.max_cohort, self.params.steps, |i, j| self.surface.rate(i, j))
    }

    /// The generating surface as a model, for model-consistent predictions.
    pub fn true_model(&self) -> Result<CreativityModel, OracleError> {
        self.validate()?;
        Ok(CreativityModel::from_lambda(self.params.clone(), self.true_lambda())?)
    }
}

/// Everything needed to replay or audit a generated corpus.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub spec: GeneratorSpec,
    pub lambda: Grid<f64>,
    /// Number of draws made from each `(i, j)` rate (cohorts above `I` fold into row `I`).
    pub usage: Grid<u64>,
    /// Draws that came from the heavy-tail mixture.
    pub heavy_tail_draws: u64,
    /// Initial history per researcher, in id order.
    pub initial_histories: Vec<u64>,
}

impl GroundTruth {
    pub fn write_json<W: Write>(&self, out: W) -> Result<(), OracleError> {
        serde_json::to_writer_pretty(out, self)?;
        Ok(())
    }
}

pub fn researcher_id(k: usize) -> String {
    format!("r{k:06}")
}

struct Generated {
    initial: u64,
    /// Output per step `1..=J`.
    output: Vec<u64>,
    /// Row used at each step.
    rows: Vec<usize>,
    mixed: u64,
}

fn draw_initial(initial: &InitialHistory, rng: &mut rand_chacha::ChaCha8Rng) -> u64 {
    match *initial {
        InitialHistory::Lotka { exponent, max } => Zipf::new(max as f64, exponent)
            .expect("validated")
            .sample(rng) as u64,
        InitialHistory::Fixed { h } => h,
        InitialHistory::Uniform { min, max } => rand::Rng::random_range(rng, min..=max),
    }
}

pub fn generate_corpus(spec: &GeneratorSpec) -> Result<(PublicationCorpus, GroundTruth), OracleError> {
    spec.validate()?;
    let params = &spec.params;
    let lambda = spec.true_lambda();
    let people = map_range(0..spec.population, |k| {
        let mut rng = substream(spec.seed, k, 0);
        let initial = draw_initial(&spec.initial, &mut rng);
        let mut h = initial;
        let mut output = Vec::with_capacity(params.steps);
        let mut rows = Vec::with_capacity(params.steps);
        let mut mixed = 0;
        for j in 1..=params.steps {
            let row = (h as usize).clamp(1, params.max_cohort);
            let mut rate = *lambda.get(row, j);
            if let Some(tail) = spec.heavy_tail.filter(|t| t.cohort == h) {
                let g = Gamma::new(tail.shape, 1.0 / tail.shape).expect("validated");
                rate *= g.sample(&mut rng);
                mixed += 1;
            }
            let x = if rate > 0.0 {
                Poisson::new(rate).expect("finite rate").sample(&mut rng) as u64
            } else {
                0
            };
            output.push(x);
            rows.push(row);
            h += x;
        }
        Generated {
            initial,
            output,
            rows,
            mixed,
        }
    });

    let mut corpus = PublicationCorpus::new(None);
    let mut usage = Grid::filled(params.max_cohort, params.steps, 0u64);
    let mut heavy_tail_draws = 0;
    let mut initial_histories = Vec::with_capacity(people.len());
    for (k, g) in people.iter().enumerate() {
        let id = researcher_id(k);
        corpus.add(&id, params.start, g.initial).expect("span is inferred");
        for (j, (&x, &row)) in (1..).zip(g.output.iter().zip(&g.rows)) {
            corpus.add(&id, params.start + j as i32, x).expect("span is inferred");
            *usage.get_mut(row, j) += 1;
        }
        heavy_tail_draws += g.mixed;
        initial_histories.push(g.initial);
    }
    Ok((
        corpus,
        GroundTruth {
            spec: spec.clone(),
            lambda,
            usage,
            heavy_tail_draws,
            initial_histories,
        },
    ))
}

/// Outcome of [`lotka_closure_check`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LotkaFit {
    /// Maximum-likelihood exponent of the transformed counts.
    pub exponent: f64,
    /// `a / b`, the exponent predicted by the closure.
    pub expected: f64,
    pub population: usize,
    /// Support points summed exactly in the normaliser before the integral tail.
    pub support_terms: usize,
}

const SUPPORT_TERMS: usize = 100_000;
const MIN_POPULATION: usize = 1000;

/// Draws `s` with `p(s) ∝ s^a`, maps each to `round_half_even(s^b)`, and fits
/// `p(h) ∝ h^θ` on the transformed support `{round(s^b) : s >= 1}` by maximum
/// likelihood. The closure predicts `θ = a / b`.
pub fn lotka_closure_check(a: f64, b: f64, population: usize, seed: u64) -> Result<LotkaFit, OracleError> {
    if !a.is_finite() || !b.is_finite() || a >= -1.0 || b <= 0.0 {
        return Err(OracleError::Invalid(format!("need a < -1 and b > 0, got a={a} b={b}")));
    }
    if population < MIN_POPULATION {
        return Err(OracleError::PopulationTooSmall(population));
    }
    let zeta = Zeta::new(-a).expect("a < -1");
    let mut rng = stream(seed, 0);
    let mean_log_h = (0..population)
        .map(|_| {
            let s: f64 = zeta.sample(&mut rng);
            s.powf(b).round_ties_even().max(1.0).ln()
        })
        .sum::<f64>()
        / population as f64;

    let support: Vec<f64> = (1..=SUPPORT_TERMS)
        .map(|s| (s as f64).powf(b).round_ties_even().max(1.0))
        .collect();
    let tail_start = SUPPORT_TERMS as f64 + 0.5;
    // ln Z(θ) with Z = Σ_{s <= N} round(s^b)^θ + ∫_{N + 1/2}^∞ x^{bθ} dx
    let ln_norm = |theta: f64| {
        let head: f64 = support.iter().map(|h| h.powf(theta)).sum();
        let e = b * theta + 1.0;
        (head + tail_start.powf(e) / -e).ln()
    };
    let neg_log_lik = |theta: f64| -(theta * mean_log_h - ln_norm(theta));
    let exponent = golden_section_min(neg_log_lik, -10.0, -1.0 / b - 1e-6, 1e-9);
    Ok(LotkaFit {
        exponent,
        expected: a / b,
        population,
        support_terms: SUPPORT_TERMS,
    })
}

fn golden_section_min(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    let ratio = (5f64.sqrt() - 1.0) / 2.0;
    let mut x1 = hi - ratio * (hi - lo);
    let mut x2 = lo + ratio * (hi - lo);
    let (mut f1, mut f2) = (f(x1), f(x2));
    while hi - lo > tol {
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - ratio * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + ratio * (hi - lo);
            f2 = f(x2);
        }
    }
    (lo + hi) / 2.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    fn small(surface: Surface, population: usize) -> GeneratorSpec {
        GeneratorSpec::new(ModelParams::new(10, 10, 5, 5, 1990, 1995), surface, population, 11)
    }

    #[test]
    fn surface_values() {
        let s = Surface::PowerLaw {
            a: 0.1,
            nu: 0.5,
            beta: -0.05,
        };
        assert_abs_diff_eq!(s.rate(4, 3), (0.1f64).exp() * 2.0 * (-0.1f64).exp(), epsilon = 1e-12);
        let rows = Surface::Rows {
            alpha: vec![0.0, 1.0],
            beta: vec![0.0, -1.0],
        };
        assert_eq!(rows.rate(1, 5), 1.0);
        assert_abs_diff_eq!(rows.rate(9, 2), 1.0f64.exp() * (-1.0f64).exp(), epsilon = 1e-12);
        assert_abs_diff_eq!(Surface::flat(2.5).rate(7, 9), 2.5, epsilon = 1e-12);
    }

    #[test]
    fn tiny_rate_keeps_initial_histories() {
        let (corpus, truth) = generate_corpus(&small(Surface::flat(1e-12), 300)).unwrap();
        assert_eq!(corpus.researcher_count(), 300);
        for (k, h0) in truth.initial_histories.iter().enumerate() {
            let id = researcher_id(k);
            assert_eq!(corpus.history(&id, 2100), *h0);
            assert_eq!(corpus.count_in(&id, 1995), *h0);
        }
        assert!(truth.initial_histories.iter().all(|&h| (1..=5).contains(&h)));
    }

    #[test]
    fn same_seed_same_corpus() {
        let spec = small(Surface::flat(1.0), 200);
        let (a, ta) = generate_corpus(&spec).unwrap();
        let (b, tb) = generate_corpus(&spec).unwrap();
        assert_eq!(a, b);
        assert_eq!(ta, tb);
        let mut other = spec.clone();
        other.seed += 1;
        assert_ne!(generate_corpus(&other).unwrap().0, a);
    }

    #[test]
    fn usage_counts_every_draw() {
        let spec = small(Surface::flat(0.7), 150);
        let (_, truth) = generate_corpus(&spec).unwrap();
        let total: u64 = truth.usage.cells().map(|(_, _, v)| *v).sum();
        assert_eq!(total, 150 * 10);
        for j in 1..=10 {
            assert_eq!((1..=10).map(|i| *truth.usage.get(i, j)).sum::<u64>(), 150);
        }
    }

    #[test]
    fn heavy_tail_is_counted() {
        let mut spec = small(Surface::flat(1.0), 400);
        spec.initial = InitialHistory::Fixed { h: 3 };
        spec.heavy_tail = Some(HeavyTail { cohort: 3, shape: 0.5 });
        let (_, truth) = generate_corpus(&spec).unwrap();
        // every researcher starts in cohort 3 so the first draw is always mixed
        assert!(truth.heavy_tail_draws >= 400);
    }

    #[test]
    fn invalid_specs() {
        let mut spec = small(Surface::flat(1.0), 10);
        spec.initial = InitialHistory::Uniform { min: 4, max: 2 };
        assert!(generate_corpus(&spec).is_err());
        let bad = small(
            Surface::Rows {
                alpha: vec![],
                beta: vec![],
            },
            10,
        );
        assert!(bad.validate().is_err());
        let nan = small(
            Surface::PowerLaw {
                a: f64::NAN,
                nu: 0.0,
                beta: 0.0,
            },
            10,
        );
        assert!(nan.validate().is_err());
    }

    #[test]
    fn ground_truth_json_round_trip() {
        let (_, truth) = generate_corpus(&small(Surface::flat(1.0), 20)).unwrap();
        let mut buf = Vec::new();
        truth.write_json(&mut buf).unwrap();
        let back: GroundTruth = serde_json::from_slice(&buf).unwrap();
        assert_eq!(back, truth);
    }

    #[test]
    fn golden_section_finds_parabola_minimum() {
        let x = golden_section_min(|x| (x - 1.25).powi(2), -3.0, 4.0, 1e-10);
        assert_abs_diff_eq!(x, 1.25, epsilon = 1e-8);
    }

    #[test]
    fn lotka_identity_transform() {
        let fit = lotka_closure_check(-2.5, 1.0, 20_000, 3).unwrap();
        assert_abs_diff_eq!(fit.exponent, -2.5, epsilon = 0.1);
        assert_eq!(fit.expected, -2.5);
    }

    #[test]
    fn lotka_rejects_bad_input() {
        assert!(matches!(lotka_closure_check(-2.0, 1.0, 999, 0), Err(OracleError::PopulationTooSmall(999))));
        assert!(lotka_closure_check(-0.5, 1.0, 5000, 0).is_err());
        assert!(lotka_closure_check(-2.0, 0.0, 5000, 0).is_err());
    }
}
