//! One-covariate regressions on log-transformed responses.
//!
//! The log-linear model `log E[y|x] = a + b x` and the log-log model
//! `log E[y|x] = a + b log x` are fitted by (weighted) least squares of `log y`.
//! A Poisson GLM fitted by IRLS is available for sensitivity comparisons, and
//! [`significance_chi2`] scores a fitted rate surface against the
//! intercept-only Poisson model.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF, Normal, StudentsT};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RegressionError {
    #[error("insufficient data: {usable} usable point(s), need at least 2 with distinct covariates")]
    InsufficientData { usable: usize },
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("Poisson IRLS did not converge after {0} iterations")]
    NoConvergence(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FitKind {
    LogLinear,
    LogLog,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegressionFit {
    pub kind: FitKind,
    pub intercept: f64,
    pub slope: f64,
    pub n_points: usize,
    /// Weighted residual mean square of the log response (0 with no residual df).
    pub residual_variance: f64,
    pub intercept_std_error: f64,
    pub slope_std_error: f64,
    /// Two-sided p-value of the slope.
    pub p_value: f64,
}

impl RegressionFit {
    /// Fitted mean at covariate `x` (`x` is the raw covariate for both kinds).
    pub fn predict(&self, x: f64) -> f64 {
        self.linear_predictor(x).exp()
    }

    pub fn linear_predictor(&self, x: f64) -> f64 {
        match self.kind {
            FitKind::LogLinear => self.intercept + self.slope * x,
            FitKind::LogLog => self.intercept + self.slope * x.ln(),
        }
    }

    fn covariate(kind: FitKind, x: f64) -> Option<f64> {
        match kind {
            FitKind::LogLinear => x.is_finite().then_some(x),
            FitKind::LogLog => (x > 0.0 && x.is_finite()).then(|| x.ln()),
        }
    }
}

/// Least squares of `log y` on `x`. Points with `y <= 0`, non-finite values or
/// non-positive weight are dropped before fitting.
pub fn fit_log_linear(
    points: &[(f64, f64)],
    weights: Option<&[f64]>,
) -> Result<RegressionFit, RegressionError> {
    fit_log_response(FitKind::LogLinear, points, weights)
}

/// Least squares of `log y` on `log x`; points with `x <= 0` are also dropped.
pub fn fit_log_log(
    points: &[(f64, f64)],
    weights: Option<&[f64]>,
) -> Result<RegressionFit, RegressionError> {
    fit_log_response(FitKind::LogLog, points, weights)
}

fn fit_log_response(
    kind: FitKind,
    points: &[(f64, f64)],
    weights: Option<&[f64]>,
) -> Result<RegressionFit, RegressionError> {
    if let Some(w) = weights {
        if w.len() != points.len() {
            return Err(RegressionError::LengthMismatch(points.len(), w.len()));
        }
    }
    let usable: Vec<(f64, f64, f64)> = points
        .iter()
        .enumerate()
        .filter_map(|(k, &(x, y))| {
            let w = weights.map_or(1.0, |w| w[k]);
            let u = RegressionFit::covariate(kind, x)?;
            (y > 0.0 && y.is_finite() && w > 0.0 && w.is_finite()).then(|| (u, y.ln(), w))
        })
        .collect();
    weighted_line(kind, &usable)
}

fn weighted_line(kind: FitKind, data: &[(f64, f64, f64)]) -> Result<RegressionFit, RegressionError> {
    let n = data.len();
    let insufficient = RegressionError::InsufficientData { usable: n };
    if n < 2 {
        return Err(insufficient);
    }
    let total_w: f64 = data.iter().map(|p| p.2).sum();
    let x_bar = data.iter().map(|p| p.2 * p.0).sum::<f64>() / total_w;
    let y_bar = data.iter().map(|p| p.2 * p.1).sum::<f64>() / total_w;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for &(x, y, w) in data {
        sxx += w * (x - x_bar) * (x - x_bar);
        sxy += w * (x - x_bar) * (y - y_bar);
    }
    if sxx <= 0.0 {
        return Err(insufficient);
    }
    let slope = sxy / sxx;
    let intercept = y_bar - slope * x_bar;
    let rss: f64 = data
        .iter()
        .map(|&(x, y, w)| {
            let r = y - intercept - slope * x;
            w * r * r
        })
        .sum();
    let df = n - 2;
    let residual_variance = if df > 0 { rss / df as f64 } else { 0.0 };
    let slope_std_error = (residual_variance / sxx).sqrt();
    let intercept_std_error = (residual_variance * (1.0 / total_w + x_bar * x_bar / sxx)).sqrt();
    let p_value = if df == 0 {
        1.0
    } else if slope_std_error == 0.0 {
        if slope == 0.0 {
            1.0
        } else {
            0.0
        }
    } else {
        let t = StudentsT::new(0.0, 1.0, df as f64).expect("df > 0");
        (2.0 * t.sf((slope / slope_std_error).abs())).clamp(0.0, 1.0)
    };
    Ok(RegressionFit {
        kind,
        intercept,
        slope,
        n_points: n,
        residual_variance,
        intercept_std_error,
        slope_std_error,
        p_value,
    })
}

/// Likelihood-ratio test of a fitted rate surface against the intercept-only model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Chi2Test {
    pub statistic: f64,
    pub p_value: f64,
    pub cells: usize,
}

/// Treats `m_k ~ Poisson(n_k λ_k)` and compares the supplied `λ_k` with the
/// pooled rate `Σm/Σn` on one degree of freedom. The statistic is floored at 0:
/// least-squares rates can score below the pooled maximum-likelihood rate, which
/// is no evidence of a trend.
pub fn significance_chi2(
    observed_m: &[u64],
    exposures_n: &[u64],
    fitted_lambda: &[f64],
) -> Result<Chi2Test, RegressionError> {
    if observed_m.len() != exposures_n.len() {
        return Err(RegressionError::LengthMismatch(observed_m.len(), exposures_n.len()));
    }
    if observed_m.len() != fitted_lambda.len() {
        return Err(RegressionError::LengthMismatch(observed_m.len(), fitted_lambda.len()));
    }
    let cells: Vec<(f64, f64, f64)> = observed_m
        .iter()
        .zip(exposures_n)
        .zip(fitted_lambda)
        .filter(|((_, &n), &l)| n > 0 && l > 0.0 && l.is_finite())
        .map(|((&m, &n), &l)| (m as f64, n as f64, l))
        .collect();
    if cells.len() < 2 {
        return Err(RegressionError::InsufficientData {
            usable: cells.len(),
        });
    }
    let pooled = cells.iter().map(|c| c.0).sum::<f64>() / cells.iter().map(|c| c.1).sum::<f64>();
    let mut statistic = 0.0;
    for &(m, n, l) in &cells {
        let log_ratio = if m > 0.0 { m * (l / pooled).ln() } else { 0.0 };
        statistic += 2.0 * (log_ratio - n * (l - pooled));
    }
    let statistic = statistic.max(0.0);
    let p_value = ChiSquared::new(1.0)
        .expect("one degree of freedom")
        .sf(statistic)
        .clamp(0.0, 1.0);
    Ok(Chi2Test {
        statistic,
        p_value,
        cells: cells.len(),
    })
}

/// Poisson GLM `m ~ Poisson(n exp(a + b x))` by iteratively reweighted least
/// squares, with `x` transformed per `kind`. Standard errors and the p-value
/// are Wald-type; `residual_variance` is the Pearson dispersion.
pub fn fit_poisson_irls(
    kind: FitKind,
    covariates: &[f64],
    observed_m: &[u64],
    exposures_n: &[u64],
) -> Result<RegressionFit, RegressionError> {
    if covariates.len() != observed_m.len() || covariates.len() != exposures_n.len() {
        return Err(RegressionError::LengthMismatch(covariates.len(), observed_m.len()));
    }
    let data: Vec<(f64, f64, f64)> = covariates
        .iter()
        .zip(observed_m)
        .zip(exposures_n)
        .filter_map(|((&x, &m), &n)| {
            let u = RegressionFit::covariate(kind, x)?;
            (n > 0).then_some((u, m as f64, n as f64))
        })
        .collect();
    let total_m: f64 = data.iter().map(|d| d.1).sum();
    let total_n: f64 = data.iter().map(|d| d.2).sum();
    let distinct = data.windows(2).any(|w| w[0].0 != w[1].0);
    if data.len() < 2 || !distinct || total_m == 0.0 {
        return Err(RegressionError::InsufficientData { usable: data.len() });
    }

    const MAX_ITER: usize = 100;
    let (mut a, mut b) = ((total_m / total_n).ln(), 0.0);
    for _ in 0..MAX_ITER {
        // weighted least squares of the working response on x with weights mu
        let (mut sw, mut swx, mut swxx, mut swz, mut swxz) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for &(x, m, n) in &data {
            let eta = a + b * x;
            let mu = n * eta.exp();
            let z = eta + (m - mu) / mu;
            sw += mu;
            swx += mu * x;
            swxx += mu * x * x;
            swz += mu * z;
            swxz += mu * x * z;
        }
        let det = sw * swxx - swx * swx;
        if det <= 0.0 || !det.is_finite() {
            return Err(RegressionError::NoConvergence(MAX_ITER));
        }
        let b_next = (sw * swxz - swx * swz) / det;
        let a_next = (swz - b_next * swx) / sw;
        let converged = (a_next - a).abs() < 1e-12 * (1.0 + a.abs())
            && (b_next - b).abs() < 1e-12 * (1.0 + b.abs());
        a = a_next;
        b = b_next;
        if converged {
            let (mut sw, mut swx, mut swxx, mut pearson) = (0.0, 0.0, 0.0, 0.0);
            for &(x, m, n) in &data {
                let mu = n * (a + b * x).exp();
                sw += mu;
                swx += mu * x;
                swxx += mu * x * x;
                pearson += (m - mu) * (m - mu) / mu;
            }
            let det = sw * swxx - swx * swx;
            let slope_std_error = (sw / det).sqrt();
            let intercept_std_error = (swxx / det).sqrt();
            let df = data.len() - 2;
            let z = Normal::standard();
            return Ok(RegressionFit {
                kind,
                intercept: a,
                slope: b,
                n_points: data.len(),
                residual_variance: if df > 0 { pearson / df as f64 } else { 0.0 },
                intercept_std_error,
                slope_std_error,
                p_value: (2.0 * z.sf((b / slope_std_error).abs())).clamp(0.0, 1.0),
            });
        }
    }
    Err(RegressionError::NoConvergence(MAX_ITER))
}
