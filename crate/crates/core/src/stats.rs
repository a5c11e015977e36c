//! Nested forecast comparison.
//!
//! The Clark–West statistic adjusts the restricted-minus-unrestricted squared
//! error differential for the noise the larger model adds under the null:
//!
//! ```text
//! d_t = (y_t - ŷr_t)² - (y_t - ŷu_t)² + (ŷr_t - ŷu_t)²
//! t   = mean(d) / sqrt(V / n)
//! ```
//!
//! where `V` is the Newey–West long-run variance of `d` with Bartlett weights
//! and lag `h - 1` for `h`-step forecasts.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

pub const MIN_CW_OBSERVATIONS: usize = 8;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StatsError {
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("need at least {min} observations, got {got}")]
    TooShort { min: usize, got: usize },
    #[error("non-finite value at index {0}")]
    NonFinite(usize),
    #[error("lag {lags} must be smaller than the sample size {n}")]
    LagTooLarge { lags: usize, n: usize },
    #[error("horizon must be at least one step")]
    ZeroHorizon,
    #[error("degenerate differential")]
    Degenerate,
    #[error("baseline MSE is zero")]
    ZeroBaseline,
}

/// Bartlett-weighted long-run variance `γ0 + 2 Σ_{j=1..L} (1 - j/(L+1)) γj`,
/// using biased (divide by n) autocovariances of the demeaned series.
pub fn newey_west_variance(series: &[f64], lags: usize) -> Result<f64, StatsError> {
    let n = series.len();
    if lags >= n {
        return Err(StatsError::LagTooLarge { lags, n });
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let dev: Vec<f64> = series.iter().map(|x| x - mean).collect();
    let gamma = |j: usize| -> f64 { dev[j..].iter().zip(&dev).map(|(a, b)| a * b).sum::<f64>() / n as f64 };
    let mut v = gamma(0);
    for j in 1..=lags {
        let w = 1.0 - j as f64 / (lags + 1) as f64;
        v += 2.0 * w * gamma(j);
    }
    Ok(v.max(0.0))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CWResult {
    pub t_stat: f64,
    pub p_value_one_sided: f64,
    pub mean_adjusted_diff: f64,
    pub mse_restricted: f64,
    pub mse_unrestricted: f64,
    pub mse_reduction_pct: f64,
    pub hac_lags: usize,
    pub n: usize,
}

/// The per-observation adjusted loss differential.
pub fn adjusted_differential(y: &[f64], yhat_r: &[f64], yhat_u: &[f64]) -> Vec<f64> {
    y.iter()
        .zip(yhat_r)
        .zip(yhat_u)
        .map(|((y, r), u)| (y - r).powi(2) - (y - u).powi(2) + (r - u).powi(2))
        .collect()
}

pub fn clark_west(y: &[f64], yhat_r: &[f64], yhat_u: &[f64], horizon_steps: usize) -> Result<CWResult, StatsError> {
    if y.len() != yhat_r.len() {
        return Err(StatsError::LengthMismatch(y.len(), yhat_r.len()));
    }
    if y.len() != yhat_u.len() {
        return Err(StatsError::LengthMismatch(y.len(), yhat_u.len()));
    }
    let n = y.len();
    if n < MIN_CW_OBSERVATIONS {
        return Err(StatsError::TooShort {
            min: MIN_CW_OBSERVATIONS,
            got: n,
        });
    }
    if horizon_steps == 0 {
        return Err(StatsError::ZeroHorizon);
    }
    for (i, ((a, b), c)) in y.iter().zip(yhat_r).zip(yhat_u).enumerate() {
        if !(a.is_finite() && b.is_finite() && c.is_finite()) {
            return Err(StatsError::NonFinite(i));
        }
    }
    let lags = horizon_steps - 1;
    let d = adjusted_differential(y, yhat_r, yhat_u);
    let d_bar = d.iter().sum::<f64>() / n as f64;
    let v = newey_west_variance(&d, lags)?;
    if v == 0.0 {
        return Err(StatsError::Degenerate);
    }
    let t_stat = d_bar / (v / n as f64).sqrt();
    let mse_restricted = sq_err(y, yhat_r);
    let mse_unrestricted = sq_err(y, yhat_u);
    let p = 1.0 - standard_normal().cdf(t_stat);
    Ok(CWResult {
        t_stat,
        p_value_one_sided: p.clamp(0.0, 1.0),
        mean_adjusted_diff: d_bar,
        mse_restricted,
        mse_unrestricted,
        mse_reduction_pct: if mse_restricted > 0.0 {
            100.0 * d_bar / mse_restricted
        } else {
            0.0
        },
        hac_lags: lags,
        n,
    })
}

fn standard_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

fn sq_err(y: &[f64], p: &[f64]) -> f64 {
    y.iter().zip(p).map(|(a, b)| (a - b).powi(2)).sum::<f64>() / y.len() as f64
}

/// Model MSEs relative to the analyst consensus as a forecast of the realization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalystBenchmark {
    pub mse_analyst: f64,
    pub mse_fundamentals: f64,
    pub mse_total: f64,
    pub fundamentals_gain_pct: f64,
    pub total_gain_pct: f64,
}

pub fn analyst_benchmark_gains(
    y: &[f64],
    analyst_forecast: &[f64],
    model_s: &[f64],
    model_st: &[f64],
) -> Result<AnalystBenchmark, StatsError> {
    for other in [analyst_forecast, model_s, model_st] {
        if other.len() != y.len() {
            return Err(StatsError::LengthMismatch(y.len(), other.len()));
        }
    }
    if y.is_empty() {
        return Err(StatsError::TooShort { min: 1, got: 0 });
    }
    let mse_analyst = sq_err(y, analyst_forecast);
    if mse_analyst == 0.0 {
        return Err(StatsError::ZeroBaseline);
    }
    let mse_fundamentals = sq_err(y, model_s);
    let mse_total = sq_err(y, model_st);
    Ok(AnalystBenchmark {
        mse_analyst,
        mse_fundamentals,
        mse_total,
        fundamentals_gain_pct: 100.0 * (1.0 - mse_fundamentals / mse_analyst),
        total_gain_pct: 100.0 * (1.0 - mse_total / mse_analyst),
    })
}

/// Size check for the test under a planted null.
///
/// Each replication draws `n_train + n_test` i.i.d. standard-normal targets and
/// an independent regressor. The restricted forecast is the training mean; the
/// unrestricted forecast adds an OLS slope on the irrelevant regressor. Returns
/// the share of replications rejecting at one-sided level `alpha`.
pub fn null_rejection_rate(
    reps: usize,
    n_train: usize,
    n_test: usize,
    alpha: f64,
    seed: u64,
) -> Result<f64, StatsError> {
    let mut rejections = 0usize;
    for rep in 0..reps {
        let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(rep as u64));
        let n = n_train + n_test;
        let y: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let x: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
        let (ys, xs) = (&y[..n_train], &x[..n_train]);
        let ym = ys.iter().sum::<f64>() / n_train as f64;
        let xm = xs.iter().sum::<f64>() / n_train as f64;
        let sxy: f64 = xs.iter().zip(ys).map(|(a, b)| (a - xm) * (b - ym)).sum();
        let sxx: f64 = xs.iter().map(|a| (a - xm).powi(2)).sum();
        let beta = if sxx > 0.0 { sxy / sxx } else { 0.0 };
        let yt = &y[n_train..];
        let r = vec![ym; n_test];
        let u: Vec<f64> = x[n_train..].iter().map(|xi| ym + beta * (xi - xm)).collect();
        let res = clark_west(yt, &r, &u, 1)?;
        if res.p_value_one_sided < alpha {
            rejections += 1;
        }
    }
    Ok(rejections as f64 / reps.max(1) as f64)
}
