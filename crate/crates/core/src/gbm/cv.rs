use serde::{Deserialize, Serialize};

use super::{fit, GbmError, Hyperparams, Predictor};
use crate::features::{FeatureMatrix, RowKey};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SplitError {
    #[error("sample too small: {0} rows")]
    TooSmall(usize),
    #[error("test fraction must lie in (0, 1)")]
    BadFraction,
}

pub const MIN_SPLIT_ROWS: usize = 10;
pub const DEFAULT_TEST_FRACTION: f64 = 0.30;

/// Orders rows by (call_date, firm_id, horizon) and returns (train, test)
/// row indices; the test set is the last `ceil(fraction * n)` rows.
pub fn temporal_split(keys: &[RowKey], test_fraction: f64) -> Result<(Vec<usize>, Vec<usize>), SplitError> {
    let n = keys.len();
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(SplitError::BadFraction);
    }
    if n < MIN_SPLIT_ROWS {
        return Err(SplitError::TooSmall(n));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        let (ka, kb) = (&keys[a], &keys[b]);
        (ka.call_date, &ka.firm_id, ka.horizon).cmp(&(kb.call_date, &kb.firm_id, kb.horizon))
    });
    // the epsilon keeps 0.3 * 10 from rounding up to 4
    let n_test = ((test_fraction * n as f64) - 1e-9).ceil() as usize;
    let test = order.split_off(n - n_test);
    Ok((order, test))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvScore {
    pub params: Hyperparams,
    pub fold_mse: Vec<f64>,
    pub mean_mse: f64,
}

/// K contiguous folds over rows taken in their given (chronological) order.
/// Returns the grid point with the lowest mean validation MSE, first wins on ties.
pub fn kfold_cv(
    x: &FeatureMatrix,
    y: &[f64],
    grid: &[Hyperparams],
    k: usize,
) -> Result<(Hyperparams, Vec<CvScore>), GbmError> {
    if grid.is_empty() {
        return Err(GbmError::EmptyGrid);
    }
    let n = x.n_rows();
    if k < 2 || n < k {
        return Err(GbmError::InvalidParams(format!(
            "k-fold needs 2 <= k <= n, got k={k}, n={n}"
        )));
    }
    if y.len() != n {
        return Err(GbmError::LengthMismatch {
            rows: n,
            targets: y.len(),
        });
    }
    let bounds: Vec<usize> = (0..=k).map(|f| f * n / k).collect();
    let folds: Vec<(FeatureMatrix, Vec<f64>, FeatureMatrix, Vec<f64>)> = (0..k)
        .map(|f| {
            let (lo, hi) = (bounds[f], bounds[f + 1]);
            let train: Vec<usize> = (0..lo).chain(hi..n).collect();
            let valid: Vec<usize> = (lo..hi).collect();
            (
                x.select_rows(&train),
                train.iter().map(|&i| y[i]).collect(),
                x.select_rows(&valid),
                valid.iter().map(|&i| y[i]).collect(),
            )
        })
        .collect();

    let mut scores = Vec::with_capacity(grid.len());
    for hp in grid {
        let mut fold_mse = Vec::with_capacity(k);
        for (xt, yt, xv, yv) in &folds {
            let model = fit(xt, yt, hp)?;
            let pred = model.predict(xv)?;
            let e = yv.iter().zip(&pred).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / yv.len() as f64;
            fold_mse.push(e);
        }
        let mean_mse = fold_mse.iter().sum::<f64>() / k as f64;
        tracing::debug!(?hp, mean_mse, "cv grid point");
        scores.push(CvScore {
            params: hp.clone(),
            fold_mse,
            mean_mse,
        });
    }
    let mut best = 0;
    for (i, s) in scores.iter().enumerate() {
        if s.mean_mse < scores[best].mean_mse {
            best = i;
        }
    }
    Ok((scores[best].params.clone(), scores))
}
