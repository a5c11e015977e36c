use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricError {
    #[error("length mismatch: {0} observations vs {1} predictions")]
    LengthMismatch(usize, usize),
    #[error("no observations")]
    Empty,
    #[error("r2 undefined: zero variance in y")]
    Undefined,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub mse: f64,
    pub r2: f64,
    pub n_test: usize,
}

fn check(y: &[f64], yhat: &[f64]) -> Result<(), MetricError> {
    if y.len() != yhat.len() {
        return Err(MetricError::LengthMismatch(y.len(), yhat.len()));
    }
    if y.is_empty() {
        return Err(MetricError::Empty);
    }
    Ok(())
}

/// Mean squared prediction error.
pub fn mse(y: &[f64], yhat: &[f64]) -> Result<f64, MetricError> {
    check(y, yhat)?;
    Ok(y.iter().zip(yhat).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / y.len() as f64)
}

/// Out-of-sample R², `1 - mse(y, yhat) / mse(y, mean(y))`, with the mean
/// taken over the evaluation sample itself.
pub fn r2(y: &[f64], yhat: &[f64]) -> Result<f64, MetricError> {
    check(y, yhat)?;
    let ybar = y.iter().sum::<f64>() / y.len() as f64;
    let baseline = mse(y, &vec![ybar; y.len()])?;
    if baseline == 0.0 {
        return Err(MetricError::Undefined);
    }
    Ok(1.0 - mse(y, yhat)? / baseline)
}

pub fn evaluate(y: &[f64], yhat: &[f64]) -> Result<EvalReport, MetricError> {
    Ok(EvalReport {
        mse: mse(y, yhat)?,
        r2: r2(y, yhat)?,
        n_test: y.len(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_values() {
        assert_eq!(mse(&[0.0, 2.0], &[1.0, 1.0]).unwrap(), 1.0);
        assert_eq!(r2(&[0.0, 2.0], &[1.0, 1.0]).unwrap(), 0.0);
        let y = [1.0, 2.0, 4.0];
        assert_eq!(r2(&y, &y).unwrap(), 1.0);
        assert_eq!(mse(&y, &y).unwrap(), 0.0);
        // ybar = 7/3, baseline = (16/9 + 1/9 + 25/9)/3 = 14/9
        // mse(y, [1,3,3]) = (0 + 1 + 1)/3 = 2/3 => r2 = 1 - (2/3)/(14/9) = 4/7
        assert!((r2(&y, &[1.0, 3.0, 3.0]).unwrap() - 4.0 / 7.0).abs() < 1e-12);
    }

    #[test]
    fn errors() {
        assert_eq!(r2(&[3.0, 3.0], &[1.0, 2.0]), Err(MetricError::Undefined));
        assert_eq!(mse(&[], &[]), Err(MetricError::Empty));
        assert_eq!(mse(&[1.0], &[]), Err(MetricError::LengthMismatch(1, 0)));
    }
}
