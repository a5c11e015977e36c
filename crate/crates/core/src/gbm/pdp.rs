use super::{GbmError, Predictor};
use crate::features::FeatureMatrix;
use crate::quantile::quantile;

/// Mean prediction over all rows of `x` with `feature` overwritten by each grid value.
pub fn partial_dependence(
    model: &dyn Predictor,
    x: &FeatureMatrix,
    feature: &str,
    grid: &[f64],
) -> Result<Vec<f64>, GbmError> {
    let j = model.feature_index(feature)?;
    if x.width() != model.feature_names().len() {
        return Err(GbmError::WidthMismatch {
            expected: model.feature_names().len(),
            got: x.width(),
        });
    }
    if x.n_rows() == 0 || grid.is_empty() {
        return Err(GbmError::Empty);
    }
    let n = x.n_rows() as f64;
    let mut row = vec![0.0; x.width()];
    Ok(grid
        .iter()
        .map(|&g| {
            let mut s = 0.0;
            for i in 0..x.n_rows() {
                row.copy_from_slice(x.row(i));
                row[j] = g;
                s += model.predict_row(&row);
            }
            s / n
        })
        .collect())
}

/// Partial dependence at the 75th minus at the 25th percentile of the
/// observed (non-missing) values of `feature`.
pub fn iqr_effect(model: &dyn Predictor, x: &FeatureMatrix, feature: &str) -> Result<f64, GbmError> {
    let col_idx = x
        .column_index(feature)
        .ok_or_else(|| GbmError::UnknownFeature(feature.to_string()))?;
    let observed: Vec<f64> = x.column(col_idx).into_iter().filter(|v| !v.is_nan()).collect();
    let p25 = quantile(&observed, 0.25).ok_or(GbmError::Empty)?;
    let p75 = quantile(&observed, 0.75).ok_or(GbmError::Empty)?;
    if p25 == p75 {
        model.feature_index(feature)?;
        return Ok(0.0);
    }
    let pd = partial_dependence(model, x, feature, &[p25, p75])?;
    Ok(pd[1] - pd[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gbm::tests::matrix;
    use crate::gbm::{fit, Hyperparams};

    struct Linear(Vec<String>, Vec<f64>);

    impl Predictor for Linear {
        fn feature_names(&self) -> &[String] {
            &self.0
        }
        fn predict_row(&self, row: &[f64]) -> f64 {
            row.iter().zip(&self.1).map(|(a, b)| a * b).sum()
        }
    }

    #[test]
    fn linear_model_curves() {
        let x = matrix(&[vec![1.0, 10.0], vec![3.0, 20.0]]);
        let m = Linear(vec!["x0".into(), "x1".into()], vec![2.0, 0.0]);
        assert_eq!(partial_dependence(&m, &x, "x1", &[0.0, 5.0]).unwrap(), vec![4.0, 4.0]);
        assert_eq!(partial_dependence(&m, &x, "x0", &[0.0, 5.0]).unwrap(), vec![0.0, 10.0]);
        assert!(matches!(
            partial_dependence(&m, &x, "nope", &[0.0]),
            Err(GbmError::UnknownFeature(_))
        ));
        // p25 = 1.5, p75 = 2.5 on {1, 3}
        assert_eq!(iqr_effect(&m, &x, "x0").unwrap(), 2.0);
        assert_eq!(iqr_effect(&m, &x, "x1").unwrap(), 0.0);
    }

    #[test]
    fn single_row_matches_prediction() {
        let x = matrix(&[vec![1.0, 2.0]]);
        let m = Linear(vec!["x0".into(), "x1".into()], vec![1.0, 1.0]);
        assert_eq!(partial_dependence(&m, &x, "x0", &[7.0]).unwrap(), vec![9.0]);
    }

    #[test]
    fn degenerate_distribution_gives_zero() {
        let x = matrix(&[vec![1.0, 0.0], vec![1.0, 1.0], vec![1.0, 2.0]]);
        let m = Linear(vec!["x0".into(), "x1".into()], vec![5.0, 1.0]);
        assert_eq!(iqr_effect(&m, &x, "x0").unwrap(), 0.0);
    }

    #[test]
    fn monotone_dependence_is_positive() {
        let rows: Vec<Vec<f64>> = (0..200).map(|i| vec![i as f64 / 200.0, (i % 7) as f64]).collect();
        let y: Vec<f64> = rows.iter().map(|r| 10.0 * r[0]).collect();
        let hp = Hyperparams {
            n_trees: 50,
            min_samples_leaf: 5,
            ..Default::default()
        };
        let m = fit(&matrix(&rows), &y, &hp).unwrap();
        assert!(iqr_effect(&m, &matrix(&rows), "x0").unwrap() > 3.0);
    }
}
