//! Predicted treatment effects of narrative morphs.
//!
//! A PTE is the change in a text-aware model's prediction when only the
//! embedding columns of a row are swapped from the original remarks to the
//! morphed remarks; every fundamentals column is held fixed.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::corpus::MaskedDocument;
use crate::embed::EmbeddingVector;
use crate::features::{FeatureGroup, FeatureMatrix, RowKey};
use crate::gbm::{self, EvalReport, GbmError, Hyperparams, MetricError, Predictor};
use crate::morph::{GenerationParams, TextGenerator};
use crate::targets::Target;
use crate::NarrativeDimension;

pub const RATING_MIN: f64 = 1.0;
pub const RATING_MAX: f64 = 10.0;
pub const EMBEDDING_PREFIX: &str = "emb_";
pub const FACTOR_PREFIX: &str = "factor_";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum PteError {
    #[error("embedding dimension mismatch: model has {expected} text columns, got {got}")]
    DimMismatch { expected: usize, got: usize },
    #[error("row has {got} values, model expects {expected}")]
    WidthMismatch { expected: usize, got: usize },
    #[error("model has no embedding columns")]
    NoTextColumns,
    #[error("factor matrix must have exactly 6 factor columns, got {0}")]
    FactorWidth(usize),
    #[error("rater failed: {0}")]
    Rater(String),
    #[error(transparent)]
    Gbm(#[from] GbmError),
    #[error(transparent)]
    Metric(#[from] MetricError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PteResult {
    pub doc_id: String,
    pub dimension: NarrativeDimension,
    pub target: Target,
    pub horizon_years: u8,
    pub delta_bps: f64,
}

/// Positions of the embedding columns among a model's features, in name order.
pub fn embedding_columns(names: &[String]) -> Vec<usize> {
    let mut cols: Vec<(usize, &String)> = names
        .iter()
        .enumerate()
        .filter(|(_, n)| n.starts_with(EMBEDDING_PREFIX))
        .collect();
    cols.sort_by(|a, b| a.1.cmp(b.1));
    cols.into_iter().map(|(i, _)| i).collect()
}

/// `F(fundamentals, morphed) - F(fundamentals, original)`.
///
/// `row` is a full feature row for the model; its embedding entries are
/// overwritten by each vector in turn.
pub fn compute_pte(
    model: &dyn Predictor,
    row: &[f64],
    original: &EmbeddingVector,
    morphed: &EmbeddingVector,
) -> Result<f64, PteError> {
    let names = model.feature_names();
    if row.len() != names.len() {
        return Err(PteError::WidthMismatch {
            expected: names.len(),
            got: row.len(),
        });
    }
    let cols = embedding_columns(names);
    if cols.is_empty() {
        return Err(PteError::NoTextColumns);
    }
    for e in [original, morphed] {
        if e.values.len() != cols.len() {
            return Err(PteError::DimMismatch {
                expected: cols.len(),
                got: e.values.len(),
            });
        }
    }
    let with = |e: &EmbeddingVector| {
        let mut r = row.to_vec();
        for (&c, v) in cols.iter().zip(&e.values) {
            r[c] = f64::from(*v);
        }
        r
    };
    let base = with(original);
    let treated = with(morphed);
    if base == treated {
        return Ok(0.0);
    }
    Ok(model.predict_row(&treated) - model.predict_row(&base))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PteAggregate {
    pub dimension: NarrativeDimension,
    pub target: Target,
    pub horizon_years: u8,
    pub mean_bps: f64,
    pub n: usize,
}

/// Mean `delta_bps` per (dimension, target, horizon), in key order.
pub fn average_pte(results: &[PteResult]) -> Vec<PteAggregate> {
    let mut groups: BTreeMap<(NarrativeDimension, Target, u8), Vec<f64>> = BTreeMap::new();
    for r in results {
        if r.delta_bps.is_finite() {
            groups
                .entry((r.dimension, r.target, r.horizon_years))
                .or_default()
                .push(r.delta_bps);
        } else {
            tracing::warn!(doc_id = %r.doc_id, "non-finite PTE skipped");
        }
    }
    groups
        .into_iter()
        .map(|((dimension, target, horizon_years), mut v)| {
            // summing in sorted order makes the mean independent of input order
            v.sort_by(f64::total_cmp);
            PteAggregate {
                dimension,
                target,
                horizon_years,
                mean_bps: v.iter().sum::<f64>() / v.len() as f64,
                n: v.len(),
            }
        })
        .collect()
}

/// Prediction change from moving SUE across its interquartile range.
pub fn fundamental_news_benchmark(model: &dyn Predictor, x: &FeatureMatrix) -> Result<f64, PteError> {
    Ok(gbm::iqr_effect(model, x, "sue")?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorScores {
    pub doc_id: String,
    pub scores: BTreeMap<NarrativeDimension, f64>,
    pub n_chunks: usize,
    pub skipped: usize,
}

pub fn rating_prompt(dim: NarrativeDimension, chunk: &str) -> String {
    format!(
        "On a scale from 1 to 10, rate the presence of {} in the following \
         earnings call excerpt. Reply with a single integer.\n\nExcerpt: {chunk}",
        dim.label().to_lowercase()
    )
}

/// First run of ASCII digits in the reply, clamped to the rating scale.
pub fn parse_rating(reply: &str) -> Option<f64> {
    let start = reply.find(|c: char| c.is_ascii_digit())?;
    let digits: String = reply[start..].chars().take_while(char::is_ascii_digit).collect();
    let v: f64 = digits.parse().ok()?;
    Some(v.clamp(RATING_MIN, RATING_MAX))
}

/// Rates every chunk on every dimension and averages per dimension.
/// Dimensions with no parseable rating are absent from `scores`.
pub fn score_factors(
    doc: &MaskedDocument,
    rater: &dyn TextGenerator,
    params: &GenerationParams,
) -> Result<FactorScores, PteError> {
    let mut scores = BTreeMap::new();
    let mut skipped = 0;
    for dim in NarrativeDimension::ALL {
        let mut ratings = Vec::new();
        for chunk in &doc.chunks {
            let reply = rater
                .generate("", &rating_prompt(dim, &chunk.text), params)
                .map_err(PteError::Rater)?;
            match parse_rating(&reply) {
                Some(r) => ratings.push(r),
                None => skipped += 1,
            }
        }
        if !ratings.is_empty() {
            scores.insert(dim, ratings.iter().sum::<f64>() / ratings.len() as f64);
        }
    }
    Ok(FactorScores {
        doc_id: doc.doc_id.clone(),
        scores,
        n_chunks: doc.chunks.len(),
        skipped,
    })
}

pub fn factor_column_names() -> Vec<String> {
    NarrativeDimension::ALL
        .iter()
        .map(|d| format!("{FACTOR_PREFIX}{}", d.key()))
        .collect()
}

/// One row per key, six factor columns; missing scores are NaN.
pub fn factor_matrix(keys: Vec<RowKey>, scores: &[&FactorScores]) -> FeatureMatrix {
    assert_eq!(keys.len(), scores.len(), "keys and scores must align");
    let values = scores
        .iter()
        .flat_map(|s| {
            NarrativeDimension::ALL
                .iter()
                .map(|d| s.scores.get(d).copied().unwrap_or(f64::NAN))
        })
        .collect();
    FeatureMatrix {
        row_keys: keys,
        feature_names: factor_column_names(),
        groups: vec![FeatureGroup::Text; 6],
        values,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorFit {
    pub report: EvalReport,
    /// False when the test targets have no variance; `report.r2` is then 0.
    pub r2_defined: bool,
}

/// Fits the factor-only model on `train` rows and evaluates on `test` rows.
pub fn factor_model_fit(
    x: &FeatureMatrix,
    y: &[f64],
    train: &[usize],
    test: &[usize],
    hp: &Hyperparams,
) -> Result<FactorFit, PteError> {
    let n_factor = x.feature_names.iter().filter(|n| n.starts_with(FACTOR_PREFIX)).count();
    if x.width() != 6 || n_factor != 6 {
        return Err(PteError::FactorWidth(x.width()));
    }
    let yt: Vec<f64> = train.iter().map(|&i| y[i]).collect();
    let model = gbm::fit(&x.select_rows(train), &yt, hp)?;
    let yv: Vec<f64> = test.iter().map(|&i| y[i]).collect();
    let pred = model.predict(&x.select_rows(test))?;
    let mse = gbm::mse(&yv, &pred)?;
    let (r2, r2_defined) = match gbm::r2(&yv, &pred) {
        Ok(v) => (v, true),
        Err(MetricError::Undefined) => (0.0, false),
        Err(e) => return Err(e.into()),
    };
    Ok(FactorFit {
        report: EvalReport {
            mse,
            r2,
            n_test: yv.len(),
        },
        r2_defined,
    })
}

/// Share of the full-embedding model's R² reached by the factor model.
pub fn explanatory_ratio(factor_r2: f64, full_r2: f64) -> Option<f64> {
    (full_r2 > 0.0).then(|| factor_r2 / full_r2)
}
