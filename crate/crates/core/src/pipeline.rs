//! Stage glue shared by the command line, the service and the end-to-end tests.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};

use crate::corpus::{build_masked_document, CorpusError, MaskConfig, MaskedDocument, RemarksRecord};
use crate::embed::{embed_document, EmbedError, EmbeddingProvider, EmbeddingVector};
use crate::features::{assemble, CallEmbedding, FeatureError, FeatureMatrix, FeatureSpec, FundamentalsRow};
use crate::gbm::{self, BoostedModel, EvalReport, GbmError, Hyperparams, SplitError};
use crate::morph::{validate_and_retry, GenerationParams, MorphError, MorphResult, TextGenerator};
use crate::pte::{average_pte, compute_pte, PteAggregate, PteError, PteResult};
use crate::stats::{clark_west, CWResult, StatsError};
use crate::synth::{generate_corpus, GroundTruth, SynthConfig, SynthError};
use crate::targets::{
    build_target_rows, trim_rows, EarningsEvent, ForecastRecord, Target, TargetError, TargetRow, HORIZONS,
};
use crate::NarrativeDimension;

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Target(#[from] TargetError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Gbm(#[from] GbmError),
    #[error(transparent)]
    Split(#[from] SplitError),
    #[error(transparent)]
    Metric(#[from] gbm::MetricError),
    #[error(transparent)]
    Morph(#[from] MorphError),
    #[error(transparent)]
    Pte(#[from] PteError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("no rows for {target} at horizon {horizon}")]
    NoRows { target: &'static str, horizon: u8 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub embed_seed: u64,
    pub embed_dim: usize,
    pub trim_lower: f64,
    pub trim_upper: f64,
    pub test_fraction: f64,
    pub cv_folds: usize,
    /// Candidate hyperparameters; a single entry skips cross-validation.
    pub grid: Vec<Hyperparams>,
    pub max_attempts: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            embed_seed: 0,
            embed_dim: crate::embed::DEFAULT_DIM,
            trim_lower: 0.05,
            trim_upper: 0.95,
            test_fraction: gbm::DEFAULT_TEST_FRACTION,
            cv_folds: 5,
            grid: vec![Hyperparams {
                n_trees: 300,
                ..Hyperparams::default()
            }],
            max_attempts: crate::morph::DEFAULT_MAX_ATTEMPTS,
        }
    }
}

pub fn mask_all(remarks: &[RemarksRecord], cfg: &MaskConfig) -> Result<Vec<MaskedDocument>, CorpusError> {
    remarks
        .iter()
        .map(|r| build_masked_document(&r.doc_id, &r.firm_id, r.call_date, &r.text, cfg))
        .collect()
}

pub fn embed_all(
    docs: &[MaskedDocument],
    provider: &dyn EmbeddingProvider,
) -> Result<Vec<EmbeddingVector>, EmbedError> {
    docs.iter().map(|d| embed_document(d, provider)).collect()
}

pub fn targets(
    events: &[EarningsEvent],
    forecasts: &[ForecastRecord],
    cfg: &PipelineConfig,
) -> Result<Vec<TargetRow>, TargetError> {
    let mut rows = build_target_rows(events, forecasts)?;
    trim_rows(&mut rows, cfg.trim_lower, cfg.trim_upper);
    Ok(rows)
}

/// Assembles the feature matrix of `spec`, pairing embeddings with target rows
/// through the documents' (firm, call date).
pub fn features(
    spec: FeatureSpec,
    fundamentals: &[FundamentalsRow],
    docs: &[MaskedDocument],
    embeddings: &[EmbeddingVector],
    rows: &[TargetRow],
    events: &[EarningsEvent],
) -> Result<FeatureMatrix, FeatureError> {
    let by_id: HashMap<&str, &EmbeddingVector> = embeddings.iter().map(|e| (e.doc_id.as_str(), e)).collect();
    let calls: Vec<CallEmbedding<'_>> = docs
        .iter()
        .filter_map(|d| {
            by_id.get(d.doc_id.as_str()).map(|e| CallEmbedding {
                firm_id: &d.firm_id,
                call_date: d.call_date,
                embedding: e,
            })
        })
        .collect();
    assemble(spec, fundamentals, &calls, rows, events)
}

/// One trained (target, horizon) model with its held-out evaluation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub target: Target,
    pub horizon_years: u8,
    pub params: Hyperparams,
    pub model: BoostedModel,
    pub test: EvalReport,
    /// Row indices into the full matrix.
    pub train_rows: Vec<usize>,
    pub test_rows: Vec<usize>,
}

/// Rows of `x` for one horizon with a defined value of `target`.
pub fn rows_for(rows: &[TargetRow], target: Target, horizon: u8) -> (Vec<usize>, Vec<f64>) {
    rows.iter()
        .enumerate()
        .filter(|(_, r)| r.horizon_years == horizon)
        .filter_map(|(i, r)| r.get(target).map(|v| (i, v)))
        .unzip()
}

pub fn train(
    x: &FeatureMatrix,
    rows: &[TargetRow],
    target: Target,
    horizon: u8,
    cfg: &PipelineConfig,
) -> Result<TrainedModel, PipelineError> {
    let (idx, y) = rows_for(rows, target, horizon);
    if idx.is_empty() {
        return Err(PipelineError::NoRows {
            target: target.key(),
            horizon,
        });
    }
    let sub = x.select_rows(&idx);
    let (train_local, test_local) = gbm::temporal_split(&sub.row_keys, cfg.test_fraction)?;
    let xt = sub.select_rows(&train_local);
    let yt: Vec<f64> = train_local.iter().map(|&i| y[i]).collect();
    let params = match cfg.grid.as_slice() {
        [] => return Err(GbmError::EmptyGrid.into()),
        [only] => only.clone(),
        grid => gbm::kfold_cv(&xt, &yt, grid, cfg.cv_folds)?.0,
    };
    let model = gbm::fit(&xt, &yt, &params)?;
    let xs = sub.select_rows(&test_local);
    let ys: Vec<f64> = test_local.iter().map(|&i| y[i]).collect();
    let test = gbm::evaluate(&ys, &gbm::predict(&model, &xs)?)?;
    Ok(TrainedModel {
        target,
        horizon_years: horizon,
        params,
        model,
        test,
        train_rows: train_local.iter().map(|&i| idx[i]).collect(),
        test_rows: test_local.iter().map(|&i| idx[i]).collect(),
    })
}

/// Fits the restricted and the unrestricted specification on the same
/// temporal split and compares their held-out forecasts.
pub fn nested_comparison(
    restricted: &FeatureMatrix,
    unrestricted: &FeatureMatrix,
    rows: &[TargetRow],
    target: Target,
    horizon: u8,
    cfg: &PipelineConfig,
) -> Result<(TrainedModel, TrainedModel, CWResult), PipelineError> {
    let r = train(restricted, rows, target, horizon, cfg)?;
    let u = train(unrestricted, rows, target, horizon, cfg)?;
    let y: Vec<f64> = r.test_rows.iter().filter_map(|&i| rows[i].get(target)).collect();
    let pr = gbm::predict(&r.model, &restricted.select_rows(&r.test_rows))?;
    let pu = gbm::predict(&u.model, &unrestricted.select_rows(&u.test_rows))?;
    let cw = clark_west(&y, &pr, &pu, usize::from(horizon))?;
    Ok((r, u, cw))
}

/// Share of independently seeded synthetic worlds in which the text
/// specification beats fundamentals alone at one-sided level `alpha`, for
/// expected change at the one-year horizon.
pub fn text_signal_rejection_rate(
    synth: &SynthConfig,
    cfg: &PipelineConfig,
    reps: usize,
    alpha: f64,
) -> Result<f64, PipelineError> {
    let embedder = crate::embed::hashing_embedder(cfg.embed_seed, cfg.embed_dim);
    let mut rejections = 0usize;
    for rep in 0..reps {
        let world = SynthConfig {
            seed: synth.seed.wrapping_add(rep as u64),
            ..synth.clone()
        };
        let corpus = generate_corpus(&world)?;
        let (remarks, _) = crate::corpus::ingest(corpus.transcripts);
        let docs = mask_all(&remarks, &MaskConfig::default())?;
        let embeddings = embed_all(&docs, &embedder)?;
        let rows = targets(&corpus.events, &corpus.forecasts, cfg)?;
        let st = features(
            FeatureSpec::ST,
            &corpus.fundamentals,
            &docs,
            &embeddings,
            &rows,
            &corpus.events,
        )?;
        let s = st.restrict(FeatureSpec::S);
        let (_, _, cw) = nested_comparison(&s, &st, &rows, Target::ExpectedChange, 1, cfg)?;
        if cw.p_value_one_sided < alpha {
            rejections += 1;
        }
    }
    Ok(rejections as f64 / reps.max(1) as f64)
}

/// Morphs every remark along every dimension; only accepted results are kept
/// for embedding, rejected ones are returned for the audit trail.
pub fn morph_all(
    remarks: &[&RemarksRecord],
    dims: &[NarrativeDimension],
    generator: &dyn TextGenerator,
    judge: &dyn TextGenerator,
    params: &GenerationParams,
    max_attempts: usize,
) -> Result<Vec<MorphResult>, MorphError> {
    let mut out = Vec::with_capacity(remarks.len() * dims.len());
    for r in remarks {
        for &d in dims {
            out.push(validate_and_retry(
                &r.doc_id,
                &r.text,
                d,
                generator,
                judge,
                params,
                max_attempts,
            )?);
        }
    }
    Ok(out)
}

/// PTEs of every accepted morph on the model's test rows.
pub fn ptes_for_model(
    trained: &TrainedModel,
    x: &FeatureMatrix,
    doc_of_row: &[String],
    originals: &HashMap<String, EmbeddingVector>,
    morphed: &HashMap<(String, NarrativeDimension), EmbeddingVector>,
) -> Result<Vec<PteResult>, PteError> {
    let mut out = Vec::new();
    for &i in &trained.test_rows {
        let doc = &doc_of_row[i];
        let Some(orig) = originals.get(doc) else { continue };
        for d in NarrativeDimension::ALL {
            let Some(m) = morphed.get(&(doc.clone(), d)) else {
                continue;
            };
            out.push(PteResult {
                doc_id: doc.clone(),
                dimension: d,
                target: trained.target,
                horizon_years: trained.horizon_years,
                delta_bps: compute_pte(&trained.model, x.row(i), orig, m)?,
            });
        }
    }
    Ok(out)
}

/// Everything a planted-world run produces, with the truth it should recover.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RecoveryReport {
    pub aggregates: Vec<PteAggregate>,
    pub models: Vec<(Target, u8, EvalReport)>,
    pub morphs_total: usize,
    pub morphs_accepted: usize,
    pub truth: GroundTruth,
}

impl RecoveryReport {
    pub fn planted(&self, d: NarrativeDimension, target: Target) -> f64 {
        let (ec, dis, rc) = self.truth.true_pte(d);
        match target {
            Target::ExpectedChange => ec,
            Target::Disagreement => dis,
            Target::RealizedChange => rc,
        }
    }

    /// Largest |recovered - planted| over the given target's aggregates.
    pub fn max_abs_error(&self, target: Target) -> f64 {
        self.aggregates
            .iter()
            .filter(|a| a.target == target)
            .map(|a| (a.mean_bps - self.planted(a.dimension, target)).abs())
            .fold(0.0, f64::max)
    }
}

/// Synthetic world through the whole pipeline with offline stubs for every
/// language-model call.
pub fn planted_recovery(
    synth: &SynthConfig,
    cfg: &PipelineConfig,
    targets_to_fit: &[Target],
) -> Result<RecoveryReport, PipelineError> {
    let corpus = generate_corpus(synth)?;
    let (remarks, _) = crate::corpus::ingest(corpus.transcripts);
    let mask = MaskConfig::default();
    let embedder = crate::embed::hashing_embedder(cfg.embed_seed, cfg.embed_dim);
    let docs = mask_all(&remarks, &mask)?;
    let embeddings = embed_all(&docs, &embedder)?;
    let rows = targets(&corpus.events, &corpus.forecasts, cfg)?;
    let x = features(
        FeatureSpec::ST,
        &corpus.fundamentals,
        &docs,
        &embeddings,
        &rows,
        &corpus.events,
    )?;

    let doc_by_call: HashMap<(&str, chrono::NaiveDate), &str> = remarks
        .iter()
        .map(|r| ((r.firm_id.as_str(), r.call_date), r.doc_id.as_str()))
        .collect();
    let doc_of_row: Vec<String> = rows
        .iter()
        .map(|r| doc_by_call[&(r.firm_id.as_str(), r.call_date)].to_string())
        .collect();

    let mut trained = Vec::new();
    for &t in targets_to_fit {
        for h in HORIZONS {
            trained.push(train(&x, &rows, t, h, cfg)?);
        }
    }

    // morph only documents that appear in some test set
    let mut needed: BTreeMap<&str, ()> = BTreeMap::new();
    for m in &trained {
        for &i in &m.test_rows {
            needed.insert(&doc_of_row[i], ());
        }
    }
    let to_morph: Vec<&RemarksRecord> = remarks
        .iter()
        .filter(|r| needed.contains_key(r.doc_id.as_str()))
        .collect();
    let morphs = morph_all(
        &to_morph,
        &NarrativeDimension::ALL,
        &crate::synth::MarkerMorpher::from_prompt(),
        &crate::synth::MarkerJudge,
        &GenerationParams::default(),
        cfg.max_attempts,
    )?;
    let mut morphed = HashMap::new();
    for m in morphs.iter().filter(|m| m.accepted) {
        let r = to_morph
            .iter()
            .find(|r| r.doc_id == m.doc_id)
            .expect("morphed doc exists");
        let doc = build_masked_document(&m.doc_id, &r.firm_id, r.call_date, &m.morphed_text, &mask)?;
        morphed.insert((m.doc_id.clone(), m.dimension), embed_document(&doc, &embedder)?);
    }
    let originals: HashMap<String, EmbeddingVector> = embeddings.into_iter().map(|e| (e.doc_id.clone(), e)).collect();

    let mut results = Vec::new();
    for m in &trained {
        results.extend(ptes_for_model(m, &x, &doc_of_row, &originals, &morphed)?);
    }
    Ok(RecoveryReport {
        aggregates: average_pte(&results),
        models: trained
            .iter()
            .map(|m| (m.target, m.horizon_years, m.test.clone()))
            .collect(),
        morphs_total: morphs.len(),
        morphs_accepted: morphed.len(),
        truth: corpus.ground_truth,
    })
}
