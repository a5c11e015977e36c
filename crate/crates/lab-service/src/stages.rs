//! One function per CLI stage. Each reads its inputs from the run directory
//! and registers its outputs in the manifest.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::path::Path;

use narrlab::corpus::{self, MaskedDocument, RemarksRecord, TranscriptVersion};
use narrlab::embed::EmbeddingVector;
use narrlab::features::{FeatureGroup, FeatureMatrix, FeatureSpec, FundamentalsRow};
use narrlab::gbm::{self, BoostedModel, EvalReport, Hyperparams};
use narrlab::morph::MorphResult;
use narrlab::pipeline;
use narrlab::pte::{self, average_pte, PteAggregate, PteResult};
use narrlab::report::{self, AnalystRow, CwRow, R2Row};
use narrlab::stats::{analyst_benchmark_gains, clark_west, CWResult};
use narrlab::synth::{generate_corpus, GroundTruth};
use narrlab::targets::{self, EarningsEvent, ForecastRecord, Target, TargetRow, BPS, HORIZONS};
use narrlab::NarrativeDimension;
use serde::{Deserialize, Serialize};

use crate::error::LabError;
use crate::providers::{self, Role};
use crate::run::RunDir;

pub const FEATURES: &str = "features";
pub const TRAIN: &str = "train";

/// Stages in pipeline order, as accepted by the `all` command.
pub const ORDER: [&str; 14] = [
    "synth", "ingest", "mask", "embed", "targets", "features", "train", "evaluate", "cw", "pdp", "morph", "pte",
    "factors", "report",
];

fn v<E: std::fmt::Display>(e: E) -> LabError {
    LabError::validation(e)
}

/// Provider failures during embedding are remote or I/O problems, everything
/// else is a data problem.
fn embed_err(e: narrlab::embed::EmbedError) -> LabError {
    match e {
        narrlab::embed::EmbedError::Provider { .. } => LabError::Remote(e.to_string()),
        other => v(other),
    }
}

fn morph_err(e: narrlab::morph::MorphError) -> LabError {
    use narrlab::morph::MorphError::*;
    match e {
        Generator { .. } | Judge(_) => LabError::Remote(e.to_string()),
        other => v(other),
    }
}

pub fn synth(run: &mut RunDir) -> Result<(), LabError> {
    let corpus = generate_corpus(&run.config.synth).map_err(v)?;
    run.put_jsonl("transcripts", "data/transcripts.jsonl", &corpus.transcripts)?;
    run.put_jsonl("forecasts", "data/forecasts.jsonl", &corpus.forecasts)?;
    run.put_jsonl("events", "data/events.jsonl", &corpus.events)?;
    run.put_jsonl("fundamentals", "data/fundamentals.jsonl", &corpus.fundamentals)?;
    run.put_json("ground_truth", "data/ground_truth.json", &corpus.ground_truth)?;
    Ok(())
}

fn import<T: Serialize + for<'de> Deserialize<'de>>(
    run: &mut RunDir,
    artifact: &str,
    src: &Path,
) -> Result<Vec<T>, LabError> {
    let items: Vec<T> = narrlab::jsonl::read(src)?;
    run.put_jsonl(artifact, &format!("data/{artifact}.jsonl"), &items)?;
    Ok(items)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dropped {
    pub doc_id: String,
    pub reason: String,
}

/// Selects the latest version of every event and extracts the prepared
/// remarks. External input files named in the config are copied into the run.
pub fn ingest(run: &mut RunDir) -> Result<(), LabError> {
    let inputs = run.config.inputs.clone();
    let transcripts: Vec<TranscriptVersion> = match &inputs.transcripts {
        Some(p) => import(run, "transcripts", p)?,
        None => run.get_jsonl("transcripts", "synth")?,
    };
    if let Some(p) = &inputs.forecasts {
        import::<ForecastRecord>(run, "forecasts", p)?;
    }
    if let Some(p) = &inputs.events {
        import::<EarningsEvent>(run, "events", p)?;
    }
    if let Some(p) = &inputs.fundamentals {
        import::<FundamentalsRow>(run, "fundamentals", p)?;
    }
    for t in &transcripts {
        t.validate().map_err(|e| v(format!("transcript {}: {e}", t.event_id)))?;
    }
    let (remarks, dropped) = corpus::ingest(transcripts);
    if remarks.is_empty() {
        return Err(v("no usable transcripts after ingest"));
    }
    let dropped: Vec<Dropped> = dropped
        .into_iter()
        .map(|(doc_id, e)| Dropped {
            doc_id,
            reason: e.to_string(),
        })
        .collect();
    run.put_jsonl("remarks", "corpus/remarks.jsonl", &remarks)?;
    run.put_json("ingest_dropped", "corpus/dropped.json", &dropped)?;
    Ok(())
}

pub fn mask(run: &mut RunDir) -> Result<(), LabError> {
    let remarks: Vec<RemarksRecord> = run.get_jsonl("remarks", "ingest")?;
    let docs = pipeline::mask_all(&remarks, &run.config.mask).map_err(v)?;
    run.put_jsonl("masked", "corpus/masked.jsonl", &docs)?;
    Ok(())
}

pub fn embed(run: &mut RunDir) -> Result<(), LabError> {
    let docs: Vec<MaskedDocument> = run.get_jsonl("masked", "mask")?;
    let provider = providers::embedder(&run.config.embed)?;
    let embs = pipeline::embed_all(&docs, provider.as_ref()).map_err(embed_err)?;
    run.put_jsonl("embeddings", "corpus/embeddings.jsonl", &embs)?;
    Ok(())
}

pub fn targets(run: &mut RunDir) -> Result<(), LabError> {
    let events: Vec<EarningsEvent> = run.get_jsonl("events", "synth")?;
    let forecasts: Vec<ForecastRecord> = run.get_jsonl("forecasts", "synth")?;
    let rows = pipeline::targets(&events, &forecasts, &run.config.pipeline()).map_err(v)?;
    if rows.is_empty() {
        return Err(v("no target rows could be built"));
    }
    let summary = report::render_target_summary(&targets::summary_table(&rows));
    run.put_jsonl("targets", "targets/targets.jsonl", &rows)?;
    run.put_bytes("target_summary", "targets/summary.txt", summary.as_bytes())?;
    Ok(())
}

pub fn features(run: &mut RunDir) -> Result<(), LabError> {
    let fundamentals: Vec<FundamentalsRow> = run.get_jsonl("fundamentals", "synth")?;
    let docs: Vec<MaskedDocument> = run.get_jsonl("masked", "mask")?;
    let embs: Vec<EmbeddingVector> = run.get_jsonl("embeddings", "embed")?;
    let rows: Vec<TargetRow> = run.get_jsonl("targets", "targets")?;
    let events: Vec<EarningsEvent> = run.get_jsonl("events", "synth")?;
    let x = pipeline::features(FeatureSpec::ST, &fundamentals, &docs, &embs, &rows, &events).map_err(v)?;
    let mut buf = Vec::new();
    x.write_to(&mut buf).map_err(v)?;
    run.put_bytes(FEATURES, "features/features_st.bin", &buf)?;
    Ok(())
}

pub fn load_features(run: &RunDir, stage: &'static str) -> Result<FeatureMatrix, LabError> {
    let path = run.require(FEATURES, stage)?;
    let file = std::fs::File::open(&path).map_err(|e| LabError::io(&path, e))?;
    FeatureMatrix::read_from(std::io::BufReader::new(file)).map_err(v)
}

/// Summary of one fitted model; the model itself lives in its own artifact.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainEntry {
    pub target: Target,
    pub horizon_years: u8,
    pub spec: FeatureSpec,
    pub params: Hyperparams,
    pub test: EvalReport,
    pub train_rows: Vec<usize>,
    pub test_rows: Vec<usize>,
    pub model_artifact: String,
}

pub fn model_artifact(target: Target, h: u8, spec: FeatureSpec) -> String {
    format!("model.{}.{h}.{}", target.key(), spec.key())
}

/// Fits fundamentals-only and full models for every target and horizon on
/// the same temporal split.
pub fn train(run: &mut RunDir) -> Result<(), LabError> {
    let x = load_features(run, "features")?;
    let rows: Vec<TargetRow> = run.get_jsonl("targets", "targets")?;
    let cfg = run.config.pipeline();
    let s = x.restrict(FeatureSpec::S);
    let mut entries = Vec::new();
    for target in Target::ALL {
        for h in HORIZONS {
            for (spec, m) in [(FeatureSpec::S, &s), (FeatureSpec::ST, &x)] {
                let t = pipeline::train(m, &rows, target, h, &cfg).map_err(v)?;
                let artifact = model_artifact(target, h, spec);
                let rel = format!("models/{}_h{h}_{}.json", target.key(), spec.key());
                run.put_bytes(&artifact, &rel, t.model.to_json().as_bytes())?;
                tracing::info!(target = target.key(), h, spec = spec.key(), r2 = t.test.r2, "trained");
                entries.push(TrainEntry {
                    target,
                    horizon_years: h,
                    spec,
                    params: t.params,
                    test: t.test,
                    train_rows: t.train_rows,
                    test_rows: t.test_rows,
                    model_artifact: artifact,
                });
            }
        }
    }
    run.put_json(TRAIN, "models/train.json", &entries)?;
    Ok(())
}

pub fn load_model(run: &RunDir, artifact: &str) -> Result<BoostedModel, LabError> {
    let path = run.require(artifact, "train")?;
    let text = std::fs::read_to_string(&path).map_err(|e| LabError::io(&path, e))?;
    BoostedModel::from_json(&text).map_err(|e| v(format!("{artifact}: {e}")))
}

/// Trained entries keyed by (target, horizon, spec key).
pub type Entries = BTreeMap<(Target, u8, &'static str), TrainEntry>;

pub fn load_entries(run: &RunDir) -> Result<Entries, LabError> {
    let entries: Vec<TrainEntry> = run.get_json(TRAIN, "train")?;
    Ok(entries
        .into_iter()
        .map(|e| ((e.target, e.horizon_years, e.spec.key()), e))
        .collect())
}

fn pair(entries: &Entries, t: Target, h: u8) -> Result<(&TrainEntry, &TrainEntry), LabError> {
    let get = |spec: FeatureSpec| {
        entries.get(&(t, h, spec.key())).ok_or_else(|| LabError::MissingStage {
            stage: "train",
            artifact: model_artifact(t, h, spec),
        })
    };
    Ok((get(FeatureSpec::S)?, get(FeatureSpec::ST)?))
}

/// Held-out targets and predictions of both specifications.
struct HeldOut {
    y: Vec<f64>,
    rows: Vec<usize>,
    pred_s: Vec<f64>,
    pred_st: Vec<f64>,
}

fn held_out(
    run: &RunDir,
    x: &FeatureMatrix,
    rows: &[TargetRow],
    s_entry: &TrainEntry,
    st_entry: &TrainEntry,
) -> Result<HeldOut, LabError> {
    if s_entry.test_rows != st_entry.test_rows {
        return Err(v("restricted and full models were evaluated on different rows"));
    }
    let test = &st_entry.test_rows;
    let xs = x.select_rows(test);
    let pred_s = gbm::predict(&load_model(run, &s_entry.model_artifact)?, &xs.restrict(FeatureSpec::S)).map_err(v)?;
    let pred_st = gbm::predict(&load_model(run, &st_entry.model_artifact)?, &xs).map_err(v)?;
    let y = test
        .iter()
        .map(|&i| {
            rows[i]
                .get(st_entry.target)
                .ok_or_else(|| v("test row without a target value"))
        })
        .collect::<Result<_, _>>()?;
    Ok(HeldOut {
        y,
        rows: test.clone(),
        pred_s,
        pred_st,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub r2: BTreeMap<Target, Vec<R2Row>>,
    /// Realized change against the analyst consensus; MSE in squared yield units.
    pub analyst: Vec<AnalystRow>,
}

pub fn evaluate(run: &mut RunDir) -> Result<(), LabError> {
    let entries = load_entries(run)?;
    let x = load_features(run, "features")?;
    let rows: Vec<TargetRow> = run.get_jsonl("targets", "targets")?;
    let mut r2: BTreeMap<Target, Vec<R2Row>> = BTreeMap::new();
    let mut analyst = Vec::new();
    for t in Target::ALL {
        for h in HORIZONS {
            let (s, st) = pair(&entries, t, h)?;
            r2.entry(t)
                .or_default()
                .push(R2Row::from_fractions(h, s.test.r2, st.test.r2));
            if t == Target::RealizedChange {
                let ho = held_out(run, &x, &rows, s, st)?;
                let keep: Vec<usize> = (0..ho.rows.len())
                    .filter(|&k| rows[ho.rows[k]].expected_change_bps.is_some())
                    .collect();
                let pick = |v: &[f64]| keep.iter().map(|&k| v[k] / BPS).collect::<Vec<f64>>();
                let consensus: Vec<f64> = keep
                    .iter()
                    .map(|&k| rows[ho.rows[k]].expected_change_bps.unwrap_or_default() / BPS)
                    .collect();
                let b = analyst_benchmark_gains(&pick(&ho.y), &consensus, &pick(&ho.pred_s), &pick(&ho.pred_st))
                    .map_err(v)?;
                analyst.push(AnalystRow::from_benchmark(h, &b));
            }
        }
    }
    run.put_json("evaluation", "evaluation/evaluation.json", &Evaluation { r2, analyst })?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CwEntry {
    pub target: Target,
    pub horizon_years: u8,
    pub result: CWResult,
}

pub fn cw(run: &mut RunDir) -> Result<(), LabError> {
    let entries = load_entries(run)?;
    let x = load_features(run, "features")?;
    let rows: Vec<TargetRow> = run.get_jsonl("targets", "targets")?;
    let mut out = Vec::new();
    for t in Target::ALL {
        for h in HORIZONS {
            let (s, st) = pair(&entries, t, h)?;
            let ho = held_out(run, &x, &rows, s, st)?;
            let result = clark_west(&ho.y, &ho.pred_s, &ho.pred_st, usize::from(h)).map_err(v)?;
            out.push(CwEntry {
                target: t,
                horizon_years: h,
                result,
            });
        }
    }
    run.put_json("cw", "evaluation/cw.json", &out)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdpEntry {
    pub target: Target,
    pub horizon_years: u8,
    /// Interquartile partial-dependence effect of each fundamental, in bps.
    pub iqr_effects: BTreeMap<String, f64>,
}

pub fn pdp(run: &mut RunDir) -> Result<(), LabError> {
    let entries = load_entries(run)?;
    let x = load_features(run, "features")?;
    let fundamentals: Vec<String> = x
        .feature_names
        .iter()
        .zip(&x.groups)
        .filter(|(_, g)| **g == FeatureGroup::Fundamentals)
        .map(|(n, _)| n.clone())
        .collect();
    let mut out = Vec::new();
    for t in Target::ALL {
        for h in HORIZONS {
            let (_, st) = pair(&entries, t, h)?;
            let model = load_model(run, &st.model_artifact)?;
            let xt = x.select_rows(&st.test_rows);
            let mut iqr_effects = BTreeMap::new();
            for name in &fundamentals {
                iqr_effects.insert(name.clone(), gbm::iqr_effect(&model, &xt, name).map_err(v)?);
            }
            out.push(PdpEntry {
                target: t,
                horizon_years: h,
                iqr_effects,
            });
        }
    }
    run.put_json("pdp", "evaluation/pdp.json", &out)?;
    Ok(())
}

/// Document id of every feature row.
fn doc_of_row(x: &FeatureMatrix, docs: &[MaskedDocument]) -> Result<Vec<String>, LabError> {
    let by_call: HashMap<(&str, chrono::NaiveDate), &str> = docs
        .iter()
        .map(|d| ((d.firm_id.as_str(), d.call_date), d.doc_id.as_str()))
        .collect();
    x.row_keys
        .iter()
        .map(|k| {
            by_call
                .get(&(k.firm_id.as_str(), k.call_date))
                .map(|d| d.to_string())
                .ok_or_else(|| v(format!("no document for {} on {}", k.firm_id, k.call_date)))
        })
        .collect()
}

/// Morphs every document that appears in a full model's test set.
pub fn morph(run: &mut RunDir) -> Result<(), LabError> {
    let entries = load_entries(run)?;
    let x = load_features(run, "features")?;
    let docs: Vec<MaskedDocument> = run.get_jsonl("masked", "mask")?;
    let remarks: Vec<RemarksRecord> = run.get_jsonl("remarks", "ingest")?;
    let doc_ids = doc_of_row(&x, &docs)?;
    let needed: BTreeSet<&str> = entries
        .values()
        .filter(|e| e.spec == FeatureSpec::ST)
        .flat_map(|e| e.test_rows.iter().map(|&i| doc_ids[i].as_str()))
        .collect();
    let to_morph: Vec<&RemarksRecord> = remarks.iter().filter(|r| needed.contains(r.doc_id.as_str())).collect();
    let cfg = &run.config;
    let gen = providers::generator(cfg.morph.generator, Role::Morph, cfg)?;
    let judge = providers::generator(cfg.morph.judge, Role::Judge, cfg)?;
    let morphs = pipeline::morph_all(
        &to_morph,
        &cfg.morph.dimensions,
        gen.as_ref(),
        judge.as_ref(),
        &cfg.morph.params,
        cfg.morph.max_attempts,
    )
    .map_err(morph_err)?;
    run.put_jsonl("morphs", "morph/morphs.jsonl", &morphs)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NewsBenchmark {
    pub target: Target,
    pub horizon_years: u8,
    pub bps: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MorphedEmbedding {
    pub dimension: NarrativeDimension,
    pub embedding: EmbeddingVector,
}

pub fn pte(run: &mut RunDir) -> Result<(), LabError> {
    let entries = load_entries(run)?;
    let x = load_features(run, "features")?;
    let docs: Vec<MaskedDocument> = run.get_jsonl("masked", "mask")?;
    let embs: Vec<EmbeddingVector> = run.get_jsonl("embeddings", "embed")?;
    let morphs: Vec<MorphResult> = run.get_jsonl("morphs", "morph")?;
    let doc_ids = doc_of_row(&x, &docs)?;
    let provider = providers::embedder(&run.config.embed)?;
    let by_doc: HashMap<&str, &MaskedDocument> = docs.iter().map(|d| (d.doc_id.as_str(), d)).collect();

    let mut morphed_embs = Vec::new();
    let mut morphed = HashMap::new();
    for m in morphs.iter().filter(|m| m.accepted) {
        let orig = by_doc
            .get(m.doc_id.as_str())
            .ok_or_else(|| v(format!("morph of unknown document {}", m.doc_id)))?;
        let doc = corpus::build_masked_document(
            &m.doc_id,
            &orig.firm_id,
            orig.call_date,
            &m.morphed_text,
            &run.config.mask,
        )
        .map_err(v)?;
        let e = narrlab::embed::embed_document(&doc, provider.as_ref()).map_err(embed_err)?;
        morphed.insert((m.doc_id.clone(), m.dimension), e.clone());
        morphed_embs.push(MorphedEmbedding {
            dimension: m.dimension,
            embedding: e,
        });
    }
    let originals: HashMap<String, EmbeddingVector> = embs.into_iter().map(|e| (e.doc_id.clone(), e)).collect();

    let mut results: Vec<PteResult> = Vec::new();
    let mut news = Vec::new();
    for e in entries.values().filter(|e| e.spec == FeatureSpec::ST) {
        let model = load_model(run, &e.model_artifact)?;
        let trained = pipeline::TrainedModel {
            target: e.target,
            horizon_years: e.horizon_years,
            params: e.params.clone(),
            model,
            test: e.test.clone(),
            train_rows: e.train_rows.clone(),
            test_rows: e.test_rows.clone(),
        };
        results.extend(pipeline::ptes_for_model(&trained, &x, &doc_ids, &originals, &morphed).map_err(v)?);
        let bps = pte::fundamental_news_benchmark(&trained.model, &x.select_rows(&e.test_rows)).map_err(v)?;
        news.push(NewsBenchmark {
            target: e.target,
            horizon_years: e.horizon_years,
            bps,
        });
    }
    let aggregates = average_pte(&results);
    run.put_jsonl("morph_embeddings", "pte/morph_embeddings.jsonl", &morphed_embs)?;
    run.put_jsonl("pte", "pte/pte.jsonl", &results)?;
    run.put_json("pte_aggregate", "pte/aggregate.json", &aggregates)?;
    run.put_json("fundamental_news", "pte/fundamental_news.json", &news)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorEntry {
    pub target: Target,
    pub horizon_years: u8,
    pub factor_r2: f64,
    pub full_r2: f64,
    pub explanatory_ratio: Option<f64>,
}

/// Rates every document on the six dimensions and fits a factor-only model
/// on the same splits as the full model.
pub fn factors(run: &mut RunDir) -> Result<(), LabError> {
    let entries = load_entries(run)?;
    let x = load_features(run, "features")?;
    let docs: Vec<MaskedDocument> = run.get_jsonl("masked", "mask")?;
    let rows: Vec<TargetRow> = run.get_jsonl("targets", "targets")?;
    let cfg = &run.config;
    let rater = providers::generator(cfg.factors.rater, Role::Rate, cfg)?;
    let scores = docs
        .iter()
        .map(|d| pte::score_factors(d, rater.as_ref(), &cfg.factors.params))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| match e {
            pte::PteError::Rater(m) => LabError::Remote(m),
            other => v(other),
        })?;
    let doc_ids = doc_of_row(&x, &docs)?;
    let by_doc: HashMap<&str, &pte::FactorScores> = scores.iter().map(|s| (s.doc_id.as_str(), s)).collect();
    let row_scores: Vec<&pte::FactorScores> = doc_ids.iter().map(|d| by_doc[d.as_str()]).collect();
    let fx = pte::factor_matrix(x.row_keys.clone(), &row_scores);

    let mut out = Vec::new();
    for e in entries.values().filter(|e| e.spec == FeatureSpec::ST) {
        let y: Vec<f64> = rows.iter().map(|r| r.get(e.target).unwrap_or(f64::NAN)).collect();
        let fit = pte::factor_model_fit(&fx, &y, &e.train_rows, &e.test_rows, &e.params).map_err(v)?;
        out.push(FactorEntry {
            target: e.target,
            horizon_years: e.horizon_years,
            factor_r2: fit.report.r2,
            full_r2: e.test.r2,
            explanatory_ratio: pte::explanatory_ratio(fit.report.r2, e.test.r2),
        });
    }
    run.put_jsonl("factor_scores", "factors/scores.jsonl", &scores)?;
    run.put_json("factors", "factors/factors.json", &out)?;
    Ok(())
}

/// Everything the report endpoint serves. A pure function of run artifacts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub config_hash: String,
    pub target_summary: String,
    pub r2_table: String,
    pub analyst_table: String,
    pub cw_table: String,
    pub beliefs_csv: String,
    pub disagreement_csv: String,
    pub figure_horizon: u8,
    pub pte: Vec<PteAggregate>,
    pub fundamental_news: Vec<NewsBenchmark>,
    pub factors: Option<Vec<FactorEntry>>,
    /// Planted effects when the run was generated synthetically.
    pub planted: Option<Vec<PlantedEffect>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedEffect {
    pub dimension: NarrativeDimension,
    pub expected_change_bps: f64,
    pub disagreement_bps: f64,
    pub realized_change_bps: f64,
}

pub fn build_report(run: &RunDir) -> Result<Report, LabError> {
    let summary_path = run.require("target_summary", "targets")?;
    let target_summary = std::fs::read_to_string(&summary_path).map_err(|e| LabError::io(&summary_path, e))?;
    let eval: Evaluation = run.get_json("evaluation", "evaluate")?;
    let cw: Vec<CwEntry> = run.get_json("cw", "cw")?;
    let aggs: Vec<PteAggregate> = run.get_json("pte_aggregate", "pte")?;
    let news: Vec<NewsBenchmark> = run.get_json("fundamental_news", "pte")?;
    let factors: Option<Vec<FactorEntry>> = if run.has("factors") {
        Some(run.get_json("factors", "factors")?)
    } else {
        None
    };
    let planted = if run.has("ground_truth") {
        let truth: GroundTruth = run.get_json("ground_truth", "synth")?;
        Some(
            NarrativeDimension::ALL
                .iter()
                .map(|&d| {
                    let (ec, dis, rc) = truth.true_pte(d);
                    PlantedEffect {
                        dimension: d,
                        expected_change_bps: ec,
                        disagreement_bps: dis,
                        realized_change_bps: rc,
                    }
                })
                .collect(),
        )
    } else {
        None
    };

    let mut cw_rows: BTreeMap<Target, Vec<CwRow>> = BTreeMap::new();
    for e in &cw {
        cw_rows
            .entry(e.target)
            .or_default()
            .push(CwRow::from_result(e.horizon_years, &e.result));
    }
    let h = run.config.report.figure_horizon;
    let news_at = |t| {
        news.iter()
            .find(|n| n.target == t && n.horizon_years == h)
            .map(|n| n.bps)
    };
    let beliefs = report::belief_bars(
        &aggs,
        h,
        news_at(Target::ExpectedChange),
        news_at(Target::RealizedChange),
    );
    let disagreement = report::disagreement_bars(&aggs, h, news_at(Target::Disagreement));
    Ok(Report {
        config_hash: run.manifest.config_hash.clone(),
        target_summary,
        r2_table: report::render_r2_table(&eval.r2),
        analyst_table: report::render_analyst_table(&eval.analyst),
        cw_table: report::render_cw_table(&cw_rows),
        beliefs_csv: report::render_beliefs_csv(&beliefs),
        disagreement_csv: report::render_disagreement_csv(&disagreement),
        figure_horizon: h,
        pte: aggs,
        fundamental_news: news,
        factors,
        planted,
    })
}

pub const REPORT: &str = "report";

/// Renders the report files and marks the run complete.
pub fn report(run: &mut RunDir) -> Result<(), LabError> {
    let r = build_report(run)?;
    run.put_bytes("report_r2_table", "report/r2_table.txt", r.r2_table.as_bytes())?;
    run.put_bytes(
        "report_analyst_table",
        "report/analyst_table.txt",
        r.analyst_table.as_bytes(),
    )?;
    run.put_bytes("report_cw_table", "report/cw_table.txt", r.cw_table.as_bytes())?;
    run.put_bytes("report_beliefs", "report/belief_bars.csv", r.beliefs_csv.as_bytes())?;
    run.put_bytes(
        "report_disagreement",
        "report/disagreement_bars.csv",
        r.disagreement_csv.as_bytes(),
    )?;
    run.put_json(REPORT, "report/report.json", &r)?;
    run.complete()
}

pub fn run_stage(run: &mut RunDir, stage: &str) -> Result<(), LabError> {
    let _span = tracing::info_span!("stage", stage).entered();
    match stage {
        "synth" => synth(run),
        "ingest" => ingest(run),
        "mask" => mask(run),
        "embed" => embed(run),
        "targets" => targets(run),
        "features" => features(run),
        "train" => train(run),
        "evaluate" => evaluate(run),
        "cw" => cw(run),
        "pdp" => pdp(run),
        "morph" => morph(run),
        "pte" => pte(run),
        "factors" => factors(run),
        "report" => report(run),
        other => Err(v(format!("unknown stage {other:?}"))),
    }
}
