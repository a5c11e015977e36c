//! HTTP service: what-if morphing against a trained run, plus read-only
//! access to run reports.

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, State};
use axum::http::{header, HeaderValue, Method, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::{DateTime, NaiveDate, Utc};
use narrlab::corpus::build_masked_document;
use narrlab::embed::{embed_document, EmbeddingProvider, EmbeddingVector};
use narrlab::features::FeatureMatrix;
use narrlab::gbm::BoostedModel;
use narrlab::morph::{validate_and_retry, GenerationParams, MorphError, TextGenerator, Verdict};
use narrlab::pte::{compute_pte, fundamental_news_benchmark};
use narrlab::targets::{Target, HORIZONS};
use narrlab::NarrativeDimension;
use serde::{Deserialize, Serialize};
use tokio::sync::Semaphore;
use tower_http::cors::{AllowOrigin, CorsLayer};

use crate::config::{LabConfig, MorphConfig};
use crate::error::LabError;
use crate::providers::{self, Role};
use crate::run::{list_runs, valid_run_id, RunDir};
use crate::stages::{self, NewsBenchmark};

/// Full-specification models of one completed run, held read-only.
pub struct LoadedModel {
    pub run_id: String,
    pub config: LabConfig,
    pub features: FeatureMatrix,
    pub models: BTreeMap<(Target, u8), BoostedModel>,
    pub news: BTreeMap<(Target, u8), f64>,
    pub embedder: Box<dyn EmbeddingProvider>,
}

impl LoadedModel {
    pub fn load(runs_root: &std::path::Path, run_id: &str) -> Result<Self, LabError> {
        let run = RunDir::open(runs_root, run_id)?;
        let features = stages::load_features(&run, "features")?;
        let entries = stages::load_entries(&run)?;
        let mut models = BTreeMap::new();
        let mut news = BTreeMap::new();
        let stored: Vec<NewsBenchmark> = if run.has("fundamental_news") {
            run.get_json("fundamental_news", "pte")?
        } else {
            Vec::new()
        };
        for e in entries
            .values()
            .filter(|e| e.spec == narrlab::features::FeatureSpec::ST)
        {
            let model = stages::load_model(&run, &e.model_artifact)?;
            let key = (e.target, e.horizon_years);
            let bps = match stored.iter().find(|n| (n.target, n.horizon_years) == key) {
                Some(n) => n.bps,
                None => fundamental_news_benchmark(&model, &features.select_rows(&e.test_rows))
                    .map_err(LabError::validation)?,
            };
            news.insert(key, bps);
            models.insert(key, model);
        }
        if models.is_empty() {
            return Err(LabError::MissingStage {
                stage: "train",
                artifact: stages::TRAIN.into(),
            });
        }
        let embedder = providers::embedder(&run.config.embed)?;
        Ok(Self {
            run_id: run_id.to_string(),
            config: run.config.clone(),
            features,
            models,
            news,
            embedder,
        })
    }

    fn row(&self, r: &RowRef, horizon: u8) -> Option<&[f64]> {
        self.features
            .row_keys
            .iter()
            .position(|k| k.firm_id == r.firm_id && k.call_date == r.call_date && k.horizon == horizon)
            .map(|i| self.features.row(i))
    }

    fn embed(&self, text: &str) -> Result<EmbeddingVector, ApiError> {
        let doc = build_masked_document("whatif", "whatif", NaiveDate::MIN, text, &self.config.mask)
            .map_err(|e| ApiError::bad_request(e.to_string()))?;
        embed_document(&doc, self.embedder.as_ref()).map_err(|e| match e {
            narrlab::embed::EmbedError::Provider { .. } => ApiError::new(StatusCode::BAD_GATEWAY, e.to_string()),
            other => ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, other.to_string()),
        })
    }
}

pub struct AppState {
    pub runs_root: PathBuf,
    pub model: Option<Arc<LoadedModel>>,
    pub generator: Arc<dyn TextGenerator>,
    pub judge: Arc<dyn TextGenerator>,
    pub params: GenerationParams,
    pub max_attempts: usize,
    pub limit: Arc<Semaphore>,
}

impl AppState {
    pub fn new(
        runs_root: PathBuf,
        model: Option<LoadedModel>,
        generator: Arc<dyn TextGenerator>,
        judge: Arc<dyn TextGenerator>,
        morph: &MorphConfig,
        max_in_flight: usize,
    ) -> Self {
        Self {
            runs_root,
            model: model.map(Arc::new),
            generator,
            judge,
            params: morph.params.clone(),
            max_attempts: morph.max_attempts,
            limit: Arc::new(Semaphore::new(max_in_flight.max(1))),
        }
    }

    /// State as configured: generators from the `morph` block and, when
    /// `serve.model_run` is set, that run's models.
    pub fn from_config(runs_root: PathBuf, cfg: &LabConfig) -> Result<Self, LabError> {
        let model = match &cfg.serve.model_run {
            Some(id) => Some(LoadedModel::load(&runs_root, id)?),
            None => None,
        };
        let generator: Arc<dyn TextGenerator> = providers::generator(cfg.morph.generator, Role::Morph, cfg)?.into();
        let judge: Arc<dyn TextGenerator> = providers::generator(cfg.morph.judge, Role::Judge, cfg)?.into();
        Ok(Self::new(
            runs_root,
            model,
            generator,
            judge,
            &cfg.morph,
            cfg.serve.max_in_flight,
        ))
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    message: String,
}

impl ApiError {
    fn new(status: StatusCode, message: impl Into<String>) -> Self {
        Self {
            status,
            message: message.into(),
        }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(serde_json::json!({ "error": self.message }))).into_response()
    }
}

impl From<LabError> for ApiError {
    fn from(e: LabError) -> Self {
        let status = match e {
            LabError::Validation(_) | LabError::MissingStage { .. } => StatusCode::UNPROCESSABLE_ENTITY,
            LabError::Io { .. } | LabError::Remote(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        Self::new(status, e.to_string())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RowRef {
    pub firm_id: String,
    pub call_date: NaiveDate,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WhatIfRequest {
    pub text: String,
    pub dimensions: Vec<String>,
    pub horizon: u8,
    pub fundamentals_row_ref: RowRef,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionResult {
    pub dimension: NarrativeDimension,
    pub label: String,
    pub morphed_text: String,
    pub judge_verdict: Verdict,
    pub numeral_check_passed: bool,
    pub attempts: usize,
    pub accepted: bool,
    /// Predicted treatment effect per target in bps; absent for rejected morphs.
    pub pte: Option<BTreeMap<Target, f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WhatIfResponse {
    pub run_id: String,
    pub horizon: u8,
    pub fundamentals_row_ref: RowRef,
    pub results: Vec<DimensionResult>,
    /// Interquartile surprise effect per target, the benchmark bar.
    pub fundamental_news: BTreeMap<Target, f64>,
}

fn parse_request(body: &[u8]) -> Result<(WhatIfRequest, Vec<NarrativeDimension>), ApiError> {
    let req: WhatIfRequest =
        serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("malformed request: {e}")))?;
    if req.text.trim().is_empty() {
        return Err(ApiError::bad_request("text must not be empty"));
    }
    if !HORIZONS.contains(&req.horizon) {
        return Err(ApiError::bad_request(format!("horizon must be one of {HORIZONS:?}")));
    }
    if req.dimensions.is_empty() {
        return Err(ApiError::bad_request("dimensions must not be empty"));
    }
    let mut dims = Vec::new();
    let mut seen = BTreeSet::new();
    for name in &req.dimensions {
        let d: NarrativeDimension = name
            .parse()
            .map_err(|e: narrlab::dimension::UnknownDimension| ApiError::bad_request(e.to_string()))?;
        if !seen.insert(d) {
            return Err(ApiError::bad_request(format!("dimension {name:?} listed twice")));
        }
        dims.push(d);
    }
    Ok((req, dims))
}

fn run_whatif(
    state: &AppState,
    model: &LoadedModel,
    req: WhatIfRequest,
    dims: Vec<NarrativeDimension>,
) -> Result<WhatIfResponse, ApiError> {
    let h = req.horizon;
    let row = model.row(&req.fundamentals_row_ref, h).ok_or_else(|| {
        ApiError::bad_request(format!(
            "no fundamentals row for {} on {} at horizon {h}",
            req.fundamentals_row_ref.firm_id, req.fundamentals_row_ref.call_date
        ))
    })?;
    let original = model.embed(&req.text)?;
    let mut results = Vec::with_capacity(dims.len());
    for d in dims {
        let m = validate_and_retry(
            "whatif",
            &req.text,
            d,
            state.generator.as_ref(),
            state.judge.as_ref(),
            &state.params,
            state.max_attempts,
        )
        .map_err(|e| match e {
            MorphError::Generator { .. } | MorphError::Judge(_) => {
                ApiError::new(StatusCode::BAD_GATEWAY, e.to_string())
            }
            MorphError::EmptyGeneration(_) => ApiError::new(StatusCode::BAD_GATEWAY, e.to_string()),
            other => ApiError::bad_request(other.to_string()),
        })?;
        let pte = if m.accepted {
            let morphed = model.embed(&m.morphed_text)?;
            let mut by_target = BTreeMap::new();
            for ((t, mh), bm) in &model.models {
                if *mh == h {
                    let delta = compute_pte(bm, row, &original, &morphed)
                        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
                    by_target.insert(*t, delta);
                }
            }
            Some(by_target)
        } else {
            None
        };
        results.push(DimensionResult {
            dimension: d,
            label: d.label().to_string(),
            morphed_text: m.morphed_text,
            judge_verdict: m.judge_verdict,
            numeral_check_passed: m.numeral_check_passed,
            attempts: m.attempts,
            accepted: m.accepted,
            pte,
        });
    }
    Ok(WhatIfResponse {
        run_id: model.run_id.clone(),
        horizon: h,
        fundamentals_row_ref: req.fundamentals_row_ref,
        results,
        fundamental_news: model
            .news
            .iter()
            .filter(|((_, mh), _)| *mh == h)
            .map(|((t, _), v)| (*t, *v))
            .collect(),
    })
}

async fn whatif(State(state): State<Arc<AppState>>, body: Bytes) -> Result<Json<WhatIfResponse>, ApiError> {
    let (req, dims) = parse_request(&body)?;
    let Some(model) = state.model.clone() else {
        return Err(ApiError::new(StatusCode::CONFLICT, "no model loaded"));
    };
    let _permit = state
        .limit
        .clone()
        .acquire_owned()
        .await
        .map_err(|_| ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "shutting down"))?;
    let worker = state.clone();
    tokio::task::spawn_blocking(move || run_whatif(&worker, &model, req, dims))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?
        .map(Json)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub run_id: String,
    pub created_at: DateTime<Utc>,
    pub config_hash: String,
    pub completed: bool,
    pub artifacts: Vec<String>,
}

async fn runs(State(state): State<Arc<AppState>>) -> Result<Json<Vec<RunSummary>>, ApiError> {
    let manifests = list_runs(&state.runs_root)?;
    Ok(Json(
        manifests
            .into_iter()
            .map(|m| RunSummary {
                run_id: m.run_id,
                created_at: m.created_at,
                config_hash: m.config_hash,
                completed: m.completed,
                artifacts: m.stage_outputs.into_keys().collect(),
            })
            .collect(),
    ))
}

async fn run_report(
    State(state): State<Arc<AppState>>,
    UrlPath(id): UrlPath<String>,
) -> Result<Json<serde_json::Value>, ApiError> {
    if !valid_run_id(&id) {
        return Err(ApiError::bad_request(format!("invalid run id {id:?}")));
    }
    if !state.runs_root.join(&id).join(crate::run::MANIFEST).is_file() {
        return Err(ApiError::new(StatusCode::NOT_FOUND, format!("no run {id}")));
    }
    let run = RunDir::open(&state.runs_root, &id)?;
    if !run.has(stages::REPORT) {
        return Err(ApiError::new(
            StatusCode::NOT_FOUND,
            format!("run {id} has no report yet"),
        ));
    }
    Ok(Json(run.get_json(stages::REPORT, "report")?))
}

async fn healthz(State(state): State<Arc<AppState>>) -> Json<serde_json::Value> {
    Json(serde_json::json!({
        "status": "ok",
        "model_loaded": state.model.is_some(),
        "model_run": state.model.as_ref().map(|m| m.run_id.clone()),
    }))
}

pub fn cors(origin: Option<&str>) -> Result<CorsLayer, LabError> {
    let allow = match origin {
        None => AllowOrigin::any(),
        Some(o) => AllowOrigin::exact(
            HeaderValue::from_str(o).map_err(|_| LabError::Validation(format!("invalid CORS origin {o:?}")))?,
        ),
    };
    Ok(CorsLayer::new()
        .allow_origin(allow)
        .allow_methods([Method::GET, Method::POST, Method::OPTIONS])
        .allow_headers([header::CONTENT_TYPE]))
}

pub fn router(state: Arc<AppState>, cors: CorsLayer) -> Router {
    Router::new()
        .route("/whatif", post(whatif))
        .route("/runs", get(runs))
        .route("/runs/{id}/report", get(run_report))
        .route("/healthz", get(healthz))
        .layer(cors)
        .with_state(state)
}

pub async fn serve(listener: tokio::net::TcpListener, app: Router) -> std::io::Result<()> {
    axum::serve(listener, app)
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

#[cfg(test)]
mod tests {
    use super::*;

    fn body(v: serde_json::Value) -> Vec<u8> {
        serde_json::to_vec(&v).unwrap()
    }

    fn valid() -> serde_json::Value {
        serde_json::json!({
            "text": "Revenue grew 5% this quarter.",
            "dimensions": ["Sentiment", "global_focus"],
            "horizon": 2,
            "fundamentals_row_ref": {"firm_id": "F001", "call_date": "2015-02-10"}
        })
    }

    #[test]
    fn parses_dimension_spellings() {
        let (req, dims) = parse_request(&body(valid())).unwrap();
        assert_eq!(dims, [NarrativeDimension::Sentiment, NarrativeDimension::GlobalFocus]);
        assert_eq!(req.horizon, 2);
    }

    #[test]
    fn rejects_bad_requests() {
        let status = |v: serde_json::Value| parse_request(&body(v)).unwrap_err().status;
        let mut v = valid();
        v["dimensions"] = serde_json::json!(["Charisma"]);
        assert_eq!(status(v), StatusCode::BAD_REQUEST);
        let mut v = valid();
        v["horizon"] = serde_json::json!(4);
        assert_eq!(status(v), StatusCode::BAD_REQUEST);
        let mut v = valid();
        v["dimensions"] = serde_json::json!(["sentiment", "Sentiment"]);
        assert_eq!(status(v), StatusCode::BAD_REQUEST);
        let mut v = valid();
        v["extra"] = serde_json::json!(1);
        assert_eq!(status(v), StatusCode::BAD_REQUEST);
        assert_eq!(parse_request(b"{not json").unwrap_err().status, StatusCode::BAD_REQUEST);
    }
}
