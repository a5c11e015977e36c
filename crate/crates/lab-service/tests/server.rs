mod common;

use std::collections::BTreeMap;
use std::sync::Arc;

use axum::http::{HeaderMap, StatusCode};
use axum::routing::post;
use axum::{Json, Router};
use narrlab::corpus::RemarksRecord;
use narrlab::embed::EmbeddingProvider;
use narrlab::features::FeatureMatrix;
use narrlab::morph::stubs::{IdentityGenerator, ScriptedGenerator};
use narrlab::morph::TextGenerator;
use narrlab::synth::{MarkerJudge, MarkerMorpher};
use narrlab::targets::Target;
use narrlab_service::config::MorphConfig;
use narrlab_service::remote::{
    EmbedRequest, EmbedResponse, GenerateRequest, GenerateResponse, RemoteEmbedder, RemoteGenerator,
};
use narrlab_service::run::RunDir;
use narrlab_service::server::{self, AppState, LoadedModel, WhatIfResponse};
use narrlab_service::stages;
use serde_json::{json, Value};

struct Reply {
    status: u16,
    headers: Vec<(String, String)>,
    body: Value,
}

async fn call(method: &'static str, url: String, body: Option<Vec<u8>>) -> Reply {
    tokio::task::spawn_blocking(move || {
        let req = ureq::request(method, &url).set("Origin", "http://ui.example");
        let res = match body {
            Some(b) => req.set("Content-Type", "application/json").send_bytes(&b),
            None => req.call(),
        };
        let resp = match res {
            Ok(r) => r,
            Err(ureq::Error::Status(_, r)) => r,
            Err(e) => panic!("{e}"),
        };
        let headers = resp
            .headers_names()
            .into_iter()
            .map(|n| {
                let v = resp.header(&n).unwrap_or_default().to_string();
                (n, v)
            })
            .collect();
        let status = resp.status();
        let text = resp.into_string().unwrap();
        Reply {
            status,
            headers,
            body: serde_json::from_str(&text).unwrap_or(Value::String(text)),
        }
    })
    .await
    .unwrap()
}

async fn spawn(app: Router) -> String {
    let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = listener.local_addr().unwrap();
    tokio::spawn(async move { axum::serve(listener, app).await.unwrap() });
    format!("http://{addr}")
}

fn state(model: bool, generator: Arc<dyn TextGenerator>, judge: Arc<dyn TextGenerator>) -> AppState {
    let root = common::shared_run().to_path_buf();
    let model = model.then(|| LoadedModel::load(&root, "base").unwrap());
    AppState::new(root, model, generator, judge, &MorphConfig::default(), 2)
}

async fn serve(state: AppState) -> String {
    spawn(server::router(Arc::new(state), server::cors(None).unwrap())).await
}

fn marker_state() -> AppState {
    state(true, Arc::new(MarkerMorpher::from_prompt()), Arc::new(MarkerJudge))
}

/// Remarks and fundamentals key of the `i`th held-out event.
fn held_out_example(i: usize) -> (String, Value) {
    let run = RunDir::open(common::shared_run(), "base").unwrap();
    let x: FeatureMatrix = stages::load_features(&run, "features").unwrap();
    let entries = stages::load_entries(&run).unwrap();
    let e = &entries[&(Target::ExpectedChange, 1, "ST")];
    let key = &x.row_keys[e.test_rows[i]];
    let remarks: Vec<RemarksRecord> = run.get_jsonl("remarks", "ingest").unwrap();
    let doc = remarks
        .iter()
        .find(|r| r.firm_id == key.firm_id && r.call_date == key.call_date)
        .unwrap();
    (
        doc.text.clone(),
        json!({"firm_id": key.firm_id, "call_date": key.call_date}),
    )
}

fn request(dims: &[&str]) -> Vec<u8> {
    request_for(0, dims)
}

fn request_for(i: usize, dims: &[&str]) -> Vec<u8> {
    let (text, row) = held_out_example(i);
    serde_json::to_vec(&json!({
        "text": text,
        "dimensions": dims,
        "horizon": 1,
        "fundamentals_row_ref": row,
    }))
    .unwrap()
}

#[tokio::test(flavor = "multi_thread")]
async fn health_runs_and_reports() {
    let base = serve(state(false, Arc::new(IdentityGenerator), Arc::new(MarkerJudge))).await;
    let r = call("GET", format!("{base}/healthz"), None).await;
    assert_eq!(r.status, 200);
    assert_eq!(r.body["model_loaded"], false);
    assert!(r
        .headers
        .iter()
        .any(|(k, v)| k.eq_ignore_ascii_case("access-control-allow-origin") && v == "*"));

    let r = call("GET", format!("{base}/runs"), None).await;
    assert_eq!(r.status, 200);
    assert_eq!(r.body[0]["run_id"], "base");
    assert_eq!(r.body[0]["completed"], true);

    let r = call("GET", format!("{base}/runs/base/report"), None).await;
    assert_eq!(r.status, 200);
    assert!(r.body["r2_table"].as_str().unwrap().contains("R-squared"));

    assert_eq!(call("GET", format!("{base}/runs/ghost/report"), None).await.status, 404);
    assert_eq!(
        call("GET", format!("{base}/runs/..%2Fx/report"), None).await.status,
        400
    );
}

#[tokio::test(flavor = "multi_thread")]
async fn whatif_needs_a_model() {
    let base = serve(state(false, Arc::new(IdentityGenerator), Arc::new(MarkerJudge))).await;
    let r = call("POST", format!("{base}/whatif"), Some(request(&["Sentiment"]))).await;
    assert_eq!(r.status, 409, "{:?}", r.body);
    let r = call("POST", format!("{base}/whatif"), Some(b"{oops".to_vec())).await;
    assert_eq!(r.status, 400);
}

#[tokio::test(flavor = "multi_thread")]
async fn malformed_requests_are_rejected() {
    let base = serve(marker_state()).await;
    for body in [
        request(&["Charisma"]),
        request(&[]),
        b"[1, 2]".to_vec(),
        serde_json::to_vec(&json!({
            "text": "Revenue grew.",
            "dimensions": ["Sentiment"],
            "horizon": 1,
            "fundamentals_row_ref": {"firm_id": "NOPE", "call_date": "2000-01-01"},
        }))
        .unwrap(),
    ] {
        let r = call("POST", format!("{base}/whatif"), Some(body)).await;
        assert_eq!(r.status, 400, "{:?}", r.body);
        assert!(r.body["error"].is_string());
    }
}

#[tokio::test(flavor = "multi_thread")]
async fn identity_morphs_have_zero_effect() {
    let approve = ScriptedGenerator::new(["1. Yes"]);
    let base = serve(state(true, Arc::new(IdentityGenerator), Arc::new(approve))).await;
    let r = call(
        "POST",
        format!("{base}/whatif"),
        Some(request(&["Sentiment", "Uncertainty"])),
    )
    .await;
    assert_eq!(r.status, 200, "{:?}", r.body);
    let resp: WhatIfResponse = serde_json::from_value(r.body).unwrap();
    assert_eq!(resp.results.len(), 2);
    for res in &resp.results {
        assert!(res.accepted);
        let pte = res.pte.as_ref().unwrap();
        assert_eq!(pte.len(), 3);
        assert!(pte.values().all(|v| *v == 0.0), "{pte:?}");
    }
    assert_eq!(resp.fundamental_news.len(), 3);
}

#[tokio::test(flavor = "multi_thread")]
async fn marker_morphs_move_predictions_in_the_planted_direction() {
    let base = serve(marker_state()).await;
    let n = 20;
    let (mut s, mut u) = (0.0, 0.0);
    for i in 0..n {
        let r = call(
            "POST",
            format!("{base}/whatif"),
            Some(request_for(i, &["Sentiment", "uncertainty"])),
        )
        .await;
        assert_eq!(r.status, 200, "{:?}", r.body);
        let resp: WhatIfResponse = serde_json::from_value(r.body).unwrap();
        let by_dim: BTreeMap<_, _> = resp.results.iter().map(|r| (r.label.clone(), r)).collect();
        let sentiment = by_dim["Sentiment"];
        assert!(sentiment.accepted && sentiment.numeral_check_passed);
        assert_ne!(sentiment.morphed_text, held_out_example(i).0);
        s += sentiment.pte.as_ref().unwrap()[&Target::ExpectedChange] / n as f64;
        u += by_dim["Uncertainty"].pte.as_ref().unwrap()[&Target::ExpectedChange] / n as f64;
    }
    assert!(s > 10.0, "mean sentiment effect {s}");
    assert!(u < -10.0, "mean uncertainty effect {u}");
}

#[tokio::test(flavor = "multi_thread")]
async fn rejected_morphs_carry_no_effect() {
    // Drops every numeral, so the judge and the numeral check both refuse.
    let scrub = ScriptedGenerator::new(["Revenue was strong."]);
    let base = serve(state(true, Arc::new(scrub), Arc::new(MarkerJudge))).await;
    let r = call("POST", format!("{base}/whatif"), Some(request(&["Guidance"]))).await;
    assert_eq!(r.status, 200, "{:?}", r.body);
    let res = &r.body["results"][0];
    assert_eq!(res["accepted"], false);
    assert_eq!(res["numeral_check_passed"], false);
    assert!(res["pte"].is_null());
}

#[tokio::test(flavor = "multi_thread")]
async fn unreachable_generator_is_a_bad_gateway() {
    let dead = RemoteGenerator::new("http://127.0.0.1:9", None);
    let base = serve(state(true, Arc::new(dead), Arc::new(MarkerJudge))).await;
    let r = call("POST", format!("{base}/whatif"), Some(request(&["Jargon"]))).await;
    assert_eq!(r.status, 502, "{:?}", r.body);
}

const TOKEN: &str = "Bearer s3cret";

fn authorized(h: &HeaderMap) -> bool {
    h.get("authorization").and_then(|v| v.to_str().ok()) == Some(TOKEN)
}

fn stub_models() -> Router {
    Router::new()
        .route(
            "/embed",
            post(|h: HeaderMap, Json(req): Json<EmbedRequest>| async move {
                if !authorized(&h) {
                    return Err(StatusCode::UNAUTHORIZED);
                }
                let mut v = vec![0.0; 8];
                v[req.text.len() % 8] = 1.0;
                Ok(Json(EmbedResponse { embedding: v }))
            }),
        )
        .route(
            "/generate",
            post(|h: HeaderMap, Json(req): Json<GenerateRequest>| async move {
                if !authorized(&h) {
                    return Err(StatusCode::UNAUTHORIZED);
                }
                assert!(!req.model.is_empty() && !req.system.is_empty());
                Ok(Json(GenerateResponse {
                    text: format!("{} thrilled", req.prompt),
                }))
            }),
        )
}

#[tokio::test(flavor = "multi_thread")]
async fn remote_clients_speak_the_stub_protocol() {
    let base = spawn(stub_models()).await;
    let b = base.clone();
    tokio::task::spawn_blocking(move || {
        let e = RemoteEmbedder::new(&b, Some(TOKEN.into()), 8);
        let v = e.embed_chunk("abc").unwrap();
        assert_eq!(v.len(), 8);
        assert_eq!(v[3], 1.0);
        let denied = RemoteEmbedder::new(&b, Some("Bearer wrong".into()), 8);
        assert!(denied.embed_chunk("abc").unwrap_err().contains("401"));
    })
    .await
    .unwrap();

    let generator = RemoteGenerator::new(&base, Some(TOKEN.into()));
    let approve = ScriptedGenerator::new(["1. Yes"]);
    let app = serve(state(true, Arc::new(generator), Arc::new(approve))).await;
    let r = call("POST", format!("{app}/whatif"), Some(request(&["Sentiment"]))).await;
    assert_eq!(r.status, 200, "{:?}", r.body);
    let res = &r.body["results"][0];
    assert_eq!(res["accepted"], true);
    assert!(res["morphed_text"].as_str().unwrap().contains("thrilled"));
}
