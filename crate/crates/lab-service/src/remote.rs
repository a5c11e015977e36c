//! HTTP clients for hosted embedding and generation models.
//!
//! Endpoints and credentials come from the environment so they never enter a
//! config file or its hash:
//!
//! * `NARRLAB_EMBED_ENDPOINT`, `NARRLAB_EMBED_AUTH`
//! * `NARRLAB_GENERATE_ENDPOINT`, `NARRLAB_GENERATE_AUTH`
//!
//! The auth variables hold the complete `Authorization` header value.

use std::time::Duration;

use narrlab::embed::EmbeddingProvider;
use narrlab::morph::{GenerationParams, TextGenerator};
use serde::{Deserialize, Serialize};

use crate::error::LabError;

pub const EMBED_ENDPOINT_VAR: &str = "NARRLAB_EMBED_ENDPOINT";
pub const EMBED_AUTH_VAR: &str = "NARRLAB_EMBED_AUTH";
pub const GENERATE_ENDPOINT_VAR: &str = "NARRLAB_GENERATE_ENDPOINT";
pub const GENERATE_AUTH_VAR: &str = "NARRLAB_GENERATE_AUTH";

const TIMEOUT: Duration = Duration::from_secs(120);

#[derive(Debug, Serialize, Deserialize)]
pub struct EmbedRequest {
    pub text: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct EmbedResponse {
    pub embedding: Vec<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct GenerateRequest {
    pub model: String,
    pub system: String,
    pub prompt: String,
    pub temperature: f64,
    pub top_p: f64,
    pub max_tokens: usize,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct GenerateResponse {
    pub text: String,
}

#[derive(Debug, Clone)]
struct Endpoint {
    url: String,
    auth: Option<String>,
    agent: ureq::Agent,
}

impl Endpoint {
    fn new(base: &str, path: &str, auth: Option<String>) -> Self {
        Self {
            url: format!("{}/{path}", base.trim_end_matches('/')),
            auth,
            agent: ureq::AgentBuilder::new().timeout(TIMEOUT).build(),
        }
    }

    fn from_env(endpoint_var: &str, auth_var: &str, path: &str) -> Result<Self, LabError> {
        let base =
            std::env::var(endpoint_var).map_err(|_| LabError::Validation(format!("{endpoint_var} is not set")))?;
        Ok(Self::new(&base, path, std::env::var(auth_var).ok()))
    }

    fn post<B: Serialize, R: for<'de> Deserialize<'de>>(&self, body: &B) -> Result<R, String> {
        let mut req = self.agent.post(&self.url);
        if let Some(auth) = &self.auth {
            req = req.set("Authorization", auth);
        }
        let resp = req.send_json(body).map_err(|e| format!("POST {}: {e}", self.url))?;
        resp.into_json()
            .map_err(|e| format!("POST {}: bad response body: {e}", self.url))
    }
}

/// Embedding provider speaking `POST /embed {text} -> {embedding}`.
#[derive(Debug, Clone)]
pub struct RemoteEmbedder {
    endpoint: Endpoint,
    dim: usize,
    name: String,
}

impl RemoteEmbedder {
    pub fn new(base_url: &str, auth: Option<String>, dim: usize) -> Self {
        Self {
            endpoint: Endpoint::new(base_url, "embed", auth),
            dim,
            name: format!("remote:{base_url}"),
        }
    }

    pub fn from_env(dim: usize) -> Result<Self, LabError> {
        let endpoint = Endpoint::from_env(EMBED_ENDPOINT_VAR, EMBED_AUTH_VAR, "embed")?;
        Ok(Self {
            name: format!("remote:{}", endpoint.url),
            endpoint,
            dim,
        })
    }
}

impl EmbeddingProvider for RemoteEmbedder {
    fn name(&self) -> &str {
        &self.name
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn embed_chunk(&self, text: &str) -> Result<Vec<f64>, String> {
        let resp: EmbedResponse = self.endpoint.post(&EmbedRequest { text: text.to_string() })?;
        Ok(resp.embedding)
    }
}

/// Text generator speaking
/// `POST /generate {model, system, prompt, temperature, top_p, max_tokens} -> {text}`.
#[derive(Debug, Clone)]
pub struct RemoteGenerator {
    endpoint: Endpoint,
}

impl RemoteGenerator {
    pub fn new(base_url: &str, auth: Option<String>) -> Self {
        Self {
            endpoint: Endpoint::new(base_url, "generate", auth),
        }
    }

    pub fn from_env() -> Result<Self, LabError> {
        Ok(Self {
            endpoint: Endpoint::from_env(GENERATE_ENDPOINT_VAR, GENERATE_AUTH_VAR, "generate")?,
        })
    }
}

impl TextGenerator for RemoteGenerator {
    fn generate(&self, system: &str, user_text: &str, params: &GenerationParams) -> Result<String, String> {
        let resp: GenerateResponse = self.endpoint.post(&GenerateRequest {
            model: params.model_name.clone(),
            system: system.to_string(),
            prompt: user_text.to_string(),
            temperature: params.temperature,
            top_p: params.top_p,
            max_tokens: params.max_tokens,
        })?;
        Ok(resp.text)
    }
}
