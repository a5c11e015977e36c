//! Builds the embedding provider and text generators named in the config.

use narrlab::embed::{hashing_embedder, EmbeddingProvider};
use narrlab::morph::stubs::{IdentityGenerator, ScriptedGenerator};
use narrlab::morph::TextGenerator;
use narrlab::synth::{MarkerJudge, MarkerMorpher, MarkerRater};

use crate::config::{EmbedConfig, EmbedProvider, GeneratorKind, LabConfig};
use crate::error::LabError;
use crate::remote::{RemoteEmbedder, RemoteGenerator};

pub fn embedder(cfg: &EmbedConfig) -> Result<Box<dyn EmbeddingProvider>, LabError> {
    Ok(match cfg.provider {
        EmbedProvider::Hashing => Box::new(hashing_embedder(cfg.seed, cfg.dim)),
        EmbedProvider::Remote => Box::new(RemoteEmbedder::from_env(cfg.dim)?),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Role {
    Morph,
    Judge,
    Rate,
}

pub fn generator(kind: GeneratorKind, role: Role, cfg: &LabConfig) -> Result<Box<dyn TextGenerator>, LabError> {
    Ok(match (kind, role) {
        (GeneratorKind::Remote, _) => Box::new(RemoteGenerator::from_env()?),
        (GeneratorKind::Marker, Role::Morph) => Box::new(MarkerMorpher::from_prompt()),
        (GeneratorKind::Marker, Role::Judge) => Box::new(MarkerJudge),
        (GeneratorKind::Marker, Role::Rate) => Box::new(MarkerRater::for_config(&cfg.synth)),
        (GeneratorKind::Identity, Role::Morph) => Box::new(IdentityGenerator),
        (GeneratorKind::Approve, Role::Judge) => Box::new(ScriptedGenerator::new(["1. Yes"])),
        (kind, role) => {
            return Err(LabError::Validation(format!(
                "generator {kind:?} cannot act as {role:?}"
            )))
        }
    })
}
