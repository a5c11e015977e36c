//! The lab configuration: one JSON document with a block per stage.

use std::path::{Path, PathBuf};

use narrlab::corpus::MaskConfig;
use narrlab::gbm::Hyperparams;
use narrlab::morph::GenerationParams;
use narrlab::pipeline::PipelineConfig;
use narrlab::synth::SynthConfig;
use narrlab::NarrativeDimension;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::LabError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
#[derive(Default)]
pub struct LabConfig {
    pub synth: SynthConfig,
    pub inputs: InputsConfig,
    pub mask: MaskConfig,
    pub embed: EmbedConfig,
    pub targets: TargetsConfig,
    pub train: TrainConfig,
    pub morph: MorphConfig,
    pub factors: FactorsConfig,
    pub report: ReportConfig,
    pub serve: ServeConfig,
}

/// External data files. When unset, `ingest` uses the output of `synth`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputsConfig {
    pub transcripts: Option<PathBuf>,
    pub forecasts: Option<PathBuf>,
    pub events: Option<PathBuf>,
    pub fundamentals: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmbedProvider {
    Hashing,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EmbedConfig {
    pub provider: EmbedProvider,
    pub seed: u64,
    pub dim: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TargetsConfig {
    pub trim_lower: f64,
    pub trim_upper: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub test_fraction: f64,
    pub cv_folds: usize,
    pub grid: Vec<Hyperparams>,
}

impl Default for EmbedConfig {
    fn default() -> Self {
        let p = PipelineConfig::default();
        Self {
            provider: EmbedProvider::Hashing,
            seed: p.embed_seed,
            dim: p.embed_dim,
        }
    }
}

impl Default for TargetsConfig {
    fn default() -> Self {
        let p = PipelineConfig::default();
        Self {
            trim_lower: p.trim_lower,
            trim_upper: p.trim_upper,
        }
    }
}

impl Default for TrainConfig {
    fn default() -> Self {
        let p = PipelineConfig::default();
        Self {
            test_fraction: p.test_fraction,
            cv_folds: p.cv_folds,
            grid: p.grid,
        }
    }
}

/// Which text generator answers morphing or judging requests.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeneratorKind {
    /// Offline marker-word morpher, judge or rater from the synthetic world.
    Marker,
    /// Returns the paragraph unchanged.
    Identity,
    /// Approves every morph; only meaningful as a judge.
    Approve,
    Remote,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MorphConfig {
    pub generator: GeneratorKind,
    pub judge: GeneratorKind,
    pub params: GenerationParams,
    pub max_attempts: usize,
    pub dimensions: Vec<NarrativeDimension>,
}

impl Default for MorphConfig {
    fn default() -> Self {
        Self {
            generator: GeneratorKind::Marker,
            judge: GeneratorKind::Marker,
            params: GenerationParams::default(),
            max_attempts: narrlab::morph::DEFAULT_MAX_ATTEMPTS,
            dimensions: NarrativeDimension::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FactorsConfig {
    pub rater: GeneratorKind,
    pub params: GenerationParams,
}

impl Default for FactorsConfig {
    fn default() -> Self {
        Self {
            rater: GeneratorKind::Marker,
            params: GenerationParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportConfig {
    /// Horizon whose PTEs feed the bar datasets.
    pub figure_horizon: u8,
}

impl Default for ReportConfig {
    fn default() -> Self {
        Self { figure_horizon: 1 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServeConfig {
    pub host: String,
    pub port: u16,
    /// Run whose models answer what-if requests.
    pub model_run: Option<String>,
    pub max_in_flight: usize,
    /// Allowed browser origin; `None` allows any.
    pub cors_origin: Option<String>,
}

impl Default for ServeConfig {
    fn default() -> Self {
        Self {
            host: "127.0.0.1".into(),
            port: 8080,
            model_run: None,
            max_in_flight: 4,
            cors_origin: None,
        }
    }
}

impl LabConfig {
    pub fn load(path: &Path) -> Result<Self, LabError> {
        let text = std::fs::read_to_string(path).map_err(|e| LabError::io(path, e))?;
        let cfg: LabConfig =
            serde_json::from_str(&text).map_err(|e| LabError::Validation(format!("config {}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), LabError> {
        let bad = |m: String| Err(LabError::Validation(m));
        self.synth.validate().map_err(|e| LabError::Validation(e.to_string()))?;
        if self.embed.dim == 0 {
            return bad("embed.dim must be positive".into());
        }
        let (lo, hi) = (self.targets.trim_lower, self.targets.trim_upper);
        if !(0.0..=1.0).contains(&lo) || !(0.0..=1.0).contains(&hi) || lo >= hi {
            return bad(format!(
                "targets trim quantiles must satisfy 0 <= lower < upper <= 1, got {lo} and {hi}"
            ));
        }
        if !(self.train.test_fraction > 0.0 && self.train.test_fraction < 1.0) {
            return bad("train.test_fraction must lie in (0, 1)".into());
        }
        if self.train.grid.is_empty() {
            return bad("train.grid must not be empty".into());
        }
        for hp in &self.train.grid {
            hp.validate()
                .map_err(|e| LabError::Validation(format!("train.grid: {e}")))?;
        }
        if self.train.grid.len() > 1 && self.train.cv_folds < 2 {
            return bad("train.cv_folds must be at least 2 when the grid has several entries".into());
        }
        self.morph
            .params
            .validate()
            .map_err(|e| LabError::Validation(e.to_string()))?;
        if self.morph.max_attempts == 0 {
            return bad("morph.max_attempts must be at least 1".into());
        }
        if self.morph.generator == GeneratorKind::Approve {
            return bad("morph.generator cannot be \"approve\"".into());
        }
        if !(1..=3).contains(&self.report.figure_horizon) {
            return bad("report.figure_horizon must be 1, 2 or 3".into());
        }
        if self.serve.max_in_flight == 0 {
            return bad("serve.max_in_flight must be positive".into());
        }
        Ok(())
    }

    /// Applies a root seed to every seeded stage.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.synth.seed = seed;
        self.embed.seed = seed;
        for hp in &mut self.train.grid {
            hp.seed = seed;
        }
        self
    }

    pub fn pipeline(&self) -> PipelineConfig {
        PipelineConfig {
            embed_seed: self.embed.seed,
            embed_dim: self.embed.dim,
            trim_lower: self.targets.trim_lower,
            trim_upper: self.targets.trim_upper,
            test_fraction: self.train.test_fraction,
            cv_folds: self.train.cv_folds,
            grid: self.train.grid.clone(),
            max_attempts: self.morph.max_attempts,
        }
    }

    pub fn canonical_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn hash(&self) -> String {
        sha256_hex(self.canonical_json().as_bytes())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate_and_roundtrip() {
        let cfg = LabConfig::default();
        cfg.validate().unwrap();
        let back: LabConfig = serde_json::from_str(&cfg.canonical_json()).unwrap();
        assert_eq!(back, cfg);
        assert_eq!(back.hash(), cfg.hash());
    }

    #[test]
    fn partial_blocks_fill_defaults() {
        let cfg: LabConfig = serde_json::from_str(r#"{"synth": {"n_events": 120, "n_firms": 20}}"#).unwrap();
        assert_eq!(cfg.synth.n_events, 120);
        assert_eq!(cfg.embed.dim, 768);
        assert_eq!(cfg.morph.dimensions.len(), 6);
    }

    #[test]
    fn unknown_block_is_rejected() {
        assert!(serde_json::from_str::<LabConfig>(r#"{"trainn": {}}"#).is_err());
    }

    #[test]
    fn seed_reaches_every_seeded_stage() {
        let cfg = LabConfig::default().with_seed(99);
        assert_eq!(cfg.synth.seed, 99);
        assert_eq!(cfg.embed.seed, 99);
        assert!(cfg.train.grid.iter().all(|h| h.seed == 99));
        assert_ne!(cfg.hash(), LabConfig::default().hash());
    }

    #[test]
    fn validation_messages() {
        let mut cfg = LabConfig::default();
        cfg.targets.trim_lower = 0.99;
        assert!(matches!(cfg.validate(), Err(LabError::Validation(m)) if m.contains("trim")));
        let mut cfg = LabConfig::default();
        cfg.morph.generator = GeneratorKind::Approve;
        assert!(cfg.validate().is_err());
    }
}
