//! Run directories: `runs/<run_id>/` holding the stage artifacts, the frozen
//! config and a hash-stamped manifest.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::config::{sha256_hex, LabConfig};
use crate::error::LabError;

pub const MANIFEST: &str = "manifest.json";
pub const CONFIG: &str = "config.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactRef {
    /// Path relative to the run directory.
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub created_at: DateTime<Utc>,
    pub config_hash: String,
    pub stage_outputs: BTreeMap<String, ArtifactRef>,
    pub seeds: BTreeMap<String, u64>,
    /// Set by `report`; a completed run is never written again.
    #[serde(default)]
    pub completed: bool,
}

/// Identifiers are restricted so they are always a single safe path segment.
pub fn valid_run_id(id: &str) -> bool {
    !id.is_empty()
        && id.len() <= 128
        && !id.starts_with('.')
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'))
}

pub fn new_run_id(cfg: &LabConfig) -> String {
    format!("{}-{}", Utc::now().format("%Y%m%dT%H%M%S%3f"), &cfg.hash()[..8])
}

pub fn list_runs(root: &Path) -> Result<Vec<RunManifest>, LabError> {
    let mut out = Vec::new();
    let entries = match fs::read_dir(root) {
        Ok(e) => e,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(out),
        Err(e) => return Err(LabError::io(root, e)),
    };
    for entry in entries {
        let entry = entry.map_err(|e| LabError::io(root, e))?;
        let path = entry.path().join(MANIFEST);
        if path.is_file() {
            out.push(read_json(&path)?);
        }
    }
    out.sort_by(|a, b| a.run_id.cmp(&b.run_id));
    Ok(out)
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T, LabError> {
    let text = fs::read_to_string(path).map_err(|e| LabError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| LabError::Validation(format!("{}: {e}", path.display())))
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), LabError> {
    let tmp = path.with_extension("tmp");
    fs::write(&tmp, bytes).map_err(|e| LabError::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| LabError::io(path, e))
}

pub fn file_sha256(path: &Path) -> Result<String, LabError> {
    let bytes = fs::read(path).map_err(|e| LabError::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

#[derive(Debug)]
pub struct RunDir {
    pub root: PathBuf,
    pub manifest: RunManifest,
    pub config: LabConfig,
}

impl RunDir {
    /// Opens `runs_root/<id>`, creating it with `config` when it does not
    /// exist. An existing run keeps its frozen config; passing a different one
    /// is a validation error.
    pub fn open_or_create(runs_root: &Path, id: &str, config: Option<LabConfig>) -> Result<Self, LabError> {
        if !valid_run_id(id) {
            return Err(LabError::Validation(format!("invalid run id {id:?}")));
        }
        let root = runs_root.join(id);
        let manifest_path = root.join(MANIFEST);
        if manifest_path.is_file() {
            let manifest: RunManifest = read_json(&manifest_path)?;
            let stored: LabConfig = read_json(&root.join(CONFIG))?;
            if stored.hash() != manifest.config_hash {
                return Err(LabError::Validation(format!(
                    "run {id}: config.json does not match the manifest hash"
                )));
            }
            if let Some(cfg) = config {
                if cfg.hash() != manifest.config_hash {
                    return Err(LabError::Validation(format!(
                        "run {id} was created with a different config (hash {})",
                        &manifest.config_hash[..12]
                    )));
                }
            }
            return Ok(Self {
                root,
                manifest,
                config: stored,
            });
        }
        let config = config.unwrap_or_default();
        config.validate()?;
        fs::create_dir_all(&root).map_err(|e| LabError::io(&root, e))?;
        write_atomic(&root.join(CONFIG), config.canonical_json().as_bytes())?;
        let seeds = BTreeMap::from([
            ("synth".to_string(), config.synth.seed),
            ("embed".to_string(), config.embed.seed),
            ("train".to_string(), config.train.grid.first().map_or(0, |h| h.seed)),
        ]);
        let manifest = RunManifest {
            run_id: id.to_string(),
            created_at: Utc::now(),
            config_hash: config.hash(),
            stage_outputs: BTreeMap::new(),
            seeds,
            completed: false,
        };
        let run = Self { root, manifest, config };
        run.save_manifest()?;
        Ok(run)
    }

    /// Opens an existing run without creating anything.
    pub fn open(runs_root: &Path, id: &str) -> Result<Self, LabError> {
        if !valid_run_id(id) {
            return Err(LabError::Validation(format!("invalid run id {id:?}")));
        }
        if !runs_root.join(id).join(MANIFEST).is_file() {
            return Err(LabError::Validation(format!(
                "no run {id} under {}",
                runs_root.display()
            )));
        }
        Self::open_or_create(runs_root, id, None)
    }

    fn save_manifest(&self) -> Result<(), LabError> {
        let json = serde_json::to_string_pretty(&self.manifest).expect("manifest serializes");
        write_atomic(&self.root.join(MANIFEST), json.as_bytes())
    }

    fn ensure_writable(&self) -> Result<(), LabError> {
        if self.manifest.completed {
            return Err(LabError::Validation(format!(
                "run {} is complete and cannot be modified",
                self.manifest.run_id
            )));
        }
        Ok(())
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    /// Path of a registered artifact, after checking its hash stamp.
    pub fn require(&self, artifact: &str, stage: &'static str) -> Result<PathBuf, LabError> {
        let Some(r) = self.manifest.stage_outputs.get(artifact) else {
            return Err(LabError::MissingStage {
                stage,
                artifact: artifact.to_string(),
            });
        };
        let path = self.root.join(&r.path);
        let actual = file_sha256(&path)?;
        if actual != r.sha256 {
            return Err(LabError::Validation(format!(
                "artifact {artifact} was modified after it was written"
            )));
        }
        Ok(path)
    }

    pub fn has(&self, artifact: &str) -> bool {
        self.manifest.stage_outputs.contains_key(artifact)
    }

    /// Writes bytes under the run directory and stamps them in the manifest.
    pub fn put_bytes(&mut self, artifact: &str, rel: &str, bytes: &[u8]) -> Result<PathBuf, LabError> {
        self.ensure_writable()?;
        let path = self.root.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(|e| LabError::io(parent, e))?;
        }
        write_atomic(&path, bytes)?;
        self.manifest.stage_outputs.insert(
            artifact.to_string(),
            ArtifactRef {
                path: rel.to_string(),
                sha256: sha256_hex(bytes),
            },
        );
        self.save_manifest()?;
        Ok(path)
    }

    pub fn put_json<T: Serialize>(&mut self, artifact: &str, rel: &str, value: &T) -> Result<PathBuf, LabError> {
        let mut json = serde_json::to_string_pretty(value).expect("artifact serializes");
        json.push('\n');
        self.put_bytes(artifact, rel, json.as_bytes())
    }

    pub fn put_jsonl<T: Serialize>(&mut self, artifact: &str, rel: &str, items: &[T]) -> Result<PathBuf, LabError> {
        self.put_bytes(artifact, rel, narrlab::jsonl::to_string(items).as_bytes())
    }

    pub fn get_json<T: DeserializeOwned>(&self, artifact: &str, stage: &'static str) -> Result<T, LabError> {
        read_json(&self.require(artifact, stage)?)
    }

    pub fn get_jsonl<T: DeserializeOwned>(&self, artifact: &str, stage: &'static str) -> Result<Vec<T>, LabError> {
        Ok(narrlab::jsonl::read(self.require(artifact, stage)?)?)
    }

    pub fn complete(&mut self) -> Result<(), LabError> {
        self.ensure_writable()?;
        self.manifest.completed = true;
        self.save_manifest()
    }
}
