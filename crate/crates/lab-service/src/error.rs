use std::path::Path;

use narrlab::jsonl::JsonlError;

#[derive(Debug, thiserror::Error)]
pub enum LabError {
    #[error("{0}")]
    Validation(String),
    #[error("missing stage output: {artifact} (run `{stage}` first)")]
    MissingStage { stage: &'static str, artifact: String },
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("remote provider: {0}")]
    Remote(String),
}

impl LabError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        LabError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    pub fn validation(e: impl std::fmt::Display) -> Self {
        LabError::Validation(e.to_string())
    }

    /// Process exit code: 1 for invalid input or stage order, 2 for I/O.
    pub fn exit_code(&self) -> u8 {
        match self {
            LabError::Validation(_) | LabError::MissingStage { .. } => 1,
            LabError::Io { .. } | LabError::Remote(_) => 2,
        }
    }
}

impl From<JsonlError> for LabError {
    fn from(e: JsonlError) -> Self {
        match e {
            JsonlError::Io { path, source } => LabError::Io { path, source },
            parse @ JsonlError::Parse { .. } => LabError::Validation(parse.to_string()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes() {
        assert_eq!(LabError::Validation("x".into()).exit_code(), 1);
        let missing = LabError::MissingStage {
            stage: "features",
            artifact: "features_st".into(),
        };
        assert_eq!(missing.exit_code(), 1);
        assert!(missing.to_string().starts_with("missing stage output"));
        assert_eq!(LabError::io(Path::new("a"), std::io::Error::other("x")).exit_code(), 2);
    }
}
