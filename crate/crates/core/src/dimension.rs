use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// The six narrative directions a transcript can be morphed along.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NarrativeDimension {
    Guidance,
    Jargon,
    Confidence,
    GlobalFocus,
    Sentiment,
    Uncertainty,
}

impl NarrativeDimension {
    pub const ALL: [NarrativeDimension; 6] = [
        NarrativeDimension::Guidance,
        NarrativeDimension::Jargon,
        NarrativeDimension::Confidence,
        NarrativeDimension::GlobalFocus,
        NarrativeDimension::Sentiment,
        NarrativeDimension::Uncertainty,
    ];

    /// Human-readable label used in reports.
    pub fn label(self) -> &'static str {
        match self {
            NarrativeDimension::Guidance => "Guidance",
            NarrativeDimension::Jargon => "Jargon",
            NarrativeDimension::Confidence => "Confidence",
            NarrativeDimension::GlobalFocus => "Global Focus",
            NarrativeDimension::Sentiment => "Sentiment",
            NarrativeDimension::Uncertainty => "Uncertainty",
        }
    }

    /// Snake-case key used in file names and config maps.
    pub fn key(self) -> &'static str {
        match self {
            NarrativeDimension::Guidance => "guidance",
            NarrativeDimension::Jargon => "jargon",
            NarrativeDimension::Confidence => "confidence",
            NarrativeDimension::GlobalFocus => "global_focus",
            NarrativeDimension::Sentiment => "sentiment",
            NarrativeDimension::Uncertainty => "uncertainty",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for NarrativeDimension {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown narrative dimension {0:?}")]
pub struct UnknownDimension(pub String);

impl FromStr for NarrativeDimension {
    type Err = UnknownDimension;

    /// Accepts the enum name, the snake-case key or the report label, case-insensitively.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm: String = s
            .chars()
            .filter(|c| !matches!(c, '_' | ' ' | '-'))
            .flat_map(char::to_lowercase)
            .collect();
        let dim = match norm.as_str() {
            "guidance" => NarrativeDimension::Guidance,
            "jargon" => NarrativeDimension::Jargon,
            "confidence" => NarrativeDimension::Confidence,
            "globalfocus" | "globalperspective" => NarrativeDimension::GlobalFocus,
            "sentiment" => NarrativeDimension::Sentiment,
            "uncertainty" => NarrativeDimension::Uncertainty,
            _ => return Err(UnknownDimension(s.to_string())),
        };
        Ok(dim)
    }
}
