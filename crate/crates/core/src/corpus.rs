//! Transcript ingestion: version selection, prepared-remark extraction,
//! numeral masking and fixed-window chunking.

use std::collections::BTreeMap;

use chrono::{DateTime, NaiveDate, Utc};
use serde::{Deserialize, Serialize};

pub const DEFAULT_MASK_TOKEN: &str = "[MASK]";
pub const DEFAULT_WINDOW_SIZE: usize = 512;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum CorpusError {
    #[error("no versions")]
    NoVersions,
    #[error("versions belong to different events: ({0}, {1}) vs ({2}, {3})")]
    MixedEvents(String, String, String, String),
    #[error("empty management remarks")]
    EmptyManagementRemarks,
    #[error("empty text")]
    EmptyText,
    #[error("window size must be at least 1")]
    ZeroWindow,
    #[error("invalid mask token {0:?}: must be nonempty, digit-free and whitespace-free")]
    InvalidMaskToken(String),
    #[error("malformed transcript {event_id}/{firm_id}: {reason}")]
    Malformed {
        event_id: String,
        firm_id: String,
        reason: String,
    },
}

/// Editorial review stages, ordered from least to most refined.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EditorialStage {
    Preliminary,
    Edited,
    Proofing,
    Audited,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SpeakerRole {
    Management,
    Analyst,
    Operator,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpeakerSegment {
    pub speaker_role: SpeakerRole,
    pub order_index: u32,
    pub text: String,
}

/// One editorial version of a call transcript for an (event, firm) pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TranscriptVersion {
    pub event_id: String,
    pub firm_id: String,
    pub call_date: NaiveDate,
    pub editorial_stage: EditorialStage,
    pub version_timestamp: DateTime<Utc>,
    pub segments: Vec<SpeakerSegment>,
    /// Set by the vendor when the transcript covers several companies.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub multi_company: bool,
}

impl TranscriptVersion {
    pub fn validate(&self) -> Result<(), CorpusError> {
        let malformed = |reason: &str| CorpusError::Malformed {
            event_id: self.event_id.clone(),
            firm_id: self.firm_id.clone(),
            reason: reason.to_string(),
        };
        if self.segments.is_empty() {
            return Err(malformed("no segments"));
        }
        for w in self.segments.windows(2) {
            if w[1].order_index <= w[0].order_index {
                return Err(malformed("order_index not strictly increasing"));
            }
        }
        if self.segments.iter().any(|s| s.text.trim().is_empty()) {
            return Err(malformed("empty segment text"));
        }
        Ok(())
    }

    fn selection_key(&self) -> (EditorialStage, DateTime<Utc>) {
        (self.editorial_stage, self.version_timestamp)
    }
}

/// Numeral-masked, chunked management remarks of one call.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaskedDocument {
    pub doc_id: String,
    pub firm_id: String,
    pub call_date: NaiveDate,
    pub chunks: Vec<TextChunk>,
    pub mask_count: usize,
}

impl MaskedDocument {
    /// Chunk texts re-joined with single spaces.
    pub fn text(&self) -> String {
        self.chunks
            .iter()
            .map(|c| c.text.as_str())
            .collect::<Vec<_>>()
            .join(" ")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TextChunk {
    pub chunk_index: usize,
    pub token_count: usize,
    pub text: String,
}

/// Picks the most refined version of one event: highest editorial stage,
/// then latest timestamp. Exact ties fall back to comparing segment content
/// so the result does not depend on input order.
pub fn select_latest_transcript(versions: &[TranscriptVersion]) -> Result<&TranscriptVersion, CorpusError> {
    let first = versions.first().ok_or(CorpusError::NoVersions)?;
    if let Some(other) = versions
        .iter()
        .find(|v| v.event_id != first.event_id || v.firm_id != first.firm_id)
    {
        return Err(CorpusError::MixedEvents(
            first.event_id.clone(),
            first.firm_id.clone(),
            other.event_id.clone(),
            other.firm_id.clone(),
        ));
    }
    let best = versions
        .iter()
        .max_by(|a, b| {
            a.selection_key()
                .cmp(&b.selection_key())
                .then_with(|| segment_key(a).cmp(&segment_key(b)))
        })
        .expect("nonempty");
    Ok(best)
}

fn segment_key(v: &TranscriptVersion) -> Vec<(u32, SpeakerRole, &str)> {
    v.segments
        .iter()
        .map(|s| (s.order_index, s.speaker_role, s.text.as_str()))
        .collect()
}

/// Groups versions by (event_id, firm_id), drops multi-company transcripts and
/// keeps the latest version of each pair. Output is sorted by (firm_id, event_id).
pub fn latest_per_event(versions: Vec<TranscriptVersion>) -> Vec<TranscriptVersion> {
    let mut groups: BTreeMap<(String, String), Vec<TranscriptVersion>> = BTreeMap::new();
    for v in versions {
        if v.multi_company {
            continue;
        }
        groups
            .entry((v.firm_id.clone(), v.event_id.clone()))
            .or_default()
            .push(v);
    }
    groups
        .into_values()
        .map(|vs| select_latest_transcript(&vs).expect("grouped by event").clone())
        .collect()
}

/// Prepared remarks: management turns before the first analyst turn, joined by
/// single spaces.
pub fn extract_management_remarks(t: &TranscriptVersion) -> Result<String, CorpusError> {
    let mut segs: Vec<&SpeakerSegment> = t.segments.iter().collect();
    segs.sort_by_key(|s| s.order_index);
    let parts: Vec<&str> = segs
        .iter()
        .take_while(|s| s.speaker_role != SpeakerRole::Analyst)
        .filter(|s| s.speaker_role == SpeakerRole::Management)
        .map(|s| s.text.trim())
        .filter(|s| !s.is_empty())
        .collect();
    if parts.is_empty() {
        return Err(CorpusError::EmptyManagementRemarks);
    }
    Ok(parts.join(" "))
}

const LEADING_PUNCT: &[char] = &['(', '[', '{', '"', '\'', '“', '‘'];
const TRAILING_PUNCT: &[char] = &[',', '.', ';', ':', '!', '?', ')', ']', '}', '"', '\'', '”', '’'];

/// Splits a whitespace token into (opening punctuation, core, closing punctuation).
pub(crate) fn split_token(tok: &str) -> (&str, &str, &str) {
    let core_start = tok.len() - tok.trim_start_matches(LEADING_PUNCT).len();
    let rest = &tok[core_start..];
    let core_len = rest.trim_end_matches(TRAILING_PUNCT).len();
    (&tok[..core_start], &rest[..core_len], &rest[core_len..])
}

pub(crate) fn has_digit(s: &str) -> bool {
    s.chars().any(|c| c.is_ascii_digit())
}

fn check_mask_token(mask_token: &str) -> Result<(), CorpusError> {
    if mask_token.is_empty() || has_digit(mask_token) || mask_token.contains(char::is_whitespace) {
        return Err(CorpusError::InvalidMaskToken(mask_token.to_string()));
    }
    Ok(())
}

/// Replaces every digit-bearing token with `mask_token`, keeping sentence
/// punctuation attached to the token in place. Tokens are re-joined with
/// single spaces. Returns the masked text and the number of replacements.
pub fn mask_numerals(s: &str, mask_token: &str) -> Result<(String, usize), CorpusError> {
    check_mask_token(mask_token)?;
    let mut count = 0;
    let mut out: Vec<String> = Vec::new();
    for tok in s.split_whitespace() {
        if !has_digit(tok) {
            out.push(tok.to_string());
            continue;
        }
        count += 1;
        let (lead, core, trail) = split_token(tok);
        // digits can only sit in the core: the punctuation sets are digit-free
        if core.is_empty() {
            out.push(mask_token.to_string());
        } else {
            out.push(format!("{lead}{mask_token}{trail}"));
        }
    }
    Ok((out.join(" "), count))
}

/// Partitions whitespace tokens into consecutive windows of `window_size`.
pub fn chunk_text(s: &str, window_size: usize) -> Result<Vec<TextChunk>, CorpusError> {
    if window_size == 0 {
        return Err(CorpusError::ZeroWindow);
    }
    let tokens: Vec<&str> = s.split_whitespace().collect();
    if tokens.is_empty() {
        return Err(CorpusError::EmptyText);
    }
    Ok(tokens
        .chunks(window_size)
        .enumerate()
        .map(|(i, toks)| TextChunk {
            chunk_index: i,
            token_count: toks.len(),
            text: toks.join(" "),
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct MaskConfig {
    pub mask_token: String,
    pub window_size: usize,
}

impl Default for MaskConfig {
    fn default() -> Self {
        Self {
            mask_token: DEFAULT_MASK_TOKEN.to_string(),
            window_size: DEFAULT_WINDOW_SIZE,
        }
    }
}

/// Masks and chunks one document's remarks.
pub fn build_masked_document(
    doc_id: &str,
    firm_id: &str,
    call_date: NaiveDate,
    remarks: &str,
    cfg: &MaskConfig,
) -> Result<MaskedDocument, CorpusError> {
    let (masked, mask_count) = mask_numerals(remarks, &cfg.mask_token)?;
    let chunks = chunk_text(&masked, cfg.window_size)?;
    Ok(MaskedDocument {
        doc_id: doc_id.to_string(),
        firm_id: firm_id.to_string(),
        call_date,
        chunks,
        mask_count,
    })
}

/// Canonical document id for an (event, firm) pair.
pub fn doc_id(firm_id: &str, event_id: &str) -> String {
    format!("{firm_id}:{event_id}")
}

/// Prepared remarks of the latest version of every single-company event.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RemarksRecord {
    pub doc_id: String,
    pub firm_id: String,
    pub event_id: String,
    pub call_date: NaiveDate,
    pub text: String,
}

/// Ingest pass: latest version per event, then prepared remarks. Events whose
/// remarks are empty or malformed are returned separately with the reason.
pub fn ingest(versions: Vec<TranscriptVersion>) -> (Vec<RemarksRecord>, Vec<(String, CorpusError)>) {
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for t in latest_per_event(versions) {
        let id = doc_id(&t.firm_id, &t.event_id);
        match t.validate().and_then(|_| extract_management_remarks(&t)) {
            Ok(text) => kept.push(RemarksRecord {
                doc_id: id,
                firm_id: t.firm_id,
                event_id: t.event_id,
                call_date: t.call_date,
                text,
            }),
            Err(e) => dropped.push((id, e)),
        }
    }
    (kept, dropped)
}
