//! Counterfactual rewriting of management remarks along one narrative
//! dimension, validated by an LLM judge and a deterministic numeral check.

pub mod prompts;
pub mod stubs;

use serde::{Deserialize, Serialize};

use crate::corpus::{has_digit, split_token};
use crate::NarrativeDimension;

pub const DEFAULT_MAX_ATTEMPTS: usize = 3;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MorphError {
    #[error("document has no paragraphs")]
    NoParagraphs,
    #[error("generator failed on paragraph {paragraph}: {message}")]
    Generator { paragraph: usize, message: String },
    #[error("generator returned empty text for paragraph {0}")]
    EmptyGeneration(usize),
    #[error("judge generator failed: {0}")]
    Judge(String),
    #[error("invalid generation parameters: {0}")]
    InvalidParams(String),
    #[error("max_attempts must be at least 1")]
    ZeroAttempts,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerationParams {
    pub temperature: f64,
    pub top_p: f64,
    pub max_tokens: usize,
    pub model_name: String,
}

impl Default for GenerationParams {
    fn default() -> Self {
        Self {
            temperature: 0.7,
            top_p: 0.95,
            max_tokens: 1024,
            model_name: "stub".to_string(),
        }
    }
}

impl GenerationParams {
    pub fn validate(&self) -> Result<(), MorphError> {
        if !(self.temperature >= 0.0) {
            return Err(MorphError::InvalidParams("temperature must be >= 0".into()));
        }
        if !(self.top_p > 0.0 && self.top_p <= 1.0) {
            return Err(MorphError::InvalidParams("top_p must lie in (0, 1]".into()));
        }
        if self.max_tokens == 0 {
            return Err(MorphError::InvalidParams("max_tokens must be positive".into()));
        }
        Ok(())
    }
}

/// A chat-style text generator: a system prompt plus one user message.
pub trait TextGenerator: Send + Sync {
    fn generate(&self, system_prompt: &str, user_text: &str, params: &GenerationParams) -> Result<String, String>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Verdict {
    Yes,
    NotSure,
    No,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MorphResult {
    pub doc_id: String,
    pub dimension: NarrativeDimension,
    pub morphed_text: String,
    pub judge_verdict: Verdict,
    pub numeral_check_passed: bool,
    pub attempts: usize,
    pub accepted: bool,
}

/// Splits on blank lines; paragraphs are trimmed and empty ones dropped.
pub fn split_paragraphs(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut current: Vec<&str> = Vec::new();
    for line in text.lines() {
        if line.trim().is_empty() {
            if !current.is_empty() {
                out.push(current.join("\n"));
                current.clear();
            }
        } else {
            current.push(line.trim_end());
        }
    }
    if !current.is_empty() {
        out.push(current.join("\n"));
    }
    out
}

pub fn join_paragraphs(paragraphs: &[String]) -> String {
    paragraphs.join("\n\n")
}

/// Collapses any blank lines inside one generated paragraph so the paragraph
/// count of the document cannot change.
fn single_paragraph(text: &str) -> String {
    text.lines()
        .map(str::trim_end)
        .filter(|l| !l.trim().is_empty())
        .collect::<Vec<_>>()
        .join("\n")
}

/// Rewrites each paragraph independently, in order, with the dimension's prompt.
pub fn morph_document(
    paragraphs: &[String],
    dim: NarrativeDimension,
    gen: &dyn TextGenerator,
    params: &GenerationParams,
) -> Result<String, MorphError> {
    if paragraphs.is_empty() {
        return Err(MorphError::NoParagraphs);
    }
    params.validate()?;
    let system = prompts::morph_prompt(dim);
    let mut out = Vec::with_capacity(paragraphs.len());
    for (i, p) in paragraphs.iter().enumerate() {
        let raw = gen
            .generate(system, p, params)
            .map_err(|message| MorphError::Generator { paragraph: i, message })?;
        let text = single_paragraph(&raw);
        if text.trim().is_empty() {
            return Err(MorphError::EmptyGeneration(i));
        }
        out.push(text);
    }
    Ok(join_paragraphs(&out))
}

fn numeral_tokens(text: &str) -> Vec<String> {
    let mut v: Vec<String> = text
        .split_whitespace()
        .filter(|t| has_digit(t))
        .map(|t| split_token(t).1.to_lowercase())
        .collect();
    v.sort();
    v
}

/// True when both texts carry the same multiset of digit-bearing tokens,
/// compared after stripping surrounding punctuation and lowercasing.
pub fn numeral_preservation_check(original: &str, morphed: &str) -> bool {
    numeral_tokens(original) == numeral_tokens(morphed)
}

/// Reads a judge reply by its option prefix.
pub fn parse_verdict(reply: &str) -> Option<Verdict> {
    let s = reply
        .trim_start_matches(|c: char| c.is_whitespace() || matches!(c, '*' | '#' | '>' | '"' | '`'))
        .to_lowercase();
    let mut chars = s.chars();
    if let Some(c) = chars.next() {
        if c.is_ascii_digit() && !chars.next().is_some_and(|n| n.is_ascii_digit()) {
            return match c {
                '1' => Some(Verdict::Yes),
                '2' => Some(Verdict::NotSure),
                '3' => Some(Verdict::No),
                _ => None,
            };
        }
    }
    let word_end = |rest: &str| !rest.starts_with(|c: char| c.is_alphanumeric());
    if let Some(rest) = s.strip_prefix("yes") {
        return word_end(rest).then_some(Verdict::Yes);
    }
    if let Some(rest) = s.strip_prefix("not sure") {
        return word_end(rest).then_some(Verdict::NotSure);
    }
    if let Some(rest) = s.strip_prefix("no") {
        return word_end(rest).then_some(Verdict::No);
    }
    None
}

/// Zero-shot judgement. An unparseable reply is asked once more, then
/// counts as `NotSure`.
pub fn judge(
    original: &str,
    morphed: &str,
    gen: &dyn TextGenerator,
    params: &GenerationParams,
) -> Result<Verdict, MorphError> {
    let prompt = prompts::fill_judge(original, morphed);
    for _ in 0..2 {
        let reply = gen.generate("", &prompt, params).map_err(MorphError::Judge)?;
        if let Some(v) = parse_verdict(&reply) {
            return Ok(v);
        }
        tracing::debug!(reply = %reply, "unparseable judge reply");
    }
    Ok(Verdict::NotSure)
}

/// Morph, check numerals, judge; regenerate until accepted or out of attempts.
#[allow(clippy::too_many_arguments)]
pub fn validate_and_retry(
    doc_id: &str,
    original: &str,
    dim: NarrativeDimension,
    gen: &dyn TextGenerator,
    judge_gen: &dyn TextGenerator,
    params: &GenerationParams,
    max_attempts: usize,
) -> Result<MorphResult, MorphError> {
    if max_attempts == 0 {
        return Err(MorphError::ZeroAttempts);
    }
    let paragraphs = split_paragraphs(original);
    let original_joined = join_paragraphs(&paragraphs);
    let mut last = None;
    for attempt in 1..=max_attempts {
        let morphed = morph_document(&paragraphs, dim, gen, params)?;
        let numeral_ok = numeral_preservation_check(&original_joined, &morphed);
        let verdict = judge(&original_joined, &morphed, judge_gen, params)?;
        let accepted = numeral_ok && verdict == Verdict::Yes;
        let result = MorphResult {
            doc_id: doc_id.to_string(),
            dimension: dim,
            morphed_text: morphed,
            judge_verdict: verdict,
            numeral_check_passed: numeral_ok,
            attempts: attempt,
            accepted,
        };
        if accepted {
            return Ok(result);
        }
        tracing::info!(
            doc_id,
            dimension = dim.key(),
            attempt,
            ?verdict,
            numeral_ok,
            "morph rejected"
        );
        last = Some(result);
    }
    Ok(last.expect("at least one attempt"))
}

#[cfg(test)]
mod tests {
    use super::stubs::{IdentityGenerator, ScriptedGenerator, SuffixGenerator};
    use super::*;

    fn paras(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("paragraph {i} grew 5%")).collect()
    }

    #[test]
    fn identity_and_suffix_stubs() {
        let p = GenerationParams::default();
        let ps = paras(3);
        let out = morph_document(&ps, NarrativeDimension::Sentiment, &IdentityGenerator, &p).unwrap();
        assert_eq!(out, join_paragraphs(&ps));
        let out = morph_document(&ps, NarrativeDimension::Sentiment, &SuffixGenerator, &p).unwrap();
        let got = split_paragraphs(&out);
        assert_eq!(got.len(), 3);
        assert!(got.iter().all(|g| g.ends_with("[sentiment]")));
    }

    #[test]
    fn generated_blank_lines_do_not_add_paragraphs() {
        let g = ScriptedGenerator::new(["a\n\nb", "c"]);
        let out = morph_document(&paras(2), NarrativeDimension::Jargon, &g, &GenerationParams::default()).unwrap();
        assert_eq!(split_paragraphs(&out).len(), 2);
    }

    #[test]
    fn generator_errors_carry_paragraph() {
        let g = ScriptedGenerator::with_results(vec![Ok("x".into()), Err("down".into())]);
        let e = morph_document(&paras(2), NarrativeDimension::Jargon, &g, &GenerationParams::default()).unwrap_err();
        assert_eq!(
            e,
            MorphError::Generator {
                paragraph: 1,
                message: "down".into()
            }
        );
        let g = ScriptedGenerator::new(["  \n"]);
        assert_eq!(
            morph_document(&paras(1), NarrativeDimension::Jargon, &g, &GenerationParams::default()),
            Err(MorphError::EmptyGeneration(0))
        );
        assert_eq!(
            morph_document(&[], NarrativeDimension::Jargon, &g, &GenerationParams::default()),
            Err(MorphError::NoParagraphs)
        );
    }

    #[test]
    fn numeral_check_examples() {
        assert!(numeral_preservation_check("grew 35%", "grew 35%"));
        assert!(numeral_preservation_check("grew 35%", "surged 35%"));
        assert!(!numeral_preservation_check("grew 35%", "grew 53%"));
        assert!(numeral_preservation_check("In Q4, sales", "Sales in q4"));
        assert!(!numeral_preservation_check("5 and 5", "5"));
    }

    #[test]
    fn verdict_parsing() {
        assert_eq!(parse_verdict("1. Yes: the morphing was executed"), Some(Verdict::Yes));
        assert_eq!(parse_verdict("3. No: the morphing is inadequate"), Some(Verdict::No));
        assert_eq!(parse_verdict("Not sure"), Some(Verdict::NotSure));
        assert_eq!(parse_verdict("**2**"), Some(Verdict::NotSure));
        assert_eq!(parse_verdict("No"), Some(Verdict::No));
        assert_eq!(parse_verdict("10/10"), None);
        assert_eq!(parse_verdict("Nothing to add"), None);
        assert_eq!(parse_verdict("maybe"), None);
    }

    #[test]
    fn judge_reasks_once_then_not_sure() {
        let p = GenerationParams::default();
        assert_eq!(
            judge("a", "b", &ScriptedGenerator::new(["1. Yes"]), &p),
            Ok(Verdict::Yes)
        );
        assert_eq!(
            judge("a", "b", &ScriptedGenerator::new(["??", "3. No"]), &p),
            Ok(Verdict::No)
        );
        let g = ScriptedGenerator::new(["garbage", "garbage", "1"]);
        assert_eq!(judge("a", "b", &g, &p), Ok(Verdict::NotSure));
        assert_eq!(g.calls(), 2);
    }

    #[test]
    fn retry_traces() {
        let p = GenerationParams::default();
        let text = "Revenue grew 5%.\n\nMargins held.";
        let r = validate_and_retry(
            "d",
            text,
            NarrativeDimension::Guidance,
            &SuffixGenerator,
            &ScriptedGenerator::new(["1. Yes"]),
            &p,
            3,
        )
        .unwrap();
        assert_eq!((r.attempts, r.accepted), (1, true));

        let judge = ScriptedGenerator::new(["3. No", "2. Not sure", "1. Yes"]);
        let r = validate_and_retry("d", text, NarrativeDimension::Guidance, &SuffixGenerator, &judge, &p, 3).unwrap();
        assert_eq!((r.attempts, r.accepted), (3, true));

        let judge = ScriptedGenerator::new(["3. No"; 3]);
        let r = validate_and_retry("d", text, NarrativeDimension::Guidance, &SuffixGenerator, &judge, &p, 3).unwrap();
        assert_eq!((r.attempts, r.accepted, r.judge_verdict), (3, false, Verdict::No));

        // judge approves but a figure was altered
        let gen = ScriptedGenerator::new(["Revenue grew 6%.", "Margins held."]);
        let r = validate_and_retry(
            "d",
            text,
            NarrativeDimension::Guidance,
            &gen,
            &ScriptedGenerator::new(["1. Yes"]),
            &p,
            1,
        )
        .unwrap();
        assert!(!r.accepted && !r.numeral_check_passed && r.judge_verdict == Verdict::Yes);
    }
}
