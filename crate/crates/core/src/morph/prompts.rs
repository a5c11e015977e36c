//! Morphing and judging prompts, shipped as data files.

use crate::NarrativeDimension;

const CONFIDENCE: &str = include_str!("../../data/prompts/confidence.txt");
const GLOBAL_FOCUS: &str = include_str!("../../data/prompts/global_focus.txt");
const GUIDANCE: &str = include_str!("../../data/prompts/guidance.txt");
const SENTIMENT: &str = include_str!("../../data/prompts/sentiment.txt");
const JARGON: &str = include_str!("../../data/prompts/jargon.txt");
const UNCERTAINTY: &str = include_str!("../../data/prompts/uncertainty.txt");

pub const JUDGE_TEMPLATE: &str = include_str!("../../data/prompts/judge.txt");
pub const ORIGINAL_SLOT: &str = "[original excerpt]";
pub const MORPHED_SLOT: &str = "[morphed excerpt]";

pub fn morph_prompt(dim: NarrativeDimension) -> &'static str {
    match dim {
        NarrativeDimension::Confidence => CONFIDENCE,
        NarrativeDimension::GlobalFocus => GLOBAL_FOCUS,
        NarrativeDimension::Guidance => GUIDANCE,
        NarrativeDimension::Sentiment => SENTIMENT,
        NarrativeDimension::Jargon => JARGON,
        NarrativeDimension::Uncertainty => UNCERTAINTY,
    }
}

/// All six morphing prompts in dimension order.
pub fn registry() -> Vec<(NarrativeDimension, &'static str)> {
    NarrativeDimension::ALL.iter().map(|&d| (d, morph_prompt(d))).collect()
}

pub fn fill_judge(original: &str, morphed: &str) -> String {
    JUDGE_TEMPLATE
        .replacen(ORIGINAL_SLOT, original, 1)
        .replacen(MORPHED_SLOT, morphed, 1)
}

/// Recovers (Text A, Text B) from a filled judge prompt. Used by offline judges.
pub fn parse_judge_prompt(prompt: &str) -> Option<(&str, &str)> {
    let a_start = prompt.find("Text A: ")? + "Text A: ".len();
    let b_marker = prompt[a_start..].find("\nText B: ")? + a_start;
    let b_start = b_marker + "\nText B: ".len();
    let tail = "\n\nDoes Text B preserve";
    let b_end = prompt[b_start..].rfind(tail)? + b_start;
    Some((&prompt[a_start..b_marker], &prompt[b_start..b_end]))
}
