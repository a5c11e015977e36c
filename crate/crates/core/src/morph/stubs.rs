//! Deterministic generators for offline runs and tests.

use std::sync::atomic::{AtomicUsize, Ordering};

use super::{GenerationParams, TextGenerator};

/// Returns the user text unchanged.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityGenerator;

impl TextGenerator for IdentityGenerator {
    fn generate(&self, _: &str, user_text: &str, _: &GenerationParams) -> Result<String, String> {
        Ok(user_text.to_string())
    }
}

/// Appends `[<dimension key>]` to every paragraph, recognizing the dimension
/// from the system prompt.
#[derive(Debug, Clone, Copy, Default)]
pub struct SuffixGenerator;

impl TextGenerator for SuffixGenerator {
    fn generate(&self, system: &str, user_text: &str, _: &GenerationParams) -> Result<String, String> {
        let dim = crate::NarrativeDimension::ALL
            .iter()
            .find(|d| super::prompts::morph_prompt(**d) == system)
            .ok_or("unrecognized system prompt")?;
        Ok(format!("{user_text} [{}]", dim.key()))
    }
}

/// Replays a fixed list of replies; the last one repeats once exhausted.
#[derive(Debug, Default)]
pub struct ScriptedGenerator {
    replies: Vec<Result<String, String>>,
    next: AtomicUsize,
}

impl ScriptedGenerator {
    pub fn new<S: Into<String>>(replies: impl IntoIterator<Item = S>) -> Self {
        Self::with_results(replies.into_iter().map(|s| Ok(s.into())).collect())
    }

    pub fn with_results(replies: Vec<Result<String, String>>) -> Self {
        assert!(!replies.is_empty(), "script needs at least one reply");
        Self {
            replies,
            next: AtomicUsize::new(0),
        }
    }

    pub fn calls(&self) -> usize {
        self.next.load(Ordering::SeqCst)
    }
}

impl TextGenerator for ScriptedGenerator {
    fn generate(&self, _: &str, _: &str, _: &GenerationParams) -> Result<String, String> {
        let i = self.next.fetch_add(1, Ordering::SeqCst);
        self.replies[i.min(self.replies.len() - 1)].clone()
    }
}
