//! Extracting structured payloads from model completions.
//!
//! The contract is strict: fenced-code-block extraction with a
//! structured-header fallback for problem payloads. Anything unparseable is
//! dropped by the caller and counted, never repaired, since silently fixed
//! generations would corrupt the consensus signal.

use codeprobe_core::domain::Difficulty;
use serde::Deserialize;

/// Pull out the contents of every triple-backtick fence, ignoring any
/// language tag on the opening line.
pub fn extract_fenced_blocks(text: &str) -> Vec<String> {
    let mut blocks = Vec::new();
    let mut current: Option<String> = None;
    for line in text.lines() {
        let trimmed = line.trim_start();
        if trimmed.starts_with("```") {
            match current.take() {
                Some(block) => blocks.push(block),
                None => current = Some(String::new()),
            }
            continue;
        }
        if let Some(block) = current.as_mut() {
            block.push_str(line);
            block.push('\n');
        }
    }
    blocks
}

/// A parsed problem-generation payload.
#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct ProblemDraft {
    pub title: String,
    pub description: String,
    pub function_signature: String,
}

impl ProblemDraft {
    fn well_formed(&self) -> bool {
        !self.title.trim().is_empty()
            && !self.description.trim().is_empty()
            && !self.function_signature.trim().is_empty()
    }
}

/// Parse a problem payload: first a fenced JSON object, then the raw text
/// as JSON, then the `Title:/Signature:/Description:` header form.
pub fn parse_problem_payload(text: &str) -> Option<ProblemDraft> {
    for block in extract_fenced_blocks(text) {
        if let Ok(draft) = serde_json::from_str::<ProblemDraft>(&block) {
            if draft.well_formed() {
                return Some(draft);
            }
        }
    }
    if let Ok(draft) = serde_json::from_str::<ProblemDraft>(text.trim()) {
        if draft.well_formed() {
            return Some(draft);
        }
    }
    parse_header_form(text)
}

fn parse_header_form(text: &str) -> Option<ProblemDraft> {
    let mut title = None;
    let mut signature = None;
    let mut description_lines: Vec<&str> = Vec::new();
    let mut in_description = false;
    for line in text.lines() {
        let lower = line.to_lowercase();
        if let Some(rest) = lower.strip_prefix("title:") {
            title = Some(line[line.len() - rest.len()..].trim().to_string());
            in_description = false;
        } else if let Some(rest) = lower.strip_prefix("signature:") {
            signature = Some(line[line.len() - rest.len()..].trim().to_string());
            in_description = false;
        } else if lower.starts_with("description:") {
            let rest = &line["description:".len()..];
            if !rest.trim().is_empty() {
                description_lines.push(rest.trim());
            }
            in_description = true;
        } else if in_description {
            description_lines.push(line);
        }
    }
    let draft = ProblemDraft {
        title: title?,
        function_signature: signature?,
        description: description_lines.join("\n").trim().to_string(),
    };
    draft.well_formed().then_some(draft)
}

/// A parsed difficulty-rating payload.
#[derive(Debug, Clone, PartialEq)]
pub struct RatingDraft {
    pub rating: f64,
    pub difficulty: Difficulty,
    pub category: Option<String>,
}

#[derive(Deserialize)]
struct RawRating {
    rating: f64,
    #[serde(default)]
    difficulty: Option<Difficulty>,
    #[serde(default)]
    category: Option<String>,
}

/// Parse a rating payload from a fenced or raw JSON object. Ratings outside
/// `[0, 10]` are malformed; a missing difficulty bucket is derived from the
/// rating by thirds.
pub fn parse_rating_payload(text: &str) -> Option<RatingDraft> {
    let mut candidates = extract_fenced_blocks(text);
    candidates.push(text.trim().to_string());
    for block in candidates {
        if let Ok(raw) = serde_json::from_str::<RawRating>(&block) {
            if !(0.0..=10.0).contains(&raw.rating) {
                continue;
            }
            let difficulty = raw.difficulty.unwrap_or(if raw.rating <= 10.0 / 3.0 {
                Difficulty::Easy
            } else if raw.rating <= 20.0 / 3.0 {
                Difficulty::Medium
            } else {
                Difficulty::Hard
            });
            return Some(RatingDraft {
                rating: raw.rating,
                difficulty,
                category: raw.category,
            });
        }
    }
    None
}

/// Parse a code payload: the first non-empty fenced block.
pub fn parse_code_payload(text: &str) -> Option<String> {
    extract_fenced_blocks(text)
        .into_iter()
        .map(|b| b.trim_end().to_string())
        .find(|b| !b.trim().is_empty())
}
