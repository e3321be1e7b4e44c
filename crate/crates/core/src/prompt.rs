//! Rendering of socially grounded input prompts and generation targets.
//!
//! A prompt has four segments joined by the separator token:
//!
//! ```text
//! Title: <title> <sep> Attitude: <labels> <sep> Moral Judgments: <phrases> <sep> Sentence: <sentence>
//! ```
//!
//! With several readers the attitude labels and the per-reader judgment
//! groups are repeated in reader order, so reader `j`'s attitude and
//! judgments sit at the same position in both segments.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::data::{DataError, MoralJudgment, ReaderContext};

pub const SEP_TOKEN: &str = "<sep>";
pub const READER_TOKEN: &str = "<reader>";

#[derive(Debug, Error)]
pub enum PromptError {
    #[error("judgment of {0:?} is not present and cannot be rendered")]
    NotPresent(String),
    #[error("no reader contexts")]
    NoContexts,
    #[error("readers disagree on entities: {0:?} vs {1:?}")]
    EntityMismatch(Vec<String>, Vec<String>),
    #[error("empty {0}")]
    Empty(&'static str),
    #[error("{0} contains reserved token {1}")]
    ReservedToken(&'static str, &'static str),
    #[error("one-to-one target needs exactly one interpretation, got {0}")]
    TargetCount(usize),
    #[error(transparent)]
    Data(#[from] DataError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GenerationMode {
    OneToOne,
    OneToMany,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PromptString {
    pub text: String,
    pub reader_count: usize,
    pub mode: GenerationMode,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TargetString {
    pub text: String,
    pub mode: GenerationMode,
}

impl TargetString {
    /// Individual interpretations of the target.
    pub fn interpretations(&self) -> Vec<String> {
        match self.mode {
            GenerationMode::OneToOne => vec![self.text.clone()],
            GenerationMode::OneToMany => self.text.split(READER_TOKEN).map(str::to_string).collect(),
        }
    }
}

/// Renders one present judgment as a parenthesised sentence.
///
/// Missing fields drop the clause they belong to; a judgment with nothing
/// but its entity renders as `(ent = unspecified.)`.
pub fn render_judgment_phrase(m: &MoralJudgment) -> Result<String, PromptError> {
    if !m.present {
        return Err(PromptError::NotPresent(m.entity.clone()));
    }
    let desc = m.trait_desc.trim();
    let mut clauses: Vec<String> = Vec::with_capacity(4);
    if !desc.is_empty() {
        clauses.push(format!("{desc}, which is"));
    }
    if let Some(eval) = m.evaluation {
        clauses.push(format!("a {eval} character trait and"));
    }
    if let Some(vi) = m.appropriateness {
        clauses.push(format!("a {vi}"));
    }
    if let Some(soa) = m.soa {
        clauses.push(format!("related to {soa}"));
    }
    let mut body = clauses.join(" ");
    // connectives left dangling by an elided clause
    for tail in [" and", ", which is"] {
        if let Some(stripped) = body.strip_suffix(tail) {
            body.truncate(stripped.len());
        }
    }
    if body.is_empty() {
        body.push_str("unspecified");
    }
    Ok(format!("({} = {body}.)", m.entity))
}

/// Builds the attitude and moral-judgment segments for `contexts`.
pub fn render_context(contexts: &[ReaderContext]) -> Result<(String, String), PromptError> {
    let first = contexts.first().ok_or(PromptError::NoContexts)?;
    let entities = |c: &ReaderContext| c.judgments.iter().map(|m| m.entity.clone()).collect::<Vec<_>>();
    let reference = entities(first);

    let mut labels = Vec::with_capacity(contexts.len());
    let mut groups = Vec::with_capacity(contexts.len());
    let mut any_judged = false;
    for ctx in contexts {
        let these = entities(ctx);
        if these != reference {
            return Err(PromptError::EntityMismatch(reference, these));
        }
        labels.push(format!("{}.", ctx.attitude.label()?));
        let phrases = ctx
            .judgments
            .iter()
            .filter(|m| m.present)
            .map(render_judgment_phrase)
            .collect::<Result<Vec<_>, _>>()?;
        if phrases.is_empty() {
            groups.push("None".to_string());
        } else {
            any_judged = true;
            groups.push(phrases.join(" "));
        }
    }

    let attitude = format!("Attitude: {}", labels.join(" "));
    let judgments = if any_judged {
        format!("Moral Judgments: {}", groups.join(" "))
    } else {
        "Moral Judgments: None".to_string()
    };
    Ok((attitude, judgments))
}

pub fn build_prompt(title: &str, sentence: &str, contexts: &[ReaderContext]) -> Result<PromptString, PromptError> {
    if title.trim().is_empty() {
        return Err(PromptError::Empty("title"));
    }
    if sentence.trim().is_empty() {
        return Err(PromptError::Empty("sentence"));
    }
    if title.contains(SEP_TOKEN) {
        return Err(PromptError::ReservedToken("title", SEP_TOKEN));
    }
    if sentence.contains(SEP_TOKEN) {
        return Err(PromptError::ReservedToken("sentence", SEP_TOKEN));
    }
    let (attitude, judgments) = render_context(contexts)?;
    if judgments.contains(SEP_TOKEN) {
        return Err(PromptError::ReservedToken("judgment", SEP_TOKEN));
    }
    let text = format!("Title: {title} {SEP_TOKEN} {attitude} {SEP_TOKEN} {judgments} {SEP_TOKEN} Sentence: {sentence}");
    let mode = if contexts.len() == 1 { GenerationMode::OneToOne } else { GenerationMode::OneToMany };
    Ok(PromptString { text, reader_count: contexts.len(), mode })
}

pub fn build_target(interpretations: &[String], mode: GenerationMode) -> Result<TargetString, PromptError> {
    if interpretations.is_empty() {
        return Err(PromptError::Empty("interpretation list"));
    }
    if interpretations.iter().any(|i| i.contains(READER_TOKEN)) {
        return Err(PromptError::ReservedToken("interpretation", READER_TOKEN));
    }
    let text = match mode {
        GenerationMode::OneToOne => {
            if interpretations.len() != 1 {
                return Err(PromptError::TargetCount(interpretations.len()));
            }
            interpretations[0].clone()
        }
        GenerationMode::OneToMany => interpretations.join(READER_TOKEN),
    };
    Ok(TargetString { text, mode })
}
