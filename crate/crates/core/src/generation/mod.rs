//! Generator backends, training objectives and decoding of interpretations.

mod backend;
mod bigram;
mod echo;
mod loss;
mod strategy;
mod tabular;
mod train;

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use backend::{
    detokenize, model_tokens, Capabilities, DecodingMethod, DecodingParams, GeneratorBackend, OptimizerConfig,
    TrainingPair, EOS_TOKEN,
};
pub use bigram::BigramBackend;
pub use echo::EchoBackend;
pub use loss::{combined_loss, loss_one2many, loss_one2one, sentence_loss_one2one};
pub use strategy::{prepare_training_example, Strategy, TrainingExample};
pub use tabular::TabularBackend;
pub use train::{sentence_objective, train, LogEntry, Objective, TrainingConfig, TrainingLog};

use crate::prompt::{GenerationMode, PromptError, PromptString, READER_TOKEN};
use crate::similarity::SimilarityError;

#[derive(Debug, Error)]
pub enum GenerationError {
    #[error("backend {backend} does not support {capability}")]
    Capability { backend: String, capability: &'static str },
    #[error("strategy {0} needs a similarity provider")]
    MissingProvider(Strategy),
    #[error("expected a {expected:?} prompt/target pair")]
    ModeMismatch { expected: GenerationMode },
    #[error("empty target")]
    EmptyTarget,
    #[error("token {0:?} is not in the vocabulary")]
    UnknownToken(String),
    #[error("token {0:?} has zero probability")]
    ZeroProbability(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("decoding failed: {0}")]
    Decode(String),
    #[error("unknown backend {0:?}")]
    UnknownBackend(String),
    #[error(transparent)]
    Prompt(#[from] PromptError),
    #[error(transparent)]
    Similarity(#[from] SimilarityError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Names of the built-in backends.
pub const BACKENDS: [&str; 3] = [TabularBackend::NAME, BigramBackend::NAME, EchoBackend::NAME];

/// Fresh, untrained instance of a built-in backend.
pub fn new_backend(name: &str) -> Result<Box<dyn GeneratorBackend>, GenerationError> {
    match name {
        TabularBackend::NAME => Ok(Box::new(TabularBackend::uniform(&[EOS_TOKEN]))),
        BigramBackend::NAME => Ok(Box::new(BigramBackend::default())),
        EchoBackend::NAME => Ok(Box::new(EchoBackend::default())),
        other => Err(GenerationError::UnknownBackend(other.to_string())),
    }
}

/// Restores a built-in backend from its checkpoint path.
pub fn load_backend(name: &str, path: &Path) -> Result<Box<dyn GeneratorBackend>, GenerationError> {
    if !path.exists() {
        return Err(GenerationError::Io(std::io::Error::new(
            std::io::ErrorKind::NotFound,
            format!("checkpoint {} not found", path.display()),
        )));
    }
    match name {
        TabularBackend::NAME => Ok(Box::new(TabularBackend::load(path)?)),
        BigramBackend::NAME => Ok(Box::new(BigramBackend::load(path)?)),
        EchoBackend::NAME => Ok(Box::new(EchoBackend::load(path)?)),
        other => Err(GenerationError::UnknownBackend(other.to_string())),
    }
}

/// Splits decoded text on the reader token, trimming each segment and
/// dropping empty ones. Returns the segments and the number dropped.
pub fn split_generated(decoded: &str) -> (Vec<String>, usize) {
    let mut dropped = 0;
    let parts = decoded
        .split(READER_TOKEN)
        .filter_map(|seg| {
            let seg = seg.trim();
            if seg.is_empty() {
                dropped += 1;
                None
            } else {
                Some(seg.to_string())
            }
        })
        .collect();
    (parts, dropped)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GeneratedInterpretations {
    pub interpretations: Vec<String>,
    /// Reader count the prompt asked for.
    pub expected: usize,
    pub dropped_empty: usize,
}

impl GeneratedInterpretations {
    pub fn count_mismatch(&self) -> bool {
        self.interpretations.len() != self.expected
    }
}

/// Decodes once and splits the output into interpretations. A count that
/// differs from the prompt's reader count is recorded, not rejected.
pub fn generate_interpretations(
    backend: &dyn GeneratorBackend,
    prompt: &PromptString,
    params: &DecodingParams,
) -> Result<GeneratedInterpretations, GenerationError> {
    let decoded = backend.decode(&prompt.text, params)?;
    let (interpretations, dropped_empty) = split_generated(&decoded);
    if dropped_empty > 0 {
        log::debug!("dropped {dropped_empty} empty segment(s) from decoded output");
    }
    let out = GeneratedInterpretations { interpretations, expected: prompt.reader_count, dropped_empty };
    if out.count_mismatch() {
        log::debug!("decoded {} interpretations for {} readers", out.interpretations.len(), out.expected);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn prompt(n: usize) -> PromptString {
        PromptString {
            text: "p".into(),
            reader_count: n,
            mode: if n == 1 { GenerationMode::OneToOne } else { GenerationMode::OneToMany },
        }
    }

    #[test]
    fn split_contract() {
        assert_eq!(split_generated("A<reader>B"), (vec!["A".to_string(), "B".to_string()], 0));
        assert_eq!(split_generated("A<reader><reader>B"), (vec!["A".to_string(), "B".to_string()], 1));
        assert_eq!(split_generated(" A <reader> B "), (vec!["A".to_string(), "B".to_string()], 0));
    }

    #[test]
    fn generate_records_mismatch() {
        let b = EchoBackend::from_pairs([("p", "A<reader><reader>B")]);
        let out = generate_interpretations(&b, &prompt(3), &DecodingParams::default()).unwrap();
        assert_eq!(out.interpretations, vec!["A", "B"]);
        assert_eq!(out.dropped_empty, 1);
        assert!(out.count_mismatch());

        let single = EchoBackend::from_pairs([("p", "A")]);
        let out = generate_interpretations(&single, &prompt(1), &DecodingParams::default()).unwrap();
        assert_eq!(out.interpretations, vec!["A"]);
        assert!(!out.count_mismatch());
    }

    #[test]
    fn registry() {
        for name in BACKENDS {
            assert_eq!(new_backend(name).unwrap().name(), name);
        }
        assert!(matches!(new_backend("gpt"), Err(GenerationError::UnknownBackend(_))));
        assert!(load_backend("echo", Path::new("/definitely/not/here")).is_err());
    }
}
