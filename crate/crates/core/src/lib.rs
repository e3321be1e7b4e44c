//! Socially grounded interpretation modeling.
//!
//! Readers annotate a sentence with an attitude toward its author, moral
//! judgments about the people it mentions and a free-text interpretation.
//! This crate parses and splits such data, renders grounded prompts,
//! trains and decodes generator backends, scores generated interpretations
//! against references and analyses how interpretations change toxicity
//! scores.

pub mod data;
pub mod evaluation;
pub mod generation;
pub mod moderation;
pub mod prompt;
pub mod similarity;

pub use data::{
    AnnotatedSentence, Appropriateness, Attitude, DataError, Evaluation, MoralJudgment, ReaderContext, ReaderRecord,
    SphereOfAction,
};
pub use evaluation::{BleuScore, EvaluationError, GroundingDistance, MatchResult};
pub use generation::{DecodingParams, GenerationError, GeneratorBackend, Strategy};
pub use moderation::{Attribute, FlagSet, InterpretationCluster, ModerationError, ToxicityScores};
pub use prompt::{GenerationMode, PromptError, PromptString, TargetString};
pub use similarity::{EmbeddingProvider, SimilarityError};
