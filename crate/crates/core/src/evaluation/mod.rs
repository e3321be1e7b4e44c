//! Lexical metrics, interpretation matching and diversity analysis.

mod diversity;
mod lexical;
mod matching;
mod plugin;
mod report;

use thiserror::Error;

pub use diversity::{
    dg, di, di_symmetric, diversity_grounding_report, diversity_report_from_values, non_overlap, pearson,
    reader_pairs, Correlation, DiversityReport, GroundingDistance, ReaderPair,
};
pub use lexical::{
    bleu, bleu1, corpus_bleu, rouge, tokenize, unigram_perplexity, BleuScore, RougeScore, UnigramModel,
};
pub use matching::{hungarian_match, match_cost_matrix, match_interpretations, MatchResult, DUMMY_COST};
pub use plugin::{MetricOutcome, MetricPlugin, MetricRegistry};
pub use report::{evaluate_corpus, evaluate_sentence, AggregateRow, EvaluationReport, SentenceEvaluation, SentenceInput};

#[derive(Debug, Error)]
pub enum EvaluationError {
    #[error("empty {0}")]
    EmptyInput(&'static str),
    #[error("n-gram order {0} outside 1..=4")]
    InvalidOrder(usize),
    #[error("entity mismatch: {left} vs {right}")]
    EntityMismatch { left: String, right: String },
    #[error("cost matrix rows differ in length")]
    RaggedMatrix,
    #[error("cost matrix contains a non-finite value")]
    NonFiniteCost,
    #[error("zero variance in the {0}; correlation is undefined")]
    ZeroVariance(&'static str),
    #[error("need at least 3 pairs for a correlation, got {0}")]
    TooFewPairs(usize),
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
}
