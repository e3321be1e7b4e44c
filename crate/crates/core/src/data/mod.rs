//! Annotation schema for multi-reader interpreted sentences.
//!
//! A sentence carries a title, its person entities in order of appearance
//! and one record per reader: an attitude toward the author, one moral
//! judgment per entity and the reader's free-text interpretation.

mod parse;
mod split;
pub mod taxonomy;
mod validate;

use std::fmt;

use serde::{Deserialize, Deserializer, Serialize};
use thiserror::Error;

pub use parse::{parse_dataset, read_dataset, DatasetParse, ParseOptions};
pub use split::{stratified_split, DatasetSplit, SplitOutcome, SplitRatios};
pub use taxonomy::{taxonomy_lookup, Appropriateness, SphereOfAction};
pub use validate::{validate_record, ValidationReport, DEFAULT_MIN_READERS};

#[derive(Debug, Error)]
pub enum DataError {
    #[error("unknown {kind} label {value:?}")]
    UnknownLabel { kind: &'static str, value: String },
    #[error("attitude out of range: {0} (expected 1..=5)")]
    AttitudeOutOfRange(i64),
    #[error("line {line}: malformed record: {message}")]
    Malformed { line: usize, message: String },
    #[error("line {line}: unknown key {key:?}")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: duplicate record id {id:?}")]
    DuplicateId { line: usize, id: String },
    #[error("line {line}: record {id:?} judges entity {entity:?} which is not in its entity list")]
    UnknownEntity { line: usize, id: String, entity: String },
    #[error("invalid split: {0}")]
    InvalidSplit(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl DataError {
    /// Source line of a per-record error, when known.
    pub fn line(&self) -> Option<usize> {
        match self {
            DataError::Malformed { line, .. }
            | DataError::UnknownKey { line, .. }
            | DataError::DuplicateId { line, .. }
            | DataError::UnknownEntity { line, .. } => Some(*line),
            _ => None,
        }
    }
}

const ATTITUDE_LABELS: [&str; 5] = ["very negative", "negative", "neutral", "positive", "very positive"];

/// Five-point Likert rating of a reader's impression of the author.
///
/// Deserialization accepts any integer so that out-of-range values surface
/// as validation errors naming the record rather than as parse failures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Attitude(i64);

impl Attitude {
    pub fn new(value: i64) -> Result<Self, DataError> {
        if (1..=5).contains(&value) {
            Ok(Attitude(value))
        } else {
            Err(DataError::AttitudeOutOfRange(value))
        }
    }

    pub fn value(self) -> i64 {
        self.0
    }

    pub fn is_valid(self) -> bool {
        (1..=5).contains(&self.0)
    }

    pub fn label(self) -> Result<&'static str, DataError> {
        attitude_label(self.0)
    }

    pub fn from_label(label: &str) -> Result<Self, DataError> {
        let wanted = label.trim().to_lowercase();
        ATTITUDE_LABELS
            .iter()
            .position(|l| *l == wanted)
            .map(|i| Attitude(i as i64 + 1))
            .ok_or_else(|| DataError::UnknownLabel { kind: "attitude", value: label.to_string() })
    }

    /// Absolute Likert distance, in 0..=4 for valid attitudes.
    pub fn distance(self, other: Attitude) -> u32 {
        self.0.abs_diff(other.0) as u32
    }
}

/// Maps a Likert value to its attitude label.
pub fn attitude_label(value: i64) -> Result<&'static str, DataError> {
    if (1..=5).contains(&value) {
        Ok(ATTITUDE_LABELS[(value - 1) as usize])
    } else {
        Err(DataError::AttitudeOutOfRange(value))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Evaluation {
    Good,
    Bad,
}

impl Evaluation {
    pub fn label(self) -> &'static str {
        match self {
            Evaluation::Good => "good",
            Evaluation::Bad => "bad",
        }
    }
}

impl fmt::Display for Evaluation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

fn blank_as_none<'de, D, T>(deserializer: D) -> Result<Option<T>, D::Error>
where
    D: Deserializer<'de>,
    T: TryFrom<String>,
    T::Error: fmt::Display,
{
    let raw: Option<String> = Option::deserialize(deserializer)?;
    match raw {
        Some(s) if !s.trim().is_empty() => T::try_from(s).map(Some).map_err(serde::de::Error::custom),
        _ => Ok(None),
    }
}

fn evaluation_or_none<'de, D: Deserializer<'de>>(deserializer: D) -> Result<Option<Evaluation>, D::Error> {
    let raw: Option<String> = Option::deserialize(deserializer)?;
    match raw.as_deref().map(str::trim) {
        None | Some("") => Ok(None),
        Some(s) if s.eq_ignore_ascii_case("good") => Ok(Some(Evaluation::Good)),
        Some(s) if s.eq_ignore_ascii_case("bad") => Ok(Some(Evaluation::Bad)),
        Some(other) => Err(serde::de::Error::custom(format!("unknown evaluation label {other:?}"))),
    }
}

/// One reader's inferred character trait for one entity.
///
/// An entity that is not judged has `present = false`, an empty trait and
/// no labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MoralJudgment {
    pub entity: String,
    pub present: bool,
    #[serde(rename = "trait", default)]
    pub trait_desc: String,
    #[serde(default, deserialize_with = "evaluation_or_none")]
    pub evaluation: Option<Evaluation>,
    #[serde(default, deserialize_with = "blank_as_none")]
    pub soa: Option<SphereOfAction>,
    #[serde(default, deserialize_with = "blank_as_none")]
    pub appropriateness: Option<Appropriateness>,
}

impl MoralJudgment {
    pub fn absent(entity: impl Into<String>) -> Self {
        MoralJudgment {
            entity: entity.into(),
            present: false,
            trait_desc: String::new(),
            evaluation: None,
            soa: None,
            appropriateness: None,
        }
    }

    pub fn present(
        entity: impl Into<String>,
        trait_desc: impl Into<String>,
        evaluation: Option<Evaluation>,
        soa: Option<SphereOfAction>,
        appropriateness: Option<Appropriateness>,
    ) -> Self {
        MoralJudgment {
            entity: entity.into(),
            present: true,
            trait_desc: trait_desc.into(),
            evaluation,
            soa,
            appropriateness,
        }
    }
}

/// A reader's social grounding: attitude plus one judgment per entity.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReaderContext {
    pub attitude: Attitude,
    #[serde(default)]
    pub judgments: Vec<MoralJudgment>,
}

impl ReaderContext {
    pub fn new(attitude: Attitude, judgments: Vec<MoralJudgment>) -> Self {
        ReaderContext { attitude, judgments }
    }

    /// Number of judgments, one per entity.
    pub fn entity_count(&self) -> usize {
        self.judgments.len()
    }

    /// Number of entities actually judged.
    pub fn judged_count(&self) -> usize {
        self.judgments.iter().filter(|m| m.present).count()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReaderRecord {
    #[serde(flatten)]
    pub context: ReaderContext,
    pub interpretation: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatedSentence {
    pub id: String,
    pub title: String,
    pub sentence: String,
    #[serde(default)]
    pub entities: Vec<String>,
    pub readers: Vec<ReaderRecord>,
}

impl AnnotatedSentence {
    pub fn reader_count(&self) -> usize {
        self.readers.len()
    }

    pub fn contexts(&self) -> Vec<ReaderContext> {
        self.readers.iter().map(|r| r.context.clone()).collect()
    }

    pub fn interpretations(&self) -> Vec<String> {
        self.readers.iter().map(|r| r.interpretation.clone()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn attitude_labels() {
        assert_eq!(attitude_label(3).unwrap(), "neutral");
        assert_eq!(attitude_label(1).unwrap(), "very negative");
        assert_eq!(attitude_label(5).unwrap(), "very positive");
        assert!(matches!(attitude_label(0), Err(DataError::AttitudeOutOfRange(0))));
        assert!(attitude_label(6).is_err());
    }

    #[test]
    fn attitude_label_inverse() {
        for label in ATTITUDE_LABELS {
            assert_eq!(Attitude::from_label(label).unwrap().label().unwrap(), label);
        }
        for v in 1..=5 {
            let a = Attitude::new(v).unwrap();
            assert_eq!(Attitude::from_label(a.label().unwrap()).unwrap(), a);
        }
        assert!(Attitude::from_label("meh").is_err());
    }

    #[test]
    fn judged_count_never_exceeds_entities() {
        let ctx = ReaderContext::new(
            Attitude::new(2).unwrap(),
            vec![
                MoralJudgment::absent("she"),
                MoralJudgment::present("he", "greedy", Some(Evaluation::Bad), None, None),
            ],
        );
        assert_eq!(ctx.entity_count(), 2);
        assert_eq!(ctx.judged_count(), 1);
    }

    #[test]
    fn judgment_blank_labels_deserialize_as_absent() {
        let m: MoralJudgment = serde_json::from_str(
            r#"{"entity":"she","present":false,"trait":"","evaluation":"","soa":"","appropriateness":null}"#,
        )
        .unwrap();
        assert_eq!(m, MoralJudgment::absent("she"));
    }
}
