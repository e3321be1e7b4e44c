//! Toxicity flag analyses over interpretation clusters.
//!
//! A cluster is a sentence together with its interpretations. Analysis 1
//! asks whether an interpretation scores strictly above the sentence (by
//! at least a margin); analysis 2 asks whether a harmless sentence has a
//! harmful interpretation.

mod client;
#[cfg(feature = "http")]
mod http;
mod mock;
mod report;

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use client::{text_key, ClientConfig, ScorerClient, Transport, TransportError};
#[cfg(feature = "http")]
pub use http::HttpTransport;
pub use mock::FileMockTransport;
pub use report::{moderation_report, overlap_report, overlap_tsv, AttributeSummary, CurvePoint, FlagRow, ModerationReport, OverlapRow};

use crate::data::AnnotatedSentence;

#[derive(Debug, Error)]
pub enum ModerationError {
    #[error("text {id:?} is empty")]
    EmptyText { id: String },
    #[error("scoring {id:?} failed: {message}")]
    Scoring { id: String, message: String },
    #[error("scoring {id:?} still rate limited after retries (retry after {retry_after:?})")]
    RetryExhausted { id: String, retry_after: Option<std::time::Duration> },
    #[error("{attribute} score {value} outside [0, 1]")]
    InvalidScore { attribute: Attribute, value: f64 },
    #[error("missing {attribute} score for {id:?}")]
    MissingAttribute { id: String, attribute: Attribute },
    #[error("cluster {0:?} has no interpretations")]
    EmptyCluster(String),
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Attribute {
    Toxicity,
    Insult,
    IdentityAttack,
}

impl Attribute {
    pub const ALL: [Attribute; 3] = [Attribute::Toxicity, Attribute::Insult, Attribute::IdentityAttack];

    pub fn name(self) -> &'static str {
        match self {
            Attribute::Toxicity => "toxicity",
            Attribute::Insult => "insult",
            Attribute::IdentityAttack => "identity_attack",
        }
    }
}

impl fmt::Display for Attribute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Attribute {
    type Err = ModerationError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_lowercase().replace([' ', '-'], "_");
        Attribute::ALL
            .into_iter()
            .find(|a| a.name() == norm)
            .ok_or_else(|| ModerationError::Config(format!("unknown attribute {s:?}")))
    }
}

fn check_score(attribute: Attribute, value: f64) -> Result<f64, ModerationError> {
    if (0.0..=1.0).contains(&value) {
        Ok(value)
    } else {
        Err(ModerationError::InvalidScore { attribute, value })
    }
}

/// All three scores of one text.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToxicityScores {
    pub toxicity: f64,
    pub insult: f64,
    pub identity_attack: f64,
}

impl ToxicityScores {
    pub fn new(toxicity: f64, insult: f64, identity_attack: f64) -> Result<Self, ModerationError> {
        Ok(ToxicityScores {
            toxicity: check_score(Attribute::Toxicity, toxicity)?,
            insult: check_score(Attribute::Insult, insult)?,
            identity_attack: check_score(Attribute::IdentityAttack, identity_attack)?,
        })
    }

    pub fn get(&self, attribute: Attribute) -> f64 {
        match attribute {
            Attribute::Toxicity => self.toxicity,
            Attribute::Insult => self.insult,
            Attribute::IdentityAttack => self.identity_attack,
        }
    }
}

/// Scores for a subset of attributes, as returned by a scorer.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct AttributeScores(pub BTreeMap<Attribute, f64>);

impl AttributeScores {
    pub fn get(&self, attribute: Attribute) -> Option<f64> {
        self.0.get(&attribute).copied()
    }

    pub fn attributes(&self) -> impl Iterator<Item = Attribute> + '_ {
        self.0.keys().copied()
    }

    pub fn validate(&self) -> Result<(), ModerationError> {
        for (a, v) in &self.0 {
            check_score(*a, *v)?;
        }
        Ok(())
    }

    pub fn complete(&self) -> Option<ToxicityScores> {
        Some(ToxicityScores {
            toxicity: self.get(Attribute::Toxicity)?,
            insult: self.get(Attribute::Insult)?,
            identity_attack: self.get(Attribute::IdentityAttack)?,
        })
    }
}

impl From<ToxicityScores> for AttributeScores {
    fn from(s: ToxicityScores) -> Self {
        AttributeScores(Attribute::ALL.into_iter().map(|a| (a, s.get(a))).collect())
    }
}

impl FromIterator<(Attribute, f64)> for AttributeScores {
    fn from_iter<I: IntoIterator<Item = (Attribute, f64)>>(iter: I) -> Self {
        AttributeScores(iter.into_iter().collect())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ClusterSource {
    #[default]
    Human,
    Model,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoredText {
    pub text: String,
    pub scores: AttributeScores,
}

/// A sentence and its interpretations, scored. Analyses run over the
/// attributes scored on the sentence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InterpretationCluster {
    pub id: String,
    #[serde(default)]
    pub source: ClusterSource,
    pub sentence: ScoredText,
    pub interpretations: Vec<ScoredText>,
}

/// A cluster before scoring. `attributes` restricts what is requested;
/// all three when absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterInput {
    pub id: String,
    #[serde(default)]
    pub source: ClusterSource,
    pub sentence: String,
    pub interpretations: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub attributes: Option<Vec<Attribute>>,
}

impl ClusterInput {
    pub fn requested(&self) -> Vec<Attribute> {
        self.attributes.clone().unwrap_or_else(|| Attribute::ALL.to_vec())
    }
}

/// Human clusters: each sentence with its annotated interpretations.
pub fn clusters_from_dataset(records: &[AnnotatedSentence]) -> Vec<ClusterInput> {
    records
        .iter()
        .map(|r| ClusterInput {
            id: r.id.clone(),
            source: ClusterSource::Human,
            sentence: r.sentence.clone(),
            interpretations: r.interpretations(),
            attributes: None,
        })
        .collect()
}

/// Model clusters: each sentence with its generated interpretations.
/// Sentences without generated output are skipped.
pub fn clusters_from_generated(records: &[AnnotatedSentence], generated: &BTreeMap<String, Vec<String>>) -> Vec<ClusterInput> {
    records
        .iter()
        .filter_map(|r| {
            let interps = generated.get(&r.id)?;
            Some(ClusterInput {
                id: r.id.clone(),
                source: ClusterSource::Model,
                sentence: r.sentence.clone(),
                interpretations: interps.clone(),
                attributes: None,
            })
        })
        .collect()
}

/// Slack for margin comparisons of decimal scores.
const MARGIN_EPS: f64 = 1e-12;

fn max_of(xs: &[f64]) -> Option<f64> {
    xs.iter().copied().reduce(f64::max)
}

/// Analysis 1 on one attribute: the cluster maximum is attained strictly by
/// an interpretation and exceeds the sentence score by at least `margin`.
pub fn analysis1_scores(sentence: f64, interpretations: &[f64], margin: f64) -> bool {
    match max_of(interpretations) {
        Some(m) => m > sentence && m - sentence >= margin - MARGIN_EPS,
        None => false,
    }
}

/// Analysis 2 on one attribute: sentence below `low`, some interpretation above `high`.
pub fn analysis2_scores(sentence: f64, interpretations: &[f64], low: f64, high: f64) -> Result<bool, ModerationError> {
    if low >= high {
        return Err(ModerationError::Config(format!("analysis 2 bounds: low {low} must be below high {high}")));
    }
    Ok(sentence < low && interpretations.iter().any(|&s| s > high))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalysisSettings {
    pub margin: f64,
    pub low: f64,
    pub high: f64,
}

impl Default for AnalysisSettings {
    fn default() -> Self {
        AnalysisSettings { margin: 0.20, low: 0.1, high: 0.5 }
    }
}

impl AnalysisSettings {
    pub fn check(&self) -> Result<(), ModerationError> {
        if !(self.margin >= 0.0) {
            return Err(ModerationError::Config(format!("margin {} must be non-negative", self.margin)));
        }
        if self.low >= self.high {
            return Err(ModerationError::Config(format!("low {} must be below high {}", self.low, self.high)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Flags {
    pub a1_any: bool,
    pub a1_margin: bool,
    pub a2: bool,
}

pub type FlagSet = BTreeMap<Attribute, Flags>;

impl InterpretationCluster {
    pub fn attributes(&self) -> Vec<Attribute> {
        self.sentence.scores.attributes().collect()
    }

    /// Sentence score and interpretation scores for one attribute.
    pub fn scores(&self, attribute: Attribute) -> Result<(f64, Vec<f64>), ModerationError> {
        let missing = |id: &str| ModerationError::MissingAttribute { id: id.to_string(), attribute };
        let s = self.sentence.scores.get(attribute).ok_or_else(|| missing(&self.id))?;
        let interps = self
            .interpretations
            .iter()
            .enumerate()
            .map(|(k, t)| t.scores.get(attribute).ok_or_else(|| missing(&format!("{}#{k}", self.id))))
            .collect::<Result<Vec<_>, _>>()?;
        Ok((s, interps))
    }
}

pub fn analysis1(cluster: &InterpretationCluster, margin: f64) -> Result<BTreeMap<Attribute, bool>, ModerationError> {
    if cluster.interpretations.is_empty() {
        return Err(ModerationError::EmptyCluster(cluster.id.clone()));
    }
    cluster
        .attributes()
        .into_iter()
        .map(|a| {
            let (s, i) = cluster.scores(a)?;
            Ok((a, analysis1_scores(s, &i, margin)))
        })
        .collect()
}

pub fn analysis2(cluster: &InterpretationCluster, low: f64, high: f64) -> Result<BTreeMap<Attribute, bool>, ModerationError> {
    if cluster.interpretations.is_empty() {
        return Err(ModerationError::EmptyCluster(cluster.id.clone()));
    }
    cluster
        .attributes()
        .into_iter()
        .map(|a| {
            let (s, i) = cluster.scores(a)?;
            Ok((a, analysis2_scores(s, &i, low, high)?))
        })
        .collect()
}

pub fn flag_cluster(cluster: &InterpretationCluster, settings: &AnalysisSettings) -> Result<FlagSet, ModerationError> {
    settings.check()?;
    let any = analysis1(cluster, 0.0)?;
    let margin = analysis1(cluster, settings.margin)?;
    let a2 = analysis2(cluster, settings.low, settings.high)?;
    Ok(any
        .into_iter()
        .map(|(a, a1_any)| (a, Flags { a1_any, a1_margin: margin[&a], a2: a2[&a] }))
        .collect())
}

/// `|model ∩ human| / |human| · 100`; `None` when there are no human flags.
pub fn overlap_recall(model_flags: &BTreeSet<String>, human_flags: &BTreeSet<String>) -> Option<f64> {
    if human_flags.is_empty() {
        return None;
    }
    let hit = human_flags.intersection(model_flags).count();
    Some(hit as f64 / human_flags.len() as f64 * 100.0)
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use proptest::prelude::*;

    pub(crate) fn single(id: &str, attribute: Attribute, sentence: f64, interps: &[f64]) -> InterpretationCluster {
        let scored = |text: String, v: f64| ScoredText { text, scores: [(attribute, v)].into_iter().collect() };
        InterpretationCluster {
            id: id.into(),
            source: ClusterSource::Model,
            sentence: scored("s".into(), sentence),
            interpretations: interps.iter().enumerate().map(|(k, v)| scored(format!("i{k}"), *v)).collect(),
        }
    }

    #[test]
    fn printed_samples() {
        let tox = single("a", Attribute::Toxicity, 0.0186, &[0.0171, 0.1912, 0.4274]);
        assert!(analysis1(&tox, 0.0).unwrap()[&Attribute::Toxicity]);
        assert!(analysis1(&tox, 0.20).unwrap()[&Attribute::Toxicity]);

        let ins = single("b", Attribute::Insult, 0.0091, &[0.0102, 0.0086, 0.3680]);
        assert!(!analysis2(&ins, 0.1, 0.5).unwrap()[&Attribute::Insult]);

        let ida = single("c", Attribute::IdentityAttack, 0.0038, &[0.0034, 0.0142, 0.1445]);
        assert!(analysis1(&ida, 0.0).unwrap()[&Attribute::IdentityAttack]);
        assert!(!analysis1(&ida, 0.20).unwrap()[&Attribute::IdentityAttack]);
    }

    #[test]
    fn analysis1_edges() {
        assert!(!analysis1_scores(0.5, &[0.1, 0.4], 0.0));
        // tie with the sentence does not flag
        assert!(!analysis1_scores(0.5, &[0.5], 0.0));
        assert!(!analysis1_scores(0.5, &[], 0.0));
        // 0.3 − 0.1 is 0.19999999999999998 in binary
        assert!(analysis1_scores(0.1, &[0.3], 0.2));
    }

    #[test]
    fn analysis2_edges() {
        assert!(analysis2_scores(0.05, &[0.2, 0.6], 0.1, 0.5).unwrap());
        assert!(!analysis2_scores(0.15, &[0.9], 0.1, 0.5).unwrap());
        assert!(!analysis2_scores(0.1, &[0.9], 0.1, 0.5).unwrap());
        assert!(!analysis2_scores(0.05, &[0.5], 0.1, 0.5).unwrap());
        assert!(analysis2_scores(0.05, &[0.9], 0.5, 0.5).is_err());
    }

    #[test]
    fn recall() {
        let set = |v: &[&str]| v.iter().map(|s| s.to_string()).collect::<BTreeSet<_>>();
        assert_eq!(overlap_recall(&set(&["a"]), &set(&["a"])), Some(100.0));
        assert_eq!(overlap_recall(&set(&["a"]), &set(&["b"])), Some(0.0));
        let r = overlap_recall(&set(&["b", "c", "d"]), &set(&["a", "b", "c"])).unwrap();
        assert!((r - 200.0 / 3.0).abs() < 1e-9);
        assert_eq!(overlap_recall(&set(&["a"]), &set(&[])), None);
    }

    #[test]
    fn scores_and_attributes() {
        assert!(ToxicityScores::new(0.2, 1.1, 0.0).is_err());
        let s = ToxicityScores::new(0.2, 0.1, 0.0).unwrap();
        let a: AttributeScores = s.into();
        assert_eq!(a.complete(), Some(s));
        assert_eq!(serde_json::to_string(&a).unwrap(), r#"{"toxicity":0.2,"insult":0.1,"identity_attack":0.0}"#);
        assert_eq!("Identity Attack".parse::<Attribute>().unwrap(), Attribute::IdentityAttack);
        let mut c = single("x", Attribute::Toxicity, 0.1, &[0.2]);
        c.interpretations.clear();
        assert!(matches!(analysis1(&c, 0.0), Err(ModerationError::EmptyCluster(_))));
    }

    proptest! {
        #[test]
        fn analysis1_properties(s in 0.0f64..1.0, interps in prop::collection::vec(0.0f64..1.0, 1..6), k in 0usize..6, bump in 0.0f64..1.0) {
            let any = analysis1_scores(s, &interps, 0.0);
            if analysis1_scores(s, &interps, 0.2) {
                prop_assert!(any);
            }
            let mut raised = interps.clone();
            let k = k % raised.len();
            raised[k] = (raised[k] + bump).min(1.0);
            if any {
                prop_assert!(analysis1_scores(s, &raised, 0.0));
            }
        }

        #[test]
        fn analysis2_permutation_invariant(s in 0.0f64..0.2, mut interps in prop::collection::vec(0.0f64..1.0, 1..6)) {
            let before = analysis2_scores(s, &interps, 0.1, 0.5).unwrap();
            interps.reverse();
            interps.rotate_left(1);
            prop_assert_eq!(before, analysis2_scores(s, &interps, 0.1, 0.5).unwrap());
        }

        #[test]
        fn recall_bounded(m in prop::collection::btree_set("[a-f]", 0..6), h in prop::collection::btree_set("[a-f]", 1..6)) {
            let r = overlap_recall(&m, &h).unwrap();
            prop_assert!((0.0..=100.0).contains(&r));
        }
    }
}
