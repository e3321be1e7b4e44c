//! Virtue Ethics taxonomy: ten spheres of action, each with a vice of
//! deficiency, a virtue of the mean and a vice of excess.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::DataError;

/// Behavioural context in which a character trait is judged.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum SphereOfAction {
    Confidence,
    BodilyPleasures,
    SmallMoney,
    AddedValue,
    PrideAsCause,
    AmbitionAsGoal,
    Anger,
    PleasureOfOthers,
    TruthAboutOneself,
    AmusingConversation,
}

impl SphereOfAction {
    pub const ALL: [SphereOfAction; 10] = [
        SphereOfAction::Confidence,
        SphereOfAction::BodilyPleasures,
        SphereOfAction::SmallMoney,
        SphereOfAction::AddedValue,
        SphereOfAction::PrideAsCause,
        SphereOfAction::AmbitionAsGoal,
        SphereOfAction::Anger,
        SphereOfAction::PleasureOfOthers,
        SphereOfAction::TruthAboutOneself,
        SphereOfAction::AmusingConversation,
    ];

    /// Canonical lowercased context name, as rendered into prompts.
    pub fn label(self) -> &'static str {
        match self {
            SphereOfAction::Confidence => "confidence, fear, uncertainty",
            SphereOfAction::BodilyPleasures => "pleasures of the body",
            SphereOfAction::SmallMoney => "giving & taking: small money",
            SphereOfAction::AddedValue => "giving & taking: added value",
            SphereOfAction::PrideAsCause => "pride, honour as cause",
            SphereOfAction::AmbitionAsGoal => "ambition, honour as goal",
            SphereOfAction::Anger => "anger",
            SphereOfAction::PleasureOfOthers => "pleasure and pain of others",
            SphereOfAction::TruthAboutOneself => "truth, honesty about oneself",
            SphereOfAction::AmusingConversation => "amusing conversation",
        }
    }

    /// Trait names ordered (deficiency, mean, excess).
    fn traits(self) -> [&'static str; 3] {
        match self {
            SphereOfAction::Confidence => ["Cowardice", "Courage", "Rashness"],
            SphereOfAction::BodilyPleasures => ["Insensibility", "Temperance", "Profligacy"],
            SphereOfAction::SmallMoney => ["Stinginess", "Liberality", "Prodigality"],
            SphereOfAction::AddedValue => ["Meanness", "Magnificence", "Vulgarity"],
            SphereOfAction::PrideAsCause => ["Little-mindedness", "High-mindedness", "Vanity"],
            SphereOfAction::AmbitionAsGoal => ["Lack of ambition", "Proper ambition", "Over-ambition"],
            SphereOfAction::Anger => ["Spiritlessness", "Gentleness", "Wrathfulness"],
            SphereOfAction::PleasureOfOthers => ["Cross, contentious", "Agreeableness", "Flattery"],
            SphereOfAction::TruthAboutOneself => ["Irony", "Truthfulness", "Boastfulness"],
            SphereOfAction::AmusingConversation => ["Boorishness", "Wittiness", "Buffoonery"],
        }
    }
}

impl fmt::Display for SphereOfAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for SphereOfAction {
    type Err = DataError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let wanted = s.trim().to_lowercase();
        SphereOfAction::ALL
            .into_iter()
            .find(|soa| soa.label() == wanted)
            .ok_or_else(|| DataError::UnknownLabel { kind: "sphere of action", value: s.to_string() })
    }
}

impl TryFrom<String> for SphereOfAction {
    type Error = DataError;
    fn try_from(value: String) -> Result<Self, Self::Error> {
        value.parse()
    }
}

impl From<SphereOfAction> for String {
    fn from(value: SphereOfAction) -> Self {
        value.label().to_string()
    }
}

/// Contextual appropriateness of a trait within its sphere of action.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Appropriateness {
    ViceOfDeficiency,
    VirtueOfMean,
    ViceOfExcess,
}

impl Appropriateness {
    pub const ALL: [Appropriateness; 3] =
        [Appropriateness::ViceOfDeficiency, Appropriateness::VirtueOfMean, Appropriateness::ViceOfExcess];

    pub fn label(self) -> &'static str {
        match self {
            Appropriateness::ViceOfDeficiency => "vice of deficiency",
            Appropriateness::VirtueOfMean => "virtue of mean",
            Appropriateness::ViceOfExcess => "vice of excess",
        }
    }

    fn column(self) -> usize {
        match self {
            Appropriateness::ViceOfDeficiency => 0,
            Appropriateness::VirtueOfMean => 1,
            Appropriateness::ViceOfExcess => 2,
        }
    }
}

impl fmt::Display for Appropriateness {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Appropriateness {
    type Err = DataError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let wanted = s.trim().to_lowercase().replace('_', " ");
        Appropriateness::ALL
            .into_iter()
            .find(|a| a.label() == wanted)
            .ok_or_else(|| DataError::UnknownLabel { kind: "appropriateness", value: s.to_string() })
    }
}

impl TryFrom<String> for Appropriateness {
    type Error = DataError;
    fn try_from(value: String) -> Result<Self, Self::Error> {
        value.parse()
    }
}

impl From<Appropriateness> for String {
    fn from(value: Appropriateness) -> Self {
        value.label().to_string()
    }
}

/// Name of the trait sitting at `vi` within sphere `soa`.
pub fn taxonomy_lookup(soa: SphereOfAction, vi: Appropriateness) -> &'static str {
    soa.traits()[vi.column()]
}
