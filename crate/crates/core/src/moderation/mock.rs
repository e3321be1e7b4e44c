use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use super::client::{text_key, Transport, TransportError};
use super::{Attribute, AttributeScores, ModerationError};

/// Offline scorer backed by a JSON object mapping `text_key(text)` to scores.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FileMockTransport {
    scores: BTreeMap<String, AttributeScores>,
}

impl FileMockTransport {
    pub fn load(path: &Path) -> Result<Self, ModerationError> {
        let scores: BTreeMap<String, AttributeScores> = serde_json::from_str(&fs::read_to_string(path)?)?;
        for s in scores.values() {
            s.validate()?;
        }
        Ok(FileMockTransport { scores })
    }

    pub fn from_texts<'a>(entries: impl IntoIterator<Item = (&'a str, AttributeScores)>) -> Self {
        FileMockTransport { scores: entries.into_iter().map(|(t, s)| (text_key(t), s)).collect() }
    }

    pub fn insert(&mut self, text: &str, scores: AttributeScores) {
        self.scores.insert(text_key(text), scores);
    }

    pub fn save(&self, path: &Path) -> Result<(), ModerationError> {
        fs::write(path, serde_json::to_string_pretty(&self.scores)? + "\n")?;
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.scores.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scores.is_empty()
    }
}

impl Transport for FileMockTransport {
    fn score(&self, text: &str, _attributes: &[Attribute]) -> Result<AttributeScores, TransportError> {
        self.scores
            .get(&text_key(text))
            .cloned()
            .ok_or_else(|| TransportError::Permanent(format!("no mock score for text {:?}", text_key(text))))
    }
}
