use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::GenerationError;
use crate::data::{AnnotatedSentence, ReaderContext};
use crate::prompt::{build_prompt, build_target, GenerationMode, PromptString, TargetString};
use crate::similarity::{fnv1a, order_by_similarity, EmbeddingProvider};

/// How training targets are formed and ordered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Strategy {
    /// One prompt and one target per reader.
    #[serde(rename = "One2One")]
    One2One,
    /// All readers in one prompt, targets in dataset order.
    #[serde(rename = "One2M_Rand")]
    One2MRand,
    /// All readers in one prompt, ordered by similarity to the sentence.
    #[serde(rename = "One2M_Sim")]
    One2MSim,
    /// As `One2MSim`, plus the similarity-decrease loss on decoded output.
    #[serde(rename = "One2M_Con")]
    One2MCon,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [Strategy::One2One, Strategy::One2MRand, Strategy::One2MSim, Strategy::One2MCon];

    pub fn label(self) -> &'static str {
        match self {
            Strategy::One2One => "One2One",
            Strategy::One2MRand => "One2M_Rand",
            Strategy::One2MSim => "One2M_Sim",
            Strategy::One2MCon => "One2M_Con",
        }
    }

    pub fn mode(self) -> GenerationMode {
        match self {
            Strategy::One2One => GenerationMode::OneToOne,
            _ => GenerationMode::OneToMany,
        }
    }

    pub fn needs_similarity(self) -> bool {
        matches!(self, Strategy::One2MSim | Strategy::One2MCon)
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Strategy {
    type Err = GenerationError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm: String = s.chars().filter(|c| c.is_alphanumeric()).collect::<String>().to_lowercase();
        Strategy::ALL
            .into_iter()
            .find(|st| st.label().replace('_', "").to_lowercase() == norm)
            .ok_or_else(|| GenerationError::InvalidConfig(format!("unknown strategy {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingExample {
    pub sentence_id: String,
    pub sentence: String,
    pub prompt: PromptString,
    pub target: TargetString,
    /// Dataset reader indices in the order they appear in prompt and target.
    pub reader_order: Vec<usize>,
}

fn example(rec: &AnnotatedSentence, order: Vec<usize>, mode: GenerationMode) -> Result<TrainingExample, GenerationError> {
    let contexts: Vec<ReaderContext> = order.iter().map(|&j| rec.readers[j].context.clone()).collect();
    let interps: Vec<String> = order.iter().map(|&j| rec.readers[j].interpretation.clone()).collect();
    Ok(TrainingExample {
        sentence_id: rec.id.clone(),
        sentence: rec.sentence.clone(),
        prompt: build_prompt(&rec.title, &rec.sentence, &contexts)?,
        target: build_target(&interps, mode)?,
        reader_order: order,
    })
}

/// Builds the (prompt, target) pairs of one sentence under `strategy`.
///
/// Reader contexts and interpretations are permuted together, so reader
/// `j`'s grounding always lines up with reader `j`'s interpretation.
/// `shuffle_seed` replaces dataset order with a seeded shuffle for
/// `One2MRand`; it is ignored by the other strategies.
pub fn prepare_training_example(
    rec: &AnnotatedSentence,
    strategy: Strategy,
    provider: Option<&dyn EmbeddingProvider>,
    shuffle_seed: Option<u64>,
) -> Result<Vec<TrainingExample>, GenerationError> {
    if rec.readers.is_empty() {
        return Err(GenerationError::InvalidConfig(format!("record {:?} has no readers", rec.id)));
    }
    let identity: Vec<usize> = (0..rec.readers.len()).collect();
    match strategy {
        Strategy::One2One => {
            identity.into_iter().map(|j| example(rec, vec![j], GenerationMode::OneToOne)).collect()
        }
        Strategy::One2MRand => {
            let mut order = identity;
            if let Some(seed) = shuffle_seed {
                let mut rng = ChaCha8Rng::seed_from_u64(seed ^ fnv1a(rec.id.as_bytes()));
                order.shuffle(&mut rng);
            }
            Ok(vec![example(rec, order, GenerationMode::OneToMany)?])
        }
        Strategy::One2MSim | Strategy::One2MCon => {
            let provider = provider.ok_or(GenerationError::MissingProvider(strategy))?;
            let order = order_by_similarity(&rec.sentence, &rec.interpretations(), provider)?;
            Ok(vec![example(rec, order, GenerationMode::OneToMany)?])
        }
    }
}
