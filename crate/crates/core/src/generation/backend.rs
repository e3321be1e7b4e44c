use std::path::Path;

use serde::{Deserialize, Serialize};

use super::GenerationError;
use crate::prompt::{READER_TOKEN, SEP_TOKEN};

/// End-of-sequence marker used by the built-in backends.
pub const EOS_TOKEN: &str = "</s>";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Capabilities {
    pub trainable: bool,
    pub concurrent_decode: bool,
    pub diverse_beam: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DecodingMethod {
    DiverseBeam,
    Greedy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DecodingParams {
    pub method: DecodingMethod,
    pub max_length: usize,
    pub beam_size: usize,
    pub beam_groups: usize,
    pub diversity_penalty: f64,
    pub repetition_penalty: f64,
    pub early_stopping: bool,
}

impl Default for DecodingParams {
    fn default() -> Self {
        DecodingParams {
            method: DecodingMethod::DiverseBeam,
            max_length: 150,
            beam_size: 10,
            beam_groups: 5,
            diversity_penalty: 2.0,
            repetition_penalty: 1.2,
            early_stopping: true,
        }
    }
}

impl DecodingParams {
    pub fn greedy() -> Self {
        DecodingParams { method: DecodingMethod::Greedy, ..Default::default() }
    }

    pub fn check(&self) -> Result<(), GenerationError> {
        if self.max_length == 0 {
            return Err(GenerationError::InvalidConfig("max_length must be positive".into()));
        }
        if self.repetition_penalty <= 0.0 {
            return Err(GenerationError::InvalidConfig("repetition_penalty must be positive".into()));
        }
        if self.method == DecodingMethod::DiverseBeam
            && (self.beam_groups == 0 || self.beam_size == 0 || !self.beam_size.is_multiple_of(self.beam_groups))
        {
            return Err(GenerationError::InvalidConfig(format!(
                "beam_size {} must be a positive multiple of beam_groups {}",
                self.beam_size, self.beam_groups
            )));
        }
        Ok(())
    }
}

/// Adam-style optimiser settings handed to trainable backends.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OptimizerConfig {
    pub learning_rate: f64,
    pub weight_decay: f64,
    pub epsilon: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub batch_size: usize,
    pub max_grad_norm: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            learning_rate: 1e-6,
            weight_decay: 0.01,
            epsilon: 1e-8,
            beta1: 0.9,
            beta2: 0.99,
            batch_size: 2,
            max_grad_norm: 0.1,
        }
    }
}

/// One (input, target) pair as seen by a backend.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrainingPair {
    pub input: String,
    pub target: String,
}

/// Conditional sequence generator.
pub trait GeneratorBackend: Send {
    fn name(&self) -> &str;

    fn capabilities(&self) -> Capabilities;

    /// Negative log-likelihood of each target token given the input and the
    /// preceding target tokens.
    fn token_nll(&self, input: &str, target: &str) -> Result<Vec<f64>, GenerationError>;

    fn decode(&self, input: &str, params: &DecodingParams) -> Result<String, GenerationError>;

    /// Called once with the whole training corpus before the first step.
    fn prepare(&mut self, _corpus: &[TrainingPair]) -> Result<(), GenerationError> {
        Ok(())
    }

    /// One optimisation step on the mean length-normalised NLL of `batch`;
    /// returns that loss before the update.
    fn train_step(&mut self, _batch: &[TrainingPair], _optimizer: &OptimizerConfig) -> Result<f64, GenerationError> {
        Err(GenerationError::Capability { backend: self.name().to_string(), capability: "training" })
    }

    fn save(&self, dir: &Path) -> Result<(), GenerationError>;
}

/// Whitespace tokenisation that keeps reserved tokens atomic even when
/// written without surrounding spaces.
pub fn model_tokens(text: &str) -> Vec<String> {
    let spaced = text
        .replace(SEP_TOKEN, &format!(" {SEP_TOKEN} "))
        .replace(READER_TOKEN, &format!(" {READER_TOKEN} "));
    spaced.split_whitespace().map(str::to_string).collect()
}

/// Joins generated tokens; reserved tokens need no surrounding handling
/// because interpretations are split on them and trimmed.
pub fn detokenize(tokens: &[String]) -> String {
    tokens.join(" ")
}
