//! Lookup backend that returns the target recorded for each prompt.
//!
//! Its checkpoint is the line-delimited prompt dump (`{"prompt", "target"}`
//! per line), which makes it an identity oracle for the evaluation path.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::backend::{model_tokens, Capabilities, DecodingParams, GeneratorBackend};
use super::GenerationError;

#[derive(Debug, Serialize, Deserialize)]
struct Entry {
    prompt: String,
    target: String,
}

#[derive(Debug, Clone, Default)]
pub struct EchoBackend {
    table: BTreeMap<String, String>,
    vocabulary: BTreeSet<String>,
}

impl EchoBackend {
    pub const NAME: &'static str = "echo";
    const FILE: &'static str = "echo.jsonl";

    pub fn from_pairs<I, A, B>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (A, B)>,
        A: Into<String>,
        B: Into<String>,
    {
        let mut backend = EchoBackend::default();
        for (prompt, target) in pairs {
            backend.insert(prompt.into(), target.into());
        }
        backend
    }

    fn insert(&mut self, prompt: String, target: String) {
        self.vocabulary.extend(model_tokens(&target));
        self.table.insert(prompt, target);
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    /// Reads a prompt dump file, or `echo.jsonl` inside a directory. Lines
    /// may carry extra keys.
    pub fn load(path: &Path) -> Result<Self, GenerationError> {
        let file = if path.is_dir() { path.join(Self::FILE) } else { path.to_path_buf() };
        let reader = BufReader::new(fs::File::open(file)?);
        let mut backend = EchoBackend::default();
        for line in reader.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let entry: Entry = serde_json::from_str(&line)?;
            backend.insert(entry.prompt, entry.target);
        }
        Ok(backend)
    }
}

impl GeneratorBackend for EchoBackend {
    fn name(&self) -> &str {
        Self::NAME
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities { trainable: false, concurrent_decode: true, diverse_beam: true }
    }

    /// Zero for tokens agreeing with the recorded target at the same
    /// position, uniform over the known vocabulary otherwise.
    fn token_nll(&self, input: &str, target: &str) -> Result<Vec<f64>, GenerationError> {
        let recorded = self.table.get(input).map(|t| model_tokens(t)).unwrap_or_default();
        let miss = ((self.vocabulary.len() + 1) as f64).ln();
        Ok(model_tokens(target)
            .iter()
            .enumerate()
            .map(|(i, tok)| if recorded.get(i) == Some(tok) { 0.0 } else { miss })
            .collect())
    }

    fn decode(&self, input: &str, _params: &DecodingParams) -> Result<String, GenerationError> {
        self.table
            .get(input)
            .cloned()
            .ok_or_else(|| GenerationError::Decode(format!("no recorded target for prompt {input:?}")))
    }

    fn save(&self, dir: &Path) -> Result<(), GenerationError> {
        fs::create_dir_all(dir)?;
        let mut out = fs::File::create(dir.join(Self::FILE))?;
        for (prompt, target) in &self.table {
            let line = serde_json::to_string(&Entry { prompt: prompt.clone(), target: target.clone() })?;
            writeln!(out, "{line}")?;
        }
        Ok(())
    }
}
