//! Backend defined by an explicit table of next-token distributions.
//!
//! A row is keyed by the target prefix and optionally by the exact input;
//! an input-specific row wins over a generic one, and prefixes without a
//! row fall back to the uniform distribution over the vocabulary.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::backend::{
    detokenize, model_tokens, Capabilities, DecodingMethod, DecodingParams, GeneratorBackend, EOS_TOKEN,
};
use super::GenerationError;

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Row {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    input: Option<String>,
    prefix: Vec<String>,
    probs: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Table {
    vocabulary: Vec<String>,
    rows: Vec<Row>,
}

#[derive(Debug, Clone)]
pub struct TabularBackend {
    vocabulary: Vec<String>,
    rows: HashMap<(Option<String>, Vec<String>), BTreeMap<String, f64>>,
}

impl TabularBackend {
    pub const NAME: &'static str = "tabular";
    const FILE: &'static str = "tabular.json";

    /// Uniform distribution over `vocabulary` at every position.
    pub fn uniform<S: AsRef<str>>(vocabulary: &[S]) -> Self {
        TabularBackend {
            vocabulary: vocabulary.iter().map(|s| s.as_ref().to_string()).collect(),
            rows: HashMap::new(),
        }
    }

    pub fn vocabulary(&self) -> &[String] {
        &self.vocabulary
    }

    /// Sets the distribution after `prefix` (for any input when `input` is
    /// `None`). Probabilities must be non-negative, over known tokens and
    /// sum to one.
    pub fn with_row<S: AsRef<str>>(
        mut self,
        input: Option<&str>,
        prefix: &[S],
        probs: &[(&str, f64)],
    ) -> Result<Self, GenerationError> {
        let mut dist = BTreeMap::new();
        for (tok, p) in probs {
            if !self.vocabulary.iter().any(|v| v == tok) {
                return Err(GenerationError::UnknownToken(tok.to_string()));
            }
            if !(0.0..=1.0).contains(p) {
                return Err(GenerationError::InvalidConfig(format!("probability {p} for {tok:?}")));
            }
            dist.insert(tok.to_string(), *p);
        }
        let total: f64 = dist.values().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(GenerationError::InvalidConfig(format!("row probabilities sum to {total}")));
        }
        let key = (input.map(str::to_string), prefix.iter().map(|s| s.as_ref().to_string()).collect());
        self.rows.insert(key, dist);
        Ok(self)
    }

    fn prob(&self, input: &str, prefix: &[String], token: &str) -> f64 {
        match self.row(input, prefix) {
            Some(dist) => dist.get(token).copied().unwrap_or(0.0),
            None if self.vocabulary.iter().any(|v| v == token) => 1.0 / self.vocabulary.len() as f64,
            None => 0.0,
        }
    }

    fn row(&self, input: &str, prefix: &[String]) -> Option<&BTreeMap<String, f64>> {
        self.rows
            .get(&(Some(input.to_string()), prefix.to_vec()))
            .or_else(|| self.rows.get(&(None, prefix.to_vec())))
    }

    pub fn load(dir: &Path) -> Result<Self, GenerationError> {
        let path = if dir.is_dir() { dir.join(Self::FILE) } else { dir.to_path_buf() };
        let table: Table = serde_json::from_str(&fs::read_to_string(path)?)?;
        let mut backend = TabularBackend::uniform(&table.vocabulary);
        for row in table.rows {
            let probs: Vec<(&str, f64)> = row.probs.iter().map(|(k, v)| (k.as_str(), *v)).collect();
            backend = backend.with_row(row.input.as_deref(), &row.prefix, &probs)?;
        }
        Ok(backend)
    }
}

impl GeneratorBackend for TabularBackend {
    fn name(&self) -> &str {
        Self::NAME
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities { trainable: false, concurrent_decode: true, diverse_beam: false }
    }

    fn token_nll(&self, input: &str, target: &str) -> Result<Vec<f64>, GenerationError> {
        let tokens = model_tokens(target);
        let mut out = Vec::with_capacity(tokens.len());
        for t in 0..tokens.len() {
            let p = self.prob(input, &tokens[..t], &tokens[t]);
            if p <= 0.0 {
                return Err(GenerationError::ZeroProbability(tokens[t].clone()));
            }
            out.push(-p.ln());
        }
        Ok(out)
    }

    fn decode(&self, input: &str, params: &DecodingParams) -> Result<String, GenerationError> {
        if params.method != DecodingMethod::Greedy {
            return Err(GenerationError::Capability { backend: Self::NAME.into(), capability: "diverse beam search" });
        }
        let mut out: Vec<String> = Vec::new();
        while out.len() < params.max_length {
            let next = match self.row(input, &out) {
                Some(dist) => dist
                    .iter()
                    .fold(None::<(&String, f64)>, |best, (tok, &p)| match best {
                        Some((_, bp)) if bp >= p => best,
                        _ => Some((tok, p)),
                    })
                    .map(|(t, _)| t.clone()),
                None => self.vocabulary.first().cloned(),
            };
            match next {
                Some(tok) if tok != EOS_TOKEN => out.push(tok),
                _ => break,
            }
        }
        Ok(detokenize(&out))
    }

    fn save(&self, dir: &Path) -> Result<(), GenerationError> {
        fs::create_dir_all(dir)?;
        let mut rows: Vec<Row> = self
            .rows
            .iter()
            .map(|((input, prefix), probs)| Row { input: input.clone(), prefix: prefix.clone(), probs: probs.clone() })
            .collect();
        rows.sort_by(|a, b| (&a.input, &a.prefix).cmp(&(&b.input, &b.prefix)));
        let table = Table { vocabulary: self.vocabulary.clone(), rows };
        fs::write(dir.join(Self::FILE), serde_json::to_string_pretty(&table)?)?;
        Ok(())
    }
}
