//! Small trainable backend: a bigram language model whose next-token logits
//! are shifted by the mean of per-input-token bias rows.
//!
//! It exists so the training loop, early stopping and checkpointing can be
//! exercised end to end without pretrained weights.

use std::collections::HashMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::backend::{
    detokenize, model_tokens, Capabilities, DecodingMethod, DecodingParams, GeneratorBackend, OptimizerConfig,
    TrainingPair, EOS_TOKEN,
};
use super::GenerationError;
use crate::prompt::{READER_TOKEN, SEP_TOKEN};

const UNK_TOKEN: &str = "<unk>";
const EOS: usize = 0;
const UNK: usize = 1;

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Params {
    vocabulary: Vec<String>,
    /// (V + 1) x V; the extra row is the start-of-sequence context.
    transition: Vec<f64>,
    /// V x V; row u shifts the logits when token u occurs in the input.
    input_bias: Vec<f64>,
}

#[derive(Debug, Clone)]
struct AdamState {
    step: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct BigramBackend {
    max_vocabulary: usize,
    params: Option<Params>,
    index: HashMap<String, usize>,
    adam: Option<AdamState>,
}

impl BigramBackend {
    pub const NAME: &'static str = "bigram";
    const FILE: &'static str = "bigram.json";

    pub fn new(max_vocabulary: usize) -> Self {
        BigramBackend { max_vocabulary: max_vocabulary.max(8), params: None, index: HashMap::new(), adam: None }
    }

    pub fn load(dir: &Path) -> Result<Self, GenerationError> {
        let path = if dir.is_dir() { dir.join(Self::FILE) } else { dir.to_path_buf() };
        let params: Params = serde_json::from_str(&fs::read_to_string(path)?)?;
        let v = params.vocabulary.len();
        if params.transition.len() != (v + 1) * v || params.input_bias.len() != v * v {
            return Err(GenerationError::InvalidConfig("bigram checkpoint has inconsistent shapes".into()));
        }
        let mut backend = BigramBackend::new(v);
        backend.install(params);
        Ok(backend)
    }

    fn install(&mut self, params: Params) {
        self.index = params.vocabulary.iter().enumerate().map(|(i, t)| (t.clone(), i)).collect();
        self.params = Some(params);
        self.adam = None;
    }

    fn params(&self) -> Result<&Params, GenerationError> {
        self.params
            .as_ref()
            .ok_or_else(|| GenerationError::InvalidConfig("bigram backend has no vocabulary; train it first".into()))
    }

    fn ids(&self, text: &str) -> Vec<usize> {
        model_tokens(text).iter().map(|t| self.index.get(t).copied().unwrap_or(UNK)).collect()
    }

    fn logits(&self, params: &Params, prev: usize, input_ids: &[usize]) -> Vec<f64> {
        let v = params.vocabulary.len();
        let mut out = params.transition[prev * v..(prev + 1) * v].to_vec();
        if !input_ids.is_empty() {
            let w = 1.0 / input_ids.len() as f64;
            for &u in input_ids {
                for (o, b) in out.iter_mut().zip(&params.input_bias[u * v..(u + 1) * v]) {
                    *o += w * b;
                }
            }
        }
        out
    }

    /// Visits each target position with its context and log-probabilities.
    /// The closing end-of-sequence transition is included when `with_eos`.
    fn walk<F>(&self, input: &str, target: &str, with_eos: bool, mut visit: F) -> Result<(), GenerationError>
    where
        F: FnMut(usize, usize, &[f64]),
    {
        let params = self.params()?;
        let v = params.vocabulary.len();
        let input_ids = self.ids(input);
        let mut target_ids = self.ids(target);
        if with_eos {
            target_ids.push(EOS);
        }
        let mut prev = v;
        for &tok in &target_ids {
            let log_probs = log_softmax(&self.logits(params, prev, &input_ids));
            visit(prev, tok, &log_probs);
            prev = tok;
        }
        Ok(())
    }
}

impl Default for BigramBackend {
    fn default() -> Self {
        BigramBackend::new(512)
    }
}

fn log_softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|x| (x - max).exp()).sum::<f64>().ln();
    logits.iter().map(|x| x - lse).collect()
}

impl GeneratorBackend for BigramBackend {
    fn name(&self) -> &str {
        Self::NAME
    }

    fn capabilities(&self) -> Capabilities {
        Capabilities { trainable: true, concurrent_decode: true, diverse_beam: false }
    }

    fn token_nll(&self, input: &str, target: &str) -> Result<Vec<f64>, GenerationError> {
        let mut out = Vec::new();
        self.walk(input, target, false, |_, tok, lp| out.push(-lp[tok]))?;
        Ok(out)
    }

    fn decode(&self, input: &str, params: &DecodingParams) -> Result<String, GenerationError> {
        if params.method != DecodingMethod::Greedy {
            return Err(GenerationError::Capability { backend: Self::NAME.into(), capability: "diverse beam search" });
        }
        let p = self.params()?;
        let v = p.vocabulary.len();
        let input_ids = self.ids(input);
        let mut generated: Vec<usize> = Vec::new();
        let mut prev = v;
        while generated.len() < params.max_length {
            let mut logits = self.logits(p, prev, &input_ids);
            for &g in &generated {
                let l = &mut logits[g];
                *l = if *l > 0.0 { *l / params.repetition_penalty } else { *l * params.repetition_penalty };
            }
            logits[UNK] = f64::NEG_INFINITY;
            let mut best = EOS;
            for (i, l) in logits.iter().enumerate() {
                if *l > logits[best] {
                    best = i;
                }
            }
            if best == EOS {
                break;
            }
            generated.push(best);
            prev = best;
        }
        let tokens: Vec<String> = generated.iter().map(|&i| p.vocabulary[i].clone()).collect();
        Ok(detokenize(&tokens))
    }

    /// Builds the vocabulary from the corpus by descending frequency (ties
    /// alphabetical) and zero-initialises the weights. No-op once built.
    fn prepare(&mut self, corpus: &[TrainingPair]) -> Result<(), GenerationError> {
        if self.params.is_some() {
            return Ok(());
        }
        let mut counts: HashMap<String, usize> = HashMap::new();
        for pair in corpus {
            for tok in model_tokens(&pair.input).into_iter().chain(model_tokens(&pair.target)) {
                *counts.entry(tok).or_default() += 1;
            }
        }
        let mut vocabulary: Vec<String> =
            [EOS_TOKEN, UNK_TOKEN, SEP_TOKEN, READER_TOKEN].iter().map(|s| s.to_string()).collect();
        for t in &vocabulary {
            counts.remove(t);
        }
        let mut ranked: Vec<(String, usize)> = counts.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let room = self.max_vocabulary.saturating_sub(vocabulary.len());
        vocabulary.extend(ranked.into_iter().take(room).map(|(t, _)| t));
        let v = vocabulary.len();
        self.install(Params { vocabulary, transition: vec![0.0; (v + 1) * v], input_bias: vec![0.0; v * v] });
        Ok(())
    }

    fn train_step(&mut self, batch: &[TrainingPair], opt: &OptimizerConfig) -> Result<f64, GenerationError> {
        if batch.is_empty() {
            return Ok(0.0);
        }
        let params = self.params()?;
        let v = params.vocabulary.len();
        let t_len = params.transition.len();
        let mut grad = vec![0.0; t_len + params.input_bias.len()];
        let mut reported = 0.0;
        let scale = 1.0 / batch.len() as f64;

        for pair in batch {
            let target_len = model_tokens(&pair.target).len();
            if target_len == 0 {
                return Err(GenerationError::EmptyTarget);
            }
            let input_ids = self.ids(&pair.input);
            let positions = (target_len + 1) as f64;
            let w_in = if input_ids.is_empty() { 0.0 } else { 1.0 / input_ids.len() as f64 };
            let mut nll_sum = 0.0;
            let mut count = 0usize;
            self.walk(&pair.input, &pair.target, true, |prev, tok, lp| {
                if count < target_len {
                    nll_sum -= lp[tok];
                }
                count += 1;
                // d(-log p[tok]) / d logits = softmax - onehot
                for k in 0..v {
                    let g = (lp[k].exp() - if k == tok { 1.0 } else { 0.0 }) * scale / positions;
                    grad[prev * v + k] += g;
                    for &u in &input_ids {
                        grad[t_len + u * v + k] += g * w_in;
                    }
                }
            })?;
            reported += nll_sum / target_len as f64;
        }

        let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
        if opt.max_grad_norm > 0.0 && norm > opt.max_grad_norm {
            let c = opt.max_grad_norm / norm;
            grad.iter_mut().for_each(|g| *g *= c);
        }

        let n = grad.len();
        let adam = self.adam.get_or_insert_with(|| AdamState { step: 0, m: vec![0.0; n], v: vec![0.0; n] });
        adam.step += 1;
        let bc1 = 1.0 - opt.beta1.powi(adam.step as i32);
        let bc2 = 1.0 - opt.beta2.powi(adam.step as i32);
        let params = self.params.as_mut().expect("checked above");
        for (i, g) in grad.iter().enumerate() {
            adam.m[i] = opt.beta1 * adam.m[i] + (1.0 - opt.beta1) * g;
            adam.v[i] = opt.beta2 * adam.v[i] + (1.0 - opt.beta2) * g * g;
            let update = (adam.m[i] / bc1) / ((adam.v[i] / bc2).sqrt() + opt.epsilon);
            let w = if i < t_len { &mut params.transition[i] } else { &mut params.input_bias[i - t_len] };
            *w -= opt.learning_rate * (update + opt.weight_decay * *w);
        }
        Ok(reported * scale)
    }

    fn save(&self, dir: &Path) -> Result<(), GenerationError> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join(Self::FILE), serde_json::to_string(self.params()?)?)?;
        Ok(())
    }
}
