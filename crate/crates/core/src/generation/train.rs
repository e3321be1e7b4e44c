use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::backend::{DecodingParams, GeneratorBackend, OptimizerConfig, TrainingPair};
use super::loss::{combined_loss, loss_one2many, loss_one2one};
use super::strategy::{prepare_training_example, Strategy, TrainingExample};
use super::{split_generated, GenerationError};
use crate::data::{AnnotatedSentence, DatasetSplit};
use crate::similarity::{similarity_decrease_loss, EmbeddingProvider, DEFAULT_MARGIN};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingConfig {
    pub strategy: Strategy,
    pub alpha: f64,
    pub margin: f64,
    pub patience: usize,
    pub max_epochs: usize,
    pub inner_decoding: DecodingParams,
    pub optimizer: OptimizerConfig,
    pub seed: u64,
    /// Shuffle reader order for `One2MRand` instead of using dataset order.
    pub shuffle_rand_order: bool,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            strategy: Strategy::One2One,
            alpha: 0.5,
            margin: DEFAULT_MARGIN,
            patience: 5,
            max_epochs: 20,
            inner_decoding: DecodingParams::default(),
            optimizer: OptimizerConfig::default(),
            seed: 0,
            shuffle_rand_order: false,
        }
    }
}

impl TrainingConfig {
    pub fn check(&self) -> Result<(), GenerationError> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(GenerationError::InvalidConfig(format!("alpha {} outside (0, 1)", self.alpha)));
        }
        if self.patience == 0 {
            return Err(GenerationError::InvalidConfig("patience must be at least 1".into()));
        }
        if self.margin < 0.0 {
            return Err(GenerationError::InvalidConfig(format!("negative margin {}", self.margin)));
        }
        if self.optimizer.batch_size == 0 {
            return Err(GenerationError::InvalidConfig("batch_size must be positive".into()));
        }
        if self.strategy == Strategy::One2MCon {
            self.inner_decoding.check()?;
        }
        Ok(())
    }
}

/// One line of the training log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub epoch: usize,
    pub split: String,
    pub loss: f64,
    pub strategy: Strategy,
    pub alpha: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lm: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lsim: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub entries: Vec<LogEntry>,
    pub best_epoch: Option<usize>,
    pub stopped_early: bool,
}

impl TrainingLog {
    pub fn losses(&self, split: &str) -> Vec<f64> {
        self.entries.iter().filter(|e| e.split == split).map(|e| e.loss).collect()
    }
}

/// Per-sentence objective value and, for `One2MCon`, its two components.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Objective {
    pub loss: f64,
    pub lm: f64,
    pub lsim: Option<f64>,
}

/// Strategy objective of one sentence given its prepared examples.
pub fn sentence_objective(
    backend: &dyn GeneratorBackend,
    examples: &[TrainingExample],
    config: &TrainingConfig,
    provider: Option<&dyn EmbeddingProvider>,
) -> Result<Objective, GenerationError> {
    match config.strategy {
        Strategy::One2One => {
            let lm = examples.iter().map(|e| loss_one2one(backend, &e.prompt, &e.target)).sum::<Result<f64, _>>()?;
            Ok(Objective { loss: lm, lm, lsim: None })
        }
        Strategy::One2MRand | Strategy::One2MSim => {
            let lm = examples.iter().map(|e| loss_one2many(backend, &e.prompt, &e.target)).sum::<Result<f64, _>>()?;
            Ok(Objective { loss: lm, lm, lsim: None })
        }
        Strategy::One2MCon => {
            let provider = provider.ok_or(GenerationError::MissingProvider(Strategy::One2MCon))?;
            let mut lm = 0.0;
            let mut lsim = 0.0;
            for e in examples {
                lm += loss_one2many(backend, &e.prompt, &e.target)?;
                let decoded = backend.decode(&e.prompt.text, &config.inner_decoding)?;
                let (parts, _) = split_generated(&decoded);
                lsim += similarity_decrease_loss(&e.sentence, &parts, config.margin, provider)?;
            }
            Ok(Objective { loss: combined_loss(lm, lsim, config.alpha)?, lm, lsim: Some(lsim) })
        }
    }
}

fn prepare_all(
    data: &[AnnotatedSentence],
    config: &TrainingConfig,
    provider: Option<&dyn EmbeddingProvider>,
) -> Result<Vec<Vec<TrainingExample>>, GenerationError> {
    let shuffle = config.shuffle_rand_order.then_some(config.seed);
    data.iter().map(|rec| prepare_training_example(rec, config.strategy, provider, shuffle)).collect()
}

fn mean_objective(
    backend: &dyn GeneratorBackend,
    groups: &[Vec<TrainingExample>],
    config: &TrainingConfig,
    provider: Option<&dyn EmbeddingProvider>,
) -> Result<Objective, GenerationError> {
    let n = groups.len().max(1) as f64;
    let mut acc = Objective { loss: 0.0, lm: 0.0, lsim: None };
    for g in groups {
        let o = sentence_objective(backend, g, config, provider)?;
        acc.loss += o.loss / n;
        acc.lm += o.lm / n;
        if let Some(s) = o.lsim {
            *acc.lsim.get_or_insert(0.0) += s / n;
        }
    }
    Ok(acc)
}

/// Trains `backend` on the train split with early stopping on the
/// validation objective (or the train objective when validation is empty).
///
/// Gradient steps optimise the language-modelling loss. Under `One2MCon`
/// the similarity-decrease term is computed on decoded output after each
/// epoch and enters the logged and monitored objective; it does not reach
/// the parameters, since decoding is not differentiable.
pub fn train(
    data: &DatasetSplit,
    backend: &mut dyn GeneratorBackend,
    config: &TrainingConfig,
    provider: Option<&dyn EmbeddingProvider>,
) -> Result<TrainingLog, GenerationError> {
    if !backend.capabilities().trainable {
        return Err(GenerationError::Capability { backend: backend.name().to_string(), capability: "training" });
    }
    config.check()?;
    if config.strategy.needs_similarity() && provider.is_none() {
        return Err(GenerationError::MissingProvider(config.strategy));
    }
    let mut log = TrainingLog::default();
    if config.max_epochs == 0 {
        return Ok(log);
    }
    if data.train.is_empty() {
        return Err(GenerationError::InvalidConfig("empty training split".into()));
    }

    let train_groups = prepare_all(&data.train, config, provider)?;
    let val_groups = prepare_all(&data.validation, config, provider)?;
    let pairs: Vec<TrainingPair> = train_groups
        .iter()
        .flatten()
        .map(|e| TrainingPair { input: e.prompt.text.clone(), target: e.target.text.clone() })
        .collect();
    backend.prepare(&pairs)?;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..pairs.len()).collect();
    let mut best = f64::INFINITY;
    let mut since_best = 0;

    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut rng);
        for chunk in order.chunks(config.optimizer.batch_size) {
            let batch: Vec<TrainingPair> = chunk.iter().map(|&i| pairs[i].clone()).collect();
            backend.train_step(&batch, &config.optimizer)?;
        }

        let train_obj = mean_objective(backend, &train_groups, config, provider)?;
        log.entries.push(entry(epoch, "train", train_obj, config));
        let monitored = if val_groups.is_empty() {
            train_obj.loss
        } else {
            let val_obj = mean_objective(backend, &val_groups, config, provider)?;
            log.entries.push(entry(epoch, "validation", val_obj, config));
            val_obj.loss
        };

        if monitored < best {
            best = monitored;
            since_best = 0;
            log.best_epoch = Some(epoch);
        } else {
            since_best += 1;
            if since_best >= config.patience {
                log::info!("early stop at epoch {epoch}: no improvement for {} evaluations", config.patience);
                log.stopped_early = true;
                break;
            }
        }
    }
    Ok(log)
}

fn entry(epoch: usize, split: &str, obj: Objective, config: &TrainingConfig) -> LogEntry {
    let con = config.strategy == Strategy::One2MCon;
    LogEntry {
        epoch,
        split: split.to_string(),
        loss: obj.loss,
        strategy: config.strategy,
        alpha: config.alpha,
        lm: con.then_some(obj.lm),
        lsim: if con { obj.lsim } else { None },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Attitude, MoralJudgment, ReaderContext, ReaderRecord};
    use crate::generation::{BigramBackend, TabularBackend};
    use crate::similarity::BagOfWordsProvider;

    fn sentence(id: &str, interps: &[&str]) -> AnnotatedSentence {
        AnnotatedSentence {
            id: id.into(),
            title: format!("title {id}"),
            sentence: format!("sentence {id} said"),
            entities: vec!["she".into()],
            readers: interps
                .iter()
                .map(|i| ReaderRecord {
                    context: ReaderContext::new(Attitude::new(3).unwrap(), vec![MoralJudgment::absent("she")]),
                    interpretation: i.to_string(),
                })
                .collect(),
        }
    }

    fn split(j: usize) -> DatasetSplit {
        let interps = ["she said it", "she meant well", "it was said"];
        DatasetSplit {
            train: vec![sentence("a", &interps[..j]), sentence("b", &interps[..j])],
            validation: vec![sentence("c", &interps[..j])],
            test: vec![],
            seed: 0,
        }
    }

    fn fast(strategy: Strategy, epochs: usize) -> TrainingConfig {
        TrainingConfig {
            strategy,
            max_epochs: epochs,
            inner_decoding: DecodingParams { max_length: 12, ..DecodingParams::greedy() },
            optimizer: OptimizerConfig { learning_rate: 0.05, max_grad_norm: 5.0, ..Default::default() },
            ..Default::default()
        }
    }

    #[test]
    fn zero_epochs_is_noop() {
        let mut b = BigramBackend::default();
        let log = train(&split(1), &mut b, &fast(Strategy::One2One, 0), None).unwrap();
        assert!(log.entries.is_empty());
        assert!(b.token_nll("x", "y").is_err(), "backend must stay untouched");
    }

    #[test]
    fn tabular_not_trainable() {
        let mut b = TabularBackend::uniform(&["a"]);
        let err = train(&split(1), &mut b, &fast(Strategy::One2One, 3), None).unwrap_err();
        assert!(matches!(err, GenerationError::Capability { .. }));
    }

    #[test]
    fn one2one_loss_decreases() {
        let mut b = BigramBackend::default();
        let log = train(&split(3), &mut b, &fast(Strategy::One2One, 6), None).unwrap();
        let tr = log.losses("train");
        assert_eq!(tr.len(), 6);
        assert!(tr.last().unwrap() < tr.first().unwrap());
        assert_eq!(log.losses("validation").len(), 6);
    }

    #[test]
    fn con_with_single_reader_is_alpha_scaled_lm() {
        let p = BagOfWordsProvider::default();
        let mut b = BigramBackend::default();
        let cfg = fast(Strategy::One2MCon, 3);
        let log = train(&split(1), &mut b, &cfg, Some(&p)).unwrap();
        for e in &log.entries {
            assert_eq!(e.lsim, Some(0.0));
            assert!((e.loss - cfg.alpha * e.lm.unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn con_requires_provider() {
        let mut b = BigramBackend::default();
        assert!(matches!(
            train(&split(2), &mut b, &fast(Strategy::One2MCon, 1), None),
            Err(GenerationError::MissingProvider(_))
        ));
    }

    #[test]
    fn early_stopping_respects_patience() {
        // learning rate zero: the objective never improves after epoch 1
        let mut cfg = fast(Strategy::One2MRand, 50);
        cfg.optimizer.learning_rate = 0.0;
        cfg.patience = 2;
        let mut b = BigramBackend::default();
        let log = train(&split(2), &mut b, &cfg, None).unwrap();
        assert!(log.stopped_early);
        assert_eq!(log.best_epoch, Some(1));
        assert_eq!(log.losses("validation").len(), 3);
    }

    #[test]
    fn config_checks() {
        assert!(TrainingConfig { alpha: 1.0, ..Default::default() }.check().is_err());
        assert!(TrainingConfig { patience: 0, ..Default::default() }.check().is_err());
        assert!(TrainingConfig::default().check().is_ok());
    }
}
