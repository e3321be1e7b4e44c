//! Run configuration: one TOML file flattened to dotted keys, with command
//! line overrides applied on top.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use interp_core::data::{SplitRatios, DEFAULT_MIN_READERS};
use interp_core::generation::{
    DecodingMethod, DecodingParams, OptimizerConfig, TrainingConfig, BACKENDS,
};
use interp_core::moderation::AnalysisSettings;
use interp_core::similarity::{provider_by_name, EmbeddingProvider, DEFAULT_MARGIN};
use interp_core::Strategy;
use toml::Value;

use crate::error::{CliError, CliResult, ExitKind};

/// Every accepted key with its default.
fn defaults() -> BTreeMap<&'static str, Value> {
    let dec = DecodingParams::default();
    let opt = OptimizerConfig::default();
    let tr = TrainingConfig::default();
    let an = AnalysisSettings::default();
    let f = Value::Float;
    let i = |v: usize| Value::Integer(v as i64);
    let s = |v: &str| Value::String(v.to_string());
    BTreeMap::from([
        ("seed", Value::Integer(42)),
        ("out", s("out")),
        ("dataset.path", s("")),
        ("dataset.strict", Value::Boolean(true)),
        ("dataset.min_readers", i(DEFAULT_MIN_READERS)),
        ("split.train", f(0.8)),
        ("split.validation", f(0.1)),
        ("split.test", f(0.1)),
        ("train.strategy", s(tr.strategy.label())),
        ("train.alpha", f(tr.alpha)),
        ("train.margin", f(DEFAULT_MARGIN)),
        ("train.patience", i(tr.patience)),
        ("train.max_epochs", i(tr.max_epochs)),
        ("train.shuffle_rand_order", Value::Boolean(tr.shuffle_rand_order)),
        ("optimizer.learning_rate", f(opt.learning_rate)),
        ("optimizer.weight_decay", f(opt.weight_decay)),
        ("optimizer.epsilon", f(opt.epsilon)),
        ("optimizer.beta1", f(opt.beta1)),
        ("optimizer.beta2", f(opt.beta2)),
        ("optimizer.batch_size", i(opt.batch_size)),
        ("optimizer.max_grad_norm", f(opt.max_grad_norm)),
        ("decoding.method", s("diverse_beam")),
        ("decoding.max_length", i(dec.max_length)),
        ("decoding.beam_size", i(dec.beam_size)),
        ("decoding.beam_groups", i(dec.beam_groups)),
        ("decoding.diversity_penalty", f(dec.diversity_penalty)),
        ("decoding.repetition_penalty", f(dec.repetition_penalty)),
        ("decoding.early_stopping", Value::Boolean(dec.early_stopping)),
        ("backend.name", s("bigram")),
        ("backend.checkpoint", s("")),
        ("similarity.provider", s("bow")),
        ("evaluation.split", s("test")),
        ("evaluation.plugins", Value::Array(vec![])),
        ("evaluation.symmetric_di", Value::Boolean(false)),
        ("evaluation.threads", i(4)),
        ("moderation.endpoint", s("")),
        ("moderation.api_key_env", s("")),
        ("moderation.qps", f(1.0)),
        ("moderation.concurrency", i(4)),
        ("moderation.max_retries", i(5)),
        ("moderation.timeout_secs", i(30)),
        ("moderation.mock_scores", s("")),
        ("moderation.margin", f(an.margin)),
        ("moderation.low", f(an.low)),
        ("moderation.high", f(an.high)),
    ])
}

fn flatten(prefix: &str, table: &toml::Table, out: &mut BTreeMap<String, Value>) {
    for (k, v) in table {
        let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match v {
            Value::Table(t) => flatten(&key, t, out),
            other => {
                out.insert(key, other.clone());
            }
        }
    }
}

/// Flat key/value view of the configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigMap(BTreeMap<String, Value>);

impl ConfigMap {
    pub fn defaults() -> Self {
        ConfigMap(defaults().into_iter().map(|(k, v)| (k.to_string(), v)).collect())
    }

    /// Defaults overlaid with a TOML document. Nested tables and quoted
    /// dotted keys are equivalent.
    pub fn from_toml(text: &str) -> CliResult<Self> {
        let table: toml::Table = text.parse().map_err(|e| CliError::domain(format!("config: {e}")))?;
        let mut flat = BTreeMap::new();
        flatten("", &table, &mut flat);
        let mut map = Self::defaults();
        for (k, v) in flat {
            map.set(&k, v)?;
        }
        Ok(map)
    }

    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        match path {
            None => Ok(Self::defaults()),
            Some(p) => {
                let text = fs::read_to_string(p)
                    .map_err(|e| CliError::new(ExitKind::Io, e).context(format!("reading config {}", p.display())))?;
                Self::from_toml(&text)
            }
        }
    }

    pub fn set(&mut self, key: &str, value: Value) -> CliResult<()> {
        let Some(current) = self.0.get(key) else {
            return Err(CliError::domain(format!("unknown config key {key:?}")));
        };
        let value = match (current, value) {
            (Value::Float(_), Value::Integer(n)) => Value::Float(n as f64),
            (Value::String(_), Value::Integer(n)) => Value::String(n.to_string()),
            (Value::String(_), Value::Float(x)) => Value::String(x.to_string()),
            (Value::Array(_), Value::String(s)) => {
                Value::Array(s.split(',').map(str::trim).filter(|p| !p.is_empty()).map(|p| Value::String(p.into())).collect())
            }
            (_, v) => v,
        };
        if std::mem::discriminant(current) != std::mem::discriminant(&value) {
            return Err(CliError::domain(format!("config key {key}: expected {}, got {}", current.type_str(), value.type_str())));
        }
        self.0.insert(key.to_string(), value);
        Ok(())
    }

    /// Applies `key=value`; the value is read as a TOML literal, falling
    /// back to a bare string.
    pub fn set_from_arg(&mut self, arg: &str) -> CliResult<()> {
        let (key, raw) = arg
            .split_once('=')
            .ok_or_else(|| CliError::domain(format!("override {arg:?} is not key=value")))?;
        let value = format!("v = {raw}")
            .parse::<toml::Table>()
            .ok()
            .and_then(|mut t| t.remove("v"))
            .unwrap_or_else(|| Value::String(raw.to_string()));
        self.set(key.trim(), value)
    }

    fn get(&self, key: &str) -> &Value {
        &self.0[key]
    }

    fn str(&self, key: &str) -> String {
        self.get(key).as_str().unwrap_or_default().to_string()
    }

    fn f64(&self, key: &str) -> f64 {
        self.get(key).as_float().unwrap_or_default()
    }

    fn bool(&self, key: &str) -> bool {
        self.get(key).as_bool().unwrap_or_default()
    }

    fn usize(&self, key: &str) -> CliResult<usize> {
        let v = self.get(key).as_integer().unwrap_or_default();
        usize::try_from(v).map_err(|_| CliError::domain(format!("config key {key} must be non-negative, got {v}")))
    }

    fn strings(&self, key: &str) -> CliResult<Vec<String>> {
        self.get(key)
            .as_array()
            .into_iter()
            .flatten()
            .map(|v| {
                v.as_str().map(str::to_string).ok_or_else(|| CliError::domain(format!("config key {key} must list strings")))
            })
            .collect()
    }

    /// Canonical `key = value` listing.
    pub fn render(&self) -> String {
        self.0.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitSelector {
    All,
    Train,
    Validation,
    Test,
}

impl SplitSelector {
    pub fn parse(s: &str) -> CliResult<Self> {
        match s.trim().to_lowercase().as_str() {
            "all" => Ok(SplitSelector::All),
            "train" => Ok(SplitSelector::Train),
            "validation" | "val" | "dev" => Ok(SplitSelector::Validation),
            "test" => Ok(SplitSelector::Test),
            other => Err(CliError::domain(format!("unknown split {other:?}"))),
        }
    }
}

#[derive(Debug, Clone)]
pub struct ModerationConfig {
    pub endpoint: String,
    pub api_key_env: Option<String>,
    pub qps: f64,
    pub concurrency: usize,
    pub max_retries: u32,
    pub timeout_secs: u64,
    pub mock_scores: Option<PathBuf>,
    pub analysis: AnalysisSettings,
}

/// Resolved, validated configuration.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub seed: u64,
    pub out: PathBuf,
    pub dataset: PathBuf,
    pub strict: bool,
    pub min_readers: usize,
    pub split: SplitRatios,
    pub training: TrainingConfig,
    pub decoding: DecodingParams,
    pub backend: String,
    pub checkpoint: PathBuf,
    pub provider: Option<String>,
    pub eval_split: SplitSelector,
    pub plugins: Vec<String>,
    pub symmetric_di: bool,
    pub threads: usize,
    pub moderation: ModerationConfig,
}

fn non_empty(s: String) -> Option<String> {
    let t = s.trim();
    (!t.is_empty()).then(|| t.to_string())
}

impl RunConfig {
    /// Builds and checks the configuration. Backend and provider names must
    /// resolve here, before any command does work.
    pub fn resolve(map: &ConfigMap) -> CliResult<Self> {
        let seed = map.get("seed").as_integer().unwrap_or_default();
        let seed = u64::try_from(seed).map_err(|_| CliError::domain(format!("seed must be non-negative, got {seed}")))?;
        let out = PathBuf::from(map.str("out"));

        let method = match map.str("decoding.method").to_lowercase().replace('-', "_").as_str() {
            "diverse_beam" | "diverse_beam_search" => DecodingMethod::DiverseBeam,
            "greedy" => DecodingMethod::Greedy,
            other => return Err(CliError::domain(format!("unknown decoding method {other:?}"))),
        };
        let decoding = DecodingParams {
            method,
            max_length: map.usize("decoding.max_length")?,
            beam_size: map.usize("decoding.beam_size")?,
            beam_groups: map.usize("decoding.beam_groups")?,
            diversity_penalty: map.f64("decoding.diversity_penalty"),
            repetition_penalty: map.f64("decoding.repetition_penalty"),
            early_stopping: map.bool("decoding.early_stopping"),
        };
        decoding.check()?;

        let strategy: Strategy = map.str("train.strategy").parse()?;
        let training = TrainingConfig {
            strategy,
            alpha: map.f64("train.alpha"),
            margin: map.f64("train.margin"),
            patience: map.usize("train.patience")?,
            max_epochs: map.usize("train.max_epochs")?,
            inner_decoding: decoding.clone(),
            optimizer: OptimizerConfig {
                learning_rate: map.f64("optimizer.learning_rate"),
                weight_decay: map.f64("optimizer.weight_decay"),
                epsilon: map.f64("optimizer.epsilon"),
                beta1: map.f64("optimizer.beta1"),
                beta2: map.f64("optimizer.beta2"),
                batch_size: map.usize("optimizer.batch_size")?,
                max_grad_norm: map.f64("optimizer.max_grad_norm"),
            },
            seed,
            shuffle_rand_order: map.bool("train.shuffle_rand_order"),
        };
        training.check()?;

        let backend = map.str("backend.name");
        if !BACKENDS.contains(&backend.as_str()) {
            return Err(CliError::domain(format!("unknown backend {backend:?} (known: {})", BACKENDS.join(", "))));
        }
        let checkpoint = non_empty(map.str("backend.checkpoint")).map_or_else(|| out.join("checkpoint"), PathBuf::from);

        let provider = non_empty(map.str("similarity.provider")).filter(|p| p != "none");
        if let Some(p) = &provider {
            provider_by_name(p)?;
        }
        if strategy.needs_similarity() && provider.is_none() {
            return Err(CliError::domain(format!("strategy {strategy} needs a similarity provider")));
        }

        let analysis = AnalysisSettings {
            margin: map.f64("moderation.margin"),
            low: map.f64("moderation.low"),
            high: map.f64("moderation.high"),
        };
        analysis.check()?;
        let max_retries = map.usize("moderation.max_retries")?;

        Ok(RunConfig {
            seed,
            dataset: PathBuf::from(map.str("dataset.path")),
            strict: map.bool("dataset.strict"),
            min_readers: map.usize("dataset.min_readers")?,
            split: SplitRatios {
                train: map.f64("split.train"),
                validation: map.f64("split.validation"),
                test: map.f64("split.test"),
            },
            training,
            decoding,
            backend,
            checkpoint,
            provider,
            eval_split: SplitSelector::parse(&map.str("evaluation.split"))?,
            plugins: map.strings("evaluation.plugins")?,
            symmetric_di: map.bool("evaluation.symmetric_di"),
            threads: map.usize("evaluation.threads")?.max(1),
            moderation: ModerationConfig {
                endpoint: map.str("moderation.endpoint"),
                api_key_env: non_empty(map.str("moderation.api_key_env")),
                qps: map.f64("moderation.qps"),
                concurrency: map.usize("moderation.concurrency")?.max(1),
                max_retries: u32::try_from(max_retries).unwrap_or(u32::MAX),
                timeout_secs: map.usize("moderation.timeout_secs")? as u64,
                mock_scores: non_empty(map.str("moderation.mock_scores")).map(PathBuf::from),
                analysis,
            },
            out,
        })
    }

    pub fn embedding_provider(&self) -> CliResult<Option<Box<dyn EmbeddingProvider>>> {
        self.provider.as_deref().map(provider_by_name).transpose().map_err(Into::into)
    }

    pub fn require_dataset(&self) -> CliResult<&Path> {
        if self.dataset.as_os_str().is_empty() {
            return Err(CliError::domain("no dataset configured (set dataset.path)"));
        }
        Ok(&self.dataset)
    }
}
