//! Scorer client: cache, rate limit, retries and bounded concurrency in
//! front of a `Transport`.

use std::collections::HashMap;
use std::sync::atomic::{AtomicU64, AtomicUsize, Ordering};
use std::sync::{Arc, Mutex};
use std::thread;
use std::time::{Duration, Instant};

use sha2::{Digest, Sha256};

use super::{Attribute, AttributeScores, ClusterInput, InterpretationCluster, ModerationError, ScoredText};

#[derive(Debug, Clone, PartialEq)]
pub enum TransportError {
    /// Worth retrying (timeouts, 5xx).
    Transient(String),
    RateLimited { retry_after: Option<Duration> },
    /// Not worth retrying (bad request, auth).
    Permanent(String),
}

/// One scoring request on the wire.
pub trait Transport: Send + Sync {
    fn score(&self, text: &str, attributes: &[Attribute]) -> Result<AttributeScores, TransportError>;
}

impl<T: Transport + ?Sized> Transport for Box<T> {
    fn score(&self, text: &str, attributes: &[Attribute]) -> Result<AttributeScores, TransportError> {
        (**self).score(text, attributes)
    }
}

/// SHA-256 hex of the text with surrounding whitespace trimmed and inner
/// whitespace runs collapsed to one space. Case is preserved.
pub fn text_key(text: &str) -> String {
    let norm = text.split_whitespace().collect::<Vec<_>>().join(" ");
    let digest = Sha256::digest(norm.as_bytes());
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClientConfig {
    /// Requests per second ceiling; non-positive disables the limiter.
    pub qps: f64,
    pub max_retries: u32,
    pub base_backoff: Duration,
    pub max_backoff: Duration,
    /// In-flight request bound for batch scoring.
    pub concurrency: usize,
}

impl Default for ClientConfig {
    fn default() -> Self {
        ClientConfig {
            qps: 1.0,
            max_retries: 5,
            base_backoff: Duration::from_millis(500),
            max_backoff: Duration::from_secs(30),
            concurrency: 4,
        }
    }
}

type Sleeper = Arc<dyn Fn(Duration) + Send + Sync>;

pub struct ScorerClient<T: Transport> {
    transport: T,
    config: ClientConfig,
    cache: Mutex<HashMap<(String, Vec<Attribute>), AttributeScores>>,
    next_slot: Mutex<Option<Instant>>,
    sleeper: Sleeper,
    requests: AtomicU64,
    retries: AtomicU64,
    cache_hits: AtomicU64,
}

impl<T: Transport> ScorerClient<T> {
    pub fn new(transport: T, config: ClientConfig) -> Self {
        ScorerClient {
            transport,
            config,
            cache: Mutex::new(HashMap::new()),
            next_slot: Mutex::new(None),
            sleeper: Arc::new(thread::sleep),
            requests: AtomicU64::new(0),
            retries: AtomicU64::new(0),
            cache_hits: AtomicU64::new(0),
        }
    }

    /// Replaces `thread::sleep` for backoff and rate-limit waits.
    pub fn with_sleeper(mut self, sleeper: impl Fn(Duration) + Send + Sync + 'static) -> Self {
        self.sleeper = Arc::new(sleeper);
        self
    }

    pub fn requests(&self) -> u64 {
        self.requests.load(Ordering::Relaxed)
    }

    pub fn retries(&self) -> u64 {
        self.retries.load(Ordering::Relaxed)
    }

    pub fn cache_hits(&self) -> u64 {
        self.cache_hits.load(Ordering::Relaxed)
    }

    fn wait_for_slot(&self) {
        if self.config.qps <= 0.0 {
            return;
        }
        let interval = Duration::from_secs_f64(1.0 / self.config.qps);
        let wait = {
            let mut slot = self.next_slot.lock().expect("rate limiter lock");
            let now = Instant::now();
            let start = slot.map_or(now, |s| s.max(now));
            *slot = Some(start + interval);
            start - now
        };
        if !wait.is_zero() {
            (self.sleeper)(wait);
        }
    }

    fn backoff(&self, attempt: u32) -> Duration {
        let factor = 2u32.saturating_pow(attempt.min(16));
        self.config.base_backoff.saturating_mul(factor).min(self.config.max_backoff)
    }

    /// Scores one text on `attributes`, using the cache when possible.
    pub fn score_text(&self, id: &str, text: &str, attributes: &[Attribute]) -> Result<AttributeScores, ModerationError> {
        if text.trim().is_empty() {
            return Err(ModerationError::EmptyText { id: id.to_string() });
        }
        let mut attrs = attributes.to_vec();
        attrs.sort_unstable();
        attrs.dedup();
        let key = (text_key(text), attrs.clone());
        if let Some(hit) = self.cache.lock().expect("cache lock").get(&key) {
            self.cache_hits.fetch_add(1, Ordering::Relaxed);
            return Ok(hit.clone());
        }
        let mut attempt = 0u32;
        loop {
            self.wait_for_slot();
            self.requests.fetch_add(1, Ordering::Relaxed);
            let wait = match self.transport.score(text, &attrs) {
                Ok(scores) => {
                    scores.validate()?;
                    let mut kept = AttributeScores::default();
                    for a in &attrs {
                        let v = scores
                            .get(*a)
                            .ok_or_else(|| ModerationError::MissingAttribute { id: id.to_string(), attribute: *a })?;
                        kept.0.insert(*a, v);
                    }
                    self.cache.lock().expect("cache lock").insert(key, kept.clone());
                    return Ok(kept);
                }
                Err(TransportError::Permanent(message)) => {
                    return Err(ModerationError::Scoring { id: id.to_string(), message });
                }
                Err(TransportError::Transient(message)) => {
                    if attempt >= self.config.max_retries {
                        return Err(ModerationError::Scoring {
                            id: id.to_string(),
                            message: format!("{message} (after {attempt} retries)"),
                        });
                    }
                    log::info!("retrying {id:?} after transient failure: {message}");
                    self.backoff(attempt)
                }
                Err(TransportError::RateLimited { retry_after }) => {
                    if attempt >= self.config.max_retries {
                        return Err(ModerationError::RetryExhausted { id: id.to_string(), retry_after });
                    }
                    log::info!("retrying {id:?} after rate limit");
                    retry_after.map_or(self.backoff(attempt), |r| r.max(self.backoff(attempt)))
                }
            };
            attempt += 1;
            self.retries.fetch_add(1, Ordering::Relaxed);
            (self.sleeper)(wait);
        }
    }

    /// Scores `(id, text)` items with at most `concurrency` requests in
    /// flight. Results keep input order.
    pub fn score_many(&self, items: &[(String, String)], attributes: &[Attribute]) -> Vec<Result<AttributeScores, ModerationError>> {
        let slots: Vec<Mutex<Option<Result<AttributeScores, ModerationError>>>> =
            items.iter().map(|_| Mutex::new(None)).collect();
        let next = AtomicUsize::new(0);
        let workers = self.config.concurrency.clamp(1, items.len().max(1));
        thread::scope(|s| {
            for _ in 0..workers {
                s.spawn(|| loop {
                    let i = next.fetch_add(1, Ordering::Relaxed);
                    let Some((id, text)) = items.get(i) else { break };
                    let r = self.score_text(id, text, attributes);
                    *slots[i].lock().expect("result slot") = Some(r);
                });
            }
        });
        slots.into_iter().map(|m| m.into_inner().expect("result slot").expect("every item scored")).collect()
    }

    /// Scores every cluster. A cluster with any failed text is reported in
    /// the second list with its first error.
    pub fn score_clusters(&self, inputs: &[ClusterInput]) -> (Vec<InterpretationCluster>, Vec<(String, ModerationError)>) {
        let mut scored = Vec::new();
        let mut failed = Vec::new();
        for input in inputs {
            let attrs = input.requested();
            let mut items = vec![(input.id.clone(), input.sentence.clone())];
            items.extend(input.interpretations.iter().enumerate().map(|(k, t)| (format!("{}#{k}", input.id), t.clone())));
            let results = self.score_many(&items, &attrs);
            let mut texts = Vec::with_capacity(results.len());
            let mut error = None;
            for ((_, text), r) in items.into_iter().zip(results) {
                match r {
                    Ok(scores) => texts.push(ScoredText { text, scores }),
                    Err(e) => {
                        error.get_or_insert(e);
                    }
                }
            }
            if let Some(e) = error {
                log::warn!("cluster {:?} excluded: {e}", input.id);
                failed.push((input.id.clone(), e));
                continue;
            }
            let mut texts = texts.into_iter();
            let sentence = texts.next().expect("sentence scored");
            scored.push(InterpretationCluster {
                id: input.id.clone(),
                source: input.source,
                sentence,
                interpretations: texts.collect(),
            });
        }
        (scored, failed)
    }
}
