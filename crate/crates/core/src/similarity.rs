//! Embedding-based similarity, similarity ordering of interpretations and
//! the similarity-decrease hinge loss.

use thiserror::Error;

/// Default hinge margin between consecutive interpretations.
pub const DEFAULT_MARGIN: f64 = 0.05;

#[derive(Debug, Error)]
pub enum SimilarityError {
    #[error("empty text")]
    EmptyText,
    #[error("zero-norm embedding for {0:?}")]
    ZeroNorm(String),
    #[error("embedding dimension {got} does not match provider dimension {expected}")]
    Dimension { expected: usize, got: usize },
    #[error("negative margin {0}")]
    NegativeMargin(f64),
    #[error("unknown embedding provider {0:?}")]
    UnknownProvider(String),
    #[error("provider {provider} failed: {message}")]
    Provider { provider: String, message: String },
}

/// Sentence encoder producing fixed-dimension vectors.
pub trait EmbeddingProvider: Send + Sync {
    fn name(&self) -> &str;
    fn dimension(&self) -> usize;
    fn embed(&self, text: &str) -> Result<Vec<f64>, SimilarityError>;

    /// Whether `embed` may be called from several threads at once.
    fn concurrent_safe(&self) -> bool {
        true
    }
}

/// Hashed bag-of-words encoder: lowercased whitespace tokens counted into
/// `dimension` FNV-1a buckets, L2-normalised.
#[derive(Debug, Clone)]
pub struct BagOfWordsProvider {
    dimension: usize,
}

impl BagOfWordsProvider {
    pub const NAME: &'static str = "bow";
    pub const DEFAULT_DIMENSION: usize = 1 << 12;

    pub fn new(dimension: usize) -> Self {
        assert!(dimension > 0, "dimension must be positive");
        BagOfWordsProvider { dimension }
    }
}

impl Default for BagOfWordsProvider {
    fn default() -> Self {
        Self::new(Self::DEFAULT_DIMENSION)
    }
}

pub(crate) fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for b in bytes {
        hash ^= u64::from(*b);
        hash = hash.wrapping_mul(0x0100_0000_01b3);
    }
    hash
}

impl EmbeddingProvider for BagOfWordsProvider {
    fn name(&self) -> &str {
        Self::NAME
    }

    fn dimension(&self) -> usize {
        self.dimension
    }

    fn embed(&self, text: &str) -> Result<Vec<f64>, SimilarityError> {
        let mut v = vec![0.0; self.dimension];
        for token in text.split_whitespace() {
            let bucket = fnv1a(token.to_lowercase().as_bytes()) % self.dimension as u64;
            v[bucket as usize] += 1.0;
        }
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(SimilarityError::ZeroNorm(text.to_string()));
        }
        v.iter_mut().for_each(|x| *x /= norm);
        Ok(v)
    }
}

/// Looks up a built-in provider by its configuration name.
pub fn provider_by_name(name: &str) -> Result<Box<dyn EmbeddingProvider>, SimilarityError> {
    match name {
        BagOfWordsProvider::NAME => Ok(Box::new(BagOfWordsProvider::default())),
        other => Err(SimilarityError::UnknownProvider(other.to_string())),
    }
}

/// Cosine similarity, clamped to [-1, 1].
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct SimilarityValue(f64);

impl SimilarityValue {
    pub fn value(self) -> f64 {
        self.0
    }
}

pub fn cosine(a: &[f64], b: &[f64]) -> Option<f64> {
    let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
    let na = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nb = b.iter().map(|x| x * x).sum::<f64>().sqrt();
    if na == 0.0 || nb == 0.0 {
        return None;
    }
    Some((dot / (na * nb)).clamp(-1.0, 1.0))
}

fn embed_checked(provider: &dyn EmbeddingProvider, text: &str) -> Result<Vec<f64>, SimilarityError> {
    if text.trim().is_empty() {
        return Err(SimilarityError::EmptyText);
    }
    let v = provider.embed(text)?;
    if v.len() != provider.dimension() {
        return Err(SimilarityError::Dimension { expected: provider.dimension(), got: v.len() });
    }
    Ok(v)
}

pub fn similarity(a: &str, b: &str, provider: &dyn EmbeddingProvider) -> Result<SimilarityValue, SimilarityError> {
    let ea = embed_checked(provider, a)?;
    let eb = embed_checked(provider, b)?;
    cosine(&ea, &eb)
        .map(SimilarityValue)
        .ok_or_else(|| SimilarityError::ZeroNorm(if ea.iter().all(|x| *x == 0.0) { a } else { b }.to_string()))
}

/// Similarity of each text to `anchor`, embedding the anchor once.
pub fn similarities_to(
    anchor: &str,
    texts: &[String],
    provider: &dyn EmbeddingProvider,
) -> Result<Vec<f64>, SimilarityError> {
    let ea = embed_checked(provider, anchor)?;
    texts
        .iter()
        .map(|t| {
            let et = embed_checked(provider, t)?;
            cosine(&et, &ea).ok_or_else(|| SimilarityError::ZeroNorm(t.clone()))
        })
        .collect()
}

/// Indices sorted by descending score; ties keep their input order.
pub fn order_by_scores(scores: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..scores.len()).collect();
    idx.sort_by(|&i, &j| scores[j].total_cmp(&scores[i]));
    idx
}

/// Permutation placing the interpretation most similar to `sentence` first.
pub fn order_by_similarity(
    sentence: &str,
    interpretations: &[String],
    provider: &dyn EmbeddingProvider,
) -> Result<Vec<usize>, SimilarityError> {
    Ok(order_by_scores(&similarities_to(sentence, interpretations, provider)?))
}

/// `max(0, sim_curr - sim_prev + margin)`.
pub fn hinge_term(sim_curr: f64, sim_prev: f64, margin: f64) -> f64 {
    (sim_curr - sim_prev + margin).max(0.0)
}

/// Hinge loss over a sequence of similarities to the sentence, summed over
/// consecutive pairs and divided by the sequence length (not the number of
/// pairs).
pub fn similarity_decrease_loss_from_sims(sims: &[f64], margin: f64) -> Result<f64, SimilarityError> {
    if margin < 0.0 {
        return Err(SimilarityError::NegativeMargin(margin));
    }
    if sims.len() < 2 {
        return Ok(0.0);
    }
    let total: f64 = sims.windows(2).map(|w| hinge_term(w[1], w[0], margin)).sum();
    Ok(total / sims.len() as f64)
}

pub fn similarity_decrease_loss(
    sentence: &str,
    decoded: &[String],
    margin: f64,
    provider: &dyn EmbeddingProvider,
) -> Result<f64, SimilarityError> {
    if margin < 0.0 {
        return Err(SimilarityError::NegativeMargin(margin));
    }
    if decoded.len() < 2 {
        return Ok(0.0);
    }
    let sims = similarities_to(sentence, decoded, provider)?;
    similarity_decrease_loss_from_sims(&sims, margin)
}
