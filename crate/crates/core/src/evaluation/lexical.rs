//! Tokenisation, BLEU, ROUGE and unigram perplexity.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::EvaluationError;

/// Lowercases, splits on whitespace and emits every character that is
/// neither alphanumeric nor whitespace as its own token.
pub fn tokenize(text: &str) -> Vec<String> {
    let mut out = Vec::new();
    let mut word = String::new();
    for c in text.chars() {
        if c.is_alphanumeric() {
            word.extend(c.to_lowercase());
            continue;
        }
        if !word.is_empty() {
            out.push(std::mem::take(&mut word));
        }
        if !c.is_whitespace() {
            out.push(c.to_lowercase().collect());
        }
    }
    if !word.is_empty() {
        out.push(word);
    }
    out
}

fn ngram_counts(tokens: &[String], n: usize) -> HashMap<&[String], usize> {
    let mut counts = HashMap::new();
    if n > 0 && tokens.len() >= n {
        for g in tokens.windows(n) {
            *counts.entry(g).or_insert(0) += 1;
        }
    }
    counts
}

/// Clipped match count and candidate n-gram total for one order.
fn clipped(cand: &[String], refs: &[Vec<String>], n: usize) -> (usize, usize) {
    let cand_counts = ngram_counts(cand, n);
    let mut max_ref: HashMap<&[String], usize> = HashMap::new();
    for r in refs {
        for (g, c) in ngram_counts(r, n) {
            let e = max_ref.entry(g).or_insert(0);
            *e = (*e).max(c);
        }
    }
    let matched = cand_counts.iter().map(|(g, c)| (*c).min(max_ref.get(g).copied().unwrap_or(0))).sum();
    (matched, cand.len().saturating_sub(n - 1))
}

/// Reference length closest to `c`; ties go to the shorter reference.
fn closest_ref_len(c: usize, refs: &[Vec<String>]) -> usize {
    refs.iter()
        .map(Vec::len)
        .min_by_key(|&r| (r.abs_diff(c), r))
        .unwrap_or(0)
}

fn brevity_penalty(c: usize, r: usize) -> f64 {
    if c == 0 {
        0.0
    } else if c < r {
        (1.0 - r as f64 / c as f64).exp()
    } else {
        1.0
    }
}

fn scores_from(precisions: [f64; 4], bp: f64, max_n: usize) -> [f64; 4] {
    let mut scores = [0.0; 4];
    for n in 1..=max_n {
        let ps = &precisions[..n];
        if ps.iter().all(|&p| p > 0.0) {
            let mean_log = ps.iter().map(|p| p.ln()).sum::<f64>() / n as f64;
            scores[n - 1] = (100.0 * bp * mean_log.exp()).min(100.0);
        }
    }
    scores
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BleuScore {
    /// Modified n-gram precisions p1..p4; orders above `max_n` are 0.
    pub precisions: [f64; 4],
    pub brevity_penalty: f64,
    /// BLEU-1..BLEU-4 on the 0..100 scale; orders above `max_n` are 0.
    pub scores: [f64; 4],
    pub max_n: usize,
    pub empty_candidate: bool,
}

impl BleuScore {
    pub fn bleu(&self, n: usize) -> f64 {
        self.scores[n - 1]
    }

    fn empty(max_n: usize) -> Self {
        BleuScore { precisions: [0.0; 4], brevity_penalty: 0.0, scores: [0.0; 4], max_n, empty_candidate: true }
    }
}

fn check_order(max_n: usize) -> Result<(), EvaluationError> {
    if (1..=4).contains(&max_n) {
        Ok(())
    } else {
        Err(EvaluationError::InvalidOrder(max_n))
    }
}

/// Sentence BLEU without smoothing.
pub fn bleu(candidate: &str, references: &[String], max_n: usize) -> Result<BleuScore, EvaluationError> {
    check_order(max_n)?;
    if references.is_empty() {
        return Err(EvaluationError::EmptyInput("references"));
    }
    let cand = tokenize(candidate);
    if cand.is_empty() {
        return Ok(BleuScore::empty(max_n));
    }
    let refs: Vec<Vec<String>> = references.iter().map(|r| tokenize(r)).collect();
    let mut precisions = [0.0; 4];
    for n in 1..=max_n {
        let (m, t) = clipped(&cand, &refs, n);
        precisions[n - 1] = if t == 0 { 0.0 } else { m as f64 / t as f64 };
    }
    let bp = brevity_penalty(cand.len(), closest_ref_len(cand.len(), &refs));
    Ok(BleuScore { precisions, brevity_penalty: bp, scores: scores_from(precisions, bp, max_n), max_n, empty_candidate: false })
}

/// Convenience for the single-reference BLEU-1 used by matching and `di`.
pub fn bleu1(candidate: &str, reference: &str) -> f64 {
    let cand = tokenize(candidate);
    if cand.is_empty() {
        return 0.0;
    }
    let refs = [tokenize(reference)];
    let (m, t) = clipped(&cand, &refs, 1);
    if m == 0 {
        return 0.0;
    }
    let bp = brevity_penalty(cand.len(), refs[0].len());
    (100.0 * bp * m as f64 / t as f64).min(100.0)
}

/// Corpus BLEU: n-gram matches, candidate totals and lengths pooled over
/// all segments before the precisions and brevity penalty are formed.
pub fn corpus_bleu(segments: &[(String, Vec<String>)], max_n: usize) -> Result<BleuScore, EvaluationError> {
    check_order(max_n)?;
    if segments.is_empty() {
        return Err(EvaluationError::EmptyInput("segments"));
    }
    let mut matched = [0usize; 4];
    let mut totals = [0usize; 4];
    let (mut c_len, mut r_len) = (0usize, 0usize);
    for (cand, refs) in segments {
        if refs.is_empty() {
            return Err(EvaluationError::EmptyInput("references"));
        }
        let cand = tokenize(cand);
        let refs: Vec<Vec<String>> = refs.iter().map(|r| tokenize(r)).collect();
        c_len += cand.len();
        r_len += closest_ref_len(cand.len(), &refs);
        for n in 1..=max_n {
            let (m, t) = clipped(&cand, &refs, n);
            matched[n - 1] += m;
            totals[n - 1] += t;
        }
    }
    if c_len == 0 {
        return Ok(BleuScore::empty(max_n));
    }
    let mut precisions = [0.0; 4];
    for n in 0..max_n {
        precisions[n] = if totals[n] == 0 { 0.0 } else { matched[n] as f64 / totals[n] as f64 };
    }
    let bp = brevity_penalty(c_len, r_len);
    Ok(BleuScore { precisions, brevity_penalty: bp, scores: scores_from(precisions, bp, max_n), max_n, empty_candidate: false })
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct RougeScore {
    pub rouge1: f64,
    pub rouge2: f64,
    pub rouge_l: f64,
    pub rouge_lsum: f64,
}

fn f1(hits: usize, cand_len: usize, ref_len: usize) -> f64 {
    if hits == 0 || cand_len == 0 || ref_len == 0 {
        return 0.0;
    }
    let p = hits as f64 / cand_len as f64;
    let r = hits as f64 / ref_len as f64;
    2.0 * p * r / (p + r)
}

fn ngram_f1(cand: &[String], reference: &[String], n: usize) -> f64 {
    let c = ngram_counts(cand, n);
    let r = ngram_counts(reference, n);
    let hits = c.iter().map(|(g, k)| (*k).min(r.get(g).copied().unwrap_or(0))).sum();
    f1(hits, cand.len().saturating_sub(n - 1), reference.len().saturating_sub(n - 1))
}

fn lcs_table(a: &[String], b: &[String]) -> Vec<Vec<usize>> {
    let mut t = vec![vec![0usize; b.len() + 1]; a.len() + 1];
    for i in 1..=a.len() {
        for j in 1..=b.len() {
            t[i][j] = if a[i - 1] == b[j - 1] { t[i - 1][j - 1] + 1 } else { t[i - 1][j].max(t[i][j - 1]) };
        }
    }
    t
}

/// Positions in `reference` covered by one longest common subsequence.
fn lcs_ref_positions(reference: &[String], cand: &[String]) -> Vec<usize> {
    let t = lcs_table(reference, cand);
    let (mut i, mut j) = (reference.len(), cand.len());
    let mut out = Vec::new();
    while i > 0 && j > 0 {
        if reference[i - 1] == cand[j - 1] {
            out.push(i - 1);
            i -= 1;
            j -= 1;
        } else if t[i - 1][j] >= t[i][j - 1] {
            i -= 1;
        } else {
            j -= 1;
        }
    }
    out.reverse();
    out
}

fn split_sentences(tokens: &[String]) -> Vec<Vec<String>> {
    let mut out = vec![];
    let mut cur = vec![];
    for t in tokens {
        cur.push(t.clone());
        if matches!(t.as_str(), "." | "!" | "?") {
            out.push(std::mem::take(&mut cur));
        }
    }
    if !cur.is_empty() {
        out.push(cur);
    }
    out
}

/// Summary-level LCS: union of per-sentence LCS hits, each token counted
/// at most as often as it occurs on both sides.
fn union_lcs_f1(cand: &[String], reference: &[String]) -> f64 {
    let cand_sents = split_sentences(cand);
    let ref_sents = split_sentences(reference);
    let mut cand_left: HashMap<&str, usize> = HashMap::new();
    for t in cand {
        *cand_left.entry(t).or_insert(0) += 1;
    }
    let mut ref_left: HashMap<&str, usize> = HashMap::new();
    for t in reference {
        *ref_left.entry(t).or_insert(0) += 1;
    }
    let mut hits = 0;
    for r in &ref_sents {
        let mut union: Vec<usize> = cand_sents.iter().flat_map(|c| lcs_ref_positions(r, c)).collect();
        union.sort_unstable();
        union.dedup();
        for pos in union {
            let tok = r[pos].as_str();
            let (Some(c), Some(rr)) = (cand_left.get_mut(tok), ref_left.get_mut(tok)) else { continue };
            if *c > 0 && *rr > 0 {
                *c -= 1;
                *rr -= 1;
                hits += 1;
            }
        }
    }
    f1(hits, cand.len(), reference.len())
}

/// ROUGE-1/2/L/Lsum F-measures over `tokenize` tokens.
pub fn rouge(candidate: &str, reference: &str) -> RougeScore {
    let c = tokenize(candidate);
    let r = tokenize(reference);
    let lcs = lcs_table(&c, &r)[c.len()][r.len()];
    RougeScore {
        rouge1: ngram_f1(&c, &r, 1),
        rouge2: ngram_f1(&c, &r, 2),
        rouge_l: f1(lcs, c.len(), r.len()),
        rouge_lsum: union_lcs_f1(&c, &r),
    }
}

/// Add-one smoothed unigram model. The vocabulary is the corpus types plus
/// one bucket shared by all unseen tokens.
#[derive(Debug, Clone)]
pub struct UnigramModel {
    counts: HashMap<String, usize>,
    total: usize,
}

impl UnigramModel {
    pub fn fit(corpus: &[String]) -> Result<Self, EvaluationError> {
        let mut counts = HashMap::new();
        let mut total = 0;
        for text in corpus {
            for t in tokenize(text) {
                *counts.entry(t).or_insert(0) += 1;
                total += 1;
            }
        }
        if total == 0 {
            return Err(EvaluationError::EmptyInput("reference corpus"));
        }
        Ok(UnigramModel { counts, total })
    }

    pub fn vocabulary_size(&self) -> usize {
        self.counts.len() + 1
    }

    pub fn log_prob(&self, token: &str) -> f64 {
        let c = self.counts.get(token).copied().unwrap_or(0);
        ((c + 1) as f64 / (self.total + self.vocabulary_size()) as f64).ln()
    }

    pub fn perplexity(&self, texts: &[String]) -> Result<f64, EvaluationError> {
        let mut n = 0usize;
        let mut sum = 0.0;
        for text in texts {
            for t in tokenize(text) {
                sum += self.log_prob(&t);
                n += 1;
            }
        }
        if n == 0 {
            return Err(EvaluationError::EmptyInput("texts"));
        }
        Ok((-sum / n as f64).exp())
    }
}

pub fn unigram_perplexity(texts: &[String], reference_corpus: &[String]) -> Result<f64, EvaluationError> {
    UnigramModel::fit(reference_corpus)?.perplexity(texts)
}
