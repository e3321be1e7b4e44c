//! Per-sentence evaluation of generated interpretations and the tabular report.

use std::fmt::Write as _;
use std::thread;

use serde::{Deserialize, Serialize};

use super::lexical::{bleu, corpus_bleu, rouge, RougeScore, UnigramModel};
use super::matching::{match_interpretations, MatchResult};
use super::plugin::{MetricOutcome, MetricRegistry};
use super::EvaluationError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentenceInput {
    pub id: String,
    pub generated: Vec<String>,
    pub targets: Vec<String>,
}

/// Scores of one sentence. Lexical scores are means over the padded
/// assignment, so every unmatched interpretation contributes 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SentenceEvaluation {
    pub id: String,
    pub bleu: [f64; 4],
    pub rouge: RougeScore,
    /// `None` when no generated interpretation has a token.
    pub perplexity: Option<f64>,
    /// One outcome per requested plugin, averaged over matched pairs.
    pub plugins: Vec<(String, MetricOutcome)>,
    pub matching: MatchResult,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub bleu: [f64; 4],
    pub rouge: RougeScore,
    pub perplexity: Option<f64>,
    pub plugins: Vec<(String, MetricOutcome)>,
    pub match_cost: f64,
    pub matched: usize,
    pub unmatched_generated: usize,
    pub unmatched_targets: usize,
    /// Corpus BLEU over all matched pairs; `None` when nothing matched.
    pub corpus_bleu: Option<[f64; 4]>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub rows: Vec<SentenceEvaluation>,
    pub aggregate: AggregateRow,
}

fn mean(xs: impl IntoIterator<Item = f64>) -> Option<f64> {
    let (mut sum, mut n) = (0.0, 0usize);
    for x in xs {
        sum += x;
        n += 1;
    }
    (n > 0).then(|| sum / n as f64)
}

fn plugin_mean(name: &str, outcomes: Vec<MetricOutcome>) -> (String, MetricOutcome) {
    let mut values = Vec::new();
    for o in outcomes {
        match o {
            MetricOutcome::Value(v) => values.push(v),
            other => return (name.to_string(), other),
        }
    }
    let out = match mean(values) {
        Some(v) => MetricOutcome::Value(v),
        None => MetricOutcome::Unavailable("no matched pairs".into()),
    };
    (name.to_string(), out)
}

pub fn evaluate_sentence(
    input: &SentenceInput,
    unigram: &UnigramModel,
    registry: &MetricRegistry,
    plugin_names: &[String],
) -> Result<SentenceEvaluation, EvaluationError> {
    if input.targets.is_empty() {
        return Err(EvaluationError::EmptyInput("target interpretations"));
    }
    let matching = if input.generated.is_empty() {
        MatchResult {
            unmatched_targets: (0..input.targets.len()).collect(),
            cost: super::matching::DUMMY_COST * input.targets.len() as f64,
            ..MatchResult::default()
        }
    } else {
        match_interpretations(&input.generated, &input.targets)?
    };
    let slots = input.generated.len().max(input.targets.len()) as f64;
    let mut bleu_sum = [0.0; 4];
    let mut rouge_sum = RougeScore::default();
    for &(g, t) in &matching.pairs {
        let (cand, reference) = (&input.generated[g], &input.targets[t]);
        let b = bleu(cand, std::slice::from_ref(reference), 4)?;
        for n in 0..4 {
            bleu_sum[n] += b.scores[n];
        }
        let r = rouge(cand, reference);
        rouge_sum.rouge1 += r.rouge1;
        rouge_sum.rouge2 += r.rouge2;
        rouge_sum.rouge_l += r.rouge_l;
        rouge_sum.rouge_lsum += r.rouge_lsum;
    }
    let plugins = plugin_names
        .iter()
        .map(|name| {
            let outcomes = matching
                .pairs
                .iter()
                .map(|&(g, t)| registry.evaluate(name, &input.generated[g], &input.targets[t]))
                .collect();
            plugin_mean(name, outcomes)
        })
        .collect();
    Ok(SentenceEvaluation {
        id: input.id.clone(),
        bleu: bleu_sum.map(|s| s / slots),
        rouge: RougeScore {
            rouge1: rouge_sum.rouge1 / slots,
            rouge2: rouge_sum.rouge2 / slots,
            rouge_l: rouge_sum.rouge_l / slots,
            rouge_lsum: rouge_sum.rouge_lsum / slots,
        },
        perplexity: unigram.perplexity(&input.generated).ok(),
        plugins,
        matching,
    })
}

fn aggregate(rows: &[SentenceEvaluation], inputs: &[SentenceInput], plugin_names: &[String]) -> Result<AggregateRow, EvaluationError> {
    let m = |f: &dyn Fn(&SentenceEvaluation) -> f64| mean(rows.iter().map(f)).unwrap_or(0.0);
    let plugins = plugin_names
        .iter()
        .enumerate()
        .map(|(k, name)| {
            let outcomes: Vec<MetricOutcome> = rows.iter().map(|r| r.plugins[k].1.clone()).collect();
            if let Some(first_bad) = outcomes.iter().find(|o| !matches!(o, MetricOutcome::Value(_))) {
                (name.clone(), first_bad.clone())
            } else {
                plugin_mean(name, outcomes)
            }
        })
        .collect();
    let segments: Vec<(String, Vec<String>)> = rows
        .iter()
        .zip(inputs)
        .flat_map(|(row, input)| {
            row.matching.pairs.iter().map(|&(g, t)| (input.generated[g].clone(), vec![input.targets[t].clone()]))
        })
        .collect();
    let corpus = if segments.is_empty() { None } else { Some(corpus_bleu(&segments, 4)?.scores) };
    Ok(AggregateRow {
        bleu: [0, 1, 2, 3].map(|n| m(&|r| r.bleu[n])),
        rouge: RougeScore {
            rouge1: m(&|r| r.rouge.rouge1),
            rouge2: m(&|r| r.rouge.rouge2),
            rouge_l: m(&|r| r.rouge.rouge_l),
            rouge_lsum: m(&|r| r.rouge.rouge_lsum),
        },
        perplexity: mean(rows.iter().filter_map(|r| r.perplexity)),
        plugins,
        match_cost: m(&|r| r.matching.cost),
        matched: rows.iter().map(|r| r.matching.pairs.len()).sum(),
        unmatched_generated: rows.iter().map(|r| r.matching.unmatched_generated.len()).sum(),
        unmatched_targets: rows.iter().map(|r| r.matching.unmatched_targets.len()).sum(),
        corpus_bleu: corpus,
    })
}

/// Evaluates every sentence on up to `threads` workers; rows keep input order.
pub fn evaluate_corpus(
    inputs: &[SentenceInput],
    reference_corpus: &[String],
    registry: &MetricRegistry,
    plugin_names: &[String],
    threads: usize,
) -> Result<EvaluationReport, EvaluationError> {
    if inputs.is_empty() {
        return Err(EvaluationError::EmptyInput("sentences"));
    }
    let unigram = UnigramModel::fit(reference_corpus)?;
    let chunk = inputs.len().div_ceil(threads.max(1));
    let rows: Vec<SentenceEvaluation> = thread::scope(|s| {
        let handles: Vec<_> = inputs
            .chunks(chunk)
            .map(|part| {
                let unigram = &unigram;
                s.spawn(move || {
                    part.iter()
                        .map(|i| evaluate_sentence(i, unigram, registry, plugin_names))
                        .collect::<Result<Vec<_>, _>>()
                })
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("evaluation worker panicked"))
            .collect::<Result<Vec<Vec<_>>, _>>()
    })?
    .into_iter()
    .flatten()
    .collect();
    let aggregate = aggregate(&rows, inputs, plugin_names)?;
    Ok(EvaluationReport { rows, aggregate })
}

fn f4(v: f64) -> String {
    format!("{v:.4}")
}

fn opt(v: Option<f64>) -> String {
    v.map(f4).unwrap_or_else(|| "NA".into())
}

impl EvaluationReport {
    pub fn plugin_names(&self) -> Vec<&str> {
        self.aggregate.plugins.iter().map(|(n, _)| n.as_str()).collect()
    }

    /// Tab-separated report: one row per sentence, then `MEAN` (means of the
    /// sentence rows) and `CORPUS` (corpus BLEU; other columns `-`).
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        let mut header = vec!["id", "bleu1", "bleu2", "bleu3", "bleu4", "rouge1", "rouge2", "rougeL", "rougeLsum", "perplexity"];
        let plugins = self.plugin_names();
        header.extend(plugins.iter().copied());
        header.extend(["match_cost", "matched", "unmatched_generated", "unmatched_targets"]);
        let width = header.len();
        out.push_str(&header.join("\t"));
        out.push('\n');

        let line = |out: &mut String, id: &str, bleu: &[f64; 4], rouge: &RougeScore, pp: Option<f64>, plugins: &[(String, MetricOutcome)], tail: [String; 4]| {
            let mut cells = vec![id.to_string()];
            cells.extend(bleu.iter().map(|v| f4(*v)));
            cells.extend([rouge.rouge1, rouge.rouge2, rouge.rouge_l, rouge.rouge_lsum].map(f4));
            cells.push(opt(pp));
            cells.extend(plugins.iter().map(|(_, o)| o.to_string()));
            cells.extend(tail);
            let _ = writeln!(out, "{}", cells.join("\t"));
        };
        for r in &self.rows {
            let m = &r.matching;
            line(
                &mut out,
                &r.id,
                &r.bleu,
                &r.rouge,
                r.perplexity,
                &r.plugins,
                [f4(m.cost), m.pairs.len().to_string(), m.unmatched_generated.len().to_string(), m.unmatched_targets.len().to_string()],
            );
        }
        let a = &self.aggregate;
        line(
            &mut out,
            "MEAN",
            &a.bleu,
            &a.rouge,
            a.perplexity,
            &a.plugins,
            [f4(a.match_cost), a.matched.to_string(), a.unmatched_generated.to_string(), a.unmatched_targets.to_string()],
        );
        let mut corpus = vec!["CORPUS".to_string()];
        match a.corpus_bleu {
            Some(b) => corpus.extend(b.map(f4)),
            None => corpus.extend(["NA"; 4].map(String::from)),
        }
        corpus.resize(width, "-".into());
        out.push_str(&corpus.join("\t"));
        out.push('\n');
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn input(id: &str, g: &[&str], t: &[&str]) -> SentenceInput {
        SentenceInput {
            id: id.into(),
            generated: g.iter().map(|s| s.to_string()).collect(),
            targets: t.iter().map(|s| s.to_string()).collect(),
        }
    }

    #[test]
    fn identical_outputs_score_perfectly() {
        let inputs = vec![input("1", &["b a", "c d"], &["c d", "b a"]), input("2", &["x y z"], &["x y z"])];
        let corpus: Vec<String> = inputs.iter().flat_map(|i| i.targets.clone()).collect();
        let rep = evaluate_corpus(&inputs, &corpus, &MetricRegistry::new(), &["moverscore".into()], 2).unwrap();
        assert_eq!(rep.aggregate.bleu[0], 100.0);
        assert_eq!(rep.aggregate.match_cost, 0.0);
        assert_eq!(rep.aggregate.corpus_bleu.unwrap()[0], 100.0);
        assert_eq!(rep.rows[0].matching.pairs, vec![(0, 1), (1, 0)]);
        assert!(matches!(rep.aggregate.plugins[0].1, MetricOutcome::Skipped(_)));
        let tsv = rep.to_tsv();
        assert!(tsv.starts_with("id\tbleu1"));
        assert!(tsv.contains("\tskipped\t"));
        assert_eq!(tsv.lines().count(), 5);
        assert!(tsv.lines().all(|l| l.split('\t').count() == 15));
    }

    #[test]
    fn unmatched_count_as_zero() {
        // one perfect pair over two slots
        let inputs = vec![input("1", &["a b"], &["a b", "z z"])];
        let rep = evaluate_corpus(&inputs, &["a b".to_string()], &MetricRegistry::new(), &[], 1).unwrap();
        assert_eq!(rep.rows[0].bleu[0], 50.0);
        assert_eq!(rep.rows[0].matching.unmatched_targets, vec![1]);
        // mean BLEU-1 mirrors the matching cost
        assert_eq!(rep.rows[0].bleu[0], 100.0 - rep.rows[0].matching.cost / 2.0);
    }

    #[test]
    fn empty_generation_is_reported() {
        let inputs = vec![input("1", &[], &["a b"])];
        let rep = evaluate_corpus(&inputs, &["a b".to_string()], &MetricRegistry::new(), &[], 1).unwrap();
        assert_eq!(rep.rows[0].perplexity, None);
        assert_eq!(rep.aggregate.corpus_bleu, None);
        assert!(rep.to_tsv().contains("\tNA\t"));
    }
}
