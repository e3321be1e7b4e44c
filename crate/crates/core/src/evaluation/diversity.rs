//! Interpretation distance, grounding distance and their correlation.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::lexical::{bleu1, tokenize};
use super::EvaluationError;
use crate::data::{AnnotatedSentence, MoralJudgment, ReaderContext};

/// `100 − BLEU-1(i_j, i_k)` with `i_j` as candidate. Not symmetric.
pub fn di(i_j: &str, i_k: &str) -> Result<f64, EvaluationError> {
    if tokenize(i_j).is_empty() || tokenize(i_k).is_empty() {
        return Err(EvaluationError::EmptyInput("interpretation"));
    }
    Ok(100.0 - bleu1(i_j, i_k))
}

/// Mean of `di` in both directions.
pub fn di_symmetric(i_j: &str, i_k: &str) -> Result<f64, EvaluationError> {
    Ok((di(i_j, i_k)? + di(i_k, i_j)?) / 2.0)
}

fn norm_desc(s: &str) -> String {
    s.trim().to_lowercase()
}

/// Number of differing fields among presence, trait, evaluation, sphere
/// and appropriateness. A missing field equals only another missing field.
pub fn non_overlap(m_j: &MoralJudgment, m_k: &MoralJudgment) -> Result<u8, EvaluationError> {
    if m_j.entity != m_k.entity {
        return Err(EvaluationError::EntityMismatch { left: m_j.entity.clone(), right: m_k.entity.clone() });
    }
    let diffs = [
        m_j.present != m_k.present,
        norm_desc(&m_j.trait_desc) != norm_desc(&m_k.trait_desc),
        m_j.evaluation != m_k.evaluation,
        m_j.soa != m_k.soa,
        m_j.appropriateness != m_k.appropriateness,
    ];
    Ok(diffs.iter().filter(|d| **d).count() as u8)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroundingDistance {
    /// `attitude + judgment`, in [0, 9].
    pub value: f64,
    /// In [0, 4].
    pub attitude: f64,
    /// Mean non-overlap over entities, in [0, 5].
    pub judgment: f64,
}

pub fn dg(g_j: &ReaderContext, g_k: &ReaderContext) -> Result<GroundingDistance, EvaluationError> {
    if g_j.judgments.len() != g_k.judgments.len() {
        return Err(EvaluationError::EntityMismatch {
            left: format!("{} entities", g_j.judgments.len()),
            right: format!("{} entities", g_k.judgments.len()),
        });
    }
    let attitude = (g_j.attitude.value() - g_k.attitude.value()).abs() as f64;
    let q = g_j.judgments.len();
    let judgment = if q == 0 {
        0.0
    } else {
        let mut total = 0u32;
        for (a, b) in g_j.judgments.iter().zip(&g_k.judgments) {
            total += u32::from(non_overlap(a, b)?);
        }
        f64::from(total) / q as f64
    };
    Ok(GroundingDistance { value: attitude + judgment, attitude, judgment })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub r: f64,
    /// Two-sided, from Student's t with n − 2 degrees of freedom.
    pub p_value: f64,
    pub n: usize,
}

fn constant(xs: &[f64]) -> bool {
    xs.iter().all(|x| *x == xs[0])
}

pub fn pearson(x: &[f64], y: &[f64]) -> Result<Correlation, EvaluationError> {
    if x.len() != y.len() {
        return Err(EvaluationError::LengthMismatch(x.len(), y.len()));
    }
    let n = x.len();
    if n < 3 {
        return Err(EvaluationError::TooFewPairs(n));
    }
    if constant(x) {
        return Err(EvaluationError::ZeroVariance("first variable"));
    }
    if constant(y) {
        return Err(EvaluationError::ZeroVariance("second variable"));
    }
    let mx = x.iter().sum::<f64>() / n as f64;
    let my = y.iter().sum::<f64>() / n as f64;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(EvaluationError::ZeroVariance(if sxx == 0.0 { "first variable" } else { "second variable" }));
    }
    let r = (sxy / (sxx.sqrt() * syy.sqrt())).clamp(-1.0, 1.0);
    Ok(Correlation { r, p_value: p_value(r, n), n })
}

fn p_value(r: f64, n: usize) -> f64 {
    let df = (n - 2) as f64;
    if r.abs() >= 1.0 {
        return 0.0;
    }
    let t = r * (df / (1.0 - r * r)).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df).expect("df > 0");
    (2.0 * (1.0 - dist.cdf(t.abs()))).clamp(0.0, 1.0)
}

/// Two readers of the same sentence.
#[derive(Debug, Clone, PartialEq)]
pub struct ReaderPair {
    pub g_j: ReaderContext,
    pub g_k: ReaderContext,
    pub i_j: String,
    pub i_k: String,
}

/// All unordered reader pairs `j < k` of each sentence.
pub fn reader_pairs(records: &[AnnotatedSentence]) -> Vec<ReaderPair> {
    let mut out = Vec::new();
    for rec in records {
        for j in 0..rec.readers.len() {
            for k in j + 1..rec.readers.len() {
                out.push(ReaderPair {
                    g_j: rec.readers[j].context.clone(),
                    g_k: rec.readers[k].context.clone(),
                    i_j: rec.readers[j].interpretation.clone(),
                    i_k: rec.readers[k].interpretation.clone(),
                });
            }
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiversityReport {
    pub correlation: Correlation,
    pub mean_dg: f64,
    pub mean_di: f64,
    pub symmetric_di: bool,
}

/// Correlation of precomputed (dg, di) values.
pub fn diversity_report_from_values(dgs: &[f64], dis: &[f64], symmetric_di: bool) -> Result<DiversityReport, EvaluationError> {
    let correlation = pearson(dgs, dis)?;
    let n = dgs.len() as f64;
    Ok(DiversityReport {
        correlation,
        mean_dg: dgs.iter().sum::<f64>() / n,
        mean_di: dis.iter().sum::<f64>() / n,
        symmetric_di,
    })
}

pub fn diversity_grounding_report(pairs: &[ReaderPair], symmetric_di: bool) -> Result<DiversityReport, EvaluationError> {
    let mut dgs = Vec::with_capacity(pairs.len());
    let mut dis = Vec::with_capacity(pairs.len());
    for p in pairs {
        dgs.push(dg(&p.g_j, &p.g_k)?.value);
        dis.push(if symmetric_di { di_symmetric(&p.i_j, &p.i_k)? } else { di(&p.i_j, &p.i_k)? });
    }
    diversity_report_from_values(&dgs, &dis, symmetric_di)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{Appropriateness, Attitude, Evaluation, SphereOfAction};
    use proptest::prelude::*;

    fn ctx(a: i64, js: Vec<MoralJudgment>) -> ReaderContext {
        ReaderContext::new(Attitude::new(a).unwrap(), js)
    }

    fn full(e: &str) -> MoralJudgment {
        MoralJudgment::present(
            e,
            "greedy",
            Some(Evaluation::Bad),
            Some(SphereOfAction::SmallMoney),
            Some(Appropriateness::ViceOfExcess),
        )
    }

    fn other(e: &str) -> MoralJudgment {
        MoralJudgment::present(
            e,
            "generous",
            Some(Evaluation::Good),
            Some(SphereOfAction::Anger),
            Some(Appropriateness::VirtueOfMean),
        )
    }

    #[test]
    fn di_examples() {
        assert_eq!(di("the cat", "the cat").unwrap(), 0.0);
        assert_eq!(di("a b", "c d").unwrap(), 100.0);
        assert!((di("a b c", "a x c").unwrap() - 100.0 / 3.0).abs() < 1e-9);
        assert!(di("", "a").is_err());
        // "a" vs "a b": BLEU-1("a" | "a b") carries a brevity penalty
        assert!(di("a", "a b").unwrap() > di("a b", "a").unwrap());
    }

    #[test]
    fn non_overlap_cases() {
        assert_eq!(non_overlap(&full("x"), &full("x")).unwrap(), 0);
        assert_eq!(non_overlap(&full("x"), &other("x")).unwrap(), 4);
        assert_eq!(non_overlap(&full("x"), &MoralJudgment::absent("x")).unwrap(), 5);
        // soa missing on the present side, so only four fields differ
        let mut p = full("x");
        p.soa = None;
        assert_eq!(non_overlap(&p, &MoralJudgment::absent("x")).unwrap(), 4);
        let mut cased = full("x");
        cased.trait_desc = "  Greedy ".into();
        assert_eq!(non_overlap(&full("x"), &cased).unwrap(), 0);
        assert!(non_overlap(&full("x"), &full("y")).is_err());
    }

    #[test]
    fn dg_examples() {
        let g = ctx(3, vec![full("x")]);
        assert_eq!(dg(&g, &g).unwrap().value, 0.0);
        let d = dg(&ctx(1, vec![full("x")]), &ctx(5, vec![MoralJudgment::absent("x")])).unwrap();
        assert_eq!((d.value, d.attitude, d.judgment), (9.0, 4.0, 5.0));
        let d = dg(&ctx(2, vec![full("x"), full("y")]), &ctx(4, vec![MoralJudgment::absent("x"), full("y")])).unwrap();
        assert_eq!(d.value, 4.5);
        assert_eq!(dg(&ctx(1, vec![]), &ctx(2, vec![])).unwrap().value, 1.0);
        assert!(dg(&ctx(1, vec![full("x")]), &ctx(1, vec![])).is_err());
    }

    #[test]
    fn pearson_basics() {
        let x: Vec<f64> = (0..10).map(f64::from).collect();
        let y: Vec<f64> = x.iter().map(|v| 2.0 * v).collect();
        let c = pearson(&x, &y).unwrap();
        assert!((c.r - 1.0).abs() < 1e-12);
        assert_eq!(c.p_value, 0.0);
        assert!(matches!(pearson(&[1.0; 5], &x[..5]), Err(EvaluationError::ZeroVariance(_))));
        assert!(pearson(&x[..2], &y[..2]).is_err());
    }

    #[test]
    fn pearson_p_value_reference() {
        // r = 0.5, n = 12: t = 0.5·√(10/0.75) = 1.8257; two-sided p ≈ 0.0979
        let p = p_value(0.5, 12);
        assert!((p - 0.0979).abs() < 5e-4, "{p}");
    }

    #[test]
    fn report_over_sentence_pairs() {
        use crate::data::ReaderRecord;
        let rec = AnnotatedSentence {
            id: "1".into(),
            title: "t".into(),
            sentence: "s".into(),
            entities: vec![],
            readers: (1..=4)
                .map(|a| ReaderRecord {
                    context: ctx(a, vec![]),
                    interpretation: (0..a).map(|t| format!("t{t}")).collect::<Vec<_>>().join(" "),
                })
                .collect(),
        };
        let pairs = reader_pairs(&[rec]);
        assert_eq!(pairs.len(), 6);
        let rep = diversity_grounding_report(&pairs, false).unwrap();
        assert_eq!(rep.correlation.n, 6);
        // longer attitude gaps pair shorter with longer prefixes
        assert!(rep.correlation.r > 0.5, "{:?}", rep);
    }

    fn judgment() -> impl Strategy<Value = MoralJudgment> {
        (
            any::<bool>(),
            prop::sample::select(vec!["", "kind", "Kind ", "cruel"]),
            prop::option::of(prop::sample::select(vec![Evaluation::Good, Evaluation::Bad])),
            prop::option::of(prop::sample::select(SphereOfAction::ALL.to_vec())),
            prop::option::of(prop::sample::select(vec![
                Appropriateness::ViceOfDeficiency,
                Appropriateness::VirtueOfMean,
                Appropriateness::ViceOfExcess,
            ])),
        )
            .prop_map(|(present, d, evaluation, soa, appropriateness)| MoralJudgment {
                entity: "e".into(),
                present,
                trait_desc: d.into(),
                evaluation,
                soa,
                appropriateness,
            })
    }

    fn context(q: usize) -> impl Strategy<Value = ReaderContext> {
        (1i64..=5, prop::collection::vec(judgment(), q)).prop_map(|(a, js)| ctx(a, js))
    }

    proptest! {
        #[test]
        fn dg_bounds_and_symmetry((a, b) in (0usize..4).prop_flat_map(|q| (context(q), context(q)))) {
            let d = dg(&a, &b).unwrap();
            prop_assert!((0.0..=9.0).contains(&d.value));
            prop_assert!((0.0..=4.0).contains(&d.attitude));
            prop_assert!((0.0..=5.0).contains(&d.judgment));
            prop_assert_eq!(d.value, d.attitude + d.judgment);
            prop_assert_eq!(d, dg(&b, &a).unwrap());
            prop_assert_eq!(dg(&a, &a).unwrap().value, 0.0);
        }

        #[test]
        fn di_bounds(a in "[a-d]{1,2}( [a-d]{1,2}){0,5}", b in "[a-d]{1,2}( [a-d]{1,2}){0,5}") {
            let v = di(&a, &b).unwrap();
            prop_assert!((0.0..=100.0).contains(&v));
            prop_assert!(di(&a, &a).unwrap().abs() < 1e-9);
        }

        #[test]
        fn pearson_affine_invariant(
            xy in prop::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 5..40),
            scale in 0.1f64..10.0,
            shift in -50.0f64..50.0,
        ) {
            let x: Vec<f64> = xy.iter().map(|p| p.0).collect();
            let y: Vec<f64> = xy.iter().map(|p| p.1).collect();
            let base = pearson(&x, &y).unwrap().r;
            let x2: Vec<f64> = x.iter().map(|v| scale * v + shift).collect();
            prop_assert!((pearson(&x2, &y).unwrap().r - base).abs() < 1e-9);
        }
    }
}
