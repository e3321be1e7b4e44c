use std::collections::BTreeSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::{flag_cluster, overlap_recall, AnalysisSettings, Attribute, Flags, InterpretationCluster, ModerationError};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlagRow {
    pub sentence_id: String,
    pub attribute: Attribute,
    pub sentence_score: f64,
    pub max_interpretation_score: f64,
    #[serde(flatten)]
    pub flags: Flags,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttributeSummary {
    pub attribute: Attribute,
    /// Clusters scored on this attribute.
    pub clusters: usize,
    pub a1_any_pct: Option<f64>,
    pub a1_margin_pct: Option<f64>,
    pub a2_pct: Option<f64>,
    /// Clusters whose sentence scores below the analysis-2 lower bound.
    pub harmless: usize,
    /// Analysis-2 rate among harmless sentences only.
    pub a2_harmless_pct: Option<f64>,
}

/// One point of a sorted score curve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub attribute: Attribute,
    pub rank: usize,
    pub sentence_id: String,
    pub sentence_score: f64,
    /// Maximum over the sentence and its interpretations.
    pub cluster_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModerationReport {
    pub settings: AnalysisSettings,
    pub clusters: usize,
    /// Clusters that could not be scored or had no interpretations. They are
    /// excluded from every denominator.
    pub failed: usize,
    pub summaries: Vec<AttributeSummary>,
    pub rows: Vec<FlagRow>,
    pub curves: Vec<CurvePoint>,
}

fn pct(k: usize, n: usize) -> Option<f64> {
    (n > 0).then(|| k as f64 / n as f64 * 100.0)
}

pub fn moderation_report(
    clusters: &[InterpretationCluster],
    failed: usize,
    settings: &AnalysisSettings,
) -> Result<ModerationReport, ModerationError> {
    settings.check()?;
    let mut rows = Vec::new();
    let mut failed = failed;
    let mut used = 0;
    for c in clusters {
        if c.interpretations.is_empty() {
            log::warn!("cluster {:?} has no interpretations; excluded", c.id);
            failed += 1;
            continue;
        }
        let flags = flag_cluster(c, settings)?;
        used += 1;
        for (attribute, f) in flags {
            let (s, interps) = c.scores(attribute)?;
            rows.push(FlagRow {
                sentence_id: c.id.clone(),
                attribute,
                sentence_score: s,
                max_interpretation_score: interps.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                flags: f,
            });
        }
    }

    let mut summaries = Vec::new();
    let mut curves = Vec::new();
    for attribute in Attribute::ALL {
        let of: Vec<&FlagRow> = rows.iter().filter(|r| r.attribute == attribute).collect();
        let n = of.len();
        let harmless: Vec<&&FlagRow> = of.iter().filter(|r| r.sentence_score < settings.low).collect();
        summaries.push(AttributeSummary {
            attribute,
            clusters: n,
            a1_any_pct: pct(of.iter().filter(|r| r.flags.a1_any).count(), n),
            a1_margin_pct: pct(of.iter().filter(|r| r.flags.a1_margin).count(), n),
            a2_pct: pct(of.iter().filter(|r| r.flags.a2).count(), n),
            harmless: harmless.len(),
            a2_harmless_pct: pct(harmless.iter().filter(|r| r.flags.a2).count(), harmless.len()),
        });
        let mut sorted = of;
        sorted.sort_by(|a, b| a.sentence_score.total_cmp(&b.sentence_score).then_with(|| a.sentence_id.cmp(&b.sentence_id)));
        curves.extend(sorted.into_iter().enumerate().map(|(rank, r)| CurvePoint {
            attribute,
            rank,
            sentence_id: r.sentence_id.clone(),
            sentence_score: r.sentence_score,
            cluster_max: r.sentence_score.max(r.max_interpretation_score),
        }));
    }
    Ok(ModerationReport { settings: *settings, clusters: used, failed, summaries, rows, curves })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OverlapRow {
    pub attribute: Attribute,
    pub analysis: &'static str,
    pub model_flags: usize,
    pub human_flags: usize,
    pub overlap: usize,
    /// `None` when no human cluster is flagged.
    pub recall: Option<f64>,
}

const ANALYSES: [(&str, fn(&Flags) -> bool); 3] =
    [("a1_any", |f| f.a1_any), ("a1_margin", |f| f.a1_margin), ("a2", |f| f.a2)];

/// Recall of human-cluster flags by model-cluster flags, per attribute and
/// analysis. Both reports must use the same settings.
pub fn overlap_report(model: &ModerationReport, human: &ModerationReport) -> Result<Vec<OverlapRow>, ModerationError> {
    if model.settings != human.settings {
        return Err(ModerationError::Config("model and human reports use different analysis settings".into()));
    }
    let ids = |rep: &ModerationReport, a: Attribute, pick: fn(&Flags) -> bool| -> BTreeSet<String> {
        rep.rows.iter().filter(|r| r.attribute == a && pick(&r.flags)).map(|r| r.sentence_id.clone()).collect()
    };
    let mut out = Vec::new();
    for attribute in Attribute::ALL {
        for (analysis, pick) in ANALYSES {
            let m = ids(model, attribute, pick);
            let h = ids(human, attribute, pick);
            out.push(OverlapRow {
                attribute,
                analysis,
                model_flags: m.len(),
                human_flags: h.len(),
                overlap: m.intersection(&h).count(),
                recall: overlap_recall(&m, &h),
            });
        }
    }
    Ok(out)
}

fn opt_pct(v: Option<f64>) -> String {
    v.map(|p| format!("{p:.2}")).unwrap_or_else(|| "NA".into())
}

impl ModerationReport {
    pub fn summary_tsv(&self) -> String {
        let mut out = String::from("attribute\tclusters\ta1_any_pct\ta1_margin_pct\ta2_pct\tharmless\ta2_harmless_pct\n");
        for s in &self.summaries {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}",
                s.attribute,
                s.clusters,
                opt_pct(s.a1_any_pct),
                opt_pct(s.a1_margin_pct),
                opt_pct(s.a2_pct),
                s.harmless,
                opt_pct(s.a2_harmless_pct)
            );
        }
        let _ = writeln!(out, "# failed_clusters\t{}", self.failed);
        out
    }

    pub fn flags_tsv(&self) -> String {
        let mut out = String::from("sentence_id\tattribute\tsentence_score\tmax_interpretation_score\ta1_any\ta1_margin\ta2\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{}\t{}\t{:.4}\t{:.4}\t{}\t{}\t{}",
                r.sentence_id, r.attribute, r.sentence_score, r.max_interpretation_score, r.flags.a1_any, r.flags.a1_margin, r.flags.a2
            );
        }
        out
    }

    pub fn curves_tsv(&self) -> String {
        let mut out = String::from("attribute\trank\tsentence_id\tsentence_score\tcluster_max\n");
        for p in &self.curves {
            let _ = writeln!(out, "{}\t{}\t{}\t{:.4}\t{:.4}", p.attribute, p.rank, p.sentence_id, p.sentence_score, p.cluster_max);
        }
        out
    }
}

pub fn overlap_tsv(rows: &[OverlapRow]) -> String {
    let mut out = String::from("attribute\tanalysis\tmodel_flags\thuman_flags\toverlap\trecall_pct\n");
    for r in rows {
        let recall = r.recall.map(|v| format!("{v:.2}")).unwrap_or_else(|| "no human flags".into());
        let _ = writeln!(out, "{}\t{}\t{}\t{}\t{}\t{}", r.attribute, r.analysis, r.model_flags, r.human_flags, r.overlap, recall);
    }
    out
}
