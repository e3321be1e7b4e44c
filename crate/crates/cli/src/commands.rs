//! Subcommand implementations. Each writes its outputs under the configured
//! output directory and returns a one-line summary.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::time::Duration;

use interp_core::data::{read_dataset, stratified_split, validate_record, ParseOptions};
use interp_core::evaluation::{
    diversity_grounding_report, evaluate_corpus, reader_pairs, DiversityReport, MetricRegistry, ReaderPair,
    SentenceInput,
};
use interp_core::generation::{
    generate_interpretations, load_backend, new_backend, prepare_training_example, train, DecodingMethod,
    GeneratorBackend, TrainingExample,
};
use interp_core::moderation::{
    clusters_from_dataset, clusters_from_generated, moderation_report, overlap_report, overlap_tsv, ClientConfig,
    ClusterInput, FileMockTransport, HttpTransport, ModerationReport, ScorerClient, Transport,
};
use interp_core::{AnnotatedSentence, Strategy};
use serde::{Deserialize, Serialize};

use crate::config::{RunConfig, SplitSelector};
use crate::error::{CliError, CliResult, ExitKind};

fn write_file(path: &Path, contents: &str) -> CliResult<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent)?;
    }
    fs::write(path, contents).map_err(|e| CliError::new(ExitKind::Io, e).context(format!("writing {}", path.display())))
}

fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> CliResult<()> {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(item)?);
        out.push('\n');
    }
    write_file(path, &out)
}

fn open(path: &Path) -> CliResult<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| CliError::new(ExitKind::Io, e).context(format!("opening {}", path.display())))
}

fn read_jsonl<T: for<'de> Deserialize<'de>>(path: &Path) -> CliResult<Vec<T>> {
    let mut out = Vec::new();
    for (k, line) in open(path)?.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let item = serde_json::from_str(&line)
            .map_err(|e| CliError::domain(format!("{} line {}: {e}", path.display(), k + 1)))?;
        out.push(item);
    }
    Ok(out)
}

/// Parsed and validated dataset; any error aborts.
pub fn load_dataset(cfg: &RunConfig) -> CliResult<Vec<AnnotatedSentence>> {
    let path = cfg.require_dataset()?;
    let parsed = read_dataset(open(path)?, ParseOptions { strict: cfg.strict })?;
    if let Some(first) = parsed.errors.first() {
        return Err(CliError::domain(format!(
            "dataset has {} parse error(s), first: {first}; run `validate` for the full list",
            parsed.errors.len()
        )));
    }
    let records = parsed.into_records();
    for rec in &records {
        let report = validate_record(rec, cfg.min_readers);
        if let Some(e) = report.errors.first() {
            return Err(CliError::domain(format!("record {:?} is invalid: {e}; run `validate` for the full list", rec.id)));
        }
    }
    Ok(records)
}

fn select(cfg: &RunConfig, records: Vec<AnnotatedSentence>, which: SplitSelector) -> CliResult<Vec<AnnotatedSentence>> {
    if which == SplitSelector::All {
        return Ok(records);
    }
    let outcome = stratified_split(&records, cfg.split, cfg.seed)?;
    for w in &outcome.warnings {
        log::warn!("{w}");
    }
    let s = outcome.split;
    Ok(match which {
        SplitSelector::Train => s.train,
        SplitSelector::Validation => s.validation,
        _ => s.test,
    })
}

pub fn cmd_validate(cfg: &RunConfig) -> CliResult<String> {
    let path = cfg.require_dataset()?;
    let parsed = read_dataset(open(path)?, ParseOptions { strict: cfg.strict })?;
    let mut w = csv::WriterBuilder::new().delimiter(b'\t').from_writer(Vec::new());
    w.write_record(["line", "id", "severity", "message"])?;
    let mut errors = parsed.errors.len();
    let mut warnings = 0;
    let mut rows: Vec<(usize, String, &str, String)> = parsed
        .errors
        .iter()
        .map(|e| (e.line().unwrap_or(0), "-".to_string(), "error", e.to_string()))
        .collect();
    for (line, rec) in &parsed.records {
        let report = validate_record(rec, cfg.min_readers);
        errors += report.errors.len();
        warnings += report.warnings.len();
        rows.extend(report.errors.into_iter().map(|m| (*line, rec.id.clone(), "error", m)));
        rows.extend(report.warnings.into_iter().map(|m| (*line, rec.id.clone(), "warning", m)));
    }
    rows.sort_by_key(|r| r.0);
    for (line, id, sev, msg) in rows {
        w.write_record([line.to_string(), id, sev.to_string(), msg])?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::new(ExitKind::Io, e.into_error()))?;
    let report_path = cfg.out.join("validation.tsv");
    write_file(&report_path, &String::from_utf8_lossy(&bytes))?;
    let summary = format!(
        "{} record(s), {errors} error(s), {warnings} warning(s); report at {}",
        parsed.records.len(),
        report_path.display()
    );
    if errors > 0 {
        return Err(CliError::domain(summary));
    }
    Ok(summary)
}

pub fn cmd_split(cfg: &RunConfig) -> CliResult<String> {
    let records = load_dataset(cfg)?;
    let outcome = stratified_split(&records, cfg.split, cfg.seed)?;
    for w in &outcome.warnings {
        log::warn!("{w}");
    }
    let dir = cfg.out.join("split");
    let mut summary = String::from("split\tsentences\ttitles\n");
    for (name, part) in outcome.split.parts() {
        write_jsonl(&dir.join(format!("{name}.jsonl")), part)?;
        let titles: std::collections::BTreeSet<&str> = part.iter().map(|r| r.title.as_str()).collect();
        summary.push_str(&format!("{name}\t{}\t{}\n", part.len(), titles.len()));
    }
    for w in &outcome.warnings {
        summary.push_str(&format!("# warning\t{w}\n"));
    }
    write_file(&dir.join("summary.tsv"), &summary)?;
    let s = &outcome.split;
    Ok(format!("train {} / validation {} / test {} sentences", s.train.len(), s.validation.len(), s.test.len()))
}

#[derive(Debug, Serialize, Deserialize)]
struct PromptLine {
    id: String,
    prompt: String,
    target: String,
    mode: interp_core::GenerationMode,
    reader_count: usize,
    reader_order: Vec<usize>,
}

fn examples(cfg: &RunConfig, rec: &AnnotatedSentence) -> CliResult<Vec<TrainingExample>> {
    let provider = cfg.embedding_provider()?;
    let seed = cfg.training.shuffle_rand_order.then_some(cfg.seed);
    Ok(prepare_training_example(rec, cfg.training.strategy, provider.as_deref(), seed)?)
}

pub fn cmd_prompts(cfg: &RunConfig, which: SplitSelector) -> CliResult<String> {
    let records = select(cfg, load_dataset(cfg)?, which)?;
    let mut lines = Vec::new();
    for rec in &records {
        for ex in examples(cfg, rec)? {
            lines.push(PromptLine {
                id: ex.sentence_id,
                prompt: ex.prompt.text,
                target: ex.target.text,
                mode: ex.prompt.mode,
                reader_count: ex.prompt.reader_count,
                reader_order: ex.reader_order,
            });
        }
    }
    let path = cfg.out.join("prompts.jsonl");
    write_jsonl(&path, &lines)?;
    Ok(format!("{} prompt(s) for {} sentence(s) under {}; written to {}", lines.len(), records.len(), cfg.training.strategy, path.display()))
}

#[derive(Debug, Serialize)]
struct TrainSummary {
    backend: String,
    strategy: Strategy,
    alpha: f64,
    epochs: usize,
    best_epoch: Option<usize>,
    stopped_early: bool,
}

pub fn cmd_train(cfg: &RunConfig) -> CliResult<String> {
    let mut backend = new_backend(&cfg.backend)?;
    if !backend.capabilities().trainable {
        return Err(CliError::new(
            ExitKind::Capability,
            anyhow::anyhow!("backend {} is not trainable", backend.name()),
        ));
    }
    let records = load_dataset(cfg)?;
    let outcome = stratified_split(&records, cfg.split, cfg.seed)?;
    for w in &outcome.warnings {
        log::warn!("{w}");
    }
    let provider = cfg.embedding_provider()?;
    let log = train(&outcome.split, backend.as_mut(), &cfg.training, provider.as_deref())?;
    backend.save(&cfg.checkpoint)?;

    let mut w = csv::WriterBuilder::new().delimiter(b'\t').from_writer(Vec::new());
    w.write_record(["epoch", "split", "loss", "strategy", "alpha", "lm", "lsim"])?;
    let opt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.6}"));
    for e in &log.entries {
        w.write_record([
            e.epoch.to_string(),
            e.split.clone(),
            format!("{:.6}", e.loss),
            e.strategy.to_string(),
            e.alpha.to_string(),
            opt(e.lm),
            opt(e.lsim),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::new(ExitKind::Io, e.into_error()))?;
    write_file(&cfg.out.join("train_log.tsv"), &String::from_utf8_lossy(&bytes))?;
    let epochs = log.losses("train").len();
    let summary = TrainSummary {
        backend: cfg.backend.clone(),
        strategy: cfg.training.strategy,
        alpha: cfg.training.alpha,
        epochs,
        best_epoch: log.best_epoch,
        stopped_early: log.stopped_early,
    };
    write_file(&cfg.out.join("train_summary.json"), &(serde_json::to_string_pretty(&summary)? + "\n"))?;
    Ok(format!("trained {} for {epochs} epoch(s); checkpoint at {}", cfg.backend, cfg.checkpoint.display()))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GeneratedLine {
    pub id: String,
    pub interpretations: Vec<String>,
    #[serde(default)]
    pub expected: usize,
    #[serde(default)]
    pub dropped_empty: usize,
}

fn load_for_decoding(cfg: &RunConfig) -> CliResult<Box<dyn GeneratorBackend>> {
    let backend = load_backend(&cfg.backend, &cfg.checkpoint)?;
    if cfg.decoding.method == DecodingMethod::DiverseBeam && !backend.capabilities().diverse_beam {
        return Err(CliError::new(
            ExitKind::Capability,
            anyhow::anyhow!("backend {} does not support diverse beam search; set decoding.method = \"greedy\"", backend.name()),
        ));
    }
    Ok(backend)
}

fn decode(cfg: &RunConfig, backend: &dyn GeneratorBackend, records: &[AnnotatedSentence]) -> CliResult<Vec<GeneratedLine>> {
    let mut out = Vec::with_capacity(records.len());
    for rec in records {
        let mut line = GeneratedLine { id: rec.id.clone(), interpretations: vec![], expected: rec.readers.len(), dropped_empty: 0 };
        for ex in examples(cfg, rec)? {
            let g = generate_interpretations(backend, &ex.prompt, &cfg.decoding)?;
            line.dropped_empty += g.dropped_empty;
            line.interpretations.extend(g.interpretations);
        }
        if line.interpretations.len() != line.expected {
            log::info!("{}: {} interpretation(s) for {} reader(s)", rec.id, line.interpretations.len(), line.expected);
        }
        out.push(line);
    }
    Ok(out)
}

pub fn cmd_generate(cfg: &RunConfig, which: SplitSelector) -> CliResult<String> {
    let backend = load_for_decoding(cfg)?;
    let records = select(cfg, load_dataset(cfg)?, which)?;
    let lines = decode(cfg, backend.as_ref(), &records)?;
    let path = cfg.out.join("generated.jsonl");
    write_jsonl(&path, &lines)?;
    let mismatched = lines.iter().filter(|l| l.interpretations.len() != l.expected).count();
    Ok(format!("decoded {} sentence(s), {mismatched} with a reader-count mismatch; written to {}", lines.len(), path.display()))
}

fn diversity_tsv(rep: &DiversityReport) -> String {
    let c = &rep.correlation;
    format!(
        "n\tpearson_r\tp_value\tmean_dg\tmean_di\tdi_direction\n{}\t{:.4}\t{:.4e}\t{:.4}\t{:.4}\t{}\n",
        c.n,
        c.r,
        c.p_value,
        rep.mean_dg,
        rep.mean_di,
        if rep.symmetric_di { "symmetric" } else { "first_as_candidate" }
    )
}

pub fn cmd_evaluate(cfg: &RunConfig, generated: Option<&Path>) -> CliResult<String> {
    let backend = match generated {
        Some(_) => None,
        None => Some(load_for_decoding(cfg)?),
    };
    let records = select(cfg, load_dataset(cfg)?, cfg.eval_split)?;
    if records.is_empty() {
        return Err(CliError::domain("the evaluated split is empty"));
    }
    let lines = match (&backend, generated) {
        (Some(b), _) => {
            let lines = decode(cfg, b.as_ref(), &records)?;
            write_jsonl(&cfg.out.join("generated.jsonl"), &lines)?;
            lines
        }
        (None, Some(path)) => {
            let by_id: BTreeMap<String, GeneratedLine> =
                read_jsonl::<GeneratedLine>(path)?.into_iter().map(|l| (l.id.clone(), l)).collect();
            records
                .iter()
                .map(|r| {
                    by_id.get(&r.id).cloned().unwrap_or_else(|| GeneratedLine {
                        id: r.id.clone(),
                        interpretations: vec![],
                        expected: r.readers.len(),
                        dropped_empty: 0,
                    })
                })
                .collect()
        }
        (None, None) => unreachable!("backend is loaded when no generated file is given"),
    };

    let inputs: Vec<SentenceInput> = records
        .iter()
        .zip(&lines)
        .map(|(r, l)| SentenceInput { id: r.id.clone(), generated: l.interpretations.clone(), targets: r.interpretations() })
        .collect();
    let reference: Vec<String> = records.iter().flat_map(|r| r.interpretations()).collect();
    let registry = MetricRegistry::new();
    for p in &cfg.plugins {
        if !registry.contains(p) {
            log::warn!("metric plugin {p:?} is not registered; its column is reported as skipped");
        }
    }
    let report = evaluate_corpus(&inputs, &reference, &registry, &cfg.plugins, cfg.threads)?;
    write_file(&cfg.out.join("evaluation.tsv"), &report.to_tsv())?;
    write_file(&cfg.out.join("evaluation.json"), &(serde_json::to_string_pretty(&report)? + "\n"))?;

    let diversity = if cfg.training.strategy == Strategy::One2One {
        let mut pairs = Vec::new();
        let mut skipped = 0;
        for (rec, line) in records.iter().zip(&lines) {
            if line.interpretations.len() != rec.readers.len() {
                skipped += 1;
                continue;
            }
            for j in 0..rec.readers.len() {
                for k in j + 1..rec.readers.len() {
                    pairs.push(ReaderPair {
                        g_j: rec.readers[j].context.clone(),
                        g_k: rec.readers[k].context.clone(),
                        i_j: line.interpretations[j].clone(),
                        i_k: line.interpretations[k].clone(),
                    });
                }
            }
        }
        let note = if skipped > 0 { format!("# {skipped} sentence(s) skipped: reader-count mismatch\n") } else { String::new() };
        match diversity_grounding_report(&pairs, cfg.symmetric_di) {
            Ok(rep) => diversity_tsv(&rep) + &note,
            Err(e) => format!("# correlation not computed: {e}\n{note}"),
        }
    } else {
        "# correlation not computed: reader alignment is undefined for one-to-many generation\n".to_string()
    };
    write_file(&cfg.out.join("evaluation_diversity.tsv"), &diversity)?;

    let a = &report.aggregate;
    Ok(format!(
        "{} sentence(s): BLEU-1 {:.2}, match cost {:.2}, unmatched {}/{} (generated/target)",
        report.rows.len(),
        a.bleu[0],
        a.match_cost,
        a.unmatched_generated,
        a.unmatched_targets
    ))
}

pub fn cmd_diversity(cfg: &RunConfig, which: SplitSelector) -> CliResult<String> {
    let records = select(cfg, load_dataset(cfg)?, which)?;
    let pairs = reader_pairs(&records);
    let rep = diversity_grounding_report(&pairs, cfg.symmetric_di)?;
    write_file(&cfg.out.join("diversity.tsv"), &diversity_tsv(&rep))?;
    Ok(format!("r = {:.4} (p = {:.3e}) over {} reader pair(s)", rep.correlation.r, rep.correlation.p_value, rep.correlation.n))
}

#[derive(Debug, Default)]
pub struct ModerateInputs {
    pub clusters: Option<PathBuf>,
    pub generated: Option<PathBuf>,
    pub human: Option<PathBuf>,
    pub human_from_dataset: bool,
}

fn transport(cfg: &RunConfig) -> CliResult<Box<dyn Transport>> {
    let m = &cfg.moderation;
    if let Some(path) = &m.mock_scores {
        return Ok(Box::new(FileMockTransport::load(path)?));
    }
    if !m.endpoint.trim().is_empty() {
        let t = HttpTransport::new(&m.endpoint, m.api_key_env.as_deref(), Duration::from_secs(m.timeout_secs))?;
        return Ok(Box::new(t));
    }
    Err(CliError::domain("no scorer configured: set moderation.mock_scores or moderation.endpoint"))
}

fn write_moderation(dir: &Path, prefix: &str, rep: &ModerationReport) -> CliResult<()> {
    write_file(&dir.join(format!("{prefix}summary.tsv")), &rep.summary_tsv())?;
    write_file(&dir.join(format!("{prefix}flags.tsv")), &rep.flags_tsv())?;
    write_file(&dir.join(format!("{prefix}curves.tsv")), &rep.curves_tsv())
}

pub fn cmd_moderate(cfg: &RunConfig, inputs: &ModerateInputs) -> CliResult<String> {
    let needs_dataset = inputs.generated.is_some() || inputs.human_from_dataset;
    let records = if needs_dataset { load_dataset(cfg)? } else { vec![] };
    let primary: Vec<ClusterInput> = match (&inputs.clusters, &inputs.generated) {
        (Some(p), None) => read_jsonl(p)?,
        (None, Some(g)) => {
            let gen: BTreeMap<String, Vec<String>> =
                read_jsonl::<GeneratedLine>(g)?.into_iter().map(|l| (l.id, l.interpretations)).collect();
            clusters_from_generated(&records, &gen)
        }
        (None, None) => return Err(CliError::domain("give --clusters or --generated")),
        (Some(_), Some(_)) => return Err(CliError::domain("give only one of --clusters and --generated")),
    };
    if primary.is_empty() {
        return Err(CliError::domain("no clusters to score"));
    }
    let human: Option<Vec<ClusterInput>> = match (&inputs.human, inputs.human_from_dataset) {
        (Some(p), _) => Some(read_jsonl(p)?),
        (None, true) => Some(clusters_from_dataset(&records)),
        (None, false) => None,
    };

    let m = &cfg.moderation;
    let client = ScorerClient::new(
        transport(cfg)?,
        ClientConfig { qps: m.qps, max_retries: m.max_retries, concurrency: m.concurrency, ..ClientConfig::default() },
    );
    let dir = cfg.out.join("moderation");
    let mut failures = Vec::new();

    let (scored, failed) = client.score_clusters(&primary);
    let rep = moderation_report(&scored, failed.len(), &m.analysis)?;
    write_moderation(&dir, "", &rep)?;
    failures.extend(failed);

    let mut message = format!("{} cluster(s) analysed, {} failed", rep.clusters, rep.failed);
    if let Some(human) = human {
        let (hs, hf) = client.score_clusters(&human);
        let hrep = moderation_report(&hs, hf.len(), &m.analysis)?;
        write_moderation(&dir, "human_", &hrep)?;
        write_file(&dir.join("overlap.tsv"), &overlap_tsv(&overlap_report(&rep, &hrep)?))?;
        message.push_str(&format!("; {} human cluster(s), {} failed", hrep.clusters, hrep.failed));
        failures.extend(hf);
    }
    log::info!("scorer: {} request(s), {} retr(ies), {} cache hit(s)", client.requests(), client.retries(), client.cache_hits());

    if let Some((id, err)) = failures.into_iter().next() {
        let e = CliError::from(err);
        return Err(CliError { kind: e.kind, error: e.error.context(format!("{message}; cluster {id:?} failed (partial report written)")) });
    }
    Ok(message)
}

/// Appends one line to the sidecar log, the only output carrying a timestamp.
pub fn append_run_log(out: &Path, command: &str, code: i32, message: &str) -> std::io::Result<()> {
    fs::create_dir_all(out)?;
    let ts = std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let mut f = fs::OpenOptions::new().create(true).append(true).open(out.join("run.log"))?;
    writeln!(f, "{ts}\t{command}\texit={code}\t{}", message.replace('\n', " "))
}
