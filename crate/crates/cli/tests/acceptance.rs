//! Acceptance suite: one PASS/FAIL line per criterion.
//!
//! Run with `cargo test -p interp-cli --test acceptance -- --nocapture`.
//! The test fails on any FAIL outside `UNATTAINABLE`; criteria listed there
//! are computed faithfully and reported, but do not fail the build.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::time::{Duration, Instant};

use interp_core::data::{stratified_split, SplitRatios};
use interp_core::evaluation::{di, dg, diversity_report_from_values, hungarian_match, DUMMY_COST};
use interp_core::generation::{loss_one2many, loss_one2one, prepare_training_example, Strategy, TabularBackend};
use interp_core::moderation::{flag_cluster, AnalysisSettings, ClusterSource, ScoredText};
use interp_core::prompt::{build_prompt, build_target, READER_TOKEN};
use interp_core::similarity::{similarity, similarity_decrease_loss_from_sims, BagOfWordsProvider, SimilarityError};
use interp_core::{
    AnnotatedSentence, Appropriateness, Attitude, Attribute, EmbeddingProvider, Evaluation, GenerationMode,
    InterpretationCluster, MoralJudgment, ReaderContext, ReaderRecord, SphereOfAction,
};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

/// Criteria whose fixture contradicts the formula it cites; see the decisions ledger.
const UNATTAINABLE: [&str; 1] = ["hinge-loss-fixture"];

type Outcome = Result<String, String>;

fn check(cond: bool, msg: impl Into<String>) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg.into())
    }
}

fn close(got: f64, want: f64, tol: f64, what: &str) -> Result<(), String> {
    check((got - want).abs() <= tol, format!("{what}: got {got:.12}, want {want:.12} (tol {tol:e})"))
}

fn ctx(attitude: i64, judgments: Vec<MoralJudgment>) -> ReaderContext {
    ReaderContext::new(Attitude::new(attitude).unwrap(), judgments)
}

fn template_fidelity() -> Outcome {
    let p = build_prompt("T", "S", &[ctx(3, vec![])]).map_err(|e| e.to_string())?;
    let want = "Title: T <sep> Attitude: neutral. <sep> Moral Judgments: None <sep> Sentence: S";
    check(p.text == want, format!("got {:?}", p.text))?;
    Ok("byte-exact".into())
}

fn loss_oracles() -> Outcome {
    let vocab: Vec<String> = (0..7).map(|i| format!("w{i}")).chain([READER_TOKEN.to_string()]).collect();
    let uniform = TabularBackend::uniform(&vocab);
    let one = GenerationMode::OneToOne;
    let many = GenerationMode::OneToMany;
    let p1 = build_prompt("T", "S", &[ctx(3, vec![])]).map_err(|e| e.to_string())?;
    let pm = build_prompt("T", "S", &[ctx(3, vec![]), ctx(4, vec![])]).map_err(|e| e.to_string())?;
    let t1 = build_target(&["w0 w1 w2 w3 w4".to_string()], one).map_err(|e| e.to_string())?;
    let tm = build_target(&["w0 w1".to_string(), "w2 w3 w4".to_string()], many).map_err(|e| e.to_string())?;
    let ln8 = 8f64.ln();
    close(loss_one2one(&uniform, &p1, &t1).map_err(|e| e.to_string())?, ln8, 1e-9, "uniform one2one")?;
    close(loss_one2many(&uniform, &pm, &tm).map_err(|e| e.to_string())?, ln8, 1e-9, "uniform one2many")?;

    // p(a) = 0.5, p(b | a) = 0.25.
    let mixed = TabularBackend::uniform(&["a", "b", "c", "d"])
        .with_row(None, &[] as &[&str], &[("a", 0.5), ("b", 0.5)])
        .and_then(|b| b.with_row(None, &["a"], &[("b", 0.25), ("c", 0.75)]))
        .map_err(|e| e.to_string())?;
    let t = build_target(&["a b".to_string()], one).map_err(|e| e.to_string())?;
    let want = (2f64.ln() + 4f64.ln()) / 2.0;
    close(loss_one2one(&mixed, &p1, &t).map_err(|e| e.to_string())?, want, 1e-9, "mixed one2one")?;
    let tm = build_target(&["a b".to_string()], many).map_err(|e| e.to_string())?;
    close(loss_one2many(&mixed, &pm, &tm).map_err(|e| e.to_string())?, want, 1e-9, "mixed one2many")?;
    Ok(format!("ln 8 = {ln8:.4}, mixed = {want:.4}"))
}

fn hinge_fixture() -> Outcome {
    let got = similarity_decrease_loss_from_sims(&[0.6, 0.4, 0.7], 0.05).map_err(|e| e.to_string())?;
    close(got, 0.05, 1e-12, "L_sim(0.6, 0.4, 0.7; m = 0.05)")?;
    Ok(format!("{got}"))
}

fn brute_force(cost: &[Vec<f64>]) -> f64 {
    let n = cost.len().max(cost[0].len());
    let at = |i: usize, j: usize| cost.get(i).and_then(|r| r.get(j)).copied().unwrap_or(DUMMY_COST);
    let mut perm: Vec<usize> = (0..n).collect();
    let mut best = f64::INFINITY;
    permute(&mut perm, 0, &mut |p| {
        best = best.min(p.iter().enumerate().map(|(i, &j)| at(i, j)).sum());
    });
    best
}

fn permute(v: &mut Vec<usize>, k: usize, f: &mut dyn FnMut(&[usize])) {
    if k == v.len() {
        f(v);
        return;
    }
    for i in k..v.len() {
        v.swap(k, i);
        permute(v, k + 1, f);
        v.swap(k, i);
    }
}

fn hungarian_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let trials = 250;
    let mut mismatches = 0;
    for _ in 0..trials {
        let rows = rng.random_range(1..=6);
        let cols = rng.random_range(1..=6);
        let cost: Vec<Vec<f64>> = (0..rows).map(|_| (0..cols).map(|_| rng.random_range(0.0..100.0)).collect()).collect();
        let got = hungarian_match(&cost).map_err(|e| e.to_string())?;
        let assigned: f64 = got.pairs.iter().map(|&(i, j)| cost[i][j]).sum::<f64>() + DUMMY_COST * got.unmatched() as f64;
        let want = brute_force(&cost);
        if (got.cost - want).abs() > 1e-9 || (assigned - got.cost).abs() > 1e-9 {
            mismatches += 1;
        }
    }
    check(mismatches == 0, format!("{mismatches} mismatch(es) out of {trials}"))?;
    Ok(format!("{trials} matrices, 0 mismatches"))
}

fn random_judgment(rng: &mut ChaCha8Rng, entity: &str) -> MoralJudgment {
    if rng.random_bool(0.3) {
        return MoralJudgment::absent(entity);
    }
    let traits = ["greedy", "honest", "brave", "rude"];
    MoralJudgment::present(
        entity,
        *traits.choose(rng).unwrap(),
        [None, Some(Evaluation::Good), Some(Evaluation::Bad)].choose(rng).copied().flatten(),
        if rng.random_bool(0.8) { Some(*SphereOfAction::ALL.choose(rng).unwrap()) } else { None },
        if rng.random_bool(0.8) { Some(*Appropriateness::ALL.choose(rng).unwrap()) } else { None },
    )
}

fn diversity_metrics() -> Outcome {
    let x = "the minister kept the money";
    close(di(x, x).map_err(|e| e.to_string())?, 0.0, 1e-12, "di(x, x)")?;
    close(di(x, "schools needed funds badly").map_err(|e| e.to_string())?, 100.0, 1e-12, "di(disjoint)")?;

    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..1000 {
        let q = rng.random_range(0..4);
        let entities: Vec<String> = (0..q).map(|k| format!("e{k}")).collect();
        let a = ctx(rng.random_range(1..=5), entities.iter().map(|e| random_judgment(&mut rng, e)).collect());
        let b = ctx(rng.random_range(1..=5), entities.iter().map(|e| random_judgment(&mut rng, e)).collect());
        let v = dg(&a, &b).map_err(|e| e.to_string())?.value;
        check((0.0..=9.0).contains(&v), format!("dg = {v} outside [0, 9]"))?;
    }

    let full = MoralJudgment::present(
        "he",
        "greedy",
        Some(Evaluation::Bad),
        Some(SphereOfAction::SmallMoney),
        Some(Appropriateness::ViceOfExcess),
    );
    let max = dg(&ctx(1, vec![full]), &ctx(5, vec![MoralJudgment::absent("he")])).map_err(|e| e.to_string())?.value;
    check(max == 9.0, format!("maximal disagreement dg = {max}"))?;
    Ok("di(x,x) = 0, di(disjoint) = 100, 1000 dg in [0, 9], max = 9".into())
}

fn naive_pearson(x: &[f64], y: &[f64]) -> f64 {
    let n = x.len() as f64;
    let (sx, sy) = (x.iter().sum::<f64>(), y.iter().sum::<f64>());
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| a * b).sum();
    let sxx: f64 = x.iter().map(|a| a * a).sum();
    let syy: f64 = y.iter().map(|b| b * b).sum();
    (n * sxy - sx * sy) / ((n * sxx - sx * sx).sqrt() * (n * syy - sy * sy).sqrt())
}

fn correlation_pipeline() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let n = 1000;
    let rho: f64 = 0.5;
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let a: f64 = StandardNormal.sample(&mut rng);
        let b: f64 = StandardNormal.sample(&mut rng);
        x.push(a);
        y.push(rho * a + (1.0 - rho * rho).sqrt() * b);
    }
    let rep = diversity_report_from_values(&x, &y, false).map_err(|e| e.to_string())?;
    let r = rep.correlation.r;
    close(r, rho, 0.05, "recovered r")?;
    close(r, naive_pearson(&x, &y), 1e-9, "direct-formula oracle")?;
    check(rep.correlation.n == n, "pair count")?;
    Ok(format!("r = {r:.4}, p = {:.2e}", rep.correlation.p_value))
}

fn cluster(id: &str, attribute: Attribute, sentence: f64, interps: &[f64]) -> InterpretationCluster {
    let scored = |text: String, v: f64| ScoredText { text, scores: [(attribute, v)].into_iter().collect() };
    InterpretationCluster {
        id: id.into(),
        source: ClusterSource::Human,
        sentence: scored(format!("{id}-s"), sentence),
        interpretations: interps.iter().enumerate().map(|(k, &v)| scored(format!("{id}-{k}"), v)).collect(),
    }
}

fn moderation_fixtures() -> Outcome {
    let settings = AnalysisSettings::default();
    let cases = [
        (cluster("tox", Attribute::Toxicity, 0.0186, &[0.0171, 0.1912, 0.4274]), Attribute::Toxicity, [true, true, false]),
        (cluster("ins", Attribute::Insult, 0.0091, &[0.0102, 0.0086, 0.3680]), Attribute::Insult, [true, true, false]),
        (
            cluster("ida", Attribute::IdentityAttack, 0.0038, &[0.0034, 0.0142, 0.1445]),
            Attribute::IdentityAttack,
            [true, false, false],
        ),
    ];
    for (c, attr, want) in &cases {
        let flags = flag_cluster(c, &settings).map_err(|e| e.to_string())?;
        let f = flags[attr];
        check([f.a1_any, f.a1_margin, f.a2] == *want, format!("{}: got {f:?}, want {want:?}", c.id))?;
    }
    Ok("3 clusters match (1A, 1B, A2)".into())
}

/// Seeded random embedding per distinct text.
struct RandomProvider {
    seed: u64,
}

impl EmbeddingProvider for RandomProvider {
    fn name(&self) -> &str {
        "random"
    }
    fn dimension(&self) -> usize {
        8
    }
    fn embed(&self, text: &str) -> Result<Vec<f64>, SimilarityError> {
        let h = text.bytes().fold(self.seed, |h, b| h.wrapping_mul(31).wrapping_add(u64::from(b)));
        let mut rng = ChaCha8Rng::seed_from_u64(h);
        Ok((0..8).map(|_| rng.random_range(-1.0..1.0)).collect())
    }
}

fn ordering_control() -> Outcome {
    let words = ["money", "school", "minister", "kept", "funds", "people", "vote", "party", "lies", "truth"];
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut violations = Vec::new();
    for t in 0..100 {
        let sentence: String = (0..6).map(|_| *words.choose(&mut rng).unwrap()).collect::<Vec<_>>().join(" ");
        let j = rng.random_range(2..=6);
        let readers: Vec<ReaderRecord> = (0..j)
            .map(|k| ReaderRecord {
                context: ctx(rng.random_range(1..=5), vec![random_judgment(&mut rng, "he")]),
                interpretation: format!(
                    "r{k} {}",
                    (0..rng.random_range(1..6)).map(|_| *words.choose(&mut rng).unwrap()).collect::<Vec<_>>().join(" ")
                ),
            })
            .collect();
        let rec = AnnotatedSentence {
            id: format!("t{t}"),
            title: "T".into(),
            sentence,
            entities: vec!["he".into()],
            readers,
        };
        let provider: Box<dyn EmbeddingProvider> = if t % 2 == 0 {
            Box::new(BagOfWordsProvider::new(rng.random_range(16..256)))
        } else {
            Box::new(RandomProvider { seed: rng.random() })
        };
        let ex = prepare_training_example(&rec, Strategy::One2MSim, Some(provider.as_ref()), None)
            .map_err(|e| e.to_string())?
            .remove(0);
        let interps = ex.target.interpretations();
        let sims: Vec<f64> = interps
            .iter()
            .map(|i| similarity(&rec.sentence, i, provider.as_ref()).map(|s| s.value()))
            .collect::<Result<_, _>>()
            .map_err(|e| e.to_string())?;
        if sims.windows(2).any(|w| w[1] > w[0]) {
            violations.push(format!("{}: sims {sims:?} increase", rec.id));
        }
        let contexts: Vec<ReaderContext> = ex.reader_order.iter().map(|&k| rec.readers[k].context.clone()).collect();
        let rebuilt = build_prompt(&rec.title, &rec.sentence, &contexts).map_err(|e| e.to_string())?;
        let paired: BTreeSet<(usize, String)> = ex.reader_order.iter().copied().zip(interps.iter().cloned()).collect();
        let original: BTreeSet<(usize, String)> =
            rec.readers.iter().enumerate().map(|(k, r)| (k, r.interpretation.clone())).collect();
        if rebuilt != ex.prompt || paired != original {
            violations.push(format!("{}: context/interpretation pairing broken", rec.id));
        }
    }
    check(violations.is_empty(), format!("{} violation(s), first: {}", violations.len(), violations.first().cloned().unwrap_or_default()))?;
    Ok("100 triples, 0 violations".into())
}

fn split_property() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut corpus = Vec::new();
    let mut largest = 0;
    for t in 0..50 {
        let size = rng.random_range(1..=6);
        largest = largest.max(size);
        for k in 0..size {
            corpus.push(AnnotatedSentence {
                id: format!("t{t}-{k}"),
                title: format!("title {t}"),
                sentence: "S".into(),
                entities: vec![],
                readers: vec![ReaderRecord { context: ctx(3, vec![]), interpretation: "i".into() }],
            });
        }
    }
    let ratios = SplitRatios::default();
    let a = stratified_split(&corpus, ratios, 17).map_err(|e| e.to_string())?;
    let b = stratified_split(&corpus, ratios, 17).map_err(|e| e.to_string())?;
    check(a.split == b.split, "same-seed runs differ")?;

    let mut home: BTreeMap<&str, &str> = BTreeMap::new();
    let n = corpus.len() as f64;
    let mut sizes = Vec::new();
    for ((name, part), ratio) in a.split.parts().into_iter().zip([ratios.train, ratios.validation, ratios.test]) {
        for rec in part {
            if let Some(prev) = home.insert(rec.title.as_str(), name) {
                check(prev == name, format!("{} appears in {prev} and {name}", rec.title))?;
            }
        }
        let diff = (part.len() as f64 - ratio * n).abs();
        check(diff <= largest as f64, format!("{name}: {} sentences vs target {:.1}", part.len(), ratio * n))?;
        sizes.push(part.len());
    }
    check(home.len() == 50, "titles lost")?;
    Ok(format!("{} sentences -> {sizes:?}, largest group {largest}", corpus.len()))
}

fn e2e_record(i: usize) -> String {
    format!(
        concat!(
            r#"{{"id":"s{i}","title":"title {i}","sentence":"Minister {i} kept the funds.","entities":["Minister {i}"],"readers":["#,
            r#"{{"attitude":{a},"interpretation":"minister {i} is greedy","judgments":[{{"entity":"Minister {i}","present":true,"trait":"greedy","evaluation":"bad","soa":"giving & taking: small money","appropriateness":"vice of excess"}}]}},"#,
            r#"{{"attitude":{b},"interpretation":"the funds paid for school {i}","judgments":[{{"entity":"Minister {i}","present":false}}]}}"#,
            r#"]}}"#
        ),
        i = i,
        a = i % 5 + 1,
        b = (i + 2) % 5 + 1
    )
}

fn end_to_end() -> Outcome {
    let dir = tempfile::TempDir::new().map_err(|e| e.to_string())?;
    let data = dir.path().join("data.jsonl");
    fs::write(&data, (0..10).map(e2e_record).collect::<Vec<_>>().join("\n") + "\n").map_err(|e| e.to_string())?;
    let out = dir.path().join("out");
    let ckpt = format!("backend.checkpoint={}", out.join("prompts.jsonl").display());
    let base = [
        "interp".to_string(),
        "--out".into(),
        out.display().to_string(),
        "--dataset".into(),
        data.display().to_string(),
        "--set".into(),
        "backend.name=echo".into(),
        "--set".into(),
        "train.strategy=one2one".into(),
        "--set".into(),
        "evaluation.split=all".into(),
        "--set".into(),
        ckpt,
    ];
    for cmd in ["validate", "prompts", "evaluate"] {
        let code = interp_cli::run_args(base.iter().cloned().chain([cmd.to_string()]));
        check(code == 0, format!("{cmd} exited {code}"))?;
    }
    let tsv = fs::read_to_string(out.join("evaluation.tsv")).map_err(|e| e.to_string())?;
    let header: Vec<&str> = tsv.lines().next().unwrap_or_default().split('\t').collect();
    let mean: Vec<&str> = tsv.lines().find(|l| l.starts_with("MEAN\t")).ok_or("no MEAN row")?.split('\t').collect();
    let col = |name: &str| -> Result<f64, String> {
        let k = header.iter().position(|h| *h == name).ok_or(format!("no {name} column"))?;
        mean[k].parse().map_err(|e| format!("{name}: {e}"))
    };
    let (bleu1, cost) = (col("bleu1")?, col("match_cost")?);
    close(bleu1, 100.0, 1e-9, "aggregate BLEU-1")?;
    close(cost, 0.0, 1e-9, "match cost")?;
    Ok(format!("BLEU-1 {bleu1}, cost {cost}"))
}

#[test]
fn acceptance() {
    let criteria: [(&str, Duration, fn() -> Outcome); 10] = [
        ("template-fidelity", Duration::from_secs(1), template_fidelity),
        ("loss-oracles", Duration::from_secs(1), loss_oracles),
        ("hinge-loss-fixture", Duration::from_secs(1), hinge_fixture),
        ("hungarian-oracle", Duration::from_secs(10), hungarian_oracle),
        ("diversity-metrics", Duration::from_secs(5), diversity_metrics),
        ("correlation-pipeline", Duration::from_secs(5), correlation_pipeline),
        ("moderation-fixtures", Duration::MAX, moderation_fixtures),
        ("ordering-control", Duration::MAX, ordering_control),
        ("split-property", Duration::MAX, split_property),
        ("end-to-end-smoke", Duration::from_secs(30), end_to_end),
    ];
    let mut unexpected = Vec::new();
    for (name, limit, f) in criteria {
        let start = Instant::now();
        let result = f();
        let elapsed = start.elapsed();
        let result = match result {
            Ok(m) if elapsed > limit => Err(format!("{m}; took {elapsed:?}, limit {limit:?}")),
            other => other,
        };
        match result {
            Ok(m) => println!("PASS {name}: {m} ({elapsed:.2?})"),
            Err(m) => {
                println!("FAIL {name}: {m} ({elapsed:.2?})");
                if !UNATTAINABLE.contains(&name) {
                    unexpected.push(name);
                }
            }
        }
    }
    assert!(unexpected.is_empty(), "failing criteria: {unexpected:?}");
}
