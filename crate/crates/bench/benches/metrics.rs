use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use interp_core::evaluation::{bleu, hungarian_match, match_interpretations};
use interp_core::prompt::build_prompt;
use interp_core::{Appropriateness, Attitude, Evaluation, MoralJudgment, ReaderContext, SphereOfAction};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn sentence(rng: &mut ChaCha8Rng, len: usize) -> String {
    (0..len).map(|_| format!("w{}", rng.random_range(0..50))).collect::<Vec<_>>().join(" ")
}

fn hungarian(c: &mut Criterion) {
    let mut group = c.benchmark_group("hungarian");
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for n in [4usize, 16, 64] {
        let cost: Vec<Vec<f64>> = (0..n).map(|_| (0..n).map(|_| rng.random_range(0.0..100.0)).collect()).collect();
        group.bench_with_input(BenchmarkId::from_parameter(n), &cost, |b, cost| {
            b.iter(|| hungarian_match(black_box(cost)).unwrap())
        });
    }
    group.finish();
}

fn lexical(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let candidate = sentence(&mut rng, 30);
    let refs: Vec<String> = (0..4).map(|_| sentence(&mut rng, 30)).collect();
    c.bench_function("bleu4_30_tokens_4_refs", |b| b.iter(|| bleu(black_box(&candidate), black_box(&refs), 4).unwrap()));

    let generated: Vec<String> = (0..8).map(|_| sentence(&mut rng, 20)).collect();
    let targets: Vec<String> = (0..8).map(|_| sentence(&mut rng, 20)).collect();
    c.bench_function("match_interpretations_8x8", |b| {
        b.iter(|| match_interpretations(black_box(&generated), black_box(&targets)).unwrap())
    });
}

fn prompt(c: &mut Criterion) {
    let judgment = |e: &str| {
        MoralJudgment::present(
            e,
            "greedy and dishonest",
            Some(Evaluation::Bad),
            Some(SphereOfAction::SmallMoney),
            Some(Appropriateness::ViceOfExcess),
        )
    };
    let contexts: Vec<ReaderContext> = (0..5)
        .map(|j| ReaderContext::new(Attitude::new(j % 5 + 1).unwrap(), vec![judgment("the minister"), MoralJudgment::absent("the party")]))
        .collect();
    c.bench_function("build_prompt_5_readers", |b| {
        b.iter(|| build_prompt(black_box("Budget row"), black_box("The minister kept the funds."), black_box(&contexts)).unwrap())
    });
}

criterion_group!(benches, hungarian, lexical, prompt);
criterion_main!(benches);
