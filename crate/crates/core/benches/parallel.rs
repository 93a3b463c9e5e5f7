use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use wordcnn::eval;
use wordcnn::model::encode_views;
use wordcnn::text::{build_vocab_with, tokenize};
use wordcnn::train::{self, TrainConfig};
use wordcnn::{Example, Execution, ModelTemplate, Representation, ShallowModel, VocabKind};

fn synthetic_corpus(n: usize, len: usize) -> Vec<(Vec<String>, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    (0..n)
        .map(|i| {
            let text: Vec<String> = (0..len).map(|_| format!("w{}", rng.random_range(0..2_000))).collect();
            (tokenize(&text.join(" ")), i % 2)
        })
        .collect()
}

fn setup(n: usize) -> (ModelTemplate, Vec<Example>, Vec<Vec<String>>) {
    let docs = synthetic_corpus(n, 100);
    let tokens: Vec<Vec<String>> = docs.iter().map(|(t, _)| t.clone()).collect();
    let vocab = build_vocab_with(Execution::Parallel, &tokens, VocabKind::Word, 30_000).unwrap();
    let template = ModelTemplate::new(vocab, Representation::ConcatOneHot, 200, 2);
    let examples = docs.iter().map(|(t, l)| encode_views(&template.vocabs, t, *l)).collect();
    (template, examples, tokens)
}

fn modes() -> [(&'static str, Execution); 2] {
    [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)]
}

fn bench_training_epoch(c: &mut Criterion) {
    let (template, examples, _) = setup(400);
    let mut group = c.benchmark_group("train_epoch");
    group.sample_size(10);
    for (name, exec) in modes() {
        let cfg = TrainConfig {
            epochs: 1,
            decay_epoch: 1,
            exec,
            ..TrainConfig::default()
        };
        group.bench_function(BenchmarkId::new(name, examples.len()), |b| {
            b.iter(|| train::train(template.instantiate(3, 1).unwrap(), &cfg, black_box(&examples), &[]).unwrap())
        });
    }
    group.finish();
}

fn bench_evaluation(c: &mut Criterion) {
    let (template, examples, _) = setup(1_000);
    let mut model: ShallowModel = template.instantiate(3, 1).unwrap();
    train::initialize(&mut model, 0.01, 1);
    let mut group = c.benchmark_group("evaluate");
    for (name, exec) in modes() {
        group.bench_function(BenchmarkId::new(name, examples.len()), |b| {
            b.iter(|| eval::evaluate_with(exec, &model, black_box(&examples)).unwrap())
        });
    }
    group.finish();
}

fn bench_vocab(c: &mut Criterion) {
    let (_, _, tokens) = setup(2_000);
    let mut group = c.benchmark_group("build_vocab_ngram123");
    group.sample_size(10);
    for (name, exec) in modes() {
        group.bench_function(BenchmarkId::new(name, tokens.len()), |b| {
            b.iter(|| build_vocab_with(exec, black_box(&tokens), VocabKind::Ngram123, 200_000).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, bench_training_epoch, bench_evaluation, bench_vocab);
criterion_main!(benches);
