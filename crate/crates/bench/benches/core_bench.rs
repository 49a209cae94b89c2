use std::hint::black_box;
use std::path::Path;
use std::sync::Arc;

use criterion::{criterion_group, criterion_main, Criterion};

use mumkit_core::corpus::{parse_corpus, rank_importance};
use mumkit_core::evaluator::prompt::PromptTemplates;
use mumkit_core::stats::{fit_logistic, logistic, spearman};
use mumkit_core::{build_dataset, CommonGround, Corpus, Evaluator, EvaluatorConfig, FitBounds, Lexicon, MockBackend, TriggerLexicon};

const CORPUS: &str = include_str!("../../../data/sample_corpus.jsonl");
const LEXICON: &str = include_str!("../../../data/sample_lexicon.toml");
const TRIGGERS: &str = include_str!("../../../data/sample_triggers.toml");

fn ranked_sample() -> (Corpus, Lexicon) {
    let lexicon = Lexicon::parse(LEXICON).expect("sample lexicon");
    let triggers = TriggerLexicon::parse(TRIGGERS).expect("sample triggers");
    let corpus = parse_corpus(CORPUS, Path::new("sample_corpus.jsonl")).expect("sample corpus");
    let cg = CommonGround::uniform(0.5, 1);
    let backend = MockBackend::new(Arc::new(lexicon.clone()), Arc::new(triggers), cg.clone());
    let evaluator = Evaluator::new(EvaluatorConfig::mock("bench", cg), PromptTemplates::default(), Box::new(backend));
    let items = corpus
        .items
        .iter()
        .map(|it| rank_importance(it, &evaluator).expect("ranking"))
        .collect();
    (Corpus::new(items).expect("ranked corpus"), lexicon)
}

fn bench_fit(c: &mut Criterion) {
    let points: Vec<(f64, f64)> = (0..6)
        .map(|d| {
            let x = d as f64;
            (x, logistic(x, 1.4799, 2.7102) + 0.01 * ((d * 7 % 5) as f64 - 2.0))
        })
        .collect();
    c.bench_function("fit_logistic/6 points", |b| {
        b.iter(|| fit_logistic(black_box(&points), FitBounds::default()).expect("fit"))
    });
}

fn bench_spearman(c: &mut Criterion) {
    let points: Vec<(f64, f64)> = [1.0, 0.95, 0.97, 0.6, 0.62, 0.1]
        .iter()
        .enumerate()
        .map(|(d, &y)| (d as f64, y))
        .collect();
    c.bench_function("spearman/exact 6 points", |b| b.iter(|| spearman(black_box(&points)).expect("spearman")));
}

fn bench_build(c: &mut Criterion) {
    let (corpus, lexicon) = ranked_sample();
    c.bench_function("build_dataset/sample corpus", |b| {
        b.iter(|| build_dataset(black_box(&corpus), &lexicon, 20240611).expect("dataset"))
    });
}

criterion_group!(benches, bench_fit, bench_spearman, bench_build);
criterion_main!(benches);
