//! Fixtures over the shipped sample data.

#![allow(dead_code)]

use std::path::Path;
use std::sync::{Arc, OnceLock};

use mumkit_core::corpus::{parse_corpus, rank_importance};
use mumkit_core::evaluator::prompt::PromptTemplates;
use mumkit_core::text::tokenize;
use mumkit_core::{
    build_dataset, CommonGround, Corpus, Evaluator, EvaluatorConfig, Lexicon, MockBackend, ModulatedDataset,
    TriggerLexicon,
};

pub const CORPUS: &str = include_str!("../../../../data/sample_corpus.jsonl");
pub const LEXICON: &str = include_str!("../../../../data/sample_lexicon.toml");
pub const TRIGGERS: &str = include_str!("../../../../data/sample_triggers.toml");
pub const SEED: u64 = 20240611;

pub fn lexicon() -> Lexicon {
    Lexicon::parse(LEXICON).expect("sample lexicon parses")
}

pub fn triggers() -> TriggerLexicon {
    TriggerLexicon::parse(TRIGGERS).expect("sample triggers parse")
}

pub fn raw_corpus() -> Corpus {
    parse_corpus(CORPUS, Path::new("sample_corpus.jsonl")).expect("sample corpus parses")
}

pub fn mock(id: &str, cg: CommonGround) -> Evaluator {
    let corpus = raw_corpus();
    let vocab: Vec<String> = corpus
        .items
        .iter()
        .flat_map(|it| tokenize(&it.text).into_iter().map(|t| t.surface.to_string()).collect::<Vec<_>>())
        .collect();
    let backend = MockBackend::new(Arc::new(lexicon()), Arc::new(triggers()), cg.clone()).with_vocabulary(vocab);
    Evaluator::new(EvaluatorConfig::mock(id, cg), PromptTemplates::default(), Box::new(backend))
}

/// Ranked once per test binary.
pub fn ranked_corpus() -> Corpus {
    static RANKED: OnceLock<Corpus> = OnceLock::new();
    RANKED.get_or_init(rank_sample).clone()
}

fn rank_sample() -> Corpus {
    let ranker = mock("ranker", CommonGround::uniform(0.5, 1));
    let items = raw_corpus()
        .items
        .iter()
        .map(|it| rank_importance(it, &ranker).expect("ranking succeeds"))
        .collect();
    Corpus::new(items).expect("ranked corpus")
}

pub fn dataset() -> ModulatedDataset {
    build_dataset(&ranked_corpus(), &lexicon(), SEED).expect("sample dataset builds")
}
