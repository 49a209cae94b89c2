//! Algospeak modulation, evaluation and threshold statistics.
//!
//! The pipeline: a [`Corpus`] of labeled sentences is validated and ranked
//! by an [`Evaluator`], modulated with a [`Lexicon`] into a
//! [`ModulatedDataset`], evaluated by the [`runner`] into [`RateSeries`],
//! and summarized by [`stats`] into logistic fits and threshold estimates.

pub mod analysis;
pub mod corpus;
pub mod error;
pub mod evaluator;
pub mod hashing;
pub mod lexicon;
pub mod mockpop;
pub mod modulation;
pub mod report;
pub mod runner;
pub mod similarity;
pub mod stats;
pub mod strategy;
pub mod text;

pub use analysis::{analyze, AnalysisOptions, Results};
pub use corpus::{BaseItem, Corpus, ImportantWord, Label, Validation};
pub use error::{Error, Result};
pub use evaluator::{
    CommonGround, Evaluator, EvaluatorConfig, ItemKey, MockBackend, Task, TrialRecord, TriggerLexicon,
};
pub use lexicon::Lexicon;
pub use modulation::{build_dataset, modulate, MeaningAudit, ModulatedDataset, ModulatedItem, Substitution};
pub use similarity::{similarity, understanding_verdict};
pub use strategy::Strategy;
pub use runner::{Measure, RatePoint, RateSeries};
pub use stats::{FitBounds, FitClass, ImumEstimate, LogisticFit, MumEstimate, SpearmanResult};
