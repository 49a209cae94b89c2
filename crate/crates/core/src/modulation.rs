//! The modulation operator: replaces the top-`level` important words of a
//! base item with strategy-specific substitutes.

use std::collections::{BTreeMap, HashMap};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::{BaseItem, Corpus, Validation};
use crate::error::{Error, Result};
use crate::evaluator::ItemKey;
use crate::hashing::FieldHasher;
use crate::lexicon::Lexicon;
use crate::strategy::Strategy;
use crate::text::tokenize;

pub const MAX_LEVEL: u8 = 5;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Substitution {
    pub token_index: usize,
    pub original: String,
    pub replacement: String,
    /// Byte offset of `replacement` in the modulated text.
    pub offset: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeaningAudit {
    #[default]
    Unaudited,
    Preserved,
    Broken,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModulatedItem {
    pub base_id: String,
    pub strategy: Strategy,
    pub level: u8,
    pub text: String,
    pub substitutions: Vec<Substitution>,
    pub seed: u64,
    #[serde(default)]
    pub meaning_audit: MeaningAudit,
}

impl ModulatedItem {
    pub fn key(&self) -> ItemKey {
        ItemKey::modulated(&self.base_id, self.strategy, self.level)
    }

    /// Undoes every substitution, recovering the base text.
    pub fn restore(&self) -> String {
        let mut subs: Vec<&Substitution> = self.substitutions.iter().collect();
        subs.sort_by_key(|s| s.offset);
        let mut out = String::with_capacity(self.text.len());
        let mut at = 0;
        for s in subs {
            out.push_str(&self.text[at..s.offset]);
            out.push_str(&s.original);
            at = s.offset + s.replacement.len();
        }
        out.push_str(&self.text[at..]);
        out
    }
}

/// Per-token RNG seed; independent of level so that a token receives the
/// same replacement at every level.
pub fn token_seed(seed: u64, base_id: &str, strategy: Strategy, token_index: usize) -> u64 {
    let mut h = FieldHasher::new("token-seed");
    h.num(seed)
        .field(base_id)
        .field(strategy.key())
        .num(token_index as u64);
    h.u64()
}

pub fn modulate(
    item: &BaseItem,
    strategy: Strategy,
    level: u8,
    lexicon: &Lexicon,
    seed: u64,
) -> Result<ModulatedItem> {
    if !(1..=MAX_LEVEL).contains(&level) {
        return Err(Error::LevelOutOfRange(level));
    }
    if item.important_words.len() < level as usize {
        return Err(Error::Unranked(item.id.clone()));
    }
    let toks = tokenize(&item.text);
    let mut chosen: Vec<(usize, String)> = Vec::with_capacity(level as usize);
    let mut uncovered = Vec::new();
    for w in &item.important_words[..level as usize] {
        let tok = toks
            .get(w.token_index)
            .ok_or_else(|| Error::Unranked(item.id.clone()))?;
        match lexicon.substitute(
            strategy,
            tok.surface,
            token_seed(seed, &item.id, strategy, w.token_index),
        ) {
            Some(rep) => chosen.push((w.token_index, rep)),
            None => uncovered.push(tok.surface.to_string()),
        }
    }
    if !uncovered.is_empty() {
        return Err(Error::Uncovered {
            strategy,
            words: uncovered,
        });
    }
    let by_index: HashMap<usize, &str> = chosen.iter().map(|(i, r)| (*i, r.as_str())).collect();
    let mut text = String::with_capacity(item.text.len() + 16);
    let mut offsets = HashMap::new();
    let mut at = 0;
    for tok in &toks {
        if let Some(rep) = by_index.get(&tok.index) {
            text.push_str(&item.text[at..tok.span.start]);
            offsets.insert(tok.index, text.len());
            text.push_str(rep);
            at = tok.span.end;
        }
    }
    text.push_str(&item.text[at..]);
    let substitutions = chosen
        .into_iter()
        .map(|(idx, replacement)| Substitution {
            token_index: idx,
            original: toks[idx].surface.to_string(),
            offset: offsets[&idx],
            replacement,
        })
        .collect();
    Ok(ModulatedItem {
        base_id: item.id.clone(),
        strategy,
        level,
        text,
        substitutions,
        seed,
        meaning_audit: MeaningAudit::Unaudited,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub format: String,
    pub version: String,
    pub corpus_version: String,
    pub lexicon_version: String,
    pub seed: u64,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ModulatedDataset {
    pub corpus_version: String,
    pub lexicon_version: String,
    pub seed: u64,
    pub items: Vec<ModulatedItem>,
}

const DATASET_FORMAT: &str = "mumkit-dataset/1";

impl ModulatedDataset {
    pub fn version(&self) -> String {
        let mut h = FieldHasher::new("dataset-v1");
        h.field(&self.corpus_version)
            .field(&self.lexicon_version)
            .num(self.seed);
        for it in &self.items {
            h.field(serde_json::to_vec(it).expect("item serializes"));
        }
        h.short()
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    /// Base ids in first-seen order.
    pub fn base_ids(&self) -> Vec<&str> {
        let mut seen = std::collections::HashSet::new();
        self.items
            .iter()
            .filter(|i| seen.insert(i.base_id.as_str()))
            .map(|i| i.base_id.as_str())
            .collect()
    }

    pub fn cell(&self, strategy: Strategy, level: u8) -> impl Iterator<Item = &ModulatedItem> {
        self.items
            .iter()
            .filter(move |i| i.strategy == strategy && i.level == level)
    }

    pub fn to_jsonl(&self) -> String {
        let header = DatasetHeader {
            format: DATASET_FORMAT.to_string(),
            version: self.version(),
            corpus_version: self.corpus_version.clone(),
            lexicon_version: self.lexicon_version.clone(),
            seed: self.seed,
            count: self.items.len(),
        };
        let mut out = serde_json::to_string(&header).expect("header serializes");
        out.push('\n');
        for it in &self.items {
            out.push_str(&serde_json::to_string(it).expect("item serializes"));
            out.push('\n');
        }
        out
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_jsonl()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let src = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let perr = |line: usize, message: String| Error::Parse {
            path: path.to_path_buf(),
            line,
            message,
        };
        let mut lines = src
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'));
        let (_, first) = lines.next().ok_or_else(|| perr(1, "missing header".into()))?;
        let header: DatasetHeader =
            serde_json::from_str(first).map_err(|e| perr(1, e.to_string()))?;
        if header.format != DATASET_FORMAT {
            return Err(perr(1, format!("unsupported format {}", header.format)));
        }
        let items = lines
            .map(|(i, l)| serde_json::from_str(l).map_err(|e| perr(i + 1, e.to_string())))
            .collect::<Result<Vec<ModulatedItem>>>()?;
        let ds = ModulatedDataset {
            corpus_version: header.corpus_version,
            lexicon_version: header.lexicon_version,
            seed: header.seed,
            items,
        };
        if ds.items.len() != header.count || ds.version() != header.version {
            return Err(Error::VersionMismatch(format!(
                "dataset {} does not match its header",
                path.display()
            )));
        }
        Ok(ds)
    }
}

/// Modulates every item under every strategy at levels 1..=5. Items that
/// failed baseline validation are skipped. Any failure aborts the build,
/// reporting all of them.
pub fn build_dataset(corpus: &Corpus, lexicon: &Lexicon, seed: u64) -> Result<ModulatedDataset> {
    let jobs: Vec<(&BaseItem, Strategy, u8)> = corpus
        .items
        .iter()
        .filter(|it| it.validated != Validation::Failed)
        .flat_map(|it| {
            Strategy::ALL
                .into_iter()
                .flat_map(move |s| (1..=MAX_LEVEL).map(move |l| (it, s, l)))
        })
        .collect();
    let results: Vec<Result<ModulatedItem>> = jobs
        .par_iter()
        .map(|(it, s, l)| modulate(it, *s, *l, lexicon, seed))
        .collect();
    let mut items = Vec::with_capacity(results.len());
    let mut failures = Vec::new();
    for ((it, s, l), r) in jobs.iter().zip(results) {
        match r {
            Ok(m) => items.push(m),
            Err(e) => failures.push(format!("{} / {s} / level {l}: {e}", it.id)),
        }
    }
    if !failures.is_empty() {
        return Err(Error::BuildFailures(failures));
    }
    Ok(ModulatedDataset {
        corpus_version: corpus.version(),
        lexicon_version: lexicon.version().to_string(),
        seed,
        items,
    })
}

/// Audit verdicts keyed by (base id, strategy, level).
pub type AuditMap = BTreeMap<(String, Strategy, u8), MeaningAudit>;

/// Reads a CSV audit file with columns `base_id,strategy,level,verdict`.
pub fn load_audit(path: &Path) -> Result<AuditMap> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: 0,
        message: e.to_string(),
    })?;
    #[derive(Deserialize)]
    struct Row {
        base_id: String,
        strategy: Strategy,
        level: u8,
        verdict: MeaningAudit,
    }
    let mut out = AuditMap::new();
    for (i, row) in rdr.deserialize::<Row>().enumerate() {
        let row = row.map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: i + 2,
            message: e.to_string(),
        })?;
        out.insert((row.base_id, row.strategy, row.level), row.verdict);
    }
    Ok(out)
}

pub fn audit_meaning(dataset: &mut ModulatedDataset, audit: &AuditMap) -> Result<()> {
    for (base, strategy, level) in audit.keys() {
        if !dataset
            .items
            .iter()
            .any(|i| &i.base_id == base && i.strategy == *strategy && i.level == *level)
        {
            return Err(Error::UnknownAuditItem(format!("{base}/{strategy}/{level}")));
        }
    }
    for it in &mut dataset.items {
        if let Some(v) = audit.get(&(it.base_id.clone(), it.strategy, it.level)) {
            it.meaning_audit = *v;
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{ImportantWord, Label};

    fn ranked(text: &str, order: &[usize]) -> BaseItem {
        let mut it = BaseItem::new("b1", text, Label::Violating, "weather");
        let toks = tokenize(text);
        it.important_words = order
            .iter()
            .map(|&i| ImportantWord {
                token_index: i,
                surface: toks[i].surface.to_string(),
            })
            .collect();
        it.validated = Validation::Passed;
        it
    }

    #[test]
    fn code_word_level_one() {
        let item = ranked("heavy rain causes floods", &[1, 3, 0, 2]);
        let lex = Lexicon::rules_only().with_word(Strategy::CodeWord, "rain", "confetti");
        let m = modulate(&item, Strategy::CodeWord, 1, &lex, 0).unwrap();
        assert_eq!(m.text, "heavy confetti causes floods");
        assert_eq!(m.substitutions.len(), 1);
        let s = &m.substitutions[0];
        assert_eq!((s.token_index, s.original.as_str(), s.replacement.as_str()), (1, "rain", "confetti"));
        assert_eq!(m.restore(), item.text);
    }

    #[test]
    fn level_zero_and_six_rejected() {
        let item = ranked("heavy rain causes floods", &[1]);
        let lex = Lexicon::rules_only();
        assert!(matches!(
            modulate(&item, Strategy::Phonetic, 0, &lex, 0),
            Err(Error::LevelOutOfRange(0))
        ));
        assert!(matches!(
            modulate(&item, Strategy::Phonetic, 6, &lex, 0),
            Err(Error::LevelOutOfRange(6))
        ));
    }

    #[test]
    fn uncovered_words_are_all_listed() {
        let item = ranked("heavy rain causes floods", &[1, 3]);
        let lex = Lexicon::rules_only();
        match modulate(&item, Strategy::Pictorial, 2, &lex, 0) {
            Err(Error::Uncovered { strategy, words }) => {
                assert_eq!(strategy, Strategy::Pictorial);
                assert_eq!(words, vec!["rain", "floods"]);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn punctuation_and_case_survive_round_trip() {
        let item = ranked("\"Covid,\" they said, spreads by phone.", &[0, 5]);
        let lex = Lexicon::rules_only();
        let m = modulate(&item, Strategy::Phonetic, 2, &lex, 3).unwrap();
        assert_eq!(m.text, "\"Kovit,\" they said, spreads by fone.");
        assert_eq!(m.restore(), item.text);
    }

    #[test]
    fn multi_word_replacement_restores() {
        let item = ranked("heavy rain causes floods", &[1, 3]);
        let lex = Lexicon::rules_only()
            .with_word(Strategy::Paraphrase, "rain", "sky water")
            .with_word(Strategy::Paraphrase, "floods", "rising rivers");
        let m = modulate(&item, Strategy::Paraphrase, 2, &lex, 0).unwrap();
        assert_eq!(m.text, "heavy sky water causes rising rivers");
        assert_eq!(m.restore(), item.text);
    }

    #[test]
    fn containment_across_levels() {
        let item = ranked(
            "seasoned sailors swear red skies at night promise calm seas",
            &[4, 0, 1, 3, 7, 9],
        );
        let lex = Lexicon::rules_only();
        let mut prev: Vec<Substitution> = Vec::new();
        for level in 1..=5 {
            let m = modulate(&item, Strategy::UnknownSpelling, level, &lex, 42).unwrap();
            assert_eq!(m.substitutions.len(), level as usize);
            for p in &prev {
                let same = m.substitutions.iter().find(|s| s.token_index == p.token_index).unwrap();
                assert_eq!(same.replacement, p.replacement);
            }
            prev = m.substitutions.clone();
            assert_eq!(m.restore(), item.text);
        }
    }

    #[test]
    fn audit_unknown_item_rejected() {
        let mut ds = ModulatedDataset {
            corpus_version: "c".into(),
            lexicon_version: "l".into(),
            seed: 1,
            items: vec![],
        };
        let mut a = AuditMap::new();
        a.insert(("zz".into(), Strategy::CodeWord, 1), MeaningAudit::Broken);
        assert!(matches!(audit_meaning(&mut ds, &a), Err(Error::UnknownAuditItem(_))));
    }
}
