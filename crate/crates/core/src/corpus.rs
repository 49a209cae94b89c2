//! Base corpus: labeled sentences and their importance rankings.

use std::collections::{BTreeMap, HashSet};
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evaluator::{Evaluator, ItemKey};
use crate::hashing::FieldHasher;
use crate::text::{casefold, tokenize, TOKENIZER_ID};

pub const RANKING_LEN: usize = 6;
pub const MIN_TOKENS: usize = 10;
pub const MAX_TOKENS: usize = 15;
pub const BASELINE_TRIALS: u8 = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Label {
    Violating,
    Benign,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Validation {
    #[default]
    Unchecked,
    Passed,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImportantWord {
    pub token_index: usize,
    pub surface: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseItem {
    pub id: String,
    pub text: String,
    pub label: Label,
    pub topic: String,
    /// Most important first.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub important_words: Vec<ImportantWord>,
    #[serde(default)]
    pub validated: Validation,
    /// Set when the ranking had to be padded with unvoted content words.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub ranking_flagged: bool,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

/// One line of the corpus file.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct Record {
    id: String,
    text: String,
    label: Label,
    topic: String,
}

impl BaseItem {
    pub fn new(id: &str, text: &str, label: Label, topic: &str) -> Self {
        let mut item = BaseItem {
            id: id.to_string(),
            text: text.to_string(),
            label,
            topic: topic.to_string(),
            important_words: Vec::new(),
            validated: Validation::Unchecked,
            ranking_flagged: false,
            warnings: Vec::new(),
        };
        let n = item.token_count();
        if !(MIN_TOKENS..=MAX_TOKENS).contains(&n) {
            item.warnings.push(format!(
                "sentence has {n} tokens, outside {MIN_TOKENS}..={MAX_TOKENS}"
            ));
        }
        item
    }

    pub fn token_count(&self) -> usize {
        tokenize(&self.text).len()
    }

    pub fn is_ranked(&self) -> bool {
        !self.important_words.is_empty()
            && self.important_words.len() == RANKING_LEN.min(self.token_count())
    }

    pub fn key(&self) -> ItemKey {
        ItemKey::base(&self.id)
    }

    /// Positions of non-stopword, non-empty tokens, in sentence order.
    pub fn content_positions(&self) -> Vec<usize> {
        tokenize(&self.text)
            .iter()
            .filter(|t| !t.surface.is_empty() && !is_stopword(t.surface))
            .map(|t| t.index)
            .collect()
    }

    fn check_ranking(&self) -> Result<()> {
        let toks = tokenize(&self.text);
        let mut seen = HashSet::new();
        for w in &self.important_words {
            let tok = toks.get(w.token_index).ok_or_else(|| {
                Error::invalid(format!(
                    "item `{}`: important word index {} out of range",
                    self.id, w.token_index
                ))
            })?;
            if tok.surface != w.surface {
                return Err(Error::invalid(format!(
                    "item `{}`: token {} is `{}`, ranking says `{}`",
                    self.id, w.token_index, tok.surface, w.surface
                )));
            }
            if !seen.insert(w.token_index) {
                return Err(Error::invalid(format!(
                    "item `{}`: token {} ranked twice",
                    self.id, w.token_index
                )));
            }
        }
        if self.important_words.len() > RANKING_LEN {
            return Err(Error::invalid(format!(
                "item `{}`: ranking longer than {RANKING_LEN}",
                self.id
            )));
        }
        Ok(())
    }
}

const STOPWORDS: &[&str] = &[
    "a", "an", "the", "and", "or", "but", "if", "of", "to", "in", "on", "at", "by", "for", "with",
    "from", "is", "are", "was", "were", "be", "been", "it", "its", "that", "this", "as", "can",
    "will", "your", "you", "their", "they", "them", "when", "than", "then", "so", "do", "does",
    "not", "never", "always", "every", "same", "into", "before", "after", "during", "means",
    "what", "which", "who", "has", "have", "had",
];

pub fn is_stopword(word: &str) -> bool {
    STOPWORDS.contains(&casefold(word).as_str())
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub items: Vec<BaseItem>,
    pub tokenizer_id: String,
}

impl Corpus {
    pub fn new(items: Vec<BaseItem>) -> Result<Self> {
        let mut seen = HashSet::new();
        for it in &items {
            if !seen.insert(it.id.as_str()) {
                return Err(Error::DuplicateId(it.id.clone()));
            }
            it.check_ranking()?;
        }
        Ok(Self {
            items,
            tokenizer_id: TOKENIZER_ID.to_string(),
        })
    }

    /// Hash of texts, labels and rankings. Changes iff any of them changes.
    pub fn version(&self) -> String {
        let mut h = self.hasher();
        for it in &self.items {
            h.num(it.important_words.len() as u64);
            for w in &it.important_words {
                h.num(w.token_index as u64).field(&w.surface);
            }
        }
        h.short()
    }

    /// Hash of the sentence content only; rankings sidecars are keyed by it.
    pub fn content_version(&self) -> String {
        self.hasher().short()
    }

    fn hasher(&self) -> FieldHasher {
        let mut h = FieldHasher::new("corpus-v1");
        h.field(&self.tokenizer_id);
        for it in &self.items {
            h.field(&it.id)
                .field(&it.text)
                .field(serde_json::to_string(&it.label).unwrap())
                .field(&it.topic);
        }
        h
    }

    pub fn get(&self, id: &str) -> Option<&BaseItem> {
        self.items.iter().find(|i| i.id == id)
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = Vec::new();
        for it in &self.items {
            let rec = Record {
                id: it.id.clone(),
                text: it.text.clone(),
                label: it.label,
                topic: it.topic.clone(),
            };
            serde_json::to_writer(&mut out, &rec).expect("record serializes");
            out.push(b'\n');
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

/// Parses a line-delimited corpus file. Blank lines are skipped.
pub fn load_corpus(path: &Path) -> Result<Corpus> {
    let src = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_corpus(&src, path)
}

pub fn parse_corpus(src: &str, path: &Path) -> Result<Corpus> {
    let mut items = Vec::new();
    for (i, line) in src.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: Record = serde_json::from_str(line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        items.push(BaseItem::new(&rec.id, &rec.text, rec.label, &rec.topic));
    }
    Corpus::new(items)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationVerdict {
    pub passed: bool,
    /// Per-trial verdicts; `None` is an abstain.
    pub trials: Vec<Option<bool>>,
}

/// Three identical detection trials; passes iff at least two say violating.
pub fn validate_baseline(item: &BaseItem, evaluator: &Evaluator) -> Result<ValidationVerdict> {
    let key = item.key();
    let trials = (0..BASELINE_TRIALS)
        .map(|t| evaluator.detect(&key, &item.text, &[], t))
        .collect::<Result<Vec<_>>>()?;
    let yes = trials.iter().filter(|v| **v == Some(true)).count();
    Ok(ValidationVerdict {
        passed: yes * 2 > trials.len(),
        trials,
    })
}

/// Resolves surface tokens to positions, each claiming the first unmatched
/// occurrence left to right. Unknown tokens are dropped.
pub fn resolve_positions(text: &str, surfaces: &[String]) -> Vec<usize> {
    let toks = tokenize(text);
    let mut used = HashSet::new();
    let mut out = Vec::new();
    for s in surfaces {
        let want = casefold(s.trim());
        if want.is_empty() {
            continue;
        }
        if let Some(t) = toks
            .iter()
            .find(|t| !used.contains(&t.index) && casefold(t.surface) == want)
        {
            used.insert(t.index);
            out.push(t.index);
        }
    }
    out
}

/// Orders positions by vote count (desc), ties by sentence position (asc).
/// Returns the top `RANKING_LEN` and whether padding with unvoted content
/// words was needed.
pub fn rank_votes(trials: &[Vec<usize>], content_positions: &[usize]) -> (Vec<usize>, bool) {
    let mut votes: BTreeMap<usize, usize> = BTreeMap::new();
    for trial in trials {
        let distinct: HashSet<_> = trial.iter().copied().collect();
        for p in distinct {
            *votes.entry(p).or_default() += 1;
        }
    }
    let mut ranked: Vec<(usize, usize)> = votes.into_iter().collect();
    ranked.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut out: Vec<usize> = ranked.into_iter().map(|(p, _)| p).take(RANKING_LEN).collect();
    let mut flagged = false;
    for &p in content_positions {
        if out.len() >= RANKING_LEN {
            break;
        }
        if !out.contains(&p) {
            out.push(p);
            flagged = true;
        }
    }
    (out, flagged)
}

/// Three importance-elicitation trials, combined by vote count.
pub fn rank_importance(item: &BaseItem, evaluator: &Evaluator) -> Result<BaseItem> {
    if item.validated == Validation::Failed {
        return Err(Error::invalid(format!(
            "item `{}` failed baseline validation",
            item.id
        )));
    }
    let mut trials = Vec::new();
    for t in 0..BASELINE_TRIALS {
        let words = evaluator.importance(&item.key(), &item.text, RANKING_LEN, t)?;
        let mut pos = resolve_positions(&item.text, &words);
        pos.truncate(RANKING_LEN);
        trials.push(pos);
    }
    let (ranked, flagged) = rank_votes(&trials, &item.content_positions());
    let toks = tokenize(&item.text);
    let mut out = item.clone();
    out.important_words = ranked
        .into_iter()
        .map(|p| ImportantWord {
            token_index: p,
            surface: toks[p].surface.to_string(),
        })
        .collect();
    out.ranking_flagged = flagged;
    Ok(out)
}

/// Sidecar record persisting validation and ranking per item.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RankingRecord {
    pub corpus_version: String,
    pub item_id: String,
    pub evaluator_id: String,
    pub validated: Validation,
    pub validation_trials: Vec<Option<bool>>,
    pub important_words: Vec<ImportantWord>,
    #[serde(default)]
    pub flagged: bool,
}

pub fn save_rankings(path: &Path, records: &[RankingRecord]) -> Result<()> {
    let mut f = Vec::new();
    for r in records {
        serde_json::to_writer(&mut f, r).expect("record serializes");
        f.push(b'\n');
    }
    let mut file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&f).map_err(|e| Error::io(path, e))
}

/// Applies sidecar records matching this corpus and evaluator.
pub fn apply_rankings(corpus: &mut Corpus, path: &Path, evaluator_id: &str) -> Result<usize> {
    let src = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let version = corpus.content_version();
    let mut applied = 0;
    for (i, line) in src.lines().enumerate() {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let rec: RankingRecord = serde_json::from_str(line).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            line: i + 1,
            message: e.to_string(),
        })?;
        if rec.corpus_version != version || rec.evaluator_id != evaluator_id {
            continue;
        }
        if let Some(item) = corpus.items.iter_mut().find(|it| it.id == rec.item_id) {
            item.validated = rec.validated;
            item.important_words = rec.important_words;
            item.ranking_flagged = rec.flagged;
            item.check_ranking()?;
            applied += 1;
        }
    }
    Ok(applied)
}

#[cfg(test)]
mod tests {
    use super::*;

    const TEN: &str = "one two three four five six seven eight nine ten";

    #[test]
    fn empty_file_gives_empty_corpus() {
        let c = parse_corpus("", Path::new("x")).unwrap();
        assert!(c.is_empty());
    }

    #[test]
    fn duplicate_id_is_named() {
        let line = format!(r#"{{"id":"a","text":"{TEN}","label":"violating","topic":"t"}}"#);
        let src = format!("{line}\n{line}\n");
        match parse_corpus(&src, Path::new("x")) {
            Err(Error::DuplicateId(id)) => assert_eq!(id, "a"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn malformed_line_reports_line_number() {
        let line = format!(r#"{{"id":"a","text":"{TEN}","label":"violating","topic":"t"}}"#);
        let src = format!("{line}\n\n{{not json\n");
        match parse_corpus(&src, Path::new("c.jsonl")) {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn short_sentence_is_a_warning_not_an_error() {
        let src = r#"{"id":"a","text":"too short","label":"benign","topic":"t"}"#;
        let c = parse_corpus(src, Path::new("x")).unwrap();
        assert_eq!(c.items[0].warnings.len(), 1);
        assert_eq!(c.items[0].validated, Validation::Unchecked);
    }

    #[test]
    fn votes_unanimous_sorted_by_position() {
        let t = vec![vec![11, 2, 9, 4, 7, 5]; 3];
        let (r, flagged) = rank_votes(&t, &[]);
        assert_eq!(r, vec![2, 4, 5, 7, 9, 11]);
        assert!(!flagged);
    }

    #[test]
    fn votes_majority_then_position() {
        // a..g = 0..6
        let t = vec![
            vec![0, 1, 2, 3, 4, 5],
            vec![0, 1, 2, 3, 4, 6],
            vec![0, 1, 2, 3, 4, 5],
        ];
        let (r, _) = rank_votes(&t, &[]);
        assert_eq!(r, vec![0, 1, 2, 3, 4, 5]);
    }

    #[test]
    fn votes_pad_from_content_words_and_flag() {
        let t = vec![vec![3, 1], vec![3], vec![]];
        let (r, flagged) = rank_votes(&t, &[0, 1, 2, 3, 4, 5, 6]);
        assert_eq!(r, vec![3, 1, 0, 2, 4, 5]);
        assert!(flagged);
    }

    #[test]
    fn resolve_takes_first_unmatched_occurrence() {
        let pos = resolve_positions("rain and more rain, then Rain", &[
            "rain".into(),
            "RAIN".into(),
            "bogus".into(),
            "rain".into(),
        ]);
        assert_eq!(pos, vec![0, 3, 5]);
    }

    #[test]
    fn version_tracks_text_and_ranking() {
        let mut c = Corpus::new(vec![BaseItem::new("a", TEN, Label::Violating, "t")]).unwrap();
        let v0 = c.version();
        let cv0 = c.content_version();
        c.items[0].important_words.push(ImportantWord {
            token_index: 1,
            surface: "two".into(),
        });
        assert_ne!(c.version(), v0);
        assert_eq!(c.content_version(), cv0);
        c.items[0].text.push_str(" eleven");
        assert_ne!(c.content_version(), cv0);
    }

    #[test]
    fn save_load_keeps_version() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.jsonl");
        let c = Corpus::new(vec![
            BaseItem::new("a", TEN, Label::Violating, "t"),
            BaseItem::new("b", "x y", Label::Benign, "u"),
        ])
        .unwrap();
        c.save(&p).unwrap();
        assert_eq!(load_corpus(&p).unwrap().version(), c.version());
    }
}
