//! Substitution lexicons: per-strategy word dictionaries and ordered rewrite
//! rules.
//!
//! The on-disk format is TOML with one table per strategy:
//!
//! ```toml
//! # version: <hash>
//! [unknown_spelling]
//! rules = ["a -> @", "e -> 3"]
//!
//! [phonetic]
//! rules = ["ck -> k", "c -> k", "d$ -> t"]
//!
//! [code_word.words]
//! rain = "confetti"
//! storm = { to = "party", audited = false }
//! ```
//!
//! A leading `^` anchors a rule pattern to the start of the word and a
//! trailing `$` to its end. The optional `# version:` header is checked
//! against the content hash on load.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Deserialize;

use crate::error::{Error, Result};
use crate::hashing::FieldHasher;
use crate::strategy::Strategy;
use crate::text::casefold;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Anchor {
    Anywhere,
    Start,
    End,
}

/// One `pattern -> replacement` rewrite.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Rule {
    pub pattern: String,
    pub replacement: String,
    pub anchor: Anchor,
}

impl FromStr for Rule {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        let (lhs, rhs) = s
            .split_once("->")
            .ok_or_else(|| format!("rule `{s}` is not of the form `pattern -> replacement`"))?;
        let lhs = lhs.trim();
        let replacement = rhs.trim().to_string();
        let (pattern, anchor) = if let Some(p) = lhs.strip_prefix('^') {
            (p, Anchor::Start)
        } else if let Some(p) = lhs.strip_suffix('$') {
            (p, Anchor::End)
        } else {
            (lhs, Anchor::Anywhere)
        };
        if pattern.is_empty() {
            return Err(format!("rule `{s}` has an empty pattern"));
        }
        Ok(Rule {
            pattern: casefold(pattern),
            replacement,
            anchor,
        })
    }
}

impl fmt::Display for Rule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.anchor {
            Anchor::Anywhere => write!(f, "{} -> {}", self.pattern, self.replacement),
            Anchor::Start => write!(f, "^{} -> {}", self.pattern, self.replacement),
            Anchor::End => write!(f, "{}$ -> {}", self.pattern, self.replacement),
        }
    }
}

/// A located rule match inside a word, in char offsets.
#[derive(Debug, Clone, Copy)]
struct Match {
    start: usize,
    len: usize,
    rule: usize,
}

fn matches_at(word: &[char], at: usize, rule: &Rule) -> bool {
    let pat: Vec<char> = rule.pattern.chars().collect();
    if at + pat.len() > word.len() {
        return false;
    }
    let anchored = match rule.anchor {
        Anchor::Anywhere => true,
        Anchor::Start => at == 0,
        Anchor::End => at + pat.len() == word.len(),
    };
    anchored
        && word[at..at + pat.len()]
            .iter()
            .zip(&pat)
            .all(|(w, p)| w.to_lowercase().eq(p.to_lowercase()))
}

/// Left-to-right scan; at each position the first matching rule wins and
/// consumes its pattern.
fn scan(word: &[char], rules: &[Rule]) -> Vec<Match> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < word.len() {
        match rules.iter().position(|r| matches_at(word, i, r)) {
            Some(r) => {
                let len = rules[r].pattern.chars().count();
                out.push(Match { start: i, len, rule: r });
                i += len;
            }
            None => i += 1,
        }
    }
    out
}

fn match_case(segment: &[char], replacement: &str) -> String {
    if segment.first().is_some_and(|c| c.is_uppercase()) {
        let mut chars = replacement.chars();
        match chars.next() {
            Some(first) => first.to_uppercase().chain(chars).collect(),
            None => String::new(),
        }
    } else {
        replacement.to_string()
    }
}

fn apply(word: &[char], rules: &[Rule], chosen: &[Match]) -> String {
    let mut out = String::new();
    let mut i = 0;
    for m in chosen {
        out.extend(&word[i..m.start]);
        out.push_str(&match_case(
            &word[m.start..m.start + m.len],
            &rules[m.rule].replacement,
        ));
        i = m.start + m.len;
    }
    out.extend(&word[i..]);
    out
}

/// Applies every rule match.
pub fn rewrite_all(word: &str, rules: &[Rule]) -> String {
    let chars: Vec<char> = word.chars().collect();
    let ms = scan(&chars, rules);
    apply(&chars, rules, &ms)
}

/// Applies a seeded random subset of at most `ceil(len * fraction)` matches.
/// Words with no match get their final letter doubled so the result is
/// always a non-word variant.
pub fn rewrite_sampled(word: &str, rules: &[Rule], fraction: f64, seed: u64) -> String {
    let chars: Vec<char> = word.chars().collect();
    let ms = scan(&chars, rules);
    if ms.is_empty() {
        return match chars.iter().rposition(|c| c.is_alphabetic()) {
            Some(p) => {
                let mut out: String = chars[..=p].iter().collect();
                out.push(chars[p]);
                out.extend(&chars[p + 1..]);
                out
            }
            None => word.to_string(),
        };
    }
    let limit = ((chars.len() as f64 * fraction).ceil() as usize).clamp(1, ms.len());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut picks = index::sample(&mut rng, ms.len(), limit).into_vec();
    picks.sort_unstable();
    let chosen: Vec<Match> = picks.into_iter().map(|i| ms[i]).collect();
    apply(&chars, rules, &chosen)
}

/// Enumerates strings that `rules` could have rewritten into `target`,
/// including `target` itself, capped at `limit` candidates. Candidates with
/// more reversions come first.
pub fn preimages(target: &str, rules: &[Rule], limit: usize) -> Vec<String> {
    let chars: Vec<char> = casefold(target).chars().collect();
    let mut out = Vec::new();
    let mut buf = String::new();
    fn walk(
        chars: &[char],
        i: usize,
        rules: &[Rule],
        buf: &mut String,
        out: &mut Vec<(usize, String)>,
        reverted: usize,
        limit: usize,
    ) {
        if out.len() >= limit {
            return;
        }
        if i == chars.len() {
            out.push((reverted, buf.clone()));
            return;
        }
        for rule in rules {
            let rep: Vec<char> = casefold(&rule.replacement).chars().collect();
            if rep.is_empty() || i + rep.len() > chars.len() || chars[i..i + rep.len()] != rep[..] {
                continue;
            }
            let ok = match rule.anchor {
                Anchor::Anywhere => true,
                Anchor::Start => i == 0,
                Anchor::End => i + rep.len() == chars.len(),
            };
            if ok {
                let mark = buf.len();
                buf.push_str(&rule.pattern);
                walk(chars, i + rep.len(), rules, buf, out, reverted + 1, limit);
                buf.truncate(mark);
            }
        }
        let mark = buf.len();
        buf.push(chars[i]);
        walk(chars, i + 1, rules, buf, out, reverted, limit);
        buf.truncate(mark);
    }
    walk(&chars, 0, rules, &mut buf, &mut out, 0, limit);
    out.sort_by(|a, b| b.0.cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
    let mut seen = std::collections::BTreeSet::new();
    out.into_iter()
        .filter_map(|(_, s)| seen.insert(s.clone()).then_some(s))
        .collect()
}

pub fn default_unknown_spelling_rules() -> Vec<Rule> {
    ["a -> @", "e -> 3", "i -> 1", "o -> 0", "s -> 5"]
        .iter()
        .map(|r| r.parse().unwrap())
        .collect()
}

pub fn default_phonetic_rules() -> Vec<Rule> {
    ["ck -> k", "ph -> f", "qu -> kw", "c -> k", "d$ -> t"]
        .iter()
        .map(|r| r.parse().unwrap())
        .collect()
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Entry {
    pub replacement: String,
    /// Whether a human confirmed the entry preserves meaning.
    pub audited: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Section {
    pub words: BTreeMap<String, Entry>,
    pub rules: Vec<Rule>,
    pub rule_fallback: bool,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawEntry {
    Plain(String),
    Full {
        to: String,
        #[serde(default = "yes")]
        audited: bool,
    },
}

fn yes() -> bool {
    true
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct RawSection {
    #[serde(default)]
    words: BTreeMap<String, RawEntry>,
    #[serde(default)]
    rules: Option<Vec<String>>,
    #[serde(default)]
    fallback: Option<bool>,
}

// Unknown top-level tables are rejected when their name fails to parse as a
// strategy; `deny_unknown_fields` does not combine with `flatten`.
#[derive(Deserialize)]
struct RawLexicon {
    #[serde(default)]
    unknown_spelling_fraction: Option<f64>,
    #[serde(flatten)]
    sections: BTreeMap<String, RawSection>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Lexicon {
    sections: BTreeMap<Strategy, Section>,
    /// Fraction of a word's characters the unknown-spelling rewrite may touch.
    pub unknown_spelling_fraction: f64,
    version: String,
}

const VERSION_HEADER: &str = "# version:";

impl Lexicon {
    pub fn parse(source: &str) -> Result<Self> {
        let parse_err = |line: usize, message: String| Error::Parse {
            path: "<lexicon>".into(),
            line,
            message,
        };
        let raw: RawLexicon =
            toml::from_str(source).map_err(|e| parse_err(e.span().map_or(0, |s| line_of(source, s.start)), e.message().to_string()))?;
        let mut sections = BTreeMap::new();
        for (name, sec) in raw.sections {
            let strategy: Strategy = name.parse().map_err(|e| parse_err(0, e))?;
            let rules = match sec.rules {
                Some(rs) => rs
                    .iter()
                    .map(|r| r.parse::<Rule>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|e| parse_err(0, e))?,
                None => match strategy {
                    Strategy::UnknownSpelling => default_unknown_spelling_rules(),
                    Strategy::Phonetic => default_phonetic_rules(),
                    _ => Vec::new(),
                },
            };
            let words = sec
                .words
                .into_iter()
                .map(|(k, v)| {
                    let entry = match v {
                        RawEntry::Plain(to) => Entry {
                            replacement: to,
                            audited: true,
                        },
                        RawEntry::Full { to, audited } => Entry {
                            replacement: to,
                            audited,
                        },
                    };
                    (casefold(&k), entry)
                })
                .collect();
            let rule_fallback = sec
                .fallback
                .unwrap_or(strategy.rule_fallback_by_default() || !rules.is_empty());
            sections.insert(
                strategy,
                Section {
                    words,
                    rules,
                    rule_fallback,
                },
            );
        }
        for s in Strategy::ALL {
            if !sections.contains_key(&s) {
                return Err(Error::MissingSection(s));
            }
        }
        let mut lex = Lexicon {
            sections,
            unknown_spelling_fraction: raw.unknown_spelling_fraction.unwrap_or(0.5),
            version: String::new(),
        };
        lex.version = lex.compute_version();
        if let Some(first) = source.lines().next() {
            if let Some(declared) = first.strip_prefix(VERSION_HEADER) {
                let declared = declared.trim();
                if declared != lex.version {
                    return Err(Error::VersionMismatch(format!(
                        "lexicon header declares {declared}, content hashes to {}",
                        lex.version
                    )));
                }
            }
        }
        Ok(lex)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let src = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&src).map_err(|e| match e {
            Error::Parse { line, message, .. } => Error::Parse {
                path: path.to_path_buf(),
                line,
                message,
            },
            other => other,
        })
    }

    /// Built-in lexicon with the default rule sets and empty dictionaries.
    pub fn rules_only() -> Self {
        let mut sections = BTreeMap::new();
        for s in Strategy::ALL {
            let rules = match s {
                Strategy::UnknownSpelling => default_unknown_spelling_rules(),
                Strategy::Phonetic => default_phonetic_rules(),
                _ => Vec::new(),
            };
            sections.insert(
                s,
                Section {
                    words: BTreeMap::new(),
                    rule_fallback: s.rule_fallback_by_default(),
                    rules,
                },
            );
        }
        let mut lex = Lexicon {
            sections,
            unknown_spelling_fraction: 0.5,
            version: String::new(),
        };
        lex.version = lex.compute_version();
        lex
    }

    pub fn with_word(mut self, strategy: Strategy, word: &str, replacement: &str) -> Self {
        self.sections.get_mut(&strategy).unwrap().words.insert(
            casefold(word),
            Entry {
                replacement: replacement.to_string(),
                audited: true,
            },
        );
        self.version = self.compute_version();
        self
    }

    fn compute_version(&self) -> String {
        let mut h = FieldHasher::new("lexicon-v1");
        h.num(self.unknown_spelling_fraction.to_bits());
        for (s, sec) in &self.sections {
            h.field(s.key()).num(sec.rule_fallback as u64);
            for r in &sec.rules {
                h.field(r.to_string());
            }
            h.field("|");
            for (w, e) in &sec.words {
                h.field(w).field(&e.replacement).num(e.audited as u64);
            }
        }
        h.short()
    }

    pub fn version(&self) -> &str {
        &self.version
    }

    pub fn section(&self, strategy: Strategy) -> &Section {
        &self.sections[&strategy]
    }

    /// Replacement for `word` under `strategy`, or `None` when uncovered.
    pub fn substitute(&self, strategy: Strategy, word: &str, seed: u64) -> Option<String> {
        let sec = self.section(strategy);
        if let Some(e) = sec.words.get(&casefold(word)) {
            let chars: Vec<char> = word.chars().collect();
            return Some(match_case(&chars, &e.replacement));
        }
        if !sec.rule_fallback || sec.rules.is_empty() {
            return None;
        }
        let out = match strategy {
            Strategy::UnknownSpelling => {
                rewrite_sampled(word, &sec.rules, self.unknown_spelling_fraction, seed)
            }
            _ => rewrite_all(word, &sec.rules),
        };
        (out != word).then_some(out)
    }

    /// Dictionary originals whose replacement equals `replacement`
    /// (case-folded), sorted.
    pub fn inverse(&self, strategy: Strategy, replacement: &str) -> Vec<&str> {
        let target = casefold(replacement);
        self.section(strategy)
            .words
            .iter()
            .filter(|(_, e)| casefold(&e.replacement) == target)
            .map(|(w, _)| w.as_str())
            .collect()
    }

    /// Renders the lexicon back to its TOML form, with a version header.
    pub fn to_toml(&self) -> String {
        let mut out = format!("{VERSION_HEADER} {}\n", self.version);
        out.push_str(&format!(
            "unknown_spelling_fraction = {:?}\n",
            self.unknown_spelling_fraction
        ));
        for (s, sec) in &self.sections {
            out.push_str(&format!("\n[{}]\n", s.key()));
            out.push_str(&format!("fallback = {}\n", sec.rule_fallback));
            let rules: Vec<String> = sec.rules.iter().map(|r| toml_str(&r.to_string())).collect();
            out.push_str(&format!("rules = [{}]\n", rules.join(", ")));
            if !sec.words.is_empty() {
                out.push_str(&format!("\n[{}.words]\n", s.key()));
                for (w, e) in &sec.words {
                    if e.audited {
                        out.push_str(&format!("{} = {}\n", toml_str(w), toml_str(&e.replacement)));
                    } else {
                        out.push_str(&format!(
                            "{} = {{ to = {}, audited = false }}\n",
                            toml_str(w),
                            toml_str(&e.replacement)
                        ));
                    }
                }
            }
        }
        out
    }
}

fn toml_str(s: &str) -> String {
    toml::Value::String(s.to_string()).to_string()
}

fn line_of(src: &str, byte: usize) -> usize {
    src[..byte.min(src.len())].matches('\n').count() + 1
}
