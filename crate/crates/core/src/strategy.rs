use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

/// The seven modulation families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// Altered spelling producing a non-word.
    UnknownSpelling,
    /// Altered spelling producing an existing word.
    NewWordSpelling,
    Abbreviation,
    /// Emoticons and emoji.
    Pictorial,
    Paraphrase,
    /// Repurposed words.
    CodeWord,
    Phonetic,
}

impl Strategy {
    pub const ALL: [Strategy; 7] = [
        Strategy::UnknownSpelling,
        Strategy::NewWordSpelling,
        Strategy::Abbreviation,
        Strategy::Pictorial,
        Strategy::Paraphrase,
        Strategy::CodeWord,
        Strategy::Phonetic,
    ];

    pub fn key(self) -> &'static str {
        match self {
            Strategy::UnknownSpelling => "unknown_spelling",
            Strategy::NewWordSpelling => "new_word_spelling",
            Strategy::Abbreviation => "abbreviation",
            Strategy::Pictorial => "pictorial",
            Strategy::Paraphrase => "paraphrase",
            Strategy::CodeWord => "code_word",
            Strategy::Phonetic => "phonetic",
        }
    }

    /// Row label used in rendered tables.
    pub fn label(self) -> &'static str {
        match self {
            Strategy::UnknownSpelling => "Unkn. word",
            Strategy::NewWordSpelling => "New word",
            Strategy::Abbreviation => "Abbreviations",
            Strategy::Pictorial => "Emoticons",
            Strategy::Paraphrase => "Paraphrasing",
            Strategy::CodeWord => "Code",
            Strategy::Phonetic => "Phonetic",
        }
    }

    /// Strategies that may fall back to rewrite rules for unseen words.
    pub fn rule_fallback_by_default(self) -> bool {
        matches!(self, Strategy::UnknownSpelling | Strategy::Phonetic)
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.key())
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.key() == s)
            .ok_or_else(|| format!("unknown strategy `{s}`"))
    }
}
