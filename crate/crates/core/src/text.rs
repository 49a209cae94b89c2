//! Whitespace tokenization with edge-punctuation stripping.

use std::ops::Range;

pub const TOKENIZER_ID: &str = "ws-strip-punct-v1";

/// One whitespace-delimited token. `span` covers the stripped surface in the
/// original string; `raw` covers the whole whitespace-delimited chunk.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token<'a> {
    pub index: usize,
    pub surface: &'a str,
    pub span: Range<usize>,
    pub raw: Range<usize>,
}

fn is_edge_punct(c: char) -> bool {
    c.is_ascii_punctuation()
        || matches!(
            c,
            '\u{2018}' | '\u{2019}' | '\u{201C}' | '\u{201D}' | '\u{2026}' | '\u{2013}' | '\u{2014}'
        )
}

pub fn tokenize(text: &str) -> Vec<Token<'_>> {
    fn push<'a>(text: &'a str, s: usize, e: usize, out: &mut Vec<Token<'a>>) {
        let chunk = &text[s..e];
        let lead = chunk.len() - chunk.trim_start_matches(is_edge_punct).len();
        let core = chunk.trim_start_matches(is_edge_punct).trim_end_matches(is_edge_punct);
        let span = if core.is_empty() {
            s..s
        } else {
            (s + lead)..(s + lead + core.len())
        };
        out.push(Token {
            index: out.len(),
            surface: &text[span.clone()],
            span,
            raw: s..e,
        });
    }
    let mut out = Vec::new();
    let mut start = None;
    for (i, c) in text.char_indices() {
        if c.is_whitespace() {
            if let Some(s) = start.take() {
                push(text, s, i, &mut out);
            }
        } else if start.is_none() {
            start = Some(i);
        }
    }
    if let Some(s) = start {
        push(text, s, text.len(), &mut out);
    }
    out
}

pub fn casefold(s: &str) -> String {
    s.to_lowercase()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn strips_edge_punctuation() {
        let toks = tokenize("  \"Heavy rain,\" causes floods.");
        let surfaces: Vec<_> = toks.iter().map(|t| t.surface).collect();
        assert_eq!(surfaces, ["Heavy", "rain", "causes", "floods"]);
        assert_eq!(&"  \"Heavy rain,\" causes floods."[toks[1].span.clone()], "rain");
    }

    #[test]
    fn inner_punctuation_kept() {
        let toks = tokenize("r@1n don't");
        assert_eq!(toks[0].surface, "r@1n");
        assert_eq!(toks[1].surface, "don't");
    }

    #[test]
    fn empty_and_punct_only() {
        assert!(tokenize("").is_empty());
        let toks = tokenize("a -- b");
        assert_eq!(toks.len(), 3);
        assert_eq!(toks[1].surface, "");
    }
}
