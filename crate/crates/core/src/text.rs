//! Text primitives shared by the retriever, the containment judge and the
//! claim segmenter.
//!
//! Tokenization: Unicode-aware lowercasing, then split on every character that
//! is not alphanumeric. No stemming, no stopword removal at index time.
//!
//! Sentence segmentation: a sentence ends at `.`, `!` or `?` when the
//! terminator (plus any closing quotes/brackets and trailing `[n]` citation
//! markers) is followed by whitespace or end of input, unless the word ending
//! in `.` is a known abbreviation ([`ABBREVIATIONS`]) or a single letter
//! initial.

use std::sync::LazyLock;

use regex::Regex;

/// Words ignored by the containment judge when deciding whether a hypothesis
/// is covered by a premise.
pub const STOPWORDS: &[&str] = &[
    "a", "an", "the", "and", "or", "but", "nor", "of", "to", "in", "on", "at", "by", "for",
    "with", "from", "as", "into", "about", "is", "are", "was", "were", "be", "been", "being",
    "am", "it", "its", "this", "that", "these", "those", "there", "their", "they", "them", "he",
    "she", "his", "her", "has", "have", "had", "do", "does", "did", "so", "than", "then",
    "also", "such", "which", "who", "whom", "whose", "what", "can", "could", "may", "might",
    "will", "would", "shall", "should", "very",
];

/// Lowercased abbreviations (without the trailing period) that do not end a
/// sentence.
pub const ABBREVIATIONS: &[&str] = &[
    "mr", "mrs", "ms", "dr", "prof", "sr", "jr", "st", "vs", "etc", "e.g", "i.e", "u.s",
    "u.k", "no", "inc", "ltd", "co", "corp", "jan", "feb", "mar", "apr", "jun", "jul", "aug",
    "sep", "sept", "oct", "nov", "dec", "mt", "ft", "approx", "dept", "est", "fig", "gen",
    "gov", "lt", "col", "sgt", "capt", "rev", "vol",
];

static MARKER: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\[(\d+)\]").unwrap());
static MARKER_WITH_SPACE: LazyLock<Regex> =
    LazyLock::new(|| Regex::new(r"[ \t]*\[\d+\]").unwrap());

/// Lowercase and split on non-alphanumeric characters.
pub fn tokenize(text: &str) -> Vec<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| !t.is_empty())
        .map(|t| t.to_lowercase())
        .collect()
}

pub fn is_stopword(token: &str) -> bool {
    STOPWORDS.contains(&token)
}

/// Tokens that carry content for the containment judge.
pub fn content_tokens(text: &str) -> Vec<String> {
    tokenize(text).into_iter().filter(|t| !is_stopword(t)).collect()
}

/// Whitespace token count, used by the mock backends for token accounting.
pub fn whitespace_tokens(text: &str) -> u64 {
    text.split_whitespace().count() as u64
}

/// Bracketed integer markers in order of appearance. Markers whose number does
/// not fit in `usize` are skipped.
pub fn citation_markers(text: &str) -> Vec<usize> {
    MARKER
        .captures_iter(text)
        .filter_map(|c| c[1].parse().ok())
        .collect()
}

pub fn has_citation_markers(text: &str) -> bool {
    MARKER.is_match(text)
}

/// Remove `[n]` markers together with the blanks in front of them.
pub fn strip_citation_markers(text: &str) -> String {
    MARKER_WITH_SPACE.replace_all(text, "").into_owned()
}

fn is_terminator(c: char) -> bool {
    matches!(c, '.' | '!' | '?')
}

fn is_closer(c: char) -> bool {
    matches!(c, '"' | '\'' | ')' | ']' | '\u{201d}' | '\u{2019}')
}

/// The word immediately before byte offset `end` (exclusive), lowercased.
fn word_before(text: &str, end: usize) -> String {
    let head = &text[..end];
    let start = head
        .char_indices()
        .rev()
        .find(|(_, c)| c.is_whitespace() || matches!(c, '(' | '"' | '\u{201c}'))
        .map(|(i, c)| i + c.len_utf8())
        .unwrap_or(0);
    head[start..].to_lowercase()
}

fn is_abbreviation(word: &str) -> bool {
    let mut chars = word.chars();
    if let (Some(c), None) = (chars.next(), chars.next()) {
        // single-letter initial such as "J."
        return c.is_alphabetic();
    }
    ABBREVIATIONS.contains(&word)
}

/// Split text into sentences. Citation markers that directly follow a
/// terminator stay with the sentence they follow.
pub fn split_sentences(text: &str) -> Vec<String> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut sentences = Vec::new();
    let mut start = 0usize;
    let mut i = 0usize;
    while i < chars.len() {
        let (pos, c) = chars[i];
        if !is_terminator(c) {
            i += 1;
            continue;
        }
        // consume runs like "?!" or "..."
        let mut j = i + 1;
        while j < chars.len() && is_terminator(chars[j].1) {
            j += 1;
        }
        while j < chars.len() && is_closer(chars[j].1) && chars[j].1 != ']' {
            j += 1;
        }
        // trailing citation markers: "[1][2]"
        loop {
            let rest_at = chars.get(j).map(|(p, _)| *p).unwrap_or(text.len());
            let rest = &text[rest_at..];
            match MARKER.find(rest) {
                Some(m) if m.start() == 0 => {
                    let end = rest_at + m.end();
                    while j < chars.len() && chars[j].0 < end {
                        j += 1;
                    }
                }
                _ => break,
            }
        }
        let boundary = j >= chars.len() || chars[j].1.is_whitespace();
        let abbreviation = c == '.' && j == i + 1 && is_abbreviation(&word_before(text, pos));
        if boundary && !abbreviation {
            let end = chars.get(j).map(|(p, _)| *p).unwrap_or(text.len());
            let sentence = text[start..end].trim();
            if !sentence.is_empty() {
                sentences.push(sentence.to_string());
            }
            start = end;
        }
        i = j.max(i + 1);
    }
    let tail = text[start..].trim();
    if !tail.is_empty() {
        sentences.push(tail.to_string());
    }
    sentences
}
