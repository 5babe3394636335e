//! Turns discussion text into phenomenon objects: phase-tagged term
//! occurrences bound to the locations that follow them in their sentence.

use std::collections::HashSet;
use std::fmt;
use std::ops::Range;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::hierarchy::LocationHierarchy;
use crate::phrase::{normalize_phrase, PhraseMatcher};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ConfigError {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("`{0}` is listed as both a positive and a negative term")]
    ConflictingPhase(String),
    #[error("term `{0}` is listed twice")]
    DuplicateTerm(String),
    #[error("exclusion pattern `{0}` does not strictly contain any term")]
    DanglingExclusion(String),
    #[error("phenomenon `{0}` declares no terms")]
    NoTerms(String),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ExtractionError {
    #[error("station `{0}` is not a node of the hierarchy")]
    UnknownStation(String),
}

/// Positive (H) or negative (L) phase of a phenomenon.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Phase {
    #[serde(rename = "H")]
    Positive,
    #[serde(rename = "L")]
    Negative,
}

impl Phase {
    pub fn code(self) -> &'static str {
        match self {
            Phase::Positive => "H",
            Phase::Negative => "L",
        }
    }

    pub fn opposite(self) -> Phase {
        match self {
            Phase::Positive => Phase::Negative,
            Phase::Negative => Phase::Positive,
        }
    }
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Predicted,
    Reference,
}

/// Term lists for one phenomenon.
#[derive(Debug, Clone)]
pub struct PhenomenonConfig {
    pub name: String,
    pub positive_terms: Vec<String>,
    pub negative_terms: Vec<String>,
    pub exclusion_patterns: Vec<String>,
    terms: PhraseMatcher<(Phase, usize)>,
    exclusions: PhraseMatcher<()>,
}

impl PhenomenonConfig {
    pub fn new(
        name: impl Into<String>,
        positive_terms: Vec<String>,
        negative_terms: Vec<String>,
        exclusion_patterns: Vec<String>,
    ) -> Result<Self, ConfigError> {
        let name = name.into();
        if positive_terms.is_empty() && negative_terms.is_empty() {
            return Err(ConfigError::NoTerms(name));
        }
        let positive: HashSet<String> = positive_terms.iter().map(|t| normalize_phrase(t)).collect();
        if let Some(t) = negative_terms
            .iter()
            .find(|t| positive.contains(&normalize_phrase(t)))
        {
            return Err(ConfigError::ConflictingPhase(t.clone()));
        }

        let mut terms = PhraseMatcher::new(true);
        let tagged = positive_terms
            .iter()
            .map(|t| (t, Phase::Positive))
            .chain(negative_terms.iter().map(|t| (t, Phase::Negative)));
        for (slot, (term, phase)) in tagged.enumerate() {
            if terms.insert(term, (phase, slot)).is_err() {
                return Err(ConfigError::DuplicateTerm(term.clone()));
            }
        }

        let all_terms: Vec<String> = positive_terms
            .iter()
            .chain(&negative_terms)
            .map(|t| normalize_phrase(t))
            .collect();
        let mut exclusions = PhraseMatcher::new(true);
        for pattern in &exclusion_patterns {
            let p = normalize_phrase(pattern);
            if !all_terms.iter().any(|t| p.len() > t.len() && p.contains(t.as_str())) {
                return Err(ConfigError::DanglingExclusion(pattern.clone()));
            }
            let _ = exclusions.insert(pattern, ());
        }

        Ok(Self {
            name,
            positive_terms,
            negative_terms,
            exclusion_patterns,
            terms,
            exclusions,
        })
    }

    /// Parses `H|phrase`, `L|phrase` and `exclude|phrase` lines.
    pub fn parse(name: impl Into<String>, text: &str) -> Result<Self, ConfigError> {
        let (mut pos, mut neg, mut excl) = (Vec::new(), Vec::new(), Vec::new());
        for (n, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let parse_err = |message: String| ConfigError::Parse { line: n + 1, message };
            let (kind, phrase) = line
                .split_once('|')
                .ok_or_else(|| parse_err("expected `kind|phrase`".into()))?;
            let phrase = phrase.trim();
            if phrase.is_empty() {
                return Err(parse_err("empty phrase".into()));
            }
            match kind.trim() {
                "H" => pos.push(phrase.to_string()),
                "L" => neg.push(phrase.to_string()),
                "exclude" => excl.push(phrase.to_string()),
                other => return Err(parse_err(format!("unknown line kind `{other}`"))),
            }
        }
        Self::new(name, pos, neg, excl)
    }

    /// Phase of a configured term, if `term` is one.
    pub fn phase_of(&self, term: &str) -> Option<Phase> {
        self.terms.get(term).map(|&(p, _)| p)
    }

    fn canonical_term(&self, slot: usize) -> &str {
        let n = self.positive_terms.len();
        if slot < n {
            &self.positive_terms[slot]
        } else {
            &self.negative_terms[slot - n]
        }
    }
}

/// One detected phenomenon mention.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PhenomenonObject {
    pub phase: Phase,
    /// Configured term that matched (canonical spelling).
    pub term: String,
    /// Bound location node ids, in order of first mention; never empty.
    pub locations: Vec<String>,
    pub sentence_index: usize,
    /// Byte range of the matched surface text.
    pub char_span: (usize, usize),
    pub source: Source,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Sentence<'a> {
    pub text: &'a str,
    pub range: Range<usize>,
}

/// Tokens that end in a period without ending the sentence.
const ABBREVIATIONS: &[&str] = &[
    "mph", "kt", "kts", "ft", "st", "mt", "vs", "approx", "etc", "deg", "ne", "nw", "se", "sw",
    "nne", "ene", "ese", "sse", "ssw", "wsw", "wnw", "nnw",
];

fn is_closer(c: char) -> bool {
    matches!(c, '"' | '\'' | ')' | ']' | '!' | '?')
}

/// Splits discussion text into sentences.
///
/// Boundaries are `!`, `?`, runs of two or more periods, a single period
/// that is not part of a decimal number, initial, or known abbreviation,
/// and blank lines. Single newlines are ordinary whitespace, since
/// discussions are hard-wrapped. Pieces with no alphanumeric content are
/// folded into the following sentence.
pub fn segment_sentences(text: &str) -> Vec<Sentence<'_>> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let byte_at = |k: usize| chars.get(k).map_or(text.len(), |&(b, _)| b);
    let skip_closers = |mut k: usize| {
        while k < chars.len() && is_closer(chars[k].1) {
            k += 1;
        }
        k
    };

    let mut cuts = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i].1;
        match c {
            '!' | '?' => {
                let k = skip_closers(i + 1);
                cuts.push(byte_at(k));
                i = k;
                continue;
            }
            '.' => {
                let mut run = i;
                while run < chars.len() && chars[run].1 == '.' {
                    run += 1;
                }
                if run - i >= 2 {
                    let k = skip_closers(run);
                    cuts.push(byte_at(k));
                    i = k;
                    continue;
                }
                if !period_continues(&chars, i) {
                    let k = skip_closers(i + 1);
                    cuts.push(byte_at(k));
                    i = k;
                    continue;
                }
            }
            '\n' => {
                let mut k = i + 1;
                while k < chars.len() && matches!(chars[k].1, ' ' | '\t' | '\r') {
                    k += 1;
                }
                if k < chars.len() && chars[k].1 == '\n' {
                    cuts.push(byte_at(i));
                    i = k;
                    continue;
                }
            }
            _ => {}
        }
        i += 1;
    }
    cuts.push(text.len());

    let mut pieces: Vec<Range<usize>> = Vec::new();
    let mut start = 0;
    for cut in cuts {
        if cut <= start {
            continue;
        }
        let piece = &text[start..cut];
        let lead = piece.len() - piece.trim_start().len();
        let trimmed = piece.trim();
        if !trimmed.is_empty() {
            pieces.push(start + lead..start + lead + trimmed.len());
        }
        start = cut;
    }

    // Fold punctuation-only pieces (section markers, `&&`, `$$`, stray
    // ellipses) into their neighbor so every non-space byte stays covered.
    let mut merged: Vec<Range<usize>> = Vec::with_capacity(pieces.len());
    let mut pending: Option<usize> = None;
    for r in pieces {
        let has_word = text[r.clone()].chars().any(char::is_alphanumeric);
        if !has_word {
            pending.get_or_insert(r.start);
            continue;
        }
        let start = pending.take().unwrap_or(r.start);
        merged.push(start..r.end);
    }
    if let Some(p) = pending {
        match merged.last_mut() {
            Some(last) => last.end = text[..].trim_end().len(),
            None => merged.push(p..text.trim_end().len()),
        }
    }

    merged
        .into_iter()
        .map(|range| Sentence {
            text: &text[range.clone()],
            range,
        })
        .collect()
}

/// Whether the single period at char index `i` sits inside a sentence.
fn period_continues(chars: &[(usize, char)], i: usize) -> bool {
    let prev = i.checked_sub(1).map(|k| chars[k].1);
    let next = chars.get(i + 1).map(|&(_, c)| c);
    if let (Some(p), Some(n)) = (prev, next) {
        if p.is_ascii_digit() && n.is_ascii_digit() {
            return true;
        }
    }
    if next.is_some_and(char::is_alphanumeric) {
        return true;
    }
    let mut k = i;
    while k > 0 && chars[k - 1].1.is_alphanumeric() {
        k -= 1;
    }
    let word: String = chars[k..i].iter().map(|&(_, c)| c.to_ascii_lowercase()).collect();
    let mut wc = word.chars();
    if let (Some(only), None) = (wc.next(), wc.next()) {
        if only.is_alphabetic() {
            return true;
        }
    }
    ABBREVIATIONS.contains(&word.as_str())
}

/// Extracts phenomenon objects from one discussion.
///
/// Each surviving term occurrence yields one object whose locations are
/// every toponym after the term in the same sentence. Occurrences inside an
/// exclusion pattern or inside a toponym are skipped. An object with no
/// following toponym is bound to `station`.
pub fn extract_objects(
    text: &str,
    source: Source,
    config: &PhenomenonConfig,
    hierarchy: &LocationHierarchy,
    station: &str,
) -> Result<Vec<PhenomenonObject>, ExtractionError> {
    if !hierarchy.contains(station) {
        return Err(ExtractionError::UnknownStation(station.to_string()));
    }
    let mut objects = Vec::new();
    for (sentence_index, sentence) in segment_sentences(text).into_iter().enumerate() {
        let base = sentence.range.start;
        let excluded = config.exclusions.find_all(sentence.text);
        let mentions = hierarchy.find_mentions(sentence.text);
        let overlaps = |s: usize, e: usize, a: usize, b: usize| s < b && a < e;

        for hit in config.terms.find_all(sentence.text) {
            if excluded.iter().any(|x| overlaps(hit.start, hit.end, x.start, x.end))
                || mentions.iter().any(|m| overlaps(hit.start, hit.end, m.start, m.end))
            {
                continue;
            }
            let &(phase, slot) = hit.value;
            let mut locations: Vec<String> = Vec::new();
            for m in mentions.iter().filter(|m| m.start >= hit.end) {
                let id = &hierarchy.node_at(m.node).id;
                if !locations.contains(id) {
                    locations.push(id.clone());
                }
            }
            if locations.is_empty() {
                locations.push(station.to_string());
            }
            objects.push(PhenomenonObject {
                phase,
                term: config.canonical_term(slot).to_string(),
                locations,
                sentence_index,
                char_span: (base + hit.start, base + hit.end),
                source,
            });
        }
    }
    Ok(objects)
}
