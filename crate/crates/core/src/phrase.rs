//! Case-insensitive, word-bounded phrase lookup over a character trie.
//!
//! Every list-driven scan in the crate (phenomenon terms, toponym aliases,
//! filter keywords) goes through [`PhraseMatcher`]. Matching is leftmost,
//! then longest: at each candidate start the trie is walked as far as the
//! text allows and the longest accepted phrase wins. Any run of whitespace
//! in the text matches a single space in a phrase.

use std::collections::HashMap;

/// Lowercases a single character without changing how many characters it
/// occupies, so byte offsets into the original text stay meaningful.
pub fn fold_char(c: char) -> char {
    if c.is_ascii() {
        return c.to_ascii_lowercase();
    }
    let mut lower = c.to_lowercase();
    match (lower.next(), lower.next()) {
        (Some(l), None) => l,
        _ => c,
    }
}

/// Case-folds a phrase and collapses internal whitespace to single spaces.
pub fn normalize_phrase(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for word in s.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.extend(word.chars().map(fold_char));
    }
    out
}

fn is_word(c: char) -> bool {
    c.is_alphanumeric()
}

#[derive(Debug, Default, Clone)]
struct TrieNode {
    children: HashMap<char, usize>,
    value: Option<usize>,
}

/// One phrase occurrence. `start..end` are byte offsets into the scanned text.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PhraseMatch<'m, T> {
    pub start: usize,
    pub end: usize,
    pub value: &'m T,
}

#[derive(Debug, Clone)]
pub struct PhraseMatcher<T> {
    nodes: Vec<TrieNode>,
    values: Vec<T>,
    allow_plural: bool,
}

impl<T> Default for PhraseMatcher<T> {
    fn default() -> Self {
        Self::new(false)
    }
}

impl<T> PhraseMatcher<T> {
    /// With `allow_plural`, a phrase also matches when directly followed by
    /// an `s` or `es` suffix ("troughs", "high pressures").
    pub fn new(allow_plural: bool) -> Self {
        Self {
            nodes: vec![TrieNode::default()],
            values: Vec::new(),
            allow_plural,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Inserts a phrase. Returns the already-stored value if the normalized
    /// phrase was present; the new value is dropped in that case. Empty
    /// phrases are ignored.
    pub fn insert(&mut self, phrase: &str, value: T) -> Result<(), &T> {
        let key = normalize_phrase(phrase);
        if key.is_empty() {
            return Ok(());
        }
        let mut node = 0;
        for c in key.chars() {
            node = match self.nodes[node].children.get(&c) {
                Some(&next) => next,
                None => {
                    self.nodes.push(TrieNode::default());
                    let next = self.nodes.len() - 1;
                    self.nodes[node].children.insert(c, next);
                    next
                }
            };
        }
        if let Some(existing) = self.nodes[node].value {
            return Err(&self.values[existing]);
        }
        self.values.push(value);
        self.nodes[node].value = Some(self.values.len() - 1);
        Ok(())
    }

    /// Exact lookup of a normalized phrase.
    pub fn get(&self, phrase: &str) -> Option<&T> {
        let key = normalize_phrase(phrase);
        let mut node = 0;
        for c in key.chars() {
            node = *self.nodes[node].children.get(&c)?;
        }
        self.nodes[node].value.map(|v| &self.values[v])
    }

    /// All non-overlapping matches in document order.
    pub fn find_all<'m>(&'m self, text: &str) -> Vec<PhraseMatch<'m, T>> {
        let chars: Vec<(usize, char)> = text.char_indices().collect();
        let mut out = Vec::new();
        let mut i = 0;
        while i < chars.len() {
            let (start, c) = chars[i];
            let at_boundary = i == 0 || !is_word(chars[i - 1].1) || !is_word(c);
            if at_boundary && !c.is_whitespace() {
                if let Some((next_i, end, value)) = self.longest_at(text, &chars, i) {
                    out.push(PhraseMatch {
                        start,
                        end,
                        value: &self.values[value],
                    });
                    i = next_i;
                    continue;
                }
            }
            i += 1;
        }
        out
    }

    pub fn first_match<'m>(&'m self, text: &str) -> Option<PhraseMatch<'m, T>> {
        self.find_all(text).into_iter().next()
    }

    pub fn contains_any(&self, text: &str) -> bool {
        self.first_match(text).is_some()
    }

    /// Longest accepted phrase starting at char index `i`.
    /// Returns (char index after the match, byte end, value slot).
    fn longest_at(
        &self,
        text: &str,
        chars: &[(usize, char)],
        i: usize,
    ) -> Option<(usize, usize, usize)> {
        let byte_at = |k: usize| chars.get(k).map_or(text.len(), |&(b, _)| b);
        let mut best = None;
        let mut node = 0;
        let mut j = i;
        while j < chars.len() {
            let c = chars[j].1;
            let (key, next_j) = if c.is_whitespace() {
                let mut k = j;
                while k < chars.len() && chars[k].1.is_whitespace() {
                    k += 1;
                }
                (' ', k)
            } else {
                (fold_char(c), j + 1)
            };
            match self.nodes[node].children.get(&key) {
                Some(&next) => node = next,
                None => break,
            }
            j = next_j;
            if let Some(value) = self.nodes[node].value {
                let ends_clean =
                    !is_word(c) || j >= chars.len() || !is_word(chars[j].1);
                if ends_clean {
                    best = Some((j, byte_at(j), value));
                } else if self.allow_plural && is_word(c) {
                    if let Some(k) = plural_end(chars, j) {
                        best = Some((k, byte_at(k), value));
                    }
                }
            }
        }
        best
    }
}

/// Char index just past an `s`/`es` suffix starting at `j`, when the suffix
/// is followed by a word boundary.
fn plural_end(chars: &[(usize, char)], j: usize) -> Option<usize> {
    let folded = |k: usize| chars.get(k).map(|&(_, c)| fold_char(c));
    let bounded = |k: usize| k >= chars.len() || !is_word(chars[k].1);
    match folded(j) {
        Some('s') if bounded(j + 1) => Some(j + 1),
        Some('e') if folded(j + 1) == Some('s') && bounded(j + 2) => Some(j + 2),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn matcher(words: &[&str], plural: bool) -> PhraseMatcher<String> {
        let mut m = PhraseMatcher::new(plural);
        for w in words {
            m.insert(w, w.to_string()).unwrap();
        }
        m
    }

    fn hits(m: &PhraseMatcher<String>, text: &str) -> Vec<String> {
        m.find_all(text)
            .into_iter()
            .map(|h| text[h.start..h.end].to_string())
            .collect()
    }

    #[test]
    fn longest_match_wins_at_a_start() {
        let m = matcher(&["new york", "new york city"], false);
        assert_eq!(hits(&m, "Rain in New York City today"), ["New York City"]);
        assert_eq!(hits(&m, "Rain in New York today"), ["New York"]);
    }

    #[test]
    fn respects_word_boundaries() {
        let m = matcher(&["ridge", "kansas"], false);
        assert!(hits(&m, "ridging over Arkansas").is_empty());
        assert_eq!(hits(&m, "ridge over Kansas."), ["ridge", "Kansas"]);
    }

    #[test]
    fn whitespace_runs_match_single_space() {
        let m = matcher(&["high pressure"], false);
        assert_eq!(hits(&m, "HIGH\n   PRESSURE builds"), ["HIGH\n   PRESSURE"]);
    }

    #[test]
    fn plural_suffix_is_optional() {
        let m = matcher(&["trough"], true);
        assert_eq!(hits(&m, "two troughs and a trough"), ["troughs", "trough"]);
        assert!(hits(&m, "troughing aloft").is_empty());
        let strict = matcher(&["trough"], false);
        assert!(hits(&strict, "troughs").is_empty());
    }

    #[test]
    fn phrases_with_trailing_punctuation() {
        let m = matcher(&["central u.s.", "central u"], false);
        assert_eq!(hits(&m, "over the central U.S. tonight"), ["central U.S."]);
        assert_eq!(hits(&m, "over the central U tonight"), ["central U"]);
    }

    #[test]
    fn duplicate_insert_reports_existing() {
        let mut m = PhraseMatcher::new(false);
        m.insert("Denver", 1).unwrap();
        assert_eq!(m.insert("  denver ", 2), Err(&1));
        assert_eq!(m.get("DENVER"), Some(&1));
    }

    #[test]
    fn normalization() {
        assert_eq!(normalize_phrase("  The   Rockies\t"), "the rockies");
    }
}
