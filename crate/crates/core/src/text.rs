//! Character-offset helpers.
//!
//! Every offset in this crate counts Unicode scalar values, not bytes. These
//! helpers convert between the two and provide the simple one-to-one case
//! folding used for case-insensitive search.

use serde::{Deserialize, Serialize};

/// Half-open character range `[start, end)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct CharSpan {
    pub start: usize,
    pub end: usize,
}

impl CharSpan {
    pub fn new(start: usize, end: usize) -> Self {
        CharSpan { start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }
}

/// Number of Unicode scalar values in `s`.
pub fn char_len(s: &str) -> usize {
    s.chars().count()
}

/// Byte offset of the `char_idx`-th character. `char_idx == char_len(s)` maps
/// to `s.len()`.
pub fn byte_offset(s: &str, char_idx: usize) -> Option<usize> {
    if char_idx == 0 {
        return Some(0);
    }
    let mut seen = 0;
    for (b, _) in s.char_indices() {
        if seen == char_idx {
            return Some(b);
        }
        seen += 1;
    }
    (seen == char_idx).then_some(s.len())
}

/// Slice `s` by character offsets `[start, end)`.
pub fn char_slice(s: &str, start: usize, end: usize) -> Option<&str> {
    if start > end {
        return None;
    }
    let b0 = byte_offset(s, start)?;
    let b1 = b0 + byte_offset(&s[b0..], end - start)?;
    Some(&s[b0..b1])
}

/// Replace the character range `[start, end)` of `s` with `replacement`.
pub fn splice(s: &str, start: usize, end: usize, replacement: &str) -> Option<String> {
    if start > end {
        return None;
    }
    let b0 = byte_offset(s, start)?;
    let b1 = b0 + byte_offset(&s[b0..], end - start)?;
    let mut out = String::with_capacity(s.len() + replacement.len());
    out.push_str(&s[..b0]);
    out.push_str(replacement);
    out.push_str(&s[b1..]);
    Some(out)
}

/// Lowercase mapping restricted to characters whose lowercase form is a
/// single character; everything else maps to itself. Keeps folded text
/// offset-aligned with the original.
pub fn fold_char(c: char) -> char {
    let mut lower = c.to_lowercase();
    match (lower.next(), lower.next()) {
        (Some(l), None) => l,
        _ => c,
    }
}

pub fn fold(s: &str) -> Vec<char> {
    s.chars().map(fold_char).collect()
}

/// Case-insensitive key used for deduplication and exclusion.
pub fn fold_key(s: &str) -> String {
    s.chars().map(fold_char).collect()
}

/// Char offset of the first case-insensitive occurrence of `needle` in
/// `haystack`, searching from char offset `from`.
pub fn find_folded(haystack: &[char], needle: &[char], from: usize) -> Option<usize> {
    if needle.is_empty() || needle.len() > haystack.len() {
        return None;
    }
    (from..=haystack.len() - needle.len()).find(|&i| haystack[i..i + needle.len()] == *needle)
}

pub fn find_ci(haystack: &str, needle: &str) -> Option<usize> {
    find_folded(&fold(haystack), &fold(needle), 0)
}

pub fn contains_ci(haystack: &str, needle: &str) -> bool {
    find_ci(haystack, needle).is_some()
}

/// Number of (possibly overlapping) case-insensitive occurrences.
pub fn count_ci(haystack: &str, needle: &str) -> usize {
    let hay = fold(haystack);
    let pat = fold(needle);
    let mut n = 0;
    let mut from = 0;
    while let Some(i) = find_folded(&hay, &pat, from) {
        n += 1;
        from = i + 1;
    }
    n
}
