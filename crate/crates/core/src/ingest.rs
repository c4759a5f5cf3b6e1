//! PubTator-style corpus ingestion.
//!
//! A corpus is a sequence of blocks separated by blank lines:
//!
//! ```text
//! <doc_id>|t|<title>
//! <doc_id>|a|<abstract>
//! <doc_id>\t<start>\t<end>\t<surface>\t<type>\t<norm_id>
//! ```
//!
//! Offsets are character offsets into `title + " " + abstract`.

use std::io::{self, BufRead, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::text::{char_len, char_slice};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("line {line_no}: malformed line ({reason})")]
    MalformedLine { line_no: usize, reason: String },
    #[error("document {doc_id}, line {line_no}: annotation offset out of bounds")]
    OffsetOutOfBounds { doc_id: String, line_no: usize },
    #[error("document {doc_id} has neither title nor abstract text")]
    EmptyDocument { doc_id: String },
    #[error(transparent)]
    Io(#[from] io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct EntityMention {
    pub start: usize,
    pub end: usize,
    pub surface: String,
    pub entity_type: String,
    #[serde(default)]
    pub norm_id: String,
}

impl EntityMention {
    pub fn char_len(&self) -> usize {
        self.end - self.start
    }

    pub fn overlaps(&self, other: &EntityMention) -> bool {
        self.start < other.end && other.start < self.end
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatedDocument {
    pub doc_id: String,
    pub title: String,
    pub body: String,
    pub text: String,
    pub mentions: Vec<EntityMention>,
}

impl AnnotatedDocument {
    /// Builds a document, joining title and body with one space and sorting
    /// mentions by `(start, end)`. Mentions are not checked; see
    /// [`validate_document`].
    pub fn new(
        doc_id: impl Into<String>,
        title: impl Into<String>,
        body: impl Into<String>,
        mut mentions: Vec<EntityMention>,
    ) -> Self {
        let title = title.into();
        let body = body.into();
        let text = format!("{title} {body}");
        mentions.sort_by_key(|m| (m.start, m.end));
        AnnotatedDocument {
            doc_id: doc_id.into(),
            title,
            body,
            text,
            mentions,
        }
    }

    pub fn char_len(&self) -> usize {
        char_len(&self.text)
    }

    /// `true` at index `i` when mention `i` shares at least one character
    /// with another mention.
    pub fn overlapped(&self) -> Vec<bool> {
        let mut flags = vec![false; self.mentions.len()];
        for (i, a) in self.mentions.iter().enumerate() {
            for (j, b) in self.mentions.iter().enumerate().skip(i + 1) {
                if b.start >= a.end {
                    break;
                }
                if a.overlaps(b) {
                    flags[i] = true;
                    flags[j] = true;
                }
            }
        }
        flags
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SentenceSpan {
    pub start: usize,
    pub end: usize,
}

impl SentenceSpan {
    pub fn contains(&self, start: usize, end: usize) -> bool {
        self.start <= start && end <= self.end
    }
}

/// A rejected annotation line in lenient mode.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub line_no: usize,
    pub doc_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, Default)]
pub struct ParseOutput {
    pub documents: Vec<AnnotatedDocument>,
    pub diagnostics: Vec<Diagnostic>,
}

/// One blank-line-delimited block: 1-based number of its first line plus
/// the lines themselves (without terminators).
#[derive(Debug, Clone)]
pub struct Block {
    pub first_line: usize,
    pub lines: Vec<String>,
}

/// Streams blocks out of a reader.
pub struct Blocks<R> {
    reader: R,
    line_no: usize,
    done: bool,
}

impl<R: BufRead> Blocks<R> {
    pub fn new(reader: R) -> Self {
        Blocks {
            reader,
            line_no: 0,
            done: false,
        }
    }
}

impl<R: BufRead> Iterator for Blocks<R> {
    type Item = io::Result<Block>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.done {
            return None;
        }
        let mut lines = Vec::new();
        let mut first_line = 0;
        let mut buf = String::new();
        loop {
            buf.clear();
            match self.reader.read_line(&mut buf) {
                Ok(0) => {
                    self.done = true;
                    break;
                }
                Ok(_) => {}
                Err(e) => {
                    self.done = true;
                    return Some(Err(e));
                }
            }
            self.line_no += 1;
            let line = buf.trim_end_matches(['\n', '\r']);
            if line.is_empty() {
                if lines.is_empty() {
                    continue;
                }
                break;
            }
            if lines.is_empty() {
                first_line = self.line_no;
            }
            lines.push(line.to_string());
        }
        (!lines.is_empty()).then_some(Ok(Block { first_line, lines }))
    }
}

fn malformed(line_no: usize, reason: impl Into<String>) -> IngestError {
    IngestError::MalformedLine {
        line_no,
        reason: reason.into(),
    }
}

fn header_line<'a>(
    line: &'a str,
    line_no: usize,
    tag: &str,
) -> Result<(&'a str, &'a str), IngestError> {
    let mut parts = line.splitn(3, '|');
    let (Some(id), Some(t), Some(rest)) = (parts.next(), parts.next(), parts.next()) else {
        return Err(malformed(line_no, format!("expected `<doc_id>|{tag}|...`")));
    };
    if t != tag {
        return Err(malformed(
            line_no,
            format!("expected `|{tag}|` tag, found `|{t}|`"),
        ));
    }
    if id.is_empty() {
        return Err(malformed(line_no, "empty doc_id"));
    }
    Ok((id, rest))
}

/// Parses one block. Annotation-line failures are returned as errors in
/// strict mode and collected into `diagnostics` in lenient mode.
pub fn parse_block(
    block: &Block,
    lenient: bool,
    diagnostics: &mut Vec<Diagnostic>,
) -> Result<AnnotatedDocument, IngestError> {
    let lines = &block.lines;
    let first = block.first_line;
    let (doc_id, title) = header_line(&lines[0], first, "t")?;
    let Some(second) = lines.get(1) else {
        return Err(malformed(first, "block has no abstract line"));
    };
    let (abs_id, body) = header_line(second, first + 1, "a")?;
    if abs_id != doc_id {
        return Err(malformed(first + 1, "doc id mismatch"));
    }
    if title.trim().is_empty() && body.trim().is_empty() {
        return Err(IngestError::EmptyDocument {
            doc_id: doc_id.to_string(),
        });
    }
    let mut doc = AnnotatedDocument::new(doc_id, title, body, Vec::new());
    let text_len = doc.char_len();

    let mut mentions: Vec<(EntityMention, usize)> = Vec::new();
    for (k, line) in lines.iter().enumerate().skip(2) {
        let line_no = first + k;
        match parse_annotation(line, line_no, doc_id, &doc.text, text_len) {
            Ok(m) => mentions.push((m, line_no)),
            Err(e) if lenient => diagnostics.push(Diagnostic {
                line_no,
                doc_id: doc_id.to_string(),
                reason: match e {
                    IngestError::MalformedLine { reason, .. } => reason,
                    other => other.to_string(),
                },
            }),
            Err(e) => return Err(e),
        }
    }
    mentions.sort_by_key(|(m, _)| (m.start, m.end));
    let mut kept: Vec<EntityMention> = Vec::with_capacity(mentions.len());
    for (m, line_no) in mentions {
        if kept
            .last()
            .is_some_and(|p| p.start == m.start && p.end == m.end)
        {
            if lenient {
                diagnostics.push(Diagnostic {
                    line_no,
                    doc_id: doc_id.to_string(),
                    reason: "duplicate span".into(),
                });
                continue;
            }
            return Err(malformed(line_no, "duplicate span"));
        }
        kept.push(m);
    }
    doc.mentions = kept;
    Ok(doc)
}

fn parse_annotation(
    line: &str,
    line_no: usize,
    doc_id: &str,
    text: &str,
    text_len: usize,
) -> Result<EntityMention, IngestError> {
    let fields: Vec<&str> = line.split('\t').collect();
    if !(5..=6).contains(&fields.len()) {
        return Err(malformed(
            line_no,
            format!("expected 6 tab-separated fields, found {}", fields.len()),
        ));
    }
    if fields[0] != doc_id {
        return Err(malformed(line_no, "doc id mismatch"));
    }
    let start: usize = fields[1]
        .parse()
        .map_err(|_| malformed(line_no, format!("bad start offset `{}`", fields[1])))?;
    let end: usize = fields[2]
        .parse()
        .map_err(|_| malformed(line_no, format!("bad end offset `{}`", fields[2])))?;
    if start >= end {
        return Err(malformed(line_no, "empty span"));
    }
    if end > text_len {
        return Err(IngestError::OffsetOutOfBounds {
            doc_id: doc_id.to_string(),
            line_no,
        });
    }
    let surface = fields[3];
    if char_slice(text, start, end) != Some(surface) {
        return Err(malformed(line_no, "surface mismatch"));
    }
    let entity_type = fields[4];
    if entity_type.is_empty() {
        return Err(malformed(line_no, "empty entity type"));
    }
    Ok(EntityMention {
        start,
        end,
        surface: surface.to_string(),
        entity_type: entity_type.to_string(),
        norm_id: fields.get(5).copied().unwrap_or("").to_string(),
    })
}

/// Strict parse: the first bad line aborts with an error.
pub fn parse_pubtator<R: BufRead>(reader: R) -> Result<Vec<AnnotatedDocument>, IngestError> {
    let mut sink = Vec::new();
    Blocks::new(reader)
        .map(|b| parse_block(&b?, false, &mut sink))
        .collect()
}

/// Lenient parse: bad annotation lines are dropped and reported; header
/// problems are still fatal.
pub fn parse_pubtator_lenient<R: BufRead>(reader: R) -> Result<ParseOutput, IngestError> {
    let mut out = ParseOutput::default();
    for block in Blocks::new(reader) {
        let doc = parse_block(&block?, true, &mut out.diagnostics)?;
        out.documents.push(doc);
    }
    Ok(out)
}

/// Splits blocks sequentially, then parses them on the rayon pool. Output
/// order and diagnostics match the sequential parsers.
pub fn parse_pubtator_par<R: BufRead>(
    reader: R,
    lenient: bool,
) -> Result<ParseOutput, IngestError> {
    let blocks: Vec<Block> = Blocks::new(reader).collect::<io::Result<_>>()?;
    let parsed: Vec<(AnnotatedDocument, Vec<Diagnostic>)> = blocks
        .par_iter()
        .map(|b| {
            let mut diags = Vec::new();
            parse_block(b, lenient, &mut diags).map(|d| (d, diags))
        })
        .collect::<Result<_, _>>()?;
    let mut out = ParseOutput::default();
    for (doc, diags) in parsed {
        out.documents.push(doc);
        out.diagnostics.extend(diags);
    }
    Ok(out)
}

pub fn write_pubtator<W: Write>(mut w: W, docs: &[AnnotatedDocument]) -> io::Result<()> {
    for (i, doc) in docs.iter().enumerate() {
        if i > 0 {
            writeln!(w)?;
        }
        writeln!(w, "{}|t|{}", doc.doc_id, doc.title)?;
        writeln!(w, "{}|a|{}", doc.doc_id, doc.body)?;
        for m in &doc.mentions {
            writeln!(
                w,
                "{}\t{}\t{}\t{}\t{}\t{}",
                doc.doc_id, m.start, m.end, m.surface, m.entity_type, m.norm_id
            )?;
        }
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Violation {
    TextMismatch,
    EmptySurface {
        index: usize,
    },
    EmptyType {
        index: usize,
    },
    EmptySpan {
        index: usize,
    },
    OffsetOutOfBounds {
        index: usize,
        end: usize,
        text_len: usize,
    },
    LengthMismatch {
        index: usize,
    },
    SurfaceMismatch {
        index: usize,
    },
    Unsorted {
        index: usize,
    },
    DuplicateSpan {
        index: usize,
    },
    OverlapWarning {
        first: usize,
        second: usize,
    },
}

impl Violation {
    /// Overlaps are allowed and only flagged.
    pub fn is_fatal(&self) -> bool {
        !matches!(self, Violation::OverlapWarning { .. })
    }
}

pub fn validate_document(doc: &AnnotatedDocument) -> Vec<Violation> {
    let mut out = Vec::new();
    if doc.text != format!("{} {}", doc.title, doc.body) {
        out.push(Violation::TextMismatch);
    }
    let text_len = doc.char_len();
    for (index, m) in doc.mentions.iter().enumerate() {
        if m.surface.is_empty() {
            out.push(Violation::EmptySurface { index });
        }
        if m.entity_type.is_empty() {
            out.push(Violation::EmptyType { index });
        }
        if m.start >= m.end {
            out.push(Violation::EmptySpan { index });
        } else if m.end > text_len {
            out.push(Violation::OffsetOutOfBounds {
                index,
                end: m.end,
                text_len,
            });
        } else {
            if m.end - m.start != char_len(&m.surface) {
                out.push(Violation::LengthMismatch { index });
            }
            if char_slice(&doc.text, m.start, m.end) != Some(m.surface.as_str()) {
                out.push(Violation::SurfaceMismatch { index });
            }
        }
        if index > 0 {
            let prev = &doc.mentions[index - 1];
            match (prev.start, prev.end).cmp(&(m.start, m.end)) {
                std::cmp::Ordering::Greater => out.push(Violation::Unsorted { index }),
                std::cmp::Ordering::Equal => out.push(Violation::DuplicateSpan { index }),
                std::cmp::Ordering::Less => {}
            }
        }
    }
    for (i, a) in doc.mentions.iter().enumerate() {
        for (j, b) in doc.mentions.iter().enumerate().skip(i + 1) {
            if a.overlaps(b) && (a.start, a.end) != (b.start, b.end) {
                out.push(Violation::OverlapWarning {
                    first: i,
                    second: j,
                });
            }
        }
    }
    out
}

const TERMINALS: &[char] = &['.', '!', '?'];
const CLOSERS: &[char] = &['"', '\'', ')', ']', '}', '»', '”', '’'];
const OPENERS: &[char] = &['"', '\'', '(', '[', '{', '«', '“', '‘'];

/// Tokens that end with a period without ending a sentence.
const ABBREVIATIONS: &[&str] = &[
    "al", "approx", "ca", "cf", "dr", "e.g", "ed", "eds", "eq", "fig", "figs", "i.e", "inc", "jr",
    "ltd", "mr", "mrs", "ms", "no", "nos", "prof", "ref", "refs", "resp", "sp", "spp", "sr", "st",
    "var", "viz", "vol", "vs",
];

fn is_abbreviation(chars: &[char], dot: usize) -> bool {
    let mut start = dot;
    while start > 0 && !chars[start - 1].is_whitespace() {
        start -= 1;
    }
    let token: String = chars[start..dot]
        .iter()
        .skip_while(|c| OPENERS.contains(c))
        .flat_map(|c| c.to_lowercase())
        .collect();
    ABBREVIATIONS.contains(&token.as_str())
}

/// Rule-based sentence segmentation. A boundary is a run of `.`, `!` or `?`
/// (plus closing quotes/brackets) followed by whitespace and an uppercase
/// letter or digit, unless the period ends a known abbreviation. Spans are
/// trimmed of surrounding whitespace.
pub fn sentence_split(text: &str) -> Vec<SentenceSpan> {
    let chars: Vec<char> = text.chars().collect();
    let n = chars.len();
    let mut spans = Vec::new();
    let mut i = 0;
    while i < n && chars[i].is_whitespace() {
        i += 1;
    }
    while i < n {
        let start = i;
        let mut j = i;
        let mut end = None;
        while j < n {
            if !TERMINALS.contains(&chars[j]) {
                j += 1;
                continue;
            }
            let mut k = j;
            while k + 1 < n && TERMINALS.contains(&chars[k + 1]) {
                k += 1;
            }
            while k + 1 < n && CLOSERS.contains(&chars[k + 1]) {
                k += 1;
            }
            if k + 1 == n {
                end = Some((k + 1, n));
                break;
            }
            if chars[k + 1].is_whitespace() {
                let mut m = k + 1;
                while m < n && chars[m].is_whitespace() {
                    m += 1;
                }
                if m == n {
                    end = Some((k + 1, n));
                    break;
                }
                let single_dot = k == j && chars[j] == '.';
                let next_ok = chars[m].is_uppercase() || chars[m].is_ascii_digit();
                if next_ok && !(single_dot && is_abbreviation(&chars, j)) {
                    end = Some((k + 1, m));
                    break;
                }
            }
            j = k + 1;
        }
        let (span_end, next) = end.unwrap_or_else(|| {
            let mut e = n;
            while e > start && chars[e - 1].is_whitespace() {
                e -= 1;
            }
            (e, n)
        });
        spans.push(SentenceSpan {
            start,
            end: span_end,
        });
        i = next;
    }
    spans
}

/// Index of the sentence fully containing `[start, end)`, if any.
pub fn sentence_containing(sentences: &[SentenceSpan], start: usize, end: usize) -> Option<usize> {
    let idx = sentences.partition_point(|s| s.end <= start);
    sentences
        .get(idx)
        .filter(|s| s.contains(start, end))
        .map(|_| idx)
}
