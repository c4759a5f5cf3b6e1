//! Entity-corruption ("de-noising") example generation.
//!
//! Span examples: one entity mention in a document is replaced by another
//! surface of the same type; the question is the original surface and the
//! answer is the replacement at its new position.
//!
//! Yes/no examples: the question is a mention surface. With the untouched
//! context the label is `yes`; with a corrupted context and the replacement
//! surface as the question the label is `no`. Adversarial negatives pair a
//! surface with an unrelated document and are also `no`.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{CatalogError, EntityCatalog, RngStream};
use crate::dataset::{example_id, Answer, Meta, Provenance, QAExample, QuestionType, YesNo};
use crate::ingest::{sentence_containing, sentence_split, AnnotatedDocument, EntityMention};
use crate::text::{char_len, char_slice, contains_ci, count_ci, CharSpan};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DenoiseError {
    #[error("mention {0} overlaps another mention")]
    OverlappedMention(usize),
    #[error("mention index {0} out of range")]
    IndexOutOfRange(usize),
    #[error("duplicate document id {0}")]
    DuplicateDocId(String),
    #[error("invalid generation config: {0}")]
    InvalidConfig(String),
}

/// Why a document (or one of its example slots) produced no example.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Skip {
    NoMentions,
    ContextTooShort,
    OnlyOverlapped,
    RepeatedSurface,
    NoCandidate,
    RetriesExhausted,
    SingleDocument,
    Duplicate,
}

impl fmt::Display for Skip {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = serde_json::to_value(self).ok();
        f.write_str(s.as_ref().and_then(|v| v.as_str()).unwrap_or("skip"))
    }
}

/// Weights for the yes / no / adversarial-no classes of yes/no examples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct YesNoRatio {
    pub yes: u32,
    pub no: u32,
    pub adversarial: u32,
}

impl Default for YesNoRatio {
    fn default() -> Self {
        YesNoRatio {
            yes: 1,
            no: 1,
            adversarial: 1,
        }
    }
}

impl FromStr for YesNoRatio {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let parts: Vec<&str> = s.split(':').collect();
        let [yes, no, adversarial] = parts.as_slice() else {
            return Err(format!("expected `yes:no:adversarial`, got `{s}`"));
        };
        let p = |x: &str| {
            x.trim()
                .parse::<u32>()
                .map_err(|e| format!("bad ratio `{s}`: {e}"))
        };
        let r = YesNoRatio {
            yes: p(yes)?,
            no: p(no)?,
            adversarial: p(adversarial)?,
        };
        if r.yes + r.no + r.adversarial == 0 {
            return Err("ratio weights sum to zero".into());
        }
        Ok(r)
    }
}

impl TryFrom<String> for YesNoRatio {
    type Error = String;
    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<YesNoRatio> for String {
    fn from(r: YesNoRatio) -> String {
        r.to_string()
    }
}

impl fmt::Display for YesNoRatio {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}:{}", self.yes, self.no, self.adversarial)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum YesNoKind {
    Yes,
    No,
    Adversarial,
}

impl YesNoRatio {
    /// Class of the `slot`-th yes/no example in canonical order. Classes
    /// repeat in blocks of `yes`, `no`, `adversarial`.
    pub fn class_of(&self, slot: usize) -> YesNoKind {
        let period = (self.yes + self.no + self.adversarial) as usize;
        let r = slot % period;
        if r < self.yes as usize {
            YesNoKind::Yes
        } else if r < (self.yes + self.no) as usize {
            YesNoKind::No
        } else {
            YesNoKind::Adversarial
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContextWindow {
    /// The whole document text.
    Document,
    /// Only the sentence around the selected mention.
    Sentence,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct GenConfig {
    pub max_examples_per_doc: usize,
    pub replace_all_occurrences: bool,
    /// Skip mentions whose surface appears more than once in the text.
    pub skip_repeated_surface: bool,
    pub min_context_chars: usize,
    pub yes_no_ratio: YesNoRatio,
    pub seed: u64,
    pub context_window: ContextWindow,
    pub span_examples: bool,
    pub yesno_examples: bool,
    pub adversarial_retries: usize,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            max_examples_per_doc: 1,
            replace_all_occurrences: false,
            skip_repeated_surface: false,
            min_context_chars: 100,
            yes_no_ratio: YesNoRatio::default(),
            seed: 0,
            context_window: ContextWindow::Document,
            span_examples: true,
            yesno_examples: true,
            adversarial_retries: 16,
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<(), DenoiseError> {
        if self.max_examples_per_doc == 0 {
            return Err(DenoiseError::InvalidConfig(
                "max_examples_per_doc must be >= 1".into(),
            ));
        }
        let r = self.yes_no_ratio;
        if r.yes + r.no + r.adversarial == 0 {
            return Err(DenoiseError::InvalidConfig(
                "yes_no_ratio weights sum to zero".into(),
            ));
        }
        if self.adversarial_retries == 0 {
            return Err(DenoiseError::InvalidConfig(
                "adversarial_retries must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// A document with one mention (optionally every same-surface mention)
/// replaced.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CorruptedContext {
    pub text: String,
    /// Position of the replacement for the selected mention.
    pub corrupted_span: CharSpan,
    /// Every replaced span in the new text, ascending; includes
    /// `corrupted_span`.
    pub all_spans: Vec<CharSpan>,
    pub original_surface: String,
    pub replacement_surface: String,
    pub source_doc_id: String,
    pub source_mention_index: usize,
}

impl CorruptedContext {
    /// Maps a character offset of the source text onto the corrupted text.
    /// Offsets inside a replaced mention map to the replacement's start.
    pub fn map_offset(&self, pos: usize) -> usize {
        let delta = char_len(&self.replacement_surface) as isize
            - char_len(&self.original_surface) as isize;
        let mut shift: isize = 0;
        for (k, span) in self.all_spans.iter().enumerate() {
            let orig_start = (span.start as isize - k as isize * delta) as usize;
            let orig_end = orig_start + char_len(&self.original_surface);
            if pos < orig_start {
                break;
            }
            if pos < orig_end {
                return span.start;
            }
            shift += delta;
        }
        (pos as isize + shift) as usize
    }

    /// Untouched mentions of the source document re-anchored in the
    /// corrupted text. Mentions overlapping a replaced span are dropped.
    pub fn shifted_mentions(&self, doc: &AnnotatedDocument) -> Vec<EntityMention> {
        let replaced: Vec<CharSpan> = self.original_spans();
        doc.mentions
            .iter()
            .filter(|m| !replaced.iter().any(|r| m.start < r.end && r.start < m.end))
            .map(|m| EntityMention {
                start: self.map_offset(m.start),
                end: self.map_offset(m.start) + m.char_len(),
                ..m.clone()
            })
            .collect()
    }

    /// Replaced spans in source-text coordinates.
    pub fn original_spans(&self) -> Vec<CharSpan> {
        let orig_len = char_len(&self.original_surface);
        let delta = char_len(&self.replacement_surface) as isize - orig_len as isize;
        self.all_spans
            .iter()
            .enumerate()
            .map(|(k, s)| {
                let start = (s.start as isize - k as isize * delta) as usize;
                CharSpan::new(start, start + orig_len)
            })
            .collect()
    }

    /// Puts the original surface back, reconstructing the source text.
    pub fn restore(&self) -> String {
        let mut out = String::with_capacity(self.text.len());
        let mut last = 0;
        for s in &self.all_spans {
            out.push_str(char_slice(&self.text, last, s.start).unwrap_or(""));
            out.push_str(&self.original_surface);
            last = s.end;
        }
        out.push_str(char_slice(&self.text, last, char_len(&self.text)).unwrap_or(""));
        out
    }
}

fn check_index(doc: &AnnotatedDocument, i: usize) -> Result<(), DenoiseError> {
    if i >= doc.mentions.len() {
        return Err(DenoiseError::IndexOutOfRange(i));
    }
    Ok(())
}

/// Replaces mention `mention_index` with `replacement`.
pub fn corrupt_mention(
    doc: &AnnotatedDocument,
    mention_index: usize,
    replacement: &str,
) -> Result<CorruptedContext, DenoiseError> {
    corrupt_mentions(doc, mention_index, &[], replacement)
}

/// Replaces mention `mention_index` and every mention in `also` (which must
/// carry the same surface) with `replacement`.
pub fn corrupt_mentions(
    doc: &AnnotatedDocument,
    mention_index: usize,
    also: &[usize],
    replacement: &str,
) -> Result<CorruptedContext, DenoiseError> {
    check_index(doc, mention_index)?;
    let overlapped = doc.overlapped();
    let mut targets: Vec<usize> = std::iter::once(mention_index)
        .chain(also.iter().copied())
        .collect();
    targets.sort_unstable();
    targets.dedup();
    let original = &doc.mentions[mention_index].surface;
    for &t in &targets {
        check_index(doc, t)?;
        if overlapped[t] {
            return Err(DenoiseError::OverlappedMention(t));
        }
        if doc.mentions[t].surface != *original {
            return Err(DenoiseError::InvalidConfig(format!(
                "mention {t} does not share the surface `{original}`"
            )));
        }
    }

    let repl_len = char_len(replacement) as isize;
    let mut text = String::with_capacity(doc.text.len() + replacement.len() * targets.len());
    let mut spans = Vec::with_capacity(targets.len());
    let mut corrupted_span = CharSpan::new(0, 0);
    let mut last = 0;
    let mut shift: isize = 0;
    for &t in &targets {
        let m = &doc.mentions[t];
        text.push_str(char_slice(&doc.text, last, m.start).expect("validated offsets"));
        text.push_str(replacement);
        let start = (m.start as isize + shift) as usize;
        let span = CharSpan::new(start, start + repl_len as usize);
        if t == mention_index {
            corrupted_span = span;
        }
        spans.push(span);
        shift += repl_len - m.char_len() as isize;
        last = m.end;
    }
    text.push_str(char_slice(&doc.text, last, doc.char_len()).expect("validated offsets"));
    Ok(CorruptedContext {
        text,
        corrupted_span,
        all_spans: spans,
        original_surface: original.clone(),
        replacement_surface: replacement.to_string(),
        source_doc_id: doc.doc_id.clone(),
        source_mention_index: mention_index,
    })
}

/// Mentions usable for corruption under `config`, or the reason none are.
pub fn corruptible_mentions(
    doc: &AnnotatedDocument,
    config: &GenConfig,
) -> Result<Vec<usize>, Skip> {
    if doc.mentions.is_empty() {
        return Err(Skip::NoMentions);
    }
    if doc.char_len() < config.min_context_chars {
        return Err(Skip::ContextTooShort);
    }
    let overlapped = doc.overlapped();
    let free: Vec<usize> = (0..doc.mentions.len())
        .filter(|&i| !overlapped[i])
        .collect();
    if free.is_empty() {
        return Err(Skip::OnlyOverlapped);
    }
    if !config.skip_repeated_surface {
        return Ok(free);
    }
    let single: Vec<usize> = free
        .into_iter()
        .filter(|&i| count_ci(&doc.text, &doc.mentions[i].surface) == 1)
        .collect();
    if single.is_empty() {
        return Err(Skip::RepeatedSurface);
    }
    Ok(single)
}

fn question_mentions(doc: &AnnotatedDocument, config: &GenConfig) -> Result<Vec<usize>, Skip> {
    if doc.mentions.is_empty() {
        return Err(Skip::NoMentions);
    }
    if doc.char_len() < config.min_context_chars {
        return Err(Skip::ContextTooShort);
    }
    Ok((0..doc.mentions.len()).collect())
}

/// Draws a same-type replacement for mention `i` and corrupts it.
fn corrupt_with_draw(
    doc: &AnnotatedDocument,
    i: usize,
    catalog: &EntityCatalog,
    rng: &mut RngStream,
    config: &GenConfig,
) -> Result<CorruptedContext, Skip> {
    let m = &doc.mentions[i];
    let replacement = match catalog.sample_replacement(&m.entity_type, &m.surface, rng) {
        Ok(r) => r,
        Err(CatalogError::NoCandidate { .. } | CatalogError::UnknownType(_)) => {
            return Err(Skip::NoCandidate)
        }
        Err(e) => unreachable!("sampling cannot fail with {e}"),
    };
    let also: Vec<usize> = if config.replace_all_occurrences {
        let overlapped = doc.overlapped();
        doc.mentions
            .iter()
            .enumerate()
            .filter(|(j, o)| {
                *j != i
                    && !overlapped[*j]
                    && o.surface == m.surface
                    && o.entity_type == m.entity_type
            })
            .map(|(j, _)| j)
            .collect()
    } else {
        Vec::new()
    };
    Ok(corrupt_mentions(doc, i, &also, &replacement.surface).expect("mention was pre-checked"))
}

/// Context window in corrupted-text coordinates plus the source-text window
/// it corresponds to.
struct Window {
    context: String,
    offset: usize,
}

fn window_for(
    doc: &AnnotatedDocument,
    mention: usize,
    corrupted: Option<&CorruptedContext>,
    config: &GenConfig,
) -> Window {
    let text = corrupted.map_or(doc.text.as_str(), |c| c.text.as_str());
    if config.context_window == ContextWindow::Document {
        return Window {
            context: text.to_string(),
            offset: 0,
        };
    }
    let m = &doc.mentions[mention];
    let sentences = sentence_split(&doc.text);
    let Some(si) = sentence_containing(&sentences, m.start, m.end) else {
        return Window {
            context: text.to_string(),
            offset: 0,
        };
    };
    let s = sentences[si];
    let (start, end) = match corrupted {
        Some(c) => (c.map_offset(s.start), c.map_offset(s.end)),
        None => (s.start, s.end),
    };
    Window {
        context: char_slice(text, start, end)
            .expect("sentence inside text")
            .to_string(),
        offset: start,
    }
}

fn denoise_meta(
    doc: &AnnotatedDocument,
    i: usize,
    replacement: Option<&str>,
    offset: usize,
) -> Meta {
    let m = &doc.mentions[i];
    Meta {
        source_id: doc.doc_id.clone(),
        context_offset: (offset > 0).then_some(offset),
        mention_index: Some(i),
        entity_type: Some(m.entity_type.clone()),
        original: Some(m.surface.clone()),
        replacement: replacement.map(str::to_string),
        ..Meta::default()
    }
}

fn factoid_for_mention(
    doc: &AnnotatedDocument,
    i: usize,
    catalog: &EntityCatalog,
    rng: &mut RngStream,
    config: &GenConfig,
) -> Result<QAExample, Skip> {
    let corrupted = corrupt_with_draw(doc, i, catalog, rng, config)?;
    let w = window_for(doc, i, Some(&corrupted), config);
    let wlen = char_len(&w.context);
    let answers: Vec<Answer> = corrupted
        .all_spans
        .iter()
        .filter(|s| s.start >= w.offset && s.end <= w.offset + wlen)
        .map(|s| Answer {
            text: corrupted.replacement_surface.clone(),
            answer_start: s.start - w.offset,
        })
        .collect();
    let replacement = corrupted.replacement_surface.as_str();
    Ok(QAExample {
        id: example_id(&[
            "denoise",
            "factoid",
            &doc.doc_id,
            &i.to_string(),
            replacement,
        ]),
        question_type: QuestionType::Factoid,
        question: corrupted.original_surface.clone(),
        context: w.context,
        answers,
        yesno_label: None,
        provenance: Provenance::Denoise,
        meta: denoise_meta(doc, i, Some(replacement), w.offset),
    })
}

/// One span example: a uniformly chosen corruptible mention is replaced and
/// the original surface becomes the question.
pub fn generate_factoid_example(
    doc: &AnnotatedDocument,
    catalog: &EntityCatalog,
    rng: &mut RngStream,
    config: &GenConfig,
) -> Result<QAExample, Skip> {
    let candidates = corruptible_mentions(doc, config)?;
    let i = candidates[rng.index(candidates.len())];
    factoid_for_mention(doc, i, catalog, rng, config)
}

fn yes_for_mention(doc: &AnnotatedDocument, i: usize, config: &GenConfig) -> QAExample {
    let w = window_for(doc, i, None, config);
    QAExample {
        id: example_id(&["denoise", "yes", &doc.doc_id, &i.to_string()]),
        question_type: QuestionType::Yesno,
        question: doc.mentions[i].surface.clone(),
        context: w.context,
        answers: Vec::new(),
        yesno_label: Some(YesNo::Yes),
        provenance: Provenance::Denoise,
        meta: denoise_meta(doc, i, None, w.offset),
    }
}

/// A `yes` example: a mention surface asked against the unmodified context.
pub fn generate_yes_example(
    doc: &AnnotatedDocument,
    rng: &mut RngStream,
    config: &GenConfig,
) -> Result<QAExample, Skip> {
    let candidates = question_mentions(doc, config)?;
    let i = candidates[rng.index(candidates.len())];
    Ok(yes_for_mention(doc, i, config))
}

fn no_for_mention(
    doc: &AnnotatedDocument,
    i: usize,
    catalog: &EntityCatalog,
    rng: &mut RngStream,
    config: &GenConfig,
) -> Result<QAExample, Skip> {
    let corrupted = corrupt_with_draw(doc, i, catalog, rng, config)?;
    let w = window_for(doc, i, Some(&corrupted), config);
    let replacement = corrupted.replacement_surface.as_str();
    Ok(QAExample {
        id: example_id(&["denoise", "no", &doc.doc_id, &i.to_string(), replacement]),
        question_type: QuestionType::Yesno,
        question: replacement.to_string(),
        context: w.context,
        answers: Vec::new(),
        yesno_label: Some(YesNo::No),
        provenance: Provenance::Denoise,
        meta: denoise_meta(doc, i, Some(replacement), w.offset),
    })
}

/// A `no` example: the context is corrupted and the replacement surface is
/// the question.
pub fn generate_no_example(
    doc: &AnnotatedDocument,
    catalog: &EntityCatalog,
    rng: &mut RngStream,
    config: &GenConfig,
) -> Result<QAExample, Skip> {
    let candidates = corruptible_mentions(doc, config)?;
    let i = candidates[rng.index(candidates.len())];
    no_for_mention(doc, i, catalog, rng, config)
}

fn adversarial_for_mention(
    source: &AnnotatedDocument,
    i: usize,
    docs: &[AnnotatedDocument],
    rng: &mut RngStream,
    config: &GenConfig,
) -> Result<QAExample, Skip> {
    if !docs.iter().any(|d| d.doc_id != source.doc_id) {
        return Err(Skip::SingleDocument);
    }
    let question = &source.mentions[i].surface;
    for _ in 0..config.adversarial_retries {
        let other = &docs[rng.index(docs.len())];
        if other.doc_id == source.doc_id
            || other.char_len() < config.min_context_chars
            || contains_ci(&other.text, question)
        {
            continue;
        }
        return Ok(QAExample {
            id: example_id(&["adversarial", &source.doc_id, &i.to_string(), &other.doc_id]),
            question_type: QuestionType::Yesno,
            question: question.clone(),
            context: other.text.clone(),
            answers: Vec::new(),
            yesno_label: Some(YesNo::No),
            provenance: Provenance::Adversarial,
            meta: Meta {
                source_id: source.doc_id.clone(),
                context_id: Some(other.doc_id.clone()),
                mention_index: Some(i),
                entity_type: Some(source.mentions[i].entity_type.clone()),
                original: Some(question.clone()),
                ..Meta::default()
            },
        });
    }
    Err(Skip::RetriesExhausted)
}

/// A `no` example pairing a mention surface of `source` with the text of a
/// different document that does not contain it. The other document is
/// resampled up to `adversarial_retries` times.
pub fn generate_adversarial_negative(
    source: &AnnotatedDocument,
    docs: &[AnnotatedDocument],
    rng: &mut RngStream,
    config: &GenConfig,
) -> Result<QAExample, Skip> {
    let candidates = question_mentions(source, config)?;
    let i = candidates[rng.index(candidates.len())];
    adversarial_for_mention(source, i, docs, rng, config)
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenSummary {
    pub generated: usize,
    pub skipped: BTreeMap<Skip, usize>,
    pub by_kind: BTreeMap<String, usize>,
}

#[derive(Debug, Clone)]
pub struct GenOutput {
    /// Ordered by document id, then example index within the document.
    pub examples: Vec<QAExample>,
    pub summary: GenSummary,
}

struct DocResult {
    examples: Vec<(String, QAExample)>,
    skips: Vec<Skip>,
}

fn generate_for_doc(
    doc: &AnnotatedDocument,
    yesno_classes: &[YesNoKind],
    docs: &[AnnotatedDocument],
    catalog: &EntityCatalog,
    config: &GenConfig,
) -> DocResult {
    let root = RngStream::new(config.seed, doc.doc_id.as_str());
    let mut out = DocResult {
        examples: Vec::new(),
        skips: Vec::new(),
    };
    let mut seen = HashSet::new();
    let mut emit = |kind: &str, r: Result<QAExample, Skip>, out: &mut DocResult| match r {
        Ok(e) if seen.insert(e.id.clone()) => out.examples.push((kind.to_string(), e)),
        Ok(_) => out.skips.push(Skip::Duplicate),
        Err(s) => out.skips.push(s),
    };

    if config.span_examples {
        match corruptible_mentions(doc, config) {
            Err(s) => out.skips.push(s),
            Ok(mut order) => {
                root.substream("span").shuffle(&mut order);
                for slot in 0..config.max_examples_per_doc {
                    let i = order[slot % order.len()];
                    let mut rng = root.substream(&format!("span/{slot}"));
                    let r = factoid_for_mention(doc, i, catalog, &mut rng, config);
                    emit("factoid", r, &mut out);
                }
            }
        }
    }

    if config.yesno_examples {
        match question_mentions(doc, config) {
            Err(s) => out.skips.push(s),
            Ok(mut order) => {
                root.substream("yesno").shuffle(&mut order);
                let overlapped = doc.overlapped();
                for (slot, class) in yesno_classes.iter().enumerate() {
                    let i = order[slot % order.len()];
                    let mut rng = root.substream(&format!("yesno/{slot}"));
                    let (kind, r) = match class {
                        YesNoKind::Yes => ("yes", Ok(yes_for_mention(doc, i, config))),
                        YesNoKind::No => {
                            // corruption needs a non-overlapped mention
                            let free: Vec<usize> =
                                order.iter().copied().filter(|&j| !overlapped[j]).collect();
                            let r = if free.is_empty() {
                                Err(Skip::OnlyOverlapped)
                            } else {
                                no_for_mention(
                                    doc,
                                    free[slot % free.len()],
                                    catalog,
                                    &mut rng,
                                    config,
                                )
                            };
                            ("no", r)
                        }
                        YesNoKind::Adversarial => (
                            "adversarial",
                            adversarial_for_mention(doc, i, docs, &mut rng, config),
                        ),
                    };
                    emit(kind, r, &mut out);
                }
            }
        }
    }
    out
}

/// Generates the de-noising corpus. Output is identical for any input
/// document order and any rayon pool size.
pub fn generate_corpus(
    docs: &[AnnotatedDocument],
    catalog: &EntityCatalog,
    config: &GenConfig,
) -> Result<GenOutput, DenoiseError> {
    config.validate()?;
    let mut sorted: Vec<AnnotatedDocument> = docs.to_vec();
    sorted.sort_by(|a, b| a.doc_id.cmp(&b.doc_id));
    if let Some(w) = sorted.windows(2).find(|w| w[0].doc_id == w[1].doc_id) {
        return Err(DenoiseError::DuplicateDocId(w[0].doc_id.clone()));
    }

    // Yes/no classes are dealt in canonical order over eligible documents,
    // so class totals follow the ratio exactly up to rounding.
    let mut next_slot = 0usize;
    let classes: Vec<Vec<YesNoKind>> = sorted
        .iter()
        .map(|d| {
            if !config.yesno_examples || question_mentions(d, config).is_err() {
                return Vec::new();
            }
            (0..config.max_examples_per_doc)
                .map(|_| {
                    let c = config.yes_no_ratio.class_of(next_slot);
                    next_slot += 1;
                    c
                })
                .collect()
        })
        .collect();

    let results: Vec<DocResult> = sorted
        .par_iter()
        .zip(classes.par_iter())
        .map(|(d, cls)| generate_for_doc(d, cls, &sorted, catalog, config))
        .collect();

    let mut summary = GenSummary::default();
    let mut examples = Vec::new();
    for r in results {
        for s in r.skips {
            *summary.skipped.entry(s).or_default() += 1;
        }
        for (kind, e) in r.examples {
            *summary.by_kind.entry(kind).or_default() += 1;
            examples.push(e);
        }
    }
    summary.generated = examples.len();
    Ok(GenOutput { examples, summary })
}
