//! Rule-based cloze questions: mask an entity mention inside its sentence
//! and prefix a wh-word chosen from the mention.
//!
//! Wh-word rules, first match wins:
//!
//! | rule                                                   | word  |
//! |--------------------------------------------------------|-------|
//! | quantity: a number with a unit or `%` (`5 mg`, `30%`)  | How   |
//! | all digits, or date-like (`2020`, `1990s`, `12/05/2019`), or type Date/Time | When |
//! | type Person, Species or Organism                        | Who   |
//! | type Location or Anatomy                                | Where |
//! | type Quantity/Dosage, or a unit-only surface (`mg`)     | How   |
//! | anything else                                           | What  |

use std::fmt;

use rayon::prelude::*;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::RngStream;
use crate::dataset::{example_id, Answer, Meta, Provenance, QAExample, QuestionType};
use crate::ingest::{
    sentence_containing, sentence_split, AnnotatedDocument, EntityMention, SentenceSpan,
};
use crate::text::{char_slice, splice};

pub const MASK: &str = "[MASK]";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ClozeError {
    #[error("mention {0} is not contained in a single sentence")]
    CrossSentenceMention(usize),
    #[error("mention index {0} out of range")]
    IndexOutOfRange(usize),
    #[error("sentence already contains the literal mask token")]
    MaskInSource,
    #[error("duplicate document id `{0}`")]
    DuplicateDocId(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum WhWord {
    Who,
    When,
    Where,
    What,
    How,
    Which,
}

impl WhWord {
    pub fn as_str(self) -> &'static str {
        match self {
            WhWord::Who => "Who",
            WhWord::When => "When",
            WhWord::Where => "Where",
            WhWord::What => "What",
            WhWord::How => "How",
            WhWord::Which => "Which",
        }
    }
}

impl fmt::Display for WhWord {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

const UNITS: &[&str] = &[
    "%", "mg", "g", "kg", "µg", "μg", "ug", "ng", "pg", "ml", "µl", "μl", "ul", "l", "mm", "cm",
    "m", "nm", "µm", "μm", "mmol", "µmol", "μmol", "mol", "mm", "nm", "µm", "mmhg", "h", "hr",
    "hrs", "min", "s", "sec", "days", "day", "weeks", "week", "months", "month", "years", "year",
    "iu", "u", "mg/kg", "mg/dl", "mg/ml", "µg/ml", "ng/ml", "g/dl", "mmol/l", "kda", "bp", "kb",
    "fold", "times",
];

const MONTHS: &[&str] = &[
    "january",
    "february",
    "march",
    "april",
    "may",
    "june",
    "july",
    "august",
    "september",
    "october",
    "november",
    "december",
    "jan",
    "feb",
    "mar",
    "apr",
    "jun",
    "jul",
    "aug",
    "sep",
    "sept",
    "oct",
    "nov",
    "dec",
];

fn is_number(tok: &str) -> bool {
    let t = tok.trim_start_matches(['+', '-', '~', '<', '>', '≤', '≥']);
    !t.is_empty()
        && t.chars().any(|c| c.is_ascii_digit())
        && t.chars()
            .all(|c| c.is_ascii_digit() || matches!(c, '.' | ',' | '-' | '–'))
}

fn is_unit(tok: &str) -> bool {
    UNITS.contains(&tok.to_lowercase().as_str())
}

fn quantity_like(surface: &str) -> bool {
    let s = surface.trim();
    if let Some(num) = s.strip_suffix('%') {
        return is_number(num.trim());
    }
    let toks: Vec<&str> = s.split_whitespace().collect();
    match toks.as_slice() {
        [num, unit] => is_number(num) && is_unit(unit),
        [one] => {
            // glued forms such as "5mg"; "1990s" is a decade, not seconds
            if date_like(one) {
                return false;
            }
            let split = one.find(|c: char| c.is_alphabetic()).unwrap_or(one.len());
            split > 0 && split < one.len() && is_number(&one[..split]) && is_unit(&one[split..])
        }
        _ => false,
    }
}

fn date_like(surface: &str) -> bool {
    let s = surface.trim();
    if !s.is_empty() && s.chars().all(|c| c.is_ascii_digit()) {
        return true;
    }
    // decades: 1990s
    if let Some(d) = s.strip_suffix('s') {
        if d.len() == 4 && d.chars().all(|c| c.is_ascii_digit()) {
            return true;
        }
    }
    // 12/05/2019, 2019-05-12
    if s.chars()
        .all(|c| c.is_ascii_digit() || c == '/' || c == '-')
        && s.chars().any(|c| c == '/' || c == '-')
        && s.split(['/', '-']).all(|p| !p.is_empty())
    {
        return true;
    }
    // "March 2020", "12 March 2020"
    let toks: Vec<String> = s
        .split_whitespace()
        .map(|t| t.trim_matches(',').to_lowercase())
        .collect();
    toks.len() >= 2
        && toks.iter().any(|t| MONTHS.contains(&t.as_str()))
        && toks
            .iter()
            .all(|t| MONTHS.contains(&t.as_str()) || t.chars().all(|c| c.is_ascii_digit()))
}

fn type_in(entity_type: &str, set: &[&str]) -> bool {
    set.iter().any(|t| t.eq_ignore_ascii_case(entity_type))
}

/// Deterministic wh-word for a mention; total, falling back to `What`.
pub fn wh_heuristic(mention: &EntityMention) -> WhWord {
    let surface = mention.surface.as_str();
    let ty = mention.entity_type.as_str();
    if quantity_like(surface) {
        WhWord::How
    } else if date_like(surface) || type_in(ty, &["Date", "Time"]) {
        WhWord::When
    } else if type_in(ty, &["Person", "Species", "Organism"]) {
        WhWord::Who
    } else if type_in(ty, &["Location", "Anatomy"]) {
        WhWord::Where
    } else if type_in(ty, &["Quantity", "Dosage"]) || is_unit(surface.trim()) {
        WhWord::How
    } else {
        WhWord::What
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClozeQuestion {
    pub masked_sentence: String,
    pub wh_word: WhWord,
    pub answer: Answer,
    pub context: String,
    pub sentence: SentenceSpan,
}

impl ClozeQuestion {
    /// The source sentence, with the mask replaced by the answer.
    pub fn unmasked(&self) -> String {
        self.masked_sentence.replacen(MASK, &self.answer.text, 1)
    }
}

/// Masks mention `mention_index` inside the sentence that contains it.
pub fn make_cloze(
    doc: &AnnotatedDocument,
    mention_index: usize,
    sentences: &[SentenceSpan],
) -> Result<ClozeQuestion, ClozeError> {
    let m = doc
        .mentions
        .get(mention_index)
        .ok_or(ClozeError::IndexOutOfRange(mention_index))?;
    let si = sentence_containing(sentences, m.start, m.end)
        .ok_or(ClozeError::CrossSentenceMention(mention_index))?;
    let s = sentences[si];
    let sentence = char_slice(&doc.text, s.start, s.end).expect("sentence inside text");
    if sentence.contains(MASK) {
        return Err(ClozeError::MaskInSource);
    }
    let masked_sentence = splice(sentence, m.start - s.start, m.end - s.start, MASK)
        .expect("mention inside sentence");
    Ok(ClozeQuestion {
        masked_sentence,
        wh_word: wh_heuristic(m),
        answer: Answer {
            text: m.surface.clone(),
            answer_start: m.start,
        },
        context: doc.text.clone(),
        sentence: s,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ClozeConfig {
    /// Keep the literal `[MASK]` in the question instead of eliding it.
    pub keep_mask: bool,
}

/// `wh_word + " " + cloze`. With the mask elided, trailing sentence
/// punctuation is dropped too: "When Nivolumab was approved in".
pub fn question_text(cloze: &ClozeQuestion, config: &ClozeConfig) -> String {
    let body = if config.keep_mask {
        cloze.masked_sentence.clone()
    } else {
        let elided = cloze.masked_sentence.replacen(MASK, " ", 1);
        let collapsed = elided.split_whitespace().collect::<Vec<_>>().join(" ");
        collapsed
            .trim_end_matches(['.', '!', '?'])
            .trim_end()
            .to_string()
    };
    format!("{} {}", cloze.wh_word, body)
}

pub fn generate_cloze_example(
    doc: &AnnotatedDocument,
    mention_index: usize,
    sentences: &[SentenceSpan],
    config: &ClozeConfig,
) -> Result<QAExample, ClozeError> {
    let cloze = make_cloze(doc, mention_index, sentences)?;
    let m = &doc.mentions[mention_index];
    Ok(QAExample {
        id: example_id(&["cloze", &doc.doc_id, &mention_index.to_string()]),
        question_type: QuestionType::Factoid,
        question: question_text(&cloze, config),
        context: cloze.context,
        answers: vec![cloze.answer],
        yesno_label: None,
        provenance: Provenance::Cloze,
        meta: Meta {
            source_id: doc.doc_id.clone(),
            mention_index: Some(mention_index),
            entity_type: Some(m.entity_type.clone()),
            wh_word: Some(cloze.wh_word.to_string()),
            ..Meta::default()
        },
    })
}

/// Cloze examples for one document: either every mention, or up to
/// `max_per_doc` mentions drawn without replacement from `rng`. Mentions
/// that cannot be masked are counted, not fatal.
pub fn generate_cloze_for_doc(
    doc: &AnnotatedDocument,
    sentences: &[SentenceSpan],
    max_per_doc: Option<usize>,
    rng: &mut RngStream,
    config: &ClozeConfig,
) -> (Vec<QAExample>, usize) {
    let mut order: Vec<usize> = (0..doc.mentions.len()).collect();
    if let Some(k) = max_per_doc {
        rng.shuffle(&mut order);
        order.truncate(k);
        order.sort_unstable();
    }
    let mut out = Vec::with_capacity(order.len());
    let mut failed = 0;
    for i in order {
        match generate_cloze_example(doc, i, sentences, config) {
            Ok(e) => out.push(e),
            Err(_) => failed += 1,
        }
    }
    (out, failed)
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClozeSummary {
    pub generated: usize,
    /// Mentions that could not be masked (cross-sentence or mask in source).
    pub skipped: usize,
}

/// Cloze examples for a whole corpus, ordered by document id. Each document
/// draws from its own stream keyed by its id, so the result does not depend
/// on input order or thread count.
pub fn generate_cloze_corpus(
    docs: &[AnnotatedDocument],
    max_per_doc: Option<usize>,
    seed: u64,
    config: &ClozeConfig,
) -> Result<(Vec<QAExample>, ClozeSummary), ClozeError> {
    let mut sorted: Vec<&AnnotatedDocument> = docs.iter().collect();
    sorted.sort_by(|a, b| a.doc_id.cmp(&b.doc_id));
    if let Some(w) = sorted.windows(2).find(|w| w[0].doc_id == w[1].doc_id) {
        return Err(ClozeError::DuplicateDocId(w[0].doc_id.clone()));
    }
    let per_doc: Vec<(Vec<QAExample>, usize)> = sorted
        .par_iter()
        .map(|doc| {
            let sentences = sentence_split(&doc.text);
            let mut rng = RngStream::new(seed, &doc.doc_id).substream("cloze");
            generate_cloze_for_doc(doc, &sentences, max_per_doc, &mut rng, config)
        })
        .collect();
    let mut summary = ClozeSummary::default();
    let mut examples = Vec::new();
    for (ex, failed) in per_doc {
        summary.generated += ex.len();
        summary.skipped += failed;
        examples.extend(ex);
    }
    Ok((examples, summary))
}
