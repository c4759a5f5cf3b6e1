//! Unified extractive-QA dataset format and converters.
//!
//! A dataset file is a single JSON document:
//!
//! ```json
//! {"version": "bioqa-unified/1", "header": {...},
//!  "examples": [{"id", "question_type", "question", "context",
//!                "answers": [{"text", "answer_start"}], "yesno_label",
//!                "provenance", "meta"}],
//!  "stats": {...}}
//! ```
//!
//! Examples are sorted by `id`, answer offsets count characters, and every
//! span answer must slice-match its context.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::text::{char_len, char_slice, find_folded, fold};

pub const FORMAT_VERSION: &str = "bioqa-unified/1";

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("malformed JSON: {0}")]
    MalformedJson(#[from] serde_json::Error),
    #[error("no abstract available for document {0}")]
    MissingAbstract(String),
    #[error("{path}: schema violation at `{field}`: {reason}")]
    SchemaViolation {
        path: String,
        field: String,
        reason: String,
    },
    #[error("{0}")]
    Invalid(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QuestionType {
    Factoid,
    List,
    Yesno,
}

impl QuestionType {
    pub fn as_str(self) -> &'static str {
        match self {
            QuestionType::Factoid => "factoid",
            QuestionType::List => "list",
            QuestionType::Yesno => "yesno",
        }
    }

    pub fn is_span(self) -> bool {
        !matches!(self, QuestionType::Yesno)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Provenance {
    Denoise,
    Cloze,
    Bioasq,
    Pubmedqa,
    Adversarial,
}

impl Provenance {
    pub fn as_str(self) -> &'static str {
        match self {
            Provenance::Denoise => "denoise",
            Provenance::Cloze => "cloze",
            Provenance::Bioasq => "bioasq",
            Provenance::Pubmedqa => "pubmedqa",
            Provenance::Adversarial => "adversarial",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum YesNo {
    Yes,
    No,
}

impl YesNo {
    pub fn parse(s: &str) -> Option<YesNo> {
        match s.trim().to_ascii_lowercase().as_str() {
            "yes" => Some(YesNo::Yes),
            "no" => Some(YesNo::No),
            _ => None,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            YesNo::Yes => "yes",
            YesNo::No => "no",
        }
    }
}

impl fmt::Display for YesNo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Answer {
    pub text: String,
    pub answer_start: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExampleFlag {
    /// Gold answers exist but none occurs in the context.
    UnalignableAnswer,
    /// The source carries no gold answer (e.g. a test set).
    NoGold,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Meta {
    /// Groups examples that answer the same question (one per context).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub question_id: Option<String>,
    pub source_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub context_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub context_offset: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mention_index: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entity_type: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub original: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub replacement: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wh_word: Option<String>,
    /// Gold answer items, each with its accepted variants.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub answer_variants: Vec<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub flag: Option<ExampleFlag>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct QAExample {
    pub id: String,
    pub question_type: QuestionType,
    pub question: String,
    pub context: String,
    pub answers: Vec<Answer>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub yesno_label: Option<YesNo>,
    pub provenance: Provenance,
    pub meta: Meta,
}

impl QAExample {
    /// Key shared by all examples of one question.
    pub fn question_key(&self) -> &str {
        self.meta.question_id.as_deref().unwrap_or(&self.id)
    }

    /// Gold answer items with variants. Falls back to the aligned answers
    /// when the source did not record variants.
    pub fn gold_items(&self) -> Vec<Vec<String>> {
        if !self.meta.answer_variants.is_empty() {
            return self.meta.answer_variants.clone();
        }
        match self.question_type {
            QuestionType::Yesno => Vec::new(),
            QuestionType::Factoid => {
                let v: Vec<String> = self.answers.iter().map(|a| a.text.clone()).collect();
                if v.is_empty() {
                    Vec::new()
                } else {
                    vec![v]
                }
            }
            QuestionType::List => self.answers.iter().map(|a| vec![a.text.clone()]).collect(),
        }
    }

    /// Checks example invariants, returning the offending field and reason.
    pub fn check(&self) -> Result<(), (String, String)> {
        let flagged = self.meta.flag.is_some();
        for (i, a) in self.answers.iter().enumerate() {
            let end = a.answer_start + char_len(&a.text);
            if a.text.is_empty()
                || char_slice(&self.context, a.answer_start, end) != Some(a.text.as_str())
            {
                return Err((
                    format!("answers[{i}].answer_start"),
                    "answer text does not match context slice".into(),
                ));
            }
        }
        match self.question_type {
            QuestionType::Yesno => {
                if !self.answers.is_empty() {
                    return Err((
                        "answers".into(),
                        "yes/no example carries span answers".into(),
                    ));
                }
                if self.yesno_label.is_none() && self.meta.flag != Some(ExampleFlag::NoGold) {
                    return Err(("yesno_label".into(), "yes/no example has no label".into()));
                }
            }
            _ => {
                if self.yesno_label.is_some() {
                    return Err((
                        "yesno_label".into(),
                        "span example carries a yes/no label".into(),
                    ));
                }
                if self.answers.is_empty() && !flagged {
                    return Err(("answers".into(), "span example has no answer".into()));
                }
            }
        }
        Ok(())
    }
}

/// Stable example id: first 16 bytes of SHA-256 over the unit-separated parts.
pub fn example_id(parts: &[&str]) -> String {
    let mut h = Sha256::new();
    for (i, p) in parts.iter().enumerate() {
        if i > 0 {
            h.update([0x1f]);
        }
        h.update(p.as_bytes());
    }
    hex::encode(&h.finalize()[..16])
}

/// Counts describing the upstream source, kept for conversions where not
/// every source question becomes an example.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SourceStats {
    /// Source questions by type, including types excluded from the output.
    pub questions: BTreeMap<String, usize>,
    pub total_questions: usize,
    #[serde(default)]
    pub dropped_maybe: usize,
    #[serde(default)]
    pub unalignable: usize,
    #[serde(default)]
    pub no_gold: usize,
    #[serde(default)]
    pub no_context: usize,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Stats {
    pub total: usize,
    pub by_question_type: BTreeMap<String, usize>,
    pub by_provenance: BTreeMap<String, usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<SourceStats>,
}

impl Stats {
    pub fn recount(examples: &[QAExample], source: Option<SourceStats>) -> Stats {
        let mut by_question_type = BTreeMap::new();
        let mut by_provenance = BTreeMap::new();
        for e in examples {
            *by_question_type
                .entry(e.question_type.as_str().to_string())
                .or_default() += 1;
            *by_provenance
                .entry(e.provenance.as_str().to_string())
                .or_default() += 1;
        }
        Stats {
            total: examples.len(),
            by_question_type,
            by_provenance,
            source,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetFile {
    pub version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub header: Option<Value>,
    pub examples: Vec<QAExample>,
    pub stats: Stats,
}

impl DatasetFile {
    /// Sorts examples into canonical (id) order and computes stats.
    pub fn new(mut examples: Vec<QAExample>, source: Option<SourceStats>) -> Self {
        examples.sort_by(|a, b| a.id.cmp(&b.id));
        let stats = Stats::recount(&examples, source);
        DatasetFile {
            version: FORMAT_VERSION.to_string(),
            header: None,
            examples,
            stats,
        }
    }

    pub fn with_header(mut self, header: Value) -> Self {
        self.header = Some(header);
        self
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("dataset serializes");
        s.push('\n');
        s
    }

    /// Checks every example, id order and uniqueness, and the stats recount.
    pub fn validate(&self, path: &str) -> Result<(), DatasetError> {
        let violation = |field: String, reason: String| DatasetError::SchemaViolation {
            path: path.to_string(),
            field,
            reason,
        };
        if self.version != FORMAT_VERSION {
            return Err(violation(
                "version".into(),
                format!("unsupported version `{}`", self.version),
            ));
        }
        for (i, e) in self.examples.iter().enumerate() {
            e.check()
                .map_err(|(field, reason)| violation(format!("examples[{i}].{field}"), reason))?;
            if i > 0 && self.examples[i - 1].id >= e.id {
                return Err(violation(
                    format!("examples[{i}].id"),
                    "ids must be unique and sorted".into(),
                ));
            }
        }
        let recount = Stats::recount(&self.examples, self.stats.source.clone());
        if recount != self.stats {
            return Err(violation(
                "stats".into(),
                "stats disagree with a recount of examples".into(),
            ));
        }
        Ok(())
    }
}

pub fn write_dataset<W: Write>(file: &DatasetFile, mut w: W) -> Result<(), DatasetError> {
    w.write_all(file.to_json().as_bytes())?;
    Ok(())
}

pub fn read_dataset_from<R: Read>(r: R, path: &str) -> Result<DatasetFile, DatasetError> {
    let file: DatasetFile =
        serde_json::from_reader(r).map_err(|e| DatasetError::SchemaViolation {
            path: path.to_string(),
            field: format!("line {} column {}", e.line(), e.column()),
            reason: e.to_string(),
        })?;
    file.validate(path)?;
    Ok(file)
}

pub fn read_dataset(path: &Path) -> Result<DatasetFile, DatasetError> {
    let f = std::fs::File::open(path)?;
    read_dataset_from(std::io::BufReader::new(f), &path.display().to_string())
}

// ---------------------------------------------------------------------------
// BioASQ Task B

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BioasqType {
    Yesno,
    Factoid,
    List,
    Summary,
}

impl BioasqType {
    fn as_str(self) -> &'static str {
        match self {
            BioasqType::Yesno => "yesno",
            BioasqType::Factoid => "factoid",
            BioasqType::List => "list",
            BioasqType::Summary => "summary",
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
pub struct BioasqSnippet {
    pub text: String,
    #[serde(default)]
    pub document: String,
}

#[derive(Debug, Clone, Deserialize)]
pub struct BioasqQuestion {
    pub id: String,
    #[serde(rename = "type")]
    pub qtype: BioasqType,
    pub body: String,
    #[serde(default)]
    pub snippets: Vec<BioasqSnippet>,
    #[serde(default)]
    pub documents: Vec<String>,
    #[serde(default)]
    pub exact_answer: Option<Value>,
    #[serde(default)]
    pub ideal_answer: Option<Value>,
}

#[derive(Debug, Clone, Deserialize)]
pub struct BioasqFile {
    pub questions: Vec<BioasqQuestion>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContextSource {
    Abstract,
    Snippet,
}

impl ContextSource {
    pub fn as_str(self) -> &'static str {
        match self {
            ContextSource::Abstract => "abstract",
            ContextSource::Snippet => "snippet",
        }
    }
}

/// PubMed id from a BioASQ document URL such as
/// `http://www.ncbi.nlm.nih.gov/pubmed/23456789`.
pub fn pmid_from_url(url: &str) -> &str {
    url.trim_end_matches('/').rsplit('/').next().unwrap_or(url)
}

fn push_unique(out: &mut Vec<String>, s: &str) {
    let s = s.trim();
    if !s.is_empty() && !out.iter().any(|x| x == s) {
        out.push(s.to_string());
    }
}

/// Flattens BioASQ exact answers into items of variants. Factoid answers
/// become one item holding every variant; list answers keep one item per
/// entry.
pub fn exact_answer_items(qtype: BioasqType, exact: Option<&Value>) -> Vec<Vec<String>> {
    let Some(exact) = exact else {
        return Vec::new();
    };
    let mut items: Vec<Vec<String>> = Vec::new();
    match exact {
        Value::String(s) => {
            let mut v = Vec::new();
            push_unique(&mut v, s);
            items.push(v);
        }
        Value::Array(entries) => {
            for entry in entries {
                let mut v = Vec::new();
                match entry {
                    Value::String(s) => push_unique(&mut v, s),
                    Value::Array(inner) => {
                        for x in inner {
                            if let Value::String(s) = x {
                                push_unique(&mut v, s);
                            }
                        }
                    }
                    _ => {}
                }
                items.push(v);
            }
        }
        _ => {}
    }
    items.retain(|v| !v.is_empty());
    if qtype == BioasqType::Factoid && items.len() > 1 {
        let mut merged = Vec::new();
        for v in &items {
            for s in v {
                push_unique(&mut merged, s);
            }
        }
        items = vec![merged];
    }
    items
}

/// First case-insensitive occurrence of any variant, tried in order.
fn align_item(context_folded: &[char], context: &str, variants: &[String]) -> Option<Answer> {
    variants.iter().find_map(|v| {
        let needle = fold(v);
        let start = find_folded(context_folded, &needle, 0)?;
        let text = char_slice(context, start, start + needle.len())?.to_string();
        Some(Answer {
            text,
            answer_start: start,
        })
    })
}

/// Aligns gold items against a context; one answer per alignable item.
pub fn align_answers(context: &str, items: &[Vec<String>]) -> Vec<Answer> {
    let folded = fold(context);
    items
        .iter()
        .filter_map(|variants| align_item(&folded, context, variants))
        .collect()
}

#[derive(Debug, Clone)]
pub struct Conversion {
    pub file: DatasetFile,
    /// Ids of examples flagged unalignable.
    pub unalignable: Vec<String>,
}

/// Converts BioASQ Task-B JSON into one example per (question, context).
/// Summary questions are counted in source stats but produce no examples.
pub fn convert_bioasq(
    input: &str,
    context_source: ContextSource,
    abstracts: Option<&BTreeMap<String, String>>,
) -> Result<Conversion, DatasetError> {
    let parsed: BioasqFile = serde_json::from_str(input)?;
    if context_source == ContextSource::Abstract && abstracts.is_none() {
        return Err(DatasetError::Invalid(
            "abstract contexts require an abstracts corpus".into(),
        ));
    }
    let mut source = SourceStats::default();
    let mut examples = Vec::new();
    let mut unalignable = Vec::new();
    let mut seen_ids = HashSet::new();
    for q in &parsed.questions {
        *source
            .questions
            .entry(q.qtype.as_str().to_string())
            .or_default() += 1;
        source.total_questions += 1;
        let question_type = match q.qtype {
            BioasqType::Summary => continue,
            BioasqType::Yesno => QuestionType::Yesno,
            BioasqType::Factoid => QuestionType::Factoid,
            BioasqType::List => QuestionType::List,
        };
        if !seen_ids.insert(q.id.clone()) {
            return Err(DatasetError::Invalid(format!(
                "duplicate question id {}",
                q.id
            )));
        }

        let contexts: Vec<(String, String)> = match context_source {
            ContextSource::Snippet => q
                .snippets
                .iter()
                .map(|s| (pmid_from_url(&s.document).to_string(), s.text.clone()))
                .collect(),
            ContextSource::Abstract => {
                let corpus = abstracts.expect("checked above");
                let mut pmids: Vec<&str> = Vec::new();
                for d in &q.documents {
                    let p = pmid_from_url(d);
                    if !pmids.contains(&p) {
                        pmids.push(p);
                    }
                }
                pmids
                    .into_iter()
                    .map(|p| {
                        corpus
                            .get(p)
                            .map(|t| (p.to_string(), t.clone()))
                            .ok_or_else(|| DatasetError::MissingAbstract(p.to_string()))
                    })
                    .collect::<Result<_, _>>()?
            }
        };
        if contexts.is_empty() {
            source.no_context += 1;
            continue;
        }

        let items = exact_answer_items(q.qtype, q.exact_answer.as_ref());
        let label = match (&q.qtype, &q.exact_answer) {
            (BioasqType::Yesno, Some(Value::String(s))) => YesNo::parse(s),
            _ => None,
        };
        let no_gold = match question_type {
            QuestionType::Yesno => label.is_none(),
            _ => items.is_empty(),
        };
        if no_gold {
            source.no_gold += 1;
        }

        let mut question_unalignable = true;
        let mut new_examples = Vec::new();
        for (k, (context_id, context)) in contexts.into_iter().enumerate() {
            let id = example_id(&["bioasq", &q.id, context_source.as_str(), &k.to_string()]);
            let answers = if question_type.is_span() {
                align_answers(&context, &items)
            } else {
                Vec::new()
            };
            let flag = if no_gold {
                Some(ExampleFlag::NoGold)
            } else if question_type.is_span() && answers.is_empty() {
                Some(ExampleFlag::UnalignableAnswer)
            } else {
                question_unalignable = false;
                None
            };
            if flag == Some(ExampleFlag::UnalignableAnswer) {
                unalignable.push(id.clone());
            }
            new_examples.push(QAExample {
                id,
                question_type,
                question: q.body.clone(),
                context,
                answers,
                yesno_label: label,
                provenance: Provenance::Bioasq,
                meta: Meta {
                    question_id: Some(q.id.clone()),
                    source_id: q.id.clone(),
                    context_id: Some(context_id),
                    answer_variants: items.clone(),
                    flag,
                    ..Meta::default()
                },
            });
        }
        if question_unalignable && !no_gold && question_type.is_span() {
            source.unalignable += 1;
        }
        examples.extend(new_examples);
    }
    Ok(Conversion {
        file: DatasetFile::new(examples, Some(source)),
        unalignable,
    })
}

// ---------------------------------------------------------------------------
// PubMedQA

#[derive(Debug, Clone, Deserialize)]
pub struct PubmedqaInstance {
    #[serde(rename = "QUESTION")]
    pub question: String,
    #[serde(rename = "CONTEXTS")]
    pub contexts: Vec<String>,
    pub final_decision: String,
}

/// Converts PubMedQA (`{pmid: {QUESTION, CONTEXTS, final_decision, ...}}`)
/// into yes/no examples, dropping every "maybe" instance.
pub fn convert_pubmedqa(input: &str) -> Result<DatasetFile, DatasetError> {
    let parsed: BTreeMap<String, PubmedqaInstance> = serde_json::from_str(input)?;
    let mut source = SourceStats::default();
    let mut examples = Vec::new();
    for (pmid, inst) in &parsed {
        source.total_questions += 1;
        let decision = inst.final_decision.trim().to_ascii_lowercase();
        *source.questions.entry(decision.clone()).or_default() += 1;
        let label = match decision.as_str() {
            "maybe" => {
                source.dropped_maybe += 1;
                continue;
            }
            other => YesNo::parse(other).ok_or_else(|| {
                DatasetError::Invalid(format!("instance {pmid}: unknown decision `{other}`"))
            })?,
        };
        examples.push(QAExample {
            id: example_id(&["pubmedqa", pmid]),
            question_type: QuestionType::Yesno,
            question: inst.question.clone(),
            context: inst.contexts.join(" "),
            answers: Vec::new(),
            yesno_label: Some(label),
            provenance: Provenance::Pubmedqa,
            meta: Meta {
                question_id: Some(pmid.clone()),
                source_id: pmid.clone(),
                context_id: Some(pmid.clone()),
                ..Meta::default()
            },
        });
    }
    Ok(DatasetFile::new(examples, Some(source)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn span_example(id: &str, context: &str, text: &str, start: usize) -> QAExample {
        QAExample {
            id: id.into(),
            question_type: QuestionType::Factoid,
            question: "q".into(),
            context: context.into(),
            answers: vec![Answer {
                text: text.into(),
                answer_start: start,
            }],
            yesno_label: None,
            provenance: Provenance::Denoise,
            meta: Meta::default(),
        }
    }

    #[test]
    fn round_trip_and_empty() {
        let file = DatasetFile::new(
            vec![
                span_example("b", "the α drug", "drug", 6),
                span_example("a", "x y", "y", 2),
            ],
            None,
        );
        assert_eq!(file.examples[0].id, "a");
        let json = file.to_json();
        let back = read_dataset_from(json.as_bytes(), "mem").unwrap();
        assert_eq!(back, file);
        assert_eq!(back.to_json(), json);

        let empty = DatasetFile::new(Vec::new(), None);
        let back = read_dataset_from(empty.to_json().as_bytes(), "mem").unwrap();
        assert!(back.examples.is_empty());
        assert_eq!(back.stats.total, 0);
    }

    #[test]
    fn rejects_misaligned_answer() {
        let file = DatasetFile::new(vec![span_example("a", "abc def", "def", 3)], None);
        match read_dataset_from(file.to_json().as_bytes(), "d.json") {
            Err(DatasetError::SchemaViolation { path, field, .. }) => {
                assert_eq!(path, "d.json");
                assert_eq!(field, "examples[0].answers[0].answer_start");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_stats() {
        let mut file = DatasetFile::new(vec![span_example("a", "abc", "abc", 0)], None);
        file.stats.total = 7;
        assert!(matches!(
            read_dataset_from(file.to_json().as_bytes(), "d"),
            Err(DatasetError::SchemaViolation { field, .. }) if field == "stats"
        ));
    }

    #[test]
    fn ids_are_stable_and_separated() {
        assert_eq!(example_id(&["a", "b"]), example_id(&["a", "b"]));
        assert_ne!(example_id(&["ab", ""]), example_id(&["a", "b"]));
        assert_eq!(example_id(&["x"]).len(), 32);
    }

    #[test]
    fn flattens_exact_answers() {
        let f = exact_answer_items(
            BioasqType::Factoid,
            Some(&json!([["EGFR", "ErbB1"], ["HER1"]])),
        );
        assert_eq!(f, vec![vec!["EGFR", "ErbB1", "HER1"]]);
        let l = exact_answer_items(BioasqType::List, Some(&json!([["a", "A1"], ["b"], "c"])));
        assert_eq!(l, vec![vec!["a", "A1"], vec!["b"], vec!["c"]]);
        assert!(exact_answer_items(BioasqType::List, None).is_empty());
    }

    #[test]
    fn aligns_case_insensitively_to_first_occurrence() {
        let a = align_answers("ErbB1 and egfr and EGFR", &[vec!["EGFR".into()]]);
        assert_eq!(
            a,
            vec![Answer {
                text: "egfr".into(),
                answer_start: 10
            }]
        );
    }

    fn bioasq_fixture() -> String {
        json!({"questions": [
            {"id": "q1", "type": "factoid", "body": "Which receptor?",
             "documents": ["http://www.ncbi.nlm.nih.gov/pubmed/11"],
             "snippets": [
                {"text": "EGFR is a receptor.", "document": "http://www.ncbi.nlm.nih.gov/pubmed/11"},
                {"text": "The ERBB1 gene.", "document": "http://www.ncbi.nlm.nih.gov/pubmed/11"},
                {"text": "Nothing relevant.", "document": "http://www.ncbi.nlm.nih.gov/pubmed/12"}],
             "exact_answer": [["EGFR", "ErbB1"]]},
            {"id": "q2", "type": "summary", "body": "Describe.", "snippets": [{"text": "x", "document": "d"}]},
            {"id": "q3", "type": "yesno", "body": "Is it?", "documents": ["http://x/pubmed/12"],
             "snippets": [{"text": "Yes it is.", "document": "http://x/pubmed/12"}], "exact_answer": "yes"}
        ]})
        .to_string()
    }

    #[test]
    fn snippet_mode_one_example_per_snippet() {
        let conv = convert_bioasq(&bioasq_fixture(), ContextSource::Snippet, None).unwrap();
        let file = &conv.file;
        let q1: Vec<&QAExample> = file
            .examples
            .iter()
            .filter(|e| e.question_key() == "q1")
            .collect();
        assert_eq!(q1.len(), 3);
        assert_eq!(conv.unalignable.len(), 1);
        let src = file.stats.source.as_ref().unwrap();
        assert_eq!(src.questions["summary"], 1);
        assert_eq!(src.total_questions, 3);
        assert_eq!(file.stats.by_question_type["factoid"], 3);
        assert_eq!(file.stats.by_question_type["yesno"], 1);
        assert!(!file.stats.by_question_type.contains_key("summary"));
        let erbb = q1.iter().find(|e| e.context.starts_with("The")).unwrap();
        assert_eq!(erbb.answers[0].text, "ERBB1");
        file.validate("mem").unwrap();
        // same input twice -> same bytes
        let again = convert_bioasq(&bioasq_fixture(), ContextSource::Snippet, None).unwrap();
        assert_eq!(again.file.to_json(), file.to_json());
    }

    #[test]
    fn abstract_mode_requires_abstracts() {
        let mut abstracts = BTreeMap::new();
        abstracts.insert("11".to_string(), "Title. EGFR binds.".to_string());
        match convert_bioasq(&bioasq_fixture(), ContextSource::Abstract, Some(&abstracts)) {
            Err(DatasetError::MissingAbstract(p)) => assert_eq!(p, "12"),
            other => panic!("unexpected {other:?}"),
        }
        abstracts.insert("12".to_string(), "Other. It is so.".to_string());
        let conv =
            convert_bioasq(&bioasq_fixture(), ContextSource::Abstract, Some(&abstracts)).unwrap();
        assert_eq!(conv.file.examples.len(), 2);
        assert!(convert_bioasq(&bioasq_fixture(), ContextSource::Abstract, None).is_err());
        assert!(matches!(
            convert_bioasq("{not json", ContextSource::Snippet, None),
            Err(DatasetError::MalformedJson(_))
        ));
    }

    #[test]
    fn pubmedqa_drops_maybe() {
        let input = json!({
            "1": {"QUESTION": "A?", "CONTEXTS": ["c1", "c2"], "final_decision": "yes"},
            "2": {"QUESTION": "B?", "CONTEXTS": ["c"], "final_decision": "no"},
            "3": {"QUESTION": "C?", "CONTEXTS": ["c"], "final_decision": "maybe"}
        })
        .to_string();
        let file = convert_pubmedqa(&input).unwrap();
        assert_eq!(file.examples.len(), 2);
        assert_eq!(file.stats.source.as_ref().unwrap().dropped_maybe, 1);
        let one = file
            .examples
            .iter()
            .find(|e| e.meta.source_id == "1")
            .unwrap();
        assert_eq!(one.yesno_label, Some(YesNo::Yes));
        assert_eq!(one.context, "c1 c2");
        let two = file
            .examples
            .iter()
            .find(|e| e.meta.source_id == "2")
            .unwrap();
        assert_eq!(two.yesno_label, Some(YesNo::No));
    }

    #[test]
    fn pubmedqa_recount() {
        let mut map = serde_json::Map::new();
        let mut maybes = 0;
        for i in 0..1000 {
            let d = match i % 7 {
                0 | 3 => {
                    maybes += 1;
                    "maybe"
                }
                1 | 4 | 6 => "yes",
                _ => "no",
            };
            map.insert(
                format!("{i}"),
                json!({"QUESTION": format!("Q{i}?"), "CONTEXTS": ["ctx"], "final_decision": d}),
            );
        }
        let file = convert_pubmedqa(&Value::Object(map).to_string()).unwrap();
        assert_eq!(file.examples.len(), 1000 - maybes);
        assert_eq!(file.stats.source.unwrap().dropped_maybe, maybes);
    }
}
