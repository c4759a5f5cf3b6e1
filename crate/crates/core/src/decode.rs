//! Answer decoding from externally produced logits.
//!
//! A span is scored as `start_logit[i] + end_logit[j]`. Candidates from all
//! contexts of a question are merged by raw score, deduplicated by normalized
//! text and turned into a factoid top-5, a thresholded list, or (for yes/no)
//! a label from the sum of the per-context logits.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BinaryHeap, HashMap, HashSet};
use std::io::BufRead;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dataset::{DatasetFile, QuestionType, YesNo};
use crate::metrics::normalize_answer;
use crate::text::{char_len, char_slice};

pub const DECODED_VERSION: &str = "bioqa-decoded/1";

#[derive(Debug, Error)]
pub enum DecodeError {
    #[error("empty input")]
    EmptyInput,
    #[error("non-finite input")]
    NonFiniteInput,
    #[error("invalid record `{example_id}`: {reason}")]
    InvalidRecord { example_id: String, reason: String },
    #[error("no prediction records for question `{0}`")]
    NoRecords(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("line {line_no}: {reason}")]
    MalformedLine { line_no: usize, reason: String },
    #[error("prediction for unknown example `{0}`")]
    UnknownExample(String),
    #[error("record for `{0}` does not fit its question type")]
    RecordTypeMismatch(String),
    #[error("duplicate record for `{0}`")]
    DuplicateRecord(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TokenLogits {
    pub text: String,
    pub char_start: usize,
    pub char_end: usize,
    pub start_logit: f64,
    pub end_logit: f64,
}

/// Per-token start and end logits over one context.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpanPredictionRecord {
    pub example_id: String,
    pub tokens: Vec<TokenLogits>,
}

impl SpanPredictionRecord {
    /// Checks that tokens exist, are ordered and disjoint, carry finite
    /// logits and (when `context` is given) lie inside it.
    pub fn validate(&self, context: Option<&str>) -> Result<(), DecodeError> {
        let bad = |reason: String| DecodeError::InvalidRecord {
            example_id: self.example_id.clone(),
            reason,
        };
        if self.tokens.is_empty() {
            return Err(bad("no tokens".into()));
        }
        let limit = context.map(char_len);
        let mut prev_end = 0;
        for (k, t) in self.tokens.iter().enumerate() {
            if !t.start_logit.is_finite() || !t.end_logit.is_finite() {
                return Err(bad(format!("token {k} has a non-finite logit")));
            }
            if t.char_start > t.char_end {
                return Err(bad(format!("token {k} ends before it starts")));
            }
            if t.char_start < prev_end {
                return Err(bad(format!(
                    "token {k} overlaps or precedes token {}",
                    k.saturating_sub(1)
                )));
            }
            if let Some(n) = limit {
                if t.char_end > n {
                    return Err(bad(format!("token {k} lies outside the context")));
                }
            }
            prev_end = t.char_end;
        }
        Ok(())
    }
}

/// Classification logit for one question-context pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YesNoPredictionRecord {
    pub example_id: String,
    pub logit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum PredictionRecord {
    Span(SpanPredictionRecord),
    YesNo(YesNoPredictionRecord),
}

impl PredictionRecord {
    pub fn example_id(&self) -> &str {
        match self {
            PredictionRecord::Span(r) => &r.example_id,
            PredictionRecord::YesNo(r) => &r.example_id,
        }
    }
}

/// Reads a JSON Lines prediction file. Blank lines are ignored.
pub fn read_predictions<R: BufRead>(reader: R) -> Result<Vec<PredictionRecord>, DecodeError> {
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: PredictionRecord =
            serde_json::from_str(&line).map_err(|e| DecodeError::MalformedLine {
                line_no: i + 1,
                reason: e.to_string(),
            })?;
        if let PredictionRecord::YesNo(r) = &rec {
            if !r.logit.is_finite() {
                return Err(DecodeError::MalformedLine {
                    line_no: i + 1,
                    reason: "non-finite logit".into(),
                });
            }
        }
        out.push(rec);
    }
    Ok(out)
}

/// Max-subtracted softmax.
pub fn softmax_probs(logits: &[f64]) -> Result<Vec<f64>, DecodeError> {
    if logits.is_empty() {
        return Err(DecodeError::EmptyInput);
    }
    if logits.iter().any(|x| !x.is_finite()) {
        return Err(DecodeError::NonFiniteInput);
    }
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|x| (x - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    Ok(exps.into_iter().map(|e| e / sum).collect())
}

/// Logistic function, evaluated without overflow for large `|x|`.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpanCandidate {
    pub start_token: usize,
    pub end_token: usize,
    pub char_start: usize,
    pub char_end: usize,
    pub score: f64,
    pub prob: f64,
    pub text: String,
}

/// Descending score, then earlier start, then shorter span. Scores compare
/// by IEEE equality so that `-0.0` and `0.0` tie.
pub fn rank_order(a: (f64, usize, usize), b: (f64, usize, usize)) -> Ordering {
    score_desc(a.0, b.0).then(a.1.cmp(&b.1)).then(a.2.cmp(&b.2))
}

fn score_desc(a: f64, b: f64) -> Ordering {
    b.partial_cmp(&a).unwrap_or(Ordering::Equal)
}

/// Text of tokens `i..=j`: the context slice when available, else the
/// token texts joined with a space wherever the offsets leave a gap.
pub fn span_text(
    record: &SpanPredictionRecord,
    i: usize,
    j: usize,
    context: Option<&str>,
) -> String {
    let toks = &record.tokens;
    if let Some(s) = context.and_then(|c| char_slice(c, toks[i].char_start, toks[j].char_end)) {
        return s.to_string();
    }
    let mut out = String::new();
    for k in i..=j {
        if k > i && toks[k].char_start > toks[k - 1].char_end {
            out.push(' ');
        }
        out.push_str(&toks[k].text);
    }
    out
}

#[derive(PartialEq)]
struct HeapItem {
    score: f64,
    start: usize,
    end: usize,
    pos: usize,
}

impl Eq for HeapItem {}

impl Ord for HeapItem {
    fn cmp(&self, other: &Self) -> Ordering {
        // BinaryHeap is a max-heap: the best-ranked item must compare greatest
        rank_order(
            (other.score, other.start, other.end),
            (self.score, self.start, self.end),
        )
    }
}

impl PartialOrd for HeapItem {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// The `n` best valid spans (`i ≤ j`, at most `max_answer_tokens` tokens),
/// deduplicated by normalized text. Probabilities are a softmax over the
/// returned scores.
///
/// Spans are produced in rank order by a lazy k-way merge: for each start
/// token the admissible ends are sorted by end logit, and a heap holds the
/// current best end of every start.
pub fn nbest(
    record: &SpanPredictionRecord,
    n: usize,
    max_answer_tokens: usize,
    context: Option<&str>,
) -> Result<Vec<SpanCandidate>, DecodeError> {
    if n == 0 || max_answer_tokens == 0 {
        return Err(DecodeError::InvalidParameter(
            "n and max_answer_tokens must be at least 1".into(),
        ));
    }
    record.validate(context)?;
    let toks = &record.tokens;
    let t = toks.len();
    let ends: Vec<Vec<usize>> = (0..t)
        .map(|i| {
            let mut js: Vec<usize> = (i..t.min(i.saturating_add(max_answer_tokens))).collect();
            js.sort_by(|&a, &b| score_desc(toks[a].end_logit, toks[b].end_logit).then(a.cmp(&b)));
            js
        })
        .collect();
    let item = |i: usize, pos: usize| {
        let j = ends[i][pos];
        HeapItem {
            score: toks[i].start_logit + toks[j].end_logit,
            start: i,
            end: j,
            pos,
        }
    };
    let mut heap: BinaryHeap<HeapItem> = (0..t).map(|i| item(i, 0)).collect();
    let mut seen = HashSet::new();
    let mut out = Vec::with_capacity(n.min(t.saturating_mul(max_answer_tokens.min(t))));
    while out.len() < n {
        let Some(top) = heap.pop() else { break };
        if top.pos + 1 < ends[top.start].len() {
            heap.push(item(top.start, top.pos + 1));
        }
        let text = span_text(record, top.start, top.end, context);
        if !seen.insert(normalize_answer(&text)) {
            continue;
        }
        out.push(SpanCandidate {
            start_token: top.start,
            end_token: top.end,
            char_start: toks[top.start].char_start,
            char_end: toks[top.end].char_end,
            score: top.score,
            prob: 0.0,
            text,
        });
    }
    let scores: Vec<f64> = out.iter().map(|c| c.score).collect();
    for (c, p) in out.iter_mut().zip(softmax_probs(&scores)?) {
        c.prob = p;
    }
    Ok(out)
}

/// A question-level answer merged across contexts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedAnswer {
    pub text: String,
    pub score: f64,
    pub prob: f64,
    pub example_id: String,
}

/// Which quantity the list threshold is applied to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ListQuantity {
    /// Softmax probability over the merged, deduplicated candidates.
    #[default]
    MergedSoftmax,
    /// Logistic function of the raw span score.
    Sigmoid,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DecodeConfig {
    /// Answers kept for factoid questions.
    pub n_best: usize,
    /// Candidates taken from each context before merging.
    pub per_context_n_best: usize,
    pub max_answer_tokens: usize,
    pub list_threshold: f64,
    pub list_quantity: ListQuantity,
    /// Weight of the similarity score in re-ranking; 0 disables it.
    pub rerank_weight: f64,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        DecodeConfig {
            n_best: 5,
            per_context_n_best: 20,
            max_answer_tokens: 30,
            list_threshold: 0.42,
            list_quantity: ListQuantity::MergedSoftmax,
            rerank_weight: 0.0,
        }
    }
}

impl DecodeConfig {
    pub fn validate(&self) -> Result<(), DecodeError> {
        if self.n_best == 0 || self.per_context_n_best == 0 || self.max_answer_tokens == 0 {
            return Err(DecodeError::InvalidParameter(
                "n_best, per_context_n_best and max_answer_tokens must be ≥ 1".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.list_threshold) {
            return Err(DecodeError::InvalidParameter(
                "list_threshold must lie in [0, 1]".into(),
            ));
        }
        if !self.rerank_weight.is_finite() {
            return Err(DecodeError::InvalidParameter(
                "rerank_weight must be finite".into(),
            ));
        }
        Ok(())
    }
}

/// One context's record together with its context text, if known.
#[derive(Debug, Clone, Copy)]
pub struct ContextRecord<'a> {
    pub record: &'a SpanPredictionRecord,
    pub context: Option<&'a str>,
}

fn with_probs(mut answers: Vec<RankedAnswer>) -> Vec<RankedAnswer> {
    if answers.is_empty() {
        return answers;
    }
    let scores: Vec<f64> = answers.iter().map(|a| a.score).collect();
    let probs = softmax_probs(&scores).expect("span scores are finite");
    for (a, p) in answers.iter_mut().zip(probs) {
        a.prob = p;
    }
    answers
}

/// All contexts' n-best candidates merged by raw score and deduplicated by
/// normalized text, highest score kept. Probabilities are over the merged
/// list.
pub fn merge_candidates(
    question_id: &str,
    records: &[ContextRecord<'_>],
    config: &DecodeConfig,
) -> Result<Vec<RankedAnswer>, DecodeError> {
    if records.is_empty() {
        return Err(DecodeError::NoRecords(question_id.to_string()));
    }
    let mut all = Vec::new();
    for (r, rec) in records.iter().enumerate() {
        for c in nbest(
            rec.record,
            config.per_context_n_best,
            config.max_answer_tokens,
            rec.context,
        )? {
            all.push((c, r));
        }
    }
    // context order breaks exact score ties so the merge is input-order stable
    all.sort_by(|(a, ra), (b, rb)| {
        rank_order((a.score, *ra, a.start_token), (b.score, *rb, b.start_token))
            .then(a.end_token.cmp(&b.end_token))
    });
    let mut seen = HashSet::new();
    let merged = all
        .into_iter()
        .filter(|(c, _)| seen.insert(normalize_answer(&c.text)))
        .map(|(c, r)| RankedAnswer {
            text: c.text,
            score: c.score,
            prob: 0.0,
            example_id: records[r].record.example_id.clone(),
        })
        .collect();
    Ok(with_probs(merged))
}

/// Adds `weight × sim` to each score, re-sorts (stable on ties) and
/// recomputes probabilities. Answers without a similarity entry get 0;
/// lookup tries the exact text first, then the normalized text.
pub fn rerank_with_similarity(
    candidates: &[RankedAnswer],
    sim_scores: &BTreeMap<String, f64>,
    weight: f64,
) -> Vec<RankedAnswer> {
    let normalized: HashMap<String, f64> = sim_scores
        .iter()
        .map(|(k, v)| (normalize_answer(k), *v))
        .collect();
    let mut out: Vec<RankedAnswer> = candidates
        .iter()
        .map(|c| {
            let sim = sim_scores
                .get(&c.text)
                .or_else(|| normalized.get(&normalize_answer(&c.text)))
                .copied()
                .unwrap_or(0.0);
            RankedAnswer {
                score: c.score + weight * sim,
                ..c.clone()
            }
        })
        .collect();
    out.sort_by(|a, b| score_desc(a.score, b.score));
    with_probs(out)
}

/// Factoid answers: the top `config.n_best` merged candidates.
pub fn decode_factoid(
    question_id: &str,
    records: &[ContextRecord<'_>],
    config: &DecodeConfig,
) -> Result<Vec<RankedAnswer>, DecodeError> {
    let mut merged = merge_candidates(question_id, records, config)?;
    merged.truncate(config.n_best);
    Ok(merged)
}

/// Candidates whose thresholded quantity is at least `threshold`, or the top
/// candidate alone when none qualifies.
pub fn select_list(
    candidates: &[RankedAnswer],
    threshold: f64,
    quantity: ListQuantity,
) -> Vec<RankedAnswer> {
    let value = |a: &RankedAnswer| match quantity {
        ListQuantity::MergedSoftmax => a.prob,
        ListQuantity::Sigmoid => sigmoid(a.score),
    };
    let picked: Vec<RankedAnswer> = candidates
        .iter()
        .filter(|a| value(a) >= threshold)
        .cloned()
        .collect();
    if picked.is_empty() {
        candidates.iter().take(1).cloned().collect()
    } else {
        picked
    }
}

pub fn decode_list(
    question_id: &str,
    records: &[ContextRecord<'_>],
    config: &DecodeConfig,
) -> Result<Vec<RankedAnswer>, DecodeError> {
    let merged = merge_candidates(question_id, records, config)?;
    Ok(select_list(
        &merged,
        config.list_threshold,
        config.list_quantity,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct YesNoDecision {
    pub label: YesNo,
    pub aggregate_logit: f64,
    /// Per-record probability of "yes", in input order.
    pub probs: Vec<f64>,
}

/// Sums the logits of all contexts; a positive sum means yes, anything else
/// (including exactly 0) means no.
pub fn decode_yesno(
    question_id: &str,
    records: &[YesNoPredictionRecord],
) -> Result<YesNoDecision, DecodeError> {
    if records.is_empty() {
        return Err(DecodeError::NoRecords(question_id.to_string()));
    }
    if records.iter().any(|r| !r.logit.is_finite()) {
        return Err(DecodeError::NonFiniteInput);
    }
    let aggregate_logit: f64 = records.iter().map(|r| r.logit).sum();
    Ok(YesNoDecision {
        label: if aggregate_logit > 0.0 {
            YesNo::Yes
        } else {
            YesNo::No
        },
        aggregate_logit,
        probs: records.iter().map(|r| sigmoid(r.logit)).collect(),
    })
}

/// Decoded output for one question.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodedQuestion {
    pub question_type: QuestionType,
    /// Ranked answers (factoid) or the selected answer set (list).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub answers: Vec<RankedAnswer>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub yesno: Option<YesNoDecision>,
}

impl DecodedQuestion {
    pub fn answer_texts(&self) -> Vec<String> {
        self.answers.iter().map(|a| a.text.clone()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodedFile {
    pub version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub header: Option<serde_json::Value>,
    pub config: DecodeConfig,
    pub questions: BTreeMap<String, DecodedQuestion>,
}

impl DecodedFile {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("decoded output serializes");
        s.push('\n');
        s
    }
}

/// Similarity scores per question: `question_id → answer text → score`.
pub type SimilarityScores = BTreeMap<String, BTreeMap<String, f64>>;

/// Groups records by question via the dataset and decodes every question
/// that has at least one record. Questions are decoded in parallel; the
/// result is keyed by question id, so output order does not depend on
/// scheduling.
pub fn decode_predictions(
    dataset: &DatasetFile,
    records: &[PredictionRecord],
    similarity: Option<&SimilarityScores>,
    config: &DecodeConfig,
) -> Result<DecodedFile, DecodeError> {
    config.validate()?;
    let by_id: HashMap<&str, usize> = dataset
        .examples
        .iter()
        .enumerate()
        .map(|(i, e)| (e.id.as_str(), i))
        .collect();
    let mut groups: BTreeMap<&str, (QuestionType, Vec<&PredictionRecord>)> = BTreeMap::new();
    let mut seen = HashSet::new();
    for rec in records {
        let id = rec.example_id();
        let &idx = by_id
            .get(id)
            .ok_or_else(|| DecodeError::UnknownExample(id.to_string()))?;
        if !seen.insert(id) {
            return Err(DecodeError::DuplicateRecord(id.to_string()));
        }
        let ex = &dataset.examples[idx];
        let fits = matches!(
            (ex.question_type, rec),
            (QuestionType::Yesno, PredictionRecord::YesNo(_))
                | (
                    QuestionType::Factoid | QuestionType::List,
                    PredictionRecord::Span(_)
                )
        );
        if !fits {
            return Err(DecodeError::RecordTypeMismatch(id.to_string()));
        }
        groups
            .entry(ex.question_key())
            .or_insert_with(|| (ex.question_type, Vec::new()))
            .1
            .push(rec);
    }
    // records of one question are decoded in example-id order
    for (_, recs) in groups.values_mut() {
        recs.sort_by(|a, b| a.example_id().cmp(b.example_id()));
    }
    let decoded: Result<Vec<(String, DecodedQuestion)>, DecodeError> = groups
        .par_iter()
        .map(|(&qid, (qtype, recs))| {
            let question = match qtype {
                QuestionType::Yesno => {
                    let yn: Vec<YesNoPredictionRecord> = recs
                        .iter()
                        .filter_map(|r| match r {
                            PredictionRecord::YesNo(y) => Some(y.clone()),
                            PredictionRecord::Span(_) => None,
                        })
                        .collect();
                    DecodedQuestion {
                        question_type: *qtype,
                        answers: Vec::new(),
                        yesno: Some(decode_yesno(qid, &yn)?),
                    }
                }
                _ => {
                    let ctx: Vec<ContextRecord<'_>> = recs
                        .iter()
                        .filter_map(|r| match r {
                            PredictionRecord::Span(s) => Some(ContextRecord {
                                record: s,
                                context: Some(
                                    dataset.examples[by_id[s.example_id.as_str()]]
                                        .context
                                        .as_str(),
                                ),
                            }),
                            PredictionRecord::YesNo(_) => None,
                        })
                        .collect();
                    let mut merged = merge_candidates(qid, &ctx, config)?;
                    if config.rerank_weight != 0.0 {
                        if let Some(sims) = similarity.and_then(|s| s.get(qid)) {
                            merged = rerank_with_similarity(&merged, sims, config.rerank_weight);
                        }
                    }
                    let answers = if *qtype == QuestionType::Factoid {
                        merged.truncate(config.n_best);
                        merged
                    } else {
                        select_list(&merged, config.list_threshold, config.list_quantity)
                    };
                    DecodedQuestion {
                        question_type: *qtype,
                        answers,
                        yesno: None,
                    }
                }
            };
            Ok((qid.to_string(), question))
        })
        .collect();
    Ok(DecodedFile {
        version: DECODED_VERSION.to_string(),
        header: None,
        config: config.clone(),
        questions: decoded?.into_iter().collect(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn record(logits: &[(f64, f64)]) -> SpanPredictionRecord {
        SpanPredictionRecord {
            example_id: "e".into(),
            tokens: logits
                .iter()
                .enumerate()
                .map(|(k, &(s, e))| TokenLogits {
                    text: format!("w{k}"),
                    char_start: 3 * k,
                    char_end: 3 * k + 2,
                    start_logit: s,
                    end_logit: e,
                })
                .collect(),
        }
    }

    /// Exhaustive enumeration of all valid spans.
    fn oracle(r: &SpanPredictionRecord, n: usize, max_len: usize) -> Vec<(usize, usize)> {
        let t = r.tokens.len();
        let mut all = Vec::new();
        for i in 0..t {
            for j in i..t {
                if j - i < max_len {
                    all.push((r.tokens[i].start_logit + r.tokens[j].end_logit, i, j));
                }
            }
        }
        all.sort_by(|a, b| rank_order(*a, *b));
        all.into_iter().take(n).map(|(_, i, j)| (i, j)).collect()
    }

    fn spans(c: &[SpanCandidate]) -> Vec<(usize, usize)> {
        c.iter().map(|c| (c.start_token, c.end_token)).collect()
    }

    #[test]
    fn softmax_examples() {
        let p = softmax_probs(&[0.0, 3f64.ln()]).unwrap();
        assert!((p[0] - 0.25).abs() < 1e-12 && (p[1] - 0.75).abs() < 1e-12);
        assert_eq!(softmax_probs(&[2.0; 4]).unwrap(), vec![0.25; 4]);
        assert!(matches!(softmax_probs(&[]), Err(DecodeError::EmptyInput)));
        assert!(matches!(
            softmax_probs(&[1.0, f64::NAN]),
            Err(DecodeError::NonFiniteInput)
        ));
        assert_eq!(sigmoid(0.0), 0.5);
        assert!(sigmoid(-800.0) >= 0.0 && sigmoid(800.0) == 1.0);
    }

    #[test]
    fn two_token_example() {
        let r = record(&[(2.0, 0.0), (0.0, 2.0)]);
        let c = nbest(&r, 3, 2, None).unwrap();
        assert_eq!(spans(&c), vec![(0, 1), (0, 0), (1, 1)]);
        assert_eq!(c[0].score, 4.0);
        assert_eq!(c[0].text, "w0 w1");
        let single = nbest(&record(&[(0.3, -0.2)]), 5, 30, None).unwrap();
        assert_eq!(spans(&single), vec![(0, 0)]);
        assert_eq!(single[0].prob, 1.0);
    }

    #[test]
    fn length_bound_and_validation() {
        let r = record(&[(5.0, 0.0), (0.0, 0.0), (0.0, 5.0)]);
        assert!(nbest(&r, 10, 2, None)
            .unwrap()
            .iter()
            .all(|c| c.end_token - c.start_token < 2));
        assert!(nbest(&r, 0, 2, None).is_err());
        let mut bad = r.clone();
        bad.tokens[1].char_start = 0;
        assert!(matches!(
            nbest(&bad, 1, 2, None),
            Err(DecodeError::InvalidRecord { .. })
        ));
        assert!(nbest(&r, 1, 2, Some("short")).is_err());
    }

    #[test]
    fn dedups_by_normalized_text() {
        let ctx = "The p53 p53";
        let r = SpanPredictionRecord {
            example_id: "e".into(),
            tokens: vec![
                TokenLogits {
                    text: "The".into(),
                    char_start: 0,
                    char_end: 3,
                    start_logit: 3.0,
                    end_logit: 0.0,
                },
                TokenLogits {
                    text: "p53".into(),
                    char_start: 4,
                    char_end: 7,
                    start_logit: 2.0,
                    end_logit: 2.0,
                },
                TokenLogits {
                    text: "p53".into(),
                    char_start: 8,
                    char_end: 11,
                    start_logit: 1.0,
                    end_logit: 1.0,
                },
            ],
        };
        let c = nbest(&r, 10, 3, Some(ctx)).unwrap();
        // "The p53" (5.0) survives; "p53" at (1,1) then drops the later copies
        assert_eq!(c[0].text, "The p53");
        let texts: Vec<&str> = c.iter().map(|c| c.text.as_str()).collect();
        assert_eq!(
            texts
                .iter()
                .filter(|t| normalize_answer(t) == "p53")
                .count(),
            1
        );
        let sum: f64 = c.iter().map(|c| c.prob).sum();
        assert!((sum - 1.0).abs() < 1e-9);
    }

    fn ctx_record(id: &str, ctx: &str, logits: &[(f64, f64)]) -> SpanPredictionRecord {
        let mut pos = 0;
        let tokens = ctx
            .split(' ')
            .zip(logits)
            .map(|(w, &(s, e))| {
                let t = TokenLogits {
                    text: w.into(),
                    char_start: pos,
                    char_end: pos + w.chars().count(),
                    start_logit: s,
                    end_logit: e,
                };
                pos += w.chars().count() + 1;
                t
            })
            .collect();
        SpanPredictionRecord {
            example_id: id.into(),
            tokens,
        }
    }

    #[test]
    fn factoid_merges_across_contexts() {
        let c1 = "aspirin reduces pain";
        let c2 = "Aspirin and ibuprofen";
        let r1 = ctx_record("a", c1, &[(3.0, 3.0), (0.0, 0.0), (0.0, 0.0)]);
        let r2 = ctx_record("b", c2, &[(4.0, 4.0), (0.0, 0.0), (1.0, 1.0)]);
        let recs = [
            ContextRecord {
                record: &r1,
                context: Some(c1),
            },
            ContextRecord {
                record: &r2,
                context: Some(c2),
            },
        ];
        let cfg = DecodeConfig::default();
        let top = decode_factoid("q", &recs, &cfg).unwrap();
        assert!(top.len() <= 5);
        assert_eq!(top[0].text, "Aspirin");
        assert_eq!(top[0].score, 8.0);
        assert_eq!(top[0].example_id, "b");
        assert_eq!(
            top.iter()
                .filter(|a| normalize_answer(&a.text) == "aspirin")
                .count(),
            1
        );
        assert!(matches!(
            decode_factoid("q", &[], &cfg),
            Err(DecodeError::NoRecords(_))
        ));
    }

    fn answers(probs: &[f64]) -> Vec<RankedAnswer> {
        probs
            .iter()
            .enumerate()
            .map(|(k, &p)| RankedAnswer {
                text: format!("a{k}"),
                score: -(k as f64),
                prob: p,
                example_id: "e".into(),
            })
            .collect()
    }

    #[test]
    fn list_threshold_is_inclusive() {
        let picked = select_list(
            &answers(&[0.6, 0.42, 0.3]),
            0.42,
            ListQuantity::MergedSoftmax,
        );
        assert_eq!(picked.len(), 2);
        let fallback = select_list(&answers(&[0.3, 0.2]), 0.42, ListQuantity::MergedSoftmax);
        assert_eq!(fallback.len(), 1);
        assert_eq!(fallback[0].text, "a0");
        assert_eq!(
            select_list(&answers(&[0.3, 0.2, 0.1]), 0.0, ListQuantity::MergedSoftmax).len(),
            3
        );
        // sigmoid(0) = 0.5, sigmoid(-1) ≈ 0.27
        assert_eq!(
            select_list(&answers(&[0.0, 0.0]), 0.42, ListQuantity::Sigmoid).len(),
            1
        );
    }

    #[test]
    fn rerank_examples() {
        let cands = vec![
            RankedAnswer {
                text: "x".into(),
                score: 4.0,
                prob: 0.0,
                example_id: "e".into(),
            },
            RankedAnswer {
                text: "y".into(),
                score: 3.0,
                prob: 0.0,
                example_id: "e".into(),
            },
        ];
        let mut sims = BTreeMap::new();
        sims.insert("y".to_string(), 2.0);
        let flipped = rerank_with_similarity(&cands, &sims, 1.0);
        assert_eq!(flipped[0].text, "y");
        assert_eq!(flipped[0].score, 5.0);
        let same = rerank_with_similarity(&cands, &sims, 0.0);
        assert_eq!(same[0].text, "x");
        let missing = rerank_with_similarity(&cands, &BTreeMap::new(), 3.0);
        assert_eq!(missing[0].score, 4.0);
    }

    #[test]
    fn yesno_aggregation() {
        let recs = |ls: &[f64]| -> Vec<YesNoPredictionRecord> {
            ls.iter()
                .map(|&l| YesNoPredictionRecord {
                    example_id: "e".into(),
                    logit: l,
                })
                .collect()
        };
        let d = decode_yesno("q", &recs(&[1.2, -0.4, 0.1])).unwrap();
        assert_eq!(d.label, YesNo::Yes);
        assert!((d.aggregate_logit - 0.9).abs() < 1e-12);
        assert_eq!(
            decode_yesno("q", &recs(&[-1.2, 0.4, -0.1])).unwrap().label,
            YesNo::No
        );
        assert_eq!(decode_yesno("q", &recs(&[0.0])).unwrap().label, YesNo::No);
        assert_eq!(decode_yesno("q", &recs(&[0.0])).unwrap().probs, vec![0.5]);
        assert!(decode_yesno("q", &[]).is_err());
    }

    #[test]
    fn reads_jsonl() {
        let input = r#"{"example_id":"a","tokens":[{"text":"x","char_start":0,"char_end":1,"start_logit":0.5,"end_logit":-1.0}]}

{"example_id":"b","logit":-0.25}
"#;
        let recs = read_predictions(input.as_bytes()).unwrap();
        assert!(matches!(recs[0], PredictionRecord::Span(_)));
        assert!(matches!(recs[1], PredictionRecord::YesNo(_)));
        assert!(matches!(
            read_predictions("{\"example_id\":1}".as_bytes()),
            Err(DecodeError::MalformedLine { line_no: 1, .. })
        ));
    }

    fn logits_strategy() -> impl Strategy<Value = Vec<(f64, f64)>> {
        proptest::collection::vec((-3.0f64..3.0, -3.0f64..3.0), 1..24)
    }

    proptest! {
        #[test]
        fn matches_enumeration(logits in logits_strategy(), n in 1usize..30, max_len in 1usize..8) {
            let r = record(&logits);
            prop_assert_eq!(spans(&nbest(&r, n, max_len, None).unwrap()), oracle(&r, n, max_len));
        }

        #[test]
        fn shift_invariance(logits in logits_strategy(), c in -50.0f64..50.0, on_start in any::<bool>()) {
            // integer-valued logits keep the shifted sums exact
            let ints: Vec<(f64, f64)> = logits.iter().map(|&(s, e)| (s.round(), e.round())).collect();
            let shifted: Vec<(f64, f64)> = ints
                .iter()
                .map(|&(s, e)| if on_start { (s + c.round(), e) } else { (s, e + c.round()) })
                .collect();
            let a = nbest(&record(&ints), 10, 5, None).unwrap();
            let b = nbest(&record(&shifted), 10, 5, None).unwrap();
            prop_assert_eq!(spans(&a), spans(&b));
        }

        #[test]
        fn raising_a_span_never_lowers_its_rank(logits in logits_strategy(), pick in any::<prop::sample::Index>(), bump in 0.0f64..5.0) {
            // lifting start logit i raises every span starting at i, (i, j) included
            let r = record(&logits);
            let before = spans(&nbest(&r, usize::MAX, 4, None).unwrap());
            let (i, j) = before[pick.index(before.len())];
            let mut raised = r.clone();
            raised.tokens[i].start_logit += bump;
            let after = spans(&nbest(&raised, usize::MAX, 4, None).unwrap());
            let rank = |v: &[(usize, usize)]| v.iter().position(|&s| s == (i, j)).unwrap();
            prop_assert!(rank(&after) <= rank(&before));
        }

        #[test]
        fn softmax_sums_to_one(xs in proptest::collection::vec(-50.0f64..50.0, 1..40), c in -1000.0f64..1000.0) {
            let p = softmax_probs(&xs).unwrap();
            prop_assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            let shifted: Vec<f64> = xs.iter().map(|x| x + c).collect();
            let q = softmax_probs(&shifted).unwrap();
            for (a, b) in p.iter().zip(&q) {
                prop_assert!((a - b).abs() < 1e-9);
            }
        }

        #[test]
        fn list_output_nonempty_subset(probs in proptest::collection::vec(0.0f64..1.0, 1..20), th in 0.0f64..1.0) {
            let cands = answers(&probs);
            let picked = select_list(&cands, th, ListQuantity::MergedSoftmax);
            prop_assert!(!picked.is_empty());
            prop_assert!(picked.iter().all(|p| cands.contains(p)));
        }
    }
}
