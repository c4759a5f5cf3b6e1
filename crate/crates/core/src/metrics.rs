//! Challenge-style QA metrics.
//!
//! * factoid: strict accuracy (rank-1 match), lenient accuracy (match within
//!   the top-`window` predictions) and MRR over the same window
//! * list: per-question precision / recall / F1, macro-averaged
//! * yes/no: accuracy, per-class F1 and their mean
//!
//! Answers match when their [`normalize_answer`] forms are equal; any gold
//! variant counts.

use std::collections::{BTreeMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use unicode_normalization::UnicodeNormalization;

use crate::dataset::{DatasetFile, QuestionType, YesNo};
use crate::decode::DecodedFile;

pub const REPORT_VERSION: &str = "bioqa-report/1";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum MetricsError {
    #[error("prediction for unknown question `{0}`")]
    IdMismatch(String),
    #[error(
        "question `{question_id}` is {expected} in the dataset but {found} in the predictions"
    )]
    TypeMismatch {
        question_id: String,
        expected: String,
        found: String,
    },
}

const ARTICLES: &[&str] = &["a", "an", "the"];

fn is_edge_punct(c: char) -> bool {
    !c.is_alphanumeric() && !c.is_whitespace()
}

/// Canonical answer form: NFKC, lowercase, outer punctuation and leading
/// articles stripped, whitespace collapsed. Idempotent.
///
/// Articles are removed only at the front so that names such as
/// "vitamin A" or "hepatitis A" keep their letter.
pub fn normalize_answer(text: &str) -> String {
    let mut cur: String = text.nfkc().flat_map(char::to_lowercase).nfkc().collect();
    loop {
        let trimmed = cur.trim_matches(|c: char| is_edge_punct(c) || c.is_whitespace());
        let mut tokens: Vec<&str> = trimmed.split_whitespace().collect();
        while tokens.len() > 1 && ARTICLES.contains(&tokens[0]) {
            tokens.remove(0);
        }
        let next = tokens.join(" ");
        if next == cur {
            return next;
        }
        cur = next;
    }
}

/// Gold answer for one question.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoldAnswer {
    pub question_id: String,
    pub question_type: QuestionType,
    /// Items, each with accepted variants. Factoid: one item. Empty for yes/no.
    pub variants: Vec<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<YesNo>,
}

impl GoldAnswer {
    fn normalized_items(&self) -> Vec<HashSet<String>> {
        self.variants
            .iter()
            .map(|v| {
                v.iter()
                    .map(|s| normalize_answer(s))
                    .filter(|s| !s.is_empty())
                    .collect()
            })
            .filter(|s: &HashSet<String>| !s.is_empty())
            .collect()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct FactoidScores {
    pub sacc: f64,
    pub lacc: f64,
    pub mrr: f64,
    pub n: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ListScores {
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub n: usize,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct YesNoScores {
    pub acc: f64,
    pub f1: f64,
    pub f1_yes: f64,
    pub f1_no: f64,
    pub n: usize,
}

/// Per-question outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuestionRow {
    pub question_id: String,
    pub question_type: QuestionType,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub predicted: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predicted_label: Option<YesNo>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rank: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub precision: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recall: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub f1: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub correct: Option<bool>,
    pub missing_prediction: bool,
}

impl QuestionRow {
    fn new(question_id: &str, question_type: QuestionType) -> Self {
        QuestionRow {
            question_id: question_id.to_string(),
            question_type,
            predicted: Vec::new(),
            predicted_label: None,
            rank: None,
            precision: None,
            recall: None,
            f1: None,
            correct: None,
            missing_prediction: false,
        }
    }
}

fn mean(sum: f64, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// 1-based rank of the first prediction matching any gold variant within
/// `window`.
pub fn first_match_rank(gold: &GoldAnswer, predictions: &[String], window: usize) -> Option<usize> {
    let gold_set: HashSet<String> = gold.normalized_items().into_iter().flatten().collect();
    predictions
        .iter()
        .take(window)
        .position(|p| gold_set.contains(&normalize_answer(p)))
        .map(|i| i + 1)
}

pub fn factoid_metrics(
    gold: &[GoldAnswer],
    predictions: &BTreeMap<String, Vec<String>>,
    window: usize,
) -> (FactoidScores, Vec<QuestionRow>) {
    let mut rows = Vec::with_capacity(gold.len());
    let (mut strict, mut lenient, mut rr) = (0usize, 0usize, 0.0f64);
    for g in gold {
        let mut row = QuestionRow::new(&g.question_id, g.question_type);
        match predictions.get(&g.question_id) {
            None => row.missing_prediction = true,
            Some(p) => {
                row.predicted = p.iter().take(window).cloned().collect();
                row.rank = first_match_rank(g, p, window);
            }
        }
        if let Some(r) = row.rank {
            lenient += 1;
            if r == 1 {
                strict += 1;
            }
            rr += 1.0 / r as f64;
        }
        rows.push(row);
    }
    let n = gold.len();
    let scores = FactoidScores {
        sacc: mean(strict as f64, n),
        lacc: mean(lenient as f64, n),
        mrr: mean(rr, n),
        n,
    };
    (scores, rows)
}

/// Precision, recall and F1 for one list question. Predictions are
/// deduplicated after normalization and each gold item matches at most once.
pub fn list_prf(gold: &GoldAnswer, predicted: &[String]) -> (f64, f64, f64) {
    let items = gold.normalized_items();
    let mut seen = HashSet::new();
    let preds: Vec<String> = predicted
        .iter()
        .map(|p| normalize_answer(p))
        .filter(|p| !p.is_empty() && seen.insert(p.clone()))
        .collect();
    let mut used = vec![false; items.len()];
    let mut matched = 0usize;
    for p in &preds {
        if let Some(k) = (0..items.len()).find(|&k| !used[k] && items[k].contains(p)) {
            used[k] = true;
            matched += 1;
        }
    }
    let precision = if preds.is_empty() {
        0.0
    } else {
        matched as f64 / preds.len() as f64
    };
    let recall = if items.is_empty() {
        0.0
    } else {
        matched as f64 / items.len() as f64
    };
    let f1 = if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    (precision, recall, f1)
}

pub fn list_metrics(
    gold: &[GoldAnswer],
    predictions: &BTreeMap<String, Vec<String>>,
) -> (ListScores, Vec<QuestionRow>) {
    let mut rows = Vec::with_capacity(gold.len());
    let (mut sp, mut sr, mut sf) = (0.0, 0.0, 0.0);
    for g in gold {
        let mut row = QuestionRow::new(&g.question_id, g.question_type);
        let (p, r, f) = match predictions.get(&g.question_id) {
            None => {
                row.missing_prediction = true;
                (0.0, 0.0, 0.0)
            }
            Some(pred) => {
                row.predicted = pred.clone();
                list_prf(g, pred)
            }
        };
        sp += p;
        sr += r;
        sf += f;
        row.precision = Some(p);
        row.recall = Some(r);
        row.f1 = Some(f);
        rows.push(row);
    }
    let n = gold.len();
    let scores = ListScores {
        macro_precision: mean(sp, n),
        macro_recall: mean(sr, n),
        macro_f1: mean(sf, n),
        n,
    };
    (scores, rows)
}

fn class_f1(tp: usize, fp: usize, fn_: usize) -> f64 {
    let denom = 2 * tp + fp + fn_;
    if denom == 0 {
        0.0
    } else {
        2.0 * tp as f64 / denom as f64
    }
}

/// Accuracy and class-wise F1. A missing prediction counts as wrong and as a
/// false negative for the gold class. A class absent from both gold and
/// predictions gets F1 0 and is reported in the returned flags.
pub fn yesno_metrics(gold: &[YesNo], predicted: &[Option<YesNo>]) -> (YesNoScores, Vec<String>) {
    assert_eq!(
        gold.len(),
        predicted.len(),
        "gold and predictions must align"
    );
    let mut correct = 0usize;
    let (mut tp_y, mut fp_y, mut fn_y) = (0, 0, 0);
    let (mut tp_n, mut fp_n, mut fn_n) = (0, 0, 0);
    for (g, p) in gold.iter().zip(predicted) {
        match (g, p) {
            (YesNo::Yes, Some(YesNo::Yes)) => {
                correct += 1;
                tp_y += 1;
            }
            (YesNo::No, Some(YesNo::No)) => {
                correct += 1;
                tp_n += 1;
            }
            (YesNo::Yes, Some(YesNo::No)) => {
                fn_y += 1;
                fp_n += 1;
            }
            (YesNo::No, Some(YesNo::Yes)) => {
                fn_n += 1;
                fp_y += 1;
            }
            (YesNo::Yes, None) => fn_y += 1,
            (YesNo::No, None) => fn_n += 1,
        }
    }
    let mut flags = Vec::new();
    if tp_y + fp_y + fn_y == 0 && !gold.is_empty() {
        flags.push("class `yes` absent".to_string());
    }
    if tp_n + fp_n + fn_n == 0 && !gold.is_empty() {
        flags.push("class `no` absent".to_string());
    }
    let f1_yes = class_f1(tp_y, fp_y, fn_y);
    let f1_no = class_f1(tp_n, fp_n, fn_n);
    let scores = YesNoScores {
        acc: mean(correct as f64, gold.len()),
        f1: (f1_yes + f1_no) / 2.0,
        f1_yes,
        f1_no,
        n: gold.len(),
    };
    (scores, flags)
}

/// Macro F1 from reported class F1 values.
pub fn macro_f1(f1_yes: f64, f1_no: f64) -> f64 {
    (f1_yes + f1_no) / 2.0
}

/// The three challenge ranking metrics.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RankingMetrics {
    pub yesno_accuracy: f64,
    pub factoid_mrr: f64,
    pub list_f_measure: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub version: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub header: Option<serde_json::Value>,
    pub mrr_window: usize,
    pub factoid: FactoidScores,
    pub list: ListScores,
    pub yesno: YesNoScores,
    pub ranking: RankingMetrics,
    pub flags: Vec<String>,
    pub per_question: Vec<QuestionRow>,
}

impl EvaluationReport {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// Plain-text summary with one block per question type.
    pub fn to_table(&self) -> String {
        let (f, l, y) = (&self.factoid, &self.list, &self.yesno);
        let mut out = String::new();
        out.push_str(&format!(
            "{:<8} {:>6} {:>8} {:>8} {:>8}\n",
            "", "n", "SAcc", "LAcc", "MRR"
        ));
        out.push_str(&format!(
            "{:<8} {:>6} {:>8.4} {:>8.4} {:>8.4}\n",
            "factoid", f.n, f.sacc, f.lacc, f.mrr
        ));
        out.push_str(&format!(
            "{:<8} {:>6} {:>8} {:>8} {:>8}\n",
            "", "n", "Prec", "Recall", "MacroF1"
        ));
        out.push_str(&format!(
            "{:<8} {:>6} {:>8.4} {:>8.4} {:>8.4}\n",
            "list", l.n, l.macro_precision, l.macro_recall, l.macro_f1
        ));
        out.push_str(&format!(
            "{:<8} {:>6} {:>8} {:>8} {:>8} {:>8}\n",
            "", "n", "Acc", "F1", "F1 yes", "F1 no"
        ));
        out.push_str(&format!(
            "{:<8} {:>6} {:>8.4} {:>8.4} {:>8.4} {:>8.4}\n",
            "yes/no", y.n, y.acc, y.f1, y.f1_yes, y.f1_no
        ));
        out.push_str(&format!(
            "ranking: yes/no accuracy {:.4}, factoid MRR {:.4}, list F-measure {:.4}\n",
            self.ranking.yesno_accuracy, self.ranking.factoid_mrr, self.ranking.list_f_measure
        ));
        for flag in &self.flags {
            out.push_str(&format!("note: {flag}\n"));
        }
        out
    }
}

struct QuestionGold {
    question_type: QuestionType,
    items: Vec<Vec<String>>,
    label: Option<YesNo>,
}

/// Gold answers per question, keyed by question id. Contexts of one question
/// share gold; the first example carrying it wins.
fn collect_gold(dataset: &DatasetFile) -> BTreeMap<String, QuestionGold> {
    let mut gold: BTreeMap<String, QuestionGold> = BTreeMap::new();
    for ex in &dataset.examples {
        let entry = gold
            .entry(ex.question_key().to_string())
            .or_insert_with(|| QuestionGold {
                question_type: ex.question_type,
                items: Vec::new(),
                label: None,
            });
        if entry.items.is_empty() {
            entry.items = ex.gold_items();
        }
        if entry.label.is_none() {
            entry.label = ex.yesno_label;
        }
    }
    gold
}

/// Scores decoded predictions against a dataset. Questions without gold are
/// left out and noted in `flags`; a prediction for a question the dataset
/// lacks is an error.
pub fn evaluate(
    dataset: &DatasetFile,
    decoded: &DecodedFile,
    window: usize,
) -> Result<EvaluationReport, MetricsError> {
    let gold = collect_gold(dataset);
    for (qid, q) in &decoded.questions {
        let g = gold
            .get(qid)
            .ok_or_else(|| MetricsError::IdMismatch(qid.clone()))?;
        if g.question_type != q.question_type {
            return Err(MetricsError::TypeMismatch {
                question_id: qid.clone(),
                expected: g.question_type.as_str().into(),
                found: q.question_type.as_str().into(),
            });
        }
    }
    let mut flags = Vec::new();
    let (mut factoid_gold, mut list_gold) = (Vec::new(), Vec::new());
    let (mut yn_ids, mut yn_gold, mut yn_pred) = (Vec::new(), Vec::new(), Vec::new());
    let mut no_gold = 0usize;
    for (qid, g) in &gold {
        let answer = |items: &Vec<Vec<String>>| GoldAnswer {
            question_id: qid.clone(),
            question_type: g.question_type,
            variants: items.clone(),
            label: g.label,
        };
        match g.question_type {
            QuestionType::Factoid | QuestionType::List if g.items.is_empty() => no_gold += 1,
            QuestionType::Factoid => factoid_gold.push(answer(&g.items)),
            QuestionType::List => list_gold.push(answer(&g.items)),
            QuestionType::Yesno => match g.label {
                None => no_gold += 1,
                Some(label) => {
                    yn_ids.push(qid.clone());
                    yn_gold.push(label);
                    yn_pred.push(
                        decoded
                            .questions
                            .get(qid)
                            .and_then(|q| q.yesno.as_ref())
                            .map(|d| d.label),
                    );
                }
            },
        }
    }
    if no_gold > 0 {
        flags.push(format!(
            "{no_gold} question(s) without gold answers were not scored"
        ));
    }
    let texts = |gs: &[GoldAnswer]| -> BTreeMap<String, Vec<String>> {
        gs.iter()
            .filter_map(|g| {
                decoded
                    .questions
                    .get(&g.question_id)
                    .map(|q| (g.question_id.clone(), q.answer_texts()))
            })
            .collect()
    };
    let (factoid, mut rows) = factoid_metrics(&factoid_gold, &texts(&factoid_gold), window);
    let (list, list_rows) = list_metrics(&list_gold, &texts(&list_gold));
    let (yesno, yn_flags) = yesno_metrics(&yn_gold, &yn_pred);
    rows.extend(list_rows);
    for ((qid, g), p) in yn_ids.iter().zip(&yn_gold).zip(&yn_pred) {
        let mut row = QuestionRow::new(qid, QuestionType::Yesno);
        row.predicted_label = *p;
        row.correct = Some(*p == Some(*g));
        row.missing_prediction = p.is_none();
        rows.push(row);
    }
    rows.sort_by(|a, b| a.question_id.cmp(&b.question_id));
    let missing = rows.iter().filter(|r| r.missing_prediction).count();
    if missing > 0 {
        flags.push(format!(
            "{missing} question(s) had no prediction and were scored as misses"
        ));
    }
    flags.extend(yn_flags);
    Ok(EvaluationReport {
        version: REPORT_VERSION.to_string(),
        header: None,
        mrr_window: window,
        ranking: RankingMetrics {
            yesno_accuracy: yesno.acc,
            factoid_mrr: factoid.mrr,
            list_f_measure: list.macro_f1,
        },
        factoid,
        list,
        yesno,
        flags,
        per_question: rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn factoid_gold(id: &str, v: &[&str]) -> GoldAnswer {
        GoldAnswer {
            question_id: id.into(),
            question_type: QuestionType::Factoid,
            variants: vec![v.iter().map(|s| s.to_string()).collect()],
            label: None,
        }
    }

    fn list_gold(id: &str, items: &[&str]) -> GoldAnswer {
        GoldAnswer {
            question_id: id.into(),
            question_type: QuestionType::List,
            variants: items.iter().map(|s| vec![s.to_string()]).collect(),
            label: None,
        }
    }

    fn strings(v: &[&str]) -> Vec<String> {
        v.iter().map(|s| s.to_string()).collect()
    }

    #[test]
    fn normalization_rules() {
        assert_eq!(normalize_answer("The p53"), "p53");
        assert_eq!(normalize_answer("BRCA-1 "), normalize_answer("brca-1"));
        assert_eq!(normalize_answer("  (EGFR).  "), "egfr");
        assert_eq!(normalize_answer("vitamin   A"), "vitamin a");
        assert_eq!(normalize_answer("ＡＢＣ"), "abc");
        assert_eq!(normalize_answer("the"), "the");
        assert_eq!(normalize_answer("a the p53"), "p53");
    }

    #[test]
    fn factoid_oracle() {
        // gold found at ranks 1, 3, none, 2
        let gold = vec![
            factoid_gold("q1", &["a"]),
            factoid_gold("q2", &["b"]),
            factoid_gold("q3", &["c"]),
            factoid_gold("q4", &["d"]),
        ];
        let mut pred = BTreeMap::new();
        pred.insert("q1".to_string(), strings(&["a", "x", "y"]));
        pred.insert("q2".to_string(), strings(&["x", "y", "B", "z"]));
        pred.insert("q3".to_string(), strings(&["x", "y", "z", "w", "v"]));
        pred.insert("q4".to_string(), strings(&["x", "the d"]));
        let (s, rows) = factoid_metrics(&gold, &pred, 5);
        assert_eq!(s.sacc, 0.25);
        assert_eq!(s.lacc, 0.75);
        assert!((s.mrr - 11.0 / 24.0).abs() < 1e-12);
        assert_eq!(
            rows.iter().map(|r| r.rank).collect::<Vec<_>>(),
            vec![Some(1), Some(3), None, Some(2)]
        );
    }

    #[test]
    fn factoid_extremes_and_window() {
        let gold = vec![factoid_gold("q1", &["a"]), factoid_gold("q2", &["b"])];
        let mut all = BTreeMap::new();
        all.insert("q1".to_string(), strings(&["a"]));
        all.insert("q2".to_string(), strings(&["b"]));
        let (s, _) = factoid_metrics(&gold, &all, 5);
        assert_eq!((s.sacc, s.lacc, s.mrr), (1.0, 1.0, 1.0));
        let mut none = BTreeMap::new();
        none.insert("q1".to_string(), strings(&["z"]));
        let (s, rows) = factoid_metrics(&gold, &none, 5);
        assert_eq!((s.sacc, s.lacc, s.mrr), (0.0, 0.0, 0.0));
        assert!(rows[1].missing_prediction);
        // a hit at rank 6 is outside the window
        let mut late = BTreeMap::new();
        late.insert("q1".to_string(), strings(&["1", "2", "3", "4", "5", "a"]));
        assert_eq!(factoid_metrics(&gold[..1], &late, 5).0.lacc, 0.0);
        assert_eq!(factoid_metrics(&[], &late, 5).0, FactoidScores::default());
    }

    #[test]
    fn list_oracles() {
        let g = list_gold("q", &["a", "b", "c"]);
        let (p, r, f) = list_prf(&g, &strings(&["a", "b", "d"]));
        assert!((p - 2.0 / 3.0).abs() < 1e-12);
        assert!((r - 2.0 / 3.0).abs() < 1e-12);
        assert!((f - 2.0 / 3.0).abs() < 1e-12);
        assert_eq!(list_prf(&g, &strings(&["c", "b", "a"])), (1.0, 1.0, 1.0));
        let g2 = list_gold("q", &["a", "b"]);
        let (p, r, _) = list_prf(&g2, &strings(&["a", "a", "b"]));
        assert_eq!((p, r), (1.0, 1.0));
        assert_eq!(list_prf(&g2, &strings(&["x"])), (0.0, 0.0, 0.0));
    }

    #[test]
    fn list_gold_item_matches_once() {
        let g = GoldAnswer {
            question_id: "q".into(),
            question_type: QuestionType::List,
            variants: vec![strings(&["EGFR", "ErbB1"]), strings(&["HER2"])],
            label: None,
        };
        // two variants of the same item count once
        let (p, r, _) = list_prf(&g, &strings(&["egfr", "erbb1"]));
        assert_eq!((p, r), (0.5, 0.5));
    }

    #[test]
    fn list_missing_prediction() {
        let gold = vec![list_gold("q1", &["a"]), list_gold("q2", &["b"])];
        let mut pred = BTreeMap::new();
        pred.insert("q1".to_string(), strings(&["a"]));
        let (s, rows) = list_metrics(&gold, &pred);
        assert_eq!(s.macro_f1, 0.5);
        assert!(rows[1].missing_prediction);
    }

    #[test]
    fn yesno_oracle() {
        use YesNo::*;
        let (s, flags) = yesno_metrics(
            &[Yes, Yes, No, No],
            &[Some(Yes), Some(No), Some(No), Some(No)],
        );
        assert_eq!(s.acc, 0.75);
        assert!((s.f1_yes - 2.0 / 3.0).abs() < 1e-12);
        assert!((s.f1_no - 0.8).abs() < 1e-12);
        assert!((s.f1 - 11.0 / 15.0).abs() < 1e-12);
        assert!(flags.is_empty());
        let (s, _) = yesno_metrics(&[Yes, No], &[Some(Yes), Some(No)]);
        assert_eq!((s.acc, s.f1), (1.0, 1.0));
        let (s, flags) = yesno_metrics(&[Yes, Yes], &[Some(Yes), None]);
        assert_eq!(s.acc, 0.5);
        assert_eq!(s.f1_no, 0.0);
        assert_eq!(flags.len(), 1);
        assert!((macro_f1(0.90, 0.86) - 0.88).abs() < 1e-12);
    }

    mod report {
        use super::*;
        use crate::dataset::{Answer, Meta, Provenance, QAExample};
        use crate::decode::{
            DecodeConfig, DecodedQuestion, RankedAnswer, YesNoDecision, DECODED_VERSION,
        };

        fn example(
            qid: &str,
            ctx: &str,
            qtype: QuestionType,
            gold: &[&str],
            label: Option<YesNo>,
        ) -> QAExample {
            QAExample {
                id: format!("{qid}-{ctx}"),
                question_type: qtype,
                question: "q?".into(),
                context: gold.join(" "),
                answers: gold
                    .iter()
                    .scan(0, |pos, g| {
                        let a = Answer {
                            text: g.to_string(),
                            answer_start: *pos,
                        };
                        *pos += g.chars().count() + 1;
                        Some(a)
                    })
                    .collect(),
                yesno_label: label,
                provenance: Provenance::Bioasq,
                meta: Meta {
                    question_id: Some(qid.into()),
                    source_id: qid.into(),
                    ..Meta::default()
                },
            }
        }

        fn ranked(texts: &[&str]) -> DecodedQuestion {
            DecodedQuestion {
                question_type: QuestionType::Factoid,
                answers: texts
                    .iter()
                    .map(|t| RankedAnswer {
                        text: t.to_string(),
                        score: 0.0,
                        prob: 0.0,
                        example_id: String::new(),
                    })
                    .collect(),
                yesno: None,
            }
        }

        fn decoded(qs: Vec<(&str, DecodedQuestion)>) -> DecodedFile {
            DecodedFile {
                version: DECODED_VERSION.into(),
                header: None,
                config: DecodeConfig::default(),
                questions: qs.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
            }
        }

        fn yes(label: YesNo) -> DecodedQuestion {
            DecodedQuestion {
                question_type: QuestionType::Yesno,
                answers: Vec::new(),
                yesno: Some(YesNoDecision {
                    label,
                    aggregate_logit: 0.0,
                    probs: vec![],
                }),
            }
        }

        #[test]
        fn empty_dataset_gives_zeros() {
            let ds = DatasetFile::new(Vec::new(), None);
            let r = evaluate(&ds, &decoded(vec![]), 5).unwrap();
            assert_eq!((r.factoid.n, r.list.n, r.yesno.n), (0, 0, 0));
            let json = r.to_json();
            assert!(!json.contains("NaN") && !json.contains("null"));
        }

        #[test]
        fn mixed_fixture_routes_by_type() {
            let ds = DatasetFile::new(
                vec![
                    example("f1", "a", QuestionType::Factoid, &["p53"], None),
                    example("f1", "b", QuestionType::Factoid, &["p53"], None),
                    example("l1", "a", QuestionType::List, &["a", "b"], None),
                    example("y1", "a", QuestionType::Yesno, &[], Some(YesNo::Yes)),
                    example("y2", "a", QuestionType::Yesno, &[], Some(YesNo::No)),
                ],
                None,
            );
            let mut list = ranked(&["a", "c"]);
            list.question_type = QuestionType::List;
            let d = decoded(vec![
                ("f1", ranked(&["x", "The p53"])),
                ("l1", list),
                ("y1", yes(YesNo::Yes)),
            ]);
            let r = evaluate(&ds, &d, 5).unwrap();
            assert_eq!((r.factoid.n, r.list.n, r.yesno.n), (1, 1, 2));
            assert_eq!(r.factoid.mrr, 0.5);
            assert_eq!(r.list.macro_f1, 0.5);
            assert_eq!(r.yesno.acc, 0.5);
            assert_eq!(r.per_question.len(), 4);
            assert!(r.flags.iter().any(|f| f.contains("no prediction")));
            let back: EvaluationReport = serde_json::from_str(&r.to_json()).unwrap();
            assert_eq!(back, r);
            assert!(r.to_table().contains("factoid"));
        }

        #[test]
        fn unknown_question_is_an_error() {
            let ds = DatasetFile::new(
                vec![example("f1", "a", QuestionType::Factoid, &["x"], None)],
                None,
            );
            let d = decoded(vec![("zz", ranked(&["x"]))]);
            assert_eq!(
                evaluate(&ds, &d, 5),
                Err(MetricsError::IdMismatch("zz".into()))
            );
            let d = decoded(vec![("f1", yes(YesNo::Yes))]);
            assert!(matches!(
                evaluate(&ds, &d, 5),
                Err(MetricsError::TypeMismatch { .. })
            ));
        }
    }

    proptest! {
        #[test]
        fn normalize_is_idempotent(s in "\\PC{0,24}") {
            let once = normalize_answer(&s);
            prop_assert_eq!(normalize_answer(&once), once.clone());
        }

        #[test]
        fn factoid_ordering_invariants(ranks in proptest::collection::vec(proptest::option::of(1usize..=5), 1..30)) {
            let gold: Vec<GoldAnswer> = (0..ranks.len()).map(|i| factoid_gold(&format!("q{i}"), &["gold"])).collect();
            let mut pred = BTreeMap::new();
            for (i, r) in ranks.iter().enumerate() {
                let mut p = strings(&["w1", "w2", "w3", "w4", "w5"]);
                if let Some(r) = r {
                    p[r - 1] = "gold".into();
                }
                pred.insert(format!("q{i}"), p);
            }
            let (s, _) = factoid_metrics(&gold, &pred, 5);
            prop_assert!(s.sacc <= s.lacc);
            prop_assert!(s.mrr <= s.lacc + 1e-15);
            let mut rev = gold.clone();
            rev.reverse();
            let (t, _) = factoid_metrics(&rev, &pred, 5);
            prop_assert!((s.mrr - t.mrr).abs() < 1e-12);
            prop_assert_eq!(s.sacc, t.sacc);
        }

        #[test]
        fn list_f1_extremes(gold in proptest::collection::btree_set("[a-e]", 1..5), pred in proptest::collection::btree_set("[a-e]", 1..5)) {
            let g: Vec<&str> = gold.iter().map(String::as_str).collect();
            let p: Vec<String> = pred.iter().cloned().collect();
            let (_, _, f) = list_prf(&list_gold("q", &g), &p);
            prop_assert_eq!(f == 0.0, gold.is_disjoint(&pred));
            prop_assert_eq!(f == 1.0, gold == pred);
        }

        #[test]
        fn yesno_f1_is_class_mean(pairs in proptest::collection::vec((any::<bool>(), any::<bool>()), 1..40)) {
            let to = |b: bool| if b { YesNo::Yes } else { YesNo::No };
            let gold: Vec<YesNo> = pairs.iter().map(|p| to(p.0)).collect();
            let pred: Vec<Option<YesNo>> = pairs.iter().map(|p| Some(to(p.1))).collect();
            let (s, _) = yesno_metrics(&gold, &pred);
            prop_assert_eq!(s.f1, (s.f1_yes + s.f1_no) / 2.0);
            for v in [s.acc, s.f1, s.f1_yes, s.f1_no] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }
    }
}
