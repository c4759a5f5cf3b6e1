//! Shared test support: a synthetic annotated corpus, synthetic prediction
//! logits and golden-file helpers.
#![allow(dead_code)]

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use bioqa::dataset::{DatasetFile, QuestionType, YesNo};
use bioqa::ingest::{AnnotatedDocument, EntityMention};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
}

pub fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_bioqa"));
    c.env_remove("BIOQA_CONFIG").env("RUST_LOG", "warn");
    c
}

pub fn run_ok(cmd: &mut Command) -> Output {
    let out = cmd.output().expect("binary runs");
    assert!(
        out.status.success(),
        "command failed ({:?}): {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

/// Compares `actual` with a checked-in golden file. With `UPDATE_GOLDEN=1`
/// the golden file is rewritten instead.
pub fn check_golden(name: &str, actual: &[u8]) -> bool {
    let path = fixture(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(&path, actual).expect("write golden");
        return true;
    }
    let expected = std::fs::read(&path).unwrap_or_else(|e| panic!("golden {name}: {e}"));
    expected == actual
}

const CHEMICALS: &[&str] = &[
    "Aspirin",
    "Ibuprofen",
    "Nivolumab",
    "Bortezomib",
    "Metformin",
    "Cisplatin",
    "Tamoxifen",
    "Imatinib",
    "Rituximab",
    "Paclitaxel",
    "Doxorubicin",
    "Warfarin",
    "Lithium",
    "Sirolimus",
];
const DISEASES: &[&str] = &[
    "melanoma",
    "myeloma",
    "diabetes",
    "asthma",
    "glioma",
    "hepatitis",
    "sepsis",
    "psoriasis",
    "leukemia",
    "fibrosis",
    "lupus",
    "gout",
];
const GENES: &[&str] = &[
    "BRCA1",
    "TP53",
    "EGFR",
    "KRAS",
    "HER2",
    "PD-1",
    "β-catenin",
    "MYC",
    "PTEN",
    "ALK",
    "IL-6",
];
const SPECIES: &[&str] = &["mice", "rats", "zebrafish", "humans", "macaques"];
const ANATOMY: &[&str] = &["liver", "kidney", "lung", "heart", "spleen", "retina"];
const YEARS: &[&str] = &["1998", "2004", "2012", "2020"];
const COUNTS: &[&str] = &["12", "48", "120", "240", "1500"];

/// `{X}` slots name an entity type by its first letter.
const TITLES: &[&str] = &[
    "{C} in {D}.",
    "Effects of {C} on {G} signalling.",
    "{G} expression predicts outcome in {D}.",
    "A trial of {C} for {D} in {S}.",
];
const SENTENCES: &[&str] = &[
    "Patients with {D} were treated with {C} every two weeks.",
    "{C} reduced {G} activity in the {A} of {S}.",
    "Loss of {G} was associated with aggressive {D}.",
    "The first report of {C} toxicity appeared in {Y}.",
    "In {S}, {C} lowered {D} incidence compared with placebo.",
    "Expression of {G} in the {A} increased after exposure to {C}.",
    "No adverse events were linked to {G} status.",
    "Follow-up continued for a median of three years.",
    "The cohort enrolled {N} patients with {D}.",
    "{D} progression was monitored by imaging of the {A}.",
    "These findings support further study of {C} in {D}.",
];

fn pick<'a>(rng: &mut ChaCha8Rng, xs: &[&'a str]) -> &'a str {
    xs[rng.gen_range(0..xs.len())]
}

fn fill(
    rng: &mut ChaCha8Rng,
    template: &str,
    offset: usize,
    mentions: &mut Vec<EntityMention>,
) -> String {
    let mut out = String::new();
    let mut rest = template;
    while let Some(open) = rest.find('{') {
        out.push_str(&rest[..open]);
        let slot = &rest[open + 1..open + 2];
        let (ty, pool) = match slot {
            "C" => ("Chemical", CHEMICALS),
            "D" => ("Disease", DISEASES),
            "G" => ("Gene", GENES),
            "S" => ("Species", SPECIES),
            "A" => ("Anatomy", ANATOMY),
            "Y" => ("Date", YEARS),
            "N" => ("Number", COUNTS),
            _ => unreachable!("unknown slot"),
        };
        let surface = pick(rng, pool);
        let start = offset + out.chars().count();
        out.push_str(surface);
        mentions.push(EntityMention {
            start,
            end: start + surface.chars().count(),
            surface: surface.into(),
            entity_type: ty.into(),
            norm_id: format!("SYN:{}", surface.to_lowercase()),
        });
        rest = &rest[open + 3..];
    }
    out.push_str(rest);
    out
}

/// A deterministic synthetic corpus of `n` documents, each a title and 3 to
/// 6 sentences built from templates over a small typed vocabulary.
pub fn synthetic_corpus(n: usize, seed: u64) -> Vec<AnnotatedDocument> {
    (0..n)
        .map(|i| {
            let mut rng =
                ChaCha8Rng::seed_from_u64(seed.wrapping_mul(1_000_003).wrapping_add(i as u64));
            let mut mentions = Vec::new();
            let template = pick(&mut rng, TITLES);
            let title = fill(&mut rng, template, 0, &mut mentions);
            let mut body = String::new();
            let base = title.chars().count() + 1;
            for k in 0..rng.gen_range(3..=6) {
                if k > 0 {
                    body.push(' ');
                }
                let template = pick(&mut rng, SENTENCES);
                let s = fill(
                    &mut rng,
                    template,
                    base + body.chars().count(),
                    &mut mentions,
                );
                body.push_str(&s);
            }
            AnnotatedDocument::new(format!("SYN{i:05}"), title, body, mentions)
        })
        .collect()
}

pub fn pubtator_string(docs: &[AnnotatedDocument]) -> String {
    let mut buf = Vec::new();
    bioqa::ingest::write_pubtator(&mut buf, docs).expect("in-memory write");
    String::from_utf8(buf).expect("utf-8")
}

/// Standard normal draw (Box-Muller).
fn normal(rng: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Rounds to 4 decimals so the JSON text is short and stable.
fn r4(x: f64) -> f64 {
    (x * 1e4).round() / 1e4
}

/// Whitespace tokens of `text` as `(char_start, char_end)`.
pub fn whitespace_tokens(text: &str) -> Vec<(usize, usize)> {
    let mut out = Vec::new();
    let mut start = None;
    let mut n = 0;
    for (i, c) in text.chars().enumerate() {
        if c.is_whitespace() {
            if let Some(s) = start.take() {
                out.push((s, i));
            }
        } else if start.is_none() {
            start = Some(i);
        }
        n = i + 1;
    }
    if let Some(s) = start {
        out.push((s, n));
    }
    out
}

/// Synthetic prediction logits for every example of `dataset`, one JSON
/// line each. Span examples get N(0,1) logits over whitespace tokens with
/// the gold span boosted in `hit_rate` of cases (a random span otherwise);
/// yes/no examples get a logit whose sign matches the gold label with
/// probability `hit_rate`.
pub fn synthetic_logits(dataset: &DatasetFile, seed: u64, hit_rate: f64) -> String {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = String::new();
    for ex in &dataset.examples {
        match ex.question_type {
            QuestionType::Yesno => {
                let sign = match ex.yesno_label {
                    Some(YesNo::Yes) => 1.0,
                    _ => -1.0,
                };
                let agree = if rng.gen_bool(hit_rate) { 1.0 } else { -1.0 };
                let logit = r4(sign * agree * (0.25 + normal(&mut rng).abs()));
                writeln!(
                    out,
                    "{}",
                    serde_json::json!({"example_id": ex.id, "logit": logit})
                )
                .unwrap();
            }
            _ => {
                let toks = whitespace_tokens(&ex.context);
                let mut start: Vec<f64> = toks.iter().map(|_| normal(&mut rng)).collect();
                let mut end: Vec<f64> = toks.iter().map(|_| normal(&mut rng)).collect();
                let gold = ex.answers.first().and_then(|a| {
                    let a_end = a.answer_start + a.text.chars().count();
                    let i = toks
                        .iter()
                        .position(|t| t.0 <= a.answer_start && a.answer_start < t.1)?;
                    let j = toks.iter().position(|t| t.0 < a_end && a_end <= t.1)?;
                    Some((i, j))
                });
                let (i, j) = match gold {
                    Some(g) if rng.gen_bool(hit_rate) => g,
                    _ => {
                        let i = rng.gen_range(0..toks.len());
                        (i, (i + rng.gen_range(0..3)).min(toks.len() - 1))
                    }
                };
                start[i] += 5.0;
                end[j] += 5.0;
                let tokens: Vec<serde_json::Value> = toks
                    .iter()
                    .enumerate()
                    .map(|(k, &(s, e))| {
                        serde_json::json!({
                            "text": bioqa::text::char_slice(&ex.context, s, e).unwrap(),
                            "char_start": s,
                            "char_end": e,
                            "start_logit": r4(start[k]),
                            "end_logit": r4(end[k]),
                        })
                    })
                    .collect();
                writeln!(
                    out,
                    "{}",
                    serde_json::json!({"example_id": ex.id, "tokens": tokens})
                )
                .unwrap();
            }
        }
    }
    out
}

fn updating() -> bool {
    std::env::var_os("UPDATE_GOLDEN").is_some()
}

/// Outputs of the bundled end-to-end runs.
pub struct PipelineRun {
    pub dataset: Vec<u8>,
    pub report: Vec<u8>,
    pub table: Vec<u8>,
}

fn evaluate_into(dir: &Path, dataset: &Path, predictions: &Path) -> (Vec<u8>, Vec<u8>) {
    let report = dir.join("report.json");
    let table = dir.join("report.txt");
    run_ok(
        bin()
            .args(["evaluate", "--dataset"])
            .arg(dataset)
            .arg("--predictions")
            .arg(predictions)
            .arg("--out")
            .arg(&report)
            .arg("--table")
            .arg(&table),
    );
    (
        std::fs::read(report).unwrap(),
        std::fs::read(table).unwrap(),
    )
}

/// Fixture corpus → `gen-denoise` → checked-in logits → `evaluate`. With
/// `UPDATE_GOLDEN` set the corpus and logits fixtures are regenerated first.
pub fn run_denoise_pipeline(dir: &Path) -> PipelineRun {
    let corpus = fixture("corpus.pubtator");
    if updating() {
        std::fs::write(&corpus, pubtator_string(&synthetic_corpus(40, 1))).unwrap();
    }
    let dataset = dir.join("dataset.json");
    run_ok(
        bin()
            .args([
                "gen-denoise",
                "--seed",
                "7",
                "--max-per-doc",
                "2",
                "--corpus",
            ])
            .arg(&corpus)
            .arg("--out")
            .arg(&dataset),
    );
    let predictions = fixture("e2e_predictions.jsonl");
    if updating() {
        let file = bioqa::dataset::read_dataset(&dataset).unwrap();
        std::fs::write(&predictions, synthetic_logits(&file, 11, 0.7)).unwrap();
    }
    let (report, table) = evaluate_into(dir, &dataset, &predictions);
    PipelineRun {
        dataset: std::fs::read(&dataset).unwrap(),
        report,
        table,
    }
}

/// Mini BioASQ fixture → `convert` → checked-in logits → `evaluate`.
pub fn run_bioasq_pipeline(dir: &Path) -> PipelineRun {
    let dataset = dir.join("bioasq.json");
    run_ok(
        bin()
            .args(["convert", "--format", "bioasq", "--input"])
            .arg(fixture("bioasq_mini.json"))
            .arg("--out")
            .arg(&dataset),
    );
    let predictions = fixture("bioasq_mini_predictions.jsonl");
    if updating() {
        let file = bioqa::dataset::read_dataset(&dataset).unwrap();
        std::fs::write(&predictions, synthetic_logits(&file, 5, 0.7)).unwrap();
    }
    let (report, table) = evaluate_into(dir, &dataset, &predictions);
    PipelineRun {
        dataset: std::fs::read(&dataset).unwrap(),
        report,
        table,
    }
}
