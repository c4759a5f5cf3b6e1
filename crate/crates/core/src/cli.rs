//! The `bioqa` command line: one binary with a subcommand per pipeline
//! stage.
//!
//! Settings come from built-in defaults, then an optional TOML file
//! (`--config`, or the `BIOQA_CONFIG` environment variable), then flags.
//! Every output carries a header with the tool version, subcommand, seed,
//! effective configuration, its hash, and a digest of each input keyed by
//! role. Paths never enter the header, so the same inputs produce the same
//! bytes wherever they live.
//!
//! Exit codes: 0 success, 2 usage, 3 invalid data, 4 I/O failure.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::catalog::{build_catalog, EntityCatalog};
use crate::cloze::{generate_cloze_corpus, ClozeConfig};
use crate::dataset::{
    convert_bioasq, convert_pubmedqa, read_dataset_from, ContextSource, DatasetFile,
};
use crate::decode::{
    decode_predictions, read_predictions, DecodeConfig, DecodedFile, ListQuantity, SimilarityScores,
};
use crate::denoise::{generate_corpus, ContextWindow, GenConfig, YesNoRatio};
use crate::ingest::{parse_pubtator_par, validate_document, AnnotatedDocument, ParseOutput};
use crate::metrics::evaluate;

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;
pub const EXIT_IO: i32 = 4;

/// A request the command line cannot satisfy, such as a missing seed.
#[derive(Debug)]
pub struct UsageError(pub String);

impl fmt::Display for UsageError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

#[derive(Debug, Parser)]
#[command(
    name = "bioqa",
    version,
    about = "Biomedical QA data generation, decoding and evaluation"
)]
pub struct Cli {
    /// TOML configuration file
    #[arg(long, global = true, env = "BIOQA_CONFIG")]
    pub config: Option<PathBuf>,
    /// Worker threads (default: all cores)
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Parse and validate a PubTator corpus
    Ingest(IngestArgs),
    /// Build the typed entity catalog of a corpus
    Catalog(CatalogArgs),
    /// Generate de-noising examples
    GenDenoise(GenDenoiseArgs),
    /// Generate cloze examples
    GenCloze(GenClozeArgs),
    /// Convert BioASQ or PubMedQA data to the unified format
    Convert(ConvertArgs),
    /// Decode answers from prediction logits
    Decode(DecodeArgs),
    /// Decode (if needed) and score predictions
    Evaluate(EvaluateArgs),
    /// Check files against their format invariants
    Validate(ValidateArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Summary report (JSON)
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Re-serialized corpus (PubTator)
    #[arg(long)]
    pub pubtator_out: Option<PathBuf>,
    /// Drop bad annotation lines instead of failing
    #[arg(long)]
    pub lenient: bool,
}

#[derive(Debug, Args)]
pub struct CatalogArgs {
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub lenient: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum WindowArg {
    Document,
    Sentence,
}

#[derive(Debug, Args)]
pub struct GenDenoiseArgs {
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    /// Catalog dump; built from the corpus when absent
    #[arg(long)]
    pub catalog: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Generation summary (JSON)
    #[arg(long)]
    pub summary: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub max_per_doc: Option<usize>,
    #[arg(long)]
    pub replace_all: bool,
    #[arg(long)]
    pub skip_repeated_surface: bool,
    #[arg(long)]
    pub min_context_chars: Option<usize>,
    /// Yes : no : adversarial weights, e.g. 1:1:1
    #[arg(long)]
    pub yes_no_ratio: Option<YesNoRatio>,
    #[arg(long, value_enum)]
    pub context_window: Option<WindowArg>,
    #[arg(long)]
    pub no_span: bool,
    #[arg(long)]
    pub no_yesno: bool,
    #[arg(long)]
    pub lenient: bool,
}

#[derive(Debug, Args)]
pub struct GenClozeArgs {
    #[arg(long)]
    pub corpus: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Mentions masked per document (default: all)
    #[arg(long)]
    pub max_per_doc: Option<usize>,
    /// Keep the literal [MASK] token in questions
    #[arg(long)]
    pub keep_mask: bool,
    #[arg(long)]
    pub lenient: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SourceFormat {
    Bioasq,
    Pubmedqa,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ContextArg {
    Snippet,
    Abstract,
}

#[derive(Debug, Args)]
pub struct ConvertArgs {
    #[arg(long, value_enum)]
    pub format: SourceFormat,
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// BioASQ contexts: gold snippets or full abstracts
    #[arg(long, value_enum, default_value = "snippet")]
    pub context: ContextArg,
    /// PubTator corpus supplying abstracts by PMID
    #[arg(long)]
    pub abstracts: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum QuantityArg {
    MergedSoftmax,
    Sigmoid,
}

#[derive(Debug, Args)]
pub struct DecodeFlags {
    #[arg(long)]
    pub n_best: Option<usize>,
    #[arg(long)]
    pub per_context_n_best: Option<usize>,
    #[arg(long)]
    pub max_answer_tokens: Option<usize>,
    #[arg(long)]
    pub list_threshold: Option<f64>,
    #[arg(long, value_enum)]
    pub list_quantity: Option<QuantityArg>,
    #[arg(long)]
    pub rerank_weight: Option<f64>,
    /// Similarity scores: {question_id: {answer: score}}
    #[arg(long)]
    pub similarity: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DecodeArgs {
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Prediction records (JSON Lines)
    #[arg(long)]
    pub predictions: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[command(flatten)]
    pub decode: DecodeFlags,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Prediction records (JSON Lines) or a decoded file
    #[arg(long)]
    pub predictions: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Plain-text table
    #[arg(long)]
    pub table: Option<PathBuf>,
    #[arg(long)]
    pub mrr_window: Option<usize>,
    #[command(flatten)]
    pub decode: DecodeFlags,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    #[arg(long)]
    pub catalog: Option<PathBuf>,
    #[arg(long)]
    pub corpus: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Paths {
    pub corpus: Option<PathBuf>,
    pub catalog: Option<PathBuf>,
    pub dataset: Option<PathBuf>,
    pub predictions: Option<PathBuf>,
    pub similarity: Option<PathBuf>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClozeSettings {
    pub keep_mask: bool,
    pub max_per_doc: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsConfig {
    pub mrr_window: usize,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        MetricsConfig { mrr_window: 5 }
    }
}

/// Everything a run can be configured with.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub paths: Paths,
    pub generation: GenConfig,
    pub cloze: ClozeSettings,
    pub decode: DecodeConfig,
    pub metrics: MetricsConfig,
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        toml::from_str(&text).map_err(|e| usage(format!("config {}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        self.generation
            .validate()
            .map_err(|e| usage(e.to_string()))?;
        self.decode.validate().map_err(|e| usage(e.to_string()))?;
        if self.metrics.mrr_window == 0 {
            return Err(usage("mrr_window must be ≥ 1"));
        }
        if self.workers == Some(0) {
            return Err(usage("workers must be ≥ 1"));
        }
        Ok(())
    }

    /// The part of the configuration that can affect outputs: no paths and
    /// no worker count.
    pub fn effective(&self) -> Value {
        json!({
            "seed": self.seed,
            "generation": self.generation,
            "cloze": self.cloze,
            "decode": self.decode,
            "metrics": self.metrics,
        })
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Reproducibility header embedded in every output.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunHeader {
    pub tool: String,
    pub tool_version: String,
    pub subcommand: String,
    pub seed: Option<u64>,
    pub config_hash: String,
    pub config: Value,
    /// Input role → SHA-256 of the input bytes.
    pub inputs: BTreeMap<String, String>,
}

impl RunHeader {
    fn new(subcommand: &str, config: &PipelineConfig) -> Self {
        let effective = config.effective();
        let canonical = serde_json::to_string(&effective).expect("config serializes");
        RunHeader {
            tool: env!("CARGO_PKG_NAME").into(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            subcommand: subcommand.into(),
            seed: config.seed,
            config_hash: sha256_hex(canonical.as_bytes()),
            config: effective,
            inputs: BTreeMap::new(),
        }
    }

    fn to_value(&self) -> Value {
        serde_json::to_value(self).expect("header serializes")
    }
}

/// Reads an input file and records its digest under `role`.
fn read_input(header: &mut RunHeader, role: &str, path: &Path) -> Result<Vec<u8>> {
    let bytes = fs::read(path).with_context(|| format!("reading {role} {}", path.display()))?;
    header.inputs.insert(role.into(), sha256_hex(&bytes));
    Ok(bytes)
}

fn utf8(bytes: Vec<u8>, role: &str) -> Result<String> {
    String::from_utf8(bytes).map_err(|_| anyhow!("{role} is not valid UTF-8"))
}

/// Writes `contents` to `path` through a temporary file in the same
/// directory, renamed into place only once fully written.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)
        .with_context(|| format!("creating temp file in {}", dir.display()))?;
    tmp.write_all(contents)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path)
        .map_err(|e| e.error)
        .with_context(|| format!("writing {}", path.display()))?;
    info!("wrote {}", path.display());
    Ok(())
}

fn emit(out: Option<&Path>, contents: &str) -> Result<()> {
    match out {
        Some(p) => write_atomic(p, contents.as_bytes()),
        None => {
            io::stdout().write_all(contents.as_bytes())?;
            Ok(())
        }
    }
}

fn pretty(v: &Value) -> String {
    let mut s = serde_json::to_string_pretty(v).expect("value serializes");
    s.push('\n');
    s
}

fn required(flag: Option<PathBuf>, fallback: &Option<PathBuf>, name: &str) -> Result<PathBuf> {
    flag.or_else(|| fallback.clone())
        .ok_or_else(|| usage(format!("missing --{name} (flag or config path)")))
}

fn output(flag: Option<PathBuf>, config: &PipelineConfig) -> Option<PathBuf> {
    flag.or_else(|| config.paths.out.clone())
}

fn parse_corpus(header: &mut RunHeader, path: &Path, lenient: bool) -> Result<ParseOutput> {
    let bytes = read_input(header, "corpus", path)?;
    let parsed = parse_pubtator_par(bytes.as_slice(), lenient)?;
    for d in &parsed.diagnostics {
        warn!("corpus line {}: {} (doc {})", d.line_no, d.reason, d.doc_id);
    }
    info!("parsed {} documents", parsed.documents.len());
    Ok(parsed)
}

fn require_seed(flag: Option<u64>, config: &mut PipelineConfig, sub: &str) -> Result<u64> {
    let seed = flag.or(config.seed).ok_or_else(|| {
        usage(format!(
            "{sub} requires --seed (or `seed` in the config file)"
        ))
    })?;
    config.seed = Some(seed);
    config.generation.seed = seed;
    Ok(seed)
}

fn apply_decode_flags(f: &DecodeFlags, config: &mut PipelineConfig) {
    let d = &mut config.decode;
    if let Some(v) = f.n_best {
        d.n_best = v;
    }
    if let Some(v) = f.per_context_n_best {
        d.per_context_n_best = v;
    }
    if let Some(v) = f.max_answer_tokens {
        d.max_answer_tokens = v;
    }
    if let Some(v) = f.list_threshold {
        d.list_threshold = v;
    }
    if let Some(v) = f.list_quantity {
        d.list_quantity = match v {
            QuantityArg::MergedSoftmax => ListQuantity::MergedSoftmax,
            QuantityArg::Sigmoid => ListQuantity::Sigmoid,
        };
    }
    if let Some(v) = f.rerank_weight {
        d.rerank_weight = v;
    }
    if f.similarity.is_some() {
        config.paths.similarity = f.similarity.clone();
    }
}

fn load_dataset(header: &mut RunHeader, path: &Path) -> Result<DatasetFile> {
    let bytes = read_input(header, "dataset", path)?;
    Ok(read_dataset_from(
        bytes.as_slice(),
        &path.display().to_string(),
    )?)
}

fn load_similarity(
    header: &mut RunHeader,
    config: &PipelineConfig,
) -> Result<Option<SimilarityScores>> {
    match &config.paths.similarity {
        None => Ok(None),
        Some(p) => {
            let bytes = read_input(header, "similarity", p)?;
            Ok(Some(
                serde_json::from_slice(&bytes).context("parsing similarity scores")?,
            ))
        }
    }
}

fn run_ingest(a: IngestArgs, config: PipelineConfig) -> Result<()> {
    let mut header = RunHeader::new("ingest", &config);
    let corpus = required(a.corpus, &config.paths.corpus, "corpus")?;
    let parsed = parse_corpus(&mut header, &corpus, a.lenient)?;
    let mut by_type: BTreeMap<&str, usize> = BTreeMap::new();
    let mut violations = BTreeMap::new();
    for d in &parsed.documents {
        for m in &d.mentions {
            *by_type.entry(&m.entity_type).or_default() += 1;
        }
        let v = validate_document(d);
        if !v.is_empty() {
            violations.insert(d.doc_id.clone(), v);
        }
    }
    let summary = json!({
        "header": header.to_value(),
        "documents": parsed.documents.len(),
        "mentions": parsed.documents.iter().map(|d| d.mentions.len()).sum::<usize>(),
        "mentions_by_type": by_type,
        "diagnostics": parsed.diagnostics,
        "violations": violations,
    });
    if let Some(p) = a.pubtator_out {
        let mut buf = Vec::new();
        crate::ingest::write_pubtator(&mut buf, &parsed.documents)?;
        write_atomic(&p, &buf)?;
    }
    emit(output(a.out, &config).as_deref(), &pretty(&summary))
}

fn run_catalog(a: CatalogArgs, config: PipelineConfig) -> Result<()> {
    let mut header = RunHeader::new("catalog", &config);
    let corpus = required(a.corpus, &config.paths.corpus, "corpus")?;
    let parsed = parse_corpus(&mut header, &corpus, a.lenient)?;
    let catalog = build_catalog(&parsed.documents)?;
    // the dump keeps its bare {type: [...]} layout; the header goes to the log
    info!("header: {}", serde_json::to_string(&header.to_value())?);
    info!(
        "catalog: {} types, {} surfaces",
        catalog.pools().len(),
        catalog.total_surfaces()
    );
    emit(output(a.out, &config).as_deref(), &catalog.to_json())
}

fn run_gen_denoise(a: GenDenoiseArgs, mut config: PipelineConfig) -> Result<()> {
    require_seed(a.seed, &mut config, "gen-denoise")?;
    let g = &mut config.generation;
    if let Some(v) = a.max_per_doc {
        g.max_examples_per_doc = v;
    }
    g.replace_all_occurrences |= a.replace_all;
    g.skip_repeated_surface |= a.skip_repeated_surface;
    if let Some(v) = a.min_context_chars {
        g.min_context_chars = v;
    }
    if let Some(v) = a.yes_no_ratio {
        g.yes_no_ratio = v;
    }
    if let Some(w) = a.context_window {
        g.context_window = match w {
            WindowArg::Document => ContextWindow::Document,
            WindowArg::Sentence => ContextWindow::Sentence,
        };
    }
    if a.no_span {
        g.span_examples = false;
    }
    if a.no_yesno {
        g.yesno_examples = false;
    }
    config.validate()?;
    let mut header = RunHeader::new("gen-denoise", &config);
    let corpus = required(a.corpus, &config.paths.corpus, "corpus")?;
    let parsed = parse_corpus(&mut header, &corpus, a.lenient)?;
    let catalog = match a.catalog.or_else(|| config.paths.catalog.clone()) {
        Some(p) => EntityCatalog::read_json(read_input(&mut header, "catalog", &p)?.as_slice())?,
        None => build_catalog(&parsed.documents)?,
    };
    let out = generate_corpus(&parsed.documents, &catalog, &config.generation)?;
    info!(
        "generated {} examples, skipped {:?}",
        out.summary.generated, out.summary.skipped
    );
    let summary = serde_json::to_value(&out.summary)?;
    let mut h = header.to_value();
    h["generation_summary"] = summary.clone();
    let file = DatasetFile::new(out.examples, None).with_header(h);
    file.validate("<generated>")?;
    if let Some(p) = a.summary {
        write_atomic(&p, pretty(&summary).as_bytes())?;
    }
    emit(output(a.out, &config).as_deref(), &file.to_json())
}

fn run_gen_cloze(a: GenClozeArgs, mut config: PipelineConfig) -> Result<()> {
    let seed = require_seed(a.seed, &mut config, "gen-cloze")?;
    if a.max_per_doc.is_some() {
        config.cloze.max_per_doc = a.max_per_doc;
    }
    config.cloze.keep_mask |= a.keep_mask;
    config.validate()?;
    let mut header = RunHeader::new("gen-cloze", &config);
    let corpus = required(a.corpus, &config.paths.corpus, "corpus")?;
    let parsed = parse_corpus(&mut header, &corpus, a.lenient)?;
    let cfg = ClozeConfig {
        keep_mask: config.cloze.keep_mask,
    };
    let (examples, summary) =
        generate_cloze_corpus(&parsed.documents, config.cloze.max_per_doc, seed, &cfg)?;
    info!(
        "generated {} cloze examples, skipped {}",
        summary.generated, summary.skipped
    );
    let mut h = header.to_value();
    h["generation_summary"] = serde_json::to_value(summary)?;
    let file = DatasetFile::new(examples, None).with_header(h);
    file.validate("<generated>")?;
    emit(output(a.out, &config).as_deref(), &file.to_json())
}

fn run_convert(a: ConvertArgs, config: PipelineConfig) -> Result<()> {
    config.validate()?;
    let mut header = RunHeader::new("convert", &config);
    let input = utf8(read_input(&mut header, "source", &a.input)?, "source")?;
    let file = match a.format {
        SourceFormat::Pubmedqa => convert_pubmedqa(&input)?,
        SourceFormat::Bioasq => {
            let source = match a.context {
                ContextArg::Snippet => ContextSource::Snippet,
                ContextArg::Abstract => ContextSource::Abstract,
            };
            let abstracts: Option<BTreeMap<String, String>> = match &a.abstracts {
                None => None,
                Some(p) => {
                    let parsed = parse_corpus(&mut header, p, false)?;
                    Some(
                        parsed
                            .documents
                            .into_iter()
                            .map(|d: AnnotatedDocument| (d.doc_id, d.text))
                            .collect(),
                    )
                }
            };
            let conv = convert_bioasq(&input, source, abstracts.as_ref())?;
            if !conv.unalignable.is_empty() {
                warn!(
                    "{} example(s) have no alignable answer",
                    conv.unalignable.len()
                );
            }
            conv.file
        }
    };
    if let Some(src) = &file.stats.source {
        info!(
            "source questions by type: {:?} (total {})",
            src.questions, src.total_questions
        );
    }
    let file = file.with_header(header.to_value());
    emit(output(a.out, &config).as_deref(), &file.to_json())
}

fn decode_with(
    header: &mut RunHeader,
    dataset: &DatasetFile,
    predictions: &Path,
    config: &PipelineConfig,
) -> Result<DecodedFile> {
    let bytes = read_input(header, "predictions", predictions)?;
    // a decoded file is one JSON document; anything else is read as JSON Lines
    if let Ok(decoded) = serde_json::from_slice::<DecodedFile>(&bytes) {
        return Ok(decoded);
    }
    let records = read_predictions(bytes.as_slice())?;
    let sims = load_similarity(header, config)?;
    Ok(decode_predictions(
        dataset,
        &records,
        sims.as_ref(),
        &config.decode,
    )?)
}

fn run_decode(a: DecodeArgs, mut config: PipelineConfig) -> Result<()> {
    apply_decode_flags(&a.decode, &mut config);
    config.validate()?;
    let mut header = RunHeader::new("decode", &config);
    let ds_path = required(a.dataset, &config.paths.dataset, "dataset")?;
    let pred_path = required(a.predictions, &config.paths.predictions, "predictions")?;
    let dataset = load_dataset(&mut header, &ds_path)?;
    let bytes = read_input(&mut header, "predictions", &pred_path)?;
    let records = read_predictions(bytes.as_slice())?;
    let sims = load_similarity(&mut header, &config)?;
    let mut decoded = decode_predictions(&dataset, &records, sims.as_ref(), &config.decode)?;
    decoded.header = Some(header.to_value());
    emit(output(a.out, &config).as_deref(), &decoded.to_json())
}

fn run_evaluate(a: EvaluateArgs, mut config: PipelineConfig) -> Result<()> {
    apply_decode_flags(&a.decode, &mut config);
    if let Some(w) = a.mrr_window {
        config.metrics.mrr_window = w;
    }
    config.validate()?;
    let mut header = RunHeader::new("evaluate", &config);
    let ds_path = required(a.dataset, &config.paths.dataset, "dataset")?;
    let pred_path = required(a.predictions, &config.paths.predictions, "predictions")?;
    let dataset = load_dataset(&mut header, &ds_path)?;
    let decoded = decode_with(&mut header, &dataset, &pred_path, &config)?;
    let mut report = evaluate(&dataset, &decoded, config.metrics.mrr_window)?;
    report.header = Some(header.to_value());
    info!(
        "yes/no accuracy {:.4}, factoid MRR {:.4}, list F1 {:.4}",
        report.ranking.yesno_accuracy, report.ranking.factoid_mrr, report.ranking.list_f_measure
    );
    if let Some(t) = a.table {
        write_atomic(&t, report.to_table().as_bytes())?;
    }
    emit(output(a.out, &config).as_deref(), &report.to_json())
}

fn run_validate(a: ValidateArgs, config: PipelineConfig) -> Result<()> {
    let dataset = a.dataset.or_else(|| config.paths.dataset.clone());
    let catalog = a.catalog.or_else(|| config.paths.catalog.clone());
    let corpus = a.corpus.or_else(|| config.paths.corpus.clone());
    if dataset.is_none() && catalog.is_none() && corpus.is_none() {
        return Err(usage(
            "validate needs at least one of --dataset, --catalog, --corpus",
        ));
    }
    let mut stdout = io::stdout();
    if let Some(p) = dataset {
        let bytes = fs::read(&p).with_context(|| format!("reading {}", p.display()))?;
        let file = read_dataset_from(bytes.as_slice(), &p.display().to_string())?;
        writeln!(stdout, "dataset ok: {} examples", file.examples.len())?;
    }
    if let Some(p) = catalog {
        let bytes = fs::read(&p).with_context(|| format!("reading {}", p.display()))?;
        let cat = EntityCatalog::read_json(bytes.as_slice())?;
        writeln!(
            stdout,
            "catalog ok: {} types, {} surfaces",
            cat.pools().len(),
            cat.total_surfaces()
        )?;
    }
    if let Some(p) = corpus {
        let bytes = fs::read(&p).with_context(|| format!("reading {}", p.display()))?;
        let parsed = parse_pubtator_par(bytes.as_slice(), false)?;
        let mut fatal = 0;
        for d in &parsed.documents {
            for v in validate_document(d) {
                if v.is_fatal() {
                    fatal += 1;
                }
                writeln!(stdout, "{}: {}", d.doc_id, serde_json::to_string(&v)?)?;
            }
        }
        if fatal > 0 {
            return Err(anyhow!("corpus has {fatal} invariant violation(s)"));
        }
        writeln!(stdout, "corpus ok: {} documents", parsed.documents.len())?;
    }
    Ok(())
}

/// Runs a parsed command line.
pub fn run(cli: Cli) -> Result<()> {
    let mut config = match &cli.config {
        Some(p) => PipelineConfig::load(p)?,
        None => PipelineConfig::default(),
    };
    if cli.workers.is_some() {
        config.workers = cli.workers;
    }
    if config.workers == Some(0) {
        return Err(usage("workers must be ≥ 1"));
    }
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = config.workers {
        builder = builder.num_threads(n);
    }
    let pool = builder.build().context("starting worker pool")?;
    pool.install(|| match cli.command {
        Command::Ingest(a) => run_ingest(a, config),
        Command::Catalog(a) => run_catalog(a, config),
        Command::GenDenoise(a) => run_gen_denoise(a, config),
        Command::GenCloze(a) => run_gen_cloze(a, config),
        Command::Convert(a) => run_convert(a, config),
        Command::Decode(a) => run_decode(a, config),
        Command::Evaluate(a) => run_evaluate(a, config),
        Command::Validate(a) => run_validate(a, config),
    })
}

/// Exit code for an error: usage 2, I/O 4, anything else (bad data) 3.
pub fn exit_code(err: &anyhow::Error) -> i32 {
    if err.chain().any(|c| c.is::<UsageError>()) {
        EXIT_USAGE
    } else if err.chain().any(|c| c.is::<io::Error>()) {
        EXIT_IO
    } else {
        EXIT_DATA
    }
}

/// Entry point used by the binary.
pub fn main() -> i32 {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format_timestamp(None)
        .init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            let code = exit_code(&e);
            eprintln!("error: {e:#}");
            code
        }
    }
}
