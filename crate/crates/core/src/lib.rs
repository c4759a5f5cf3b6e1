//! Biomedical QA data tooling: PubTator ingestion, entity catalogs,
//! de-noising and cloze question generation, dataset conversion, span
//! decoding from external logits and challenge-style evaluation.

pub mod catalog;
pub mod cli;
pub mod cloze;
pub mod dataset;
pub mod decode;
pub mod denoise;
pub mod ingest;
pub mod metrics;
pub mod text;
