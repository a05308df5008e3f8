//! Offline commands: score one bundle, evaluate a directory of bundles.

use std::path::{Path, PathBuf};

use fakewatch::eval::{evaluate_bundle_set, find_bundles, EvalConfig, EvalError, EvalReport};
use fakewatch::pipeline::{score_bundle, OfflineError, OfflineOptions, OfflineRun};
use fakewatch::scoring::{load_scorer, ScorerSpec, ScoringError};
use fakewatch::service::{AuditedSink, ServiceError, WriteKind};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum BatchError {
    #[error(transparent)]
    Scorer(#[from] ScoringError),
    #[error(transparent)]
    Offline(#[from] OfflineError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Write(#[from] ServiceError),
    #[error("no bundles under {0}")]
    Empty(PathBuf),
}

#[derive(Debug, Serialize)]
pub struct BundleReport {
    pub bundle: String,
    pub scorer: String,
    pub stride: usize,
    #[serde(flatten)]
    pub run: OfflineRun,
}

pub fn score_bundle_report(bundle: &Path, scorer: &ScorerSpec, stride: usize) -> Result<BundleReport, BatchError> {
    let opts = OfflineOptions { stride, ..OfflineOptions::default() };
    let handle = load_scorer(scorer, opts.tracker.crop_size)?;
    let run = score_bundle(bundle, &handle, &opts)?;
    Ok(BundleReport { bundle: bundle.display().to_string(), scorer: scorer.to_string(), stride, run })
}

pub fn evaluate_dir(dir: &Path, scorer: &ScorerSpec, seed: Option<u64>) -> Result<EvalReport, BatchError> {
    let bundles = find_bundles(dir)?;
    if bundles.is_empty() {
        return Err(BatchError::Empty(dir.to_path_buf()));
    }
    let mut config = EvalConfig::new(scorer.to_string());
    config.seed = seed;
    let handle = load_scorer(scorer, config.pipeline.tracker.crop_size)?;
    Ok(evaluate_bundle_set(&bundles, &handle, &config)?)
}

/// Write a JSON report through an audited sink, or print it.
pub fn emit<T: Serialize>(report: &T, out: Option<&Path>) -> Result<(), BatchError> {
    let body = serde_json::to_vec_pretty(report).expect("reports serialize");
    match out {
        Some(path) => AuditedSink::new().write(path, &body, WriteKind::Report)?,
        None => println!("{}", String::from_utf8_lossy(&body)),
    }
    Ok(())
}
