use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{compute_auc, subject_independent_split, EvalError, Label, LabeledScore, SplitRatio, SubjectItem};
use crate::capture::{Manifest, MANIFEST_FILE};
use crate::pipeline::{score_bundle, OfflineOptions};
use crate::scoring::ScorerHandle;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalConfig {
    /// How the scorer was specified, echoed into the report.
    pub scorer: String,
    pub pipeline: OfflineOptions,
    /// Seed for the subject-independent split. Without one, or when any
    /// bundle lacks a subject, only whole-set AUC is reported.
    pub seed: Option<u64>,
    pub ratio: SplitRatio,
}

impl EvalConfig {
    pub fn new(scorer: impl Into<String>) -> Self {
        Self { scorer: scorer.into(), pipeline: OfflineOptions::default(), seed: None, ratio: SplitRatio::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItemReport {
    pub item_id: String,
    pub label: Label,
    /// Mean of the segment scores.
    pub score: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subject: Option<String>,
    pub segment_scores: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitReport {
    pub seed: u64,
    pub train_items: usize,
    pub test_items: usize,
    pub test_fraction: f64,
    /// Video-level AUC over the test side; absent if it holds one label only.
    pub test_auc: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    /// Video-level AUC over all items.
    pub auc: f64,
    /// AUC over individual segments, each carrying its bundle's label.
    pub segment_auc: f64,
    /// Sorted by item id.
    pub items: Vec<ItemReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub split: Option<SplitReport>,
    pub config: EvalConfig,
}

/// Bundle directories directly under `dir`, sorted by path.
pub fn find_bundles(dir: &Path) -> Result<Vec<PathBuf>, EvalError> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir)? {
        let path = entry?.path();
        if path.join(MANIFEST_FILE).is_file() {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

fn item_id(path: &Path) -> String {
    path.file_name().map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned())
}

fn score_one(path: &Path, scorer: &ScorerHandle, config: &EvalConfig) -> Result<ItemReport, EvalError> {
    let id = item_id(path);
    let bundle_err = |source| EvalError::Bundle { item: id.clone(), source };
    let manifest = Manifest::load(path).map_err(|e| bundle_err(e.into()))?;
    let truth = manifest.ground_truth.unwrap_or_default();
    let label = truth.label.ok_or_else(|| EvalError::MissingLabel(id.clone()))?;
    let run = score_bundle(path, scorer, &config.pipeline).map_err(bundle_err)?;
    if run.samples.is_empty() {
        return Err(EvalError::NoSegments(id));
    }
    let segment_scores: Vec<f64> = run.samples.iter().map(|s| s.score.value()).collect();
    let score = segment_scores.iter().sum::<f64>() / segment_scores.len() as f64;
    Ok(ItemReport { item_id: id, label, score, subject: truth.subject, segment_scores })
}

/// Score every bundle and compute AUC at bundle and segment level.
///
/// Bundles are scored in parallel; the report does not depend on the order
/// of `bundles`.
pub fn evaluate_bundle_set(bundles: &[PathBuf], scorer: &ScorerHandle, config: &EvalConfig) -> Result<EvalReport, EvalError> {
    let mut sorted = bundles.to_vec();
    sorted.sort();
    sorted.dedup();
    let results: Vec<Result<ItemReport, EvalError>> = sorted.par_iter().map(|p| score_one(p, scorer, config)).collect();
    let mut items = results.into_iter().collect::<Result<Vec<_>, _>>()?;
    items.sort_by(|a, b| a.item_id.cmp(&b.item_id));

    let labeled = |its: &[&ItemReport]| -> Result<Vec<LabeledScore>, EvalError> {
        its.iter().map(|i| LabeledScore::new(i.item_id.clone(), i.label, i.score)).collect()
    };
    let all: Vec<&ItemReport> = items.iter().collect();
    let auc = compute_auc(&labeled(&all)?)?;

    let mut segments = Vec::new();
    for it in &items {
        for (k, &s) in it.segment_scores.iter().enumerate() {
            segments.push(LabeledScore::new(format!("{}#{k}", it.item_id), it.label, s)?);
        }
    }
    let segment_auc = compute_auc(&segments)?;

    let split = match config.seed {
        Some(seed) if items.iter().all(|i| i.subject.is_some()) => {
            let subjects = items
                .iter()
                .map(|i| SubjectItem::new(i.item_id.clone(), i.subject.clone().unwrap_or_default(), i.label))
                .collect::<Result<Vec<_>, _>>()?;
            let split = subject_independent_split(&subjects, config.ratio, seed)?;
            let test: Vec<&ItemReport> =
                items.iter().filter(|i| split.test.iter().any(|t| t.item_id == i.item_id)).collect();
            let test_auc = match compute_auc(&labeled(&test)?) {
                Ok(a) => Some(a),
                Err(EvalError::DegenerateLabels { .. }) => None,
                Err(e) => return Err(e),
            };
            Some(SplitReport {
                seed,
                train_items: split.train.len(),
                test_items: split.test.len(),
                test_fraction: split.test_fraction(),
                test_auc,
            })
        }
        _ => None,
    };

    Ok(EvalReport { auc, segment_auc, items, split, config: config.clone() })
}
