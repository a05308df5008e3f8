//! Evaluation: ROC-AUC, subject-independent splitting, and a harness that
//! scores labeled bundles end to end.

mod auc;
mod harness;
mod split;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use auc::{auc_pairwise, compute_auc};
pub use harness::{evaluate_bundle_set, find_bundles, EvalConfig, EvalReport, ItemReport, SplitReport};
pub use split::{subject_independent_split, Split, SplitRatio};

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("AUC needs at least one real and one fake item ({positives} fake, {negatives} real)")]
    DegenerateLabels { positives: usize, negatives: usize },
    #[error("score {0} is outside [0, 1]")]
    InvalidScore(f64),
    #[error("split needs at least 2 distinct subjects, got {0}")]
    Split(usize),
    #[error("invalid item: {0}")]
    InvalidItem(String),
    #[error("bundle {0} has no ground-truth label")]
    MissingLabel(String),
    #[error("bundle {0} produced no scored segments")]
    NoSegments(String),
    #[error("bundle {item}: {source}")]
    Bundle {
        item: String,
        #[source]
        source: crate::pipeline::OfflineError,
    },
    #[error("cannot list bundles: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Label {
    Real = 0,
    Fake = 1,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabeledScore {
    pub item_id: String,
    pub label: Label,
    pub score: f64,
}

impl LabeledScore {
    pub fn new(item_id: impl Into<String>, label: Label, score: f64) -> Result<Self, EvalError> {
        if !(0.0..=1.0).contains(&score) {
            return Err(EvalError::InvalidScore(score));
        }
        Ok(Self { item_id: item_id.into(), label, score })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SubjectItem {
    pub item_id: String,
    pub subject_id: String,
    pub label: Label,
}

impl SubjectItem {
    pub fn new(item_id: impl Into<String>, subject_id: impl Into<String>, label: Label) -> Result<Self, EvalError> {
        let (item_id, subject_id) = (item_id.into(), subject_id.into());
        if item_id.is_empty() || subject_id.is_empty() {
            return Err(EvalError::InvalidItem("item and subject ids must be non-empty".into()));
        }
        Ok(Self { item_id, subject_id, label })
    }
}
