//! Segment assembly and fakeness scoring.
//!
//! Tracked face crops are grouped into segments of exactly
//! [`SEGMENT_LEN`] crops. Each segment is converted to a dense
//! `(3, 30, S, S)` float block and handed to a scorer, which returns the
//! probability that the segment is manipulated. Segment pixels are released as
//! soon as the tensor exists; the tensor is dropped when scoring returns.

mod assembler;
#[cfg(feature = "onnx")]
mod onnx;
mod scorer;
mod tensor;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use assembler::{Segment, SegmentAssembler};
pub use scorer::{
    load_scorer, score_segment, InputSpec, ReferenceScorer, ScoreBackend, ScorerHandle, ScorerKind,
};
pub use tensor::{preprocess, ScoreTensor};

#[cfg(feature = "onnx")]
pub use onnx::{OnnxScorer, FAKE_INDEX_KEY, INPUT_NAME, OUTPUT_NAME};

/// Crops per segment. Fixed by the scoring model contract.
pub const SEGMENT_LEN: usize = 30;

#[derive(Debug, Error)]
pub enum ScoringError {
    #[error("crop out of order: {0}")]
    Ordering(String),
    #[error("crop size {got} does not match assembler size {expected}")]
    SizeMismatch { expected: u32, got: u32 },
    #[error("invalid segment: {0}")]
    InvalidSegment(String),
    #[error("model violates the scoring contract: {0}")]
    ModelContract(String),
    #[error("cannot load model: {0}")]
    ModelLoad(String),
    #[error("scorer failed: {0}")]
    Scorer(String),
}

/// Probability in `[0, 1]` that a segment is manipulated.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FakenessScore(f64);

impl FakenessScore {
    pub fn new(value: f64) -> Option<Self> {
        (0.0..=1.0).contains(&value).then_some(Self(value))
    }

    /// Clamp any finite value into range. NaN is rejected.
    pub fn clamped(value: f64) -> Option<Self> {
        (!value.is_nan()).then(|| Self(value.clamp(0.0, 1.0)))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// How a scorer is chosen: the built-in watermark reader or a model file.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub enum ScorerSpec {
    #[default]
    Reference,
    Model(std::path::PathBuf),
}

impl std::str::FromStr for ScorerSpec {
    type Err = std::convert::Infallible;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Ok(if s == "reference" { ScorerSpec::Reference } else { ScorerSpec::Model(s.into()) })
    }
}

impl std::fmt::Display for ScorerSpec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ScorerSpec::Reference => f.write_str("reference"),
            ScorerSpec::Model(p) => write!(f, "{}", p.display()),
        }
    }
}

impl Serialize for ScorerSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for ScorerSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Ok(s.parse().unwrap_or_else(|e: std::convert::Infallible| match e {}))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn score_range() {
        assert!(FakenessScore::new(-0.1).is_none());
        assert!(FakenessScore::new(1.0).is_some());
        assert_eq!(FakenessScore::clamped(3.0).unwrap().value(), 1.0);
        assert!(FakenessScore::clamped(f64::NAN).is_none());
    }
}
