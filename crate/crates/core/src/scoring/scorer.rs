use std::collections::BTreeMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{preprocess, FakenessScore, ScoreTensor, ScorerSpec, ScoringError, Segment, SEGMENT_LEN};
use crate::fiducial;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScorerKind {
    Model,
    Reference,
}

/// Input layout a scorer expects: `(channels, temporal, size, size)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputSpec {
    pub channels: u32,
    pub temporal: u32,
    pub size: u32,
}

impl InputSpec {
    pub fn for_size(size: u32) -> Self {
        Self { channels: 3, temporal: SEGMENT_LEN as u32, size }
    }
}

/// Something that turns a preprocessed segment into a raw fakeness value.
/// The handle clamps the value into `[0, 1]`.
pub trait ScoreBackend: Send + Sync {
    fn score(&self, tensor: &ScoreTensor) -> Result<f64, ScoringError>;
}

/// A loaded scorer. Immutable and cheap to clone.
#[derive(Clone)]
pub struct ScorerHandle {
    kind: ScorerKind,
    input_spec: InputSpec,
    metadata: BTreeMap<String, String>,
    backend: Arc<dyn ScoreBackend>,
}

impl std::fmt::Debug for ScorerHandle {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("ScorerHandle")
            .field("kind", &self.kind)
            .field("input_spec", &self.input_spec)
            .field("metadata", &self.metadata)
            .finish_non_exhaustive()
    }
}

impl ScorerHandle {
    pub fn reference(size: u32) -> Self {
        let mut metadata = BTreeMap::new();
        metadata.insert("description".into(), "fiducial watermark reader".into());
        Self { kind: ScorerKind::Reference, input_spec: InputSpec::for_size(size), metadata, backend: Arc::new(ReferenceScorer) }
    }

    /// Wrap any backend, e.g. a test double or an in-process model.
    pub fn from_backend(backend: Arc<dyn ScoreBackend>, size: u32, metadata: BTreeMap<String, String>) -> Self {
        Self { kind: ScorerKind::Model, input_spec: InputSpec::for_size(size), metadata, backend }
    }

    pub fn kind(&self) -> ScorerKind {
        self.kind
    }

    pub fn input_spec(&self) -> InputSpec {
        self.input_spec
    }

    pub fn metadata(&self) -> &BTreeMap<String, String> {
        &self.metadata
    }
}

/// Load a scorer for crops of side `size`.
pub fn load_scorer(spec: &ScorerSpec, size: u32) -> Result<ScorerHandle, ScoringError> {
    match spec {
        ScorerSpec::Reference => Ok(ScorerHandle::reference(size)),
        #[cfg(feature = "onnx")]
        ScorerSpec::Model(path) => {
            let model = super::OnnxScorer::load(path, size)?;
            let metadata = model.metadata().clone();
            Ok(ScorerHandle { kind: ScorerKind::Model, input_spec: InputSpec::for_size(size), metadata, backend: Arc::new(model) })
        }
        #[cfg(not(feature = "onnx"))]
        ScorerSpec::Model(path) => Err(ScoringError::ModelLoad(format!(
            "{}: built without model support (enable the `onnx` feature)",
            path.display()
        ))),
    }
}

/// Score one segment. The segment is consumed: its crops are released once
/// the tensor is built, and the tensor is released before returning.
pub fn score_segment(scorer: &ScorerHandle, segment: Segment) -> Result<FakenessScore, ScoringError> {
    if segment.size() != scorer.input_spec.size {
        return Err(ScoringError::InvalidSegment(format!(
            "segment crops are {}px, scorer expects {}px",
            segment.size(),
            scorer.input_spec.size
        )));
    }
    let tensor = preprocess(&segment);
    drop(segment);
    let raw = scorer.backend.score(&tensor)?;
    drop(tensor);
    FakenessScore::clamped(raw).ok_or_else(|| ScoringError::Scorer("scorer returned NaN".into()))
}

/// Reads back the watermark the synthetic generator paints into each face.
///
/// Per crop, the median decoded value over the read window; the segment
/// score is the mean over its crops.
#[derive(Debug, Clone, Copy, Default)]
pub struct ReferenceScorer;

impl ScoreBackend for ReferenceScorer {
    fn score(&self, tensor: &ScoreTensor) -> Result<f64, ScoringError> {
        let (r0, r1) = fiducial::span(tensor.size(), fiducial::READ_START, fiducial::READ_END);
        if r1 <= r0 {
            return Err(ScoringError::Scorer(format!("crop size {} too small to read", tensor.size())));
        }
        let mut total = 0.0;
        let mut values = Vec::with_capacity(((r1 - r0) * (r1 - r0)) as usize);
        for t in 0..SEGMENT_LEN {
            values.clear();
            for y in r0 as usize..r1 as usize {
                for x in r0 as usize..r1 as usize {
                    let px = [tensor.byte(0, t, y, x), tensor.byte(1, t, y, x), tensor.byte(2, t, y, x)];
                    values.push(fiducial::decode_watermark(px));
                }
            }
            values.sort_by(f64::total_cmp);
            total += values[values.len() / 2];
        }
        Ok(total / SEGMENT_LEN as f64)
    }
}
