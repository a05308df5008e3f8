//! ONNX model backend (via `tract`).
//!
//! Contract checked at load time:
//!
//! * exactly one graph input, named [`INPUT_NAME`], `float32`, shape
//!   `(1, 3, 30, S, S)` (the batch dimension may be symbolic);
//! * exactly one graph output, named [`OUTPUT_NAME`], holding either a single
//!   probability or two logits. For logits, the fake class index is read from
//!   the model metadata key [`FAKE_INDEX_KEY`] (default 1).
//!
//! Any ONNX opset that tract can execute is accepted.

use std::collections::{BTreeMap, HashSet};
use std::path::Path;
use std::sync::Arc;

use prost::Message;
use tract_onnx::pb::{self, tensor_shape_proto::dimension, type_proto};
use tract_onnx::prelude::*;

use super::{ScoreBackend, ScoreTensor, ScoringError, SEGMENT_LEN};

pub const INPUT_NAME: &str = "frames";
pub const OUTPUT_NAME: &str = "fakeness";
pub const FAKE_INDEX_KEY: &str = "fake_index";

const FLOAT: i32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum OutputKind {
    Probability,
    Logits { fake_index: usize },
}

pub struct OnnxScorer {
    plan: Arc<TypedRunnableModel>,
    output: OutputKind,
    size: u32,
    metadata: BTreeMap<String, String>,
}

fn contract(msg: impl Into<String>) -> ScoringError {
    ScoringError::ModelContract(msg.into())
}

/// `Some(n)` for fixed dims, `None` for symbolic ones.
fn dims(v: &pb::ValueInfoProto) -> Result<Vec<Option<i64>>, ScoringError> {
    let Some(type_proto::Value::TensorType(t)) = v.r#type.as_ref().and_then(|t| t.value.as_ref()) else {
        return Err(contract(format!("`{}` is not a tensor", v.name)));
    };
    if t.elem_type != FLOAT {
        return Err(contract(format!("`{}` must be float32", v.name)));
    }
    let shape = t.shape.as_ref().ok_or_else(|| contract(format!("`{}` has no declared shape", v.name)))?;
    Ok(shape
        .dim
        .iter()
        .map(|d| match d.value {
            Some(dimension::Value::DimValue(n)) => Some(n),
            _ => None,
        })
        .collect())
}

impl OnnxScorer {
    pub fn load(path: &Path, size: u32) -> Result<Self, ScoringError> {
        let bytes = std::fs::read(path).map_err(|e| ScoringError::ModelLoad(format!("{}: {e}", path.display())))?;
        let proto = pb::ModelProto::decode(bytes.as_slice())
            .map_err(|e| ScoringError::ModelLoad(format!("{}: not an ONNX model: {e}", path.display())))?;
        Self::from_proto(&proto, size)
    }

    pub fn from_proto(proto: &pb::ModelProto, size: u32) -> Result<Self, ScoringError> {
        let graph = proto.graph.as_ref().ok_or_else(|| ScoringError::ModelLoad("model has no graph".into()))?;
        let initializers: HashSet<&str> = graph.initializer.iter().map(|t| t.name.as_str()).collect();
        let inputs: Vec<&pb::ValueInfoProto> =
            graph.input.iter().filter(|i| !initializers.contains(i.name.as_str())).collect();
        let [input] = inputs.as_slice() else {
            return Err(contract(format!("expected one input, found {}", inputs.len())));
        };
        if input.name != INPUT_NAME {
            return Err(contract(format!("input must be named `{INPUT_NAME}`, found `{}`", input.name)));
        }
        let d = dims(input)?;
        if d.len() != 5 {
            return Err(contract(format!("input must be rank 5 (1,3,30,S,S), found rank {}", d.len())));
        }
        if d[0].is_some_and(|b| b != 1) {
            return Err(contract("batch dimension must be 1"));
        }
        if d[1] != Some(3) {
            return Err(contract(format!("expected 3 channels, found {:?}", d[1])));
        }
        if d[2] != Some(SEGMENT_LEN as i64) {
            return Err(contract(format!("temporal extent must be {SEGMENT_LEN}, found {:?}", d[2])));
        }
        if d[3] != d[4] || d[3].is_none() {
            return Err(contract("spatial dims must be fixed and square"));
        }
        if d[3] != Some(i64::from(size)) {
            return Err(contract(format!("model expects {:?}px crops, session uses {size}px", d[3])));
        }

        let [output] = graph.output.as_slice() else {
            return Err(contract(format!("expected one output, found {}", graph.output.len())));
        };
        if output.name != OUTPUT_NAME {
            return Err(contract(format!("output must be named `{OUTPUT_NAME}`, found `{}`", output.name)));
        }
        let od = dims(output)?;
        if od.iter().any(Option::is_none) && od.first().is_none_or(|b| b.is_some()) {
            return Err(contract("output shape must be fixed"));
        }
        let elems: i64 = od.iter().skip(usize::from(od.len() > 1 && od[0].is_none())).map(|d| d.unwrap_or(1)).product();
        let metadata: BTreeMap<String, String> =
            proto.metadata_props.iter().map(|e| (e.key.clone(), e.value.clone())).collect();
        let output_kind = match elems {
            1 => OutputKind::Probability,
            2 => {
                let fake_index = match metadata.get(FAKE_INDEX_KEY) {
                    None => 1,
                    Some(v) => v
                        .trim()
                        .parse::<usize>()
                        .ok()
                        .filter(|i| *i < 2)
                        .ok_or_else(|| contract(format!("`{FAKE_INDEX_KEY}` must be 0 or 1, found `{v}`")))?,
                };
                OutputKind::Logits { fake_index }
            }
            n => return Err(contract(format!("output must hold 1 probability or 2 logits, found {n} values"))),
        };

        let s = size as usize;
        let plan = tract_onnx::onnx()
            .model_for_proto_model(proto)
            .and_then(|m| m.with_input_fact(0, f32::fact([1, 3, SEGMENT_LEN, s, s]).into()))
            .and_then(|m| m.into_optimized())
            .and_then(|m| m.into_runnable())
            .map_err(|e| ScoringError::ModelLoad(format!("{e:#}")))?;
        Ok(Self { plan, output: output_kind, size, metadata })
    }

    pub fn metadata(&self) -> &BTreeMap<String, String> {
        &self.metadata
    }
}

impl ScoreBackend for OnnxScorer {
    fn score(&self, tensor: &ScoreTensor) -> Result<f64, ScoringError> {
        if tensor.size() != self.size {
            return Err(ScoringError::Scorer(format!("tensor is {}px, model wants {}px", tensor.size(), self.size)));
        }
        let s = self.size as usize;
        let input = Tensor::from_shape(&[1, 3, SEGMENT_LEN, s, s], tensor.data())
            .map_err(|e| ScoringError::Scorer(format!("{e:#}")))?;
        let out = self
            .plan
            .run(tvec!(input.into()))
            .map_err(|e| ScoringError::Scorer(format!("{e:#}")))?;
        let values: Vec<f32> = out[0]
            .to_plain_array_view::<f32>()
            .map_err(|e| ScoringError::Scorer(format!("{e:#}")))?
            .iter()
            .copied()
            .collect();
        match (self.output, values.as_slice()) {
            (OutputKind::Probability, [p]) => Ok(f64::from(*p)),
            (OutputKind::Logits { fake_index }, [a, b]) => {
                let (fake, other) = if fake_index == 0 { (*a, *b) } else { (*b, *a) };
                Ok(1.0 / (1.0 + (f64::from(other) - f64::from(fake)).exp()))
            }
            (_, v) => Err(ScoringError::Scorer(format!("model produced {} values", v.len()))),
        }
    }
}
