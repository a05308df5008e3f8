#![cfg(feature = "onnx")]

use std::path::Path;
use std::sync::Arc;

use fakewatch::buffer::PixelBuffer;
use fakewatch::face::FaceCrop;
use fakewatch::scoring::{load_scorer, score_segment, ScorerKind, ScorerSpec, ScoringError, Segment, FAKE_INDEX_KEY};
use prost::Message;
use tract_onnx::pb::{self, tensor_shape_proto::dimension, type_proto};

const FLOAT: i32 = 1;
const INT64: i32 = 7;
const ATTR_INT: i32 = 2;
const S: u32 = 8;

fn value_info(name: &str, dims: &[i64]) -> pb::ValueInfoProto {
    let dim = dims
        .iter()
        .map(|&d| pb::tensor_shape_proto::Dimension { value: Some(dimension::Value::DimValue(d)), ..Default::default() })
        .collect();
    pb::ValueInfoProto {
        name: name.into(),
        r#type: Some(pb::TypeProto {
            value: Some(type_proto::Value::TensorType(type_proto::Tensor {
                elem_type: FLOAT,
                shape: Some(pb::TensorShapeProto { dim }),
            })),
            ..Default::default()
        }),
        ..Default::default()
    }
}

fn node(op: &str, inputs: &[&str], output: &str, attrs: Vec<pb::AttributeProto>) -> pb::NodeProto {
    pb::NodeProto {
        op_type: op.into(),
        input: inputs.iter().map(|s| s.to_string()).collect(),
        output: vec![output.into()],
        attribute: attrs,
        ..Default::default()
    }
}

fn int_attr(name: &str, v: i64) -> pb::AttributeProto {
    pb::AttributeProto { name: name.into(), r#type: ATTR_INT, i: v, ..Default::default() }
}

fn model(nodes: Vec<pb::NodeProto>, input: pb::ValueInfoProto, output: pb::ValueInfoProto, init: Vec<pb::TensorProto>, meta: &[(&str, &str)]) -> pb::ModelProto {
    pb::ModelProto {
        ir_version: 7,
        opset_import: vec![pb::OperatorSetIdProto { domain: String::new(), version: 13 }],
        graph: Some(pb::GraphProto {
            name: "test".into(),
            node: nodes,
            input: vec![input],
            output: vec![output],
            initializer: init,
            ..Default::default()
        }),
        metadata_props: meta
            .iter()
            .map(|(k, v)| pb::StringStringEntryProto { key: k.to_string(), value: v.to_string() })
            .collect(),
        ..Default::default()
    }
}

fn frames(size: u32) -> pb::ValueInfoProto {
    value_info("frames", &[1, 3, 30, i64::from(size), i64::from(size)])
}

/// fakeness = mean of all input values.
fn mean_model(size: u32) -> pb::ModelProto {
    model(
        vec![node("ReduceMean", &["frames"], "fakeness", vec![int_attr("keepdims", 1)])],
        frames(size),
        value_info("fakeness", &[1, 1, 1, 1, 1]),
        vec![],
        &[],
    )
}

/// fakeness = [-m, m] logits with m the input mean.
fn logit_model(meta: &[(&str, &str)]) -> pb::ModelProto {
    let shape = pb::TensorProto { name: "shape".into(), dims: vec![2], data_type: INT64, int64_data: vec![1, 1], ..Default::default() };
    model(
        vec![
            node("ReduceMean", &["frames"], "m5", vec![int_attr("keepdims", 1)]),
            node("Reshape", &["m5", "shape"], "m", vec![]),
            node("Neg", &["m"], "neg", vec![]),
            node("Concat", &["neg", "m"], "fakeness", vec![int_attr("axis", 1)]),
        ],
        frames(S),
        value_info("fakeness", &[1, 2]),
        vec![shape],
        meta,
    )
}

fn save(dir: &Path, name: &str, m: &pb::ModelProto) -> ScorerSpec {
    let path = dir.join(name);
    std::fs::write(&path, m.encode_to_vec()).unwrap();
    ScorerSpec::Model(path)
}

/// Crop `t` is filled with byte value `base + t`.
fn segment(base: u8) -> (Segment, f64) {
    let n = (S * S * 3) as usize;
    let crops: Vec<FaceCrop> = (0..30u64)
        .map(|t| FaceCrop { seq: t, ts_ms: t * 33, size: S, pixels: Arc::new(PixelBuffer::new(vec![base + t as u8; n], None)) })
        .collect();
    let mean = (0..30).map(|t| f64::from(base + t as u8) / 255.0).sum::<f64>() / 30.0;
    (Segment::new(crops).unwrap(), mean)
}

#[test]
fn probability_output_is_used_directly() {
    let dir = tempfile::tempdir().unwrap();
    let scorer = load_scorer(&save(dir.path(), "mean.onnx", &mean_model(S)), S).unwrap();
    assert_eq!(scorer.kind(), ScorerKind::Model);
    let (seg, mean) = segment(100);
    let got = score_segment(&scorer, seg).unwrap().value();
    assert!((got - mean).abs() < 1e-5, "{got} vs {mean}");
}

#[test]
fn logits_go_through_softmax() {
    let dir = tempfile::tempdir().unwrap();
    let (seg, m) = segment(40);
    let scorer = load_scorer(&save(dir.path(), "l.onnx", &logit_model(&[])), S).unwrap();
    let got = score_segment(&scorer, seg).unwrap().value();
    let want = 1.0 / (1.0 + (-2.0 * m).exp());
    assert!((got - want).abs() < 1e-5, "{got} vs {want}");

    let (seg, _) = segment(40);
    let swapped = load_scorer(&save(dir.path(), "l0.onnx", &logit_model(&[(FAKE_INDEX_KEY, "0")])), S).unwrap();
    let got0 = score_segment(&swapped, seg).unwrap().value();
    assert!((got0 - (1.0 - want)).abs() < 1e-5);
    assert_eq!(swapped.metadata().get(FAKE_INDEX_KEY).map(String::as_str), Some("0"));
}

#[test]
fn same_bytes_same_score() {
    let dir = tempfile::tempdir().unwrap();
    let scorer = load_scorer(&save(dir.path(), "mean.onnx", &mean_model(S)), S).unwrap();
    let a = score_segment(&scorer, segment(7).0).unwrap();
    let b = score_segment(&scorer, segment(7).0).unwrap();
    assert_eq!(a, b);
}

#[test]
fn contract_violations_are_reported() {
    let dir = tempfile::tempdir().unwrap();
    let wrong_size = save(dir.path(), "big.onnx", &mean_model(16));
    assert!(matches!(load_scorer(&wrong_size, S), Err(ScoringError::ModelContract(_))));

    let mut renamed = mean_model(S);
    renamed.graph.as_mut().unwrap().input[0].name = "video".into();
    assert!(matches!(load_scorer(&save(dir.path(), "r.onnx", &renamed), S), Err(ScoringError::ModelContract(_))));

    let mut three = logit_model(&[]);
    three.graph.as_mut().unwrap().output[0] = value_info("fakeness", &[1, 3]);
    assert!(matches!(load_scorer(&save(dir.path(), "3.onnx", &three), S), Err(ScoringError::ModelContract(_))));

    let bad_index = logit_model(&[(FAKE_INDEX_KEY, "2")]);
    assert!(matches!(load_scorer(&save(dir.path(), "i.onnx", &bad_index), S), Err(ScoringError::ModelContract(_))));

    let garbage = dir.path().join("garbage.onnx");
    std::fs::write(&garbage, b"not a model").unwrap();
    assert!(matches!(load_scorer(&ScorerSpec::Model(garbage), S), Err(ScoringError::ModelLoad(_))));
    assert!(matches!(load_scorer(&ScorerSpec::Model(dir.path().join("missing.onnx")), S), Err(ScoringError::ModelLoad(_))));
}
