//! Face detection, selection and tracking.
//!
//! Detection is a one-shot operation run when the operator asks for it; it
//! lists every face in a frame so one can be picked. Tracking then follows
//! that one face frame by frame with a local search around its last known
//! position and emits square, fixed-size crops.

mod crop;
mod detector;
mod remote;
mod tracker;

use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::buffer::PixelBuffer;
use crate::geometry::Rect;

pub use crop::{crop_square, normalize_crop};
pub use detector::{detect_faces, non_max_suppression, Detection, FaceDetector, FiducialDetector, NMS_IOU};
pub use remote::{serve_detector, SocketDetector};
pub use tracker::{start_track, FaceTrack, TrackOutcome, TrackState, Tracker, TrackerConfig};

#[derive(Debug, Error)]
pub enum FaceError {
    #[error("face detector unavailable: {0}")]
    Detector(String),
    #[error("selection is stale: detected {age_ms} ms ago, limit {limit_ms} ms")]
    StaleSelection { age_ms: u64, limit_ms: u64 },
    #[error("track is lost; detect faces again")]
    TrackLost,
    #[error("bad geometry: {0}")]
    Geometry(String),
}

/// One detected face, as offered to the operator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FaceBox {
    /// Dense index within one detection pass.
    pub id: u32,
    pub rect: Rect,
    pub confidence: f64,
}

/// A square, fixed-size face image cut from one frame.
#[derive(Debug, Clone)]
pub struct FaceCrop {
    pub seq: u64,
    pub ts_ms: u64,
    /// Side length in pixels.
    pub size: u32,
    pub pixels: Arc<PixelBuffer>,
}

impl FaceCrop {
    #[inline]
    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        let i = (y as usize * self.size as usize + x as usize) * 3;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }
}
