use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use super::{FaceBox, FaceError};
use crate::capture::Frame;
use crate::fiducial::MARKER;
use crate::geometry::Rect;

/// Boxes overlapping at or above this IoU are considered duplicates.
pub const NMS_IOU: f64 = 0.5;

/// Raw detector output.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub rect: Rect,
    pub confidence: f64,
}

/// Pluggable face detector: RGB bytes in, rectangles out.
pub trait FaceDetector: Send + Sync {
    fn detect(&self, width: u32, height: u32, rgb: &[u8]) -> Result<Vec<Detection>, FaceError>;
}

/// Greedy suppression: keep the most confident box, drop anything overlapping
/// it at `iou_threshold` or more, repeat.
pub fn non_max_suppression(mut dets: Vec<Detection>, iou_threshold: f64) -> Vec<Detection> {
    dets.sort_by(|a, b| {
        b.confidence
            .total_cmp(&a.confidence)
            .then(a.rect.y.cmp(&b.rect.y))
            .then(a.rect.x.cmp(&b.rect.x))
    });
    let mut kept: Vec<Detection> = Vec::with_capacity(dets.len());
    for d in dets {
        if kept.iter().all(|k| k.rect.iou(&d.rect) < iou_threshold) {
            kept.push(d);
        }
    }
    kept
}

/// Detect every face in `frame`. Boxes are clipped to the frame,
/// de-duplicated and numbered densely in reading order.
pub fn detect_faces(detector: &dyn FaceDetector, frame: &Frame) -> Result<Vec<FaceBox>, FaceError> {
    let raw = detector.detect(frame.width, frame.height, &frame.pixels)?;
    let frame_rect = Rect::new(0, 0, frame.width, frame.height);
    let clipped = raw
        .into_iter()
        .filter(|d| d.confidence.is_finite())
        .filter_map(|d| {
            d.rect
                .intersection(&frame_rect)
                .map(|rect| Detection { rect, confidence: d.confidence.clamp(0.0, 1.0) })
        })
        .collect();
    let mut kept = non_max_suppression(clipped, NMS_IOU);
    kept.sort_by_key(|d| (d.rect.y, d.rect.x));
    Ok(kept
        .into_iter()
        .enumerate()
        .map(|(i, d)| FaceBox { id: i as u32, rect: d.rect, confidence: d.confidence })
        .collect())
}

/// Finds synthetic fiducial faces: connected regions of the marker color.
///
/// Confidence is the fraction of the bounding-box outline covered by marker
/// pixels, so a complete ring scores 1.0 and a clipped one less.
#[derive(Debug, Clone)]
pub struct FiducialDetector {
    pub min_side: u32,
}

impl Default for FiducialDetector {
    fn default() -> Self {
        Self { min_side: 8 }
    }
}

impl FaceDetector for FiducialDetector {
    fn detect(&self, width: u32, height: u32, rgb: &[u8]) -> Result<Vec<Detection>, FaceError> {
        let (w, h) = (width as usize, height as usize);
        if rgb.len() != w * h * 3 {
            return Err(FaceError::Detector(format!("expected {} bytes for {width}x{height}", w * h * 3)));
        }
        let is_marker = |i: usize| rgb[i * 3..i * 3 + 3] == MARKER;
        let mut seen = vec![false; w * h];
        let mut out = Vec::new();
        let mut queue = VecDeque::new();
        for start in 0..w * h {
            if seen[start] || !is_marker(start) {
                continue;
            }
            seen[start] = true;
            queue.push_back(start);
            let (mut x0, mut y0, mut x1, mut y1) = (usize::MAX, usize::MAX, 0, 0);
            while let Some(i) = queue.pop_front() {
                let (x, y) = (i % w, i / w);
                x0 = x0.min(x);
                y0 = y0.min(y);
                x1 = x1.max(x);
                y1 = y1.max(y);
                let mut visit = |j: usize| {
                    if !seen[j] && is_marker(j) {
                        seen[j] = true;
                        queue.push_back(j);
                    }
                };
                if x > 0 {
                    visit(i - 1);
                }
                if x + 1 < w {
                    visit(i + 1);
                }
                if y > 0 {
                    visit(i - w);
                }
                if y + 1 < h {
                    visit(i + w);
                }
            }
            let rect = Rect::new(x0 as u32, y0 as u32, (x1 - x0 + 1) as u32, (y1 - y0 + 1) as u32);
            if rect.w < self.min_side || rect.h < self.min_side {
                continue;
            }
            let mut outline = 0usize;
            let mut hits = 0usize;
            for x in x0..=x1 {
                for y in [y0, y1] {
                    outline += 1;
                    hits += usize::from(is_marker(y * w + x));
                }
            }
            for y in y0 + 1..y1 {
                for x in [x0, x1] {
                    outline += 1;
                    hits += usize::from(is_marker(y * w + x));
                }
            }
            out.push(Detection { rect, confidence: hits as f64 / outline as f64 });
        }
        Ok(out)
    }
}
