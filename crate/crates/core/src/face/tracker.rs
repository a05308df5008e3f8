use std::sync::Arc;

use log::warn;
use serde::{Deserialize, Serialize};

use super::{normalize_crop, FaceBox, FaceCrop, FaceDetector, FaceError};
use crate::buffer::BufferRegistry;
use crate::capture::Frame;
use crate::geometry::Rect;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct TrackerConfig {
    /// Consecutive misses after which the track is lost.
    pub loss_threshold: u32,
    /// Search window = last rect scaled by this factor about its center.
    pub search_scale: f64,
    /// Side of emitted crops.
    pub crop_size: u32,
    pub min_confidence: f64,
    /// Minimum IoU with the previous rect for a candidate to count as the
    /// same face.
    pub min_match_iou: f64,
    /// Selections older than this cannot start a track.
    pub staleness_ms: u64,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        Self {
            loss_threshold: 15,
            search_scale: 1.5,
            crop_size: 112,
            min_confidence: 0.5,
            min_match_iou: 0.3,
            staleness_ms: 5_000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TrackState {
    Tracking,
    Lost,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaceTrack {
    pub target_id: u32,
    pub last_rect: Rect,
    pub miss_count: u32,
    loss_threshold: u32,
}

impl FaceTrack {
    pub fn state(&self) -> TrackState {
        if self.miss_count >= self.loss_threshold {
            TrackState::Lost
        } else {
            TrackState::Tracking
        }
    }

    pub fn is_lost(&self) -> bool {
        self.state() == TrackState::Lost
    }
}

/// Begin tracking the operator's chosen face. `detected_at_ms` is when the
/// detection ran, `now_ms` when tracking begins, on the same clock.
pub fn start_track(
    seed: &FaceBox,
    detected_at_ms: u64,
    now_ms: u64,
    config: &TrackerConfig,
) -> Result<FaceTrack, FaceError> {
    let age_ms = now_ms.saturating_sub(detected_at_ms);
    if age_ms > config.staleness_ms {
        return Err(FaceError::StaleSelection { age_ms, limit_ms: config.staleness_ms });
    }
    if seed.rect.is_empty() {
        return Err(FaceError::Geometry(format!("degenerate seed rect {:?}", seed.rect)));
    }
    Ok(FaceTrack {
        target_id: seed.id,
        last_rect: seed.rect,
        miss_count: 0,
        loss_threshold: config.loss_threshold.max(1),
    })
}

#[derive(Debug)]
pub enum TrackOutcome {
    Crop(FaceCrop),
    NoCrop,
}

/// Local-search tracker: re-runs the detector inside a window around the last
/// known rect and keeps the candidate that best overlaps it.
pub struct Tracker {
    detector: Arc<dyn FaceDetector>,
    config: TrackerConfig,
    registry: Option<Arc<BufferRegistry>>,
}

impl Tracker {
    pub fn new(detector: Arc<dyn FaceDetector>, config: TrackerConfig, registry: Option<Arc<BufferRegistry>>) -> Self {
        Self { detector, config, registry }
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.config
    }

    fn search(&self, track: &FaceTrack, frame: &Frame) -> Result<Option<Rect>, FaceError> {
        let window = track.last_rect.inflate(self.config.search_scale, frame.width, frame.height);
        if window.is_empty() {
            return Ok(None);
        }
        let stride = frame.width as usize * 3;
        let mut sub = Vec::with_capacity(window.area() as usize * 3);
        for y in window.y..window.bottom() {
            let start = y as usize * stride + window.x as usize * 3;
            sub.extend_from_slice(&frame.pixels[start..start + window.w as usize * 3]);
        }
        let candidates = self.detector.detect(window.w, window.h, &sub)?;
        let mut best: Option<(f64, Rect)> = None;
        for d in candidates {
            if d.confidence < self.config.min_confidence || !d.rect.fits_in(window.w, window.h) {
                continue;
            }
            let rect = d.rect.translate(window.x, window.y);
            let iou = rect.iou(&track.last_rect);
            if iou >= self.config.min_match_iou && best.is_none_or(|(b, _)| iou > b) {
                best = Some((iou, rect));
            }
        }
        Ok(best.map(|(_, r)| r))
    }

    /// Advance `track` by one frame.
    pub fn update(&self, track: &mut FaceTrack, frame: &Frame) -> Result<TrackOutcome, FaceError> {
        if track.is_lost() {
            return Err(FaceError::TrackLost);
        }
        let found = match self.search(track, frame) {
            Ok(found) => found,
            Err(e) => {
                warn!("detector failed during tracking, counting a miss: {e}");
                None
            }
        };
        match found {
            Some(rect) => {
                let crop = normalize_crop(frame, rect, self.config.crop_size, self.registry.as_ref())?;
                track.last_rect = rect;
                track.miss_count = 0;
                Ok(TrackOutcome::Crop(crop))
            }
            None => {
                track.miss_count += 1;
                Ok(TrackOutcome::NoCrop)
            }
        }
    }
}
