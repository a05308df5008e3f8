use std::sync::Arc;

use crate::buffer::BufferRegistry;
use crate::capture::Frame;
use crate::face::{FaceDetector, FaceError, FaceTrack, TrackOutcome, Tracker, TrackerConfig};
use crate::scoring::{ScoringError, Segment, SegmentAssembler};

#[derive(Debug)]
pub enum StageEvent {
    /// Frame consumed, nothing to score yet (crop pending or face missed).
    Pending,
    Segment(Segment),
    /// The track just became lost; `discarded` partial crops were dropped.
    Lost { discarded: usize },
}

/// Tracking plus segment assembly for one face.
pub struct TrackingStage {
    tracker: Tracker,
    track: FaceTrack,
    assembler: SegmentAssembler,
}

impl TrackingStage {
    pub fn new(
        detector: Arc<dyn FaceDetector>,
        config: TrackerConfig,
        track: FaceTrack,
        stride: usize,
        registry: Option<Arc<BufferRegistry>>,
    ) -> Self {
        let assembler = SegmentAssembler::with_stride(config.crop_size, stride);
        Self { tracker: Tracker::new(detector, config, registry), track, assembler }
    }

    pub fn track(&self) -> &FaceTrack {
        &self.track
    }

    pub fn pending_crops(&self) -> usize {
        self.assembler.pending()
    }

    pub fn process(&mut self, frame: &Frame) -> Result<StageEvent, FaceError> {
        match self.tracker.update(&mut self.track, frame)? {
            TrackOutcome::Crop(crop) => match self.assembler.push_crop(crop) {
                Ok(Some(seg)) => Ok(StageEvent::Segment(seg)),
                Ok(None) => Ok(StageEvent::Pending),
                // crops come from this tracker in frame order at a fixed size
                Err(e @ (ScoringError::Ordering(_) | ScoringError::SizeMismatch { .. })) => {
                    unreachable!("tracker produced an invalid crop: {e}")
                }
                Err(e) => Err(FaceError::Geometry(e.to_string())),
            },
            TrackOutcome::NoCrop if self.track.is_lost() => {
                // a segment never spans a lost interval
                Ok(StageEvent::Lost { discarded: self.assembler.flush() })
            }
            TrackOutcome::NoCrop => Ok(StageEvent::Pending),
        }
    }

    /// End of input: discard the partial segment.
    pub fn flush(&mut self) -> usize {
        self.assembler.flush()
    }
}
