use std::path::Path;
use std::sync::Arc;

use log::warn;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{StageEvent, TrackingStage};
use crate::capture::{BundleStream, CaptureError, FrameStream};
use crate::face::{detect_faces, start_track, FaceDetector, FaceError, FiducialDetector, TrackerConfig};
use crate::scoring::{score_segment, ScorerHandle, SEGMENT_LEN};
use crate::timeline::{BandThresholds, ScoreSample, SessionSummary, Timeline, TimelineError};

#[derive(Debug, Error)]
pub enum OfflineError {
    #[error(transparent)]
    Capture(#[from] CaptureError),
    #[error(transparent)]
    Face(#[from] FaceError),
    #[error(transparent)]
    Timeline(#[from] TimelineError),
    #[error("stride must be at least {SEGMENT_LEN} so samples do not overlap, got {0}")]
    Stride(usize),
    #[error("face {0} not found in the first detection")]
    UnknownFace(u32),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OfflineOptions {
    pub tracker: TrackerConfig,
    pub stride: usize,
    /// Face id to follow from the first frame with any faces.
    pub target: u32,
    pub thresholds: BandThresholds,
}

impl Default for OfflineOptions {
    fn default() -> Self {
        Self { tracker: TrackerConfig::default(), stride: SEGMENT_LEN, target: 0, thresholds: BandThresholds::default() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OfflineRun {
    pub samples: Vec<ScoreSample>,
    pub summary: SessionSummary,
    pub frames: u64,
    /// Frame on which the target was selected, if any face ever appeared.
    pub selected_at_seq: Option<u64>,
    /// Frame on which the track was declared lost. Scoring stops there: a
    /// batch run has no operator to confirm a re-selection.
    pub track_lost_at_seq: Option<u64>,
    /// Crops of the unfinished final segment, dropped unscored.
    pub discarded_crops: usize,
    /// Segments whose scoring failed.
    pub gaps: u32,
}

/// Run a stream through detection, tracking, segmentation and scoring.
pub fn score_stream(
    stream: &mut dyn FrameStream,
    detector: Arc<dyn FaceDetector>,
    scorer: &ScorerHandle,
    opts: &OfflineOptions,
) -> Result<OfflineRun, OfflineError> {
    if opts.stride < SEGMENT_LEN {
        return Err(OfflineError::Stride(opts.stride));
    }
    let mut timeline = Timeline::new(opts.thresholds);
    let mut stage: Option<TrackingStage> = None;
    let mut run = OfflineRun {
        samples: Vec::new(),
        summary: SessionSummary { average: None, peak: None, trough: None, sample_count: 0, gap_count: 0, duration_ms: 0 },
        frames: 0,
        selected_at_seq: None,
        track_lost_at_seq: None,
        discarded_crops: 0,
        gaps: 0,
    };
    let mut pending_gaps = 0u32;

    while let Some(captured) = stream.next_frame()? {
        let frame = captured.frame;
        run.frames += 1;
        if run.track_lost_at_seq.is_some() {
            continue;
        }
        if stage.is_none() {
            let faces = detect_faces(detector.as_ref(), &frame)?;
            if faces.is_empty() {
                continue;
            }
            let seed = faces.iter().find(|f| f.id == opts.target).ok_or(OfflineError::UnknownFace(opts.target))?;
            let track = start_track(seed, frame.ts_ms, frame.ts_ms, &opts.tracker)?;
            run.selected_at_seq = Some(frame.seq);
            stage = Some(TrackingStage::new(Arc::clone(&detector), opts.tracker.clone(), track, opts.stride, None));
        }
        let st = stage.as_mut().expect("stage set above");
        match st.process(&frame)? {
            StageEvent::Pending => {}
            StageEvent::Lost { discarded } => {
                run.discarded_crops += discarded;
                run.track_lost_at_seq = Some(frame.seq);
            }
            StageEvent::Segment(seg) => {
                let (t0, t1) = (seg.t_start_ms(), seg.t_end_ms());
                match score_segment(scorer, seg) {
                    Ok(score) => {
                        timeline.append(t0, t1, score, pending_gaps)?;
                        pending_gaps = 0;
                    }
                    Err(e) => {
                        warn!("segment [{t0}, {t1}] not scored: {e}");
                        pending_gaps += 1;
                        run.gaps += 1;
                    }
                }
            }
        }
    }
    if let Some(st) = stage.as_mut() {
        run.discarded_crops += st.flush();
    }
    run.summary = timeline.summarize();
    run.samples = timeline.samples().to_vec();
    Ok(run)
}

/// [`score_stream`] over a bundle directory with the fiducial detector.
pub fn score_bundle(dir: &Path, scorer: &ScorerHandle, opts: &OfflineOptions) -> Result<OfflineRun, OfflineError> {
    let mut stream = BundleStream::open(dir, None)?;
    score_stream(&mut stream, Arc::new(FiducialDetector::default()), scorer, opts)
}
