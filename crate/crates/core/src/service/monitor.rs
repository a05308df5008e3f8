//! The worker chain behind a monitoring session:
//! capture -> frame queue -> tracking + assembly -> segment queue -> scoring
//! -> timeline. Each stage owns its state; queues are the only hand-off.

use std::sync::atomic::{AtomicBool, AtomicU32, AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::thread::{self, JoinHandle};
use std::time::{Duration, Instant};

use log::{debug, warn};

use super::Mode;
use crate::capture::{Captured, FrameStream};
use crate::pipeline::{StageEvent, TrackingStage};
use crate::queue::{BoundedQueue, Overflow, Pushed};
use crate::scoring::{score_segment, ScorerHandle, Segment};
use crate::timeline::SharedTimeline;

/// Frames waiting for the tracker.
pub const FRAME_QUEUE_CAPACITY: usize = 64;
/// Segments waiting for the scorer.
pub const SEGMENT_QUEUE_CAPACITY: usize = 2;

/// Counters shared by the workers. Written by one worker each.
#[derive(Debug, Default)]
pub(crate) struct MonitorStatus {
    pub track_lost: AtomicBool,
    pub source_ended: AtomicBool,
    pub finished: AtomicBool,
    pub error: Mutex<Option<String>>,
    /// Frames the source itself reported skipped.
    pub source_dropped: AtomicU64,
    /// Segments dropped or unscored that no sample has reported yet.
    pub pending_gaps: AtomicU32,
    pub scored: AtomicU64,
}

impl MonitorStatus {
    fn fail(&self, msg: String) {
        warn!("monitor stopped: {msg}");
        *self.error.lock().unwrap_or_else(|p| p.into_inner()) = Some(msg);
    }
}

pub(crate) struct Monitor {
    capture: Option<JoinHandle<Box<dyn FrameStream>>>,
    tracking: Option<JoinHandle<()>>,
    inference: Option<JoinHandle<()>>,
    frames: Arc<BoundedQueue<Captured>>,
    stop: Arc<AtomicBool>,
    pub status: Arc<MonitorStatus>,
}

pub(crate) struct MonitorParts {
    pub mode: Mode,
    pub stream: Box<dyn FrameStream>,
    /// The frame the target was selected on; tracked first.
    pub first: Captured,
    pub stage: TrackingStage,
    pub scorer: ScorerHandle,
    pub timeline: SharedTimeline,
    /// Sleep between frames to play a recorded source at its own rate.
    pub pace: bool,
}

impl Monitor {
    pub fn start(parts: MonitorParts) -> Self {
        let (frame_overflow, segment_overflow) = match parts.mode {
            // replay favours completeness: every frame is tracked, every segment scored
            Mode::Replay => (Overflow::Block, Overflow::Block),
            Mode::Live => (Overflow::DropOldest, Overflow::DropNewest),
        };
        let frames = Arc::new(BoundedQueue::new(FRAME_QUEUE_CAPACITY, frame_overflow));
        let segments = Arc::new(BoundedQueue::<Segment>::new(SEGMENT_QUEUE_CAPACITY, segment_overflow));
        let stop = Arc::new(AtomicBool::new(false));
        let status = Arc::new(MonitorStatus::default());

        let capture = {
            let (frames, stop, status) = (Arc::clone(&frames), Arc::clone(&stop), Arc::clone(&status));
            let MonitorParts { mut stream, first, pace, .. } = parts;
            thread::spawn(move || {
                capture_loop(stream.as_mut(), first, pace, &frames, &stop, &status);
                frames.close();
                stream
            })
        };
        let tracking = {
            let (frames, segments, stop, status) =
                (Arc::clone(&frames), Arc::clone(&segments), Arc::clone(&stop), Arc::clone(&status));
            let mut stage = parts.stage;
            thread::spawn(move || {
                tracking_loop(&mut stage, &frames, &segments, &status);
                let discarded = stage.flush();
                debug!("tracking done, {discarded} partial crops discarded");
                segments.close();
                // the capture side has nobody left to feed
                stop.store(true, Ordering::SeqCst);
                frames.close_and_clear();
            })
        };
        let inference = {
            let status = Arc::clone(&status);
            let (scorer, timeline) = (parts.scorer, parts.timeline);
            thread::spawn(move || {
                while let Some(seg) = segments.pop() {
                    let (t0, t1) = (seg.t_start_ms(), seg.t_end_ms());
                    match score_segment(&scorer, seg) {
                        Ok(score) => {
                            let gaps = status.pending_gaps.swap(0, Ordering::SeqCst);
                            if let Err(e) = timeline.append(t0, t1, score, gaps) {
                                status.fail(e.to_string());
                                break;
                            }
                            status.scored.fetch_add(1, Ordering::SeqCst);
                        }
                        Err(e) => {
                            warn!("segment [{t0}, {t1}] not scored: {e}");
                            status.pending_gaps.fetch_add(1, Ordering::SeqCst);
                        }
                    }
                }
                segments.close_and_clear();
                status.finished.store(true, Ordering::SeqCst);
            })
        };
        Self { capture: Some(capture), tracking: Some(tracking), inference: Some(inference), frames, stop, status }
    }

    /// All workers have exited on their own (end of stream, track loss, or
    /// failure).
    pub fn is_finished(&self) -> bool {
        self.status.finished.load(Ordering::SeqCst)
    }

    /// Stop capturing, let queued segments finish scoring, join everything,
    /// and hand back the source.
    pub fn shutdown(mut self) -> Option<Box<dyn FrameStream>> {
        self.stop.store(true, Ordering::SeqCst);
        self.frames.close_and_clear();
        let stream = self.capture.take().and_then(|h| h.join().ok());
        for h in [self.tracking.take(), self.inference.take()].into_iter().flatten() {
            if h.join().is_err() {
                self.status.fail("worker panicked".into());
            }
        }
        stream
    }
}

impl Drop for Monitor {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        self.frames.close_and_clear();
    }
}

fn capture_loop(
    stream: &mut dyn FrameStream,
    first: Captured,
    pace: bool,
    frames: &BoundedQueue<Captured>,
    stop: &AtomicBool,
    status: &MonitorStatus,
) {
    let origin = (Instant::now(), first.frame.ts_ms);
    if frames.push(first) == Pushed::Closed {
        return;
    }
    while !stop.load(Ordering::SeqCst) {
        let captured = match stream.next_frame() {
            Ok(Some(c)) => c,
            Ok(None) => {
                status.source_ended.store(true, Ordering::SeqCst);
                return;
            }
            Err(e) => {
                status.fail(e.to_string());
                return;
            }
        };
        if pace {
            let due = origin.0 + Duration::from_millis(captured.frame.ts_ms.saturating_sub(origin.1));
            if let Some(wait) = due.checked_duration_since(Instant::now()) {
                thread::sleep(wait);
            }
        }
        status.source_dropped.fetch_add(u64::from(captured.dropped), Ordering::SeqCst);
        if frames.push(captured) == Pushed::Closed {
            return;
        }
    }
}

fn tracking_loop(
    stage: &mut TrackingStage,
    frames: &BoundedQueue<Captured>,
    segments: &BoundedQueue<Segment>,
    status: &MonitorStatus,
) {
    while let Some(captured) = frames.pop() {
        match stage.process(&captured.frame) {
            Ok(StageEvent::Pending) => {}
            Ok(StageEvent::Segment(seg)) => match segments.push(seg) {
                Pushed::Rejected => {
                    status.pending_gaps.fetch_add(1, Ordering::SeqCst);
                }
                Pushed::Closed => return,
                Pushed::Accepted | Pushed::EvictedOldest => {}
            },
            Ok(StageEvent::Lost { discarded }) => {
                debug!("track lost at frame {}, {discarded} crops discarded", captured.frame.seq);
                status.track_lost.store(true, Ordering::SeqCst);
                return;
            }
            Err(e) => {
                status.fail(e.to_string());
                return;
            }
        }
    }
}
