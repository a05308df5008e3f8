use std::collections::HashMap;
use std::io::Cursor;
use std::path::{Path, PathBuf};
use std::sync::atomic::Ordering;
use std::sync::mpsc::Receiver;
use std::sync::{Arc, Mutex, MutexGuard, RwLock};
use std::time::{Duration, Instant};

use base64::Engine;
use image::{ImageFormat, RgbImage};
use serde::{Deserialize, Serialize};

use super::monitor::{Monitor, MonitorParts};
use super::{AuditedSink, Mode, ServiceError, SessionConfig, SessionState, StorageAudit, WriteKind};
use crate::buffer::{BufferRegistry, RegistryStats};
use crate::capture::{open_source, Captured, CaptureError, FrameStream, Manifest, Scenario, SourceConfig, SourceKind};
use crate::clock::{Clock, MonotonicClock};
use crate::face::{detect_faces, normalize_crop, start_track, FaceBox, FaceDetector, FiducialDetector};
use crate::geometry::Rect;
use crate::pipeline::TrackingStage;
use crate::scoring::{load_scorer, ScorerHandle, SEGMENT_LEN};
use crate::timeline::{ScoreSample, SessionSummary, SharedTimeline};

/// Name of the exported summary file.
pub const SUMMARY_FILE: &str = "summary.json";

/// Opens screen sources; there is no built-in screen backend.
pub type ScreenOpener = Arc<dyn Fn(&SourceConfig) -> Result<Box<dyn FrameStream>, CaptureError> + Send + Sync>;

#[derive(Clone)]
pub struct ManagerConfig {
    /// Sessions allowed to monitor at the same time.
    pub max_monitoring: usize,
    pub detector: Arc<dyn FaceDetector>,
    pub screen: Option<ScreenOpener>,
    /// Side of gallery thumbnails.
    pub thumbnail_size: u32,
}

impl Default for ManagerConfig {
    fn default() -> Self {
        Self { max_monitoring: 1, detector: Arc::new(FiducialDetector::default()), screen: None, thumbnail_size: 96 }
    }
}

/// A gallery entry returned by detection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DetectedFace {
    pub id: u32,
    pub rect: Rect,
    pub confidence: f64,
    /// PNG, base64. Lives in memory only.
    pub thumbnail_b64: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionInfo {
    pub session_id: String,
    pub mode: Mode,
    pub state: SessionState,
    pub source: SourceConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<FaceBox>,
    pub faces: Vec<FaceBox>,
    pub created_ms: u64,
    /// Monitoring, but the face is gone; detect again to continue.
    pub track_lost: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

struct Session {
    id: String,
    config: SessionConfig,
    mode: Mode,
    created_ms: u64,
    state: SessionState,
    target: Option<FaceBox>,
    faces: Vec<FaceBox>,
    thumbnails: HashMap<u32, Vec<u8>>,
    scorer: ScorerHandle,
    stream: Option<Box<dyn FrameStream>>,
    /// Frame of the last detection and the clock time it was taken.
    detection: Option<(Captured, u64)>,
    timeline: SharedTimeline,
    monitor: Option<Monitor>,
    track_lost: bool,
    error: Option<String>,
    summary: Option<SessionSummary>,
    transitions: Vec<(SessionState, SessionState)>,
    sink: AuditedSink,
    registry: Arc<BufferRegistry>,
}

impl Session {
    fn rejected(&self, op: &'static str) -> ServiceError {
        ServiceError::RejectedState { op, state: self.state }
    }

    fn transition(&mut self, op: &'static str, next: SessionState) -> Result<(), ServiceError> {
        if !self.state.can_become(next) {
            return Err(self.rejected(op));
        }
        self.transitions.push((self.state, next));
        self.state = next;
        Ok(())
    }

    /// Fold in whatever the workers did since the last call.
    fn refresh(&mut self) {
        if !self.monitor.as_ref().is_some_and(Monitor::is_finished) {
            return;
        }
        let status = Arc::clone(&self.monitor.as_ref().expect("checked").status);
        if status.track_lost.load(Ordering::SeqCst) {
            self.stream = self.monitor.take().and_then(Monitor::shutdown);
            self.track_lost = true;
        } else {
            // end of a recorded source, or a failure: same as an explicit stop
            self.finish();
        }
    }

    fn finish(&mut self) {
        if let Some(m) = self.monitor.take() {
            let status = Arc::clone(&m.status);
            self.stream = m.shutdown();
            let err = status.error.lock().unwrap_or_else(|p| p.into_inner()).take();
            if err.is_some() {
                self.error = err;
            }
        }
        self.summary = Some(self.timeline.summarize());
        self.transitions.push((self.state, SessionState::Stopped));
        self.state = SessionState::Stopped;
    }

    fn is_running(&self) -> bool {
        self.state == SessionState::Monitoring && self.monitor.is_some()
    }

    fn info(&self) -> SessionInfo {
        SessionInfo {
            session_id: self.id.clone(),
            mode: self.mode,
            state: self.state,
            source: self.config.source.clone(),
            target: self.target,
            faces: self.faces.clone(),
            created_ms: self.created_ms,
            track_lost: self.track_lost,
            error: self.error.clone(),
        }
    }
}

/// Owns all sessions of one process. Calls on one session are serialized;
/// different sessions proceed independently.
pub struct SessionManager {
    config: ManagerConfig,
    clock: Arc<dyn Clock>,
    sessions: RwLock<HashMap<String, Arc<Mutex<Session>>>>,
    start_lock: Mutex<()>,
}

fn new_session_id() -> String {
    format!("{:032x}", rand::random::<u128>())
}

fn encode_png(size: u32, rgb: Vec<u8>) -> Vec<u8> {
    let img = RgbImage::from_raw(size, size, rgb).expect("crop buffer matches its size");
    let mut out = Cursor::new(Vec::new());
    img.write_to(&mut out, ImageFormat::Png).expect("PNG encoding into memory");
    out.into_inner()
}

impl SessionManager {
    pub fn new(config: ManagerConfig) -> Self {
        Self::with_clock(config, Arc::new(MonotonicClock::new()))
    }

    pub fn with_clock(config: ManagerConfig, clock: Arc<dyn Clock>) -> Self {
        Self { config, clock, sessions: RwLock::new(HashMap::new()), start_lock: Mutex::new(()) }
    }

    fn session(&self, id: &str) -> Result<Arc<Mutex<Session>>, ServiceError> {
        let map = self.sessions.read().unwrap_or_else(|p| p.into_inner());
        map.get(id).cloned().ok_or_else(|| ServiceError::UnknownSession(id.to_string()))
    }

    fn with_session<R>(&self, id: &str, f: impl FnOnce(&mut Session) -> Result<R, ServiceError>) -> Result<R, ServiceError> {
        let s = self.session(id)?;
        let mut guard: MutexGuard<'_, Session> = s.lock().unwrap_or_else(|p| p.into_inner());
        guard.refresh();
        f(&mut guard)
    }

    pub fn session_ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self.sessions.read().unwrap_or_else(|p| p.into_inner()).keys().cloned().collect();
        ids.sort();
        ids
    }

    /// Validate the config and register an idle session. The source is not
    /// opened until the first detection.
    pub fn create_session(&self, config: SessionConfig) -> Result<String, ServiceError> {
        config.source.validate()?;
        if config.stride < SEGMENT_LEN {
            return Err(ServiceError::Config(format!("stride must be at least {SEGMENT_LEN}, got {}", config.stride)));
        }
        if config.tracker.crop_size == 0 {
            return Err(ServiceError::Config("crop size must be positive".into()));
        }
        match config.source.kind {
            SourceKind::Bundle => {
                Manifest::load(config.source.bundle_path.as_deref().expect("validated"))?;
            }
            SourceKind::Synthetic => {
                if let Some(desc) = &config.source.scenario {
                    desc.parse::<Scenario>()?;
                }
            }
            SourceKind::Screen if self.config.screen.is_none() => {
                return Err(CaptureError::Capability("no screen capture backend configured".into()).into());
            }
            SourceKind::Screen => {}
        }
        let scorer = load_scorer(&config.scorer, config.tracker.crop_size)?;

        let mut map = self.sessions.write().unwrap_or_else(|p| p.into_inner());
        let mut id = new_session_id();
        while map.contains_key(&id) {
            id = new_session_id();
        }
        let session = Session {
            id: id.clone(),
            mode: config.mode(),
            timeline: SharedTimeline::new(config.thresholds),
            config,
            created_ms: self.clock.now_ms(),
            state: SessionState::Idle,
            target: None,
            faces: Vec::new(),
            thumbnails: HashMap::new(),
            scorer,
            stream: None,
            detection: None,
            monitor: None,
            track_lost: false,
            error: None,
            summary: None,
            transitions: Vec::new(),
            sink: AuditedSink::new(),
            registry: BufferRegistry::new(),
        };
        map.insert(id.clone(), Arc::new(Mutex::new(session)));
        Ok(id)
    }

    fn open(&self, config: &SourceConfig) -> Result<Box<dyn FrameStream>, CaptureError> {
        match (&config.kind, &self.config.screen) {
            (SourceKind::Screen, Some(opener)) => opener(config),
            _ => open_source(config),
        }
    }

    /// Grab one frame and list the faces in it, replacing any earlier list.
    pub fn detect(&self, id: &str) -> Result<Vec<DetectedFace>, ServiceError> {
        self.with_session(id, |s| {
            match s.state {
                SessionState::Idle | SessionState::FacesDetected => {}
                SessionState::Monitoring if s.track_lost => {}
                _ => return Err(s.rejected("detect")),
            }
            let mut stream = match s.stream.take() {
                Some(st) => st,
                None => self.open(&s.config.source)?,
            };
            let next = stream.next_frame();
            s.stream = Some(stream);
            let captured = next?.ok_or_else(|| CaptureError::SourceLost("end of stream".into()))?;
            let faces = detect_faces(self.config.detector.as_ref(), &captured.frame)?;

            let size = self.config.thumbnail_size.max(1);
            let mut thumbnails = HashMap::new();
            let mut out = Vec::with_capacity(faces.len());
            for f in &faces {
                let crop = normalize_crop(&captured.frame, f.rect, size, None)?;
                let png = encode_png(size, crop.pixels.to_vec());
                out.push(DetectedFace {
                    id: f.id,
                    rect: f.rect,
                    confidence: f.confidence,
                    thumbnail_b64: base64::engine::general_purpose::STANDARD.encode(&png),
                });
                thumbnails.insert(f.id, png);
            }

            s.transition("detect", SessionState::FacesDetected)?;
            s.faces = faces;
            s.thumbnails = thumbnails;
            s.target = None;
            s.track_lost = false;
            s.detection = Some((captured, self.clock.now_ms()));
            Ok(out)
        })
    }

    /// PNG thumbnail of a face from the current detection.
    pub fn thumbnail(&self, id: &str, face_id: u32) -> Result<Vec<u8>, ServiceError> {
        self.with_session(id, |s| s.thumbnails.get(&face_id).cloned().ok_or(ServiceError::UnknownFace(face_id)))
    }

    /// Follow `target_id` from the last detection and start scoring.
    pub fn start_monitoring(&self, id: &str, target_id: u32) -> Result<(), ServiceError> {
        let _serial = self.start_lock.lock().unwrap_or_else(|p| p.into_inner());
        let session = self.session(id)?;
        {
            let mut s = session.lock().unwrap_or_else(|p| p.into_inner());
            s.refresh();
            if s.state != SessionState::FacesDetected {
                return Err(s.rejected("start"));
            }
        }
        let running = self.running_count();
        let mut s = session.lock().unwrap_or_else(|p| p.into_inner());
        s.refresh();
        if s.state != SessionState::FacesDetected {
            return Err(s.rejected("start"));
        }
        if running >= self.config.max_monitoring {
            return Err(ServiceError::Busy { limit: self.config.max_monitoring });
        }
        let seed = *s.faces.iter().find(|f| f.id == target_id).ok_or(ServiceError::UnknownFace(target_id))?;
        let detected_at = s.detection.as_ref().map(|d| d.1).ok_or(ServiceError::UnknownFace(target_id))?;
        let track = start_track(&seed, detected_at, self.clock.now_ms(), &s.config.tracker)?;
        let stream = match s.stream.take() {
            Some(st) => st,
            None => return Err(CaptureError::SourceLost("source closed".into()).into()),
        };
        let (first, _) = s.detection.take().expect("checked above");
        let stage = TrackingStage::new(
            Arc::clone(&self.config.detector),
            s.config.tracker.clone(),
            track,
            s.config.stride,
            Some(Arc::clone(&s.registry)),
        );
        let monitor = Monitor::start(MonitorParts {
            mode: s.mode,
            stream,
            first,
            stage,
            scorer: s.scorer.clone(),
            timeline: s.timeline.clone(),
            pace: s.mode == Mode::Live && s.config.source.kind != SourceKind::Screen,
        });
        s.transition("start", SessionState::Monitoring)?;
        s.monitor = Some(monitor);
        s.target = Some(seed);
        Ok(())
    }

    fn running_count(&self) -> usize {
        let all: Vec<_> = self.sessions.read().unwrap_or_else(|p| p.into_inner()).values().cloned().collect();
        all.iter()
            .filter(|s| {
                let mut s = s.lock().unwrap_or_else(|p| p.into_inner());
                s.refresh();
                s.is_running()
            })
            .count()
    }

    /// Drain the workers and return the final summary. Stopping a stopped
    /// session returns the same summary again.
    pub fn stop(&self, id: &str) -> Result<SessionSummary, ServiceError> {
        self.with_session(id, |s| {
            match s.state {
                SessionState::Monitoring => s.finish(),
                SessionState::Stopped => {}
                _ => return Err(s.rejected("stop")),
            }
            Ok(s.summary.clone().expect("set when stopped"))
        })
    }

    /// Summary so far, or the final one once stopped.
    pub fn summary(&self, id: &str) -> Result<SessionSummary, ServiceError> {
        self.with_session(id, |s| Ok(s.summary.clone().unwrap_or_else(|| s.timeline.summarize())))
    }

    pub fn timeline(&self, id: &str, from_ms: Option<u64>, to_ms: Option<u64>) -> Result<Vec<ScoreSample>, ServiceError> {
        self.with_session(id, |s| Ok(s.timeline.series(from_ms.unwrap_or(0), to_ms.unwrap_or(u64::MAX))))
    }

    /// Existing samples plus a feed of new ones.
    pub fn subscribe(&self, id: &str) -> Result<(Vec<ScoreSample>, Receiver<ScoreSample>), ServiceError> {
        self.with_session(id, |s| Ok(s.timeline.subscribe_with_backlog()))
    }

    pub fn info(&self, id: &str) -> Result<SessionInfo, ServiceError> {
        self.with_session(id, |s| Ok(s.info()))
    }

    pub fn state(&self, id: &str) -> Result<SessionState, ServiceError> {
        self.with_session(id, |s| Ok(s.state))
    }

    /// Every state change so far, oldest first.
    pub fn transitions(&self, id: &str) -> Result<Vec<(SessionState, SessionState)>, ServiceError> {
        self.with_session(id, |s| Ok(s.transitions.clone()))
    }

    pub fn audit(&self, id: &str) -> Result<StorageAudit, ServiceError> {
        self.with_session(id, |s| Ok(s.sink.audit()))
    }

    /// The session's audited sink, for components that need to persist.
    pub fn sink(&self, id: &str) -> Result<AuditedSink, ServiceError> {
        self.with_session(id, |s| Ok(s.sink.clone()))
    }

    /// Live pixel buffers held by this session's pipeline.
    pub fn buffer_stats(&self, id: &str) -> Result<RegistryStats, ServiceError> {
        self.with_session(id, |s| Ok(s.registry.stats()))
    }

    /// Write the current summary as JSON to `dir`/summary.json.
    pub fn export_summary(&self, id: &str, dir: &Path) -> Result<PathBuf, ServiceError> {
        self.with_session(id, |s| {
            let summary = s.summary.clone().unwrap_or_else(|| s.timeline.summarize());
            let body = serde_json::to_vec_pretty(&summary).expect("summary serializes");
            let path = dir.join(SUMMARY_FILE);
            s.sink.write(&path, &body, WriteKind::Summary)?;
            Ok(path)
        })
    }

    /// Block until the session leaves `Monitoring` with a running pipeline,
    /// or `timeout` passes. Returns the state at that point.
    pub fn wait_idle(&self, id: &str, timeout: Duration) -> Result<SessionState, ServiceError> {
        let deadline = Instant::now() + timeout;
        loop {
            let (state, running) = self.with_session(id, |s| Ok((s.state, s.is_running())))?;
            if !running || Instant::now() >= deadline {
                return Ok(state);
            }
            std::thread::sleep(Duration::from_millis(5));
        }
    }

    /// Stop the session if needed and forget it.
    pub fn remove(&self, id: &str) -> Result<(), ServiceError> {
        let s = self.sessions.write().unwrap_or_else(|p| p.into_inner()).remove(id);
        let s = s.ok_or_else(|| ServiceError::UnknownSession(id.to_string()))?;
        let mut s = s.lock().unwrap_or_else(|p| p.into_inner());
        if s.state == SessionState::Monitoring {
            s.finish();
        }
        Ok(())
    }
}

impl Drop for SessionManager {
    fn drop(&mut self) {
        let map = self.sessions.get_mut().unwrap_or_else(|p| p.into_inner());
        for s in map.values() {
            let mut s = s.lock().unwrap_or_else(|p| p.into_inner());
            if let Some(m) = s.monitor.take() {
                m.shutdown();
            }
        }
    }
}
