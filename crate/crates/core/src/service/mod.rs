//! Monitoring sessions: the detect / select / monitor / summarize workflow
//! over one frame source, plus the storage audit that backs the
//! no-persistence guarantee.

mod audit;
mod manager;
mod monitor;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::capture::{CaptureError, SourceConfig, SourceKind};
use crate::face::{FaceError, TrackerConfig};
use crate::scoring::{ScorerSpec, ScoringError, SEGMENT_LEN};
use crate::timeline::BandThresholds;

pub use audit::{AuditedSink, StorageAudit, WriteEvent, WriteKind};
pub use manager::{DetectedFace, ManagerConfig, ScreenOpener, SessionInfo, SessionManager, SUMMARY_FILE};
pub use monitor::{FRAME_QUEUE_CAPACITY, SEGMENT_QUEUE_CAPACITY};

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("invalid session config: {0}")]
    Config(String),
    #[error(transparent)]
    Capture(#[from] CaptureError),
    #[error(transparent)]
    Face(#[from] FaceError),
    #[error(transparent)]
    Scoring(#[from] ScoringError),
    #[error("unknown session `{0}`")]
    UnknownSession(String),
    #[error("no face {0} in the current detection")]
    UnknownFace(u32),
    #[error("`{op}` is not allowed while the session is {state:?}")]
    RejectedState { op: &'static str, state: SessionState },
    #[error("{limit} session(s) already monitoring")]
    Busy { limit: usize },
    #[error("refused to persist pixel data to {0}")]
    PixelWrite(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Live sessions follow a real-time source and drop data to keep up; replay
/// sessions process every frame of a finite source and stop at its end.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Live,
    Replay,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SessionState {
    Idle,
    FacesDetected,
    Monitoring,
    Stopped,
}

impl SessionState {
    /// The session transition table.
    pub fn can_become(self, next: SessionState) -> bool {
        use SessionState::*;
        matches!(
            (self, next),
            (Idle, FacesDetected)
                | (FacesDetected, FacesDetected)
                | (FacesDetected, Monitoring)
                | (Monitoring, FacesDetected)
                | (Monitoring, Stopped)
        )
    }
}

fn default_stride() -> usize {
    SEGMENT_LEN
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SessionConfig {
    pub source: SourceConfig,
    #[serde(default)]
    pub scorer: ScorerSpec,
    /// Defaults to live for screen sources and replay otherwise.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<Mode>,
    #[serde(default = "default_stride")]
    pub stride: usize,
    #[serde(default)]
    pub tracker: TrackerConfig,
    #[serde(default)]
    pub thresholds: BandThresholds,
}

impl SessionConfig {
    pub fn new(source: SourceConfig) -> Self {
        Self {
            source,
            scorer: ScorerSpec::Reference,
            mode: None,
            stride: SEGMENT_LEN,
            tracker: TrackerConfig::default(),
            thresholds: BandThresholds::default(),
        }
    }

    pub fn mode(&self) -> Mode {
        self.mode.unwrap_or(if self.source.kind == SourceKind::Screen { Mode::Live } else { Mode::Replay })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transition_table() {
        use SessionState::*;
        let all = [Idle, FacesDetected, Monitoring, Stopped];
        let legal: Vec<_> = all.iter().flat_map(|&a| all.iter().map(move |&b| (a, b))).filter(|(a, b)| a.can_become(*b)).collect();
        assert_eq!(legal.len(), 5);
        assert!(!Stopped.can_become(Idle));
        assert!(!Idle.can_become(Monitoring));
    }

    #[test]
    fn config_defaults_from_json() {
        let c: SessionConfig = serde_json::from_str(r#"{"source":{"kind":"synthetic","scenario":"blank-64x64@15"}}"#).unwrap();
        assert_eq!(c.stride, 30);
        assert_eq!(c.scorer, ScorerSpec::Reference);
        assert_eq!(c.mode(), Mode::Replay);
    }
}
