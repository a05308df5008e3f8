//! Frame sources.
//!
//! Everything upstream of face detection goes through [`FrameStream`]: a
//! seeded synthetic generator, a recorded frame bundle on disk, or a live
//! screen-region grabber. All of them produce 8-bit RGB [`Frame`]s with
//! zero-based, gap-free `seq` numbers and non-decreasing session-relative
//! timestamps.

mod bundle;
mod live;
mod synthetic;

use std::path::PathBuf;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clock::Clock;

pub use bundle::{BundleStream, BundleWriter, FrameEntry, GroundTruth, Manifest, MANIFEST_FILE};
pub use live::{LiveStream, ScreenGrabber};
pub use synthetic::{FaceSpec, FrameSpan, Scenario, SyntheticStream, WatermarkSpan};

/// Frame rate used for screen capture when none is configured.
pub const DEFAULT_FPS: f64 = 15.0;
/// Scenario used when a synthetic source names none.
pub const DEFAULT_SCENARIO: &str = "blank-640x480@15";

#[derive(Debug, Error)]
pub enum CaptureError {
    #[error("invalid source config: {0}")]
    InvalidConfig(String),
    #[error("cannot open source: {0}")]
    SourceOpen(String),
    #[error("capability unavailable: {0}")]
    Capability(String),
    #[error("source lost: {0}")]
    SourceLost(String),
    #[error("invalid frame: {0}")]
    InvalidFrame(String),
    #[error("bad scenario descriptor `{descriptor}`: {reason}")]
    Scenario { descriptor: String, reason: String },
}

/// One captured RGB image.
#[derive(Clone, PartialEq, Eq)]
pub struct Frame {
    pub seq: u64,
    pub ts_ms: u64,
    pub width: u32,
    pub height: u32,
    /// Row-major RGB, three bytes per pixel.
    pub pixels: Vec<u8>,
}

impl Frame {
    pub fn new(seq: u64, ts_ms: u64, width: u32, height: u32, pixels: Vec<u8>) -> Result<Self, CaptureError> {
        let expected = width as usize * height as usize * 3;
        if width == 0 || height == 0 || pixels.len() != expected {
            return Err(CaptureError::InvalidFrame(format!(
                "{width}x{height} frame needs {expected} bytes, got {}",
                pixels.len()
            )));
        }
        Ok(Self { seq, ts_ms, width, height, pixels })
    }

    #[inline]
    pub fn pixel(&self, x: u32, y: u32) -> [u8; 3] {
        let i = (y as usize * self.width as usize + x as usize) * 3;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }
}

impl std::fmt::Debug for Frame {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Frame")
            .field("seq", &self.seq)
            .field("ts_ms", &self.ts_ms)
            .field("width", &self.width)
            .field("height", &self.height)
            .finish_non_exhaustive()
    }
}

/// A frame together with the number of source frames known to have been
/// skipped immediately before it (live sources only; always 0 otherwise).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Captured {
    pub frame: Frame,
    pub dropped: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SourceKind {
    Synthetic,
    Bundle,
    Screen,
}

/// Screen capture rectangle, in screen pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Region {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SourceConfig {
    pub kind: SourceKind,
    /// Target frame rate. Screen sources default to [`DEFAULT_FPS`]; bundles
    /// default to their manifest rate and are resampled when this is set;
    /// synthetic sources always run at the rate in their descriptor.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fps: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region: Option<Region>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bundle_path: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<String>,
}

impl SourceConfig {
    pub fn synthetic(scenario: impl Into<String>) -> Self {
        Self { kind: SourceKind::Synthetic, fps: None, region: None, bundle_path: None, scenario: Some(scenario.into()) }
    }

    pub fn bundle(path: impl Into<PathBuf>) -> Self {
        Self { kind: SourceKind::Bundle, fps: None, region: None, bundle_path: Some(path.into()), scenario: None }
    }

    pub fn screen(region: Region) -> Self {
        Self { kind: SourceKind::Screen, fps: None, region: Some(region), bundle_path: None, scenario: None }
    }

    pub fn validate(&self) -> Result<(), CaptureError> {
        let bad = |m: &str| Err(CaptureError::InvalidConfig(m.to_string()));
        if let Some(fps) = self.fps {
            if !(fps.is_finite() && fps > 0.0) {
                return bad("fps must be positive");
            }
        }
        match (self.kind, self.region) {
            (SourceKind::Screen, None) => return bad("screen sources need a region"),
            (SourceKind::Screen, Some(r)) if r.w == 0 || r.h == 0 => return bad("empty capture region"),
            (k, Some(_)) if k != SourceKind::Screen => return bad("region is only valid for screen sources"),
            _ => {}
        }
        match (self.kind, &self.bundle_path) {
            (SourceKind::Bundle, None) => return bad("bundle sources need bundle_path"),
            (k, Some(_)) if k != SourceKind::Bundle => return bad("bundle_path is only valid for bundle sources"),
            _ => {}
        }
        if self.scenario.is_some() && self.kind != SourceKind::Synthetic {
            return bad("scenario is only valid for synthetic sources");
        }
        Ok(())
    }
}

/// A stream of frames from one source. Owned by a single reader.
pub trait FrameStream: Send {
    fn fps(&self) -> f64;
    fn dimensions(&self) -> (u32, u32);
    /// Next frame, or `Ok(None)` at end of stream.
    fn next_frame(&mut self) -> Result<Option<Captured>, CaptureError>;
    /// Annotations recorded alongside the source, when it has any.
    fn ground_truth(&self) -> Option<&GroundTruth> {
        None
    }
}

/// Open a synthetic or bundle source. Screen sources need a platform grabber
/// and go through [`open_screen`].
pub fn open_source(config: &SourceConfig) -> Result<Box<dyn FrameStream>, CaptureError> {
    config.validate()?;
    match config.kind {
        SourceKind::Synthetic => {
            let desc = config.scenario.as_deref().unwrap_or(DEFAULT_SCENARIO);
            let scenario: Scenario = desc.parse()?;
            Ok(Box::new(SyntheticStream::new(scenario)))
        }
        SourceKind::Bundle => {
            let path = config.bundle_path.as_ref().expect("validated");
            Ok(Box::new(BundleStream::open(path, config.fps)?))
        }
        SourceKind::Screen => Err(CaptureError::Capability(
            "no screen capture backend is available in this build; supply a ScreenGrabber".into(),
        )),
    }
}

/// Open a screen-region source on top of a platform grabber.
pub fn open_screen<G: ScreenGrabber + 'static>(
    config: &SourceConfig,
    grabber: G,
    clock: Arc<dyn Clock>,
) -> Result<Box<dyn FrameStream>, CaptureError> {
    config.validate()?;
    if config.kind != SourceKind::Screen {
        return Err(CaptureError::InvalidConfig("open_screen needs a screen source".into()));
    }
    let region = config.region.expect("validated");
    Ok(Box::new(LiveStream::new(grabber, region, config.fps.unwrap_or(DEFAULT_FPS), clock)?))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn config_invariants() {
        assert!(SourceConfig::synthetic("blank-64x64@15").validate().is_ok());
        let mut c = SourceConfig::synthetic("blank-64x64@15");
        c.fps = Some(0.0);
        assert!(c.validate().is_err());
        let mut c = SourceConfig::bundle("/tmp/x");
        c.region = Some(Region { x: 0, y: 0, w: 10, h: 10 });
        assert!(c.validate().is_err());
        let c = SourceConfig { kind: SourceKind::Screen, fps: None, region: None, bundle_path: None, scenario: None };
        assert!(c.validate().is_err());
        let c = SourceConfig { kind: SourceKind::Bundle, fps: None, region: None, bundle_path: None, scenario: None };
        assert!(c.validate().is_err());
    }

    #[test]
    fn frame_length_invariant() {
        assert!(Frame::new(0, 0, 2, 2, vec![0; 12]).is_ok());
        assert!(Frame::new(0, 0, 2, 2, vec![0; 11]).is_err());
        assert!(Frame::new(0, 0, 0, 2, vec![]).is_err());
    }

    #[test]
    fn synthetic_stream_echoes_descriptor() {
        let s = open_source(&SourceConfig::synthetic("blank-640x480@30")).unwrap();
        assert_eq!(s.dimensions(), (640, 480));
        assert_eq!(s.fps(), 30.0);
    }

    #[test]
    fn screen_without_backend_is_capability_error() {
        let c = SourceConfig::screen(Region { x: 0, y: 0, w: 100, h: 100 });
        assert!(matches!(open_source(&c), Err(CaptureError::Capability(_))));
    }
}
