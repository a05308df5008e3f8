//! Recorded frame bundles.
//!
//! A bundle is a directory with a `manifest.json` and one PNG per frame:
//!
//! ```json
//! {
//!   "width": 320, "height": 240, "fps": 30.0, "frame_count": 2,
//!   "frames": ["000000.png", {"file": "000001.png", "ts_ms": 33.3}],
//!   "ground_truth": { "label": "fake", "rects": [[...], [...]] }
//! }
//! ```
//!
//! Frame entries are plain file names (timestamped at the declared rate) or
//! `{file, ts_ms}` objects. When the recorded timestamps do not match the
//! target rate, playback picks the nearest recorded frame for each output
//! tick, duplicating or skipping frames. Pixels are never interpolated.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::synthetic::WatermarkSpan;
use super::{CaptureError, Captured, Frame, FrameStream};
use crate::eval::Label;
use crate::geometry::Rect;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum FrameEntry {
    File(String),
    Timed { file: String, ts_ms: f64 },
}

impl FrameEntry {
    pub fn file(&self) -> &str {
        match self {
            FrameEntry::File(f) | FrameEntry::Timed { file: f, .. } => f,
        }
    }
}

/// Optional annotations stored with a bundle.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub label: Option<Label>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subject: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<String>,
    /// Face rectangles per recorded frame.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub rects: Vec<Vec<Rect>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub watermarks: Vec<WatermarkSpan>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub width: u32,
    pub height: u32,
    pub fps: f64,
    pub frame_count: u64,
    pub frames: Vec<FrameEntry>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ground_truth: Option<GroundTruth>,
}

impl Manifest {
    pub fn load(dir: &Path) -> Result<Self, CaptureError> {
        let path = dir.join(MANIFEST_FILE);
        let text = fs::read_to_string(&path)
            .map_err(|e| CaptureError::SourceOpen(format!("{}: {e}", path.display())))?;
        let m: Manifest = serde_json::from_str(&text)
            .map_err(|e| CaptureError::SourceOpen(format!("{}: {e}", path.display())))?;
        m.validate()?;
        Ok(m)
    }

    fn validate(&self) -> Result<(), CaptureError> {
        let bad = |m: String| Err(CaptureError::SourceOpen(m));
        if self.width == 0 || self.height == 0 {
            return bad("manifest has zero frame size".into());
        }
        if !(self.fps.is_finite() && self.fps > 0.0) {
            return bad("manifest fps must be positive".into());
        }
        if self.frame_count != self.frames.len() as u64 {
            return bad(format!("frame_count {} but {} frame entries", self.frame_count, self.frames.len()));
        }
        let ts = self.source_timestamps();
        if ts.windows(2).any(|w| w[1] < w[0]) || ts.iter().any(|t| !t.is_finite()) {
            return bad("frame timestamps must be finite and non-decreasing".into());
        }
        Ok(())
    }

    /// Recorded timestamp of every frame, in ms.
    pub fn source_timestamps(&self) -> Vec<f64> {
        self.frames
            .iter()
            .enumerate()
            .map(|(i, e)| match e {
                FrameEntry::Timed { ts_ms, .. } => *ts_ms,
                FrameEntry::File(_) => i as f64 * 1000.0 / self.fps,
            })
            .collect()
    }
}

/// Output tick -> recorded frame index, for playback at `target_fps`.
///
/// The recording covers `last - first + mean_spacing` ms, so `n` frames
/// recorded exactly at the target rate map one-to-one.
pub(crate) fn resample_schedule(src_ts: &[f64], declared_fps: f64, target_fps: f64) -> Vec<usize> {
    let n = src_ts.len();
    if n == 0 {
        return Vec::new();
    }
    let first = src_ts[0];
    let last = src_ts[n - 1];
    let spacing = if n > 1 { (last - first) / (n - 1) as f64 } else { 1000.0 / declared_fps };
    let spacing = if spacing > 0.0 { spacing } else { 1000.0 / declared_fps };
    let duration_s = (last - first + spacing) / 1000.0;
    // guard against 23.999999 -> 24 style float noise
    let count = (duration_s * target_fps - 1e-9).ceil().max(1.0) as usize;
    let tick = 1000.0 / target_fps;
    (0..count)
        .map(|k| {
            let t = first + k as f64 * tick;
            let hi = src_ts.partition_point(|&s| s < t - 1e-9);
            if hi == 0 {
                0
            } else if hi >= n {
                n - 1
            } else {
                // tie goes to the earlier frame
                if (src_ts[hi] - t) < (t - src_ts[hi - 1]) - 1e-9 { hi } else { hi - 1 }
            }
        })
        .collect()
}

/// Replays a bundle directory.
#[derive(Debug)]
pub struct BundleStream {
    dir: PathBuf,
    manifest: Manifest,
    fps: f64,
    schedule: Vec<usize>,
    next: usize,
    cached: Option<(usize, Vec<u8>)>,
}

impl BundleStream {
    pub fn open(dir: &Path, target_fps: Option<f64>) -> Result<Self, CaptureError> {
        if !dir.is_dir() {
            return Err(CaptureError::SourceOpen(format!("{} is not a directory", dir.display())));
        }
        let manifest = Manifest::load(dir)?;
        let fps = target_fps.unwrap_or(manifest.fps);
        let schedule = resample_schedule(&manifest.source_timestamps(), manifest.fps, fps);
        Ok(Self { dir: dir.to_path_buf(), manifest, fps, schedule, next: 0, cached: None })
    }

    pub fn manifest(&self) -> &Manifest {
        &self.manifest
    }

    /// Number of frames this stream will yield.
    pub fn len(&self) -> usize {
        self.schedule.len()
    }

    pub fn is_empty(&self) -> bool {
        self.schedule.is_empty()
    }

    /// Recorded frame index behind each output frame.
    pub fn schedule(&self) -> &[usize] {
        &self.schedule
    }

    fn decode(&self, idx: usize) -> Result<Vec<u8>, CaptureError> {
        let path = self.dir.join(self.manifest.frames[idx].file());
        let img = image::open(&path)
            .map_err(|e| CaptureError::SourceLost(format!("{}: {e}", path.display())))?
            .to_rgb8();
        if img.width() != self.manifest.width || img.height() != self.manifest.height {
            return Err(CaptureError::SourceLost(format!(
                "{} is {}x{}, manifest says {}x{}",
                path.display(),
                img.width(),
                img.height(),
                self.manifest.width,
                self.manifest.height
            )));
        }
        Ok(img.into_raw())
    }
}

impl FrameStream for BundleStream {
    fn fps(&self) -> f64 {
        self.fps
    }

    fn dimensions(&self) -> (u32, u32) {
        (self.manifest.width, self.manifest.height)
    }

    fn next_frame(&mut self) -> Result<Option<Captured>, CaptureError> {
        let Some(&src) = self.schedule.get(self.next) else {
            return Ok(None);
        };
        let k = self.next as u64;
        let pixels = match &self.cached {
            Some((i, px)) if *i == src => px.clone(),
            _ => {
                let px = self.decode(src)?;
                self.cached = Some((src, px.clone()));
                px
            }
        };
        self.next += 1;
        let ts_ms = (k as f64 * 1000.0 / self.fps).round() as u64;
        let frame = Frame::new(k, ts_ms, self.manifest.width, self.manifest.height, pixels)?;
        Ok(Some(Captured { frame, dropped: 0 }))
    }

    fn ground_truth(&self) -> Option<&GroundTruth> {
        self.manifest.ground_truth.as_ref()
    }
}

/// Writes frames into a new bundle directory.
#[derive(Debug)]
pub struct BundleWriter {
    dir: PathBuf,
    width: u32,
    height: u32,
    fps: f64,
    frames: Vec<FrameEntry>,
}

impl BundleWriter {
    pub fn create(dir: &Path, width: u32, height: u32, fps: f64) -> Result<Self, CaptureError> {
        fs::create_dir_all(dir).map_err(|e| CaptureError::SourceOpen(format!("{}: {e}", dir.display())))?;
        Ok(Self { dir: dir.to_path_buf(), width, height, fps, frames: Vec::new() })
    }

    pub fn push(&mut self, frame: &Frame) -> Result<(), CaptureError> {
        self.push_timed(frame, None)
    }

    /// Push a frame with an explicit recorded timestamp.
    pub fn push_timed(&mut self, frame: &Frame, ts_ms: Option<f64>) -> Result<(), CaptureError> {
        if frame.width != self.width || frame.height != self.height {
            return Err(CaptureError::InvalidFrame("frame size differs from bundle size".into()));
        }
        let name = format!("{:06}.png", self.frames.len());
        let path = self.dir.join(&name);
        image::save_buffer(&path, &frame.pixels, frame.width, frame.height, image::ExtendedColorType::Rgb8)
            .map_err(|e| CaptureError::SourceOpen(format!("{}: {e}", path.display())))?;
        self.frames.push(match ts_ms {
            Some(ts_ms) => FrameEntry::Timed { file: name, ts_ms },
            None => FrameEntry::File(name),
        });
        Ok(())
    }

    pub fn finish(self, ground_truth: Option<GroundTruth>) -> Result<Manifest, CaptureError> {
        let manifest = Manifest {
            width: self.width,
            height: self.height,
            fps: self.fps,
            frame_count: self.frames.len() as u64,
            frames: self.frames,
            ground_truth,
        };
        let path = self.dir.join(MANIFEST_FILE);
        let json = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
        fs::write(&path, json).map_err(|e| CaptureError::SourceOpen(format!("{}: {e}", path.display())))?;
        Ok(manifest)
    }
}
