//! Seeded synthetic frame generator.
//!
//! Scenarios are described by a compact string:
//!
//! ```text
//! <name>-<W>x<H>@<FPS>[;key=value]...
//!
//!   frames=N             stream length (unbounded when absent)
//!   seed=N               background noise seed (default 0)
//!   face=x,y,w,h[,dx,dy] fiducial face, optionally moving dx,dy px/frame
//!   wm=I:A-B             watermark intensity I on frames A..=B
//!   hide=A-B             no faces drawn on frames A..=B
//!   subject=ID           subject annotation copied into ground truth
//!   label=real|fake      label override (default: fake iff any wm > 0)
//! ```
//!
//! `face`, `wm` and `hide` may repeat. Example:
//! `call-320x240@30;frames=900;face=112,72,96,96;wm=0.9:300-599`.

use std::path::Path;
use std::str::FromStr;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{Captured, CaptureError, Frame, FrameStream, GroundTruth, Manifest};
use crate::eval::Label;
use crate::fiducial;
use crate::geometry::Rect;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FaceSpec {
    pub rect: Rect,
    /// Pixels per frame.
    pub velocity: (f64, f64),
}

/// Inclusive frame range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FrameSpan {
    pub start: u64,
    pub end: u64,
}

impl FrameSpan {
    pub fn contains(&self, i: u64) -> bool {
        (self.start..=self.end).contains(&i)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WatermarkSpan {
    pub start: u64,
    pub end: u64,
    pub intensity: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub width: u32,
    pub height: u32,
    pub fps: f64,
    pub frames: Option<u64>,
    pub seed: u64,
    pub faces: Vec<FaceSpec>,
    pub watermarks: Vec<WatermarkSpan>,
    pub hidden: Vec<FrameSpan>,
    pub subject: Option<String>,
    pub label: Option<Label>,
    descriptor: String,
}

impl FromStr for Scenario {
    type Err = CaptureError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = |reason: String| CaptureError::Scenario { descriptor: s.to_string(), reason };
        let mut parts = s.split(';').map(str::trim);
        let head = parts.next().unwrap_or_default();
        let (name, dims) = head.rsplit_once('-').ok_or_else(|| err("expected <name>-<W>x<H>@<FPS>".into()))?;
        let (size, fps) = dims.split_once('@').ok_or_else(|| err("missing @<FPS>".into()))?;
        let (w, h) = size.split_once('x').ok_or_else(|| err("missing <W>x<H>".into()))?;
        let width: u32 = w.parse().map_err(|_| err(format!("bad width `{w}`")))?;
        let height: u32 = h.parse().map_err(|_| err(format!("bad height `{h}`")))?;
        let fps: f64 = fps.parse().map_err(|_| err(format!("bad fps `{fps}`")))?;
        if width == 0 || height == 0 {
            return Err(err("frame size must be non-zero".into()));
        }
        if !(fps.is_finite() && fps > 0.0) {
            return Err(err("fps must be positive".into()));
        }

        let mut sc = Scenario {
            name: name.to_string(),
            width,
            height,
            fps,
            frames: None,
            seed: 0,
            faces: Vec::new(),
            watermarks: Vec::new(),
            hidden: Vec::new(),
            subject: None,
            label: None,
            descriptor: s.to_string(),
        };

        let span = |v: &str| -> Result<FrameSpan, CaptureError> {
            let (a, b) = v.split_once('-').ok_or_else(|| err(format!("bad frame span `{v}`")))?;
            let start = a.parse().map_err(|_| err(format!("bad frame `{a}`")))?;
            let end = b.parse().map_err(|_| err(format!("bad frame `{b}`")))?;
            if end < start {
                return Err(err(format!("reversed frame span `{v}`")));
            }
            Ok(FrameSpan { start, end })
        };

        for kv in parts.filter(|p| !p.is_empty()) {
            let (key, val) = kv.split_once('=').ok_or_else(|| err(format!("expected key=value, got `{kv}`")))?;
            match key {
                "frames" => sc.frames = Some(val.parse().map_err(|_| err(format!("bad frames `{val}`")))?),
                "seed" => sc.seed = val.parse().map_err(|_| err(format!("bad seed `{val}`")))?,
                "face" => {
                    let nums: Vec<f64> = val
                        .split(',')
                        .map(|n| n.trim().parse::<f64>())
                        .collect::<Result<_, _>>()
                        .map_err(|_| err(format!("bad face `{val}`")))?;
                    if nums.len() != 4 && nums.len() != 6 {
                        return Err(err(format!("face needs x,y,w,h[,dx,dy], got `{val}`")));
                    }
                    if nums[..4].iter().any(|v| *v < 0.0 || v.fract() != 0.0) {
                        return Err(err(format!("face rect must be non-negative integers: `{val}`")));
                    }
                    let rect = Rect::new(nums[0] as u32, nums[1] as u32, nums[2] as u32, nums[3] as u32);
                    if rect.w < fiducial::MIN_FACE_SIDE || rect.h < fiducial::MIN_FACE_SIDE {
                        return Err(err(format!("faces must be at least {} px", fiducial::MIN_FACE_SIDE)));
                    }
                    if !rect.fits_in(width, height) {
                        return Err(err(format!("face `{val}` does not fit in {width}x{height}")));
                    }
                    let velocity = if nums.len() == 6 { (nums[4], nums[5]) } else { (0.0, 0.0) };
                    sc.faces.push(FaceSpec { rect, velocity });
                }
                "wm" => {
                    let (i, range) = val.split_once(':').ok_or_else(|| err(format!("wm needs I:A-B, got `{val}`")))?;
                    let intensity: f64 = i.parse().map_err(|_| err(format!("bad intensity `{i}`")))?;
                    if !(0.0..=1.0).contains(&intensity) {
                        return Err(err("watermark intensity must be in [0,1]".into()));
                    }
                    let FrameSpan { start, end } = span(range)?;
                    sc.watermarks.push(WatermarkSpan { start, end, intensity });
                }
                "hide" => sc.hidden.push(span(val)?),
                "subject" => sc.subject = Some(val.to_string()),
                "label" => {
                    sc.label = Some(match val {
                        "real" => Label::Real,
                        "fake" => Label::Fake,
                        _ => return Err(err(format!("bad label `{val}`"))),
                    })
                }
                _ => return Err(err(format!("unknown key `{key}`"))),
            }
        }
        Ok(sc)
    }
}

impl std::fmt::Display for Scenario {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.descriptor)
    }
}

impl Scenario {
    /// Ground-truth face rectangles on frame `i`.
    pub fn face_rects(&self, i: u64) -> Vec<Rect> {
        if self.hidden.iter().any(|s| s.contains(i)) {
            return Vec::new();
        }
        self.faces
            .iter()
            .map(|f| {
                let max_x = f64::from(self.width - f.rect.w);
                let max_y = f64::from(self.height - f.rect.h);
                let x = (f64::from(f.rect.x) + f.velocity.0 * i as f64).round().clamp(0.0, max_x);
                let y = (f64::from(f.rect.y) + f.velocity.1 * i as f64).round().clamp(0.0, max_y);
                Rect::new(x as u32, y as u32, f.rect.w, f.rect.h)
            })
            .collect()
    }

    /// Watermark intensity embedded on frame `i`.
    pub fn watermark(&self, i: u64) -> f64 {
        self.watermarks
            .iter()
            .filter(|w| (w.start..=w.end).contains(&i))
            .map(|w| w.intensity)
            .fold(0.0, f64::max)
    }

    pub fn label(&self) -> Label {
        self.label.unwrap_or(if self.watermarks.iter().any(|w| w.intensity > 0.0) {
            Label::Fake
        } else {
            Label::Real
        })
    }

    pub fn timestamp_ms(&self, i: u64) -> u64 {
        (i as f64 * 1000.0 / self.fps).round() as u64
    }

    /// Render frame `i` as row-major RGB.
    pub fn render(&self, i: u64) -> Vec<u8> {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) ^ i);
        let mut pixels = vec![0u8; self.width as usize * self.height as usize * 3];
        rng.fill_bytes(&mut pixels);
        // Background channels stay in [64, 191]: never the marker color.
        for p in &mut pixels {
            *p = 64 + (*p >> 1);
        }
        let wm = self.watermark(i);
        for rect in self.face_rects(i) {
            fiducial::paint_face(&mut pixels, self.width, rect, wm);
        }
        pixels
    }

    pub fn ground_truth(&self) -> Option<GroundTruth> {
        let n = self.frames?;
        Some(GroundTruth {
            label: Some(self.label()),
            subject: self.subject.clone(),
            scenario: Some(self.descriptor.clone()),
            rects: (0..n).map(|i| self.face_rects(i)).collect(),
            watermarks: self.watermarks.clone(),
        })
    }

    /// Render every frame into a bundle directory. Test and demo fixture
    /// tooling; sessions never call this.
    pub fn write_bundle(&self, dir: &Path) -> Result<Manifest, CaptureError> {
        let n = self.frames.ok_or_else(|| CaptureError::InvalidConfig("bundle export needs frames=N".into()))?;
        let mut writer = super::BundleWriter::create(dir, self.width, self.height, self.fps)?;
        for i in 0..n {
            let frame = Frame::new(i, self.timestamp_ms(i), self.width, self.height, self.render(i))?;
            writer.push(&frame)?;
        }
        writer.finish(self.ground_truth())
    }
}

/// Streams a [`Scenario`] frame by frame.
#[derive(Debug)]
pub struct SyntheticStream {
    scenario: Scenario,
    next: u64,
    truth: Option<GroundTruth>,
}

impl SyntheticStream {
    pub fn new(scenario: Scenario) -> Self {
        let truth = scenario.ground_truth();
        Self { scenario, next: 0, truth }
    }

    pub fn scenario(&self) -> &Scenario {
        &self.scenario
    }
}

impl FrameStream for SyntheticStream {
    fn fps(&self) -> f64 {
        self.scenario.fps
    }

    fn dimensions(&self) -> (u32, u32) {
        (self.scenario.width, self.scenario.height)
    }

    fn next_frame(&mut self) -> Result<Option<Captured>, CaptureError> {
        if self.scenario.frames.is_some_and(|n| self.next >= n) {
            return Ok(None);
        }
        let i = self.next;
        self.next += 1;
        let frame = Frame::new(i, self.scenario.timestamp_ms(i), self.scenario.width, self.scenario.height, self.scenario.render(i))?;
        Ok(Some(Captured { frame, dropped: 0 }))
    }

    fn ground_truth(&self) -> Option<&GroundTruth> {
        self.truth.as_ref()
    }
}
