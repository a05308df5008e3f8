//! Live screen-region capture.
//!
//! Platform screen APIs live behind [`ScreenGrabber`]; this module only crops
//! the configured region, stamps frames from the session clock and detects
//! stalls.

use std::sync::Arc;

use image::RgbImage;

use super::{CaptureError, Captured, Frame, FrameStream, Region};
use crate::clock::Clock;

/// A platform screen grabber.
pub trait ScreenGrabber: Send {
    /// Full screen size in pixels.
    fn screen_size(&self) -> (u32, u32);
    /// Grab the screen, waiting at most one frame interval. `Ok(None)` means
    /// no new image arrived in that window. Errors mean the source is gone.
    fn grab(&mut self) -> Result<Option<RgbImage>, CaptureError>;
}

pub struct LiveStream<G> {
    grabber: G,
    region: Region,
    fps: f64,
    clock: Arc<dyn Clock>,
    origin_ms: u64,
    next_seq: u64,
    last_ts: Option<u64>,
}

impl<G: ScreenGrabber> LiveStream<G> {
    pub fn new(grabber: G, region: Region, fps: f64, clock: Arc<dyn Clock>) -> Result<Self, CaptureError> {
        let (sw, sh) = grabber.screen_size();
        if region.w == 0 || region.h == 0 || region.x + region.w > sw || region.y + region.h > sh {
            return Err(CaptureError::SourceOpen(format!("region {region:?} is outside the {sw}x{sh} screen")));
        }
        let origin_ms = clock.now_ms();
        Ok(Self { grabber, region, fps, clock, origin_ms, next_seq: 0, last_ts: None })
    }

    fn crop(&self, img: &RgbImage) -> Result<Vec<u8>, CaptureError> {
        let r = self.region;
        if r.x + r.w > img.width() || r.y + r.h > img.height() {
            return Err(CaptureError::SourceLost("screen shrank below the capture region".into()));
        }
        let stride = img.width() as usize * 3;
        let raw = img.as_raw();
        let mut out = Vec::with_capacity(r.w as usize * r.h as usize * 3);
        for y in r.y..r.y + r.h {
            let start = y as usize * stride + r.x as usize * 3;
            out.extend_from_slice(&raw[start..start + r.w as usize * 3]);
        }
        Ok(out)
    }
}

impl<G: ScreenGrabber> FrameStream for LiveStream<G> {
    fn fps(&self) -> f64 {
        self.fps
    }

    fn dimensions(&self) -> (u32, u32) {
        (self.region.w, self.region.h)
    }

    fn next_frame(&mut self) -> Result<Option<Captured>, CaptureError> {
        let img = loop {
            if let Some(img) = self.grabber.grab()? {
                break img;
            }
        };
        let pixels = self.crop(&img)?;
        let now = self.clock.now_ms().saturating_sub(self.origin_ms);
        let ts_ms = self.last_ts.map_or(now, |last| now.max(last));
        let interval = 1000.0 / self.fps;
        let dropped = match self.last_ts {
            Some(last) => (((ts_ms - last) as f64 / interval).round() as u32).saturating_sub(1),
            None => 0,
        };
        self.last_ts = Some(ts_ms);
        let seq = self.next_seq;
        self.next_seq += 1;
        let frame = Frame::new(seq, ts_ms, self.region.w, self.region.h, pixels)?;
        Ok(Some(Captured { frame, dropped }))
    }
}
