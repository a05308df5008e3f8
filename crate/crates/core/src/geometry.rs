//! Integer pixel rectangles.

use serde::{Deserialize, Serialize};

/// Axis-aligned rectangle in frame pixels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Rect {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

impl Rect {
    pub const fn new(x: u32, y: u32, w: u32, h: u32) -> Self {
        Self { x, y, w, h }
    }

    pub fn right(&self) -> u32 {
        self.x + self.w
    }

    pub fn bottom(&self) -> u32 {
        self.y + self.h
    }

    pub fn area(&self) -> u64 {
        u64::from(self.w) * u64::from(self.h)
    }

    pub fn is_empty(&self) -> bool {
        self.w == 0 || self.h == 0
    }

    pub fn center(&self) -> (f64, f64) {
        (
            f64::from(self.x) + f64::from(self.w) / 2.0,
            f64::from(self.y) + f64::from(self.h) / 2.0,
        )
    }

    /// True when the rectangle is non-empty and lies fully inside a
    /// `width` x `height` frame.
    pub fn fits_in(&self, width: u32, height: u32) -> bool {
        !self.is_empty() && self.right() <= width && self.bottom() <= height
    }

    pub fn intersection(&self, other: &Rect) -> Option<Rect> {
        let x0 = self.x.max(other.x);
        let y0 = self.y.max(other.y);
        let x1 = self.right().min(other.right());
        let y1 = self.bottom().min(other.bottom());
        (x1 > x0 && y1 > y0).then(|| Rect::new(x0, y0, x1 - x0, y1 - y0))
    }

    pub fn iou(&self, other: &Rect) -> f64 {
        let inter = self.intersection(other).map_or(0, |r| r.area());
        let union = self.area() + other.area() - inter;
        if union == 0 {
            0.0
        } else {
            inter as f64 / union as f64
        }
    }

    /// Scale the rectangle about its center by `factor`, clamped to the frame.
    pub fn inflate(&self, factor: f64, width: u32, height: u32) -> Rect {
        let (cx, cy) = self.center();
        let hw = f64::from(self.w) * factor / 2.0;
        let hh = f64::from(self.h) * factor / 2.0;
        let x0 = (cx - hw).floor().max(0.0) as u32;
        let y0 = (cy - hh).floor().max(0.0) as u32;
        let x1 = ((cx + hw).ceil() as u32).min(width);
        let y1 = ((cy + hh).ceil() as u32).min(height);
        Rect::new(x0, y0, x1.saturating_sub(x0), y1.saturating_sub(y0))
    }

    pub fn translate(&self, dx: u32, dy: u32) -> Rect {
        Rect::new(self.x + dx, self.y + dy, self.w, self.h)
    }

    /// Largest absolute coordinate difference to `other` over all four edges.
    pub fn max_edge_distance(&self, other: &Rect) -> u32 {
        [
            self.x.abs_diff(other.x),
            self.y.abs_diff(other.y),
            self.right().abs_diff(other.right()),
            self.bottom().abs_diff(other.bottom()),
        ]
        .into_iter()
        .max()
        .unwrap_or(0)
    }
}
