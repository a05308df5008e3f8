//! Geometry of the synthetic "fiducial" face.
//!
//! Synthetic frames draw each face as a rectangle outlined by a ring of a
//! reserved marker color, with a flat skin interior. A block near the top-left
//! corner of the interior carries a watermark intensity in [0, 1] packed as a
//! 24-bit integer across the R, G and B bytes. The generator, the fiducial
//! detector and the reference scorer all agree on this layout through the
//! helpers below.
//!
//! Layout, as fractions of the face side:
//!
//! ```text
//!  0 ........ ring (marker color, side/24 px, at least 2)
//!  1/12 ..... watermark block starts
//!  1/3 ...... watermark block ends
//! ```
//!
//! The reference scorer reads the `[0.15, 0.27)` sub-square of a face crop,
//! which stays inside the block under small tracking offsets.

use crate::geometry::Rect;

/// Reserved outline color. Synthetic backgrounds never produce it.
pub const MARKER: [u8; 3] = [255, 0, 255];
pub const SKIN: [u8; 3] = [205, 160, 130];
const FEATURE: [u8; 3] = [70, 45, 40];

/// Smallest face side the generator will draw.
pub const MIN_FACE_SIDE: u32 = 32;

pub const BLOCK_START: f64 = 1.0 / 12.0;
pub const BLOCK_END: f64 = 1.0 / 3.0;
pub const READ_START: f64 = 0.15;
pub const READ_END: f64 = 0.27;

const MAX24: f64 = 16_777_215.0;

pub fn ring_thickness(side: u32) -> u32 {
    (side / 24).max(2)
}

pub fn encode_watermark(intensity: f64) -> [u8; 3] {
    let v = (intensity.clamp(0.0, 1.0) * MAX24).round() as u32;
    [(v >> 16) as u8, (v >> 8) as u8, v as u8]
}

pub fn decode_watermark(px: [u8; 3]) -> f64 {
    let v = (u32::from(px[0]) << 16) | (u32::from(px[1]) << 8) | u32::from(px[2]);
    f64::from(v) / MAX24
}

/// `[start, end)` pixel span of a fraction range over `len` pixels.
pub fn span(len: u32, start: f64, end: f64) -> (u32, u32) {
    let a = (f64::from(len) * start).ceil() as u32;
    let b = (f64::from(len) * end).floor() as u32;
    (a.min(len), b.max(a).min(len))
}

/// Draw a fiducial face into a row-major RGB buffer.
pub fn paint_face(pixels: &mut [u8], width: u32, rect: Rect, watermark: f64) {
    let t_x = ring_thickness(rect.w);
    let t_y = ring_thickness(rect.h);
    let (bx0, bx1) = span(rect.w, BLOCK_START, BLOCK_END);
    let (by0, by1) = span(rect.h, BLOCK_START, BLOCK_END);
    let mark = encode_watermark(watermark);
    let feature = |fx: f64, fy: f64| {
        // eyes and mouth, purely cosmetic
        let eye = (0.36..0.46).contains(&fy) && ((0.24..0.38).contains(&fx) || (0.62..0.76).contains(&fx));
        let mouth = (0.70..0.76).contains(&fy) && (0.35..0.65).contains(&fx);
        eye || mouth
    };
    for dy in 0..rect.h {
        let row = ((rect.y + dy) * width) as usize;
        for dx in 0..rect.w {
            let ring = dx < t_x || dy < t_y || dx >= rect.w - t_x || dy >= rect.h - t_y;
            let color = if ring {
                MARKER
            } else if (bx0..bx1).contains(&dx) && (by0..by1).contains(&dy) {
                mark
            } else if feature(
                f64::from(dx) / f64::from(rect.w),
                f64::from(dy) / f64::from(rect.h),
            ) {
                FEATURE
            } else {
                SKIN
            };
            let i = (row + (rect.x + dx) as usize) * 3;
            pixels[i..i + 3].copy_from_slice(&color);
        }
    }
}
