use std::sync::Arc;

use super::{FaceCrop, FaceError};
use crate::buffer::{BufferRegistry, PixelBuffer};
use crate::capture::Frame;
use crate::geometry::Rect;

/// The square region actually sampled for `rect`: side `max(w, h)` centered
/// on the rect, shrunk to fit and shifted inside the frame.
pub fn crop_square(rect: Rect, width: u32, height: u32) -> Result<Rect, FaceError> {
    if rect.is_empty() {
        return Err(FaceError::Geometry(format!("degenerate rect {rect:?}")));
    }
    let side = rect.w.max(rect.h).min(width).min(height);
    let (cx, cy) = rect.center();
    let half = f64::from(side) / 2.0;
    let x = (cx - half).round().clamp(0.0, f64::from(width - side)) as u32;
    let y = (cy - half).round().clamp(0.0, f64::from(height - side)) as u32;
    Ok(Rect::new(x, y, side, side))
}

/// Per output index: (low source index, high source index, weight of high).
fn taps(side: u32, size: u32) -> Vec<(usize, usize, f32)> {
    let scale = side as f32 / size as f32;
    (0..size)
        .map(|j| {
            let u = ((j as f32 + 0.5) * scale - 0.5).clamp(0.0, (side - 1) as f32);
            let lo = u.floor() as usize;
            let hi = (lo + 1).min(side as usize - 1);
            (lo, hi, u - lo as f32)
        })
        .collect()
}

/// Cut the square around `rect` out of `frame` and resample it to
/// `size` x `size` with bilinear interpolation.
pub fn normalize_crop(
    frame: &Frame,
    rect: Rect,
    size: u32,
    registry: Option<&Arc<BufferRegistry>>,
) -> Result<FaceCrop, FaceError> {
    if size == 0 {
        return Err(FaceError::Geometry("crop size must be positive".into()));
    }
    if !rect.fits_in(frame.width, frame.height) {
        return Err(FaceError::Geometry(format!(
            "rect {rect:?} outside {}x{} frame",
            frame.width, frame.height
        )));
    }
    let sq = crop_square(rect, frame.width, frame.height)?;
    let cols = taps(sq.w, size);
    let rows = taps(sq.h, size);
    let stride = frame.width as usize * 3;
    let at = |x: usize, y: usize| (sq.y as usize + y) * stride + (sq.x as usize + x) * 3;

    let mut out = vec![0u8; size as usize * size as usize * 3];
    let mut o = 0;
    for &(y0, y1, fy) in &rows {
        for &(x0, x1, fx) in &cols {
            let (p00, p01, p10, p11) = (at(x0, y0), at(x1, y0), at(x0, y1), at(x1, y1));
            for c in 0..3 {
                let top = frame.pixels[p00 + c] as f32 * (1.0 - fx) + frame.pixels[p01 + c] as f32 * fx;
                let bot = frame.pixels[p10 + c] as f32 * (1.0 - fx) + frame.pixels[p11 + c] as f32 * fx;
                out[o + c] = (top * (1.0 - fy) + bot * fy).round().clamp(0.0, 255.0) as u8;
            }
            o += 3;
        }
    }
    Ok(FaceCrop {
        seq: frame.seq,
        ts_ms: frame.ts_ms,
        size,
        pixels: Arc::new(PixelBuffer::new(out, registry)),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn gray(w: u32, h: u32, v: u8) -> Frame {
        Frame::new(7, 700, w, h, vec![v; (w * h * 3) as usize]).unwrap()
    }

    #[test]
    fn output_is_size_squared() {
        let c = normalize_crop(&gray(200, 200, 9), Rect::new(20, 30, 50, 70), 112, None).unwrap();
        assert_eq!(c.size, 112);
        assert_eq!(c.pixels.len(), 112 * 112 * 3);
        assert_eq!((c.seq, c.ts_ms), (7, 700));
    }

    #[test]
    fn constant_image_stays_constant() {
        for v in [0u8, 1, 127, 128, 254, 255] {
            let c = normalize_crop(&gray(90, 60, v), Rect::new(10, 5, 33, 41), 112, None).unwrap();
            assert!(c.pixels.iter().all(|&p| p == v), "value {v}");
        }
    }

    #[test]
    fn edge_rect_is_shifted_inside() {
        let sq = crop_square(Rect::new(0, 0, 20, 60), 100, 80).unwrap();
        assert_eq!(sq, Rect::new(0, 0, 60, 60));
        let sq = crop_square(Rect::new(90, 70, 10, 10), 100, 80).unwrap();
        assert_eq!(sq, Rect::new(90, 70, 10, 10));
        // taller than the frame: side shrinks to the frame height
        let sq = crop_square(Rect::new(10, 0, 20, 80), 100, 50).unwrap();
        assert!(sq.fits_in(100, 50));
        assert_eq!(sq.w, 50);
    }

    #[test]
    fn edge_crop_samples_only_frame_pixels() {
        // Every pixel gets a distinct-ish color; a crop touching the corner
        // must only produce values that are blends of in-square neighbors.
        let (w, h) = (40u32, 30u32);
        let mut px = Vec::new();
        for y in 0..h {
            for x in 0..w {
                px.extend_from_slice(&[(x * 6) as u8, (y * 8) as u8, 77]);
            }
        }
        let f = Frame::new(0, 0, w, h, px).unwrap();
        let rect = Rect::new(30, 22, 10, 8);
        let c = normalize_crop(&f, rect, 16, None).unwrap();
        assert_eq!(c.pixels.len(), 16 * 16 * 3);
        let sq = crop_square(rect, w, h).unwrap();
        assert!(sq.fits_in(w, h));
        let xs: HashSet<u32> = (sq.x..sq.right()).map(|x| x * 6).collect();
        let (xmin, xmax) = (*xs.iter().min().unwrap(), *xs.iter().max().unwrap());
        for p in c.pixels.chunks(3) {
            assert!((xmin..=xmax).contains(&u32::from(p[0])));
            assert_eq!(p[2], 77);
        }
    }

    #[test]
    fn degenerate_rect_rejected() {
        let f = gray(10, 10, 0);
        assert!(matches!(normalize_crop(&f, Rect::new(1, 1, 0, 4), 8, None), Err(FaceError::Geometry(_))));
    }
}
