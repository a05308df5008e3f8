use super::{Segment, SEGMENT_LEN};

/// Dense `(channels=3, time=30, height=S, width=S)` block of `f32` in
/// `[0, 1]`, channel order RGB.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreTensor {
    size: u32,
    data: Vec<f32>,
}

impl ScoreTensor {
    pub fn size(&self) -> u32 {
        self.size
    }

    pub fn shape(&self) -> [usize; 4] {
        let s = self.size as usize;
        [3, SEGMENT_LEN, s, s]
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    #[inline]
    pub fn index(&self, c: usize, t: usize, y: usize, x: usize) -> usize {
        let s = self.size as usize;
        ((c * SEGMENT_LEN + t) * s + y) * s + x
    }

    #[inline]
    pub fn get(&self, c: usize, t: usize, y: usize, x: usize) -> f32 {
        self.data[self.index(c, t, y, x)]
    }

    /// Byte value at a position, undoing the `/255` scaling.
    #[inline]
    pub fn byte(&self, c: usize, t: usize, y: usize, x: usize) -> u8 {
        (self.get(c, t, y, x) * 255.0).round().clamp(0.0, 255.0) as u8
    }
}

/// Scale segment bytes to `[0, 1]` by `/255` and lay them out planar.
/// No mean/std normalization happens here.
pub fn preprocess(segment: &Segment) -> ScoreTensor {
    let size = segment.size();
    let plane = size as usize * size as usize;
    let mut data = vec![0f32; 3 * SEGMENT_LEN * plane];
    for (t, crop) in segment.crops().iter().enumerate() {
        for (p, px) in crop.pixels.chunks_exact(3).enumerate() {
            for c in 0..3 {
                data[(c * SEGMENT_LEN + t) * plane + p] = f32::from(px[c]) / 255.0;
            }
        }
    }
    ScoreTensor { size, data }
}
