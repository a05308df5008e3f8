use std::collections::VecDeque;

use super::{ScoringError, SEGMENT_LEN};
use crate::face::FaceCrop;

/// Exactly [`SEGMENT_LEN`] crops of one continuously tracked face.
#[derive(Debug, Clone)]
pub struct Segment {
    crops: Vec<FaceCrop>,
}

impl Segment {
    pub fn new(crops: Vec<FaceCrop>) -> Result<Self, ScoringError> {
        if crops.len() != SEGMENT_LEN {
            return Err(ScoringError::InvalidSegment(format!(
                "segments hold exactly {SEGMENT_LEN} crops, got {}",
                crops.len()
            )));
        }
        let size = crops[0].size;
        for pair in crops.windows(2) {
            if pair[1].seq <= pair[0].seq {
                return Err(ScoringError::InvalidSegment("crop seq must strictly increase".into()));
            }
        }
        if crops.iter().any(|c| c.size != size || c.pixels.len() != (size * size * 3) as usize) {
            return Err(ScoringError::InvalidSegment("crops differ in size".into()));
        }
        Ok(Self { crops })
    }

    pub fn crops(&self) -> &[FaceCrop] {
        &self.crops
    }

    pub fn size(&self) -> u32 {
        self.crops[0].size
    }

    pub fn t_start_ms(&self) -> u64 {
        self.crops[0].ts_ms
    }

    pub fn t_end_ms(&self) -> u64 {
        self.crops[SEGMENT_LEN - 1].ts_ms
    }

    pub fn first_seq(&self) -> u64 {
        self.crops[0].seq
    }

    pub fn last_seq(&self) -> u64 {
        self.crops[SEGMENT_LEN - 1].seq
    }

    /// Ids of the pixel buffers backing this segment.
    pub fn buffer_ids(&self) -> Vec<u64> {
        self.crops.iter().map(|c| c.pixels.id()).collect()
    }
}

/// Groups an ordered crop stream into segments.
///
/// With the default stride of [`SEGMENT_LEN`] windows do not overlap and the
/// assembler holds nothing once a segment is emitted. A smaller stride makes
/// consecutive windows share crops; a larger one skips crops between windows.
#[derive(Debug)]
pub struct SegmentAssembler {
    size: u32,
    stride: usize,
    pending: VecDeque<FaceCrop>,
    skip: usize,
    last_seq: Option<u64>,
}

impl SegmentAssembler {
    pub fn new(size: u32) -> Self {
        Self::with_stride(size, SEGMENT_LEN)
    }

    pub fn with_stride(size: u32, stride: usize) -> Self {
        assert!(stride > 0, "stride must be positive");
        Self { size, stride, pending: VecDeque::with_capacity(SEGMENT_LEN), skip: 0, last_seq: None }
    }

    pub fn stride(&self) -> usize {
        self.stride
    }

    pub fn pending(&self) -> usize {
        self.pending.len()
    }

    pub fn push_crop(&mut self, crop: FaceCrop) -> Result<Option<Segment>, ScoringError> {
        if crop.size != self.size {
            return Err(ScoringError::SizeMismatch { expected: self.size, got: crop.size });
        }
        if let Some(last) = self.last_seq {
            if crop.seq <= last {
                return Err(ScoringError::Ordering(format!("seq {} after {last}", crop.seq)));
            }
        }
        self.last_seq = Some(crop.seq);
        if self.skip > 0 {
            self.skip -= 1;
            return Ok(None);
        }
        self.pending.push_back(crop);
        if self.pending.len() < SEGMENT_LEN {
            return Ok(None);
        }
        let crops: Vec<FaceCrop> = if self.stride >= SEGMENT_LEN {
            self.skip = self.stride - SEGMENT_LEN;
            self.pending.drain(..).collect()
        } else {
            let window = self.pending.iter().cloned().collect();
            self.pending.drain(..self.stride);
            window
        };
        Segment::new(crops).map(Some)
    }

    /// Drop any partial segment, returning how many crops were discarded.
    /// Partial segments are never padded or scored.
    pub fn flush(&mut self) -> usize {
        let n = self.pending.len();
        self.pending.clear();
        self.skip = 0;
        n
    }
}
