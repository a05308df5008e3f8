//! Frame-to-score processing shared by interactive sessions and batch runs.
//!
//! [`TrackingStage`] turns frames into segments for one selected face;
//! [`score_stream`] drives a whole recorded stream through detection,
//! tracking, segmentation and scoring on the calling thread.

mod offline;
mod stage;

pub use offline::{score_bundle, score_stream, OfflineError, OfflineOptions, OfflineRun};
pub use stage::{StageEvent, TrackingStage};
