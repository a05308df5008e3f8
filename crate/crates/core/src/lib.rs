//! Watch one face on screen and score it for manipulation, 30 frames at a
//! time.
//!
//! Frames come from a [`capture`] source (synthetic scenario, recorded
//! bundle, or a screen grabber). The [`face`] module finds and follows the
//! selected face and produces normalized crops, [`scoring`] groups crops
//! into 30-frame segments and scores them, and [`timeline`] keeps the
//! resulting series and its summary. [`service`] ties these together into
//! sessions; [`eval`] measures scorers on labeled bundles.
//!
//! ```
//! use fakewatch::pipeline::{score_stream, OfflineOptions};
//! use fakewatch::capture::{Scenario, SyntheticStream};
//! use fakewatch::face::FiducialDetector;
//! use fakewatch::scoring::ScorerHandle;
//! use std::sync::Arc;
//!
//! let scenario: Scenario = "demo-320x240@30;frames=90;face=100,60,96,96;wm=0.8:0-89".parse().unwrap();
//! let mut stream = SyntheticStream::new(scenario);
//! let opts = OfflineOptions::default();
//! let scorer = ScorerHandle::reference(opts.tracker.crop_size);
//! let run = score_stream(&mut stream, Arc::new(FiducialDetector::default()), &scorer, &opts).unwrap();
//! assert_eq!(run.samples.len(), 3);
//! assert!(run.samples.iter().all(|s| (s.score.value() - 0.8).abs() < 1e-6));
//! ```

pub mod buffer;
pub mod capture;
pub mod clock;
pub mod eval;
pub mod face;
pub mod fiducial;
pub mod geometry;
pub mod pipeline;
pub mod queue;
pub mod scoring;
pub mod service;
pub mod timeline;

// The guide's code blocks run as doc-tests so they cannot drift from the
// library.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/sources.md")]
    mod sources {}
    #[doc = include_str!("../../../book/src/faces.md")]
    mod faces {}
    #[doc = include_str!("../../../book/src/scoring.md")]
    mod scoring {}
    #[doc = include_str!("../../../book/src/timeline.md")]
    mod timeline {}
    #[doc = include_str!("../../../book/src/sessions.md")]
    mod sessions {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
}
