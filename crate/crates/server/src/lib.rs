//! Local HTTP API and command-line front end for `fakewatch`.

pub mod api;
pub mod batch;

pub use api::{router, AppState};
