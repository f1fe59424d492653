//! Dataset tooling, submission scoring and two-track leaderboards for
//! aperture-controlled bokeh rendering.

// `!(x > 0.0)` rejects NaN together with non-positive values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dataset;
pub mod error;
pub mod leaderboard;
pub mod ranking;
pub mod scoring;
pub mod submission;
pub mod synth;

pub use error::{HarnessError, Result};
