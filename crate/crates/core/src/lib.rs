//! Bidirectional tracking-by-detection for cells flowing through a capillary.
//!
//! Every frame is associated twice: a constant-velocity Kalman filter per
//! tracklet predicts where each known cell went (forward), and a backward
//! displacement per detection says where each new detection came from. Both
//! produce a Euclidean cost matrix; the element-wise minimum is matched
//! greedily under an adaptive gate.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the CLI and
//! plotting live in the `cycletrack` crate.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod association;
mod error;
pub mod eval;
pub mod flow;
pub mod geometry;
pub mod kalman;
pub mod model;
pub mod simulator;
pub mod tracker;

pub use error::{Error, Result};
pub use geometry::Vec2;
pub use model::{filter_by_confidence, BBox, Detection, FusionMode, Tracklet, TrackerConfig};
