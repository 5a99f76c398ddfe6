//! File formats, configuration, reports and the command-line pipeline
//! around [`cycletrack_core`].

pub mod commands;
pub mod config;
pub mod error;
pub mod formats;
pub mod svg;

pub use config::{BackwardKind, Overrides, RunConfig};
pub use error::{AppError, AppResult, FormatError};
