//! Subcommand implementations. Each one reads its inputs from files and
//! writes its artifacts into an output directory.

mod analyze;
mod evaluate;
mod pipeline;
mod simulate;
mod track;

use std::fs;
use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{AppError, AppResult};

pub use analyze::{analyze, AnalysisReport, AnalyzeInputs};
pub use evaluate::evaluate;
pub use pipeline::{pipeline, Aggregate, ModeBlock, SeedRow, Stat};
pub use simulate::{simulate, FileEntry, Manifest};
pub use track::{track, CountReport, TrackInputs};

pub const GT_FILE: &str = "gt.txt";
pub const DET_FILE: &str = "det.txt";
pub const DISP_FILE: &str = "disp.csv";
pub const TRUTH_FILE: &str = "truth.json";
pub const FRAMES_BIN: &str = "frames.bin";
pub const FRAMES_HEADER: &str = "frames.json";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const HYP_FILE: &str = "hyp.txt";
pub const VELOCITY_FILE: &str = "velocity.csv";
pub const COUNT_FILE: &str = "count.json";
pub const METRICS_FILE: &str = "metrics.json";
pub const COUNTS_FILE: &str = "counts.csv";
pub const ANALYSIS_FILE: &str = "analysis.json";
pub const AGGREGATE_FILE: &str = "aggregate.json";

pub(crate) fn create_dir(dir: &Path) -> AppResult<()> {
    fs::create_dir_all(dir).map_err(|e| AppError::io(dir, e))
}

pub(crate) fn write_text(path: &Path, text: &str) -> AppResult<()> {
    fs::write(path, text).map_err(|e| AppError::io(path, e))
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> AppResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| AppError::Runtime(e.to_string()))?;
    text.push('\n');
    write_text(path, &text)
}

pub(crate) fn read_text(path: &Path) -> AppResult<String> {
    fs::read_to_string(path).map_err(|e| AppError::io(path, e))
}

pub(crate) fn file_sha256(path: &Path) -> AppResult<String> {
    let bytes = fs::read(path).map_err(|e| AppError::io(path, e))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

pub(crate) fn round_to(v: f64, decimals: i32) -> f64 {
    let k = 10f64.powi(decimals);
    (v * k).round() / k
}
