use std::path::Path;

use cycletrack_core::eval::{clear_mot, MetricsReport};

use super::*;
use crate::config::RunConfig;
use crate::formats::{parse_mot, CountSeries};

/// Scores a hypothesis file against ground truth. Writes the rounded
/// `metrics.json` and the cumulative `counts.csv` of both files over the
/// union of their frames.
pub fn evaluate(cfg: &RunConfig, gt_path: &Path, hyp_path: &Path, dir: &Path) -> AppResult<MetricsReport> {
    let gt = parse_mot(&read_text(gt_path)?).map_err(|e| AppError::parse(gt_path, e))?;
    let hyp = parse_mot(&read_text(hyp_path)?).map_err(|e| AppError::parse(hyp_path, e))?;
    if gt.is_empty() {
        return Err(cycletrack_core::Error::EmptyGroundTruth.into());
    }
    let report = clear_mot(&gt, &hyp, cfg.iou_threshold)?.rounded();
    let frames = gt.iter().chain(&hyp).map(|d| d.frame).max().unwrap_or(0);
    create_dir(dir)?;
    write_json(&dir.join(METRICS_FILE), &report)?;
    write_text(&dir.join(COUNTS_FILE), &CountSeries::from_tracks(&gt, &hyp, frames).to_csv())?;
    Ok(report)
}
