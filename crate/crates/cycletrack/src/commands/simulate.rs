use std::collections::BTreeMap;
use std::path::Path;

use cycletrack_core::flow::oracle_displacement;
use cycletrack_core::simulator::{render_frame, Scenario};
use serde::{Deserialize, Serialize};

use super::*;
use crate::config::RunConfig;
use crate::formats::{write_detections, write_frames, write_sidecar, FramesHeader, FRAME_DTYPE};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub status: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub seeds: Vec<u64>,
    pub config_hash: String,
    pub files: Vec<FileEntry>,
}

impl Manifest {
    /// Lists `names` relative to `dir`, hashing each file.
    pub(crate) fn describe(dir: &Path, names: &[String]) -> AppResult<Vec<FileEntry>> {
        names
            .iter()
            .map(|n| Ok(FileEntry { path: n.clone(), sha256: file_sha256(&dir.join(n))? }))
            .collect()
    }
}

/// Generates one scenario with `cfg.scenario.seed` and writes ground
/// truth, detections, oracle displacements, truth JSON, optionally the
/// rendered frames, and a manifest.
pub fn simulate(cfg: &RunConfig, dir: &Path) -> AppResult<Manifest> {
    let sc = &cfg.scenario;
    sc.validate().map_err(|e| AppError::Config(e.to_string()))?;
    let scenario = Scenario::generate(sc)?;
    create_dir(dir)?;

    write_text(&dir.join(GT_FILE), &write_detections(&scenario.truth.gt_detections()))?;
    let dets: Vec<_> = scenario.detections.iter().flatten().copied().collect();
    write_text(&dir.join(DET_FILE), &write_detections(&dets))?;

    let mut vectors = BTreeMap::new();
    for t in 2..=scenario.truth.frames {
        let set = oracle_displacement(&scenario.truth, t, cfg.oracle_sigma, sc.seed)?;
        for (i, v) in set.vectors.iter().enumerate() {
            if let Some(v) = v {
                vectors.insert((t, i), *v);
            }
        }
    }
    write_text(&dir.join(DISP_FILE), &write_sidecar(&vectors))?;
    let truth = serde_json::to_string(&scenario.truth).map_err(|e| AppError::Runtime(e.to_string()))?;
    write_text(&dir.join(TRUTH_FILE), &(truth + "\n"))?;

    let mut names: Vec<String> = [GT_FILE, DET_FILE, DISP_FILE, TRUTH_FILE].map(String::from).to_vec();
    if cfg.write_frames {
        let truth = &scenario.truth;
        write_frames(&dir.join(FRAMES_BIN), (1..=truth.frames).map(|t| render_frame(truth, sc, t).map_err(AppError::from)))?;
        let header = FramesHeader { width: sc.frame_width, height: sc.frame_height, frames: truth.frames, dtype: FRAME_DTYPE.into() };
        write_json(&dir.join(FRAMES_HEADER), &header)?;
        names.extend([FRAMES_BIN, FRAMES_HEADER].map(String::from));
    }

    let manifest = Manifest {
        status: "complete".into(),
        error: None,
        seeds: vec![sc.seed],
        config_hash: cfg.hash(),
        files: Manifest::describe(dir, &names)?,
    };
    write_json(&dir.join(MANIFEST_FILE), &manifest)?;
    Ok(manifest)
}
