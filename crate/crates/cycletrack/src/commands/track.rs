use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use cycletrack_core::flow::DisplacementSet;
use cycletrack_core::simulator::ScenarioTruth;
use cycletrack_core::tracker::{run, BackwardSource, NccSource, NoBackward, OracleSource, SidecarSource};
use cycletrack_core::{Detection, FusionMode};
use serde::{Deserialize, Serialize};

use super::*;
use crate::config::{BackwardKind, RunConfig};
use crate::error::FormatError;
use crate::formats::{group_by_frame, parse_mot, parse_sidecar, write_mot, write_velocity_csv, FrameReader};

/// Input files for `track`. Unset backward inputs default to the
/// simulator's file names next to the detection file.
#[derive(Debug, Clone, Default)]
pub struct TrackInputs {
    pub det: PathBuf,
    pub truth: Option<PathBuf>,
    pub disp: Option<PathBuf>,
    pub frames: Option<PathBuf>,
}

impl TrackInputs {
    pub fn new(det: impl Into<PathBuf>) -> Self {
        TrackInputs { det: det.into(), ..Default::default() }
    }

    fn sibling(&self, given: &Option<PathBuf>, name: &str) -> PathBuf {
        given.clone().unwrap_or_else(|| self.det.parent().unwrap_or(Path::new(".")).join(name))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CountReport {
    pub count: usize,
    pub tracklets_created: usize,
    pub frames: u32,
    /// Association and lifecycle time, excluding the backward source.
    pub runtime_ms: Option<f64>,
    pub frames_per_second: Option<f64>,
    pub mode: FusionMode,
    pub backward: Option<BackwardKind>,
    pub min_hits: u32,
}

/// Accumulates the time spent producing displacements so that it can be
/// left out of the tracker's runtime.
struct Timed<'a> {
    inner: &'a mut dyn BackwardSource,
    spent: Duration,
}

impl BackwardSource for Timed<'_> {
    fn displacements(&mut self, frame: u32, dets: &[Detection]) -> cycletrack_core::Result<DisplacementSet> {
        let start = Instant::now();
        let r = self.inner.displacements(frame, dets);
        self.spent += start.elapsed();
        r
    }
}

fn load_truth(path: &Path) -> AppResult<ScenarioTruth> {
    if !path.exists() {
        return Err(AppError::Config(format!("missing displacement source: {} not found", path.display())));
    }
    let text = read_text(path)?;
    serde_json::from_str(&text).map_err(|e| AppError::parse(path, FormatError::new(e.line(), e.to_string())))
}

/// Runs the tracker over a detection file and writes `hyp.txt` (tracklets
/// that reached `min_hits`), `velocity.csv` and `count.json`.
pub fn track(cfg: &RunConfig, inputs: &TrackInputs, dir: &Path) -> AppResult<CountReport> {
    let text = read_text(&inputs.det)?;
    let dets = parse_mot(&text).map_err(|e| AppError::parse(&inputs.det, e))?;
    let mode = cfg.tracker.fusion_mode;

    let truth_path = inputs.sibling(&inputs.truth, TRUTH_FILE);
    let needs_oracle = mode.needs_backward() && cfg.backward == BackwardKind::Oracle;
    let truth = if needs_oracle || inputs.truth.is_some() { Some(load_truth(&truth_path)?) } else { None };
    let frames = group_by_frame(&dets, truth.as_ref().map_or(0, |t| t.frames));
    if frames.is_empty() {
        return Err(AppError::Runtime(format!("{}: no detections to track", inputs.det.display())));
    }

    let mut oracle;
    let mut sidecar;
    let mut ncc;
    let mut none = NoBackward;
    let source: &mut dyn BackwardSource = if !mode.needs_backward() {
        &mut none
    } else {
        match cfg.backward {
            BackwardKind::Oracle => {
                let truth = truth.as_ref().expect("loaded above");
                oracle = OracleSource { truth, noise_sigma: cfg.oracle_sigma, seed: cfg.scenario.seed };
                &mut oracle
            }
            BackwardKind::Sidecar => {
                let path = inputs.sibling(&inputs.disp, DISP_FILE);
                if !path.exists() {
                    return Err(AppError::Config(format!("missing displacement source: {} not found", path.display())));
                }
                let vectors = parse_sidecar(&read_text(&path)?).map_err(|e| AppError::parse(&path, e))?;
                sidecar = SidecarSource { vectors };
                &mut sidecar
            }
            BackwardKind::Ncc => {
                let bin = inputs.sibling(&inputs.frames, FRAMES_BIN);
                if !bin.exists() {
                    return Err(AppError::Config(format!("missing displacement source: {} not found", bin.display())));
                }
                let mut reader = FrameReader::open(&bin, &bin.with_extension("json"))?;
                ncc = NccSource::new(
                    move |t| reader.read(t).map_err(|e| cycletrack_core::Error::InvalidInput(e.to_string())),
                    cfg.ncc_search_radius,
                );
                &mut ncc
            }
        }
    };

    let mut timed = Timed { inner: source, spent: Duration::ZERO };
    let start = Instant::now();
    let output = run(&frames, &mut timed, &cfg.tracker)?;
    let elapsed = start.elapsed().saturating_sub(timed.spent);

    create_dir(dir)?;
    let min_hits = cfg.tracker.min_hits;
    let counted: Vec<_> = output.tracklets.iter().filter(|t| t.hits >= min_hits).cloned().collect();
    write_text(&dir.join(HYP_FILE), &write_mot(&counted))?;
    write_text(&dir.join(VELOCITY_FILE), &write_velocity_csv(&output.velocity_trace, 2))?;

    let ms = elapsed.as_secs_f64() * 1e3;
    let report = CountReport {
        count: output.count,
        tracklets_created: output.tracklets_created(),
        frames: output.frames,
        runtime_ms: cfg.record_timing.then(|| round_to(ms, 3)),
        frames_per_second: cfg.record_timing.then(|| round_to(output.frames as f64 / elapsed.as_secs_f64().max(1e-9), 1)),
        mode,
        backward: mode.needs_backward().then_some(cfg.backward),
        min_hits,
    };
    write_json(&dir.join(COUNT_FILE), &report)?;
    Ok(report)
}
