//! Run configuration: a JSON file merged with command-line overrides.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use cycletrack_core::kalman::KalmanParams;
use cycletrack_core::simulator::ScenarioConfig;
use cycletrack_core::{FusionMode, TrackerConfig};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{AppError, AppResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BackwardKind {
    /// Simulator truth plus Gaussian noise, read from `truth.json`.
    #[default]
    Oracle,
    /// Patch correlation on `frames.bin`.
    Ncc,
    /// Precomputed vectors from `disp.csv`.
    Sidecar,
}

impl BackwardKind {
    pub fn as_str(self) -> &'static str {
        match self {
            BackwardKind::Oracle => "oracle",
            BackwardKind::Ncc => "ncc",
            BackwardKind::Sidecar => "sidecar",
        }
    }
}

impl FromStr for BackwardKind {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "oracle" => Ok(BackwardKind::Oracle),
            "ncc" => Ok(BackwardKind::Ncc),
            "sidecar" => Ok(BackwardKind::Sidecar),
            other => Err(format!("unknown backward source {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: ScenarioConfig,
    pub tracker: TrackerConfig,
    pub backward: BackwardKind,
    /// Pixel noise added to oracle and sidecar vectors.
    pub oracle_sigma: f64,
    pub ncc_search_radius: usize,
    pub iou_threshold: f64,
    pub lowpass_cutoff_hz: f64,
    pub frequency_band: [f64; 2],
    pub count_window: usize,
    pub seeds: Vec<u64>,
    /// Run every fusion mode in `pipeline` instead of `tracker.fusion_mode`.
    pub ablation: bool,
    /// Write rendered frames when simulating. Needed for `--backward ncc`.
    pub write_frames: bool,
    /// Write wall-clock timings into `count.json`; `null` otherwise.
    pub record_timing: bool,
    pub out: Option<PathBuf>,
}

/// Tracker settings used for the S1 benchmark suite.
pub fn suite_tracker() -> TrackerConfig {
    TrackerConfig {
        max_age: 3,
        min_hits: 3,
        kalman: KalmanParams { process_vel: 1e-2, ..KalmanParams::default() },
        ..TrackerConfig::default()
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            scenario: ScenarioConfig::s1(0),
            tracker: suite_tracker(),
            backward: BackwardKind::Oracle,
            oracle_sigma: 2.0,
            ncc_search_radius: 8,
            iou_threshold: cycletrack_core::eval::DEFAULT_IOU,
            lowpass_cutoff_hz: 4.0,
            frequency_band: [cycletrack_core::eval::DEFAULT_BAND.0, cycletrack_core::eval::DEFAULT_BAND.1],
            count_window: 50,
            seeds: (0..10).collect(),
            ablation: false,
            write_frames: false,
            record_timing: true,
            out: None,
        }
    }
}

/// Command-line values that take precedence over the file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub fusion_mode: Option<FusionMode>,
    pub backward: Option<BackwardKind>,
    pub fps: Option<f64>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> AppResult<Self> {
        serde_json::from_str(text).map_err(|e| AppError::Config(e.to_string()))
    }

    pub fn load(path: Option<&Path>, overrides: &Overrides) -> AppResult<Self> {
        let mut cfg = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| AppError::io(p, e))?;
                serde_json::from_str(&text).map_err(|e| AppError::Config(format!("{}: {e}", p.display())))?
            }
            None => RunConfig::default(),
        };
        cfg.apply(overrides);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(out) = &o.out {
            self.out = Some(out.clone());
        }
        if let Some(seed) = o.seed {
            self.seeds = vec![seed];
            self.scenario.seed = seed;
        }
        if let Some(m) = o.fusion_mode {
            self.tracker.fusion_mode = m;
        }
        if let Some(b) = o.backward {
            self.backward = b;
        }
        if let Some(fps) = o.fps {
            self.scenario.fps = fps;
        }
    }

    pub fn validate(&self) -> AppResult<()> {
        let bad = |m: String| Err(AppError::Config(m));
        self.tracker.validate().map_err(|e| AppError::Config(e.to_string()))?;
        if !(self.scenario.fps > 0.0) {
            return bad(format!("fps {} must be positive", self.scenario.fps));
        }
        if !(self.oracle_sigma >= 0.0) {
            return bad(format!("oracle_sigma {} must be non-negative", self.oracle_sigma));
        }
        if !(self.iou_threshold > 0.0 && self.iou_threshold <= 1.0) {
            return bad(format!("iou_threshold {} outside (0, 1]", self.iou_threshold));
        }
        if self.count_window == 0 {
            return bad("count_window must be positive".into());
        }
        let [lo, hi] = self.frequency_band;
        if !(lo > 0.0 && hi > lo) {
            return bad(format!("frequency_band [{lo}, {hi}] is not an increasing positive range"));
        }
        Ok(())
    }

    /// Resolved output directory, `.` when unset.
    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("."))
    }

    pub fn band(&self) -> (f64, f64) {
        (self.frequency_band[0], self.frequency_band[1])
    }

    /// SHA-256 of the canonical JSON form, with the output directory left
    /// out so that relocating a run does not change its identity.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.out = None;
        let bytes = serde_json::to_vec(&c).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected() {
        assert!(RunConfig::from_json(r#"{"seeds": [1], "bogus": 2}"#).is_err());
        assert!(RunConfig::from_json(r#"{"tracker": {"max_agee": 1}}"#).is_err());
        let c = RunConfig::from_json(r#"{"seeds": [4, 5], "tracker": {"max_age": 1}}"#).unwrap();
        assert_eq!(c.seeds, vec![4, 5]);
        assert_eq!(c.tracker.max_age, 1);
        assert_eq!(c.tracker.min_hits, TrackerConfig::default().min_hits);
    }

    #[test]
    fn flags_win_over_file() {
        let mut c = RunConfig::from_json(r#"{"seeds": [4, 5], "backward": "sidecar"}"#).unwrap();
        c.apply(&Overrides {
            seed: Some(9),
            fusion_mode: Some(FusionMode::SortOnly),
            backward: Some(BackwardKind::Ncc),
            fps: Some(100.0),
            out: Some("x".into()),
        });
        assert_eq!((c.seeds.clone(), c.scenario.seed), (vec![9], 9));
        assert_eq!(c.tracker.fusion_mode, FusionMode::SortOnly);
        assert_eq!(c.backward, BackwardKind::Ncc);
        assert_eq!(c.scenario.fps, 100.0);
        assert_eq!(c.out_dir(), PathBuf::from("x"));
    }

    #[test]
    fn invalid_values_are_config_errors() {
        let c = RunConfig::from_json(r#"{"tracker": {"min_hits": 0}}"#).unwrap();
        assert_eq!(c.validate().unwrap_err().exit_code(), 4);
        let c = RunConfig { iou_threshold: 0.0, ..RunConfig::default() };
        assert!(c.validate().is_err());
    }

    #[test]
    fn hash_ignores_output_dir_only() {
        let a = RunConfig::default();
        let b = RunConfig { out: Some("/tmp/x".into()), ..RunConfig::default() };
        assert_eq!(a.hash(), b.hash());
        assert_eq!(a.hash().len(), 64);
        let c = RunConfig { oracle_sigma: 1.0, ..RunConfig::default() };
        assert_ne!(a.hash(), c.hash());
    }
}
