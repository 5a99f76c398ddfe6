use std::path::Path;

use cycletrack_core::eval::CountFit;
use cycletrack_core::FusionMode;
use serde::{Deserialize, Serialize};

use super::analyze::{correlation_or_warning, correlation_plot};
use super::*;
use crate::config::RunConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedRow {
    pub seed: u64,
    pub gt_count: usize,
    pub count: usize,
    pub counting_error_pct: f64,
    pub counting_accuracy_pct: f64,
    pub mota: f64,
    pub idf1: f64,
    pub idsw: usize,
    pub frag: usize,
    pub dominant_freq: Option<f64>,
}

/// Mean and sample standard deviation; the deviation of a single value is 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stat {
    pub mean: f64,
    pub std: f64,
}

impl Stat {
    pub fn of(values: &[f64]) -> Stat {
        let n = values.len() as f64;
        if values.is_empty() {
            return Stat { mean: 0.0, std: 0.0 };
        }
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        Stat { mean: round_to(mean, 4), std: round_to(std, 4) }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModeBlock {
    pub mode: FusionMode,
    pub rows: Vec<SeedRow>,
    pub counting_accuracy_pct: Stat,
    pub mota: Stat,
    pub idf1: Stat,
    pub idsw: Stat,
    pub correlation: Option<CountFit>,
    pub correlation_warning: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub config_hash: String,
    pub seeds: Vec<u64>,
    pub blocks: Vec<ModeBlock>,
}

fn run_seed(cfg: &RunConfig, seed: u64, modes: &[FusionMode], dir: &Path, files: &mut Vec<String>) -> AppResult<Vec<SeedRow>> {
    let mut seed_cfg = cfg.clone();
    seed_cfg.scenario.seed = seed;
    let seed_name = format!("seed_{seed:02}");
    let seed_dir = dir.join(&seed_name);
    let sim = simulate(&seed_cfg, &seed_dir)?;
    files.extend(sim.files.iter().map(|f| format!("{seed_name}/{}", f.path)));
    files.push(format!("{seed_name}/{MANIFEST_FILE}"));

    let mut rows = Vec::new();
    for &mode in modes {
        let mut mode_cfg = seed_cfg.clone();
        mode_cfg.tracker.fusion_mode = mode;
        let mode_dir = seed_dir.join(mode.as_str());
        let count = track(&mode_cfg, &TrackInputs::new(seed_dir.join(DET_FILE)), &mode_dir)?;
        let metrics = evaluate(&mode_cfg, &seed_dir.join(GT_FILE), &mode_dir.join(HYP_FILE), &mode_dir)?;
        let analysis = analyze(
            &mode_cfg,
            &AnalyzeInputs {
                velocity: mode_dir.join(VELOCITY_FILE),
                counts: Some(mode_dir.join(COUNTS_FILE)),
                pairs: None,
            },
            &mode_dir,
        )?;
        for name in [HYP_FILE, VELOCITY_FILE, COUNT_FILE, METRICS_FILE, COUNTS_FILE, ANALYSIS_FILE, "velocity.svg", "count_error.svg", "correlation.svg"] {
            files.push(format!("{seed_name}/{}/{name}", mode.as_str()));
        }
        let gt_count = metrics.gt_tracks;
        let err = if gt_count == 0 { 0.0 } else { 100.0 * (count.count as f64 - gt_count as f64).abs() / gt_count as f64 };
        rows.push(SeedRow {
            seed,
            gt_count,
            count: count.count,
            counting_error_pct: round_to(err, 4),
            counting_accuracy_pct: round_to(100.0 - err, 4),
            mota: metrics.mota,
            idf1: metrics.idf1,
            idsw: metrics.idsw,
            frag: metrics.frag,
            dominant_freq: analysis.dominant_freq.map(|f| round_to(f, 4)),
        });
    }
    Ok(rows)
}

fn write_manifest(cfg: &RunConfig, dir: &Path, seeds: Vec<u64>, files: &[String], error: Option<String>) -> AppResult<()> {
    let manifest = Manifest {
        status: if error.is_some() { "failed" } else { "complete" }.into(),
        error,
        seeds,
        config_hash: cfg.hash(),
        files: Manifest::describe(dir, files)?,
    };
    write_json(&dir.join(MANIFEST_FILE), &manifest)
}

/// Simulates, tracks, evaluates and analyzes every seed, once per fusion
/// mode when `ablation` is set, and writes `aggregate.json`, one
/// correlation plot per mode and a manifest of every artifact. A failing
/// seed stops the run; the manifest then lists the completed seeds.
pub fn pipeline(cfg: &RunConfig, dir: &Path) -> AppResult<Aggregate> {
    if cfg.seeds.is_empty() {
        return Err(AppError::Config("seed list is empty".into()));
    }
    let modes: Vec<FusionMode> = if cfg.ablation { FusionMode::ALL.to_vec() } else { vec![cfg.tracker.fusion_mode] };
    create_dir(dir)?;

    let mut files = Vec::new();
    let mut done = Vec::new();
    let mut rows: Vec<SeedRow> = Vec::new();
    for &seed in &cfg.seeds {
        match run_seed(cfg, seed, &modes, dir, &mut files) {
            Ok(r) => {
                rows.extend(r);
                done.push(seed);
            }
            Err(e) => {
                files.retain(|f| dir.join(f).exists());
                write_manifest(cfg, dir, done, &files, Some(format!("seed {seed}: {e}")))?;
                return Err(e);
            }
        }
    }

    let mut blocks = Vec::new();
    for (k, &mode) in modes.iter().enumerate() {
        let mode_rows: Vec<SeedRow> = rows.iter().skip(k).step_by(modes.len()).cloned().collect();
        let col = |f: fn(&SeedRow) -> f64| Stat::of(&mode_rows.iter().map(f).collect::<Vec<_>>());
        let pairs: Vec<(f64, f64)> = mode_rows.iter().map(|r| (r.count as f64, r.gt_count as f64)).collect();
        let (correlation, correlation_warning) = correlation_or_warning(&pairs);
        let name = format!("correlation_{}.svg", mode.as_str());
        write_text(&dir.join(&name), &correlation_plot(&pairs, correlation.as_ref(), correlation_warning.as_deref()).render())?;
        files.push(name);
        blocks.push(ModeBlock {
            mode,
            counting_accuracy_pct: col(|r| r.counting_accuracy_pct),
            mota: col(|r| r.mota),
            idf1: col(|r| r.idf1),
            idsw: col(|r| r.idsw as f64),
            correlation,
            correlation_warning,
            rows: mode_rows,
        });
    }
    let aggregate = Aggregate { config_hash: cfg.hash(), seeds: cfg.seeds.clone(), blocks };
    write_json(&dir.join(AGGREGATE_FILE), &aggregate)?;
    files.push(AGGREGATE_FILE.into());
    write_manifest(cfg, dir, done, &files, None)?;
    Ok(aggregate)
}
