//! Synthetic single-file capillary flow.
//!
//! Cells ride along a centreline at a shared pulsatile speed
//! `v(t) = base_speed * (1 + a * sin(2 pi f t / fps))`, so they never
//! overtake each other. The clean ground truth is then corrupted into a
//! detection stream with misses, jitter and uniformly placed false
//! positives.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::flow::{splat_gaussians, Grid};
use crate::geometry::Vec2;
use crate::model::{BBox, Detection};
use crate::{Error, Result};

const GENERATE_STREAM: u64 = 0x5eed_0001;
const CORRUPT_STREAM: u64 = 0x5eed_0002;
const RENDER_STREAM: u64 = 0x5eed_0003;

/// Channel centreline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PathSpec {
    Polyline { points: Vec<[f64; 2]> },
    /// Sine wave of `amplitude` around the chord from `start` to `end`.
    Sinusoid { start: [f64; 2], end: [f64; 2], amplitude: f64, wavelength: f64 },
}

impl PathSpec {
    fn sample(&self) -> Result<SampledPath> {
        let points: Vec<Vec2> = match self {
            PathSpec::Polyline { points } => points.iter().map(|p| Vec2::new(p[0], p[1])).collect(),
            PathSpec::Sinusoid { start, end, amplitude, wavelength } => {
                if !(*wavelength > 0.0) {
                    return Err(Error::InvalidInput(format!("wavelength {wavelength}")));
                }
                let a = Vec2::new(start[0], start[1]);
                let chord = Vec2::new(end[0], end[1]) - a;
                let len = chord.norm();
                if len == 0.0 {
                    return Err(Error::InvalidInput("degenerate sinusoid chord".into()));
                }
                let dir = chord * (1.0 / len);
                let normal = Vec2::new(-dir.y, dir.x);
                let steps = libm::ceil(len * 4.0) as usize;
                (0..=steps)
                    .map(|k| {
                        let u = len * k as f64 / steps as f64;
                        a + dir * u + normal * (amplitude * libm::sin(2.0 * PI * u / wavelength))
                    })
                    .collect()
            }
        };
        if points.len() < 2 || points.iter().any(|p| !p.is_finite()) {
            return Err(Error::InvalidInput("path needs at least two finite points".into()));
        }
        let mut cumulative = Vec::with_capacity(points.len());
        let mut acc = 0.0;
        cumulative.push(0.0);
        for w in points.windows(2) {
            acc += w[0].distance(w[1]);
            cumulative.push(acc);
        }
        Ok(SampledPath { points, cumulative })
    }
}

struct SampledPath {
    points: Vec<Vec2>,
    cumulative: Vec<f64>,
}

impl SampledPath {
    fn length(&self) -> f64 {
        *self.cumulative.last().unwrap_or(&0.0)
    }

    fn point_at(&self, s: f64) -> Vec2 {
        let s = s.clamp(0.0, self.length());
        let i = self.cumulative.partition_point(|c| *c <= s).clamp(1, self.points.len() - 1);
        let (s0, s1) = (self.cumulative[i - 1], self.cumulative[i]);
        let t = if s1 > s0 { (s - s0) / (s1 - s0) } else { 0.0 };
        self.points[i - 1] + (self.points[i] - self.points[i - 1]) * t
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CellSize {
    pub mean_w: f64,
    pub mean_h: f64,
    pub jitter_sigma: f64,
}

impl Default for CellSize {
    fn default() -> Self {
        CellSize { mean_w: 10.0, mean_h: 10.0, jitter_sigma: 0.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub fps: f64,
    /// Number of frames.
    pub duration: u32,
    pub path: PathSpec,
    /// Additional parallel channels; each gets its own cell stream.
    pub extra_lanes: Vec<PathSpec>,
    pub frame_width: usize,
    pub frame_height: usize,
    /// Pixels per frame along the path.
    pub base_speed: f64,
    /// Fraction of `base_speed`.
    pub pulse_amplitude: f64,
    pub pulse_freq: f64,
    /// Mean arclength gap between consecutive cells.
    pub spawn_spacing: f64,
    /// Smallest gap. Equal to `spawn_spacing` for a regular stream,
    /// otherwise gaps are `floor + Exp(mean - floor)`.
    pub spacing_floor: f64,
    pub cell_size: CellSize,
    pub det_jitter: f64,
    /// Expected false positives per frame as a fraction of true cells.
    pub lambda_fp: f64,
    /// Per-detection drop probability.
    pub lambda_fn: f64,
    /// Pixel noise of rendered frames.
    pub frame_noise: f64,
    pub seed: u64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig::s1(0)
    }
}

impl ScenarioConfig {
    /// Benchmark suite S1: 1000 frames at 160 fps, 1 Hz pulse of +-50 %
    /// around 4 px/frame, one gently meandering channel.
    pub fn s1(seed: u64) -> Self {
        ScenarioConfig {
            fps: 160.0,
            duration: 1000,
            path: PathSpec::Sinusoid {
                start: [16.0, 256.0],
                end: [496.0, 256.0],
                amplitude: 40.0,
                wavelength: 480.0,
            },
            extra_lanes: Vec::new(),
            frame_width: 512,
            frame_height: 512,
            base_speed: 4.0,
            pulse_amplitude: 0.5,
            pulse_freq: 1.0,
            spawn_spacing: 25.0,
            spacing_floor: 13.0,
            cell_size: CellSize::default(),
            det_jitter: 1.0,
            lambda_fp: 0.02,
            lambda_fn: 0.05,
            frame_noise: 0.01,
            seed,
        }
    }

    /// S2: two parallel straight lanes 24 px apart, otherwise S1.
    pub fn s2(seed: u64) -> Self {
        ScenarioConfig {
            path: PathSpec::Polyline { points: vec![[16.0, 244.0], [496.0, 244.0]] },
            extra_lanes: vec![PathSpec::Polyline { points: vec![[16.0, 268.0], [496.0, 268.0]] }],
            ..ScenarioConfig::s1(seed)
        }
    }

    /// Same geometry and timing with every corruption switched off.
    pub fn noiseless(mut self) -> Self {
        self.det_jitter = 0.0;
        self.lambda_fn = 0.0;
        self.lambda_fp = 0.0;
        self.cell_size.jitter_sigma = 0.0;
        self
    }

    pub fn max_speed(&self) -> f64 {
        self.base_speed * (1.0 + self.pulse_amplitude)
    }

    /// Instantaneous speed on 1-based frame `t`.
    pub fn speed_at(&self, t: u32) -> f64 {
        self.base_speed * (1.0 + self.pulse_amplitude * libm::sin(2.0 * PI * self.pulse_freq * t as f64 / self.fps))
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidInput(m.into()));
        if self.duration == 0 {
            return Err(Error::EmptyScenario);
        }
        if !(self.fps > 0.0) {
            return bad("fps must be positive");
        }
        if !(self.base_speed > 0.0) {
            return bad("base_speed must be positive");
        }
        if !(0.0..1.0).contains(&self.pulse_amplitude) {
            return bad("pulse_amplitude must lie in [0, 1)");
        }
        if !(0.0..=1.0).contains(&self.lambda_fn) || !(0.0..=1.0).contains(&self.lambda_fp) {
            return bad("corruption ratios must lie in [0, 1]");
        }
        if !(self.spawn_spacing > 0.0) || !(self.spacing_floor > 0.0) || self.spacing_floor > self.spawn_spacing {
            return bad("need 0 < spacing_floor <= spawn_spacing");
        }
        if !(self.cell_size.mean_w > 0.0 && self.cell_size.mean_h > 0.0) || self.cell_size.jitter_sigma < 0.0 {
            return bad("cell size must be positive");
        }
        if self.det_jitter < 0.0 || self.frame_noise < 0.0 {
            return bad("noise levels must be non-negative");
        }
        if self.frame_width == 0 || self.frame_height == 0 {
            return bad("frame size must be positive");
        }
        Ok(())
    }
}

/// One ground-truth box, with the exact backward vector when the cell was
/// also present on the previous frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TruthRecord {
    pub frame: u32,
    pub id: u32,
    pub bbox: BBox,
    pub backward: Option<Vec2>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DetSource {
    Cell(u32),
    FalsePositive,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FrameCorruption {
    /// Origin of each emitted detection, in emission order.
    pub sources: Vec<DetSource>,
    /// Cell ids whose detection was dropped.
    pub dropped: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct CorruptionLog {
    /// Index `t - 1` holds frame `t`.
    pub frames: Vec<FrameCorruption>,
}

impl CorruptionLog {
    pub fn dropped_count(&self) -> usize {
        self.frames.iter().map(|f| f.dropped.len()).sum()
    }

    pub fn false_positive_count(&self) -> usize {
        self.frames
            .iter()
            .map(|f| f.sources.iter().filter(|s| **s == DetSource::FalsePositive).count())
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioTruth {
    pub frames: u32,
    pub fps: f64,
    pub width: usize,
    pub height: usize,
    /// Sorted by `(frame, id)`.
    pub tracks: Vec<TruthRecord>,
    /// `v(t)` for frames `1..=frames`.
    pub speed_series: Vec<f64>,
    /// Empty until detections are corrupted.
    pub corruption_log: CorruptionLog,
}

impl ScenarioTruth {
    pub fn records_at(&self, frame: u32) -> &[TruthRecord] {
        let lo = self.tracks.partition_point(|r| r.frame < frame);
        let hi = self.tracks.partition_point(|r| r.frame <= frame);
        &self.tracks[lo..hi]
    }

    pub fn record(&self, frame: u32, id: u32) -> Option<&TruthRecord> {
        let recs = self.records_at(frame);
        recs.binary_search_by_key(&id, |r| r.id).ok().map(|i| &recs[i])
    }

    /// Origin of each detection on `frame`. Without a corruption log the
    /// detections are assumed to be the truth records themselves.
    pub fn detection_sources(&self, frame: u32) -> Vec<DetSource> {
        match self.corruption_log.frames.get(frame.wrapping_sub(1) as usize) {
            Some(f) => f.sources.clone(),
            None => self.records_at(frame).iter().map(|r| DetSource::Cell(r.id)).collect(),
        }
    }

    /// Ground truth as MOT-style detections with ids.
    pub fn gt_detections(&self) -> Vec<Detection> {
        self.tracks
            .iter()
            .map(|r| Detection { frame: r.frame, bbox: r.bbox, conf: 1.0, id: Some(r.id) })
            .collect()
    }

    pub fn track_count(&self) -> usize {
        let mut ids: Vec<u32> = self.tracks.iter().map(|r| r.id).collect();
        ids.sort_unstable();
        ids.dedup();
        ids.len()
    }

    /// Cells visible on at least `min_frames` frames.
    pub fn countable(&self, min_frames: usize) -> usize {
        let mut lens: alloc::collections::BTreeMap<u32, usize> = Default::default();
        for r in &self.tracks {
            *lens.entry(r.id).or_default() += 1;
        }
        lens.values().filter(|n| **n >= min_frames).count()
    }

    /// Distinct cells first seen on or before each frame, index `t - 1`.
    pub fn cumulative_counts(&self) -> Vec<usize> {
        let mut first = vec![0usize; self.frames as usize + 1];
        for r in self.tracks.iter().filter(|r| r.backward.is_none()) {
            first[r.frame as usize] += 1;
        }
        let mut out = Vec::with_capacity(self.frames as usize);
        let mut acc = 0;
        for t in 1..=self.frames as usize {
            acc += first[t];
            out.push(acc);
        }
        out
    }
}

fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0xA24B_AED4_963E_E407) ^ stream)
}

pub fn generate_scenario(config: &ScenarioConfig) -> Result<ScenarioTruth> {
    config.validate()?;
    let mut lanes = Vec::with_capacity(1 + config.extra_lanes.len());
    for lane_path in core::iter::once(&config.path).chain(&config.extra_lanes) {
        let lane = lane_path.sample()?;
        if lane.length() < config.cell_size.mean_w.max(config.cell_size.mean_h) {
            return Err(Error::InvalidInput(format!("path length {} shorter than one cell", lane.length())));
        }
        lanes.push(lane);
    }

    let frames = config.duration;
    let speed_series: Vec<f64> = (1..=frames).map(|t| config.speed_at(t)).collect();
    // advance[t - 1] = arclength travelled between frame 1 and frame t.
    let mut advance = Vec::with_capacity(frames as usize);
    let mut acc = 0.0;
    advance.push(0.0);
    for v in &speed_series[1..] {
        acc += v;
        advance.push(acc);
    }
    let total_advance = acc;

    let mut rng = stream_rng(config.seed, GENERATE_STREAM);
    let excess = config.spawn_spacing - config.spacing_floor;
    let gap_tail = if excess > 0.0 { Some(Exp::new(1.0 / excess).map_err(|_| Error::InvalidInput("spacing".into()))?) } else { None };
    let size_noise = if config.cell_size.jitter_sigma > 0.0 {
        Some(Normal::new(0.0, config.cell_size.jitter_sigma).map_err(|_| Error::InvalidInput("cell size jitter".into()))?)
    } else {
        None
    };

    let mut tracks = Vec::new();
    let mut next_id = 1u32;
    for lane in &lanes {
        let length = lane.length();
        // offset o: the cell sits at arclength advance(t) - o.
        let mut offset = -length + rng.random::<f64>() * config.spawn_spacing;
        while offset <= total_advance {
            let gap = config.spacing_floor + gap_tail.as_ref().map_or(0.0, |e| e.sample(&mut rng));
            let (mut w, mut h) = (config.cell_size.mean_w, config.cell_size.mean_h);
            if let Some(n) = &size_noise {
                w = (w + n.sample(&mut rng)).max(2.0);
                h = (h + n.sample(&mut rng)).max(2.0);
            }
            let id = next_id;
            let mut prev: Option<Vec2> = None;
            let mut any = false;
            for t in 1..=frames {
                let s = advance[t as usize - 1] - offset;
                if s < 0.0 || s > length {
                    if any {
                        break;
                    }
                    continue;
                }
                any = true;
                let p = lane.point_at(s);
                tracks.push(TruthRecord {
                    frame: t,
                    id,
                    bbox: BBox { cx: p.x, cy: p.y, w, h },
                    backward: prev.map(|q| q - p),
                });
                prev = Some(p);
            }
            if any {
                next_id += 1;
            }
            offset += gap;
        }
    }
    tracks.sort_by_key(|r| (r.frame, r.id));

    Ok(ScenarioTruth {
        frames,
        fps: config.fps,
        width: config.frame_width,
        height: config.frame_height,
        tracks,
        speed_series,
        corruption_log: CorruptionLog::default(),
    })
}

/// Drops, jitters and pads the ground truth into per-frame detection lists
/// (index `t - 1`), recording the origin of every detection.
pub fn corrupt_detections(truth: &ScenarioTruth, config: &ScenarioConfig) -> Result<(Vec<Vec<Detection>>, CorruptionLog)> {
    config.validate()?;
    let mut rng = stream_rng(config.seed, CORRUPT_STREAM);
    let jitter = if config.det_jitter > 0.0 {
        Some(Normal::new(0.0, config.det_jitter).map_err(|_| Error::InvalidInput("det_jitter".into()))?)
    } else {
        None
    };
    let mut out = Vec::with_capacity(truth.frames as usize);
    let mut log = CorruptionLog { frames: Vec::with_capacity(truth.frames as usize) };
    for t in 1..=truth.frames {
        let records = truth.records_at(t);
        let mut dets = Vec::with_capacity(records.len() + 2);
        let mut entry = FrameCorruption::default();
        for r in records {
            if config.lambda_fn > 0.0 && rng.random::<f64>() < config.lambda_fn {
                entry.dropped.push(r.id);
                continue;
            }
            let mut bbox = r.bbox;
            if let Some(j) = &jitter {
                bbox.cx += j.sample(&mut rng);
                bbox.cy += j.sample(&mut rng);
            }
            let conf = 0.7 + 0.3 * rng.random::<f64>();
            dets.push(Detection { frame: t, bbox, conf, id: None });
            entry.sources.push(DetSource::Cell(r.id));
        }
        let rate = config.lambda_fp * records.len() as f64;
        if rate > 0.0 {
            let n = Poisson::new(rate).map_err(|_| Error::InvalidInput("lambda_fp".into()))?.sample(&mut rng) as usize;
            for _ in 0..n {
                let bbox = BBox {
                    cx: rng.random::<f64>() * truth.width as f64,
                    cy: rng.random::<f64>() * truth.height as f64,
                    w: config.cell_size.mean_w,
                    h: config.cell_size.mean_h,
                };
                let conf = 0.6 + 0.4 * rng.random::<f64>();
                dets.push(Detection { frame: t, bbox, conf, id: None });
                entry.sources.push(DetSource::FalsePositive);
            }
        }
        out.push(dets);
        log.frames.push(entry);
    }
    Ok((out, log))
}

/// One rendered frame: max-of-Gaussians of the live cells plus pixel
/// noise, clamped to `[0, 1]`.
pub fn render_frame(truth: &ScenarioTruth, config: &ScenarioConfig, frame: u32) -> Result<Grid> {
    if frame == 0 || frame > truth.frames {
        return Err(Error::FrameOutOfRange(frame));
    }
    let boxes: Vec<BBox> = truth.records_at(frame).iter().map(|r| r.bbox).collect();
    let mut grid = splat_gaussians(&boxes, truth.width, truth.height);
    if config.frame_noise > 0.0 {
        let noise = Normal::new(0.0, config.frame_noise).map_err(|_| Error::InvalidInput("frame_noise".into()))?;
        let mut rng = stream_rng(config.seed ^ ((frame as u64) << 32), RENDER_STREAM);
        for v in grid.values.iter_mut() {
            *v = (*v + noise.sample(&mut rng)).clamp(0.0, 1.0);
        }
    }
    Ok(grid)
}

pub fn render_frames(truth: &ScenarioTruth, config: &ScenarioConfig) -> Result<Vec<Grid>> {
    (1..=truth.frames).map(|t| render_frame(truth, config, t)).collect()
}

/// Ground truth plus its corrupted detection stream.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub config: ScenarioConfig,
    pub truth: ScenarioTruth,
    /// Index `t - 1` holds frame `t`.
    pub detections: Vec<Vec<Detection>>,
}

impl Scenario {
    pub fn generate(config: &ScenarioConfig) -> Result<Self> {
        let mut truth = generate_scenario(config)?;
        let (detections, log) = corrupt_detections(&truth, config)?;
        truth.corruption_log = log;
        Ok(Scenario { config: config.clone(), truth, detections })
    }
}
