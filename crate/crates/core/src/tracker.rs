//! Frame-by-frame bidirectional association and tracklet lifecycle.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use crate::association::{
    adaptive_threshold, correct_with_base, cost_ct, cost_sort, fuse_min, greedy_match, update_base, BaseVector,
    CostMatrix, MatchPlan,
};
use crate::flow::{ncc_displacement, oracle_displacement, DisplacementSet, Grid};
use crate::geometry::Vec2;
use crate::kalman::KalmanState;
use crate::model::{Detection, FusionMode, Tracklet, TrackerConfig};
use crate::simulator::ScenarioTruth;
use crate::{Error, Result};

/// Supplies backward (current to previous) displacements for the full,
/// ungated detection list of a frame, one entry per detection.
pub trait BackwardSource {
    fn displacements(&mut self, frame: u32, dets: &[Detection]) -> Result<DisplacementSet>;
}

/// No backward branch at all.
#[derive(Debug, Clone, Copy, Default)]
pub struct NoBackward;

impl BackwardSource for NoBackward {
    fn displacements(&mut self, _frame: u32, dets: &[Detection]) -> Result<DisplacementSet> {
        Ok(DisplacementSet::absent(dets.len()))
    }
}

/// Ground-truth vectors plus noise; detection order must match the
/// simulator's emission order.
#[derive(Debug, Clone, Copy)]
pub struct OracleSource<'a> {
    pub truth: &'a ScenarioTruth,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl BackwardSource for OracleSource<'_> {
    fn displacements(&mut self, frame: u32, dets: &[Detection]) -> Result<DisplacementSet> {
        let set = oracle_displacement(self.truth, frame, self.noise_sigma, self.seed)?;
        if set.len() != dets.len() {
            return Err(Error::ShapeMismatch { left: (set.len(), 1), right: (dets.len(), 1) });
        }
        Ok(set)
    }
}

/// Precomputed vectors keyed by `(frame, detection index)`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SidecarSource {
    pub vectors: BTreeMap<(u32, usize), Vec2>,
}

impl BackwardSource for SidecarSource {
    fn displacements(&mut self, frame: u32, dets: &[Detection]) -> Result<DisplacementSet> {
        Ok(DisplacementSet {
            vectors: (0..dets.len()).map(|i| self.vectors.get(&(frame, i)).copied()).collect(),
        })
    }
}

/// Patch correlation on rendered frames. `frames` yields the grid of a
/// 1-based frame; the previous grid is cached so each frame is fetched once.
pub struct NccSource<F> {
    frames: F,
    pub search_radius: usize,
    cache: Option<(u32, Grid)>,
}

impl<F: FnMut(u32) -> Result<Grid>> NccSource<F> {
    pub fn new(frames: F, search_radius: usize) -> Self {
        NccSource { frames, search_radius, cache: None }
    }

    fn grid(&mut self, frame: u32) -> Result<Grid> {
        match &self.cache {
            Some((f, g)) if *f == frame => Ok(g.clone()),
            _ => (self.frames)(frame),
        }
    }
}

impl<F: FnMut(u32) -> Result<Grid>> BackwardSource for NccSource<F> {
    fn displacements(&mut self, frame: u32, dets: &[Detection]) -> Result<DisplacementSet> {
        if frame < 2 {
            return Err(Error::FrameOutOfRange(frame));
        }
        let previous = self.grid(frame - 1)?;
        let current = (self.frames)(frame)?;
        let mut vectors = Vec::with_capacity(dets.len());
        for d in dets {
            // Detections whose patch leaves the frame simply get no vector.
            vectors.push(ncc_displacement(&current, &previous, d, self.search_radius).unwrap_or(None));
        }
        self.cache = Some((frame, current));
        Ok(DisplacementSet { vectors })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrackerOutput {
    pub frames: u32,
    /// One plan per processed frame after the first. Track indices refer to
    /// the live list at that frame, detection indices to the gated list.
    pub plans: Vec<MatchPlan>,
    /// Every tracklet ever created, ordered by id.
    pub tracklets: Vec<Tracklet>,
    pub count: usize,
    pub velocity_trace: Vec<f64>,
}

impl TrackerOutput {
    pub fn tracklets_created(&self) -> usize {
        self.tracklets.len()
    }

    /// Running count of tracklets that reached `min_hits`, index `t - 1`.
    pub fn cumulative_counts(&self, min_hits: u32) -> Vec<usize> {
        let mut per_frame = alloc::vec![0usize; self.frames as usize + 1];
        for t in &self.tracklets {
            if let Some(f) = t.frame_reaching(min_hits) {
                if (f as usize) < per_frame.len() {
                    per_frame[f as usize] += 1;
                }
            }
        }
        let mut acc = 0;
        per_frame[1..]
            .iter()
            .map(|n| {
                acc += n;
                acc
            })
            .collect()
    }
}

pub fn cell_count(output: &TrackerOutput, min_hits: u32) -> usize {
    output.tracklets.iter().filter(|t| t.hits >= min_hits).count()
}

pub fn velocity_trace(output: &TrackerOutput) -> &[f64] {
    &output.velocity_trace
}

#[derive(Debug, Clone)]
pub struct Tracker {
    config: TrackerConfig,
    live: Vec<Tracklet>,
    finished: Vec<Tracklet>,
    next_id: u32,
    base: BaseVector,
    last_frame: Option<u32>,
    plans: Vec<MatchPlan>,
    velocity: Vec<f64>,
}

impl Tracker {
    pub fn new(config: TrackerConfig) -> Result<Self> {
        config.validate()?;
        Ok(Tracker {
            config,
            live: Vec::new(),
            finished: Vec::new(),
            next_id: 1,
            base: BaseVector(None),
            last_frame: None,
            plans: Vec::new(),
            velocity: Vec::new(),
        })
    }

    pub fn config(&self) -> &TrackerConfig {
        &self.config
    }

    pub fn live(&self) -> &[Tracklet] {
        &self.live
    }

    pub fn base(&self) -> BaseVector {
        self.base
    }

    fn check_frame(&mut self, frame: u32) -> Result<()> {
        if let Some(prev) = self.last_frame {
            if frame <= prev {
                return Err(Error::FrameRegression { previous: prev, current: frame });
            }
        }
        self.last_frame = Some(frame);
        Ok(())
    }

    fn spawn(&mut self, frame: u32, det: &Detection) {
        let id = self.next_id;
        self.next_id += 1;
        self.live.push(Tracklet {
            id,
            history: alloc::vec![(frame, det.bbox)],
            kalman: KalmanState::init(det, &self.config.kalman),
            hits: 1,
            misses_in_row: 0,
            confirmed: self.config.min_hits <= 1,
            last_observed: (frame, det.center()),
        });
    }

    /// Opens one tracklet per detection passing the confidence gate.
    pub fn init_first_frame(&mut self, frame: u32, dets: &[Detection]) -> Result<&[Tracklet]> {
        self.check_frame(frame)?;
        let threshold = self.config.conf_threshold;
        for d in dets.iter().filter(|d| d.conf >= threshold) {
            self.spawn(frame, d);
        }
        self.base = BaseVector(None);
        Ok(&self.live)
    }

    /// Associates frame `frame` against the live tracklets.
    pub fn step<S: BackwardSource + ?Sized>(&mut self, frame: u32, dets: &[Detection], source: &mut S) -> Result<MatchPlan> {
        if self.last_frame.is_none() {
            return self.init_first_frame(frame, dets).map(|_| MatchPlan::default());
        }
        self.check_frame(frame)?;
        let mode = self.config.fusion_mode;
        let backward_all = if mode.needs_backward() {
            let set = source.displacements(frame, dets)?;
            if set.len() != dets.len() {
                return Err(Error::ShapeMismatch { left: (set.len(), 1), right: (dets.len(), 1) });
            }
            set
        } else {
            DisplacementSet::absent(dets.len())
        };

        let mut gated = Vec::with_capacity(dets.len());
        let mut backward = Vec::with_capacity(dets.len());
        for (d, v) in dets.iter().zip(&backward_all.vectors) {
            if d.conf >= self.config.conf_threshold {
                gated.push(*d);
                let v = match v {
                    Some(v) if self.config.base_blend_enabled => Some(correct_with_base(*v, self.base)),
                    other => *other,
                };
                backward.push(v);
            }
        }
        let backward = DisplacementSet { vectors: backward };

        // The backward branch lands on where the cell was seen last frame;
        // the forward branch extrapolates the filter state.
        let mut previous = Vec::with_capacity(self.live.len());
        let mut posterior = Vec::with_capacity(self.live.len());
        let mut forward = Vec::with_capacity(self.live.len());
        for t in self.live.iter_mut() {
            let filtered = t.kalman.center();
            previous.push(if t.last_observed.0 + 1 == frame { t.last_observed.1 } else { filtered });
            posterior.push(filtered);
            forward.push(t.kalman.predict().1);
        }
        let centers: Vec<Vec2> = gated.iter().map(|d| d.center()).collect();
        let cost: CostMatrix = match mode {
            FusionMode::Cycle => fuse_min(&cost_ct(&previous, &centers, &backward), &cost_sort(&posterior, &centers, &forward))?,
            FusionMode::CtOnly => cost_ct(&previous, &centers, &backward),
            FusionMode::SortOnly => cost_sort(&posterior, &centers, &forward),
        };
        let gate = adaptive_threshold(&centers, self.config.fallback_gate);
        let plan = greedy_match(&cost, gate);

        let mut motions = Vec::with_capacity(plan.pairs.len());
        let mut speed_sum = 0.0;
        for pair in &plan.pairs {
            let det = &gated[pair.det];
            let track = &mut self.live[pair.track];
            motions.push(previous[pair.track] - det.center());
            let (seen, at) = track.last_observed;
            speed_sum += det.center().distance(at) / (frame - seen) as f64;
            track.kalman.update(det);
            track.history.push((frame, det.bbox));
            track.hits += 1;
            track.misses_in_row = 0;
            track.confirmed |= track.hits >= self.config.min_hits;
            track.last_observed = (frame, det.center());
        }
        let speed = if plan.pairs.is_empty() {
            self.velocity.last().copied().unwrap_or(0.0)
        } else {
            speed_sum / plan.pairs.len() as f64
        };
        self.velocity.push(speed);

        let mut terminated = Vec::new();
        for &r in &plan.unmatched_tracks {
            let t = &mut self.live[r];
            t.misses_in_row += 1;
            if t.misses_in_row > self.config.max_age {
                terminated.push(r);
            }
        }
        for r in terminated.into_iter().rev() {
            self.finished.push(self.live.remove(r));
        }
        for &c in &plan.unmatched_dets {
            self.spawn(frame, &gated[c]);
        }
        self.base = update_base(&motions);
        self.plans.push(plan.clone());
        Ok(plan)
    }

    pub fn finish(self) -> TrackerOutput {
        let min_hits = self.config.min_hits;
        let mut tracklets = self.finished;
        tracklets.extend(self.live);
        tracklets.sort_by_key(|t| t.id);
        let mut out = TrackerOutput {
            frames: self.last_frame.unwrap_or(0),
            plans: self.plans,
            tracklets,
            count: 0,
            velocity_trace: self.velocity,
        };
        out.count = cell_count(&out, min_hits);
        out
    }
}

/// Runs the tracker over `frames`, where index `t - 1` holds frame `t`.
pub fn run<S: BackwardSource + ?Sized>(frames: &[Vec<Detection>], source: &mut S, config: &TrackerConfig) -> Result<TrackerOutput> {
    if frames.is_empty() {
        return Err(Error::InvalidInput("no frames to track".into()));
    }
    let mut tracker = Tracker::new(config.clone())?;
    for (i, dets) in frames.iter().enumerate() {
        tracker.step(i as u32 + 1, dets, source)?;
    }
    Ok(tracker.finish())
}
