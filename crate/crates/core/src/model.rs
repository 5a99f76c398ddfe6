//! Domain types shared by every stage of the pipeline.

use alloc::format;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::geometry::Vec2;
use crate::kalman::{KalmanParams, KalmanState};
use crate::{Error, Result};

/// Axis-aligned box in center form, pixels.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub cx: f64,
    pub cy: f64,
    pub w: f64,
    pub h: f64,
}

impl BBox {
    pub fn new(cx: f64, cy: f64, w: f64, h: f64) -> Result<Self> {
        if !(cx.is_finite() && cy.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite center ({cx}, {cy})")));
        }
        if !(w > 0.0 && h > 0.0 && w.is_finite() && h.is_finite()) {
            return Err(Error::InvalidInput(format!("non-positive box {w}x{h}")));
        }
        Ok(BBox { cx, cy, w, h })
    }

    /// Builds a box from MOTChallenge top-left form.
    pub fn from_top_left(left: f64, top: f64, w: f64, h: f64) -> Result<Self> {
        BBox::new(left + w / 2.0, top + h / 2.0, w, h)
    }

    pub fn center(&self) -> Vec2 {
        Vec2::new(self.cx, self.cy)
    }

    pub fn left(&self) -> f64 {
        self.cx - self.w / 2.0
    }

    pub fn top(&self) -> f64 {
        self.cy - self.h / 2.0
    }

    pub fn area(&self) -> f64 {
        self.w * self.h
    }

    pub fn translated(&self, by: Vec2) -> BBox {
        BBox { cx: self.cx + by.x, cy: self.cy + by.y, ..*self }
    }

    pub fn iou(&self, other: &BBox) -> f64 {
        let ix = (self.left() + self.w).min(other.left() + other.w) - self.left().max(other.left());
        let iy = (self.top() + self.h).min(other.top() + other.h) - self.top().max(other.top());
        if ix <= 0.0 || iy <= 0.0 {
            return 0.0;
        }
        let inter = ix * iy;
        inter / (self.area() + other.area() - inter)
    }
}

/// One observed object in one frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    /// 1-based frame index.
    pub frame: u32,
    pub bbox: BBox,
    pub conf: f64,
    pub id: Option<u32>,
}

impl Detection {
    pub fn new(frame: u32, bbox: BBox, conf: f64, id: Option<u32>) -> Result<Self> {
        if !(0.0..=1.0).contains(&conf) {
            return Err(Error::InvalidInput(format!("confidence {conf} outside [0, 1]")));
        }
        if id == Some(0) {
            return Err(Error::InvalidInput("id must be positive".into()));
        }
        Ok(Detection { frame, bbox, conf, id })
    }

    pub fn center(&self) -> Vec2 {
        self.bbox.center()
    }
}

/// Keeps detections with `conf >= threshold`, preserving order.
pub fn filter_by_confidence(dets: &[Detection], threshold: f64) -> Vec<Detection> {
    dets.iter().filter(|d| d.conf >= threshold).copied().collect()
}

/// A live or terminated identity.
#[derive(Debug, Clone, PartialEq)]
pub struct Tracklet {
    pub id: u32,
    /// Assigned detection boxes on the frames where the tracklet was matched.
    pub history: Vec<(u32, BBox)>,
    pub kalman: KalmanState,
    pub hits: u32,
    pub misses_in_row: u32,
    pub confirmed: bool,
    /// Frame and center of the last detection assigned to this tracklet.
    pub last_observed: (u32, Vec2),
}

impl Tracklet {
    pub fn first_frame(&self) -> u32 {
        self.history.first().map(|h| h.0).unwrap_or(0)
    }

    pub fn last_frame(&self) -> u32 {
        self.history.last().map(|h| h.0).unwrap_or(0)
    }

    /// Frame on which the tracklet accumulated `min_hits` hits, if it did.
    pub fn frame_reaching(&self, min_hits: u32) -> Option<u32> {
        let idx = min_hits.max(1) as usize - 1;
        self.history.get(idx).map(|h| h.0)
    }
}

/// Which cost matrix drives association.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FusionMode {
    /// Element-wise minimum of the backward and forward costs.
    #[default]
    Cycle,
    /// Forward Kalman cost only.
    SortOnly,
    /// Backward displacement cost only.
    CtOnly,
}

impl FusionMode {
    pub const ALL: [FusionMode; 3] = [FusionMode::Cycle, FusionMode::CtOnly, FusionMode::SortOnly];

    pub fn as_str(self) -> &'static str {
        match self {
            FusionMode::Cycle => "cycle",
            FusionMode::SortOnly => "sort_only",
            FusionMode::CtOnly => "ct_only",
        }
    }

    pub fn needs_backward(self) -> bool {
        self != FusionMode::SortOnly
    }
}

impl core::str::FromStr for FusionMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cycle" => Ok(FusionMode::Cycle),
            "sort_only" => Ok(FusionMode::SortOnly),
            "ct_only" => Ok(FusionMode::CtOnly),
            other => Err(Error::InvalidInput(format!("unknown fusion mode {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrackerConfig {
    /// Detections below this confidence are ignored.
    pub conf_threshold: f64,
    /// Frames a tracklet may go unmatched before it is terminated.
    pub max_age: u32,
    /// Hits required before a tracklet counts as a cell.
    pub min_hits: u32,
    pub base_blend_enabled: bool,
    /// Gate used when a frame has fewer than two detections.
    pub fallback_gate: f64,
    pub fusion_mode: FusionMode,
    pub kalman: KalmanParams,
}

impl Default for TrackerConfig {
    fn default() -> Self {
        TrackerConfig {
            conf_threshold: 0.6,
            max_age: 0,
            min_hits: 2,
            base_blend_enabled: true,
            fallback_gate: 50.0,
            fusion_mode: FusionMode::Cycle,
            kalman: KalmanParams::default(),
        }
    }
}

impl TrackerConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.conf_threshold) {
            return Err(Error::InvalidInput(format!(
                "conf_threshold {} outside [0, 1]",
                self.conf_threshold
            )));
        }
        if self.min_hits < 1 {
            return Err(Error::InvalidInput("min_hits must be at least 1".into()));
        }
        if !(self.fallback_gate > 0.0) {
            return Err(Error::InvalidInput("fallback_gate must be positive".into()));
        }
        self.kalman.validate()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn det(conf: f64) -> Detection {
        Detection::new(1, BBox::new(5.0, 5.0, 2.0, 2.0).unwrap(), conf, None).unwrap()
    }

    #[test]
    fn confidence_gate_is_inclusive() {
        let dets = [det(0.59), det(0.60), det(0.61)];
        let kept = filter_by_confidence(&dets, 0.6);
        assert_eq!(kept.len(), 2);
        assert_eq!(kept[0].conf, 0.60);
        assert_eq!(kept[1].conf, 0.61);
    }

    #[test]
    fn confidence_gate_extremes() {
        let dets = [det(0.0), det(0.3), det(1.0)];
        assert_eq!(filter_by_confidence(&dets, 0.0), dets.to_vec());
        let only_one = filter_by_confidence(&dets, 1.0);
        assert_eq!(only_one.len(), 1);
        assert_eq!(only_one[0].conf, 1.0);
    }

    #[test]
    fn rejects_bad_boxes_and_ids() {
        assert!(BBox::new(1.0, 1.0, 0.0, 2.0).is_err());
        assert!(BBox::new(1.0, f64::NAN, 1.0, 2.0).is_err());
        let b = BBox::new(1.0, 1.0, 1.0, 1.0).unwrap();
        assert!(Detection::new(1, b, 1.2, None).is_err());
        assert!(Detection::new(1, b, 0.5, Some(0)).is_err());
    }

    #[test]
    fn iou_of_shifted_boxes() {
        let a = BBox::new(5.0, 5.0, 10.0, 10.0).unwrap();
        assert_eq!(a.iou(&a), 1.0);
        let b = a.translated(Vec2::new(5.0, 0.0));
        assert!((a.iou(&b) - 50.0 / 150.0).abs() < 1e-12);
        assert_eq!(a.iou(&a.translated(Vec2::new(20.0, 0.0))), 0.0);
    }

    proptest::proptest! {
        #[test]
        fn filter_is_monotone_in_threshold(
            confs in proptest::collection::vec(0.0f64..=1.0, 0..40),
            a in 0.0f64..=1.0,
            b in 0.0f64..=1.0,
        ) {
            let dets: Vec<Detection> = confs.iter().map(|&c| det(c)).collect();
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            proptest::prop_assert!(
                filter_by_confidence(&dets, hi).len() <= filter_by_confidence(&dets, lo).len()
            );
        }
    }
}
