//! CLEAR-MOT and identity metrics over MOT-style box lists.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::assignment::{max_weight_pairs, min_cost_assignment};
use crate::model::{BBox, Detection};
use crate::{Error, Result};

const MOSTLY_TRACKED: f64 = 0.8;
const MOSTLY_LOST: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameAssignment {
    pub frame: u32,
    /// `(gt id, hyp id)` pairs.
    pub pairs: Vec<(u32, u32)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub prcn: f64,
    pub rccl: f64,
    pub idp: f64,
    pub idr: f64,
    pub idf1: f64,
    pub mt: f64,
    pub ml: f64,
    pub mt_count: usize,
    pub ml_count: usize,
    pub gt_tracks: usize,
    pub idsw: usize,
    /// Per ground-truth box, times 100.
    pub idsw_pct: f64,
    pub frag: usize,
    pub frag_pct: f64,
    pub mota: f64,
    pub tp: usize,
    pub fp: usize,
    #[serde(rename = "fn")]
    pub fn_: usize,
    pub gt_boxes: usize,
    pub hyp_boxes: usize,
    pub assignments: Vec<FrameAssignment>,
}

impl MetricsReport {
    /// Percentages rounded to two decimals.
    pub fn rounded(mut self) -> Self {
        let r = |v: &mut f64| *v = libm::round(*v * 100.0) / 100.0;
        for v in [
            &mut self.prcn,
            &mut self.rccl,
            &mut self.idp,
            &mut self.idr,
            &mut self.idf1,
            &mut self.mt,
            &mut self.ml,
            &mut self.idsw_pct,
            &mut self.frag_pct,
            &mut self.mota,
        ] {
            r(v);
        }
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdMetrics {
    pub idp: f64,
    pub idr: f64,
    pub idf1: f64,
    pub idtp: usize,
    pub idfp: usize,
    pub idfn: usize,
}

type FrameBoxes = BTreeMap<u32, Vec<(u32, BBox)>>;

fn group(dets: &[Detection], what: &str) -> Result<FrameBoxes> {
    let mut out: FrameBoxes = BTreeMap::new();
    for d in dets {
        let id = d.id.ok_or_else(|| Error::InvalidInput(format!("{what} box on frame {} has no id", d.frame)))?;
        out.entry(d.frame).or_default().push((id, d.bbox));
    }
    for boxes in out.values_mut() {
        boxes.sort_by_key(|b| b.0);
        if boxes.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::InvalidInput(format!("{what} id repeated within a frame")));
        }
    }
    Ok(out)
}

fn pct(num: f64, den: f64) -> f64 {
    if den > 0.0 {
        100.0 * num / den
    } else {
        0.0
    }
}

/// CLEAR-MOT with correspondences carried over from the previous frame while
/// they still overlap at `iou_threshold`, the rest assigned by maximum IoU.
pub fn clear_mot(gt: &[Detection], hyp: &[Detection], iou_threshold: f64) -> Result<MetricsReport> {
    if gt.is_empty() {
        return Err(Error::EmptyGroundTruth);
    }
    let g = group(gt, "ground-truth")?;
    let h = group(hyp, "hypothesis")?;
    let frames: BTreeSet<u32> = g.keys().chain(h.keys()).copied().collect();
    let empty = Vec::new();

    let mut carried: BTreeMap<u32, u32> = BTreeMap::new();
    let mut last_hyp: BTreeMap<u32, u32> = BTreeMap::new();
    let mut ever_matched: BTreeSet<u32> = BTreeSet::new();
    let mut was_matched: BTreeMap<u32, bool> = BTreeMap::new();
    let mut gt_len: BTreeMap<u32, usize> = BTreeMap::new();
    let mut gt_hits: BTreeMap<u32, usize> = BTreeMap::new();
    let (mut tp, mut fp, mut fn_, mut idsw, mut frag) = (0usize, 0usize, 0usize, 0usize, 0usize);
    let mut assignments = Vec::with_capacity(frames.len());

    for frame in frames {
        let gb = g.get(&frame).unwrap_or(&empty);
        let hb = h.get(&frame).unwrap_or(&empty);
        let mut g_used = alloc::vec![false; gb.len()];
        let mut h_used = alloc::vec![false; hb.len()];
        let mut pairs: Vec<(usize, usize)> = Vec::new();

        for (gi, (gid, gbox)) in gb.iter().enumerate() {
            if let Some(hid) = carried.get(gid) {
                if let Ok(hi) = hb.binary_search_by_key(hid, |b| b.0) {
                    if !h_used[hi] && gbox.iou(&hb[hi].1) >= iou_threshold {
                        g_used[gi] = true;
                        h_used[hi] = true;
                        pairs.push((gi, hi));
                    }
                }
            }
        }
        let free_g: Vec<usize> = (0..gb.len()).filter(|i| !g_used[*i]).collect();
        let free_h: Vec<usize> = (0..hb.len()).filter(|i| !h_used[*i]).collect();
        let weights: Vec<f64> = free_g
            .iter()
            .flat_map(|gi| free_h.iter().map(move |hi| (gi, hi)))
            .map(|(gi, hi)| gb[*gi].1.iou(&hb[*hi].1))
            .collect();
        for (a, b) in max_weight_pairs(&weights, free_g.len(), free_h.len(), iou_threshold) {
            pairs.push((free_g[a], free_h[b]));
        }
        pairs.sort_unstable();

        let mut matched_now: BTreeSet<u32> = BTreeSet::new();
        let mut log = Vec::with_capacity(pairs.len());
        carried.clear();
        for (gi, hi) in &pairs {
            let (gid, hid) = (gb[*gi].0, hb[*hi].0);
            if let Some(prev) = last_hyp.insert(gid, hid) {
                if prev != hid {
                    idsw += 1;
                }
            }
            carried.insert(gid, hid);
            matched_now.insert(gid);
            log.push((gid, hid));
        }
        for (gid, _) in gb {
            *gt_len.entry(*gid).or_default() += 1;
            let now = matched_now.contains(gid);
            let before = was_matched.insert(*gid, now).unwrap_or(false);
            if now {
                *gt_hits.entry(*gid).or_default() += 1;
                if !before && ever_matched.contains(gid) {
                    frag += 1;
                }
                ever_matched.insert(*gid);
            }
        }
        tp += pairs.len();
        fp += hb.len() - pairs.len();
        fn_ += gb.len() - pairs.len();
        assignments.push(FrameAssignment { frame, pairs: log });
    }

    let gt_boxes = gt.len();
    let gt_tracks = gt_len.len();
    let mut mt_count = 0;
    let mut ml_count = 0;
    for (gid, len) in &gt_len {
        let cover = *gt_hits.get(gid).unwrap_or(&0) as f64 / *len as f64;
        if cover >= MOSTLY_TRACKED {
            mt_count += 1;
        } else if cover <= MOSTLY_LOST {
            ml_count += 1;
        }
    }
    let ids = id_metrics(gt, hyp, iou_threshold)?;
    Ok(MetricsReport {
        prcn: pct(tp as f64, (tp + fp) as f64),
        rccl: pct(tp as f64, (tp + fn_) as f64),
        idp: ids.idp,
        idr: ids.idr,
        idf1: ids.idf1,
        mt: pct(mt_count as f64, gt_tracks as f64),
        ml: pct(ml_count as f64, gt_tracks as f64),
        mt_count,
        ml_count,
        gt_tracks,
        idsw,
        idsw_pct: pct(idsw as f64, gt_boxes as f64),
        frag,
        frag_pct: pct(frag as f64, gt_boxes as f64),
        mota: 100.0 * (1.0 - (fn_ + fp + idsw) as f64 / gt_boxes as f64),
        tp,
        fp,
        fn_,
        gt_boxes,
        hyp_boxes: hyp.len(),
        assignments,
    })
}

/// Per `(gt track, hyp track)` count of frames where both boxes overlap at
/// `iou_threshold`, with the track ids in row and column order.
pub fn trajectory_overlaps(gt: &[Detection], hyp: &[Detection], iou_threshold: f64) -> Result<(Vec<u32>, Vec<u32>, Vec<usize>)> {
    let g = group(gt, "ground-truth")?;
    let h = group(hyp, "hypothesis")?;
    let gids: Vec<u32> = gt.iter().filter_map(|d| d.id).collect::<BTreeSet<_>>().into_iter().collect();
    let hids: Vec<u32> = hyp.iter().filter_map(|d| d.id).collect::<BTreeSet<_>>().into_iter().collect();
    let mut overlap = alloc::vec![0usize; gids.len() * hids.len()];
    for (frame, gb) in &g {
        let Some(hb) = h.get(frame) else { continue };
        for (gid, gbox) in gb {
            let r = gids.binary_search(gid).unwrap_or_default();
            for (hid, hbox) in hb {
                if gbox.iou(hbox) >= iou_threshold {
                    let c = hids.binary_search(hid).unwrap_or_default();
                    overlap[r * hids.len() + c] += 1;
                }
            }
        }
    }
    Ok((gids, hids, overlap))
}

/// Identity precision, recall and F1 from the trajectory matching that
/// maximises the number of identity-consistent true positives.
pub fn id_metrics(gt: &[Detection], hyp: &[Detection], iou_threshold: f64) -> Result<IdMetrics> {
    if gt.is_empty() {
        return Err(Error::EmptyGroundTruth);
    }
    let (gids, hids, overlap) = trajectory_overlaps(gt, hyp, iou_threshold)?;
    let cost: Vec<f64> = overlap.iter().map(|o| -(*o as f64)).collect();
    let idtp: usize = min_cost_assignment(&cost, gids.len(), hids.len())
        .iter()
        .enumerate()
        .filter_map(|(r, c)| c.map(|c| overlap[r * hids.len() + c]))
        .sum();
    let idfp = hyp.len() - idtp;
    let idfn = gt.len() - idtp;
    let idp = pct(idtp as f64, (idtp + idfp) as f64);
    let idr = pct(idtp as f64, (idtp + idfn) as f64);
    let idf1 = if idp + idr > 0.0 { 2.0 * idp * idr / (idp + idr) } else { 0.0 };
    Ok(IdMetrics { idp, idr, idf1, idtp, idfp, idfn })
}
