//! Backward displacement sources (current frame to previous frame) and the
//! Gaussian heatmap rendering of tracked centres.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::geometry::Vec2;
use crate::model::{BBox, Detection};
use crate::simulator::{DetSource, ScenarioTruth};
use crate::{Error, Result};

/// Beyond this many sigmas a Gaussian contributes less than 1e-12.
const RENDER_RADIUS_SIGMAS: f64 = 7.5;

/// Dense row-major grayscale grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub width: usize,
    pub height: usize,
    pub values: Vec<f64>,
}

/// Heatmaps and rendered frames share the grid layout.
pub type Heatmap = Grid;

impl Grid {
    pub fn new(width: usize, height: usize) -> Self {
        Grid { width, height, values: vec![0.0; width * height] }
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Self {
        Grid { width, height, values: vec![value; width * height] }
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.values[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, v: f64) {
        self.values[y * self.width + x] = v;
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
    }

    /// Content moved by an integer offset; uncovered pixels get `fill`.
    pub fn shifted(&self, dx: i64, dy: i64, fill: f64) -> Grid {
        let mut out = Grid::filled(self.width, self.height, fill);
        for y in 0..self.height as i64 {
            for x in 0..self.width as i64 {
                let (sx, sy) = (x - dx, y - dy);
                if sx >= 0 && sy >= 0 && (sx as usize) < self.width && (sy as usize) < self.height {
                    out.set(x as usize, y as usize, self.get(sx as usize, sy as usize));
                }
            }
        }
        out
    }
}

/// Per-detection backward vectors, aligned with the detection list of a frame.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DisplacementSet {
    pub vectors: Vec<Option<Vec2>>,
}

impl DisplacementSet {
    pub fn absent(n: usize) -> Self {
        DisplacementSet { vectors: vec![None; n] }
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn get(&self, i: usize) -> Option<Vec2> {
        self.vectors.get(i).copied().flatten()
    }
}

/// Gaussian radius: a third of the mean box side.
pub fn sigma_from_bbox(w: f64, h: f64) -> f64 {
    (w + h) / 6.0
}

/// Max-of-Gaussians rendering on the integer grid. Each box contributes
/// `exp(-|p - q|^2 / (2 sigma^2))`; overlapping cells take the maximum.
pub fn render_heatmap(boxes: &[BBox], width: usize, height: usize) -> Result<Heatmap> {
    for b in boxes {
        if !(b.cx >= 0.0 && b.cy >= 0.0 && b.cx < width as f64 && b.cy < height as f64) {
            return Err(Error::OutOfBounds(format!(
                "center ({}, {}) outside {width}x{height}",
                b.cx, b.cy
            )));
        }
    }
    Ok(splat_gaussians(boxes, width, height))
}

/// Like [`render_heatmap`] but silently clips cells outside the grid.
pub(crate) fn splat_gaussians(boxes: &[BBox], width: usize, height: usize) -> Grid {
    let mut grid = Grid::new(width, height);
    for b in boxes {
        let sigma = sigma_from_bbox(b.w, b.h);
        let radius = RENDER_RADIUS_SIGMAS * sigma;
        let x0 = libm::floor(b.cx - radius).max(0.0) as usize;
        let y0 = libm::floor(b.cy - radius).max(0.0) as usize;
        let x1 = (libm::ceil(b.cx + radius).max(-1.0) as i64).min(width as i64 - 1);
        let y1 = (libm::ceil(b.cy + radius).max(-1.0) as i64).min(height as i64 - 1);
        if x1 < 0 || y1 < 0 {
            continue;
        }
        let denom = 2.0 * sigma * sigma;
        for y in y0..=y1 as usize {
            let dy = y as f64 - b.cy;
            for x in x0..=x1 as usize {
                let dx = x as f64 - b.cx;
                let v = libm::exp(-(dx * dx + dy * dy) / denom);
                let cell = &mut grid.values[y * width + x];
                if v > *cell {
                    *cell = v;
                }
            }
        }
    }
    grid
}

fn frame_rng(seed: u64, frame: u32, stream: u64) -> ChaCha8Rng {
    let mixed = seed
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add((frame as u64) << 20)
        .wrapping_add(stream);
    ChaCha8Rng::seed_from_u64(mixed)
}

/// Simulator-backed displacement: the exact backward vector of each
/// detected cell plus isotropic Gaussian noise. False positives and cells
/// seen for the first time get no vector.
pub fn oracle_displacement(
    truth: &ScenarioTruth,
    frame: u32,
    noise_sigma: f64,
    seed: u64,
) -> Result<DisplacementSet> {
    if frame < 2 || frame > truth.frames {
        return Err(Error::FrameOutOfRange(frame));
    }
    let noise = if noise_sigma > 0.0 {
        Some(
            Normal::new(0.0, noise_sigma)
                .map_err(|_| Error::InvalidInput(format!("noise sigma {noise_sigma}")))?,
        )
    } else {
        None
    };
    let mut rng = frame_rng(seed, frame, 0x0d15);
    let sources = truth.detection_sources(frame);
    let mut vectors = Vec::with_capacity(sources.len());
    for src in sources {
        let v = match src {
            DetSource::Cell(id) => truth.record(frame, id).and_then(|r| r.backward),
            DetSource::FalsePositive => None,
        };
        vectors.push(v.map(|v| match &noise {
            Some(n) => v + Vec2::new(n.sample(&mut rng), n.sample(&mut rng)),
            None => v,
        }));
    }
    Ok(DisplacementSet { vectors })
}

/// Integer offset within `search_radius` that maximises the normalised
/// cross-correlation between the detection patch in `current` and
/// `previous`. `None` when nothing correlates at 0.5 or better.
pub fn ncc_displacement(
    current: &Grid,
    previous: &Grid,
    det: &Detection,
    search_radius: usize,
) -> Result<Option<Vec2>> {
    let b = det.bbox;
    let half_w = (libm::floor(b.w / 2.0) as i64).max(1);
    let half_h = (libm::floor(b.h / 2.0) as i64).max(1);
    let cx = libm::round(b.cx) as i64;
    let cy = libm::round(b.cy) as i64;
    let in_grid = |g: &Grid, x: i64, y: i64| {
        x - half_w >= 0 && y - half_h >= 0 && x + half_w < g.width as i64 && y + half_h < g.height as i64
    };
    if !in_grid(current, cx, cy) {
        return Err(Error::OutOfBounds(format!(
            "patch {}x{} at ({cx}, {cy}) outside frame",
            2 * half_w + 1,
            2 * half_h + 1
        )));
    }

    let mut template = Vec::with_capacity(((2 * half_w + 1) * (2 * half_h + 1)) as usize);
    for y in (cy - half_h)..=(cy + half_h) {
        for x in (cx - half_w)..=(cx + half_w) {
            template.push(current.get(x as usize, y as usize));
        }
    }
    let n = template.len() as f64;
    let t_mean = template.iter().sum::<f64>() / n;
    for v in template.iter_mut() {
        *v -= t_mean;
    }
    let t_energy: f64 = template.iter().map(|v| v * v).sum();
    if t_energy <= f64::EPSILON * n {
        return Ok(None);
    }

    let r = search_radius as i64;
    let mut best: Option<(f64, i64, i64)> = None;
    for oy in -r..=r {
        for ox in -r..=r {
            let (px, py) = (cx + ox, cy + oy);
            if !in_grid(previous, px, py) {
                continue;
            }
            let mut sum = 0.0;
            let mut sum_sq = 0.0;
            let mut cross = 0.0;
            let mut k = 0;
            for y in (py - half_h)..=(py + half_h) {
                for x in (px - half_w)..=(px + half_w) {
                    let v = previous.get(x as usize, y as usize);
                    sum += v;
                    sum_sq += v * v;
                    cross += template[k] * v;
                    k += 1;
                }
            }
            // cross already equals sum((T - mean_T) * (I - mean_I)).
            let i_energy = sum_sq - sum * sum / n;
            if i_energy <= f64::EPSILON * n {
                continue;
            }
            let score = cross / libm::sqrt(t_energy * i_energy);
            if best.map_or(true, |(s, _, _)| score > s) {
                best = Some((score, ox, oy));
            }
        }
    }
    Ok(match best {
        Some((score, ox, oy)) if score >= 0.5 => Some(Vec2::new(ox as f64, oy as f64)),
        _ => None,
    })
}

/// Mean L1 error of predicted backward vectors against ground truth over
/// the detections that have both a prediction and a true partner.
pub fn displacement_l1(pred: &DisplacementSet, truth: &ScenarioTruth, frame: u32) -> Result<f64> {
    if frame < 2 || frame > truth.frames {
        return Err(Error::FrameOutOfRange(frame));
    }
    let sources = truth.detection_sources(frame);
    let mut total = 0.0;
    let mut n = 0usize;
    for (i, src) in sources.iter().enumerate() {
        let DetSource::Cell(id) = *src else { continue };
        let (Some(p), Some(t)) = (pred.get(i), truth.record(frame, id).and_then(|r| r.backward)) else {
            continue;
        };
        total += (p - t).norm_l1();
        n += 1;
    }
    if n == 0 {
        return Err(Error::NoMatchedCells);
    }
    Ok(total / n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bx(cx: f64, cy: f64, s: f64) -> BBox {
        BBox::new(cx, cy, s, s).unwrap()
    }

    #[test]
    fn sigma_is_a_third_of_the_mean_side() {
        assert_eq!(sigma_from_bbox(6.0, 6.0), 2.0);
        assert_eq!(sigma_from_bbox(3.0, 9.0), 2.0);
        assert!((sigma_from_bbox(1.0, 1.0) - 1.0 / 3.0).abs() < 1e-15);
    }

    #[test]
    fn heatmap_values_match_direct_evaluation() {
        let h = render_heatmap(&[bx(10.0, 10.0, 6.0)], 32, 32).unwrap();
        assert_eq!(h.get(10, 10), 1.0);
        // sigma = 2, offset 2: exp(-4 / 8)
        assert!((h.get(10, 12) - libm::exp(-0.5)).abs() < 1e-12);
        assert!((h.get(10, 12) - 0.60653).abs() < 1e-5);
        // Far pixels: the truncated value is below 1e-12 of the exact one.
        let exact = libm::exp(-(20.0f64 * 20.0 + 20.0 * 20.0) / 8.0);
        assert!((h.get(30, 30) - exact).abs() < 1e-12);
    }

    #[test]
    fn overlapping_cells_take_the_max_not_the_sum() {
        let a = bx(10.0, 10.0, 6.0);
        let b = bx(13.0, 10.0, 9.0);
        let h = render_heatmap(&[a, b], 32, 32).unwrap();
        for y in 0..32 {
            for x in 0..32 {
                let g = |c: &BBox| {
                    let s = sigma_from_bbox(c.w, c.h);
                    let d2 = (x as f64 - c.cx).powi(2) + (y as f64 - c.cy).powi(2);
                    libm::exp(-d2 / (2.0 * s * s))
                };
                let want = g(&a).max(g(&b));
                assert!((h.get(x, y) - want).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn heatmap_rejects_out_of_bounds_centers() {
        assert!(render_heatmap(&[bx(32.0, 1.0, 4.0)], 32, 32).is_err());
        assert!(render_heatmap(&[bx(-0.5, 1.0, 4.0)], 32, 32).is_err());
        assert_eq!(render_heatmap(&[], 4, 4).unwrap().max_value(), 0.0);
    }

    fn blob_frame(w: usize, h: usize, cx: f64, cy: f64) -> Grid {
        splat_gaussians(&[bx(cx, cy, 8.0)], w, h)
    }

    #[test]
    fn ncc_recovers_pure_translation() {
        let prev = blob_frame(64, 64, 28.0, 30.0);
        let cur = prev.shifted(4, 0, 0.0);
        let det = Detection::new(2, bx(32.0, 30.0, 8.0), 1.0, None).unwrap();
        assert_eq!(ncc_displacement(&cur, &prev, &det, 6).unwrap(), Some(Vec2::new(-4.0, 0.0)));
    }

    fn brute_force_ncc(cur: &Grid, prev: &Grid, cx: i64, cy: i64, half: i64, r: i64) -> (i64, i64) {
        let patch = |g: &Grid, x0: i64, y0: i64| -> Vec<f64> {
            let mut p = Vec::new();
            for y in y0 - half..=y0 + half {
                for x in x0 - half..=x0 + half {
                    p.push(g.get(x as usize, y as usize));
                }
            }
            p
        };
        let zscore = |p: Vec<f64>| {
            let m = p.iter().sum::<f64>() / p.len() as f64;
            let c: Vec<f64> = p.iter().map(|v| v - m).collect();
            let e = libm::sqrt(c.iter().map(|v| v * v).sum::<f64>());
            c.into_iter().map(|v| v / e).collect::<Vec<f64>>()
        };
        let t = zscore(patch(cur, cx, cy));
        let mut best = (f64::MIN, 0, 0);
        for oy in -r..=r {
            for ox in -r..=r {
                let s: f64 = zscore(patch(prev, cx + ox, cy + oy)).iter().zip(&t).map(|(a, b)| a * b).sum();
                if s > best.0 {
                    best = (s, ox, oy);
                }
            }
        }
        (best.1, best.2)
    }

    #[test]
    fn ncc_matches_exhaustive_search_under_noise() {
        use rand::SeedableRng;
        use rand_distr::{Distribution, Normal};
        let noise = Normal::new(0.0, 0.01).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let mut noisy = |g: Grid| Grid { values: g.values.iter().map(|v| v + noise.sample(&mut rng)).collect(), ..g };
        let prev = noisy(blob_frame(64, 64, 30.0, 30.0));
        let cur = noisy(blob_frame(64, 64, 32.0, 31.0));
        let det = Detection::new(2, bx(32.0, 31.0, 8.0), 1.0, None).unwrap();
        assert_eq!(ncc_displacement(&cur, &prev, &det, 5).unwrap(), Some(Vec2::new(-2.0, -1.0)));
        assert_eq!(brute_force_ncc(&cur, &prev, 32, 31, 4, 5), (-2, -1));
    }

    #[test]
    fn ncc_on_rendered_scenario_frames() {
        use crate::simulator::{render_frame, ScenarioConfig, ScenarioTruth, TruthRecord};
        let cfg = ScenarioConfig { frame_width: 64, frame_height: 64, frame_noise: 0.01, ..ScenarioConfig::s1(3) };
        let rec = |frame, cx| TruthRecord { frame, id: 1, bbox: bx(cx, 32.0, 8.0), backward: None };
        let truth = ScenarioTruth {
            frames: 2,
            fps: 160.0,
            width: 64,
            height: 64,
            tracks: vec![rec(1, 30.0), rec(2, 32.0)],
            speed_series: vec![2.0, 2.0],
            corruption_log: Default::default(),
        };
        let prev = render_frame(&truth, &cfg, 1).unwrap();
        let cur = render_frame(&truth, &cfg, 2).unwrap();
        let det = Detection::new(2, bx(32.0, 32.0, 8.0), 1.0, None).unwrap();
        assert_eq!(ncc_displacement(&cur, &prev, &det, 5).unwrap(), Some(Vec2::new(-2.0, 0.0)));
        assert_eq!(brute_force_ncc(&cur, &prev, 32, 32, 4, 5), (-2, 0));
    }

    #[test]
    fn ncc_is_absent_on_flat_frames() {
        let cur = blob_frame(64, 64, 30.0, 30.0);
        let prev = Grid::filled(64, 64, 0.3);
        let det = Detection::new(2, bx(30.0, 30.0, 8.0), 1.0, None).unwrap();
        assert_eq!(ncc_displacement(&cur, &prev, &det, 5).unwrap(), None);
    }

    #[test]
    fn ncc_patch_out_of_bounds_is_an_error() {
        let g = Grid::new(16, 16);
        let det = Detection::new(2, bx(1.0, 8.0, 8.0), 1.0, None).unwrap();
        assert!(matches!(ncc_displacement(&g, &g, &det, 2), Err(Error::OutOfBounds(_))));
    }

    proptest::proptest! {
        #[test]
        fn ncc_is_translation_equivariant(sx in -6i64..6, sy in -6i64..6, mx in -3i64..=3, my in -3i64..=3) {
            let prev = blob_frame(80, 80, 40.0, 40.0);
            let cur = prev.shifted(mx, my, 0.0);
            let det = Detection::new(2, bx(40.0 + mx as f64, 40.0 + my as f64, 8.0), 1.0, None).unwrap();
            let base = ncc_displacement(&cur, &prev, &det, 5).unwrap();
            let det_s = Detection { bbox: det.bbox.translated(Vec2::new(sx as f64, sy as f64)), ..det };
            let moved = ncc_displacement(&cur.shifted(sx, sy, 0.0), &prev.shifted(sx, sy, 0.0), &det_s, 5).unwrap();
            proptest::prop_assert_eq!(base, moved);
            proptest::prop_assert_eq!(base, Some(Vec2::new(-mx as f64, -my as f64)));
        }

        #[test]
        fn heatmap_ignores_ordering(perm_seed in 0u64..1000) {
            let boxes = [bx(5.0, 5.0, 4.0), bx(9.0, 7.0, 6.0), bx(20.0, 15.0, 3.0)];
            let mut shuffled = boxes;
            let k = (perm_seed % 3) as usize;
            shuffled.rotate_left(k);
            if perm_seed % 2 == 0 { shuffled.swap(0, 1); }
            proptest::prop_assert_eq!(
                render_heatmap(&boxes, 24, 24).unwrap(),
                render_heatmap(&shuffled, 24, 24).unwrap()
            );
        }
    }
}
