//! Velocity smoothing and pulse-rate estimation.

use alloc::format;
use alloc::vec::Vec;
use core::f64::consts::PI;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Search band used when none is given, in Hz.
pub const DEFAULT_BAND: (f64, f64) = (0.5, 3.0);
/// Frequency grid refinement over the plain DFT bin spacing.
const OVERSAMPLE: f64 = 8.0;

fn causal_average(x: &[f64], window: usize) -> Vec<f64> {
    let mut out = Vec::with_capacity(x.len());
    let mut sum = x[0] * window as f64;
    for i in 0..x.len() {
        let leaving = if i >= window { x[i - window] } else { x[0] };
        sum += x[i] - leaving;
        out.push(sum / window as f64);
    }
    out
}

/// Moving average of `round(fps / (2 cutoff))` samples run forward and then
/// backward, so the result has no phase shift. Edges replicate the end
/// samples.
pub fn lowpass(series: &[f64], fps: f64, cutoff_hz: f64) -> Result<Vec<f64>> {
    if !(fps > 0.0) || !(cutoff_hz > 0.0) || cutoff_hz >= fps / 2.0 {
        return Err(Error::InvalidInput(format!("cutoff {cutoff_hz} Hz must lie in (0, fps/2)")));
    }
    if series.is_empty() {
        return Ok(Vec::new());
    }
    let window = (libm::round(fps / (2.0 * cutoff_hz)) as usize).max(1);
    let mut y = causal_average(series, window);
    y.reverse();
    let mut z = causal_average(&y, window);
    z.reverse();
    Ok(z)
}

/// Minimum series length for [`dominant_frequency`]: two periods of the
/// lowest frequency in the band.
pub fn min_series_len(fps: f64, band_low: f64) -> usize {
    libm::ceil(2.0 * fps / band_low) as usize
}

fn magnitude_at(x: &[f64], fps: f64, f: f64) -> f64 {
    let w = 2.0 * PI * f / fps;
    let (mut re, mut im) = (0.0, 0.0);
    for (k, v) in x.iter().enumerate() {
        let ph = w * k as f64;
        re += v * libm::cos(ph);
        im -= v * libm::sin(ph);
    }
    libm::sqrt(re * re + im * im)
}

/// Strongest frequency inside `band` of a Hann-windowed, mean-removed
/// series, refined by a parabola through the log magnitudes of the peak
/// and its two neighbours.
pub fn dominant_frequency(series: &[f64], fps: f64, band: (f64, f64)) -> Result<f64> {
    let (lo, hi) = band;
    if !(fps > 0.0) || !(lo > 0.0) || !(hi > lo) || hi >= fps / 2.0 {
        return Err(Error::InvalidInput(format!("band [{lo}, {hi}] Hz at {fps} fps")));
    }
    let required = min_series_len(fps, lo);
    if series.len() < required {
        return Err(Error::SeriesTooShort { len: series.len(), required });
    }
    let n = series.len();
    let mean = series.iter().sum::<f64>() / n as f64;
    let windowed: Vec<f64> = series
        .iter()
        .enumerate()
        .map(|(k, v)| (v - mean) * (0.5 - 0.5 * libm::cos(2.0 * PI * k as f64 / (n - 1) as f64)))
        .collect();
    if windowed.iter().all(|v| v.abs() < 1e-12) {
        return Err(Error::ZeroVariance);
    }
    let df = fps / (OVERSAMPLE * n as f64);
    let first = libm::floor(lo / df) as i64;
    let last = libm::ceil(hi / df) as i64;
    let freqs: Vec<f64> = (first - 1..=last + 1).map(|k| k as f64 * df).collect();
    let mags: Vec<f64> = freqs.iter().map(|f| magnitude_at(&windowed, fps, *f)).collect();
    let mut best = None;
    for i in 1..freqs.len() - 1 {
        if freqs[i] >= lo && freqs[i] <= hi && best.is_none_or(|b: usize| mags[i] > mags[b]) {
            best = Some(i);
        }
    }
    let i = best.ok_or_else(|| Error::InvalidInput("empty band".into()))?;
    let l = |v: f64| libm::log(v.max(1e-300));
    let (a, b, c) = (l(mags[i - 1]), l(mags[i]), l(mags[i + 1]));
    let denom = a - 2.0 * b + c;
    let delta = if denom < 0.0 { (0.5 * (a - c) / denom).clamp(-0.5, 0.5) } else { 0.0 };
    Ok((freqs[i] + delta * df).clamp(lo, hi))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VelocityAnalysis {
    pub raw: Vec<f64>,
    pub smoothed: Vec<f64>,
    /// `None` when the trace is too short or flat to carry a frequency.
    pub dominant_freq: Option<f64>,
    pub window_count_errors: Vec<f64>,
}

pub fn analyze_velocity(raw: &[f64], fps: f64, cutoff_hz: f64, band: (f64, f64), window_count_errors: Vec<f64>) -> Result<VelocityAnalysis> {
    let smoothed = lowpass(raw, fps, cutoff_hz)?;
    let dominant_freq = dominant_frequency(&smoothed, fps, band).ok();
    Ok(VelocityAnalysis { raw: raw.to_vec(), smoothed, dominant_freq, window_count_errors })
}
