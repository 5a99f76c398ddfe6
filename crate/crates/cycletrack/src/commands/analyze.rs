use std::path::{Path, PathBuf};

use cycletrack_core::eval::{count_correlation, counting_error_curve, dominant_frequency, lowpass, window_count_errors, CountFit, CurvePoint};
use cycletrack_core::Error;
use serde::{Deserialize, Serialize};

use super::*;
use crate::config::RunConfig;
use crate::formats::{parse_count_pairs, parse_velocity_csv, CountSeries};
use crate::svg::{Plot, Series, Style};

#[derive(Debug, Clone, Default)]
pub struct AnalyzeInputs {
    pub velocity: PathBuf,
    /// `frame,gt,hyp` cumulative counts of one video.
    pub counts: Option<PathBuf>,
    /// `hyp,gt` final counts across videos.
    pub pairs: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub fps: f64,
    pub lowpass_cutoff_hz: f64,
    pub band: [f64; 2],
    pub dominant_freq: Option<f64>,
    pub dominant_freq_error: Option<String>,
    pub frames: Vec<u32>,
    pub raw: Vec<f64>,
    pub smoothed: Vec<f64>,
    pub count_error_curve: Vec<CurvePoint>,
    pub window_count_errors: Vec<f64>,
    pub correlation: Option<CountFit>,
    pub correlation_warning: Option<String>,
}

/// Least-squares fit over `(hyp, gt)` pairs, or the reason it was skipped.
pub(crate) fn correlation_or_warning(pairs: &[(f64, f64)]) -> (Option<CountFit>, Option<String>) {
    match count_correlation(pairs) {
        Ok(fit) => (Some(fit), None),
        Err(Error::SeriesTooShort { len, required }) => {
            (None, Some(format!("correlation skipped: {len} count pair(s), need at least {required}")))
        }
        Err(e) => (None, Some(format!("correlation skipped: {e}"))),
    }
}

pub(crate) fn correlation_plot(pairs: &[(f64, f64)], fit: Option<&CountFit>, warning: Option<&str>) -> Plot {
    let mut series = vec![Series::new("videos", "#1f5fa8", Style::Markers, pairs.to_vec())];
    let (lo, hi) = pairs.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.0.min(p.1)), hi.max(p.0.max(p.1))));
    if lo.is_finite() {
        series.push(Series::new("y = x", "#999999", Style::Dashed, vec![(lo, lo), (hi, hi)]));
        if let Some(f) = fit {
            series.push(Series::new("least squares", "#c0392b", Style::Line, vec![(lo, f.slope * lo + f.intercept), (hi, f.slope * hi + f.intercept)]));
        }
    }
    let caption = match (fit, warning) {
        (Some(f), _) => format!("slope {:.3}, intercept {:.2}, gamma {:.4} over {} videos", f.slope, f.intercept, f.gamma, pairs.len()),
        (None, Some(w)) => w.to_string(),
        (None, None) => String::new(),
    };
    Plot {
        title: "Tracker count vs ground-truth count".into(),
        x_label: "tracker count".into(),
        y_label: "ground-truth count".into(),
        caption,
        series,
    }
}

/// Smooths the velocity trace, estimates its dominant frequency and, when
/// counts are given, the counting error curve and count correlation.
/// Writes `analysis.json`, `velocity.svg`, `count_error.svg` and
/// `correlation.svg`.
pub fn analyze(cfg: &RunConfig, inputs: &AnalyzeInputs, dir: &Path) -> AppResult<AnalysisReport> {
    let fps = cfg.scenario.fps;
    let (frames, raw) = parse_velocity_csv(&read_text(&inputs.velocity)?).map_err(|e| AppError::parse(&inputs.velocity, e))?;
    let counts = match &inputs.counts {
        Some(p) => Some(CountSeries::parse(&read_text(p)?).map_err(|e| AppError::parse(p, e))?),
        None => None,
    };
    let pairs = match (&inputs.pairs, &counts) {
        (Some(p), _) => parse_count_pairs(&read_text(p)?).map_err(|e| AppError::parse(p, e))?,
        (None, Some(c)) => c.hyp.last().zip(c.gt.last()).map(|(h, g)| (*h as f64, *g as f64)).into_iter().collect(),
        (None, None) => Vec::new(),
    };

    let smoothed = if raw.is_empty() { Vec::new() } else { lowpass(&raw, fps, cfg.lowpass_cutoff_hz)? };
    let (dominant_freq, dominant_freq_error) = match dominant_frequency(&smoothed, fps, cfg.band()) {
        Ok(f) => (Some(f), None),
        Err(e @ Error::SeriesTooShort { .. }) => return Err(e.into()),
        Err(e) => (None, Some(e.to_string())),
    };
    let (count_error_curve, window_errors) = match &counts {
        Some(c) => (counting_error_curve(&c.gt, &c.hyp, cfg.count_window)?, window_count_errors(&c.gt, &c.hyp, cfg.count_window)?),
        None => (Vec::new(), Vec::new()),
    };
    let (correlation, correlation_warning) = correlation_or_warning(&pairs);

    let report = AnalysisReport {
        fps,
        lowpass_cutoff_hz: cfg.lowpass_cutoff_hz,
        band: cfg.frequency_band,
        dominant_freq,
        dominant_freq_error,
        frames,
        raw,
        smoothed,
        count_error_curve,
        window_count_errors: window_errors,
        correlation,
        correlation_warning,
    };
    create_dir(dir)?;
    write_json(&dir.join(ANALYSIS_FILE), &report)?;

    let xs = report.frames.iter().map(|f| *f as f64);
    let velocity = Plot {
        title: "Mean cell velocity".into(),
        x_label: "frame".into(),
        y_label: "velocity (px/frame)".into(),
        caption: match (report.dominant_freq, &report.dominant_freq_error) {
            (Some(f), _) => format!("dominant frequency {f:.3} Hz ({:.1} beats/min), lowpass {} Hz", f * 60.0, cfg.lowpass_cutoff_hz),
            (None, Some(e)) => format!("no dominant frequency: {e}"),
            (None, None) => String::new(),
        },
        series: vec![
            Series::new("raw", "#aaaaaa", Style::Line, xs.clone().zip(report.raw.iter().copied()).collect()),
            Series::new("lowpass", "#1f5fa8", Style::Line, xs.zip(report.smoothed.iter().copied()).collect()),
        ],
    };
    write_text(&dir.join("velocity.svg"), &velocity.render())?;

    let count_error = Plot {
        title: "Cumulative counting error".into(),
        x_label: "frame".into(),
        y_label: "absolute error (%)".into(),
        caption: match report.count_error_curve.last() {
            Some(p) => format!("error {:.2}% at frame {}, checkpoints every {} frames", p.error_pct, p.frame, cfg.count_window),
            None => "no counts supplied".into(),
        },
        series: vec![Series::new(
            "counting error",
            "#c0392b",
            Style::Line,
            report.count_error_curve.iter().map(|p| (p.frame as f64, p.error_pct)).collect(),
        )],
    };
    write_text(&dir.join("count_error.svg"), &count_error.render())?;

    let corr = correlation_plot(&pairs, report.correlation.as_ref(), report.correlation_warning.as_deref());
    write_text(&dir.join("correlation.svg"), &corr.render())?;
    Ok(report)
}
