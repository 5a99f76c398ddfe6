//! Cumulative counting error and count agreement across videos.

use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub frame: u32,
    pub error_pct: f64,
}

/// Absolute percentage error of the cumulative counts at every multiple of
/// `window`. Checkpoints with a zero truth count are skipped.
pub fn counting_error_curve(gt: &[usize], hyp: &[usize], window: usize) -> Result<Vec<CurvePoint>> {
    if gt.len() != hyp.len() {
        return Err(Error::ShapeMismatch { left: (gt.len(), 1), right: (hyp.len(), 1) });
    }
    if window == 0 {
        return Err(Error::InvalidInput("window must be positive".into()));
    }
    Ok((window..=gt.len())
        .step_by(window)
        .filter_map(|t| {
            let (y, x) = (gt[t - 1] as f64, hyp[t - 1] as f64);
            (y > 0.0).then(|| CurvePoint { frame: t as u32, error_pct: 100.0 * (x - y).abs() / y })
        })
        .collect())
}

/// Absolute difference between hypothesis and truth counts added within
/// each complete window.
pub fn window_count_errors(gt: &[usize], hyp: &[usize], window: usize) -> Result<Vec<f64>> {
    if gt.len() != hyp.len() {
        return Err(Error::ShapeMismatch { left: (gt.len(), 1), right: (hyp.len(), 1) });
    }
    if window == 0 {
        return Err(Error::InvalidInput("window must be positive".into()));
    }
    let at = |s: &[usize], t: usize| if t == 0 { 0.0 } else { s[t - 1] as f64 };
    Ok((window..=gt.len())
        .step_by(window)
        .map(|t| ((at(hyp, t) - at(hyp, t - window)) - (at(gt, t) - at(gt, t - window))).abs())
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CountFit {
    pub slope: f64,
    pub intercept: f64,
    pub gamma: f64,
}

/// Least-squares fit `y = slope * x + intercept` over `(x, y)` pairs and
/// the Pearson coefficient.
pub fn count_correlation(pairs: &[(f64, f64)]) -> Result<CountFit> {
    if pairs.len() < 3 {
        return Err(Error::SeriesTooShort { len: pairs.len(), required: 3 });
    }
    let n = pairs.len() as f64;
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (x, y) in pairs {
        sxx += (x - mx) * (x - mx);
        syy += (y - my) * (y - my);
        sxy += (x - mx) * (y - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::ZeroVariance);
    }
    let slope = sxy / sxx;
    Ok(CountFit { slope, intercept: my - slope * mx, gamma: sxy / libm::sqrt(sxx * syy) })
}

/// Pearson coefficient of two equally long series, `None` when either is
/// constant or they are shorter than two samples.
pub fn pearson(a: &[f64], b: &[f64]) -> Option<f64> {
    if a.len() != b.len() || a.len() < 2 {
        return None;
    }
    let n = a.len() as f64;
    let ma = a.iter().sum::<f64>() / n;
    let mb = b.iter().sum::<f64>() / n;
    let (mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        saa += (x - ma) * (x - ma);
        sbb += (y - mb) * (y - mb);
        sab += (x - ma) * (y - mb);
    }
    (saa > 0.0 && sbb > 0.0).then(|| sab / libm::sqrt(saa * sbb))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    #[test]
    fn identical_counts_have_zero_error() {
        let c: Vec<usize> = (1..=200).map(|t| t / 7 + 1).collect();
        let curve = counting_error_curve(&c, &c, 50).unwrap();
        assert_eq!(curve.iter().map(|p| p.frame).collect::<Vec<_>>(), vec![50, 100, 150, 200]);
        assert!(curve.iter().all(|p| p.error_pct == 0.0));
    }

    #[test]
    fn constant_ratio_gives_flat_curve() {
        let gt: Vec<usize> = (1..=300).map(|t| 20 * (t / 10 + 1)).collect();
        let hyp: Vec<usize> = gt.iter().map(|y| y * 105 / 100).collect();
        for p in counting_error_curve(&gt, &hyp, 50).unwrap() {
            assert!((p.error_pct - 5.0).abs() < 1e-9, "{p:?}");
        }
    }

    #[test]
    fn zero_truth_checkpoints_are_skipped() {
        let gt = vec![0usize; 100];
        let hyp = vec![1usize; 100];
        assert!(counting_error_curve(&gt, &hyp, 50).unwrap().is_empty());
        assert!(counting_error_curve(&gt, &hyp[..99], 50).is_err());
    }

    #[test]
    fn window_errors() {
        let gt = vec![1, 2, 3, 4];
        let hyp = vec![1, 1, 3, 5];
        assert_eq!(window_count_errors(&gt, &hyp, 2).unwrap(), vec![1.0, 2.0]);
    }

    #[test]
    fn correlation_cases() {
        let on_diag: Vec<(f64, f64)> = (0..5).map(|i| (i as f64, i as f64)).collect();
        let f = count_correlation(&on_diag).unwrap();
        assert_eq!((f.slope, f.intercept, f.gamma), (1.0, 0.0, 1.0));
        let anti: Vec<(f64, f64)> = (0..5).map(|i| (i as f64, -(i as f64))).collect();
        assert!((count_correlation(&anti).unwrap().gamma + 1.0).abs() < 1e-15);
        assert_eq!(count_correlation(&[(1.0, 2.0), (1.0, 3.0), (1.0, 4.0)]), Err(Error::ZeroVariance));
        assert!(count_correlation(&on_diag[..2]).is_err());
    }

    proptest! {
        #[test]
        fn curve_is_scale_invariant(base in proptest::collection::vec(1usize..50, 100), k in 2usize..9) {
            let gt: Vec<usize> = base.iter().scan(0, |s, v| { *s += v; Some(*s) }).collect();
            let hyp: Vec<usize> = gt.iter().enumerate().map(|(i, v)| v + i % 3).collect();
            let a = counting_error_curve(&gt, &hyp, 25).unwrap();
            let gk: Vec<usize> = gt.iter().map(|v| v * k).collect();
            let hk: Vec<usize> = hyp.iter().map(|v| v * k).collect();
            let b = counting_error_curve(&gk, &hk, 25).unwrap();
            prop_assert_eq!(a.len(), b.len());
            for (p, q) in a.iter().zip(&b) {
                prop_assert!((p.error_pct - q.error_pct).abs() < 1e-9);
            }
        }
    }
}
