//! Tracking metrics, counting analytics and velocity spectra.

pub mod assignment;
pub mod counting;
pub mod mot;
pub mod spectral;

pub use assignment::min_cost_assignment;
pub use counting::{count_correlation, counting_error_curve, pearson, window_count_errors, CountFit, CurvePoint};
pub use mot::{clear_mot, id_metrics, FrameAssignment, IdMetrics, MetricsReport};
pub use spectral::{analyze_velocity, dominant_frequency, lowpass, VelocityAnalysis, DEFAULT_BAND};

/// IoU needed for a hypothesis box to count as a hit.
pub const DEFAULT_IOU: f64 = 0.5;
