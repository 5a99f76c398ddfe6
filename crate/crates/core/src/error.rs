use alloc::string::String;
use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A value violated a domain invariant (box size, probability, ...).
    InvalidInput(String),
    /// A heatmap or image patch would fall outside the grid.
    OutOfBounds(String),
    /// A requested frame is not covered by the data.
    FrameOutOfRange(u32),
    /// Frames must be processed in strictly increasing order.
    FrameRegression { previous: u32, current: u32 },
    ShapeMismatch {
        left: (usize, usize),
        right: (usize, usize),
    },
    NoMatchedCells,
    EmptyGroundTruth,
    EmptyScenario,
    SeriesTooShort { len: usize, required: usize },
    ZeroVariance,
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidInput(msg) => write!(f, "invalid input: {msg}"),
            Error::OutOfBounds(msg) => write!(f, "out of bounds: {msg}"),
            Error::FrameOutOfRange(t) => write!(f, "frame {t} out of range"),
            Error::FrameRegression { previous, current } => {
                write!(f, "frame regression: {current} does not follow {previous}")
            }
            Error::ShapeMismatch { left, right } => write!(
                f,
                "shape mismatch: {}x{} vs {}x{}",
                left.0, left.1, right.0, right.1
            ),
            Error::NoMatchedCells => f.write_str("no matched cells"),
            Error::EmptyGroundTruth => f.write_str("empty ground truth"),
            Error::EmptyScenario => f.write_str("empty scenario"),
            Error::SeriesTooShort { len, required } => {
                write!(f, "series too short: {len} samples, need {required}")
            }
            Error::ZeroVariance => f.write_str("zero variance"),
        }
    }
}

impl core::error::Error for Error {}
