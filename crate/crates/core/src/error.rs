use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("failed to decode {path}: {reason}")]
    Decode { path: PathBuf, reason: String },

    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),

    #[error("depth map contains a non-finite value at pixel ({x}, {y})")]
    NonFiniteDepth { x: usize, y: usize },

    #[error("depth map contains a negative value at pixel ({x}, {y})")]
    NegativeDepth { x: usize, y: usize },

    #[error("invalid raster: {0}")]
    InvalidRaster(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("{name} must be positive, got {value}")]
    NonPositiveInput { name: &'static str, value: f64 },

    #[error("blade count must be 0 (circle) or within 5..=11, got {0}")]
    InvalidBladeCount(u32),

    #[error("highlight knee must lie in [0, 1), got {0}")]
    InvalidKnee(f64),

    #[error("highlight gain must be >= 1, got {0}")]
    InvalidGain(f64),

    #[error("sharpness threshold must lie in (0, 1), got {0}")]
    InvalidThreshold(f64),

    #[error("invalid render config: {0}")]
    InvalidConfig(String),

    #[error("mask ratio must lie in [0, 1], got {0}")]
    InvalidRatio(f64),

    #[error("step {step} outside schedule of {total} steps")]
    StepOutOfRange { step: usize, total: usize },

    #[error("image too small for SSIM: {width}x{height} (needs at least 11x11)")]
    ImageTooSmall { width: usize, height: usize },

    #[error("LPIPS adapter failure: {0}")]
    AdapterFailure(String),

    #[error("LPIPS value missing for scene {0}")]
    MissingScene(String),

    #[error("invalid MOS score {score} from rater {rater_id} on {scene_id}")]
    InvalidScore {
        rater_id: String,
        scene_id: String,
        score: f64,
    },

    #[error("MOS record for {0} does not belong to any method")]
    UnknownScene(String),

    #[error("no MOS records for method {0}")]
    EmptyPanel(String),

    #[error("operator returned {got_width}x{got_height}, expected {want_width}x{want_height}")]
    OperatorDimension {
        want_width: usize,
        want_height: usize,
        got_width: usize,
        got_height: usize,
    },

    #[error("ensemble weights sum to zero")]
    ZeroWeightSum,
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn decode(path: impl Into<PathBuf>, reason: impl ToString) -> Self {
        Error::Decode {
            path: path.into(),
            reason: reason.to_string(),
        }
    }

    pub(crate) fn non_positive(name: &'static str, value: f64) -> Self {
        Error::NonPositiveInput { name, value }
    }
}
