use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("malformed frame: {0}")]
    MalformedFrame(String),
    #[error("3D keypoints are required but absent")]
    Missing3D,
    #[error("rotation vector norm {norm} below threshold")]
    DegenerateRotation { norm: f64 },
    #[error("alignment scale {scale} below threshold")]
    DegenerateScale { scale: f64 },
    #[error("palm keypoints are degenerate: {0}")]
    DegeneratePalm(String),
    #[error("zero-length chain segment")]
    ZeroSegment,
    #[error("unknown reference in gesture config: {0}")]
    UnknownReference(String),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("training dataset is empty")]
    EmptyDataset,
    #[error("training dataset contains a single class")]
    SingleClassDataset,
    #[error("no negative examples for calibration")]
    EmptyNegatives,
    #[error("pose parameter {name} = {value} outside its box")]
    OutOfBox { name: String, value: f64 },
    #[error("point behind camera (z = {z})")]
    BehindCamera { z: f64 },
    #[error("fit diverged: reprojection rms {rms_px} px exceeds ceiling {ceiling_px} px")]
    DivergedFit { rms_px: f64, ceiling_px: f64 },
    #[error("timestamp {t_us} does not follow previous timestamp {prev_us}")]
    NonMonotonicTimestamp { prev_us: i64, t_us: i64 },
    #[error("unknown gesture label: {0}")]
    UnknownLabel(String),
    #[error("length mismatch: {0} predictions vs {1} truths")]
    LengthMismatch(usize, usize),
    #[error("empty input")]
    EmptyInput,
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Numerical failures (degenerate geometry, solver trouble) as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::DegenerateRotation { .. }
                | Error::DegenerateScale { .. }
                | Error::DegeneratePalm(_)
                | Error::ZeroSegment
                | Error::BehindCamera { .. }
                | Error::DivergedFit { .. }
        )
    }
}
