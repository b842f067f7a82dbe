use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("file not found: {0}")]
    FileNotFound(PathBuf),
    #[error("unsupported image format: {0}")]
    UnsupportedFormat(String),
    #[error("corrupt image: {0}")]
    CorruptImage(String),
    #[error("i/o failure: {0}")]
    Io(#[from] std::io::Error),

    #[error("rectangle {x},{y} {w}x{h} exceeds {width}x{height} image")]
    OutOfBounds {
        x: u32,
        y: u32,
        w: u32,
        h: u32,
        width: u32,
        height: u32,
    },
    #[error("polygon has zero area or fewer than 3 vertices")]
    DegeneratePolygon,
    #[error("dimension mismatch: {0}x{1} vs {2}x{3}")]
    DimensionMismatch(u32, u32, u32, u32),
    #[error("invalid dimensions {0}x{1}")]
    InvalidDimensions(u32, u32),

    #[error("gaussian sigma must be positive, got {0}")]
    InvalidSigma(f64),
    #[error("image too small for 3x3 gradients: {0}x{1}")]
    ImageTooSmall(u32, u32),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("edge map contains no edge pixels")]
    EmptyEdgeMap,
    #[error("radius range [{r_min}, {r_max}] too large for {width}x{height} accumulator")]
    RadiusRangeTooLarge {
        r_min: u32,
        r_max: u32,
        width: u32,
        height: u32,
    },
    #[error("no circle candidate with sufficient support")]
    NoCircleFound,

    #[error("region mask is empty")]
    EmptyRegion,
    #[error("histogram mass lies in a single bin")]
    DegenerateHistogram,

    #[error("eye landmarks are degenerate")]
    DegenerateLandmarks,
    #[error("bad annotation: {0}")]
    BadAnnotation(String),

    #[error("manifest parse error: {0}")]
    ManifestParse(String),
    #[error("records contain only one class")]
    SingleClassOnly,
    #[error("malformed ROC curve: {0}")]
    MalformedCurve(String),

    #[error("scene configuration out of bounds: {0}")]
    ConfigOutOfBounds(String),
}
