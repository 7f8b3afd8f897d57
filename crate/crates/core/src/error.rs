use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("rle counts sum to {sum}, expected {expected} for a {height}x{width} mask")]
    RleSizeMismatch {
        sum: u64,
        expected: u64,
        height: usize,
        width: usize,
    },

    #[error("invalid mask dimensions {height}x{width}")]
    InvalidDimensions { height: usize, width: usize },

    #[error("dimension mismatch: {left:?} vs {right:?} (height, width)")]
    DimensionMismatch {
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("mask has no set pixels")]
    EmptyMask,

    #[error("invalid bounding box ({x_min}, {y_min}, {x_max}, {y_max})")]
    InvalidBox {
        x_min: u32,
        y_min: u32,
        x_max: u32,
        y_max: u32,
    },

    #[error("polygon needs at least 3 vertices, got {0}")]
    DegeneratePolygon(usize),

    #[error("annotation {annotation_id} references missing image {image_id}")]
    DanglingImage { annotation_id: u64, image_id: u64 },

    #[error("annotation {annotation_id} references missing category {category_id}")]
    DanglingCategory {
        annotation_id: u64,
        category_id: u64,
    },

    #[error("duplicate {kind} id {id}")]
    DuplicateId { kind: &'static str, id: u64 },

    #[error("unknown image id {0}")]
    UnknownImage(u64),

    #[error("fold count k={k} is invalid for {images} images")]
    InvalidFoldCount { k: usize, images: usize },

    #[error("validation fold {val_fold} out of range for k={k}")]
    FoldOutOfRange { val_fold: usize, k: usize },

    #[error("image {image_id} is not assigned to any fold")]
    UnassignedImage { image_id: u64 },

    #[error("augmented image {augmented_id} derives from image {original_id} in validation fold {val_fold}")]
    ValidationLeak {
        augmented_id: u64,
        original_id: u64,
        val_fold: usize,
    },

    #[error("augmented image {0} has no provenance link to an original image")]
    MissingProvenance(u64),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{count} image(s) failed to degrade; first: {first}")]
    DegradeFailures { count: usize, first: String },

    #[error("tuning budget of {0} evaluations exhausted")]
    BudgetExhausted(usize),

    #[error("objective failed at iteration {iteration}: {message}")]
    Objective { iteration: usize, message: String },

    #[error("report shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("{context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },

    #[error("{context}: record {index}: {message}")]
    Schema {
        context: String,
        index: usize,
        message: String,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn json(context: impl Into<String>, source: serde_json::Error) -> Self {
        Error::Json {
            context: context.into(),
            source,
        }
    }
}
