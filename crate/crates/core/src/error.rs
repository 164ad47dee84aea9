//! Crate-wide error type.

use alloc::string::String;
use core::fmt;

/// Errors produced by the library.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A point cloud must contain at least one point.
    EmptyCloud,
    /// A coordinate was NaN or infinite.
    NonFinite,
    /// A kNN query asked for more neighbors than the target holds.
    KTooLarge { k: usize, available: usize },
    /// An index referred outside its container.
    IndexOutOfBounds { index: usize, len: usize },
    /// Mismatched argument sizes (point counts, widths, parameter shapes).
    ShapeMismatch(String),
    /// A configuration value violated its documented range.
    InvalidConfig(String),
    /// A cloud point is not a member of any extracted patch.
    UncoveredPoint { index: usize },
    /// A patch does not correspond to the seed it was paired with.
    PatchSeedMismatch { slot: usize },
    /// Interpolation time outside `[0, 1]`.
    TimeOutOfRange(f64),
    /// Trajectory diagnostics need at least one moving point.
    DegenerateTrajectory,
    /// The cloud is smaller than the configured patch size.
    CloudTooSmall { points: usize, patch_k: usize },
    /// Training sample with coincident endpoints (zero noise span).
    DegenerateSample,
    /// A training stage was started without the weights it builds on.
    MissingPrerequisite(String),
    /// Model bytes did not start with the expected magic.
    BadMagic,
    /// Model file version not understood by this build.
    UnsupportedVersion(u32),
    /// Model bytes ended before the declared content.
    Truncated,
    /// Structurally invalid model content.
    Malformed(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::EmptyCloud => write!(f, "point cloud is empty"),
            Error::NonFinite => write!(f, "coordinate is NaN or infinite"),
            Error::KTooLarge { k, available } => {
                write!(f, "k = {k} exceeds the {available} available points")
            }
            Error::IndexOutOfBounds { index, len } => {
                write!(f, "index {index} out of bounds for length {len}")
            }
            Error::ShapeMismatch(what) => write!(f, "shape mismatch: {what}"),
            Error::InvalidConfig(what) => write!(f, "invalid configuration: {what}"),
            Error::UncoveredPoint { index } => {
                write!(f, "point {index} is not covered by any patch")
            }
            Error::PatchSeedMismatch { slot } => {
                write!(f, "patch {slot} was not extracted from its paired seed")
            }
            Error::TimeOutOfRange(t) => write!(f, "time {t} outside [0, 1]"),
            Error::DegenerateTrajectory => write!(f, "degenerate trajectory: no point moved"),
            Error::CloudTooSmall { points, patch_k } => {
                write!(f, "cloud has {points} points, fewer than patch size {patch_k}")
            }
            Error::DegenerateSample => write!(f, "degenerate sample: X0 equals X1"),
            Error::MissingPrerequisite(what) => write!(f, "{what}"),
            Error::BadMagic => write!(f, "bad magic: not a model file"),
            Error::UnsupportedVersion(v) => write!(f, "unsupported model file version {v}"),
            Error::Truncated => write!(f, "model file is truncated"),
            Error::Malformed(what) => write!(f, "malformed model file: {what}"),
        }
    }
}

impl core::error::Error for Error {}
