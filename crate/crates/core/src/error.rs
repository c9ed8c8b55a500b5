//! Crate-wide error type.

use std::path::PathBuf;

use thiserror::Error;

use crate::voxel::Coord;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: OBJ parse error: {msg}")]
    ObjParse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("malformed mesh/grid file {path}: {msg}")]
    BadFormat { path: PathBuf, msg: String },

    #[error("mesh is empty")]
    EmptyMesh,

    #[error("mesh bounding box has zero extent")]
    ZeroExtent,

    #[error("triangle index {index} out of range (vertex count {vertex_count})")]
    IndexOutOfRange { index: u32, vertex_count: usize },

    #[error("mesh is not normalized: vertex {index} at ({x}, {y}, {z}) lies outside [-0.5, 0.5]^3")]
    NotNormalized { index: usize, x: f64, y: f64, z: f64 },

    #[error("resolution {got} out of range: {msg}")]
    ResolutionOutOfRange { got: u32, msg: String },

    #[error("resolution mismatch: {a} vs {b}")]
    ResolutionMismatch { a: u32, b: u32 },

    #[error("coordinate ({0}, {1}, {2}) out of range for resolution {3}", coord[0], coord[1], coord[2], resolution)]
    CoordOutOfRange { coord: Coord, resolution: u32 },

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("alignment size mismatch: source has {source_len} coords, target has {target_len}")]
    AlignmentSizeMismatch { source_len: usize, target_len: usize },

    #[error("alignment target contains coordinate ({0}, {1}, {2}) absent from source", coord[0], coord[1], coord[2])]
    AlignmentMissingCoord { coord: Coord },

    #[error("alignment target contains duplicate coordinate ({0}, {1}, {2})", coord[0], coord[1], coord[2])]
    AlignmentDuplicateCoord { coord: Coord },

    #[error(
        "containment violation: {count} truth voxel(s) missing from candidates, e.g. {sample:?}"
    )]
    ContainmentViolation { count: usize, sample: Vec<Coord> },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid camera: {0}")]
    InvalidCamera(String),

    #[error("tile grid {grid_n} exceeds image/region dimension {dim}")]
    GridTooLarge { grid_n: u32, dim: u32 },

    #[error("tile {0} lies outside the image")]
    TileOutOfBounds(String),

    #[error("tile cores do not partition the image: {0}")]
    CoreCoverage(String),

    #[error("empty tile list")]
    EmptyTiles,
}

impl Error {
    /// Stable machine-readable code, used by the CLI's error JSON.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Io { source, .. } if source.kind() == std::io::ErrorKind::NotFound => {
                "FILE_NOT_FOUND"
            }
            Error::Io { .. } => "IO_ERROR",
            Error::ObjParse { .. } | Error::BadFormat { .. } => "PARSE_ERROR",
            Error::EmptyMesh => "EMPTY_MESH",
            Error::ZeroExtent => "ZERO_EXTENT",
            Error::IndexOutOfRange { .. } => "INDEX_OUT_OF_RANGE",
            Error::NotNormalized { .. } => "NOT_NORMALIZED",
            Error::ResolutionOutOfRange { .. } => "RESOLUTION_OUT_OF_RANGE",
            Error::ResolutionMismatch { .. } => "RESOLUTION_MISMATCH",
            Error::CoordOutOfRange { .. } => "COORD_OUT_OF_RANGE",
            Error::LengthMismatch { .. } => "LENGTH_MISMATCH",
            Error::AlignmentSizeMismatch { .. }
            | Error::AlignmentMissingCoord { .. }
            | Error::AlignmentDuplicateCoord { .. } => "ALIGNMENT_ERROR",
            Error::ContainmentViolation { .. } => "CONTAINMENT_VIOLATION",
            Error::InvalidArgument(_) => "INVALID_ARGUMENT",
            Error::InvalidCamera(_) => "INVALID_CAMERA",
            Error::GridTooLarge { .. } | Error::TileOutOfBounds(_) | Error::EmptyTiles => {
                "TILE_ERROR"
            }
            Error::CoreCoverage(_) => "COVERAGE_ERROR",
        }
    }
}
