use std::path::PathBuf;

use thiserror::Error;

/// Errors surfaced by the pipeline kernels.
#[derive(Debug, Error)]
pub enum Error {
    // --- volume I/O ---
    #[error("unsupported transfer syntax: {0} (only explicit-VR little-endian uncompressed is supported)")]
    UnsupportedTransferSyntax(String),
    #[error("inconsistent slice geometry: {0}")]
    InconsistentGeometry(String),
    #[error("missing required DICOM tag ({group:04X},{element:04X})")]
    MissingRequiredTag { group: u16, element: u16 },
    #[error(
        "non-uniform slice spacing: gap {gap} mm deviates more than 10% from median {median} mm"
    )]
    NonUniformSliceSpacing { gap: f64, median: f64 },
    #[error("malformed DICOM file {path}: {reason}")]
    MalformedDicom { path: PathBuf, reason: String },
    #[error("sidecar mismatch: {0}")]
    SidecarMismatch(String),
    #[error("truncated data file: declared {declared} bytes, found {found}")]
    TruncatedData { declared: u64, found: u64 },

    // --- segmentation ---
    #[error("invalid threshold range: lo {lo} > hi {hi}")]
    InvalidRange { lo: i32, hi: i32 },
    #[error("degenerate polygon: need at least 3 distinct vertices")]
    DegeneratePolygon,
    #[error("slice index {index} out of range (axis has {count} slices)")]
    SliceOutOfRange { index: usize, count: usize },
    #[error("mask is empty")]
    EmptyMask,
    #[error("edit script op {index} failed: {source}")]
    EditScriptOp {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    // --- isosurface ---
    #[error("negative smoothing sigma: {0}")]
    NegativeSigma(f64),
    #[error("iso value {0} outside (0, 1)")]
    InvalidIso(f64),

    // --- mesh core ---
    #[error("malformed STL: {0}")]
    MalformedStl(String),
    #[error("malformed OBJ: {0}")]
    MalformedObj(String),
    #[error("non-finite coordinate in mesh data")]
    NonFiniteCoordinate,
    #[error("non-manifold boundary: vertex {vertex} has {count} incident boundary edges")]
    NonManifoldBoundary { vertex: usize, count: usize },

    // --- repair ---
    #[error("invalid boundary loop (stale after prior edits)")]
    InvalidLoop,
    #[error("edge ({0}, {1}) is not a boundary edge")]
    NotBoundaryEdge(usize, usize),
    #[error("bridge edges share vertex {0}")]
    SharedVertex(usize),
    #[error("no triangles within radius of seed; nothing removed")]
    NothingRemoved,

    // --- refine ---
    #[error("non-manifold input mesh: {0}")]
    NonManifoldInput(String),
    #[error("invalid lambda/mu: {0}")]
    InvalidLambda(String),

    // --- shape ---
    #[error("plane normal is not unit length (|n| = {0})")]
    NonUnitNormal(f64),
    #[error("cap=true requires a watertight input mesh")]
    CapRequiresWatertight,

    // --- printcheck ---
    #[error("mesh is not watertight; wall thickness is undefined")]
    NotWatertight,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
