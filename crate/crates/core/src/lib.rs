//! Core kernels for turning a CT volume of bone into a validated,
//! watertight, printable triangle mesh: volume I/O, mask segmentation and
//! editing, surface extraction, repair, refinement, deliberate shaping,
//! and printability checks.

pub mod bvh;
pub mod dicom;
pub mod error;
pub mod io;
pub mod isosurface;
pub mod mask;
pub mod mesh;
pub mod primitives;
pub mod printcheck;
pub mod refine;
pub mod repair;
pub mod shape;
pub mod volume;

pub use error::{Error, Result};
pub use mask::{Connectivity, EditOp, EditScript, Mask};
pub use mesh::{BoundaryLoop, TriMesh, ValidationResult};
pub use volume::Volume;
