//! Declarative pipeline configuration: the whole workflow as one JSON
//! document, stages in the fixed legal order
//! segment -> edit -> extract -> [repair|refine|shape]* -> check.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use cranioforge_core::io::StlFormat;
use cranioforge_core::printcheck::PrintConfig;
use cranioforge_core::shape::KeepSide;
use cranioforge_core::EditScript;

use crate::CliError;

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub input: InputSpec,
    pub threshold: ThresholdSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub edit_script: Option<EditScriptSpec>,
    /// Voxel adjacency for component ops: 6 or 26 (default).
    #[serde(default = "default_connectivity")]
    pub connectivity: u8,
    #[serde(default)]
    pub extract: ExtractSpec,
    /// Ordered repair / refine / shape steps applied to the mesh.
    #[serde(default)]
    pub mesh_ops: Vec<MeshOp>,
    #[serde(default)]
    pub printcheck: PrintConfig,
    #[serde(default)]
    pub outputs: OutputSpec,
}

fn default_connectivity() -> u8 {
    26
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum InputSpec {
    DicomDir(PathBuf),
    RawVolume(PathBuf),
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ThresholdSpec {
    pub lo: i16,
    pub hi: i16,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum EditScriptSpec {
    Path(PathBuf),
    Inline(EditScript),
}

impl EditScriptSpec {
    pub fn load(&self) -> Result<EditScript, CliError> {
        match self {
            EditScriptSpec::Inline(script) => Ok(script.clone()),
            EditScriptSpec::Path(path) => {
                let text = fs::read_to_string(path)
                    .map_err(|e| CliError::bad_input(format!("{}: {e}", path.display())))?;
                EditScript::from_json(&text).map_err(CliError::from)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExtractSpec {
    pub sigma: f64,
    pub iso: f64,
}

impl Default for ExtractSpec {
    fn default() -> Self {
        ExtractSpec {
            sigma: 0.0,
            iso: 0.5,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, tag = "op", rename_all = "snake_case")]
pub enum MeshOp {
    FillHoles {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        max_perimeter: Option<f64>,
    },
    RemoveRegion {
        seed_mm: [f64; 3],
        radius_mm: f64,
    },
    RefillRegion {
        seed_mm: [f64; 3],
        radius_mm: f64,
    },
    Decimate {
        target_triangles: usize,
    },
    Relax {
        iterations: usize,
        lambda: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        mu: Option<f64>,
    },
    Remesh {
        target_edge_mm: f64,
        iterations: usize,
    },
    PlaneCut {
        point_mm: [f64; 3],
        normal: [f64; 3],
        keep: KeepSide,
        cap: bool,
    },
    BrushDisplace {
        center_mm: [f64; 3],
        radius_mm: f64,
        offset_mm: f64,
    },
}

impl MeshOp {
    pub fn name(&self) -> &'static str {
        match self {
            MeshOp::FillHoles { .. } => "fill_holes",
            MeshOp::RemoveRegion { .. } => "remove_region",
            MeshOp::RefillRegion { .. } => "refill_region",
            MeshOp::Decimate { .. } => "decimate",
            MeshOp::Relax { .. } => "relax",
            MeshOp::Remesh { .. } => "remesh",
            MeshOp::PlaneCut { .. } => "plane_cut",
            MeshOp::BrushDisplace { .. } => "brush_displace",
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stl: Option<PathBuf>,
    #[serde(default = "default_stl_format")]
    pub stl_format: StlFormat,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub obj: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<PathBuf>,
}

fn default_stl_format() -> StlFormat {
    StlFormat::Binary
}

pub fn load_config(path: &Path) -> Result<PipelineConfig, CliError> {
    let text = fs::read_to_string(path)
        .map_err(|e| CliError::bad_input(format!("{}: {e}", path.display())))?;
    serde_json::from_str(&text).map_err(|e| {
        CliError::bad_input(format!("{}: invalid pipeline config: {e}", path.display()))
    })
}
