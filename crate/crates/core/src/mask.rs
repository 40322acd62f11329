//! Binary bone mask and the scripted equivalents of the interactive mask
//! edits: thresholding, connected components, lasso removal, brush erase,
//! and slice-by-slice disk draw/erase.
//!
//! Every edit is a pure function from mask to mask, so an [`EditScript`]
//! replays a whole editing session deterministically.

use std::collections::VecDeque;
use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::{checkpoint_paths, read_sidecar_generic, Volume, VolumeSidecar};

/// A principal axis used for projections and slice addressing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Y,
    Z,
}

/// Voxel adjacency rule for component analysis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Connectivity {
    Six,
    TwentySix,
}

impl Connectivity {
    pub fn from_number(n: u8) -> Option<Self> {
        match n {
            6 => Some(Connectivity::Six),
            26 => Some(Connectivity::TwentySix),
            _ => None,
        }
    }

    fn offsets(self) -> Vec<(i64, i64, i64)> {
        match self {
            Connectivity::Six => vec![
                (1, 0, 0),
                (-1, 0, 0),
                (0, 1, 0),
                (0, -1, 0),
                (0, 0, 1),
                (0, 0, -1),
            ],
            Connectivity::TwentySix => {
                let mut out = Vec::with_capacity(26);
                for dz in -1..=1i64 {
                    for dy in -1..=1i64 {
                        for dx in -1..=1i64 {
                            if (dx, dy, dz) != (0, 0, 0) {
                                out.push((dx, dy, dz));
                            }
                        }
                    }
                }
                out
            }
        }
    }
}

/// Binary voxel grid congruent with its parent [`Volume`].
#[derive(Debug, Clone, PartialEq)]
pub struct Mask {
    pub dims: (usize, usize, usize),
    pub spacing: Vector3<f64>,
    pub origin: Point3<f64>,
    pub bits: Vec<bool>,
}

impl Mask {
    pub fn new_empty(
        dims: (usize, usize, usize),
        spacing: Vector3<f64>,
        origin: Point3<f64>,
    ) -> Self {
        Mask {
            dims,
            spacing,
            origin,
            bits: vec![false; dims.0 * dims.1 * dims.2],
        }
    }

    #[inline]
    pub fn linear_index(&self, i: usize, j: usize, k: usize) -> usize {
        (k * self.dims.1 + j) * self.dims.0 + i
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> bool {
        self.bits[self.linear_index(i, j, k)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, v: bool) {
        let idx = self.linear_index(i, j, k);
        self.bits[idx] = v;
    }

    pub fn count_set(&self) -> usize {
        self.bits.iter().filter(|b| **b).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.bits.iter().any(|b| *b)
    }

    /// World position (mm) of a voxel center.
    pub fn voxel_center(&self, i: usize, j: usize, k: usize) -> Point3<f64> {
        Point3::new(
            self.origin.x + i as f64 * self.spacing.x,
            self.origin.y + j as f64 * self.spacing.y,
            self.origin.z + k as f64 * self.spacing.z,
        )
    }
}

/// Bit set iff `lo <= HU <= hi`.
pub fn threshold(volume: &Volume, lo: i16, hi: i16) -> Result<Mask> {
    if lo > hi {
        return Err(Error::InvalidRange {
            lo: lo as i32,
            hi: hi as i32,
        });
    }
    let bits = volume.scalars.iter().map(|&s| s >= lo && s <= hi).collect();
    Ok(Mask {
        dims: volume.dims,
        spacing: volume.spacing,
        origin: volume.origin,
        bits,
    })
}

/// Component labeling of the set voxels. `labels[voxel] == 0` means
/// background; components are numbered 1.. in order of descending size,
/// ties broken by smallest minimum linear index.
pub struct ComponentLabels {
    pub labels: Vec<u32>,
    pub sizes: Vec<usize>,
}

pub fn connected_components(mask: &Mask, connectivity: Connectivity) -> ComponentLabels {
    let (nx, ny, nz) = mask.dims;
    let offsets = connectivity.offsets();
    let mut labels = vec![0u32; mask.bits.len()];
    // (size, min linear index, provisional label)
    let mut comps: Vec<(usize, usize, u32)> = Vec::new();
    let mut next = 1u32;
    let mut queue = VecDeque::new();

    for start in 0..mask.bits.len() {
        if !mask.bits[start] || labels[start] != 0 {
            continue;
        }
        let label = next;
        next += 1;
        let mut size = 0usize;
        labels[start] = label;
        queue.push_back(start);
        while let Some(idx) = queue.pop_front() {
            size += 1;
            let i = (idx % nx) as i64;
            let j = ((idx / nx) % ny) as i64;
            let k = (idx / (nx * ny)) as i64;
            for &(dx, dy, dz) in &offsets {
                let (ni, nj, nk) = (i + dx, j + dy, k + dz);
                if ni < 0
                    || nj < 0
                    || nk < 0
                    || ni >= nx as i64
                    || nj >= ny as i64
                    || nk >= nz as i64
                {
                    continue;
                }
                let nidx = (nk as usize * ny + nj as usize) * nx + ni as usize;
                if mask.bits[nidx] && labels[nidx] == 0 {
                    labels[nidx] = label;
                    queue.push_back(nidx);
                }
            }
        }
        comps.push((size, start, label));
    }

    // Renumber by descending size, ties by smallest min linear index.
    comps.sort_by(|a, b| b.0.cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut remap = vec![0u32; next as usize];
    for (rank, &(_, _, old)) in comps.iter().enumerate() {
        remap[old as usize] = rank as u32 + 1;
    }
    for l in labels.iter_mut() {
        if *l != 0 {
            *l = remap[*l as usize];
        }
    }
    ComponentLabels {
        labels,
        sizes: comps.iter().map(|c| c.0).collect(),
    }
}

pub fn keep_largest_component(mask: &Mask, connectivity: Connectivity) -> Result<Mask> {
    if mask.is_empty() {
        return Err(Error::EmptyMask);
    }
    let comps = connected_components(mask, connectivity);
    let mut out = mask.clone();
    for (bit, &label) in out.bits.iter_mut().zip(comps.labels.iter()) {
        *bit = label == 1;
    }
    Ok(out)
}

/// Even-odd point-in-polygon, strict interior.
fn point_in_polygon(p: [f64; 2], poly: &[[f64; 2]]) -> bool {
    let mut inside = false;
    let n = poly.len();
    for i in 0..n {
        let a = poly[i];
        let b = poly[(i + 1) % n];
        if (a[1] > p[1]) != (b[1] > p[1]) {
            let x = a[0] + (p[1] - a[1]) / (b[1] - a[1]) * (b[0] - a[0]);
            if p[0] < x {
                inside = !inside;
            }
        }
    }
    inside
}

fn validate_polygon(polygon: &[[f64; 2]]) -> Result<()> {
    let mut distinct: Vec<[f64; 2]> = Vec::new();
    for p in polygon {
        if !distinct.iter().any(|q| q == p) {
            distinct.push(*p);
        }
    }
    if distinct.len() < 3 {
        return Err(Error::DegeneratePolygon);
    }
    Ok(())
}

/// In-plane mm coordinates of a voxel center for a projection along `axis`.
fn project(mask: &Mask, axis: Axis, i: usize, j: usize, k: usize) -> [f64; 2] {
    let c = mask.voxel_center(i, j, k);
    match axis {
        Axis::X => [c.y, c.z],
        Axis::Y => [c.x, c.z],
        Axis::Z => [c.x, c.y],
    }
}

/// Clear every voxel whose projected center lies strictly inside the
/// polygon. The removal beam runs through the full depth along `axis`.
pub fn lasso_remove(mask: &Mask, axis: Axis, polygon: &[[f64; 2]]) -> Result<Mask> {
    validate_polygon(polygon)?;
    let (nx, ny, nz) = mask.dims;
    let mut out = mask.clone();
    // The projected coordinate only depends on the two in-plane indices,
    // so test once per beam and clear the whole column.
    let (du, dv): (usize, usize) = match axis {
        Axis::X => (ny, nz),
        Axis::Y => (nx, nz),
        Axis::Z => (nx, ny),
    };
    let depth = match axis {
        Axis::X => nx,
        Axis::Y => ny,
        Axis::Z => nz,
    };
    for v in 0..dv {
        for u in 0..du {
            let (i, j, k) = match axis {
                Axis::X => (0, u, v),
                Axis::Y => (u, 0, v),
                Axis::Z => (u, v, 0),
            };
            if point_in_polygon(project(mask, axis, i, j, k), polygon) {
                for d in 0..depth {
                    let (i, j, k) = match axis {
                        Axis::X => (d, u, v),
                        Axis::Y => (u, d, v),
                        Axis::Z => (u, v, d),
                    };
                    out.set(i, j, k, false);
                }
            }
        }
    }
    Ok(out)
}

/// Clear voxels whose centers lie within `radius` mm of `center`.
pub fn erase_brush(mask: &Mask, center: Point3<f64>, radius: f64) -> Result<Mask> {
    if radius <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "brush radius must be > 0, got {radius}"
        )));
    }
    let (nx, ny, nz) = mask.dims;
    let mut out = mask.clone();
    let lo = |c: f64, o: f64, s: f64| (((c - radius - o) / s).floor().max(0.0)) as usize;
    let hi = |c: f64, o: f64, s: f64, n: usize| {
        (((c + radius - o) / s).ceil() as i64).clamp(0, n as i64 - 1) as usize
    };
    let r2 = radius * radius;
    for k in lo(center.z, mask.origin.z, mask.spacing.z)
        ..=hi(center.z, mask.origin.z, mask.spacing.z, nz)
    {
        for j in lo(center.y, mask.origin.y, mask.spacing.y)
            ..=hi(center.y, mask.origin.y, mask.spacing.y, ny)
        {
            for i in lo(center.x, mask.origin.x, mask.spacing.x)
                ..=hi(center.x, mask.origin.x, mask.spacing.x, nx)
            {
                if (mask.voxel_center(i, j, k) - center).norm_squared() <= r2 {
                    out.set(i, j, k, false);
                }
            }
        }
    }
    Ok(out)
}

fn disk_apply(
    mask: &Mask,
    axis: Axis,
    slice_index: usize,
    center: [f64; 2],
    radius: f64,
    value: bool,
) -> Result<Mask> {
    if radius <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "disk radius must be > 0, got {radius}"
        )));
    }
    let (nx, ny, nz) = mask.dims;
    let count = match axis {
        Axis::X => nx,
        Axis::Y => ny,
        Axis::Z => nz,
    };
    if slice_index >= count {
        return Err(Error::SliceOutOfRange {
            index: slice_index,
            count,
        });
    }
    let mut out = mask.clone();
    let (du, dv): (usize, usize) = match axis {
        Axis::X => (ny, nz),
        Axis::Y => (nx, nz),
        Axis::Z => (nx, ny),
    };
    let r2 = radius * radius;
    for v in 0..dv {
        for u in 0..du {
            let (i, j, k) = match axis {
                Axis::X => (slice_index, u, v),
                Axis::Y => (u, slice_index, v),
                Axis::Z => (u, v, slice_index),
            };
            let p = project(mask, axis, i, j, k);
            let d2 = (p[0] - center[0]).powi(2) + (p[1] - center[1]).powi(2);
            if d2 <= r2 {
                out.set(i, j, k, value);
            }
        }
    }
    Ok(out)
}

/// Set voxels of one slice whose in-plane center distance to `center` is
/// within `radius`.
pub fn draw_disk(
    mask: &Mask,
    axis: Axis,
    slice_index: usize,
    center: [f64; 2],
    radius: f64,
) -> Result<Mask> {
    disk_apply(mask, axis, slice_index, center, radius, true)
}

/// Clearing counterpart of [`draw_disk`].
pub fn erase_disk(
    mask: &Mask,
    axis: Axis,
    slice_index: usize,
    center: [f64; 2],
    radius: f64,
) -> Result<Mask> {
    disk_apply(mask, axis, slice_index, center, radius, false)
}

/// Clear the connected component containing `seed`, if any.
pub fn remove_component_at(
    mask: &Mask,
    seed: (usize, usize, usize),
    connectivity: Connectivity,
) -> Mask {
    let (nx, ny, nz) = mask.dims;
    if seed.0 >= nx || seed.1 >= ny || seed.2 >= nz || !mask.get(seed.0, seed.1, seed.2) {
        return mask.clone();
    }
    let comps = connected_components(mask, connectivity);
    let target = comps.labels[mask.linear_index(seed.0, seed.1, seed.2)];
    let mut out = mask.clone();
    for (bit, &label) in out.bits.iter_mut().zip(comps.labels.iter()) {
        if label == target {
            *bit = false;
        }
    }
    out
}

/// One scripted mask edit. Serialized as `{"op": "<name>", ...}`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(tag = "op", rename_all = "snake_case", deny_unknown_fields)]
pub enum EditOp {
    LassoRemove {
        axis: Axis,
        polygon: Vec<[f64; 2]>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        note: Option<String>,
    },
    EraseBrush {
        center_mm: [f64; 3],
        radius_mm: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        note: Option<String>,
    },
    DrawDisk {
        axis: Axis,
        slice_index: usize,
        center_mm: [f64; 2],
        radius_mm: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        note: Option<String>,
    },
    EraseDisk {
        axis: Axis,
        slice_index: usize,
        center_mm: [f64; 2],
        radius_mm: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        note: Option<String>,
    },
    KeepLargestComponent {
        #[serde(default, skip_serializing_if = "Option::is_none")]
        note: Option<String>,
    },
    RemoveComponentAt {
        seed_voxel: [usize; 3],
        #[serde(default, skip_serializing_if = "Option::is_none")]
        note: Option<String>,
    },
}

impl EditOp {
    pub fn apply(&self, mask: &Mask, connectivity: Connectivity) -> Result<Mask> {
        match self {
            EditOp::LassoRemove { axis, polygon, .. } => lasso_remove(mask, *axis, polygon),
            EditOp::EraseBrush {
                center_mm,
                radius_mm,
                ..
            } => erase_brush(mask, Point3::from(*center_mm), *radius_mm),
            EditOp::DrawDisk {
                axis,
                slice_index,
                center_mm,
                radius_mm,
                ..
            } => draw_disk(mask, *axis, *slice_index, *center_mm, *radius_mm),
            EditOp::EraseDisk {
                axis,
                slice_index,
                center_mm,
                radius_mm,
                ..
            } => erase_disk(mask, *axis, *slice_index, *center_mm, *radius_mm),
            EditOp::KeepLargestComponent { .. } => keep_largest_component(mask, connectivity),
            EditOp::RemoveComponentAt { seed_voxel, .. } => Ok(remove_component_at(
                mask,
                (seed_voxel[0], seed_voxel[1], seed_voxel[2]),
                connectivity,
            )),
        }
    }
}

/// Ordered, replayable list of mask edits — the interactive session as data.
#[derive(Debug, Clone, Default, Serialize, Deserialize, PartialEq)]
#[serde(transparent)]
pub struct EditScript(pub Vec<EditOp>);

impl EditScript {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&self.0)?)
    }
}

/// Left-to-right composition of the script's ops. The first failing op
/// aborts with its index attached.
pub fn apply_edit_script(
    mask: &Mask,
    script: &EditScript,
    connectivity: Connectivity,
) -> Result<Mask> {
    let mut current = mask.clone();
    for (index, op) in script.0.iter().enumerate() {
        current = op
            .apply(&current, connectivity)
            .map_err(|e| Error::EditScriptOp {
                index,
                source: Box::new(e),
            })?;
    }
    Ok(current)
}

/// Write a mask checkpoint: raw uint8 (0/1) plus `.mask.json` sidecar.
pub fn write_mask(mask: &Mask, path: &Path) -> Result<PathBuf> {
    let (sidecar_path, raw_path, raw_name) = checkpoint_paths(path, "mask")?;
    let bytes: Vec<u8> = mask.bits.iter().map(|&b| b as u8).collect();
    fs::write(&raw_path, &bytes).map_err(|e| Error::io(&raw_path, e))?;
    let sidecar = VolumeSidecar {
        dims: [mask.dims.0, mask.dims.1, mask.dims.2],
        spacing_mm: [mask.spacing.x, mask.spacing.y, mask.spacing.z],
        origin_mm: [mask.origin.x, mask.origin.y, mask.origin.z],
        dtype: "uint8".to_string(),
        data: raw_name,
    };
    let text = serde_json::to_string_pretty(&sidecar)?;
    fs::write(&sidecar_path, text).map_err(|e| Error::io(&sidecar_path, e))?;
    Ok(sidecar_path)
}

pub fn read_mask(sidecar_path: &Path) -> Result<Mask> {
    let (sidecar, data_path) = read_sidecar_generic(sidecar_path)?;
    if sidecar.dtype != "uint8" {
        return Err(Error::SidecarMismatch(format!(
            "expected dtype uint8, got {}",
            sidecar.dtype
        )));
    }
    let count = sidecar.dims[0] * sidecar.dims[1] * sidecar.dims[2];
    let bytes = fs::read(&data_path).map_err(|e| Error::io(&data_path, e))?;
    if bytes.len() as u64 != count as u64 {
        return Err(Error::TruncatedData {
            declared: count as u64,
            found: bytes.len() as u64,
        });
    }
    Ok(Mask {
        dims: (sidecar.dims[0], sidecar.dims[1], sidecar.dims[2]),
        spacing: Vector3::from(sidecar.spacing_mm),
        origin: Point3::from(sidecar.origin_mm),
        bits: bytes.into_iter().map(|b| b != 0).collect(),
    })
}
