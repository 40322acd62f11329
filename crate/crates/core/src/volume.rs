//! Canonical CT volume representation and the raw-plus-sidecar checkpoint
//! container.
//!
//! The checkpoint container is deliberately simple: a flat little-endian
//! scalar file plus a small JSON sidecar describing dims/spacing/origin.
//! Round trips are bit-exact, which is what the pipeline's determinism
//! guarantees rest on.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A 3D scalar grid of CT intensities in Hounsfield units.
///
/// Scalars are stored x-fastest, then y, then z. `origin` is the world
/// position (mm) of the center of voxel (0,0,0).
#[derive(Debug, Clone, PartialEq)]
pub struct Volume {
    pub dims: (usize, usize, usize),
    pub spacing: Vector3<f64>,
    pub origin: Point3<f64>,
    pub scalars: Vec<i16>,
}

impl Volume {
    pub fn new(
        dims: (usize, usize, usize),
        spacing: Vector3<f64>,
        origin: Point3<f64>,
        scalars: Vec<i16>,
    ) -> Result<Self> {
        if dims.0 < 1 || dims.1 < 1 || dims.2 < 1 {
            return Err(Error::InconsistentGeometry(format!(
                "all dims must be >= 1, got {dims:?}"
            )));
        }
        if spacing.x <= 0.0 || spacing.y <= 0.0 || spacing.z <= 0.0 {
            return Err(Error::InconsistentGeometry(format!(
                "all spacing components must be > 0, got {spacing:?}"
            )));
        }
        let count = dims.0 * dims.1 * dims.2;
        if scalars.len() != count {
            return Err(Error::InconsistentGeometry(format!(
                "scalar count {} != nx*ny*nz = {count}",
                scalars.len()
            )));
        }
        Ok(Volume {
            dims,
            spacing,
            origin,
            scalars,
        })
    }

    pub fn voxel_count(&self) -> usize {
        self.dims.0 * self.dims.1 * self.dims.2
    }

    #[inline]
    pub fn linear_index(&self, i: usize, j: usize, k: usize) -> usize {
        (k * self.dims.1 + j) * self.dims.0 + i
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> i16 {
        self.scalars[self.linear_index(i, j, k)]
    }

    /// World position (mm) of a voxel index; indices may be fractional.
    pub fn voxel_to_world(&self, index: (f64, f64, f64)) -> Point3<f64> {
        Point3::new(
            self.origin.x + index.0 * self.spacing.x,
            self.origin.y + index.1 * self.spacing.y,
            self.origin.z + index.2 * self.spacing.z,
        )
    }

    /// Inverse of [`voxel_to_world`]; result may be fractional or out of range.
    pub fn world_to_voxel(&self, p: Point3<f64>) -> (f64, f64, f64) {
        (
            (p.x - self.origin.x) / self.spacing.x,
            (p.y - self.origin.y) / self.spacing.y,
            (p.z - self.origin.z) / self.spacing.z,
        )
    }
}

/// JSON sidecar describing a raw checkpoint file.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct VolumeSidecar {
    pub dims: [usize; 3],
    pub spacing_mm: [f64; 3],
    pub origin_mm: [f64; 3],
    pub dtype: String,
    pub data: String,
}

pub(crate) fn read_sidecar(path: &Path) -> Result<(VolumeSidecar, PathBuf)> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let sidecar: VolumeSidecar = serde_json::from_str(&text)
        .map_err(|e| Error::SidecarMismatch(format!("{}: {e}", path.display())))?;
    let data_path = path
        .parent()
        .unwrap_or_else(|| Path::new("."))
        .join(&sidecar.data);
    Ok((sidecar, data_path))
}

/// Read a `<name>.vol.json` + raw pair back into a [`Volume`].
pub fn read_raw_volume(sidecar_path: &Path) -> Result<Volume> {
    let (sidecar, data_path) = read_sidecar(sidecar_path)?;
    if sidecar.dtype != "int16le" {
        return Err(Error::SidecarMismatch(format!(
            "expected dtype int16le, got {}",
            sidecar.dtype
        )));
    }
    let count = sidecar.dims[0] * sidecar.dims[1] * sidecar.dims[2];
    let bytes = fs::read(&data_path).map_err(|e| Error::io(&data_path, e))?;
    let declared = (count * 2) as u64;
    if bytes.len() as u64 != declared {
        return Err(Error::TruncatedData {
            declared,
            found: bytes.len() as u64,
        });
    }
    let scalars = bytes
        .chunks_exact(2)
        .map(|c| i16::from_le_bytes([c[0], c[1]]))
        .collect();
    Volume::new(
        (sidecar.dims[0], sidecar.dims[1], sidecar.dims[2]),
        Vector3::from(sidecar.spacing_mm),
        Point3::from(sidecar.origin_mm),
        scalars,
    )
}

/// Write a [`Volume`] as `<stem>.vol.json` + `<stem>.vol.raw`.
///
/// `path` names the sidecar; the raw file sits next to it. Returns the
/// sidecar path actually written.
pub fn write_raw_volume(volume: &Volume, path: &Path) -> Result<PathBuf> {
    let (sidecar_path, raw_path, raw_name) = checkpoint_paths(path, "vol")?;
    let mut bytes = Vec::with_capacity(volume.scalars.len() * 2);
    for s in &volume.scalars {
        bytes.extend_from_slice(&s.to_le_bytes());
    }
    fs::write(&raw_path, &bytes).map_err(|e| Error::io(&raw_path, e))?;
    let sidecar = VolumeSidecar {
        dims: [volume.dims.0, volume.dims.1, volume.dims.2],
        spacing_mm: [volume.spacing.x, volume.spacing.y, volume.spacing.z],
        origin_mm: [volume.origin.x, volume.origin.y, volume.origin.z],
        dtype: "int16le".to_string(),
        data: raw_name,
    };
    let text = serde_json::to_string_pretty(&sidecar)?;
    fs::write(&sidecar_path, text).map_err(|e| Error::io(&sidecar_path, e))?;
    Ok(sidecar_path)
}

/// Resolve `<stem>.<kind>.json` / `<stem>.<kind>.raw` from a path that may
/// carry the full suffix already.
pub(crate) fn checkpoint_paths(path: &Path, kind: &str) -> Result<(PathBuf, PathBuf, String)> {
    let name = path
        .file_name()
        .and_then(|n| n.to_str())
        .ok_or_else(|| Error::SidecarMismatch(format!("bad path {}", path.display())))?;
    let json_suffix = format!(".{kind}.json");
    let stem = name.strip_suffix(json_suffix.as_str()).unwrap_or(name);
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let raw_name = format!("{stem}.{kind}.raw");
    Ok((
        dir.join(format!("{stem}.{kind}.json")),
        dir.join(&raw_name),
        raw_name,
    ))
}

pub(crate) use read_sidecar as read_sidecar_generic;

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_volume() -> Volume {
        Volume::new(
            (2, 2, 2),
            Vector3::new(1.0, 1.0, 1.0),
            Point3::new(0.0, 0.0, 0.0),
            (0..8).map(|v| v as i16).collect(),
        )
        .unwrap()
    }

    #[test]
    fn voxel_to_world_at_origin() {
        let v = sample_volume();
        assert_eq!(v.voxel_to_world((0.0, 0.0, 0.0)), v.origin);
    }

    #[test]
    fn voxel_to_world_unit_spacing() {
        let v = sample_volume();
        let p = v.voxel_to_world((3.0, 2.0, 1.0));
        assert_eq!(p, Point3::new(3.0, 2.0, 1.0));
    }

    #[test]
    fn world_voxel_roundtrip() {
        let v = Volume::new(
            (2, 2, 2),
            Vector3::new(0.31, 1.7, 2.25),
            Point3::new(-4.0, 12.5, 0.125),
            vec![0; 8],
        )
        .unwrap();
        for idx in [(0.5, 1.25, -3.0), (7.0, 0.0, 2.5), (-1.5, 4.75, 9.0)] {
            let back = v.world_to_voxel(v.voxel_to_world(idx));
            assert!((back.0 - idx.0).abs() < 1e-9);
            assert!((back.1 - idx.1).abs() < 1e-9);
            assert!((back.2 - idx.2).abs() < 1e-9);
        }
    }

    #[test]
    fn raw_roundtrip_is_identity() {
        let dir = tempfile::tempdir().unwrap();
        let v = sample_volume();
        let sidecar = write_raw_volume(&v, &dir.path().join("ck")).unwrap();
        let back = read_raw_volume(&sidecar).unwrap();
        assert_eq!(back, v);
    }

    #[test]
    fn raw_byte_layout() {
        // 2x2x2 volume with scalars 0..7 -> 16 bytes little-endian.
        let dir = tempfile::tempdir().unwrap();
        let v = sample_volume();
        write_raw_volume(&v, &dir.path().join("ck")).unwrap();
        let bytes = fs::read(dir.path().join("ck.vol.raw")).unwrap();
        let expected: Vec<u8> = vec![
            0, 0, 1, 0, 2, 0, 3, 0, //
            4, 0, 5, 0, 6, 0, 7, 0,
        ];
        assert_eq!(bytes, expected);
    }

    #[test]
    fn truncated_data_detected() {
        let dir = tempfile::tempdir().unwrap();
        let v = sample_volume();
        let sidecar = write_raw_volume(&v, &dir.path().join("ck")).unwrap();
        // Shrink the raw file to half the declared voxels.
        let raw = dir.path().join("ck.vol.raw");
        let bytes = fs::read(&raw).unwrap();
        fs::write(&raw, &bytes[..8]).unwrap();
        match read_raw_volume(&sidecar) {
            Err(Error::TruncatedData { declared, found }) => {
                assert_eq!(declared, 16);
                assert_eq!(found, 8);
            }
            other => panic!("expected TruncatedData, got {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_dims() {
        assert!(Volume::new(
            (0, 1, 1),
            Vector3::new(1.0, 1.0, 1.0),
            Point3::origin(),
            vec![]
        )
        .is_err());
    }
}
