//! Python bindings for the cranioforge pipeline: volume I/O, segmentation,
//! surface extraction, repair, refinement, shaping, and printability checks.

use std::path::PathBuf;

use nalgebra::{Point3, Vector3};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use cranioforge_core as core;
use cranioforge_core::printcheck::PrintConfig;
use cranioforge_core::refine::RelaxMode;
use cranioforge_core::shape::KeepSide;
use cranioforge_core::{Connectivity, EditScript, Mask, TriMesh, Volume};

fn err(e: core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn point(p: [f64; 3]) -> Point3<f64> {
    Point3::new(p[0], p[1], p[2])
}

fn connectivity(n: u8) -> PyResult<Connectivity> {
    Connectivity::from_number(n)
        .ok_or_else(|| PyValueError::new_err(format!("connectivity must be 6 or 26, got {n}")))
}

/// CT scalar grid in Hounsfield units.
#[pyclass(name = "Volume", skip_from_py_object)]
#[derive(Clone)]
struct PyVolume {
    inner: Volume,
}

#[pymethods]
impl PyVolume {
    #[new]
    fn new(
        dims: (usize, usize, usize),
        spacing: [f64; 3],
        origin: [f64; 3],
        scalars: Vec<i16>,
    ) -> PyResult<Self> {
        let inner = Volume::new(
            dims,
            Vector3::new(spacing[0], spacing[1], spacing[2]),
            point(origin),
            scalars,
        )
        .map_err(err)?;
        Ok(PyVolume { inner })
    }

    /// Load a raw volume described by its JSON sidecar.
    #[staticmethod]
    fn from_raw(sidecar_path: PathBuf) -> PyResult<Self> {
        let inner = core::volume::read_raw_volume(&sidecar_path).map_err(err)?;
        Ok(PyVolume { inner })
    }

    /// Load a single-frame CT DICOM series from a directory.
    #[staticmethod]
    fn from_dicom_dir(directory: PathBuf) -> PyResult<Self> {
        let inner = core::dicom::read_dicom_series(&directory).map_err(err)?;
        Ok(PyVolume { inner })
    }

    #[getter]
    fn dims(&self) -> (usize, usize, usize) {
        self.inner.dims
    }

    #[getter]
    fn spacing(&self) -> [f64; 3] {
        self.inner.spacing.into()
    }

    #[getter]
    fn origin(&self) -> [f64; 3] {
        self.inner.origin.coords.into()
    }

    fn get(&self, i: usize, j: usize, k: usize) -> i16 {
        self.inner.get(i, j, k)
    }

    fn __repr__(&self) -> String {
        format!(
            "Volume(dims={:?}, spacing={:?})",
            self.inner.dims,
            <[f64; 3]>::from(self.inner.spacing)
        )
    }
}

/// Binary voxel grid congruent with its parent volume.
#[pyclass(name = "Mask", skip_from_py_object)]
#[derive(Clone)]
struct PyMask {
    inner: Mask,
}

#[pymethods]
impl PyMask {
    #[getter]
    fn dims(&self) -> (usize, usize, usize) {
        self.inner.dims
    }

    fn count_set(&self) -> usize {
        self.inner.count_set()
    }

    fn get(&self, i: usize, j: usize, k: usize) -> bool {
        self.inner.get(i, j, k)
    }

    fn set(&mut self, i: usize, j: usize, k: usize, v: bool) {
        self.inner.set(i, j, k, v);
    }

    /// Apply a JSON edit script (lasso, brush, component ops) and return
    /// the edited mask.
    #[pyo3(signature = (script_json, connectivity=26))]
    fn apply_edit_script(&self, script_json: &str, connectivity: u8) -> PyResult<Self> {
        let script = EditScript::from_json(script_json).map_err(err)?;
        let conn = crate::connectivity(connectivity)?;
        let inner = core::mask::apply_edit_script(&self.inner, &script, conn).map_err(err)?;
        Ok(PyMask { inner })
    }

    #[pyo3(signature = (connectivity=26))]
    fn keep_largest_component(&self, connectivity: u8) -> PyResult<Self> {
        let conn = crate::connectivity(connectivity)?;
        let inner = core::mask::keep_largest_component(&self.inner, conn).map_err(err)?;
        Ok(PyMask { inner })
    }

    fn __repr__(&self) -> String {
        format!(
            "Mask(dims={:?}, set={})",
            self.inner.dims,
            self.inner.count_set()
        )
    }
}

/// Indexed triangle mesh in millimeters.
#[pyclass(name = "Mesh", skip_from_py_object)]
#[derive(Clone)]
struct PyMesh {
    inner: TriMesh,
}

#[pymethods]
impl PyMesh {
    #[new]
    fn new(vertices: Vec<[f64; 3]>, triangles: Vec<[usize; 3]>) -> PyResult<Self> {
        let inner =
            TriMesh::new(vertices.into_iter().map(point).collect(), triangles).map_err(err)?;
        Ok(PyMesh { inner })
    }

    #[staticmethod]
    #[pyo3(signature = (path, weld_tolerance=1e-9))]
    fn load_stl(path: PathBuf, weld_tolerance: f64) -> PyResult<Self> {
        let inner = core::io::read_stl_mesh(&path, weld_tolerance).map_err(err)?;
        Ok(PyMesh { inner })
    }

    #[staticmethod]
    fn load_obj(path: PathBuf) -> PyResult<Self> {
        let inner = core::io::read_obj(&path).map_err(err)?;
        Ok(PyMesh { inner })
    }

    #[pyo3(signature = (path, format="binary"))]
    fn save_stl(&self, path: PathBuf, format: &str) -> PyResult<()> {
        let fmt = match format {
            "binary" => core::io::StlFormat::Binary,
            "ascii" => core::io::StlFormat::Ascii,
            other => {
                return Err(PyValueError::new_err(format!(
                    "stl format must be 'binary' or 'ascii', got {other:?}"
                )))
            }
        };
        core::io::write_stl(&self.inner, &path, fmt).map_err(err)
    }

    fn save_obj(&self, path: PathBuf) -> PyResult<()> {
        core::io::write_obj(&self.inner, &path).map_err(err)
    }

    #[getter]
    fn vertex_count(&self) -> usize {
        self.inner.vertices.len()
    }

    #[getter]
    fn triangle_count(&self) -> usize {
        self.inner.triangles.len()
    }

    fn vertices(&self) -> Vec<[f64; 3]> {
        self.inner
            .vertices
            .iter()
            .map(|p| p.coords.into())
            .collect()
    }

    fn triangles(&self) -> Vec<[usize; 3]> {
        self.inner.triangles.clone()
    }

    /// Topology summary as a dict (watertightness, manifoldness, Euler
    /// characteristic, component and boundary counts).
    fn validate<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let v = core::mesh::validate(&self.inner);
        let d = PyDict::new(py);
        d.set_item("is_watertight", v.is_watertight)?;
        d.set_item("is_manifold", v.is_manifold)?;
        d.set_item("orientation_consistent", v.orientation_consistent)?;
        d.set_item("boundary_loop_count", v.boundary_loop_count)?;
        d.set_item("non_manifold_edge_count", v.non_manifold_edge_count)?;
        d.set_item("component_count", v.component_count)?;
        d.set_item("euler_characteristic", v.euler_characteristic)?;
        d.set_item("degenerate_triangle_count", v.degenerate_triangle_count)?;
        Ok(d)
    }

    /// Enclosed volume (mm^3), surface area (mm^2), and axis-aligned
    /// bounding box.
    fn measure<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let m = core::mesh::measure(&self.inner);
        let d = PyDict::new(py);
        d.set_item("volume_mm3", m.volume)?;
        d.set_item("area_mm2", m.area)?;
        d.set_item("bbox_min_mm", <[f64; 3]>::from(m.bbox.min.coords))?;
        d.set_item("bbox_max_mm", <[f64; 3]>::from(m.bbox.max.coords))?;
        Ok(d)
    }

    fn __repr__(&self) -> String {
        format!(
            "Mesh(vertices={}, triangles={})",
            self.inner.vertices.len(),
            self.inner.triangles.len()
        )
    }
}

/// Keep voxels whose HU value lies in `[lo, hi]`.
#[pyfunction]
fn threshold(volume: &PyVolume, lo: i16, hi: i16) -> PyResult<PyMask> {
    let inner = core::mask::threshold(&volume.inner, lo, hi).map_err(err)?;
    Ok(PyMask { inner })
}

/// Contour the mask at `iso` after optional Gaussian smoothing.
#[pyfunction]
#[pyo3(signature = (mask, sigma=0.0, iso=0.5))]
fn extract_surface(mask: &PyMask, sigma: f64, iso: f64) -> PyResult<PyMesh> {
    let inner = core::isosurface::extract_surface(&mask.inner, sigma, iso).map_err(err)?;
    Ok(PyMesh { inner })
}

/// Fill every boundary loop (optionally only those with perimeter below
/// `max_perimeter`); returns the repaired mesh and the number of holes
/// filled.
#[pyfunction]
#[pyo3(signature = (mesh, max_perimeter=None))]
fn fill_holes(mesh: &PyMesh, max_perimeter: Option<f64>) -> PyResult<(PyMesh, usize)> {
    let (inner, filled) = core::repair::fill_all_holes(&mesh.inner, max_perimeter).map_err(err)?;
    Ok((PyMesh { inner }, filled))
}

/// Delete all triangles whose centroid lies within `radius` mm of `seed`.
#[pyfunction]
fn remove_region(mesh: &PyMesh, seed: [f64; 3], radius: f64) -> PyResult<PyMesh> {
    let inner = core::repair::remove_region(&mesh.inner, point(seed), radius).map_err(err)?;
    Ok(PyMesh { inner })
}

/// Remove a region and refill the resulting holes.
#[pyfunction]
fn refill_region(mesh: &PyMesh, seed: [f64; 3], radius: f64) -> PyResult<PyMesh> {
    let inner = core::repair::refill_region(&mesh.inner, point(seed), radius).map_err(err)?;
    Ok(PyMesh { inner })
}

/// Quadric-error-metric decimation down to `target_triangles`.
#[pyfunction]
fn decimate(mesh: &PyMesh, target_triangles: usize) -> PyResult<PyMesh> {
    let inner = core::refine::decimate(&mesh.inner, target_triangles).map_err(err)?;
    Ok(PyMesh { inner })
}

/// Laplacian smoothing; pass `mu` to use volume-preserving Taubin steps.
#[pyfunction]
#[pyo3(signature = (mesh, iterations, lam=0.5, mu=None))]
fn relax(mesh: &PyMesh, iterations: usize, lam: f64, mu: Option<f64>) -> PyResult<PyMesh> {
    let mode = match mu {
        Some(mu) => RelaxMode::Taubin { mu },
        None => RelaxMode::Uniform,
    };
    let inner = core::refine::relax(&mesh.inner, iterations, lam, mode).map_err(err)?;
    Ok(PyMesh { inner })
}

/// Incremental isotropic remeshing toward `target_edge_mm`.
#[pyfunction]
#[pyo3(signature = (mesh, target_edge_mm, iterations=3))]
fn remesh(mesh: &PyMesh, target_edge_mm: f64, iterations: usize) -> PyResult<PyMesh> {
    let inner = core::refine::remesh(&mesh.inner, target_edge_mm, iterations).map_err(err)?;
    Ok(PyMesh { inner })
}

/// Cut with the plane through `point` with unit `normal`, keeping the
/// requested side ("positive" or "negative"); `cap` closes the cross
/// section.
#[pyfunction]
#[pyo3(signature = (mesh, point, normal, keep="positive", cap=true))]
fn plane_cut(
    mesh: &PyMesh,
    point: [f64; 3],
    normal: [f64; 3],
    keep: &str,
    cap: bool,
) -> PyResult<PyMesh> {
    let side = match keep {
        "positive" => KeepSide::Positive,
        "negative" => KeepSide::Negative,
        other => {
            return Err(PyValueError::new_err(format!(
                "keep must be 'positive' or 'negative', got {other:?}"
            )))
        }
    };
    let inner = core::shape::plane_cut(
        &mesh.inner,
        crate::point(point),
        Vector3::new(normal[0], normal[1], normal[2]),
        side,
        cap,
    )
    .map_err(err)?;
    Ok(PyMesh { inner })
}

/// Push vertices within `radius` of `center` along their normals by up to
/// `offset` mm, with a smoothstep falloff.
#[pyfunction]
fn brush_displace(mesh: &PyMesh, center: [f64; 3], radius: f64, offset: f64) -> PyResult<PyMesh> {
    let inner = core::shape::brush_displace(&mesh.inner, point(center), radius, offset, None)
        .map_err(err)?;
    Ok(PyMesh { inner })
}

/// Run the printability check and return the report as a JSON string.
/// `config_json` overrides the default thresholds.
#[pyfunction]
#[pyo3(signature = (mesh, config_json=None))]
fn build_report_json(mesh: &PyMesh, config_json: Option<&str>) -> PyResult<String> {
    let config: PrintConfig = match config_json {
        Some(text) => serde_json::from_str(text)
            .map_err(|e| PyValueError::new_err(format!("bad print config: {e}")))?,
        None => PrintConfig::default(),
    };
    config.validate().map_err(err)?;
    let report = core::printcheck::build_report(&mesh.inner, &config).map_err(err)?;
    core::printcheck::report_to_json(&report).map_err(err)
}

/// Unit-test fixture: a subdivided icosahedron of the given radius.
#[pyfunction]
#[pyo3(signature = (radius, subdivisions=3))]
fn icosphere(radius: f64, subdivisions: u32) -> PyMesh {
    PyMesh {
        inner: core::primitives::icosphere(radius, subdivisions),
    }
}

#[pymodule]
fn cranioforge(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyVolume>()?;
    m.add_class::<PyMask>()?;
    m.add_class::<PyMesh>()?;
    m.add_function(wrap_pyfunction!(threshold, m)?)?;
    m.add_function(wrap_pyfunction!(extract_surface, m)?)?;
    m.add_function(wrap_pyfunction!(fill_holes, m)?)?;
    m.add_function(wrap_pyfunction!(remove_region, m)?)?;
    m.add_function(wrap_pyfunction!(refill_region, m)?)?;
    m.add_function(wrap_pyfunction!(decimate, m)?)?;
    m.add_function(wrap_pyfunction!(relax, m)?)?;
    m.add_function(wrap_pyfunction!(remesh, m)?)?;
    m.add_function(wrap_pyfunction!(plane_cut, m)?)?;
    m.add_function(wrap_pyfunction!(brush_displace, m)?)?;
    m.add_function(wrap_pyfunction!(build_report_json, m)?)?;
    m.add_function(wrap_pyfunction!(icosphere, m)?)?;
    Ok(())
}
