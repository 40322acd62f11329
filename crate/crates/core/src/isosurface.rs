//! Binary-mask contouring: optional Gaussian pre-filter plus a tetrahedral
//! contouring kernel.
//!
//! Each grid cell is split into six tetrahedra sharing the main diagonal,
//! with face diagonals chosen consistently between neighboring cells. The
//! interpolant is affine inside every tetrahedron, so the extracted level
//! set is a closed, consistently oriented 2-manifold whenever no grid value
//! equals the iso level — which the snapping below guarantees.

use std::collections::HashMap;

use nalgebra::{Point3, Vector3};

use crate::error::{Error, Result};
use crate::mask::Mask;
use crate::mesh::TriMesh;

/// Scalar samples on the same lattice as a [`Mask`].
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarField {
    pub dims: (usize, usize, usize),
    pub spacing: Vector3<f64>,
    pub origin: Point3<f64>,
    pub values: Vec<f32>,
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as i64;
    let mut weights: Vec<f64> = (-radius..=radius)
        .map(|x| (-(x as f64).powi(2) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = weights.iter().sum();
    for w in weights.iter_mut() {
        *w /= sum;
    }
    weights
}

fn convolve_axis(values: &mut Vec<f32>, dims: (usize, usize, usize), axis: usize, kernel: &[f64]) {
    let (nx, ny, nz) = dims;
    let radius = (kernel.len() / 2) as i64;
    let n = [nx, ny, nz][axis];
    let stride = match axis {
        0 => 1,
        1 => nx,
        _ => nx * ny,
    };
    let mut out = vec![0.0f32; values.len()];
    let mut line = vec![0.0f64; n];
    let (outer1, outer2) = match axis {
        0 => (ny, nz),
        1 => (nx, nz),
        _ => (nx, ny),
    };
    for b in 0..outer2 {
        for a in 0..outer1 {
            // line start: axis 0 varies i with (a=j, b=k); axis 1 varies j
            // with (a=i, b=k); axis 2 varies k with (a=i, b=j)
            let base = match axis {
                0 => (b * ny + a) * nx,
                1 => b * nx * ny + a,
                _ => b * nx + a,
            };
            for (idx, slot) in line.iter_mut().enumerate() {
                *slot = values[base + idx * stride] as f64;
            }
            for i in 0..n {
                let mut acc = 0.0f64;
                for (ko, &w) in kernel.iter().enumerate() {
                    let src = i as i64 + ko as i64 - radius;
                    if (0..n as i64).contains(&src) {
                        acc += w * line[src as usize];
                    }
                }
                out[base + i * stride] = acc as f32;
            }
        }
    }
    *values = out;
}

fn smooth_values(values: &mut Vec<f32>, dims: (usize, usize, usize), sigma: f64) {
    if sigma == 0.0 {
        return;
    }
    let kernel = gaussian_kernel(sigma);
    for axis in 0..3 {
        convolve_axis(values, dims, axis, &kernel);
    }
}

/// Separable Gaussian on the 0/1 field, truncated at 3 sigma with a
/// renormalized kernel. `sigma == 0` returns the field unchanged.
pub fn gaussian_smooth_field(mask: &Mask, sigma: f64) -> Result<ScalarField> {
    if sigma < 0.0 {
        return Err(Error::NegativeSigma(sigma));
    }
    let mut values: Vec<f32> = mask.bits.iter().map(|&b| b as u8 as f32).collect();
    smooth_values(&mut values, mask.dims, sigma);
    Ok(ScalarField {
        dims: mask.dims,
        spacing: mask.spacing,
        origin: mask.origin,
        values,
    })
}

// Cell corner i sits at offset ((i&1), (i>>1)&1, (i>>2)&1). All six tets
// share the 0-7 diagonal; face diagonals then match between neighbors.
const TETS: [[usize; 4]; 6] = [
    [0, 5, 1, 7],
    [0, 1, 3, 7],
    [0, 3, 2, 7],
    [0, 2, 6, 7],
    [0, 6, 4, 7],
    [0, 4, 5, 7],
];

struct Contour<'f> {
    values: &'f [f32],
    dims: (usize, usize, usize),
    iso: f64,
    // world position of padded grid point (0,0,0)
    base: Point3<f64>,
    spacing: Vector3<f64>,
    vertex_of_edge: HashMap<(usize, usize), usize>,
    vertices: Vec<Point3<f64>>,
    triangles: Vec<[usize; 3]>,
}

impl<'f> Contour<'f> {
    fn grid_point(&self, idx: usize) -> Point3<f64> {
        let (nx, ny, _) = self.dims;
        let i = idx % nx;
        let j = (idx / nx) % ny;
        let k = idx / (nx * ny);
        Point3::new(
            self.base.x + i as f64 * self.spacing.x,
            self.base.y + j as f64 * self.spacing.y,
            self.base.z + k as f64 * self.spacing.z,
        )
    }

    fn crossing_vertex(&mut self, a: usize, b: usize) -> usize {
        let key = (a.min(b), a.max(b));
        if let Some(&v) = self.vertex_of_edge.get(&key) {
            return v;
        }
        let (lo, hi) = key;
        let v0 = self.values[lo] as f64;
        let v1 = self.values[hi] as f64;
        let t = (self.iso - v0) / (v1 - v0);
        let p0 = self.grid_point(lo);
        let p1 = self.grid_point(hi);
        let p = p0 + (p1 - p0) * t;
        self.vertices.push(p);
        let idx = self.vertices.len() - 1;
        self.vertex_of_edge.insert(key, idx);
        idx
    }

    fn emit(&mut self, tri: [usize; 3], outward: Vector3<f64>) {
        let [a, b, c] = tri;
        let n = (self.vertices[b] - self.vertices[a]).cross(&(self.vertices[c] - self.vertices[a]));
        if n.dot(&outward) >= 0.0 {
            self.triangles.push(tri);
        } else {
            self.triangles.push([a, c, b]);
        }
    }

    fn tet(&mut self, corners: [usize; 4]) {
        let mut inside = [false; 4];
        let mut n_inside = 0;
        for (slot, &c) in inside.iter_mut().zip(corners.iter()) {
            *slot = (self.values[c] as f64) > self.iso;
            n_inside += *slot as usize;
        }
        if n_inside == 0 || n_inside == 4 {
            return;
        }
        // Direction from the inside corners toward the outside corners; the
        // isosurface inside an affine tet is planar, so this fixes winding.
        let mut dir = Vector3::zeros();
        for (idx, &c) in corners.iter().enumerate() {
            let p = self.grid_point(c).coords;
            if inside[idx] {
                dir -= p / n_inside as f64;
            } else {
                dir += p / (4 - n_inside) as f64;
            }
        }
        match n_inside {
            1 | 3 => {
                let lone = inside.iter().position(|&b| b == (n_inside == 1)).unwrap();
                let others: Vec<usize> = (0..4).filter(|&i| i != lone).collect();
                let tri = [
                    self.crossing_vertex(corners[lone], corners[others[0]]),
                    self.crossing_vertex(corners[lone], corners[others[1]]),
                    self.crossing_vertex(corners[lone], corners[others[2]]),
                ];
                self.emit(tri, dir);
            }
            2 => {
                let ins: Vec<usize> = (0..4).filter(|&i| inside[i]).collect();
                let outs: Vec<usize> = (0..4).filter(|&i| !inside[i]).collect();
                let (a, b) = (corners[ins[0]], corners[ins[1]]);
                let (c, d) = (corners[outs[0]], corners[outs[1]]);
                let pac = self.crossing_vertex(a, c);
                let pad = self.crossing_vertex(a, d);
                let pbd = self.crossing_vertex(b, d);
                let pbc = self.crossing_vertex(b, c);
                self.emit([pac, pad, pbd], dir);
                self.emit([pac, pbd, pbc], dir);
            }
            _ => unreachable!(),
        }
    }
}

/// Contour a padded scalar lattice at `iso`. `base` is the world position
/// of lattice point (0,0,0).
fn contour_lattice(
    values: &[f32],
    dims: (usize, usize, usize),
    spacing: Vector3<f64>,
    base: Point3<f64>,
    iso: f64,
) -> TriMesh {
    let (nx, ny, nz) = dims;
    let mut ctx = Contour {
        values,
        dims,
        iso,
        base,
        spacing,
        vertex_of_edge: HashMap::new(),
        vertices: Vec::new(),
        triangles: Vec::new(),
    };
    let corner_offsets: [usize; 8] = [
        0,
        1,
        nx,
        nx + 1,
        nx * ny,
        nx * ny + 1,
        nx * ny + nx,
        nx * ny + nx + 1,
    ];
    for k in 0..nz - 1 {
        for j in 0..ny - 1 {
            for i in 0..nx - 1 {
                let o = (k * ny + j) * nx + i;
                let mut mask_bits = 0u8;
                for (bit, &off) in corner_offsets.iter().enumerate() {
                    if (values[o + off] as f64) > iso {
                        mask_bits |= 1 << bit;
                    }
                }
                if mask_bits == 0 || mask_bits == 0xFF {
                    continue;
                }
                for tet in TETS {
                    ctx.tet([
                        o + corner_offsets[tet[0]],
                        o + corner_offsets[tet[1]],
                        o + corner_offsets[tet[2]],
                        o + corner_offsets[tet[3]],
                    ]);
                }
            }
        }
    }
    TriMesh {
        vertices: ctx.vertices,
        triangles: ctx.triangles,
    }
}

/// Extract a closed, outward-oriented surface from a binary mask.
///
/// The mask is padded with empty voxels (enough to absorb the smoothing
/// kernel) so the output is always closed. Values landing exactly on `iso`
/// are nudged to the outside so the iso level is a regular value.
pub fn extract_surface(mask: &Mask, smooth_sigma: f64, iso: f64) -> Result<TriMesh> {
    if mask.is_empty() {
        return Err(Error::EmptyMask);
    }
    if smooth_sigma < 0.0 {
        return Err(Error::NegativeSigma(smooth_sigma));
    }
    if !(iso > 0.0 && iso < 1.0) {
        return Err(Error::InvalidIso(iso));
    }

    let pad = if smooth_sigma > 0.0 {
        (3.0 * smooth_sigma).ceil() as usize + 1
    } else {
        1
    };
    let (nx, ny, nz) = mask.dims;
    let pdims = (nx + 2 * pad, ny + 2 * pad, nz + 2 * pad);
    let mut values = vec![0.0f32; pdims.0 * pdims.1 * pdims.2];
    for k in 0..nz {
        for j in 0..ny {
            let src = (k * ny + j) * nx;
            let dst = ((k + pad) * pdims.1 + (j + pad)) * pdims.0 + pad;
            for i in 0..nx {
                values[dst + i] = mask.bits[src + i] as u8 as f32;
            }
        }
    }
    smooth_values(&mut values, pdims, smooth_sigma);

    let snap = (iso - 1e-9) as f32;
    for v in values.iter_mut() {
        if (*v as f64 - iso).abs() < 1e-9 {
            *v = snap;
        }
    }

    let base = Point3::new(
        mask.origin.x - pad as f64 * mask.spacing.x,
        mask.origin.y - pad as f64 * mask.spacing.y,
        mask.origin.z - pad as f64 * mask.spacing.z,
    );
    let mesh = contour_lattice(&values, pdims, mask.spacing, base, iso);
    if mesh.triangles.is_empty() {
        return Err(Error::EmptyMask);
    }
    Ok(mesh)
}
