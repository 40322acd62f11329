//! Deliberate geometry edits: planar cuts with optional caps, and
//! brush-displacement sculpting.

use std::collections::HashMap;

use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{triangle_area, validate, TriMesh};
use crate::repair::fill_all_holes;

/// Which side of the cut plane survives.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KeepSide {
    Positive,
    Negative,
}

const SLIVER_AREA: f64 = 1e-12;

/// Cut `mesh` with the plane through `point` with unit `normal`, keeping
/// the requested half-space. Straddling triangles are split along the
/// plane; neighbors share the exact same intersection vertices, so a
/// watertight input stays watertight once capped.
pub fn plane_cut(
    mesh: &TriMesh,
    point: Point3<f64>,
    normal: Vector3<f64>,
    keep: KeepSide,
    cap: bool,
) -> Result<TriMesh> {
    let len = normal.norm();
    if (len - 1.0).abs() > 1e-6 {
        return Err(Error::NonUnitNormal(len));
    }
    if cap && !validate(mesh).is_watertight {
        return Err(Error::CapRequiresWatertight);
    }
    let sign = match keep {
        KeepSide::Positive => 1.0,
        KeepSide::Negative => -1.0,
    };
    // Signed distance; positive means kept.
    let dist: Vec<f64> = mesh
        .vertices
        .iter()
        .map(|v| sign * normal.dot(&(v - point)))
        .collect();

    let mut vertices = mesh.vertices.clone();
    let mut triangles: Vec<[usize; 3]> = Vec::new();
    // Intersection vertices keyed by the original edge so adjacent
    // triangles split identically.
    let mut edge_points: HashMap<(usize, usize), usize> = HashMap::new();
    let mut slivers = 0usize;

    for tri in &mesh.triangles {
        let d = [dist[tri[0]], dist[tri[1]], dist[tri[2]]];
        if d.iter().all(|&x| x >= 0.0) {
            triangles.push(*tri);
            continue;
        }
        if d.iter().all(|&x| x <= 0.0) {
            continue;
        }
        // Sutherland-Hodgman clip of the triangle against the half-space;
        // the result is a convex polygon with 3 or 4 corners.
        let mut poly: Vec<usize> = Vec::with_capacity(4);
        for e in 0..3 {
            let (u, v) = (tri[e], tri[(e + 1) % 3]);
            let (du, dv) = (dist[u], dist[v]);
            if du >= 0.0 {
                poly.push(u);
            }
            if (du > 0.0 && dv < 0.0) || (du < 0.0 && dv > 0.0) {
                let key = (u.min(v), u.max(v));
                let idx = *edge_points.entry(key).or_insert_with(|| {
                    let (a, b) = (key.0, key.1);
                    let t = dist[a] / (dist[a] - dist[b]);
                    let p = mesh.vertices[a] + (mesh.vertices[b] - mesh.vertices[a]) * t;
                    vertices.push(p);
                    vertices.len() - 1
                });
                poly.push(idx);
            }
        }
        for i in 1..poly.len().saturating_sub(1) {
            let t = [poly[0], poly[i], poly[i + 1]];
            if t[0] == t[1] || t[1] == t[2] || t[0] == t[2] {
                continue;
            }
            if triangle_area(&vertices[t[0]], &vertices[t[1]], &vertices[t[2]]) < SLIVER_AREA {
                slivers += 1;
                continue;
            }
            triangles.push(t);
        }
    }
    if slivers > 0 {
        log::debug!("plane_cut dropped {slivers} sliver triangles");
    }

    // A plane that misses the mesh entirely must leave it untouched, so
    // only renumber when the cut actually changed something.
    let untouched =
        edge_points.is_empty() && triangles.len() == mesh.triangles.len() && slivers == 0;
    let mut out = TriMesh {
        vertices,
        triangles,
    };
    if !untouched {
        out.compact();
    }
    if cap {
        let (capped, filled) = fill_all_holes(&out, None)?;
        log::debug!("plane_cut capped {filled} cross-section loops");
        out = capped;
    }
    Ok(out)
}

/// Smoothstep-weighted displacement along vertex normals: vertices within
/// `radius` of `center` move by `offset * w(d/radius)` where w is
/// smoothstep(1 - t).
///
/// Pass `normals` (frozen from the un-displaced mesh) to get a
/// well-defined linear displacement field: the falloff distance is then
/// measured perpendicular to each vertex's frozen normal, which is
/// invariant under motion along that normal, so applying `offset` and
/// then `-offset` with the same field round-trips exactly. Without
/// `normals`, area-weighted normals and plain Euclidean distance are
/// used.
pub fn brush_displace(
    mesh: &TriMesh,
    center: Point3<f64>,
    radius: f64,
    offset: f64,
    normals: Option<&[Vector3<f64>]>,
) -> Result<TriMesh> {
    if radius <= 0.0 || !radius.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "brush radius must be > 0, got {radius}"
        )));
    }
    if !offset.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "brush offset must be finite, got {offset}"
        )));
    }
    let frozen = normals.is_some();
    let computed;
    let normals = match normals {
        Some(n) => {
            if n.len() != mesh.vertices.len() {
                return Err(Error::InvalidParameter(format!(
                    "normal field has {} entries for {} vertices",
                    n.len(),
                    mesh.vertices.len()
                )));
            }
            n
        }
        None => {
            computed = mesh.vertex_normals();
            &computed
        }
    };
    let mut out = mesh.clone();
    for (v, p) in out.vertices.iter_mut().enumerate() {
        let r = *p - center;
        let d = if frozen {
            let n = normals[v];
            (r - n * n.dot(&r)).norm()
        } else {
            r.norm()
        };
        if d >= radius {
            continue;
        }
        let t = 1.0 - d / radius;
        let w = t * t * (3.0 - 2.0 * t);
        *p += normals[v] * (offset * w);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{boundary_loops, measure};
    use crate::primitives::icosphere;

    #[test]
    fn plane_below_mesh_is_identity() {
        let m = icosphere(10.0, 2);
        let out = plane_cut(
            &m,
            Point3::new(0.0, 0.0, -20.0),
            Vector3::z(),
            KeepSide::Positive,
            true,
        )
        .unwrap();
        assert_eq!(out.triangles, m.triangles);
        assert_eq!(out.vertices, m.vertices);
    }

    #[test]
    fn non_unit_normal_rejected() {
        let m = icosphere(1.0, 0);
        let r = plane_cut(
            &m,
            Point3::origin(),
            Vector3::new(0.0, 0.0, 2.0),
            KeepSide::Positive,
            false,
        );
        assert!(matches!(r, Err(Error::NonUnitNormal(_))));
    }

    #[test]
    fn cap_requires_watertight() {
        let mut m = icosphere(5.0, 2);
        m.triangles.pop();
        let r = plane_cut(&m, Point3::origin(), Vector3::z(), KeepSide::Positive, true);
        assert!(matches!(r, Err(Error::CapRequiresWatertight)));
    }

    #[test]
    fn equator_cut_capped_half_sphere() {
        let m = icosphere(10.0, 3);
        let lower =
            plane_cut(&m, Point3::origin(), Vector3::z(), KeepSide::Negative, true).unwrap();
        assert!(validate(&lower).is_watertight);
        let v = measure(&lower).volume;
        let half = 0.5 * 4.0 / 3.0 * std::f64::consts::PI * 1000.0;
        assert!((v - half).abs() / half < 0.02, "half volume {v} vs {half}");
    }

    #[test]
    fn equator_cut_open_leaves_one_planar_loop() {
        let m = icosphere(10.0, 3);
        let lower = plane_cut(
            &m,
            Point3::origin(),
            Vector3::z(),
            KeepSide::Negative,
            false,
        )
        .unwrap();
        let loops = boundary_loops(&lower).unwrap();
        assert_eq!(loops.len(), 1);
        for &v in &loops[0].vertices {
            assert!(lower.vertices[v].z.abs() < 1e-6);
        }
    }

    #[test]
    fn halves_sum_to_whole() {
        let m = icosphere(10.0, 3);
        let p = Point3::new(0.3, -0.2, 1.1);
        let n = Vector3::new(1.0, 2.0, -0.5).normalize();
        let a = plane_cut(&m, p, n, KeepSide::Positive, true).unwrap();
        let b = plane_cut(&m, p, n, KeepSide::Negative, true).unwrap();
        let total = measure(&m).volume;
        let sum = measure(&a).volume + measure(&b).volume;
        assert!(
            ((sum - total) / total).abs() < 1e-6,
            "sum {sum} vs total {total}"
        );
    }

    #[test]
    fn cap_vertices_lie_on_plane() {
        let m = icosphere(10.0, 3);
        let open = plane_cut(
            &m,
            Point3::origin(),
            Vector3::z(),
            KeepSide::Negative,
            false,
        )
        .unwrap();
        let capped =
            plane_cut(&m, Point3::origin(), Vector3::z(), KeepSide::Negative, true).unwrap();
        // Every vertex the cap introduced beyond the open cut must be on
        // the plane (min-area fill adds none, but guard regardless).
        for v in open.vertices.len()..capped.vertices.len() {
            assert!(capped.vertices[v].z.abs() < 1e-9);
        }
        // Cut loop vertices themselves are plane intersections.
        for lp in boundary_loops(&open).unwrap() {
            for &v in &lp.vertices {
                assert!(open.vertices[v].z.abs() < 1e-9);
            }
        }
    }

    #[test]
    fn cut_is_deterministic() {
        let m = icosphere(10.0, 3);
        let n = Vector3::new(0.0, 1.0, 1.0).normalize();
        let a = plane_cut(&m, Point3::origin(), n, KeepSide::Positive, true).unwrap();
        let b = plane_cut(&m, Point3::origin(), n, KeepSide::Positive, true).unwrap();
        assert_eq!(a.vertices, b.vertices);
        assert_eq!(a.triangles, b.triangles);
    }

    #[test]
    fn brush_zero_offset_is_identity() {
        let m = icosphere(5.0, 2);
        let out = brush_displace(&m, Point3::new(5.0, 0.0, 0.0), 3.0, 0.0, None).unwrap();
        assert_eq!(out.vertices, m.vertices);
    }

    #[test]
    fn brush_center_vertex_moves_exactly_offset() {
        let m = icosphere(5.0, 2);
        // icosphere subdivision keeps a vertex on the +z pole
        let pole = m
            .vertices
            .iter()
            .position(|p| (p - Point3::new(0.0, 0.0, 5.0)).norm() < 1e-9)
            .expect("pole vertex");
        let out = brush_displace(&m, m.vertices[pole], 2.0, 2.0, None).unwrap();
        let moved = (out.vertices[pole] - m.vertices[pole]).norm();
        assert!((moved - 2.0).abs() < 1e-9, "moved {moved}");
    }

    #[test]
    fn brush_bump_grows_volume_and_leaves_far_vertices() {
        let m = icosphere(10.0, 3);
        let center = Point3::new(0.0, 0.0, 10.0);
        let out = brush_displace(&m, center, 3.0, 1.0, None).unwrap();
        assert!(measure(&out).volume > measure(&m).volume);
        for (v, p) in m.vertices.iter().enumerate() {
            if (p - center).norm() >= 3.0 {
                assert_eq!(out.vertices[v], *p, "vertex {v} outside radius changed");
            }
        }
    }

    #[test]
    fn brush_round_trip_with_frozen_normals() {
        let m = icosphere(10.0, 2);
        let normals = m.vertex_normals();
        let center = Point3::new(0.0, 0.0, 10.0);
        let fwd = brush_displace(&m, center, 4.0, 1.5, Some(&normals)).unwrap();
        let back = brush_displace(&fwd, center, 4.0, -1.5, Some(&normals)).unwrap();
        for (a, b) in m.vertices.iter().zip(back.vertices.iter()) {
            assert!((a - b).norm() < 1e-9);
        }
    }
}
