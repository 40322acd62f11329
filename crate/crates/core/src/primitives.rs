//! Simple closed-mesh generators used as phantoms by tests and demos.

use std::collections::HashMap;

use nalgebra::Point3;

use crate::mesh::TriMesh;

/// Axis-aligned solid cube with one corner at the origin, 12 triangles,
/// outward-oriented.
pub fn cube(size: f64) -> TriMesh {
    let s = size;
    let vertices = vec![
        Point3::new(0.0, 0.0, 0.0),
        Point3::new(s, 0.0, 0.0),
        Point3::new(s, s, 0.0),
        Point3::new(0.0, s, 0.0),
        Point3::new(0.0, 0.0, s),
        Point3::new(s, 0.0, s),
        Point3::new(s, s, s),
        Point3::new(0.0, s, s),
    ];
    let triangles = vec![
        [0, 2, 1],
        [0, 3, 2], // z = 0, normal -z
        [4, 5, 6],
        [4, 6, 7], // z = s, normal +z
        [0, 1, 5],
        [0, 5, 4], // y = 0, normal -y
        [2, 3, 7],
        [2, 7, 6], // y = s, normal +y
        [0, 4, 7],
        [0, 7, 3], // x = 0, normal -x
        [1, 2, 6],
        [1, 6, 5], // x = s, normal +x
    ];
    TriMesh {
        vertices,
        triangles,
    }
}

/// Subdivided icosahedron projected onto a sphere of radius `radius`
/// centered at the origin. Triangle count is 20 * 4^subdivisions.
pub fn icosphere(radius: f64, subdivisions: u32) -> TriMesh {
    let phi = (1.0 + 5.0f64.sqrt()) / 2.0;
    let mut vertices: Vec<Point3<f64>> = vec![
        Point3::new(-1.0, phi, 0.0),
        Point3::new(1.0, phi, 0.0),
        Point3::new(-1.0, -phi, 0.0),
        Point3::new(1.0, -phi, 0.0),
        Point3::new(0.0, -1.0, phi),
        Point3::new(0.0, 1.0, phi),
        Point3::new(0.0, -1.0, -phi),
        Point3::new(0.0, 1.0, -phi),
        Point3::new(phi, 0.0, -1.0),
        Point3::new(phi, 0.0, 1.0),
        Point3::new(-phi, 0.0, -1.0),
        Point3::new(-phi, 0.0, 1.0),
    ];
    let mut triangles: Vec<[usize; 3]> = vec![
        [0, 11, 5],
        [0, 5, 1],
        [0, 1, 7],
        [0, 7, 10],
        [0, 10, 11],
        [1, 5, 9],
        [5, 11, 4],
        [11, 10, 2],
        [10, 7, 6],
        [7, 1, 8],
        [3, 9, 4],
        [3, 4, 2],
        [3, 2, 6],
        [3, 6, 8],
        [3, 8, 9],
        [4, 9, 5],
        [2, 4, 11],
        [6, 2, 10],
        [8, 6, 7],
        [9, 8, 1],
    ];

    for _ in 0..subdivisions {
        let mut midpoints: HashMap<(usize, usize), usize> = HashMap::new();
        let mut new_triangles = Vec::with_capacity(triangles.len() * 4);
        for t in &triangles {
            let mut mids = [0usize; 3];
            for e in 0..3 {
                let (a, b) = (t[e], t[(e + 1) % 3]);
                let key = (a.min(b), a.max(b));
                mids[e] = *midpoints.entry(key).or_insert_with(|| {
                    let m = Point3::from((vertices[a].coords + vertices[b].coords) / 2.0);
                    vertices.push(m);
                    vertices.len() - 1
                });
            }
            new_triangles.push([t[0], mids[0], mids[2]]);
            new_triangles.push([t[1], mids[1], mids[0]]);
            new_triangles.push([t[2], mids[2], mids[1]]);
            new_triangles.push([mids[0], mids[1], mids[2]]);
        }
        triangles = new_triangles;
    }

    for v in vertices.iter_mut() {
        let n = v.coords.norm();
        v.coords *= radius / n;
    }
    TriMesh {
        vertices,
        triangles,
    }
}

/// Hollow spherical shell: outer sphere plus an inward-facing inner sphere,
/// as a single two-component watertight mesh.
pub fn sphere_shell(outer: f64, inner: f64, subdivisions: u32) -> TriMesh {
    let out = icosphere(outer, subdivisions);
    let mut inn = icosphere(inner, subdivisions);
    for t in inn.triangles.iter_mut() {
        t.swap(1, 2); // normals point into the cavity
    }
    let offset = out.vertices.len();
    let mut vertices = out.vertices;
    vertices.extend(inn.vertices);
    let mut triangles = out.triangles;
    triangles.extend(
        inn.triangles
            .iter()
            .map(|t| [t[0] + offset, t[1] + offset, t[2] + offset]),
    );
    TriMesh {
        vertices,
        triangles,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::{measure, validate};

    #[test]
    fn icosphere_counts() {
        assert_eq!(icosphere(1.0, 0).triangles.len(), 20);
        assert_eq!(icosphere(1.0, 3).triangles.len(), 1280);
        assert_eq!(icosphere(1.0, 5).triangles.len(), 20480);
    }

    #[test]
    fn shell_is_watertight_with_two_components() {
        let m = sphere_shell(20.0, 18.0, 2);
        let r = validate(&m);
        assert!(r.is_watertight);
        assert_eq!(r.component_count, 2);
        let v = measure(&m).volume;
        let analytic = 4.0 / 3.0 * std::f64::consts::PI * (20.0f64.powi(3) - 18.0f64.powi(3));
        assert!(((v - analytic) / analytic).abs() < 0.05);
    }
}
