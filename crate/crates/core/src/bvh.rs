//! Median-split bounding volume hierarchy for ray casts and point-to-mesh
//! distance queries.

use nalgebra::{Point3, Vector3};

use crate::mesh::TriMesh;

const LEAF_SIZE: usize = 8;

#[derive(Debug, Clone, Copy)]
struct Node {
    min: Point3<f64>,
    max: Point3<f64>,
    left: usize,
    right: usize,
    first: usize,
    count: usize,
}

pub struct Bvh {
    nodes: Vec<Node>,
    tris: Vec<[Point3<f64>; 3]>,
    /// Permutation of triangle ids; leaves reference ranges of it.
    order: Vec<usize>,
}

impl Bvh {
    pub fn build(mesh: &TriMesh) -> Self {
        let tris: Vec<[Point3<f64>; 3]> = (0..mesh.triangles.len())
            .map(|t| mesh.tri_points(t))
            .collect();
        let centroids: Vec<Point3<f64>> = tris
            .iter()
            .map(|t| Point3::from((t[0].coords + t[1].coords + t[2].coords) / 3.0))
            .collect();
        let order: Vec<usize> = (0..tris.len()).collect();
        let mut bvh = Bvh {
            nodes: Vec::new(),
            tris,
            order,
        };
        if !bvh.order.is_empty() {
            let len = bvh.order.len();
            bvh.build_node(0, len, &centroids);
        }
        bvh
    }

    fn build_node(&mut self, start: usize, end: usize, centroids: &[Point3<f64>]) -> usize {
        let mut min = Point3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY);
        let mut max = Point3::new(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for &t in &self.order[start..end] {
            for p in &self.tris[t] {
                for a in 0..3 {
                    min[a] = min[a].min(p[a]);
                    max[a] = max[a].max(p[a]);
                }
            }
        }
        let idx = self.nodes.len();
        self.nodes.push(Node {
            min,
            max,
            left: usize::MAX,
            right: usize::MAX,
            first: start,
            count: 0,
        });
        if end - start <= LEAF_SIZE {
            self.nodes[idx].count = end - start;
            return idx;
        }
        let ext = max - min;
        let axis = if ext.x >= ext.y && ext.x >= ext.z {
            0
        } else if ext.y >= ext.z {
            1
        } else {
            2
        };
        let mid = (start + end) / 2;
        self.order[start..end].select_nth_unstable_by(mid - start, |&a, &b| {
            centroids[a][axis]
                .total_cmp(&centroids[b][axis])
                .then(a.cmp(&b))
        });
        let left = self.build_node(start, mid, centroids);
        let right = self.build_node(mid, end, centroids);
        self.nodes[idx].left = left;
        self.nodes[idx].right = right;
        idx
    }

    /// Nearest intersection strictly beyond `t_min`; returns (t, triangle).
    pub fn ray_first_hit(
        &self,
        origin: &Point3<f64>,
        dir: &Vector3<f64>,
        t_min: f64,
    ) -> Option<(f64, usize)> {
        if self.nodes.is_empty() {
            return None;
        }
        let inv_dir = Vector3::new(1.0 / dir.x, 1.0 / dir.y, 1.0 / dir.z);
        let mut best: Option<(f64, usize)> = None;
        let mut stack = vec![0usize];
        while let Some(ni) = stack.pop() {
            let node = self.nodes[ni];
            match ray_aabb(origin, &inv_dir, &node.min, &node.max) {
                Some(t_enter) => {
                    if let Some((bt, _)) = best {
                        if t_enter > bt {
                            continue;
                        }
                    }
                }
                None => continue,
            }
            if node.count > 0 {
                for &t in &self.order[node.first..node.first + node.count] {
                    if let Some(t_hit) = ray_triangle(origin, dir, &self.tris[t]) {
                        let better =
                            best.map_or(true, |(bt, bi)| t_hit < bt || (t_hit == bt && t < bi));
                        if t_hit > t_min && better {
                            best = Some((t_hit, t));
                        }
                    }
                }
            } else {
                stack.push(node.left);
                stack.push(node.right);
            }
        }
        best
    }

    /// Unsigned distance from `p` to the mesh surface.
    pub fn distance_to_point(&self, p: &Point3<f64>) -> f64 {
        if self.nodes.is_empty() {
            return f64::INFINITY;
        }
        let mut best = f64::INFINITY;
        let mut stack = vec![0usize];
        while let Some(ni) = stack.pop() {
            let node = self.nodes[ni];
            if aabb_distance_sq(p, &node.min, &node.max) >= best {
                continue;
            }
            if node.count > 0 {
                for &t in &self.order[node.first..node.first + node.count] {
                    best = best.min(point_triangle_distance_sq(p, &self.tris[t]));
                }
            } else {
                stack.push(node.left);
                stack.push(node.right);
            }
        }
        best.sqrt()
    }
}

/// Moller-Trumbore ray/triangle intersection; returns t along `dir`.
pub fn ray_triangle(
    origin: &Point3<f64>,
    dir: &Vector3<f64>,
    tri: &[Point3<f64>; 3],
) -> Option<f64> {
    let e1 = tri[1] - tri[0];
    let e2 = tri[2] - tri[0];
    let h = dir.cross(&e2);
    let det = e1.dot(&h);
    if det.abs() < 1e-14 {
        return None;
    }
    let inv = 1.0 / det;
    let s = origin - tri[0];
    let u = s.dot(&h) * inv;
    if !(0.0..=1.0).contains(&u) {
        return None;
    }
    let q = s.cross(&e1);
    let v = dir.dot(&q) * inv;
    if v < 0.0 || u + v > 1.0 {
        return None;
    }
    Some(e2.dot(&q) * inv)
}

fn ray_aabb(
    origin: &Point3<f64>,
    inv_dir: &Vector3<f64>,
    min: &Point3<f64>,
    max: &Point3<f64>,
) -> Option<f64> {
    let mut t0 = f64::NEG_INFINITY;
    let mut t1 = f64::INFINITY;
    for a in 0..3 {
        if inv_dir[a].is_infinite() {
            // Ray parallel to this slab: 0 * inf would poison the interval
            // with NaN, so test containment directly.
            if origin[a] < min[a] || origin[a] > max[a] {
                return None;
            }
            continue;
        }
        let ta = (min[a] - origin[a]) * inv_dir[a];
        let tb = (max[a] - origin[a]) * inv_dir[a];
        t0 = t0.max(ta.min(tb));
        t1 = t1.min(ta.max(tb));
    }
    if t1 >= t0 && t1 >= 0.0 {
        Some(t0.max(0.0))
    } else {
        None
    }
}

fn aabb_distance_sq(p: &Point3<f64>, min: &Point3<f64>, max: &Point3<f64>) -> f64 {
    let mut d = 0.0;
    for a in 0..3 {
        let v = p[a].clamp(min[a], max[a]) - p[a];
        d += v * v;
    }
    d
}

/// Squared distance from a point to a triangle (Ericson's closest-point
/// construction).
pub fn point_triangle_distance_sq(p: &Point3<f64>, tri: &[Point3<f64>; 3]) -> f64 {
    let (a, b, c) = (tri[0], tri[1], tri[2]);
    let ab = b - a;
    let ac = c - a;
    let ap = p - a;
    let d1 = ab.dot(&ap);
    let d2 = ac.dot(&ap);
    if d1 <= 0.0 && d2 <= 0.0 {
        return ap.norm_squared();
    }
    let bp = p - b;
    let d3 = ab.dot(&bp);
    let d4 = ac.dot(&bp);
    if d3 >= 0.0 && d4 <= d3 {
        return bp.norm_squared();
    }
    let vc = d1 * d4 - d3 * d2;
    if vc <= 0.0 && d1 >= 0.0 && d3 <= 0.0 {
        let v = d1 / (d1 - d3);
        return (ap - ab * v).norm_squared();
    }
    let cp = p - c;
    let d5 = ab.dot(&cp);
    let d6 = ac.dot(&cp);
    if d6 >= 0.0 && d5 <= d6 {
        return cp.norm_squared();
    }
    let vb = d5 * d2 - d1 * d6;
    if vb <= 0.0 && d2 >= 0.0 && d6 <= 0.0 {
        let w = d2 / (d2 - d6);
        return (ap - ac * w).norm_squared();
    }
    let va = d3 * d6 - d5 * d4;
    if va <= 0.0 && (d4 - d3) >= 0.0 && (d5 - d6) >= 0.0 {
        let w = (d4 - d3) / ((d4 - d3) + (d5 - d6));
        return (bp - (c - b) * w).norm_squared();
    }
    let denom = 1.0 / (va + vb + vc);
    let v = vb * denom;
    let w = vc * denom;
    ((a + ab * v + ac * w) - p).norm_squared()
}
