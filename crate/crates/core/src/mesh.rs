//! Indexed triangle mesh, topology queries, validation, and measurement.

use std::collections::HashMap;

use nalgebra::{Point3, Vector3};

use crate::error::{Error, Result};

/// Indexed, oriented triangle mesh in millimeter coordinates. Triangles
/// are counter-clockwise when viewed from outside.
#[derive(Debug, Clone, PartialEq)]
pub struct TriMesh {
    pub vertices: Vec<Point3<f64>>,
    pub triangles: Vec<[usize; 3]>,
}

/// Print-readiness topology summary.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ValidationResult {
    pub is_watertight: bool,
    pub is_manifold: bool,
    pub orientation_consistent: bool,
    pub boundary_loop_count: usize,
    pub non_manifold_edge_count: usize,
    pub component_count: usize,
    pub euler_characteristic: i64,
    pub degenerate_triangle_count: usize,
}

/// Closed cycle of boundary edges — a hole to fill.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryLoop {
    /// Vertex indices in the traversal direction of the adjacent triangles.
    pub vertices: Vec<usize>,
    pub perimeter: f64,
}

pub fn triangle_area(a: &Point3<f64>, b: &Point3<f64>, c: &Point3<f64>) -> f64 {
    0.5 * (b - a).cross(&(c - a)).norm()
}

pub fn triangle_normal(a: &Point3<f64>, b: &Point3<f64>, c: &Point3<f64>) -> Vector3<f64> {
    let n = (b - a).cross(&(c - a));
    let len = n.norm();
    if len > 0.0 {
        n / len
    } else {
        Vector3::zeros()
    }
}

impl TriMesh {
    pub fn new(vertices: Vec<Point3<f64>>, triangles: Vec<[usize; 3]>) -> Result<Self> {
        for t in &triangles {
            if t[0] == t[1] || t[1] == t[2] || t[0] == t[2] {
                return Err(Error::MalformedObj(format!(
                    "triangle {t:?} references the same vertex twice"
                )));
            }
            for &v in t {
                if v >= vertices.len() {
                    return Err(Error::MalformedObj(format!(
                        "triangle index {v} out of range ({} vertices)",
                        vertices.len()
                    )));
                }
            }
        }
        for v in &vertices {
            if !v.coords.iter().all(|c| c.is_finite()) {
                return Err(Error::NonFiniteCoordinate);
            }
        }
        Ok(TriMesh {
            vertices,
            triangles,
        })
    }

    pub fn tri_points(&self, t: usize) -> [Point3<f64>; 3] {
        let [a, b, c] = self.triangles[t];
        [self.vertices[a], self.vertices[b], self.vertices[c]]
    }

    pub fn tri_centroid(&self, t: usize) -> Point3<f64> {
        let [a, b, c] = self.tri_points(t);
        Point3::from((a.coords + b.coords + c.coords) / 3.0)
    }

    /// Area-weighted vertex normals, normalized (zero for isolated vertices).
    pub fn vertex_normals(&self) -> Vec<Vector3<f64>> {
        let mut normals = vec![Vector3::zeros(); self.vertices.len()];
        for t in &self.triangles {
            let [a, b, c] = [
                self.vertices[t[0]],
                self.vertices[t[1]],
                self.vertices[t[2]],
            ];
            let n = (b - a).cross(&(c - a)); // magnitude = 2 * area
            for &v in t {
                normals[v] += n;
            }
        }
        for n in normals.iter_mut() {
            let len = n.norm();
            if len > 0.0 {
                *n /= len;
            }
        }
        normals
    }

    /// Drop vertices not referenced by any triangle, reindexing in place.
    pub fn compact(&mut self) {
        let mut remap = vec![usize::MAX; self.vertices.len()];
        let mut kept = Vec::new();
        for t in &self.triangles {
            for &v in t {
                if remap[v] == usize::MAX {
                    remap[v] = kept.len();
                    kept.push(self.vertices[v]);
                }
            }
        }
        for t in self.triangles.iter_mut() {
            for v in t.iter_mut() {
                *v = remap[*v];
            }
        }
        self.vertices = kept;
    }
}

/// Incidence of one undirected edge: (triangle index, true when the
/// triangle traverses the edge as (min -> max)).
pub type EdgeMap = HashMap<(usize, usize), Vec<(usize, bool)>>;

pub fn edge_map(mesh: &TriMesh) -> EdgeMap {
    let mut map: EdgeMap = HashMap::with_capacity(mesh.triangles.len() * 3 / 2);
    for (ti, t) in mesh.triangles.iter().enumerate() {
        for e in 0..3 {
            let (u, v) = (t[e], t[(e + 1) % 3]);
            let key = (u.min(v), u.max(v));
            map.entry(key).or_default().push((ti, u < v));
        }
    }
    map
}

fn boundary_loops_impl(mesh: &TriMesh, strict: bool) -> Result<Vec<BoundaryLoop>> {
    let edges = edge_map(mesh);
    // Directed boundary half-edges, in the direction the owning triangle
    // traverses them.
    let mut next: HashMap<usize, Vec<usize>> = HashMap::new();
    for (&(a, b), inc) in &edges {
        if inc.len() == 1 {
            let (u, v) = if inc[0].1 { (a, b) } else { (b, a) };
            next.entry(u).or_default().push(v);
        }
    }
    if strict {
        for (&v, outs) in &next {
            if outs.len() > 1 {
                return Err(Error::NonManifoldBoundary {
                    vertex: v,
                    count: outs.len() * 2,
                });
            }
        }
    }
    for outs in next.values_mut() {
        outs.sort_unstable();
    }

    let mut starts: Vec<usize> = next.keys().copied().collect();
    starts.sort_unstable();
    let mut loops = Vec::new();
    let mut consumed: HashMap<usize, usize> = HashMap::new(); // vertex -> outgoing used count
    for &start in &starts {
        let available = next[&start].len() - consumed.get(&start).copied().unwrap_or(0);
        if available == 0 {
            continue;
        }
        let mut cycle = vec![start];
        let mut current = start;
        loop {
            let used = consumed.entry(current).or_insert(0);
            let outs = &next[&current];
            if *used >= outs.len() {
                // Open chain: only possible on broken input; stop tracing.
                break;
            }
            let nxt = outs[*used];
            *used += 1;
            if nxt == start {
                break;
            }
            cycle.push(nxt);
            current = nxt;
        }
        let perimeter: f64 = cycle
            .iter()
            .zip(cycle.iter().cycle().skip(1))
            .map(|(&a, &b)| (mesh.vertices[b] - mesh.vertices[a]).norm())
            .sum();
        loops.push(BoundaryLoop {
            vertices: cycle,
            perimeter,
        });
    }
    loops.sort_by(|a, b| {
        b.perimeter
            .total_cmp(&a.perimeter)
            .then_with(|| a.vertices.iter().min().cmp(&b.vertices.iter().min()))
    });
    Ok(loops)
}

/// One loop per connected cycle of boundary edges, ordered by descending
/// perimeter. Errors when a boundary vertex has more than two incident
/// boundary edges, since loops cannot be traced uniquely.
pub fn boundary_loops(mesh: &TriMesh) -> Result<Vec<BoundaryLoop>> {
    boundary_loops_impl(mesh, true)
}

/// Full topology report; reports rather than throws.
pub fn validate(mesh: &TriMesh) -> ValidationResult {
    let edges = edge_map(mesh);
    let degenerate_triangle_count = mesh
        .triangles
        .iter()
        .filter(|t| {
            let [a, b, c] = [
                mesh.vertices[t[0]],
                mesh.vertices[t[1]],
                mesh.vertices[t[2]],
            ];
            triangle_area(&a, &b, &c) <= 1e-12
        })
        .count();

    let mut non_manifold_edge_count = 0usize;
    let mut boundary_edge_count = 0usize;
    let mut orientation_consistent = true;
    for inc in edges.values() {
        match inc.len() {
            1 => boundary_edge_count += 1,
            2 => {
                if inc[0].1 == inc[1].1 {
                    orientation_consistent = false;
                }
            }
            _ => non_manifold_edge_count += 1,
        }
    }

    let boundary_loop_count = if boundary_edge_count == 0 {
        0
    } else {
        boundary_loops_impl(mesh, false)
            .map(|l| l.len())
            .unwrap_or(0)
    };

    // Components over face adjacency.
    let mut parent: Vec<usize> = (0..mesh.triangles.len()).collect();
    fn find(parent: &mut Vec<usize>, x: usize) -> usize {
        let mut root = x;
        while parent[root] != root {
            root = parent[root];
        }
        let mut cur = x;
        while parent[cur] != root {
            let up = parent[cur];
            parent[cur] = root;
            cur = up;
        }
        root
    }
    for inc in edges.values() {
        for pair in inc.windows(2) {
            let (a, b) = (find(&mut parent, pair[0].0), find(&mut parent, pair[1].0));
            if a != b {
                parent[a] = b;
            }
        }
    }
    let mut roots: Vec<usize> = (0..mesh.triangles.len())
        .map(|t| find(&mut parent, t))
        .collect();
    roots.sort_unstable();
    roots.dedup();
    let component_count = roots.len();

    let euler_characteristic =
        mesh.vertices.len() as i64 - edges.len() as i64 + mesh.triangles.len() as i64;

    let is_manifold = non_manifold_edge_count == 0;
    let is_watertight = boundary_edge_count == 0
        && non_manifold_edge_count == 0
        && orientation_consistent
        && !mesh.triangles.is_empty();

    ValidationResult {
        is_watertight,
        is_manifold,
        orientation_consistent,
        boundary_loop_count,
        non_manifold_edge_count,
        component_count,
        euler_characteristic,
        degenerate_triangle_count,
    }
}

/// Axis-aligned bounding box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aabb {
    pub min: Point3<f64>,
    pub max: Point3<f64>,
}

impl Aabb {
    pub fn of_points<'a>(points: impl IntoIterator<Item = &'a Point3<f64>>) -> Self {
        let mut min = Point3::new(f64::INFINITY, f64::INFINITY, f64::INFINITY);
        let mut max = Point3::new(f64::NEG_INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
        for p in points {
            for a in 0..3 {
                min[a] = min[a].min(p[a]);
                max[a] = max[a].max(p[a]);
            }
        }
        Aabb { min, max }
    }

    pub fn diagonal(&self) -> f64 {
        (self.max - self.min).norm()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Measurements {
    /// Signed enclosed volume via the divergence theorem; meaningful only
    /// for watertight, consistently oriented meshes.
    pub volume: f64,
    pub area: f64,
    pub bbox: Aabb,
}

pub fn measure(mesh: &TriMesh) -> Measurements {
    let mut volume = 0.0;
    let mut area = 0.0;
    for t in &mesh.triangles {
        let [a, b, c] = [
            mesh.vertices[t[0]],
            mesh.vertices[t[1]],
            mesh.vertices[t[2]],
        ];
        volume += a.coords.dot(&b.coords.cross(&c.coords)) / 6.0;
        area += triangle_area(&a, &b, &c);
    }
    Measurements {
        volume,
        area,
        bbox: Aabb::of_points(&mesh.vertices),
    }
}

/// Merge soup vertices within `tolerance` (grid-hash equivalence classes)
/// and drop triangles degenerated by the merge. Returns the welded mesh
/// and the dropped-triangle count.
pub fn weld_vertices(soup: &[[Point3<f64>; 3]], tolerance: f64) -> (TriMesh, usize) {
    let mut vertices: Vec<Point3<f64>> = Vec::new();
    let mut triangles: Vec<[usize; 3]> = Vec::new();
    let mut dropped = 0usize;

    if tolerance <= 0.0 {
        // Exact-bit dedup only.
        let mut seen: HashMap<[u64; 3], usize> = HashMap::new();
        let mut index_of = |p: Point3<f64>, vertices: &mut Vec<Point3<f64>>| {
            let key = [p.x.to_bits(), p.y.to_bits(), p.z.to_bits()];
            *seen.entry(key).or_insert_with(|| {
                vertices.push(p);
                vertices.len() - 1
            })
        };
        for tri in soup {
            let idx = [
                index_of(tri[0], &mut vertices),
                index_of(tri[1], &mut vertices),
                index_of(tri[2], &mut vertices),
            ];
            if idx[0] == idx[1] || idx[1] == idx[2] || idx[0] == idx[2] {
                dropped += 1;
            } else {
                triangles.push(idx);
            }
        }
    } else {
        let cell = tolerance;
        let mut grid: HashMap<(i64, i64, i64), Vec<usize>> = HashMap::new();
        let key = |p: &Point3<f64>| {
            (
                (p.x / cell).floor() as i64,
                (p.y / cell).floor() as i64,
                (p.z / cell).floor() as i64,
            )
        };
        let tol2 = tolerance * tolerance;
        let index_of = |p: Point3<f64>,
                        vertices: &mut Vec<Point3<f64>>,
                        grid: &mut HashMap<(i64, i64, i64), Vec<usize>>| {
            let (kx, ky, kz) = key(&p);
            for dz in -1..=1 {
                for dy in -1..=1 {
                    for dx in -1..=1 {
                        if let Some(cands) = grid.get(&(kx + dx, ky + dy, kz + dz)) {
                            for &c in cands {
                                if (vertices[c] - p).norm_squared() <= tol2 {
                                    return c;
                                }
                            }
                        }
                    }
                }
            }
            vertices.push(p);
            let idx = vertices.len() - 1;
            grid.entry((kx, ky, kz)).or_default().push(idx);
            idx
        };
        for tri in soup {
            let idx = [
                index_of(tri[0], &mut vertices, &mut grid),
                index_of(tri[1], &mut vertices, &mut grid),
                index_of(tri[2], &mut vertices, &mut grid),
            ];
            if idx[0] == idx[1] || idx[1] == idx[2] || idx[0] == idx[2] {
                dropped += 1;
            } else {
                triangles.push(idx);
            }
        }
    }

    (
        TriMesh {
            vertices,
            triangles,
        },
        dropped,
    )
}
