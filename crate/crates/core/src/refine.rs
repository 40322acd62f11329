//! Triangulation quality: incremental remeshing, Laplacian/Taubin
//! relaxation, and quadric-error-metric decimation.

use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashSet};

use nalgebra::{Matrix3, Point3, Vector3};
use ordered_float::NotNan;

use crate::error::{Error, Result};
use crate::mesh::{edge_map, triangle_normal, validate, TriMesh};

/// Smoothing flavor: plain shrinking Laplacian or Taubin's alternating
/// shrink/inflate steps.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RelaxMode {
    Uniform,
    Taubin { mu: f64 },
}

fn require_manifold(mesh: &TriMesh) -> Result<()> {
    let r = validate(mesh);
    if r.non_manifold_edge_count > 0 || !r.orientation_consistent {
        return Err(Error::NonManifoldInput(format!(
            "{} non-manifold edges, orientation_consistent={}",
            r.non_manifold_edge_count, r.orientation_consistent
        )));
    }
    Ok(())
}

fn boundary_vertices(mesh: &TriMesh) -> Vec<bool> {
    let mut boundary = vec![false; mesh.vertices.len()];
    for (&(u, v), inc) in &edge_map(mesh) {
        if inc.len() == 1 {
            boundary[u] = true;
            boundary[v] = true;
        }
    }
    boundary
}

fn vertex_neighbors(mesh: &TriMesh) -> Vec<Vec<usize>> {
    let mut nbrs: Vec<HashSet<usize>> = vec![HashSet::new(); mesh.vertices.len()];
    for t in &mesh.triangles {
        for e in 0..3 {
            let (u, v) = (t[e], t[(e + 1) % 3]);
            nbrs[u].insert(v);
            nbrs[v].insert(u);
        }
    }
    nbrs.into_iter()
        .map(|s| {
            let mut v: Vec<usize> = s.into_iter().collect();
            v.sort_unstable();
            v
        })
        .collect()
}

/// Move each interior vertex toward the centroid of its 1-ring. Boundary
/// vertices are pinned; connectivity never changes.
pub fn relax(mesh: &TriMesh, iterations: usize, lambda: f64, mode: RelaxMode) -> Result<TriMesh> {
    if !(0.0 < lambda && lambda < 1.0) {
        return Err(Error::InvalidLambda(format!(
            "lambda {lambda} outside (0, 1)"
        )));
    }
    if let RelaxMode::Taubin { mu } = mode {
        if mu >= -lambda {
            return Err(Error::InvalidLambda(format!(
                "taubin requires mu < -lambda, got mu {mu}, lambda {lambda}"
            )));
        }
    }
    let nbrs = vertex_neighbors(mesh);
    let boundary = boundary_vertices(mesh);
    let mut out = mesh.clone();
    let step = |vertices: &[Point3<f64>], factor: f64| -> Vec<Point3<f64>> {
        vertices
            .iter()
            .enumerate()
            .map(|(v, p)| {
                if boundary[v] || nbrs[v].is_empty() {
                    return *p;
                }
                let centroid = nbrs[v]
                    .iter()
                    .map(|&n| vertices[n].coords)
                    .sum::<Vector3<f64>>()
                    / nbrs[v].len() as f64;
                p + (centroid - p.coords) * factor
            })
            .collect()
    };
    for _ in 0..iterations {
        out.vertices = step(&out.vertices, lambda);
        if let RelaxMode::Taubin { mu } = mode {
            out.vertices = step(&out.vertices, mu);
        }
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// QEM decimation
// ---------------------------------------------------------------------------

/// Symmetric 4x4 quadric stored as 10 coefficients.
#[derive(Debug, Clone, Copy, Default)]
struct Quadric {
    a: [f64; 10], // [xx, xy, xz, xw, yy, yz, yw, zz, zw, ww]
}

impl Quadric {
    fn from_plane(n: Vector3<f64>, d: f64) -> Self {
        Quadric {
            a: [
                n.x * n.x,
                n.x * n.y,
                n.x * n.z,
                n.x * d,
                n.y * n.y,
                n.y * n.z,
                n.y * d,
                n.z * n.z,
                n.z * d,
                d * d,
            ],
        }
    }

    fn add(&mut self, o: &Quadric) {
        for i in 0..10 {
            self.a[i] += o.a[i];
        }
    }

    fn scaled(&self, s: f64) -> Quadric {
        let mut q = *self;
        for v in q.a.iter_mut() {
            *v *= s;
        }
        q
    }

    fn error(&self, p: &Point3<f64>) -> f64 {
        let (x, y, z) = (p.x, p.y, p.z);
        let a = &self.a;
        a[0] * x * x
            + 2.0 * a[1] * x * y
            + 2.0 * a[2] * x * z
            + 2.0 * a[3] * x
            + a[4] * y * y
            + 2.0 * a[5] * y * z
            + 2.0 * a[6] * y
            + a[7] * z * z
            + 2.0 * a[8] * z
            + a[9]
    }

    /// Quadric-minimizing point, or None when the system is near singular.
    fn minimizer(&self) -> Option<Point3<f64>> {
        let a = &self.a;
        let m = Matrix3::new(a[0], a[1], a[2], a[1], a[4], a[5], a[2], a[5], a[7]);
        let rhs = Vector3::new(-a[3], -a[6], -a[8]);
        let det = m.determinant();
        let scale = m.norm();
        if scale == 0.0 || det.abs() < 1e-10 * scale.powi(3) {
            return None;
        }
        m.try_inverse().map(|inv| Point3::from(inv * rhs))
    }
}

struct DecimateState {
    vertices: Vec<Point3<f64>>,
    faces: Vec<Option<[usize; 3]>>,
    vertex_faces: Vec<HashSet<usize>>,
    quadrics: Vec<Quadric>,
    boundary: Vec<bool>,
    version: Vec<u64>,
    live_faces: usize,
}

type HeapEntry = Reverse<(NotNan<f64>, usize, usize, u64, u64)>;

impl DecimateState {
    fn neighbors(&self, v: usize) -> HashSet<usize> {
        let mut out = HashSet::new();
        for &f in &self.vertex_faces[v] {
            if let Some(tri) = self.faces[f] {
                for &w in &tri {
                    if w != v {
                        out.insert(w);
                    }
                }
            }
        }
        out
    }

    fn placement(&self, a: usize, b: usize) -> (Point3<f64>, f64) {
        let mut q = self.quadrics[a];
        q.add(&self.quadrics[b]);
        let midpoint = Point3::from((self.vertices[a].coords + self.vertices[b].coords) / 2.0);
        let p = q.minimizer().unwrap_or(midpoint);
        (p, q.error(&p).max(0.0))
    }

    fn edge_entry(&self, a: usize, b: usize) -> HeapEntry {
        let (lo, hi) = (a.min(b), a.max(b));
        let (_, err) = self.placement(lo, hi);
        Reverse((
            NotNan::new(err).unwrap_or_else(|_| NotNan::new(f64::INFINITY).unwrap()),
            lo,
            hi,
            self.version[lo],
            self.version[hi],
        ))
    }

    /// Topological and geometric legality of collapsing b into a at `p`.
    fn collapse_legal(&self, a: usize, b: usize, p: &Point3<f64>) -> bool {
        // Boundary policy: never collapse boundary onto interior; boundary
        // edges themselves stay (boundary-boundary only along a shared
        // boundary edge is still rejected to keep loops intact).
        if self.boundary[a] || self.boundary[b] {
            return false;
        }
        // Link condition: shared neighbors must be exactly the opposite
        // vertices of the faces on edge (a, b).
        let shared_faces: Vec<usize> = self.vertex_faces[a]
            .intersection(&self.vertex_faces[b])
            .copied()
            .collect();
        if shared_faces.len() != 2 {
            return false;
        }
        let mut opposite = HashSet::new();
        for &f in &shared_faces {
            if let Some(tri) = self.faces[f] {
                for &w in &tri {
                    if w != a && w != b {
                        opposite.insert(w);
                    }
                }
            }
        }
        let common: HashSet<usize> = self
            .neighbors(a)
            .intersection(&self.neighbors(b))
            .copied()
            .collect();
        if common != opposite {
            return false;
        }
        // Normal flip guard (90 degrees) on every surviving face.
        for &v in &[a, b] {
            for &f in &self.vertex_faces[v] {
                if shared_faces.contains(&f) {
                    continue;
                }
                let Some(tri) = self.faces[f] else { continue };
                let old = [
                    self.vertices[tri[0]],
                    self.vertices[tri[1]],
                    self.vertices[tri[2]],
                ];
                let new: Vec<Point3<f64>> = tri
                    .iter()
                    .map(|&w| {
                        if w == a || w == b {
                            *p
                        } else {
                            self.vertices[w]
                        }
                    })
                    .collect();
                let n_old = triangle_normal(&old[0], &old[1], &old[2]);
                let n_new = triangle_normal(&new[0], &new[1], &new[2]);
                if n_new.norm() == 0.0 || n_old.dot(&n_new) <= 0.0 {
                    return false;
                }
            }
        }
        true
    }

    fn collapse(&mut self, a: usize, b: usize, p: Point3<f64>) {
        let shared: Vec<usize> = self.vertex_faces[a]
            .intersection(&self.vertex_faces[b])
            .copied()
            .collect();
        for f in shared {
            if let Some(tri) = self.faces[f].take() {
                for &w in &tri {
                    self.vertex_faces[w].remove(&f);
                }
                self.live_faces -= 1;
            }
        }
        let b_faces: Vec<usize> = self.vertex_faces[b].iter().copied().collect();
        for f in b_faces {
            if let Some(tri) = self.faces[f].as_mut() {
                for w in tri.iter_mut() {
                    if *w == b {
                        *w = a;
                    }
                }
                self.vertex_faces[a].insert(f);
            }
        }
        self.vertex_faces[b].clear();
        self.vertices[a] = p;
        let qb = self.quadrics[b];
        self.quadrics[a].add(&qb);
        self.version[a] += 1;
        self.version[b] += 1;
    }
}

/// Quadric-error-metric edge-collapse decimation toward
/// `target_triangles`. Watertight inputs stay watertight.
pub fn decimate(mesh: &TriMesh, target_triangles: usize) -> Result<TriMesh> {
    if target_triangles < 4 {
        return Err(Error::InvalidParameter(format!(
            "decimate target must be >= 4, got {target_triangles}"
        )));
    }
    require_manifold(mesh)?;
    if mesh.triangles.len() <= target_triangles {
        return Ok(mesh.clone());
    }

    let mut quadrics = vec![Quadric::default(); mesh.vertices.len()];
    for t in 0..mesh.triangles.len() {
        let [a, b, c] = mesh.tri_points(t);
        let n = triangle_normal(&a, &b, &c);
        if n.norm() == 0.0 {
            continue;
        }
        let q = Quadric::from_plane(n, -n.dot(&a.coords));
        for &v in &mesh.triangles[t] {
            quadrics[v].add(&q);
        }
    }
    // Boundary constraint planes keep open rims from drifting.
    let edges = edge_map(mesh);
    for (&(u, v), inc) in &edges {
        if inc.len() != 1 {
            continue;
        }
        let tri = mesh.triangles[inc[0].0];
        let [a, b, c] = mesh.tri_points(inc[0].0);
        let face_n = triangle_normal(&a, &b, &c);
        let e = mesh.vertices[v] - mesh.vertices[u];
        let n = e.cross(&face_n);
        let len = n.norm();
        if len == 0.0 {
            continue;
        }
        let n = n / len;
        let q = Quadric::from_plane(n, -n.dot(&mesh.vertices[u].coords)).scaled(1e3);
        let _ = tri;
        quadrics[u].add(&q);
        quadrics[v].add(&q);
    }

    let mut vertex_faces: Vec<HashSet<usize>> = vec![HashSet::new(); mesh.vertices.len()];
    for (f, t) in mesh.triangles.iter().enumerate() {
        for &v in t {
            vertex_faces[v].insert(f);
        }
    }
    let mut state = DecimateState {
        vertices: mesh.vertices.clone(),
        faces: mesh.triangles.iter().map(|t| Some(*t)).collect(),
        vertex_faces,
        quadrics,
        boundary: boundary_vertices(mesh),
        version: vec![0; mesh.vertices.len()],
        live_faces: mesh.triangles.len(),
    };

    let mut heap: BinaryHeap<HeapEntry> = BinaryHeap::new();
    for &(u, v) in edges.keys() {
        heap.push(state.edge_entry(u, v));
    }

    while state.live_faces > target_triangles {
        let Some(Reverse((_, a, b, va, vb))) = heap.pop() else {
            break;
        };
        if state.version[a] != va || state.version[b] != vb {
            continue;
        }
        if !state.neighbors(a).contains(&b) {
            continue;
        }
        let (p, _) = state.placement(a, b);
        if !state.collapse_legal(a, b, &p) {
            continue;
        }
        state.collapse(a, b, p);
        let mut nbrs: Vec<usize> = state.neighbors(a).into_iter().collect();
        nbrs.sort_unstable();
        for n in nbrs {
            heap.push(state.edge_entry(a, n));
        }
    }

    let mut out = TriMesh {
        vertices: state.vertices,
        triangles: state.faces.into_iter().flatten().collect(),
    };
    out.compact();
    Ok(out)
}

// ---------------------------------------------------------------------------
// Incremental remeshing
// ---------------------------------------------------------------------------

fn split_long_edges(mesh: &mut TriMesh, max_len: f64) {
    loop {
        let edges = edge_map(mesh);
        let mut candidates: Vec<((usize, usize), f64)> = edges
            .iter()
            .filter(|(_, inc)| inc.len() == 2)
            .map(|(&(u, v), _)| ((u, v), (mesh.vertices[v] - mesh.vertices[u]).norm()))
            .filter(|&(_, len)| len > max_len)
            .collect();
        if candidates.is_empty() {
            break;
        }
        candidates.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        let mut touched: HashSet<usize> = HashSet::new();
        let mut splits = 0;
        for ((u, v), _) in candidates {
            let inc = &edges[&(u, v)];
            if inc.iter().any(|&(f, _)| touched.contains(&f)) {
                continue;
            }
            let mid = Point3::from((mesh.vertices[u].coords + mesh.vertices[v].coords) / 2.0);
            mesh.vertices.push(mid);
            let m = mesh.vertices.len() - 1;
            for &(f, _) in inc {
                let tri = mesh.triangles[f];
                let pos = (0..3)
                    .find(|&e| {
                        (tri[e] == u && tri[(e + 1) % 3] == v)
                            || (tri[e] == v && tri[(e + 1) % 3] == u)
                    })
                    .unwrap();
                let (p, q, r) = (tri[pos], tri[(pos + 1) % 3], tri[(pos + 2) % 3]);
                mesh.triangles[f] = [p, m, r];
                mesh.triangles.push([m, q, r]);
                touched.insert(f);
                touched.insert(mesh.triangles.len() - 1);
            }
            splits += 1;
        }
        if splits == 0 {
            break;
        }
    }
}

fn collapse_short_edges(mesh: &mut TriMesh, min_len: f64, max_len: f64) {
    let boundary = boundary_vertices(mesh);
    let mut removed_face: Vec<bool> = vec![false; mesh.triangles.len()];
    let mut vertex_faces: Vec<HashSet<usize>> = vec![HashSet::new(); mesh.vertices.len()];
    for (f, t) in mesh.triangles.iter().enumerate() {
        for &v in t {
            vertex_faces[v].insert(f);
        }
    }
    let neighbors = |vertex_faces: &Vec<HashSet<usize>>,
                     tris: &Vec<[usize; 3]>,
                     removed: &Vec<bool>,
                     v: usize| {
        let mut out = HashSet::new();
        for &f in &vertex_faces[v] {
            if removed[f] {
                continue;
            }
            for &w in &tris[f] {
                if w != v {
                    out.insert(w);
                }
            }
        }
        out
    };

    let mut edges: Vec<(usize, usize)> = edge_map(mesh).keys().copied().collect();
    edges.sort_unstable();
    let mut dead: Vec<bool> = vec![false; mesh.vertices.len()];
    for (a, b) in edges {
        if dead[a] || dead[b] || boundary[a] || boundary[b] {
            continue;
        }
        let len = (mesh.vertices[b] - mesh.vertices[a]).norm();
        if len >= min_len {
            continue;
        }
        let na = neighbors(&vertex_faces, &mesh.triangles, &removed_face, a);
        if !na.contains(&b) {
            continue;
        }
        let nb = neighbors(&vertex_faces, &mesh.triangles, &removed_face, b);
        // link condition
        let shared: Vec<usize> = vertex_faces[a]
            .intersection(&vertex_faces[b])
            .copied()
            .filter(|&f| !removed_face[f])
            .collect();
        if shared.len() != 2 {
            continue;
        }
        let mut opposite = HashSet::new();
        for &f in &shared {
            for &w in &mesh.triangles[f] {
                if w != a && w != b {
                    opposite.insert(w);
                }
            }
        }
        let common: HashSet<usize> = na.intersection(&nb).copied().collect();
        if common != opposite {
            continue;
        }
        let mid = Point3::from((mesh.vertices[a].coords + mesh.vertices[b].coords) / 2.0);
        // skip collapses that would create over-long edges or flipped faces
        let mut ok = true;
        for &n in na.union(&nb) {
            if n != a && n != b && (mesh.vertices[n] - mid).norm() > max_len {
                ok = false;
                break;
            }
        }
        if ok {
            for &v in &[a, b] {
                for &f in &vertex_faces[*&v] {
                    if removed_face[f] || shared.contains(&f) {
                        continue;
                    }
                    let tri = mesh.triangles[f];
                    let old = [
                        mesh.vertices[tri[0]],
                        mesh.vertices[tri[1]],
                        mesh.vertices[tri[2]],
                    ];
                    let new: Vec<Point3<f64>> = tri
                        .iter()
                        .map(|&w| {
                            if w == a || w == b {
                                mid
                            } else {
                                mesh.vertices[w]
                            }
                        })
                        .collect();
                    let n_old = triangle_normal(&old[0], &old[1], &old[2]);
                    let n_new = triangle_normal(&new[0], &new[1], &new[2]);
                    if n_new.norm() == 0.0 || n_old.dot(&n_new) <= 0.0 {
                        ok = false;
                        break;
                    }
                }
                if !ok {
                    break;
                }
            }
        }
        if !ok {
            continue;
        }
        for f in shared {
            removed_face[f] = true;
            for &w in &mesh.triangles[f] {
                vertex_faces[w].remove(&f);
            }
        }
        let b_faces: Vec<usize> = vertex_faces[b].iter().copied().collect();
        for f in b_faces {
            if removed_face[f] {
                continue;
            }
            for w in mesh.triangles[f].iter_mut() {
                if *w == b {
                    *w = a;
                }
            }
            vertex_faces[a].insert(f);
        }
        vertex_faces[b].clear();
        mesh.vertices[a] = mid;
        dead[a] = true; // one collapse per vertex per pass keeps things local
        dead[b] = true;
    }
    mesh.triangles = mesh
        .triangles
        .iter()
        .enumerate()
        .filter(|&(f, _)| !removed_face[f])
        .map(|(_, t)| *t)
        .collect();
    mesh.compact();
}

fn flip_for_valence(mesh: &mut TriMesh) {
    let boundary = boundary_vertices(mesh);
    let target = |v: usize| if boundary[v] { 4i64 } else { 6i64 };
    let mut valence: Vec<i64> = vec![0; mesh.vertices.len()];
    let edges = edge_map(mesh);
    for &(u, v) in edges.keys() {
        valence[u] += 1;
        valence[v] += 1;
    }
    let edge_exists: HashSet<(usize, usize)> = edges.keys().copied().collect();
    let mut edge_list: Vec<((usize, usize), Vec<(usize, bool)>)> = edges.into_iter().collect();
    edge_list.sort_by_key(|(k, _)| *k);
    let mut touched: HashSet<usize> = HashSet::new();
    let mut created: HashSet<(usize, usize)> = HashSet::new();
    for ((a, b), inc) in edge_list {
        if inc.len() != 2 || boundary[a] && boundary[b] {
            continue;
        }
        if inc.iter().any(|&(f, _)| touched.contains(&f)) {
            continue;
        }
        let (f1, f2) = (inc[0].0, inc[1].0);
        let t1 = mesh.triangles[f1];
        let t2 = mesh.triangles[f2];
        let c = *t1.iter().find(|&&w| w != a && w != b).unwrap();
        let d = *t2.iter().find(|&&w| w != a && w != b).unwrap();
        if c == d {
            continue;
        }
        let cd = (c.min(d), c.max(d));
        if edge_exists.contains(&cd) || created.contains(&cd) {
            continue;
        }
        let dev = |va: i64, vb: i64, vc: i64, vd: i64| {
            (va - target(a)).pow(2)
                + (vb - target(b)).pow(2)
                + (vc - target(c)).pow(2)
                + (vd - target(d)).pow(2)
        };
        let before = dev(valence[a], valence[b], valence[c], valence[d]);
        let after = dev(
            valence[a] - 1,
            valence[b] - 1,
            valence[c] + 1,
            valence[d] + 1,
        );
        if after >= before {
            continue;
        }
        // Orient the two new faces from the originals: t1 traverses a->b.
        let (p, q) = if t1
            .iter()
            .zip(t1.iter().cycle().skip(1))
            .any(|(&x, &y)| x == a && y == b)
        {
            (a, b)
        } else {
            (b, a)
        };
        let new1 = [p, d, c];
        let new2 = [d, q, c];
        let n1 = triangle_normal(
            &mesh.vertices[new1[0]],
            &mesh.vertices[new1[1]],
            &mesh.vertices[new1[2]],
        );
        let n2 = triangle_normal(
            &mesh.vertices[new2[0]],
            &mesh.vertices[new2[1]],
            &mesh.vertices[new2[2]],
        );
        let old_n = triangle_normal(
            &mesh.vertices[t1[0]],
            &mesh.vertices[t1[1]],
            &mesh.vertices[t1[2]],
        );
        if n1.dot(&old_n) <= 0.1 || n2.dot(&old_n) <= 0.1 {
            continue;
        }
        mesh.triangles[f1] = new1;
        mesh.triangles[f2] = new2;
        valence[a] -= 1;
        valence[b] -= 1;
        valence[c] += 1;
        valence[d] += 1;
        touched.insert(f1);
        touched.insert(f2);
        created.insert(cd);
    }
}

fn tangential_relax(mesh: &mut TriMesh) {
    let boundary = boundary_vertices(mesh);
    let nbrs = vertex_neighbors(mesh);
    let normals = mesh.vertex_normals();
    let old = mesh.vertices.clone();
    for v in 0..mesh.vertices.len() {
        if boundary[v] || nbrs[v].is_empty() {
            continue;
        }
        let centroid =
            nbrs[v].iter().map(|&n| old[n].coords).sum::<Vector3<f64>>() / nbrs[v].len() as f64;
        let d = centroid - old[v].coords;
        let n = normals[v];
        let tangential = d - n * n.dot(&d);
        mesh.vertices[v] = old[v] + tangential * 0.5;
    }
}

/// Incremental isotropic remeshing toward `target_edge` lengths. Boundary
/// vertices and boundary edges are left untouched.
pub fn remesh(mesh: &TriMesh, target_edge: f64, iterations: usize) -> Result<TriMesh> {
    if target_edge <= 0.0 {
        return Err(Error::InvalidParameter(format!(
            "remesh target edge must be > 0, got {target_edge}"
        )));
    }
    require_manifold(mesh)?;
    let mut out = mesh.clone();
    let max_len = 4.0 / 3.0 * target_edge;
    let min_len = 4.0 / 5.0 * target_edge;
    for _ in 0..iterations {
        split_long_edges(&mut out, max_len);
        collapse_short_edges(&mut out, min_len, max_len);
        flip_for_valence(&mut out);
        tangential_relax(&mut out);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::measure;
    use crate::primitives::icosphere;

    fn edge_lengths(m: &TriMesh) -> Vec<f64> {
        edge_map(m)
            .keys()
            .map(|&(u, v)| (m.vertices[v] - m.vertices[u]).norm())
            .collect()
    }

    #[test]
    fn relax_flat_grid_interior_is_fixed_point() {
        // Regular planar grid: interior vertices already sit at their
        // 1-ring centroid.
        let n = 5usize;
        let mut vertices = Vec::new();
        for j in 0..n {
            for i in 0..n {
                vertices.push(Point3::new(i as f64, j as f64, 0.0));
            }
        }
        let mut triangles = Vec::new();
        for j in 0..n - 1 {
            for i in 0..n - 1 {
                let a = j * n + i;
                triangles.push([a, a + 1, a + n + 1]);
                triangles.push([a, a + n + 1, a + n]);
            }
        }
        let m = TriMesh {
            vertices,
            triangles,
        };
        let out = relax(&m, 3, 0.5, RelaxMode::Uniform).unwrap();
        for (a, b) in m.vertices.iter().zip(out.vertices.iter()) {
            assert!((a - b).norm() < 1e-9);
        }
    }

    #[test]
    fn uniform_relax_shrinks_every_iteration() {
        let m = icosphere(10.0, 2);
        let mut prev = measure(&m).volume;
        let mut current = m;
        for _ in 0..10 {
            current = relax(&current, 1, 0.5, RelaxMode::Uniform).unwrap();
            let v = measure(&current).volume;
            assert!(v < prev, "volume must strictly decrease ({v} !< {prev})");
            prev = v;
        }
    }

    #[test]
    fn taubin_preserves_volume_within_two_percent() {
        let m = icosphere(10.0, 3);
        let v0 = measure(&m).volume;
        let out = relax(&m, 10, 0.5, RelaxMode::Taubin { mu: -0.53 }).unwrap();
        let v1 = measure(&out).volume;
        assert!(((v1 - v0) / v0).abs() < 0.02, "dV/V = {}", (v1 - v0) / v0);
    }

    #[test]
    fn relax_preserves_connectivity() {
        let m = icosphere(5.0, 2);
        let out = relax(&m, 4, 0.3, RelaxMode::Uniform).unwrap();
        assert_eq!(out.triangles, m.triangles);
        assert_eq!(out.vertices.len(), m.vertices.len());
    }

    #[test]
    fn relax_rejects_bad_lambda() {
        let m = icosphere(1.0, 0);
        assert!(matches!(
            relax(&m, 1, 1.5, RelaxMode::Uniform),
            Err(Error::InvalidLambda(_))
        ));
        assert!(matches!(
            relax(&m, 1, 0.5, RelaxMode::Taubin { mu: -0.4 }),
            Err(Error::InvalidLambda(_))
        ));
    }

    #[test]
    fn decimate_identity_at_target() {
        let m = icosphere(5.0, 2);
        let out = decimate(&m, m.triangles.len()).unwrap();
        assert_eq!(out.triangles.len(), m.triangles.len());
    }

    #[test]
    fn decimate_tetrahedron_is_identity() {
        let vertices = vec![
            Point3::new(0.0, 0.0, 0.0),
            Point3::new(1.0, 0.0, 0.0),
            Point3::new(0.0, 1.0, 0.0),
            Point3::new(0.0, 0.0, 1.0),
        ];
        let triangles = vec![[0, 2, 1], [0, 1, 3], [1, 2, 3], [0, 3, 2]];
        let m = TriMesh {
            vertices,
            triangles,
        };
        let out = decimate(&m, 4).unwrap();
        assert_eq!(out.triangles.len(), 4);
    }

    #[test]
    fn decimate_sphere_preserves_watertightness_and_shape() {
        let m = icosphere(10.0, 4); // 5120 triangles
        let out = decimate(&m, 600).unwrap();
        assert!(out.triangles.len() <= 600);
        let r = validate(&out);
        assert!(r.is_watertight, "{r:?}");
        assert_eq!(r.component_count, 1);
        // Every surviving vertex should stay near the sphere.
        for v in &out.vertices {
            let d = (v.coords.norm() - 10.0).abs();
            assert!(d < 0.2, "vertex drifted {d} mm");
        }
    }

    #[test]
    fn decimate_never_increases_triangles() {
        let m = icosphere(4.0, 3);
        let out = decimate(&m, 200).unwrap();
        assert!(out.triangles.len() <= m.triangles.len());
    }

    #[test]
    fn remesh_uniform_input_histogram_stable() {
        let m = icosphere(10.0, 3);
        let mean: f64 = edge_lengths(&m).iter().sum::<f64>() / edge_lengths(&m).len() as f64;
        let out = remesh(&m, mean, 2).unwrap();
        let lens = edge_lengths(&out);
        let in_band = lens
            .iter()
            .filter(|&&l| l >= 0.5 * mean && l <= 1.5 * mean)
            .count();
        assert!(in_band as f64 / lens.len() as f64 > 0.95);
        let dv = (measure(&out).volume - measure(&m).volume).abs() / measure(&m).volume;
        assert!(dv < 0.05, "dv {dv}");
    }

    #[test]
    fn remesh_icosphere_to_one_mm() {
        let m = icosphere(10.0, 3);
        let out = remesh(&m, 1.0, 4).unwrap();
        let lens = edge_lengths(&out);
        let in_band = lens.iter().filter(|&&l| (0.5..=1.5).contains(&l)).count();
        let frac = in_band as f64 / lens.len() as f64;
        assert!(frac >= 0.9, "only {frac:.3} of edges within [0.5, 1.5] mm");
        let dv = (measure(&out).volume - measure(&m).volume).abs() / measure(&m).volume;
        assert!(dv < 0.01, "volume drift {dv}");
        assert!(validate(&out).is_watertight);
    }

    #[test]
    fn remesh_huge_target_still_manifold() {
        let m = icosphere(5.0, 2);
        let out = remesh(&m, 100.0, 3).unwrap();
        let r = validate(&out);
        assert!(r.is_manifold && r.orientation_consistent, "{r:?}");
    }
}
