//! Hole filling, bridging, and excise-and-refill region repair.

use std::collections::HashSet;

use log::warn;
use nalgebra::Point3;

use crate::error::{Error, Result};
use crate::mesh::{boundary_loops, edge_map, triangle_area, BoundaryLoop, TriMesh};

/// Loops longer than this fall back to fan triangulation; the O(n^3) DP
/// is meant for the few-mm holes left after extraction.
const DP_LIMIT: usize = 100;

/// Triangulate `loop_verts` (indices into the mesh, in boundary traversal
/// order) and return triangles wound opposite to the loop direction.
fn triangulate_loop(mesh: &TriMesh, loop_verts: &[usize]) -> Vec<[usize; 3]> {
    let n = loop_verts.len();
    if n < 3 {
        return Vec::new();
    }
    if n == 3 {
        return vec![[loop_verts[0], loop_verts[2], loop_verts[1]]];
    }
    if n > DP_LIMIT {
        warn!("boundary loop of {n} vertices: falling back to fan triangulation");
        // Fan around the vertex closest to the loop centroid.
        let centroid = Point3::from(
            loop_verts
                .iter()
                .map(|&v| mesh.vertices[v].coords)
                .sum::<nalgebra::Vector3<f64>>()
                / n as f64,
        );
        let apex = (0..n)
            .min_by(|&a, &b| {
                (mesh.vertices[loop_verts[a]] - centroid)
                    .norm()
                    .total_cmp(&(mesh.vertices[loop_verts[b]] - centroid).norm())
                    .then(a.cmp(&b))
            })
            .unwrap();
        let mut tris = Vec::with_capacity(n - 2);
        for off in 1..n - 1 {
            let i = (apex + off) % n;
            let j = (apex + off + 1) % n;
            tris.push([loop_verts[apex], loop_verts[j], loop_verts[i]]);
        }
        return tris;
    }

    // Minimum-area triangulation over the open polyline 0..n-1.
    let area = |a: usize, b: usize, c: usize| {
        triangle_area(
            &mesh.vertices[loop_verts[a]],
            &mesh.vertices[loop_verts[b]],
            &mesh.vertices[loop_verts[c]],
        )
    };
    let mut cost = vec![vec![0.0f64; n]; n];
    let mut split = vec![vec![0usize; n]; n];
    for len in 2..n {
        for i in 0..n - len {
            let j = i + len;
            let mut best = f64::INFINITY;
            let mut best_k = i + 1;
            for k in i + 1..j {
                let c = cost[i][k] + cost[k][j] + area(i, k, j);
                if c < best {
                    best = c;
                    best_k = k;
                }
            }
            cost[i][j] = best;
            split[i][j] = best_k;
        }
    }
    let mut tris = Vec::with_capacity(n - 2);
    let mut stack = vec![(0usize, n - 1)];
    while let Some((i, j)) = stack.pop() {
        if j - i < 2 {
            continue;
        }
        let k = split[i][j];
        // Reverse winding relative to the loop's traversal direction.
        tris.push([loop_verts[i], loop_verts[j], loop_verts[k]]);
        stack.push((i, k));
        stack.push((k, j));
    }
    tris
}

fn loop_is_current(mesh: &TriMesh, lp: &BoundaryLoop) -> bool {
    let edges = edge_map(mesh);
    let n = lp.vertices.len();
    if n < 3 {
        return false;
    }
    for i in 0..n {
        let (u, v) = (lp.vertices[i], lp.vertices[(i + 1) % n]);
        if u >= mesh.vertices.len() || v >= mesh.vertices.len() {
            return false;
        }
        match edges.get(&(u.min(v), u.max(v))) {
            Some(inc) if inc.len() == 1 => {}
            _ => return false,
        }
    }
    true
}

/// Close one boundary loop with a minimum-area triangulation.
pub fn fill_hole(mesh: &TriMesh, lp: &BoundaryLoop) -> Result<TriMesh> {
    if !loop_is_current(mesh, lp) {
        return Err(Error::InvalidLoop);
    }
    let mut out = mesh.clone();
    out.triangles.extend(triangulate_loop(mesh, &lp.vertices));
    Ok(out)
}

/// Fill every boundary loop with perimeter at most `max_perimeter`,
/// smallest first; loops are re-derived after each fill.
pub fn fill_all_holes(mesh: &TriMesh, max_perimeter: Option<f64>) -> Result<(TriMesh, usize)> {
    let limit = max_perimeter.unwrap_or(f64::INFINITY);
    let mut out = mesh.clone();
    let mut filled = 0usize;
    loop {
        let loops = boundary_loops(&out)?;
        let target = loops
            .iter()
            .filter(|l| l.perimeter <= limit)
            .min_by(|a, b| a.perimeter.total_cmp(&b.perimeter));
        match target {
            Some(lp) => {
                out.triangles.extend(triangulate_loop(&out, &lp.vertices));
                filled += 1;
            }
            None => break,
        }
    }
    Ok((out, filled))
}

/// Direction (u, v) in which the single incident triangle traverses a
/// boundary edge given as an unordered pair.
fn directed_boundary_edge(mesh: &TriMesh, edge: (usize, usize)) -> Result<(usize, usize)> {
    let key = (edge.0.min(edge.1), edge.0.max(edge.1));
    let edges = edge_map(mesh);
    match edges.get(&key) {
        Some(inc) if inc.len() == 1 => {
            if inc[0].1 {
                Ok((key.0, key.1))
            } else {
                Ok((key.1, key.0))
            }
        }
        _ => Err(Error::NotBoundaryEdge(edge.0, edge.1)),
    }
}

/// Connect two boundary edges with a two-triangle strip. Splits the loop
/// when both edges belong to one loop, merges the loops otherwise.
pub fn bridge(mesh: &TriMesh, edge_a: (usize, usize), edge_b: (usize, usize)) -> Result<TriMesh> {
    let (a0, a1) = directed_boundary_edge(mesh, edge_a)?;
    let (b0, b1) = directed_boundary_edge(mesh, edge_b)?;
    for v in [a0, a1] {
        if v == b0 || v == b1 {
            return Err(Error::SharedVertex(v));
        }
    }
    let mut out = mesh.clone();
    // Quad cycle a1 -> a0 -> b1 -> b0 traverses both edges opposite to
    // their owning triangles.
    out.triangles.push([a1, a0, b1]);
    out.triangles.push([a1, b1, b0]);
    Ok(out)
}

/// Remove every triangle whose centroid lies within `radius` of `seed`.
pub fn remove_region(mesh: &TriMesh, seed: Point3<f64>, radius: f64) -> Result<TriMesh> {
    let keep: Vec<[usize; 3]> = (0..mesh.triangles.len())
        .filter(|&t| (mesh.tri_centroid(t) - seed).norm() > radius)
        .map(|t| mesh.triangles[t])
        .collect();
    if keep.len() == mesh.triangles.len() {
        return Err(Error::NothingRemoved);
    }
    let mut out = TriMesh {
        vertices: mesh.vertices.clone(),
        triangles: keep,
    };
    out.compact();
    Ok(out)
}

/// Excise a region and refill only the holes the excision opened.
pub fn refill_region(mesh: &TriMesh, seed: Point3<f64>, radius: f64) -> Result<TriMesh> {
    // Boundary edges that already existed, in world coordinates: removal
    // reindexes vertices, so identify edges geometrically.
    let pre_edges: HashSet<[u64; 6]> = {
        let edges = edge_map(mesh);
        edges
            .iter()
            .filter(|(_, inc)| inc.len() == 1)
            .map(|(&(u, v), _)| edge_key(&mesh.vertices[u], &mesh.vertices[v]))
            .collect()
    };
    let mut out = remove_region(mesh, seed, radius)?;
    loop {
        let loops = boundary_loops(&out)?;
        let target = loops
            .iter()
            .filter(|lp| {
                let n = lp.vertices.len();
                (0..n).any(|i| {
                    let (u, v) = (lp.vertices[i], lp.vertices[(i + 1) % n]);
                    !pre_edges.contains(&edge_key(&out.vertices[u], &out.vertices[v]))
                })
            })
            .min_by(|a, b| a.perimeter.total_cmp(&b.perimeter));
        match target {
            Some(lp) => {
                let tris = triangulate_loop(&out, &lp.vertices);
                out.triangles.extend(tris);
            }
            None => break,
        }
    }
    Ok(out)
}

fn edge_key(a: &Point3<f64>, b: &Point3<f64>) -> [u64; 6] {
    let ka = [a.x.to_bits(), a.y.to_bits(), a.z.to_bits()];
    let kb = [b.x.to_bits(), b.y.to_bits(), b.z.to_bits()];
    let (lo, hi) = if ka <= kb { (ka, kb) } else { (kb, ka) };
    [lo[0], lo[1], lo[2], hi[0], hi[1], hi[2]]
}
