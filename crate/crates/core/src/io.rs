//! STL (binary + ASCII) and OBJ readers/writers.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use nalgebra::Point3;

use crate::error::{Error, Result};
use crate::mesh::{triangle_normal, weld_vertices, TriMesh};

const STL_HEADER: &[u8; 80] =
    b"cranioforge 0.1.0 binary STL                                                    ";

/// Format a float with 9 significant digits; used everywhere a text format
/// must be byte-deterministic.
pub fn fmt_g9(x: f64) -> String {
    format!("{x:.8e}")
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StlFormat {
    Ascii,
    #[default]
    Binary,
}

fn check_finite(p: &Point3<f64>) -> Result<()> {
    if p.coords.iter().all(|c| c.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFiniteCoordinate)
    }
}

/// Read an STL file as a triangle soup, auto-detecting binary vs ASCII.
pub fn read_stl(path: &Path) -> Result<Vec<[Point3<f64>; 3]>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.len() >= 84 {
        let count = u32::from_le_bytes(bytes[80..84].try_into().unwrap()) as usize;
        if bytes.len() == 84 + 50 * count {
            return parse_binary_stl(&bytes, count);
        }
    }
    let text = std::str::from_utf8(&bytes)
        .map_err(|_| Error::MalformedStl("not valid binary STL and not ASCII text".to_string()))?;
    if text.trim_start().starts_with("solid") {
        return parse_ascii_stl(text);
    }
    if bytes.len() >= 84 {
        let count = u32::from_le_bytes(bytes[80..84].try_into().unwrap()) as usize;
        return Err(Error::MalformedStl(format!(
            "declared {count} facets but payload holds {} bytes",
            bytes.len().saturating_sub(84)
        )));
    }
    Err(Error::MalformedStl("file too short".to_string()))
}

fn parse_binary_stl(bytes: &[u8], count: usize) -> Result<Vec<[Point3<f64>; 3]>> {
    let mut soup = Vec::with_capacity(count);
    for f in 0..count {
        let rec = &bytes[84 + 50 * f..84 + 50 * (f + 1)];
        let mut tri = [Point3::origin(); 3];
        for (v, slot) in tri.iter_mut().enumerate() {
            // skip the 12-byte normal; coordinates start at offset 12
            let at = 12 + v * 12;
            let x = f32::from_le_bytes(rec[at..at + 4].try_into().unwrap()) as f64;
            let y = f32::from_le_bytes(rec[at + 4..at + 8].try_into().unwrap()) as f64;
            let z = f32::from_le_bytes(rec[at + 8..at + 12].try_into().unwrap()) as f64;
            *slot = Point3::new(x, y, z);
            check_finite(slot)?;
        }
        soup.push(tri);
    }
    Ok(soup)
}

fn parse_ascii_stl(text: &str) -> Result<Vec<[Point3<f64>; 3]>> {
    let mut soup = Vec::new();
    let mut current: Vec<Point3<f64>> = Vec::new();
    let mut tokens = text.split_whitespace().peekable();
    let mut saw_endsolid = false;
    while let Some(tok) = tokens.next() {
        match tok {
            "vertex" => {
                let mut coords = [0.0f64; 3];
                for c in coords.iter_mut() {
                    let t = tokens
                        .next()
                        .ok_or_else(|| Error::MalformedStl("truncated vertex".to_string()))?;
                    *c = t
                        .parse()
                        .map_err(|_| Error::MalformedStl(format!("bad coordinate {t:?}")))?;
                }
                let p = Point3::new(coords[0], coords[1], coords[2]);
                check_finite(&p)?;
                current.push(p);
            }
            "endfacet" => {
                if current.len() != 3 {
                    return Err(Error::MalformedStl(format!(
                        "facet with {} vertices",
                        current.len()
                    )));
                }
                soup.push([current[0], current[1], current[2]]);
                current.clear();
            }
            "endsolid" => saw_endsolid = true,
            _ => {}
        }
    }
    if !current.is_empty() {
        return Err(Error::MalformedStl("truncated facet".to_string()));
    }
    if !saw_endsolid {
        return Err(Error::MalformedStl("missing endsolid".to_string()));
    }
    Ok(soup)
}

/// Read an STL file and weld it into an indexed mesh.
pub fn read_stl_mesh(path: &Path, weld_tolerance: f64) -> Result<TriMesh> {
    let soup = read_stl(path)?;
    Ok(weld_vertices(&soup, weld_tolerance).0)
}

/// Write a mesh as STL. Normals are recomputed from winding; the binary
/// writer's output is byte-deterministic for a given mesh.
pub fn write_stl(mesh: &TriMesh, path: &Path, format: StlFormat) -> Result<()> {
    let bytes = match format {
        StlFormat::Binary => stl_binary_bytes(mesh)?,
        StlFormat::Ascii => stl_ascii_bytes(mesh)?,
    };
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn stl_binary_bytes(mesh: &TriMesh) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(84 + 50 * mesh.triangles.len());
    out.extend_from_slice(STL_HEADER);
    out.extend_from_slice(&(mesh.triangles.len() as u32).to_le_bytes());
    for t in 0..mesh.triangles.len() {
        let [a, b, c] = mesh.tri_points(t);
        check_finite(&a)?;
        check_finite(&b)?;
        check_finite(&c)?;
        let n = triangle_normal(&a, &b, &c);
        for v in [n.x, n.y, n.z] {
            out.extend_from_slice(&(v as f32).to_le_bytes());
        }
        for p in [a, b, c] {
            for v in [p.x, p.y, p.z] {
                out.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
        out.extend_from_slice(&0u16.to_le_bytes());
    }
    Ok(out)
}

fn stl_ascii_bytes(mesh: &TriMesh) -> Result<Vec<u8>> {
    let mut out = Vec::new();
    writeln!(out, "solid cranioforge").unwrap();
    for t in 0..mesh.triangles.len() {
        let [a, b, c] = mesh.tri_points(t);
        check_finite(&a)?;
        check_finite(&b)?;
        check_finite(&c)?;
        let n = triangle_normal(&a, &b, &c);
        writeln!(
            out,
            "  facet normal {} {} {}",
            fmt_g9(n.x),
            fmt_g9(n.y),
            fmt_g9(n.z)
        )
        .unwrap();
        writeln!(out, "    outer loop").unwrap();
        for p in [a, b, c] {
            writeln!(
                out,
                "      vertex {} {} {}",
                fmt_g9(p.x),
                fmt_g9(p.y),
                fmt_g9(p.z)
            )
            .unwrap();
        }
        writeln!(out, "    endloop").unwrap();
        writeln!(out, "  endfacet").unwrap();
    }
    writeln!(out, "endsolid cranioforge").unwrap();
    Ok(out)
}

/// Read an OBJ file: `v` and `f` records, 1-based indices, polygons
/// fan-triangulated, normals/texcoords ignored.
pub fn read_obj(path: &Path) -> Result<TriMesh> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut vertices: Vec<Point3<f64>> = Vec::new();
    let mut triangles: Vec<[usize; 3]> = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let mut fields = line.split_whitespace();
        match fields.next() {
            Some("v") => {
                let mut coords = [0.0f64; 3];
                for c in coords.iter_mut() {
                    let t = fields.next().ok_or_else(|| {
                        Error::MalformedObj(format!("line {}: short vertex", lineno + 1))
                    })?;
                    *c = t.parse().map_err(|_| {
                        Error::MalformedObj(format!("line {}: bad coordinate {t:?}", lineno + 1))
                    })?;
                }
                let p = Point3::new(coords[0], coords[1], coords[2]);
                check_finite(&p)?;
                vertices.push(p);
            }
            Some("f") => {
                let mut idx = Vec::new();
                for field in fields {
                    let first = field.split('/').next().unwrap_or("");
                    let i: i64 = first.parse().map_err(|_| {
                        Error::MalformedObj(format!("line {}: bad index {field:?}", lineno + 1))
                    })?;
                    if i < 1 || i as usize > vertices.len() {
                        return Err(Error::MalformedObj(format!(
                            "line {}: index {i} out of range ({} vertices)",
                            lineno + 1,
                            vertices.len()
                        )));
                    }
                    idx.push(i as usize - 1);
                }
                if idx.len() < 3 {
                    return Err(Error::MalformedObj(format!(
                        "line {}: face with {} vertices",
                        lineno + 1,
                        idx.len()
                    )));
                }
                for k in 1..idx.len() - 1 {
                    triangles.push([idx[0], idx[k], idx[k + 1]]);
                }
            }
            _ => {}
        }
    }
    TriMesh::new(vertices, triangles)
}

/// Write an OBJ file (`v`/`f` records only; no normals).
pub fn write_obj(mesh: &TriMesh, path: &Path) -> Result<()> {
    let mut out = Vec::new();
    for p in &mesh.vertices {
        check_finite(p)?;
        writeln!(out, "v {} {} {}", fmt_g9(p.x), fmt_g9(p.y), fmt_g9(p.z)).unwrap();
    }
    for t in &mesh.triangles {
        writeln!(out, "f {} {} {}", t[0] + 1, t[1] + 1, t[2] + 1).unwrap();
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::primitives::cube;

    #[test]
    fn binary_roundtrip_bit_exact() {
        let dir = tempfile::tempdir().unwrap();
        let m = cube(1.0);
        let path = dir.path().join("cube.stl");
        write_stl(&m, &path, StlFormat::Binary).unwrap();
        let soup = read_stl(&path).unwrap();
        assert_eq!(soup.len(), 12);
        for (t, tri) in soup.iter().enumerate() {
            let orig = m.tri_points(t);
            for v in 0..3 {
                for a in 0..3 {
                    assert_eq!(tri[v][a], orig[v][a] as f32 as f64);
                }
            }
        }
        // byte-determinism: rewrite from the welded read-back
        let (welded, _) = weld_vertices(&soup, 1e-6);
        let again = dir.path().join("cube2.stl");
        write_stl(&welded, &again, StlFormat::Binary).unwrap();
        let b1 = std::fs::read(&path).unwrap();
        let b2 = std::fs::read(&again).unwrap();
        assert_eq!(b1, b2);
    }

    #[test]
    fn ascii_single_facet_fixture() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("one.stl");
        std::fs::write(
            &path,
            "solid fixture\n  facet normal 0 0 1\n    outer loop\n      vertex 0 0 0\n      vertex 1 0 0\n      vertex 0 1.5 0\n    endloop\n  endfacet\nendsolid fixture\n",
        )
        .unwrap();
        let soup = read_stl(&path).unwrap();
        assert_eq!(soup.len(), 1);
        assert_eq!(soup[0][2], Point3::new(0.0, 1.5, 0.0));
    }

    #[test]
    fn ascii_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let m = cube(2.0);
        let path = dir.path().join("c.stl");
        write_stl(&m, &path, StlFormat::Ascii).unwrap();
        let soup = read_stl(&path).unwrap();
        assert_eq!(soup.len(), 12);
        for (t, tri) in soup.iter().enumerate() {
            let orig = m.tri_points(t);
            for v in 0..3 {
                assert!((tri[v] - orig[v]).norm() < 1e-7);
            }
        }
    }

    #[test]
    fn binary_count_exceeding_payload_is_malformed() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.stl");
        let mut bytes = vec![0u8; 84 + 50]; // room for 1 facet
        bytes[80..84].copy_from_slice(&10u32.to_le_bytes()); // claims 10
        std::fs::write(&path, &bytes).unwrap();
        assert!(matches!(read_stl(&path), Err(Error::MalformedStl(_))));
    }

    #[test]
    fn truncated_ascii_is_malformed() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("trunc.stl");
        std::fs::write(
            &path,
            "solid x\n facet normal 0 0 1\n outer loop\n vertex 0 0 0\n",
        )
        .unwrap();
        assert!(matches!(read_stl(&path), Err(Error::MalformedStl(_))));
    }

    #[test]
    fn obj_quad_cube_fans_to_12_triangles() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cube.obj");
        std::fs::write(
            &path,
            "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nv 0 0 1\nv 1 0 1\nv 1 1 1\nv 0 1 1\n\
             f 1 4 3 2\nf 5 6 7 8\nf 1 2 6 5\nf 3 4 8 7\nf 1 5 8 4\nf 2 3 7 6\n",
        )
        .unwrap();
        let mesh = read_obj(&path).unwrap();
        assert_eq!(mesh.vertices.len(), 8);
        assert_eq!(mesh.triangles.len(), 12);
    }

    #[test]
    fn obj_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let m = cube(1.0);
        let path = dir.path().join("c.obj");
        write_obj(&m, &path).unwrap();
        let back = read_obj(&path).unwrap();
        assert_eq!(back.triangles, m.triangles);
        for (a, b) in back.vertices.iter().zip(m.vertices.iter()) {
            assert!((a - b).norm() < 1e-8);
        }
    }

    #[test]
    fn obj_index_out_of_range() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.obj");
        std::fs::write(&path, "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 99\n").unwrap();
        assert!(matches!(read_obj(&path), Err(Error::MalformedObj(_))));
    }
}
