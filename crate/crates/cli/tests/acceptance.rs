//! Acceptance gate: one test per contract criterion, each printing a
//! single PASS/FAIL line (visible with `--nocapture`; always evaluated).

use std::fs;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use nalgebra::{Point3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cranioforge_core::bvh::Bvh;
use cranioforge_core::io::{read_obj, read_stl, read_stl_mesh, write_stl, StlFormat};
use cranioforge_core::isosurface::extract_surface;
use cranioforge_core::mask::threshold;
use cranioforge_core::mesh::{measure, triangle_area, validate, TriMesh};
use cranioforge_core::primitives::{icosphere, sphere_shell};
use cranioforge_core::printcheck::{wall_thickness, PrintConfig};
use cranioforge_core::refine::{decimate, relax, RelaxMode};
use cranioforge_core::repair::fill_all_holes;
use cranioforge_core::shape::{plane_cut, KeepSide};
use cranioforge_core::{dicom, Error, Mask, Volume};

fn criterion(number: u32, name: &str, ok: bool, detail: &str) {
    println!(
        "acceptance criterion {number} ({name}): {} — {detail}",
        if ok { "PASS" } else { "FAIL" }
    );
    assert!(ok, "criterion {number} ({name}) failed: {detail}");
}

const BIN: &str = env!("CARGO_BIN_EXE_cranioforge");

/// 64^3 phantom: r=20 mm sphere of HU 1000 in HU -1000 background.
fn write_phantom(dir: &Path) -> PathBuf {
    let n = 64usize;
    let mut raw = Vec::with_capacity(n * n * n * 2);
    for z in 0..n {
        for y in 0..n {
            for x in 0..n {
                let d2 = [x, y, z]
                    .iter()
                    .map(|&c| (c as f64 - 32.0).powi(2))
                    .sum::<f64>();
                let hu: i16 = if d2 <= 400.0 { 1000 } else { -1000 };
                raw.extend_from_slice(&hu.to_le_bytes());
            }
        }
    }
    fs::write(dir.join("phantom.vol.raw"), raw).unwrap();
    let sidecar = serde_json::json!({
        "dims": [n, n, n],
        "spacing_mm": [1.0, 1.0, 1.0],
        "origin_mm": [0.0, 0.0, 0.0],
        "dtype": "int16le",
        "data": "phantom.vol.raw",
    });
    let path = dir.join("phantom.vol.json");
    fs::write(&path, serde_json::to_string_pretty(&sidecar).unwrap()).unwrap();
    path
}

fn write_pipeline_config(dir: &Path, volume: &Path) -> PathBuf {
    let config = serde_json::json!({
        "input": {"raw_volume": volume},
        "threshold": {"lo": 226, "hi": 3071},
        "extract": {"sigma": 0.0, "iso": 0.5},
        "mesh_ops": [{"op": "fill_holes"}],
        "printcheck": {"min_wall_mm": 1.0},
        "outputs": {
            "stl": dir.join("out.stl"),
            "report": dir.join("report.json"),
        },
    });
    let path = dir.join("pipeline.json");
    fs::write(&path, serde_json::to_string_pretty(&config).unwrap()).unwrap();
    path
}

fn run_phantom_pipeline(dir: &Path) {
    let volume = write_phantom(dir);
    let config = write_pipeline_config(dir, &volume);
    let output = Command::new(BIN)
        .args(["run", "--config"])
        .arg(&config)
        .current_dir(dir)
        .output()
        .expect("pipeline binary runs");
    assert!(
        output.status.success(),
        "pipeline exit {:?}\nstderr: {}",
        output.status.code(),
        String::from_utf8_lossy(&output.stderr)
    );
}

#[test]
fn criterion_01_sphere_phantom_end_to_end() {
    let started = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    run_phantom_pipeline(dir.path());
    let mesh = read_stl_mesh(&dir.path().join("out.stl"), 1e-6).unwrap();
    let r = validate(&mesh);
    let volume = measure(&mesh).volume;
    let analytic = 33510.3;
    let vol_err = (volume - analytic).abs() / analytic;
    let elapsed = started.elapsed();
    let ok = r.is_watertight && vol_err < 0.03 && elapsed.as_secs_f64() < 10.0;
    criterion(
        1,
        "sphere phantom end-to-end",
        ok,
        &format!(
            "watertight={}, volume={volume:.1} mm^3 (err {:.2}%), elapsed {:.2}s",
            r.is_watertight,
            vol_err * 100.0,
            elapsed.as_secs_f64()
        ),
    );
}

#[test]
fn criterion_02_contouring_robustness() {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut checked = 0usize;
    let mut ok = true;
    for _ in 0..1000 {
        let mut mask = Mask::new_empty((8, 8, 8), Vector3::new(1.0, 1.0, 1.0), Point3::origin());
        for bit in mask.bits.iter_mut() {
            *bit = rng.random_bool(0.35);
        }
        if mask.is_empty() {
            continue;
        }
        let mesh = extract_surface(&mask, 0.0, 0.5).unwrap();
        let r = validate(&mesh);
        if !(r.is_watertight && r.orientation_consistent && r.degenerate_triangle_count == 0) {
            ok = false;
            break;
        }
        checked += 1;
    }
    let elapsed = started.elapsed();
    let ok = ok && elapsed.as_secs_f64() < 5.0;
    criterion(
        2,
        "contouring robustness",
        ok,
        &format!("{checked} non-empty masks in {:.2}s", elapsed.as_secs_f64()),
    );
}

#[test]
fn criterion_03_hole_filling() {
    let full = icosphere(10.0, 3); // 1280 triangles
    assert_eq!(full.triangles.len(), 1280);
    let v_full = measure(&full).volume;
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    // 10 random triangles with pairwise-disjoint vertex sets, so the
    // punctures are independent holes.
    let mut used = vec![false; full.vertices.len()];
    let mut removed = Vec::new();
    while removed.len() < 10 {
        let t = rng.random_range(0..full.triangles.len());
        let tri = full.triangles[t];
        if tri.iter().any(|&v| used[v]) || removed.contains(&t) {
            continue;
        }
        for &v in &tri {
            used[v] = true;
        }
        removed.push(t);
    }
    let punctured = TriMesh {
        vertices: full.vertices.clone(),
        triangles: full
            .triangles
            .iter()
            .enumerate()
            .filter(|(t, _)| !removed.contains(t))
            .map(|(_, tri)| *tri)
            .collect(),
    };
    let (repaired, filled) = fill_all_holes(&punctured, None).unwrap();
    let r = validate(&repaired);
    let vol_err = (measure(&repaired).volume - v_full).abs() / v_full;
    let ok = filled == 10 && r.is_watertight && r.euler_characteristic == 2 && vol_err < 0.01;
    criterion(
        3,
        "hole filling",
        ok,
        &format!(
            "filled={filled}, watertight={}, euler={}, vol err {:.3}%",
            r.is_watertight,
            r.euler_characteristic,
            vol_err * 100.0
        ),
    );
}

#[test]
fn criterion_04_decimation_fidelity() {
    let original = icosphere(10.0, 5); // 20480 triangles
    assert_eq!(original.triangles.len(), 20480);
    let decimated = decimate(&original, 2000).unwrap();
    let r = validate(&decimated);
    let bvh = Bvh::build(&decimated);
    // 10k area-uniform samples on the original surface.
    let mut cumulative = Vec::with_capacity(original.triangles.len());
    let mut total = 0.0;
    for t in 0..original.triangles.len() {
        let [a, b, c] = original.tri_points(t);
        total += triangle_area(&a, &b, &c);
        cumulative.push(total);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut max_dev: f64 = 0.0;
    for _ in 0..10_000 {
        let pick = rng.random_range(0.0..total);
        let t = cumulative.partition_point(|&c| c <= pick);
        let [a, b, c] = original.tri_points(t.min(original.triangles.len() - 1));
        let (r1, r2): (f64, f64) = (rng.random(), rng.random());
        let s = r1.sqrt();
        let p =
            Point3::from(a.coords * (1.0 - s) + b.coords * (s * (1.0 - r2)) + c.coords * (s * r2));
        max_dev = max_dev.max(bvh.distance_to_point(&p));
    }
    let ok = r.is_watertight && decimated.triangles.len() <= 2000 && max_dev < 0.05;
    criterion(
        4,
        "decimation fidelity",
        ok,
        &format!(
            "triangles={}, watertight={}, max deviation {:.4} mm (limit 0.05)",
            decimated.triangles.len(),
            r.is_watertight,
            max_dev
        ),
    );
}

#[test]
fn criterion_05_smoothing_contracts() {
    let mesh = icosphere(10.0, 3);
    let mut current = mesh.clone();
    let mut prev = measure(&current).volume;
    let mut monotone = true;
    for _ in 0..10 {
        current = relax(&current, 1, 0.5, RelaxMode::Uniform).unwrap();
        let v = measure(&current).volume;
        if v >= prev {
            monotone = false;
        }
        prev = v;
    }
    let v0 = measure(&mesh).volume;
    let taubin = relax(&mesh, 10, 0.5, RelaxMode::Taubin { mu: -0.53 }).unwrap();
    let dv = ((measure(&taubin).volume - v0) / v0).abs();
    let ok = monotone && dv < 0.02;
    criterion(
        5,
        "smoothing contracts",
        ok,
        &format!("laplacian monotone={monotone}, taubin |dV|/V={:.4}", dv),
    );
}

#[test]
fn criterion_06_plane_cut() {
    let mesh = icosphere(10.0, 3);
    let total = measure(&mesh).volume;
    let lower = plane_cut(
        &mesh,
        Point3::origin(),
        Vector3::z(),
        KeepSide::Negative,
        true,
    )
    .unwrap();
    let upper = plane_cut(
        &mesh,
        Point3::origin(),
        Vector3::z(),
        KeepSide::Positive,
        true,
    )
    .unwrap();
    let v_lower = measure(&lower).volume;
    let v_upper = measure(&upper).volume;
    let half_err = (v_lower - total / 2.0).abs() / (total / 2.0);
    let sum_err = ((v_lower + v_upper - total) / total).abs();
    let ok = validate(&lower).is_watertight
        && validate(&upper).is_watertight
        && half_err < 0.02
        && sum_err < 1e-6;
    criterion(
        6,
        "plane cut",
        ok,
        &format!(
            "half err {:.3}%, halves-sum rel err {:.2e}",
            half_err * 100.0,
            sum_err
        ),
    );
}

#[test]
fn criterion_07_wall_thickness() {
    let shell = sphere_shell(20.0, 18.0, 3);
    let config = PrintConfig {
        require_single_component: false,
        ..PrintConfig::default()
    };
    let (stats_a, _) = wall_thickness(&shell, &config).unwrap();
    let (stats_b, _) = wall_thickness(&shell, &config).unwrap();
    let ok = (1.8..=2.2).contains(&stats_a.min) && stats_a == stats_b;
    criterion(
        7,
        "wall thickness",
        ok,
        &format!(
            "min={:.3} mm, deterministic={}",
            stats_a.min,
            stats_a == stats_b
        ),
    );
}

#[test]
fn criterion_08_format_fidelity() {
    let dir = tempfile::tempdir().unwrap();
    let mesh = icosphere(5.0, 2);

    // Binary STL: write -> read bit-exact (f32 coordinates).
    let bin_path = dir.path().join("m.stl");
    write_stl(&mesh, &bin_path, StlFormat::Binary).unwrap();
    let soup = read_stl(&bin_path).unwrap();
    let mut bit_exact = soup.len() == mesh.triangles.len();
    for (t, tri) in soup.iter().enumerate() {
        for (corner, p) in tri.iter().enumerate() {
            let orig = mesh.vertices[mesh.triangles[t][corner]];
            for axis in 0..3 {
                if (orig[axis] as f32) != (p[axis] as f32) {
                    bit_exact = false;
                }
            }
        }
    }

    // ASCII STL fixture with a known triangle count.
    let ascii_path = dir.path().join("a.stl");
    write_stl(&mesh, &ascii_path, StlFormat::Ascii).unwrap();
    let ascii_ok = read_stl(&ascii_path).unwrap().len() == mesh.triangles.len();

    // OBJ fixture: a quad fans into 2 triangles.
    let obj_path = dir.path().join("q.obj");
    fs::write(&obj_path, "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n").unwrap();
    let quad = read_obj(&obj_path).unwrap();
    let obj_ok = quad.vertices.len() == 4 && quad.triangles.len() == 2;

    // Malformed inputs: clean errors, never panics.
    let bad_stl = dir.path().join("bad.stl");
    let mut bytes = vec![0u8; 84];
    bytes[80..84].copy_from_slice(&1000u32.to_le_bytes()); // claims 1000 tris, has 0
    fs::write(&bad_stl, bytes).unwrap();
    let stl_err = matches!(read_stl(&bad_stl), Err(Error::MalformedStl(_)));
    let bad_obj = dir.path().join("bad.obj");
    fs::write(&bad_obj, "v 0 0 0\nf 1 2 9\n").unwrap();
    let obj_err = matches!(read_obj(&bad_obj), Err(Error::MalformedObj(_)));

    let ok = bit_exact && ascii_ok && obj_ok && stl_err && obj_err;
    criterion(
        8,
        "format fidelity",
        ok,
        &format!(
            "binary bit-exact={bit_exact}, ascii={ascii_ok}, obj={obj_ok}, errors={}",
            stl_err && obj_err
        ),
    );
}

/// Minimal independent DICOM writer (explicit VR little-endian).
fn write_dicom_slice(path: &Path, z: f64, stored: &[i16]) {
    fn elem(out: &mut Vec<u8>, group: u16, element: u16, vr: &[u8; 2], data: &[u8]) {
        out.extend_from_slice(&group.to_le_bytes());
        out.extend_from_slice(&element.to_le_bytes());
        out.extend_from_slice(vr);
        out.extend_from_slice(&(data.len() as u16).to_le_bytes());
        out.extend_from_slice(data);
    }
    let mut out = vec![0u8; 128];
    out.extend_from_slice(b"DICM");
    elem(&mut out, 0x0002, 0x0010, b"UI", b"1.2.840.10008.1.2.1\0");
    elem(
        &mut out,
        0x0020,
        0x0032,
        b"DS",
        format!("0\\0\\{z} ").as_bytes(),
    );
    elem(&mut out, 0x0028, 0x0010, b"US", &4u16.to_le_bytes());
    elem(&mut out, 0x0028, 0x0011, b"US", &4u16.to_le_bytes());
    elem(&mut out, 0x0028, 0x0030, b"DS", b"1\\1");
    elem(&mut out, 0x0028, 0x0100, b"US", &16u16.to_le_bytes());
    elem(&mut out, 0x0028, 0x0103, b"US", &1u16.to_le_bytes());
    elem(&mut out, 0x0028, 0x1052, b"DS", b"-1024");
    elem(&mut out, 0x0028, 0x1053, b"DS", b"1 ");
    let pixels: Vec<u8> = stored.iter().flat_map(|v| v.to_le_bytes()).collect();
    out.extend_from_slice(&[0xE0, 0x7F, 0x10, 0x00]);
    out.extend_from_slice(b"OW");
    out.extend_from_slice(&[0, 0]);
    out.extend_from_slice(&(pixels.len() as u32).to_le_bytes());
    out.extend_from_slice(&pixels);
    fs::write(path, out).unwrap();
}

#[test]
fn criterion_09_dicom_subset() {
    let stored = |z: usize| -> Vec<i16> { (0..16).map(|i| 1024 + (z * 16 + i) as i16).collect() };
    let load = |names: [&str; 3], zs: [usize; 3]| -> Volume {
        let dir = tempfile::tempdir().unwrap();
        for (name, z) in names.iter().zip(zs) {
            write_dicom_slice(&dir.path().join(name), z as f64, &stored(z));
        }
        dicom::read_dicom_series(dir.path()).unwrap()
    };
    let a = load(["s0.dcm", "s1.dcm", "s2.dcm"], [0, 1, 2]);
    let b = load(["w.dcm", "q.dcm", "m.dcm"], [2, 0, 1]);
    let geometry_ok = a.dims == (4, 4, 3) && a.spacing == Vector3::new(1.0, 1.0, 1.0);
    // HU = stored - 1024, in ascending-z order regardless of filenames.
    let hu_ok = a.scalars == (0..48).collect::<Vec<i16>>();
    let shuffle_ok = a.scalars == b.scalars && a.origin == b.origin && a.spacing == b.spacing;
    let ok = geometry_ok && hu_ok && shuffle_ok;
    criterion(
        9,
        "dicom subset",
        ok,
        &format!("geometry={geometry_ok}, hu={hu_ok}, shuffle-invariant={shuffle_ok}"),
    );
}

#[test]
fn criterion_10_determinism() {
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    run_phantom_pipeline(dir_a.path());
    run_phantom_pipeline(dir_b.path());
    let stl_same = fs::read(dir_a.path().join("out.stl")).unwrap()
        == fs::read(dir_b.path().join("out.stl")).unwrap();
    let report_same = fs::read(dir_a.path().join("report.json")).unwrap()
        == fs::read(dir_b.path().join("report.json")).unwrap();
    let ok = stl_same && report_same;
    criterion(
        10,
        "determinism",
        ok,
        &format!("stl identical={stl_same}, report identical={report_same}"),
    );
}

fn peak_rss_bytes() -> Option<u64> {
    let status = fs::read_to_string("/proc/self/status").ok()?;
    let line = status.lines().find(|l| l.starts_with("VmHWM:"))?;
    let kb: u64 = line.split_whitespace().nth(1)?.parse().ok()?;
    Some(kb * 1024)
}

#[test]
fn criterion_11_performance_guard() {
    let n = 256usize;
    let mut scalars = vec![-1000i16; n * n * n];
    let c = n as f64 / 2.0;
    let r2 = 80.0f64 * 80.0;
    for z in 0..n {
        for y in 0..n {
            for x in 0..n {
                let d2 = (x as f64 - c).powi(2) + (y as f64 - c).powi(2) + (z as f64 - c).powi(2);
                if d2 <= r2 {
                    scalars[(z * n + y) * n + x] = 1000;
                }
            }
        }
    }
    let volume = Volume::new(
        (n, n, n),
        Vector3::new(1.0, 1.0, 1.0),
        Point3::origin(),
        scalars,
    )
    .unwrap();
    let started = Instant::now();
    let mask = threshold(&volume, 226, 3071).unwrap();
    let mesh = extract_surface(&mask, 0.0, 0.5).unwrap();
    let elapsed = started.elapsed();
    let peak = peak_rss_bytes();
    let mem_ok = peak.map_or(true, |b| b < 2 * 1024 * 1024 * 1024);
    let ok = elapsed.as_secs_f64() < 30.0 && mem_ok && !mesh.triangles.is_empty();
    criterion(
        11,
        "performance guard",
        ok,
        &format!(
            "threshold+extract {:.2}s, peak RSS {} MiB, {} triangles",
            elapsed.as_secs_f64(),
            peak.map_or(0, |b| b / (1024 * 1024)),
            mesh.triangles.len()
        ),
    );
}
