//! Property-based invariants across modules.

use nalgebra::{Point3, Vector3};
use proptest::prelude::*;

use cranioforge_core::io::{read_stl, stl_binary_bytes, write_stl, StlFormat};
use cranioforge_core::mask::{apply_edit_script, threshold};
use cranioforge_core::mesh::{measure, validate, weld_vertices};
use cranioforge_core::primitives::icosphere;
use cranioforge_core::volume::{read_raw_volume, write_raw_volume};
use cranioforge_core::{Connectivity, EditOp, EditScript, Mask, Volume};

fn small_volume() -> impl Strategy<Value = Volume> {
    (1usize..5, 1usize..5, 1usize..5)
        .prop_flat_map(|(nx, ny, nz)| {
            (
                Just((nx, ny, nz)),
                proptest::collection::vec(any::<i16>(), nx * ny * nz),
            )
        })
        .prop_map(|(dims, scalars)| {
            Volume::new(dims, Vector3::new(1.0, 1.0, 1.0), Point3::origin(), scalars).unwrap()
        })
}

fn small_mask() -> impl Strategy<Value = Mask> {
    (2usize..6, 2usize..6, 2usize..6)
        .prop_flat_map(|(nx, ny, nz)| {
            (
                Just((nx, ny, nz)),
                proptest::collection::vec(any::<bool>(), nx * ny * nz),
            )
        })
        .prop_map(|(dims, bits)| {
            let mut m = Mask::new_empty(dims, Vector3::new(1.0, 1.0, 1.0), Point3::origin());
            m.bits = bits;
            m
        })
}

fn edit_op() -> impl Strategy<Value = EditOp> {
    prop_oneof![
        ((0.0f64..4.0), (0.0f64..4.0), (0.0f64..4.0), (0.5f64..2.0)).prop_map(|(x, y, z, r)| {
            EditOp::EraseBrush {
                center_mm: [x, y, z],
                radius_mm: r,
                note: None,
            }
        }),
        Just(EditOp::KeepLargestComponent { note: None }),
        ((0usize..4), (0usize..4), (0usize..4)).prop_map(|(i, j, k)| EditOp::RemoveComponentAt {
            seed_voxel: [i, j, k],
            note: None,
        }),
    ]
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn volume_roundtrip_is_identity(vol in small_volume()) {
        let dir = tempfile::tempdir().unwrap();
        let sidecar = write_raw_volume(&vol, &dir.path().join("v")).unwrap();
        let back = read_raw_volume(&sidecar).unwrap();
        prop_assert_eq!(back.dims, vol.dims);
        prop_assert_eq!(back.scalars, vol.scalars);
        prop_assert_eq!(back.spacing, vol.spacing);
        prop_assert_eq!(back.origin, vol.origin);
    }

    #[test]
    fn threshold_widening_is_monotone(vol in small_volume(), lo in -500i16..500, w in 0i16..500, grow in 0i16..200) {
        let hi = lo.saturating_add(w);
        let narrow = threshold(&vol, lo, hi).unwrap();
        let wide = threshold(&vol, lo.saturating_sub(grow), hi.saturating_add(grow)).unwrap();
        for (n, w) in narrow.bits.iter().zip(wide.bits.iter()) {
            prop_assert!(!n | w, "widened threshold must be a superset");
        }
    }

    #[test]
    fn threshold_matches_per_voxel_oracle(vol in small_volume(), lo in -300i16..300, w in 0i16..600) {
        let hi = lo.saturating_add(w);
        let mask = threshold(&vol, lo, hi).unwrap();
        for (bit, &s) in mask.bits.iter().zip(vol.scalars.iter()) {
            prop_assert_eq!(*bit, (lo..=hi).contains(&s));
        }
    }

    #[test]
    fn script_concatenation_equals_sequential_application(
        mask in small_mask(),
        ops1 in proptest::collection::vec(edit_op(), 0..3),
        ops2 in proptest::collection::vec(edit_op(), 0..3),
    ) {
        let s1 = EditScript(ops1.clone());
        let s2 = EditScript(ops2.clone());
        let mut all = ops1;
        all.extend(ops2);
        let joined = EditScript(all);
        let step = apply_edit_script(&mask, &s1, Connectivity::TwentySix)
            .and_then(|m| apply_edit_script(&m, &s2, Connectivity::TwentySix));
        let direct = apply_edit_script(&mask, &joined, Connectivity::TwentySix);
        match (step, direct) {
            (Ok(a), Ok(b)) => prop_assert_eq!(a.bits, b.bits),
            (Err(_), Err(_)) => {}
            (a, b) => prop_assert!(false, "divergent outcomes: {} vs {}", a.is_ok(), b.is_ok()),
        }
    }

    #[test]
    fn edit_script_json_roundtrip(ops in proptest::collection::vec(edit_op(), 0..5)) {
        let script = EditScript(ops);
        let json = script.to_json().unwrap();
        let back = EditScript::from_json(&json).unwrap();
        prop_assert_eq!(back.to_json().unwrap(), json);
    }

    #[test]
    fn binary_stl_bytes_are_deterministic_and_roundtrip(subdiv in 0u32..3, radius in 1.0f64..50.0) {
        let mesh = icosphere(radius, subdiv);
        let a = stl_binary_bytes(&mesh).unwrap();
        let b = stl_binary_bytes(&mesh).unwrap();
        prop_assert_eq!(&a, &b);

        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.stl");
        write_stl(&mesh, &path, StlFormat::Binary).unwrap();
        let soup = read_stl(&path).unwrap();
        prop_assert_eq!(soup.len(), mesh.triangles.len());
        let (welded, _) = weld_vertices(&soup, 1e-6);
        let r = validate(&welded);
        prop_assert!(r.is_watertight);
        let dv = (measure(&welded).volume - measure(&mesh).volume).abs();
        // f32 quantization in STL perturbs volume slightly.
        prop_assert!(dv <= 1e-3 * measure(&mesh).volume.max(1.0));
    }

    #[test]
    fn weld_is_idempotent(subdiv in 0u32..3) {
        let mesh = icosphere(7.0, subdiv);
        let soup: Vec<_> = (0..mesh.triangles.len()).map(|t| mesh.tri_points(t)).collect();
        let (once, dropped) = weld_vertices(&soup, 1e-9);
        prop_assert_eq!(dropped, 0);
        let soup2: Vec<_> = (0..once.triangles.len()).map(|t| once.tri_points(t)).collect();
        let (twice, _) = weld_vertices(&soup2, 1e-9);
        prop_assert_eq!(once.vertices.len(), twice.vertices.len());
        prop_assert_eq!(once.triangles.len(), twice.triangles.len());
    }
}
