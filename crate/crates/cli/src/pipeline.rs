//! Pipeline execution for `cranioforge run`: the fixed stage order
//! segment -> edit -> extract -> mesh ops -> check, with optional
//! per-stage checkpointing and a dry-run planner.

use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::{Point3, Vector3};
use serde_json::json;

use cranioforge_core::io::StlFormat;
use cranioforge_core::mask::{apply_edit_script, threshold, write_mask};
use cranioforge_core::printcheck::{build_report, report_to_json, Verdict};
use cranioforge_core::repair::{fill_all_holes, refill_region, remove_region};
use cranioforge_core::shape::{brush_displace, plane_cut};
use cranioforge_core::volume::write_raw_volume;
use cranioforge_core::{isosurface, refine};

use crate::config::{EditScriptSpec, InputSpec, MeshOp, PipelineConfig};
use crate::{emit_status, load_volume, parse_connectivity, save_mesh, CliError};

fn stage_names(cfg: &PipelineConfig) -> Vec<String> {
    let mut stages = vec!["segment".to_string()];
    if cfg.edit_script.is_some() {
        stages.push("edit".to_string());
    }
    stages.push("extract".to_string());
    for (i, op) in cfg.mesh_ops.iter().enumerate() {
        stages.push(format!("mesh_op_{:02}_{}", i, op.name()));
    }
    stages.push("check".to_string());
    stages
}

fn checkpoint(dir: Option<&Path>, name: &str) -> Option<PathBuf> {
    dir.map(|d| d.join(name))
}

pub fn run(
    cfg: &PipelineConfig,
    checkpoints: Option<&Path>,
    dry_run: bool,
) -> Result<(), CliError> {
    if dry_run {
        for stage in stage_names(cfg) {
            println!("{}", json!({"stage": stage, "dry_run": true}));
        }
        return Ok(());
    }
    if let Some(dir) = checkpoints {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::bad_input(format!("{}: {e}", dir.display())))?;
    }
    let connectivity = parse_connectivity(cfg.connectivity)?;

    // segment: load + threshold
    let started = Instant::now();
    let input_path = match &cfg.input {
        InputSpec::DicomDir(p) | InputSpec::RawVolume(p) => p.clone(),
    };
    let volume = load_volume(&input_path)?;
    if let Some(path) = checkpoint(checkpoints, "volume") {
        write_raw_volume(&volume, &path)?;
    }
    let mut mask = threshold(&volume, cfg.threshold.lo, cfg.threshold.hi)?;
    let mask_out = match checkpoint(checkpoints, "mask") {
        Some(path) => write_mask(&mask, &path)?.display().to_string(),
        None => "<memory>".to_string(),
    };
    emit_status(
        "segment",
        &input_path.display().to_string(),
        &mask_out,
        started,
        json!({"voxels": mask.bits.len(), "voxels_set": mask.count_set()}),
    );

    // edit (optional)
    if let Some(spec) = &cfg.edit_script {
        let started = Instant::now();
        let script = spec.load()?;
        mask = apply_edit_script(&mask, &script, connectivity)?;
        let out = match checkpoint(checkpoints, "mask_edited") {
            Some(path) => write_mask(&mask, &path)?.display().to_string(),
            None => "<memory>".to_string(),
        };
        let input_desc = match spec {
            EditScriptSpec::Path(p) => p.display().to_string(),
            EditScriptSpec::Inline(_) => "<inline>".to_string(),
        };
        emit_status(
            "edit",
            &input_desc,
            &out,
            started,
            json!({"ops": script.0.len(), "voxels_set": mask.count_set()}),
        );
    }

    // extract
    let started = Instant::now();
    let mut mesh = isosurface::extract_surface(&mask, cfg.extract.sigma, cfg.extract.iso)?;
    let out = match checkpoint(checkpoints, "extracted.stl") {
        Some(path) => {
            save_mesh(&mesh, &path, StlFormat::Binary)?;
            path.display().to_string()
        }
        None => "<memory>".to_string(),
    };
    emit_status(
        "extract",
        &mask_out,
        &out,
        started,
        json!({"vertices": mesh.vertices.len(), "triangles": mesh.triangles.len()}),
    );

    // ordered repair / refine / shape steps
    for (i, op) in cfg.mesh_ops.iter().enumerate() {
        let started = Instant::now();
        let mut counts = json!({});
        mesh = match op {
            MeshOp::FillHoles { max_perimeter } => {
                let (m, filled) = fill_all_holes(&mesh, *max_perimeter)?;
                counts = json!({"holes_filled": filled});
                m
            }
            MeshOp::RemoveRegion { seed_mm, radius_mm } => {
                remove_region(&mesh, Point3::from(*seed_mm), *radius_mm)?
            }
            MeshOp::RefillRegion { seed_mm, radius_mm } => {
                refill_region(&mesh, Point3::from(*seed_mm), *radius_mm)?
            }
            MeshOp::Decimate { target_triangles } => refine::decimate(&mesh, *target_triangles)?,
            MeshOp::Relax {
                iterations,
                lambda,
                mu,
            } => {
                let mode = match mu {
                    Some(mu) => refine::RelaxMode::Taubin { mu: *mu },
                    None => refine::RelaxMode::Uniform,
                };
                refine::relax(&mesh, *iterations, *lambda, mode)?
            }
            MeshOp::Remesh {
                target_edge_mm,
                iterations,
            } => refine::remesh(&mesh, *target_edge_mm, *iterations)?,
            MeshOp::PlaneCut {
                point_mm,
                normal,
                keep,
                cap,
            } => plane_cut(
                &mesh,
                Point3::from(*point_mm),
                Vector3::from(*normal),
                *keep,
                *cap,
            )?,
            MeshOp::BrushDisplace {
                center_mm,
                radius_mm,
                offset_mm,
            } => brush_displace(
                &mesh,
                Point3::from(*center_mm),
                *radius_mm,
                *offset_mm,
                None,
            )?,
        };
        counts["triangles"] = json!(mesh.triangles.len());
        let stage = format!("mesh_op_{:02}_{}", i, op.name());
        let out = match checkpoint(checkpoints, &format!("{stage}.stl")) {
            Some(path) => {
                save_mesh(&mesh, &path, StlFormat::Binary)?;
                path.display().to_string()
            }
            None => "<memory>".to_string(),
        };
        emit_status(&stage, "<memory>", &out, started, counts);
    }

    // check + final outputs
    let started = Instant::now();
    let report = build_report(&mesh, &cfg.printcheck)?;
    if let Some(path) = &cfg.outputs.stl {
        save_mesh(&mesh, path, cfg.outputs.stl_format)?;
    }
    if let Some(path) = &cfg.outputs.obj {
        save_mesh(&mesh, path, cfg.outputs.stl_format)?;
    }
    let report_out = match &cfg.outputs.report {
        Some(path) => {
            std::fs::write(path, report_to_json(&report)?)
                .map_err(|e| CliError::bad_input(format!("{}: {e}", path.display())))?;
            path.display().to_string()
        }
        None => "<none>".to_string(),
    };
    emit_status(
        "check",
        "<memory>",
        &report_out,
        started,
        json!({
            "verdict": if report.verdict == Verdict::Pass { "pass" } else { "fail" },
            "reasons": report.reasons,
            "triangles": mesh.triangles.len(),
        }),
    );
    if report.verdict == Verdict::Fail {
        return Err(CliError::CheckFailed);
    }
    Ok(())
}
