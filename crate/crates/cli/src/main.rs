//! `cranioforge` — pipeline driver turning CT volumes into validated,
//! printable meshes. One subcommand per stage, plus `run` for a whole
//! declarative pipeline. Machine-readable status on stdout, logs on
//! stderr.

mod config;
mod pipeline;

use std::fmt;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use nalgebra::{Point3, Vector3};
use serde_json::json;

use cranioforge_core::io::{read_obj, read_stl_mesh, write_obj, write_stl, StlFormat};
use cranioforge_core::mask::{apply_edit_script, read_mask, threshold, write_mask};
use cranioforge_core::printcheck::{build_report, report_to_json, PrintConfig, Verdict};
use cranioforge_core::repair::fill_all_holes;
use cranioforge_core::shape::{brush_displace, plane_cut, KeepSide};
use cranioforge_core::volume::read_raw_volume;
use cranioforge_core::{dicom, isosurface, refine, Connectivity, EditScript, TriMesh, Volume};

/// CLI failure with its exit-code class: bad input/flags exit 2, a failed
/// print check exits 1.
#[derive(Debug)]
pub enum CliError {
    BadInput(String),
    CheckFailed,
}

impl CliError {
    pub fn bad_input(msg: impl Into<String>) -> Self {
        CliError::BadInput(msg.into())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::BadInput(msg) => write!(f, "{msg}"),
            CliError::CheckFailed => write!(f, "print check failed"),
        }
    }
}

impl From<cranioforge_core::Error> for CliError {
    fn from(e: cranioforge_core::Error) -> Self {
        CliError::BadInput(e.to_string())
    }
}

#[derive(Parser)]
#[command(
    name = "cranioforge",
    version,
    about = "CT volume to printable mesh pipeline"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Threshold a volume (DICOM directory or raw sidecar) into a bone mask.
    Segment {
        /// DICOM directory or `.vol.json` sidecar
        #[arg(long)]
        volume: PathBuf,
        #[arg(long)]
        lo: i16,
        #[arg(long)]
        hi: i16,
        /// Mask checkpoint stem (writes `<stem>.mask.json` + `.mask.raw`)
        #[arg(long)]
        output: PathBuf,
    },
    /// Replay an edit script against a mask checkpoint.
    MaskEdit {
        /// `.mask.json` sidecar
        #[arg(long)]
        mask: PathBuf,
        /// Edit script JSON
        #[arg(long)]
        script: PathBuf,
        /// Voxel adjacency: 6 or 26
        #[arg(long, default_value_t = 26)]
        connectivity: u8,
        #[arg(long)]
        output: PathBuf,
    },
    /// Extract a closed surface mesh from a mask.
    Extract {
        #[arg(long)]
        mask: PathBuf,
        #[arg(long, default_value_t = 0.0)]
        sigma: f64,
        #[arg(long, default_value_t = 0.5)]
        iso: f64,
        #[arg(long)]
        output: PathBuf,
        /// STL flavor when the output ends in .stl: binary or ascii
        #[arg(long, default_value = "binary")]
        format: String,
    },
    /// Fill boundary loops (all, or only those under a perimeter limit).
    Repair {
        #[arg(long)]
        mesh: PathBuf,
        #[arg(long)]
        max_perimeter: Option<f64>,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value = "binary")]
        format: String,
    },
    /// Remesh / relax / decimate, applied in that order when requested.
    Refine {
        #[arg(long)]
        mesh: PathBuf,
        #[arg(long)]
        remesh_edge: Option<f64>,
        #[arg(long, default_value_t = 3)]
        remesh_iterations: usize,
        #[arg(long)]
        relax_iterations: Option<usize>,
        #[arg(long, default_value_t = 0.5)]
        lambda: f64,
        /// Taubin inflate factor; omit for plain Laplacian
        #[arg(long)]
        mu: Option<f64>,
        #[arg(long)]
        target_triangles: Option<usize>,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value = "binary")]
        format: String,
    },
    /// Cut with a plane, optionally capping the cross-section.
    Cut {
        #[arg(long)]
        mesh: PathBuf,
        /// Plane point, comma-separated mm: x,y,z
        #[arg(long)]
        point: String,
        /// Unit plane normal: x,y,z
        #[arg(long)]
        normal: String,
        #[arg(long, default_value = "positive")]
        keep: String,
        #[arg(long)]
        cap: bool,
        #[arg(long)]
        output: PathBuf,
        /// Also write the discarded half here (two-part printing)
        #[arg(long)]
        emit_both: Option<PathBuf>,
        #[arg(long, default_value = "binary")]
        format: String,
    },
    /// Brush-displace vertices along their normals.
    Sculpt {
        #[arg(long)]
        mesh: PathBuf,
        /// Brush center, mm: x,y,z
        #[arg(long)]
        center: String,
        #[arg(long)]
        radius: f64,
        /// Signed displacement in mm (negative deepens)
        #[arg(long)]
        offset: f64,
        #[arg(long)]
        output: PathBuf,
        #[arg(long, default_value = "binary")]
        format: String,
    },
    /// Printability gate: exit 1 when the verdict is fail.
    Check {
        #[arg(long)]
        mesh: PathBuf,
        /// PrintConfig JSON; defaults apply when omitted
        #[arg(long)]
        config: Option<PathBuf>,
        /// Also write the report JSON here
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Write the printability report without gating the exit code.
    Report {
        #[arg(long)]
        mesh: PathBuf,
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        output: PathBuf,
    },
    /// Execute a whole pipeline config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Directory for per-stage intermediate artifacts
        #[arg(long)]
        checkpoints: Option<PathBuf>,
        /// Print the resolved stage plan without executing
        #[arg(long)]
        dry_run: bool,
    },
}

/// One machine-readable line per completed stage.
pub fn emit_status(
    stage: &str,
    input: &str,
    output: &str,
    started: Instant,
    counts: serde_json::Value,
) {
    let line = json!({
        "stage": stage,
        "input": input,
        "output": output,
        "elapsed_ms": started.elapsed().as_millis() as u64,
        "counts": counts,
    });
    println!("{line}");
}

pub fn parse_connectivity(n: u8) -> Result<Connectivity, CliError> {
    Connectivity::from_number(n)
        .ok_or_else(|| CliError::bad_input(format!("connectivity must be 6 or 26, got {n}")))
}

fn parse_vec3(text: &str, what: &str) -> Result<Vector3<f64>, CliError> {
    let parts: Vec<f64> = text
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|e| CliError::bad_input(format!("{what} '{text}': {e}")))?;
    if parts.len() != 3 {
        return Err(CliError::bad_input(format!(
            "{what} '{text}': expected 3 comma-separated numbers"
        )));
    }
    Ok(Vector3::new(parts[0], parts[1], parts[2]))
}

fn parse_stl_format(text: &str) -> Result<StlFormat, CliError> {
    match text {
        "binary" => Ok(StlFormat::Binary),
        "ascii" => Ok(StlFormat::Ascii),
        other => Err(CliError::bad_input(format!(
            "unknown STL format '{other}' (binary|ascii)"
        ))),
    }
}

fn parse_keep(text: &str) -> Result<KeepSide, CliError> {
    match text {
        "positive" => Ok(KeepSide::Positive),
        "negative" => Ok(KeepSide::Negative),
        other => Err(CliError::bad_input(format!(
            "keep must be positive|negative, got '{other}'"
        ))),
    }
}

/// Volume source: a directory is a DICOM series, a file is a raw sidecar.
pub fn load_volume(path: &Path) -> Result<Volume, CliError> {
    if path.is_dir() {
        Ok(dicom::read_dicom_series(path)?)
    } else {
        Ok(read_raw_volume(path)?)
    }
}

pub fn load_mesh(path: &Path) -> Result<TriMesh, CliError> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("obj") => Ok(read_obj(path)?),
        _ => Ok(read_stl_mesh(path, 1e-9)?),
    }
}

pub fn save_mesh(mesh: &TriMesh, path: &Path, stl_format: StlFormat) -> Result<(), CliError> {
    match path.extension().and_then(|e| e.to_str()) {
        Some("obj") => Ok(write_obj(mesh, path)?),
        _ => Ok(write_stl(mesh, path, stl_format)?),
    }
}

fn load_print_config(path: Option<&Path>) -> Result<PrintConfig, CliError> {
    match path {
        None => Ok(PrintConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| CliError::bad_input(format!("{}: {e}", p.display())))?;
            serde_json::from_str(&text).map_err(|e| {
                CliError::bad_input(format!("{}: invalid print config: {e}", p.display()))
            })
        }
    }
}

fn run_command(command: Command) -> Result<(), CliError> {
    match command {
        Command::Segment {
            volume,
            lo,
            hi,
            output,
        } => {
            let started = Instant::now();
            let vol = load_volume(&volume)?;
            let mask = threshold(&vol, lo, hi)?;
            let sidecar = write_mask(&mask, &output)?;
            emit_status(
                "segment",
                &volume.display().to_string(),
                &sidecar.display().to_string(),
                started,
                json!({"voxels": mask.bits.len(), "voxels_set": mask.count_set()}),
            );
            Ok(())
        }
        Command::MaskEdit {
            mask,
            script,
            connectivity,
            output,
        } => {
            let started = Instant::now();
            let conn = parse_connectivity(connectivity)?;
            let input_mask = read_mask(&mask)?;
            let text = std::fs::read_to_string(&script)
                .map_err(|e| CliError::bad_input(format!("{}: {e}", script.display())))?;
            let script_ops = EditScript::from_json(&text)?;
            let edited = apply_edit_script(&input_mask, &script_ops, conn)?;
            let sidecar = write_mask(&edited, &output)?;
            emit_status(
                "mask_edit",
                &mask.display().to_string(),
                &sidecar.display().to_string(),
                started,
                json!({"ops": script_ops.0.len(), "voxels_set": edited.count_set()}),
            );
            Ok(())
        }
        Command::Extract {
            mask,
            sigma,
            iso,
            output,
            format,
        } => {
            let started = Instant::now();
            let stl_format = parse_stl_format(&format)?;
            let m = read_mask(&mask)?;
            let mesh = isosurface::extract_surface(&m, sigma, iso)?;
            save_mesh(&mesh, &output, stl_format)?;
            emit_status(
                "extract",
                &mask.display().to_string(),
                &output.display().to_string(),
                started,
                json!({"vertices": mesh.vertices.len(), "triangles": mesh.triangles.len()}),
            );
            Ok(())
        }
        Command::Repair {
            mesh,
            max_perimeter,
            output,
            format,
        } => {
            let started = Instant::now();
            let stl_format = parse_stl_format(&format)?;
            let m = load_mesh(&mesh)?;
            let (repaired, filled) = fill_all_holes(&m, max_perimeter)?;
            save_mesh(&repaired, &output, stl_format)?;
            emit_status(
                "repair",
                &mesh.display().to_string(),
                &output.display().to_string(),
                started,
                json!({"holes_filled": filled, "triangles": repaired.triangles.len()}),
            );
            Ok(())
        }
        Command::Refine {
            mesh,
            remesh_edge,
            remesh_iterations,
            relax_iterations,
            lambda,
            mu,
            target_triangles,
            output,
            format,
        } => {
            let started = Instant::now();
            let stl_format = parse_stl_format(&format)?;
            let mut m = load_mesh(&mesh)?;
            if let Some(edge) = remesh_edge {
                m = refine::remesh(&m, edge, remesh_iterations)?;
            }
            if let Some(iters) = relax_iterations {
                let mode = match mu {
                    Some(mu) => refine::RelaxMode::Taubin { mu },
                    None => refine::RelaxMode::Uniform,
                };
                m = refine::relax(&m, iters, lambda, mode)?;
            }
            if let Some(target) = target_triangles {
                m = refine::decimate(&m, target)?;
            }
            save_mesh(&m, &output, stl_format)?;
            emit_status(
                "refine",
                &mesh.display().to_string(),
                &output.display().to_string(),
                started,
                json!({"vertices": m.vertices.len(), "triangles": m.triangles.len()}),
            );
            Ok(())
        }
        Command::Cut {
            mesh,
            point,
            normal,
            keep,
            cap,
            output,
            emit_both,
            format,
        } => {
            let started = Instant::now();
            let stl_format = parse_stl_format(&format)?;
            let m = load_mesh(&mesh)?;
            let p = Point3::from(parse_vec3(&point, "plane point")?);
            let n = parse_vec3(&normal, "plane normal")?;
            let keep_side = parse_keep(&keep)?;
            let kept = plane_cut(&m, p, n, keep_side, cap)?;
            save_mesh(&kept, &output, stl_format)?;
            let mut counts = json!({"triangles": kept.triangles.len()});
            if let Some(other_path) = emit_both {
                let other_side = match keep_side {
                    KeepSide::Positive => KeepSide::Negative,
                    KeepSide::Negative => KeepSide::Positive,
                };
                let other = plane_cut(&m, p, n, other_side, cap)?;
                save_mesh(&other, &other_path, stl_format)?;
                counts["other_triangles"] = json!(other.triangles.len());
            }
            emit_status(
                "cut",
                &mesh.display().to_string(),
                &output.display().to_string(),
                started,
                counts,
            );
            Ok(())
        }
        Command::Sculpt {
            mesh,
            center,
            radius,
            offset,
            output,
            format,
        } => {
            let started = Instant::now();
            let stl_format = parse_stl_format(&format)?;
            let m = load_mesh(&mesh)?;
            let c = Point3::from(parse_vec3(&center, "brush center")?);
            let sculpted = brush_displace(&m, c, radius, offset, None)?;
            let moved = m
                .vertices
                .iter()
                .zip(sculpted.vertices.iter())
                .filter(|(a, b)| a != b)
                .count();
            save_mesh(&sculpted, &output, stl_format)?;
            emit_status(
                "sculpt",
                &mesh.display().to_string(),
                &output.display().to_string(),
                started,
                json!({"vertices_moved": moved}),
            );
            Ok(())
        }
        Command::Check {
            mesh,
            config,
            report,
        } => {
            let started = Instant::now();
            let print_config = load_print_config(config.as_deref())?;
            let m = load_mesh(&mesh)?;
            let built = build_report(&m, &print_config)?;
            let out_desc = match &report {
                Some(path) => {
                    std::fs::write(path, report_to_json(&built)?)
                        .map_err(|e| CliError::bad_input(format!("{}: {e}", path.display())))?;
                    path.display().to_string()
                }
                None => "<none>".to_string(),
            };
            emit_status(
                "check",
                &mesh.display().to_string(),
                &out_desc,
                started,
                json!({
                    "verdict": if built.verdict == Verdict::Pass { "pass" } else { "fail" },
                    "reasons": built.reasons,
                    "watertight": built.validation.is_watertight,
                }),
            );
            if built.verdict == Verdict::Fail {
                return Err(CliError::CheckFailed);
            }
            Ok(())
        }
        Command::Report {
            mesh,
            config,
            output,
        } => {
            let started = Instant::now();
            let print_config = load_print_config(config.as_deref())?;
            let m = load_mesh(&mesh)?;
            let built = build_report(&m, &print_config)?;
            std::fs::write(&output, report_to_json(&built)?)
                .map_err(|e| CliError::bad_input(format!("{}: {e}", output.display())))?;
            emit_status(
                "report",
                &mesh.display().to_string(),
                &output.display().to_string(),
                started,
                json!({"verdict": if built.verdict == Verdict::Pass { "pass" } else { "fail" }}),
            );
            Ok(())
        }
        Command::Run {
            config,
            checkpoints,
            dry_run,
        } => {
            let cfg = config::load_config(&config)?;
            pipeline::run(&cfg, checkpoints.as_deref(), dry_run)
        }
    }
}

fn configure_threads() {
    if let Ok(text) = std::env::var("CRANIOFORGE_THREADS") {
        match text.trim().parse::<usize>() {
            Ok(0) | Err(_) => {} // 0 = auto; leave rayon's default
            Ok(n) => {
                if let Err(e) = rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global()
                {
                    log::warn!("CRANIOFORGE_THREADS: {e}");
                }
            }
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .target(env_logger::Target::Stderr)
        .init();
    configure_threads();
    let cli = Cli::parse();
    match run_command(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::CheckFailed) => {
            log::error!("print check failed");
            ExitCode::from(1)
        }
        Err(CliError::BadInput(msg)) => {
            log::error!("{msg}");
            ExitCode::from(2)
        }
    }
}
