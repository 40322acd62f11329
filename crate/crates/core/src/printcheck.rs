//! Printability analysis: seeded wall-thickness sampling and the
//! pass/fail report that gates the print.

use nalgebra::{Point3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::bvh::Bvh;
use crate::error::{Error, Result};
use crate::mesh::{measure, triangle_area, triangle_normal, validate, TriMesh, ValidationResult};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PrintConfig {
    pub min_wall_mm: f64,
    pub min_feature_mm: f64,
    pub thickness_sample_count: usize,
    pub rng_seed: u64,
    /// When true (the default), a multi-component mesh fails the check.
    pub require_single_component: bool,
}

impl Default for PrintConfig {
    fn default() -> Self {
        PrintConfig {
            min_wall_mm: 1.0,
            min_feature_mm: 0.8,
            thickness_sample_count: 10_000,
            rng_seed: 0,
            require_single_component: true,
        }
    }
}

impl PrintConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.min_wall_mm > 0.0) || !(self.min_feature_mm > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "print thresholds must be > 0 (min_wall {}, min_feature {})",
                self.min_wall_mm, self.min_feature_mm
            )));
        }
        if self.thickness_sample_count < 100 {
            return Err(Error::InvalidParameter(format!(
                "thickness_sample_count must be >= 100, got {}",
                self.thickness_sample_count
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThicknessStats {
    pub min: f64,
    pub p1: f64,
    pub p5: f64,
    pub median: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThinSample {
    pub point_mm: [f64; 3],
    pub thickness_mm: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PrintReport {
    pub report_version: u32,
    pub validation: ValidationResult,
    pub volume_mm3: f64,
    pub area_mm2: f64,
    pub bbox_min_mm: [f64; 3],
    pub bbox_max_mm: [f64; 3],
    /// Absent when the mesh is not watertight (thickness is undefined).
    pub wall_thickness: Option<ThicknessStats>,
    pub thin_sample_points: Vec<ThinSample>,
    pub verdict: Verdict,
    pub reasons: Vec<String>,
}

/// Nearest-rank percentile of an ascending-sorted slice.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    let rank = ((q * n as f64).ceil() as usize).clamp(1, n);
    sorted[rank - 1]
}

/// Sample `thickness_sample_count` surface points uniformly by area and
/// cast a ray inward (against the outward normal) at each; the distance
/// to the first hit is the local wall thickness.
pub fn wall_thickness(
    mesh: &TriMesh,
    config: &PrintConfig,
) -> Result<(ThicknessStats, Vec<ThinSample>)> {
    config.validate()?;
    let validation = validate(mesh);
    if !validation.is_watertight {
        return Err(Error::NotWatertight);
    }
    let m = measure(mesh);
    let diag = (m.bbox.max - m.bbox.min).norm();
    let eps = 1e-6 * diag;

    let mut cumulative = Vec::with_capacity(mesh.triangles.len());
    let mut total = 0.0;
    for t in 0..mesh.triangles.len() {
        let [a, b, c] = mesh.tri_points(t);
        total += triangle_area(&a, &b, &c);
        cumulative.push(total);
    }
    if total <= 0.0 {
        return Err(Error::InvalidParameter("mesh has zero surface area".into()));
    }

    let bvh = Bvh::build(mesh);
    let mut rng = ChaCha8Rng::seed_from_u64(config.rng_seed);
    let mut thicknesses = Vec::with_capacity(config.thickness_sample_count);
    let mut samples: Vec<(Point3<f64>, f64)> = Vec::new();
    for _ in 0..config.thickness_sample_count {
        let pick = rng.random_range(0.0..total);
        let t = cumulative
            .partition_point(|&c| c <= pick)
            .min(mesh.triangles.len() - 1);
        let [a, b, c] = mesh.tri_points(t);
        // Uniform barycentric sample via the square-root trick.
        let (r1, r2): (f64, f64) = (rng.random(), rng.random());
        let s = r1.sqrt();
        let p =
            Point3::from(a.coords * (1.0 - s) + b.coords * (s * (1.0 - r2)) + c.coords * (s * r2));
        let n = triangle_normal(&a, &b, &c);
        if n == Vector3::zeros() {
            continue;
        }
        let inward = -n;
        let origin = p + inward * eps;
        let thickness = match bvh.ray_first_hit(&origin, &inward, 0.0) {
            Some((t_hit, _)) => t_hit + eps,
            None => diag, // should not happen on a watertight mesh
        };
        thicknesses.push(thickness);
        samples.push((p, thickness));
    }
    thicknesses.sort_by(f64::total_cmp);
    let stats = ThicknessStats {
        min: thicknesses[0],
        p1: percentile(&thicknesses, 0.01),
        p5: percentile(&thicknesses, 0.05),
        median: percentile(&thicknesses, 0.50),
    };
    let thin: Vec<ThinSample> = samples
        .into_iter()
        .filter(|&(_, th)| th < config.min_wall_mm)
        .map(|(p, th)| ThinSample {
            point_mm: [p.x, p.y, p.z],
            thickness_mm: th,
        })
        .collect();
    Ok((stats, thin))
}

/// Full printability report; never errors on bad geometry — that becomes
/// a failing verdict with reasons.
pub fn build_report(mesh: &TriMesh, config: &PrintConfig) -> Result<PrintReport> {
    config.validate()?;
    let validation = validate(mesh);
    let m = measure(mesh);
    let mut reasons = Vec::new();
    let (wall, thin) = if validation.is_watertight {
        let (stats, thin) = wall_thickness(mesh, config)?;
        (Some(stats), thin)
    } else {
        (None, Vec::new())
    };
    if !validation.is_watertight {
        reasons.push("mesh is not watertight".to_string());
    }
    if !validation.is_manifold {
        reasons.push("mesh is not manifold".to_string());
    }
    if config.require_single_component && validation.component_count != 1 {
        reasons.push(format!(
            "mesh has {} connected components",
            validation.component_count
        ));
    }
    match &wall {
        Some(stats) if stats.p1 < config.min_wall_mm => reasons.push(format!(
            "1st-percentile wall thickness {:.3} mm below minimum {:.3} mm",
            stats.p1, config.min_wall_mm
        )),
        None => reasons.push("wall thickness undefined (not watertight)".to_string()),
        _ => {}
    }
    let verdict = if reasons.is_empty() {
        Verdict::Pass
    } else {
        Verdict::Fail
    };
    Ok(PrintReport {
        report_version: 1,
        validation,
        volume_mm3: m.volume,
        area_mm2: m.area,
        bbox_min_mm: [m.bbox.min.x, m.bbox.min.y, m.bbox.min.z],
        bbox_max_mm: [m.bbox.max.x, m.bbox.max.y, m.bbox.max.z],
        wall_thickness: wall,
        thin_sample_points: thin,
        verdict,
        reasons,
    })
}

/// Serialize a report with floats rounded to 9 significant digits so the
/// bytes are stable across platforms and repeated runs.
pub fn report_to_json(report: &PrintReport) -> Result<String> {
    let mut value = serde_json::to_value(report)?;
    round_floats(&mut value);
    Ok(serde_json::to_string_pretty(&value)?)
}

fn round_floats(value: &mut serde_json::Value) {
    match value {
        serde_json::Value::Number(n) => {
            if let Some(f) = n.as_f64() {
                if n.as_i64().is_none() && n.as_u64().is_none() {
                    let rounded: f64 = format!("{f:.8e}").parse().unwrap_or(f);
                    if let Some(num) = serde_json::Number::from_f64(rounded) {
                        *value = serde_json::Value::Number(num);
                    }
                }
            }
        }
        serde_json::Value::Array(items) => items.iter_mut().for_each(round_floats),
        serde_json::Value::Object(map) => map.values_mut().for_each(round_floats),
        _ => {}
    }
}
