//! Run-directory evaluation: per-pair temporal errors for video runs,
//! seam metrics for sphere runs, emitted as JSON and CSV.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cubemap::{CubeFaceSet, ALL_FACES};
use crate::error::{Error, Result};
use crate::io;
use crate::manifest::SequenceManifest;
use crate::metrics::{sphere_seam_metrics, temporal_error};
use crate::raster::{FlowDirection, RasterImage};

/// Sidecar written next to run outputs so `evaluate` knows what it sees.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum RunMeta {
    Video { frames: usize },
    Sphere { face_size: usize, overlap: usize },
}

pub const RUN_META: &str = "run_meta.json";
pub const REPORT_JSON: &str = "report.json";
pub const REPORT_CSV: &str = "report.csv";

impl RunMeta {
    pub fn save(&self, run_dir: &Path) -> Result<()> {
        let path = run_dir.join(RUN_META);
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))?;
        std::fs::write(&path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(run_dir: &Path) -> Result<Self> {
        let path = run_dir.join(RUN_META);
        let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Manifest(e.to_string()))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairRow {
    pub from: usize,
    pub to: usize,
    pub mse: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Report {
    Video {
        pairs: Vec<PairRow>,
        mean_mse: Option<f64>,
        warnings: Vec<String>,
    },
    Sphere {
        e_grad: f64,
        e_grad_cut: f64,
        e_grad_inner: f64,
    },
}

impl Report {
    pub fn to_csv(&self) -> String {
        match self {
            Report::Video { pairs, mean_mse, .. } => {
                let mut out = String::from("from,to,mse\n");
                for p in pairs {
                    out.push_str(&format!(
                        "{},{},{}\n",
                        p.from,
                        p.to,
                        p.mse.map_or(String::new(), |v| v.to_string())
                    ));
                }
                if let Some(m) = mean_mse {
                    out.push_str(&format!("mean,,{m}\n"));
                }
                out
            }
            Report::Sphere { e_grad, e_grad_cut, e_grad_inner } => {
                format!(
                    "metric,value\ne_grad,{e_grad}\ne_grad_cut,{e_grad_cut}\ne_grad_inner,{e_grad_inner}\n"
                )
            }
        }
    }

    pub fn save(&self, run_dir: &Path) -> Result<()> {
        let json = serde_json::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))?;
        let jp = run_dir.join(REPORT_JSON);
        std::fs::write(&jp, json).map_err(|e| Error::io(jp, e))?;
        let cp = run_dir.join(REPORT_CSV);
        std::fs::write(&cp, self.to_csv()).map_err(|e| Error::io(cp, e))
    }
}

pub fn frame_path(run_dir: &Path, index: usize) -> PathBuf {
    run_dir.join("frames").join(format!("{:04}.png", index + 1))
}

pub fn trace_path(run_dir: &Path, index: usize) -> PathBuf {
    run_dir.join("trace").join(format!("{:04}.csv", index + 1))
}

pub fn face_path(dir: &Path, face: crate::cubemap::FaceId) -> PathBuf {
    dir.join(format!("{}.png", face.file_stem()))
}

fn load_run_frames(run_dir: &Path, count: usize) -> Result<Vec<RasterImage>> {
    (0..count).map(|i| io::read_image(frame_path(run_dir, i))).collect()
}

/// Evaluate a stylized video run against ground truth. Pairs with missing
/// ground-truth flow produce a warning and an empty row instead of failing.
pub fn evaluate_video_run(run_dir: &Path, gt_manifest: &Path) -> Result<Report> {
    let RunMeta::Video { frames } = RunMeta::load(run_dir)? else {
        return Err(Error::Manifest("run directory is not a video run".into()));
    };
    let manifest = SequenceManifest::load(gt_manifest)?;
    let base = gt_manifest.parent().unwrap_or(Path::new("."));
    let stylized = load_run_frames(run_dir, frames)?;

    let mut pairs = Vec::new();
    let mut warnings = Vec::new();
    for t in 1..frames {
        let entry = manifest.pairs.iter().find(|p| p.from == t - 1 && p.to == t);
        let row = match entry {
            None => {
                warnings.push(format!("no ground-truth flow for pair ({}, {})", t - 1, t));
                PairRow { from: t - 1, to: t, mse: None }
            }
            Some(entry) => {
                let resolve = |p: &Path| if p.is_absolute() { p.to_path_buf() } else { base.join(p) };
                let flow = io::read_flo(resolve(&entry.forward), FlowDirection::Forward)?;
                let occ = match &entry.occlusion {
                    Some(p) => Some(io::read_mask_pgm(resolve(p))?.2),
                    None => {
                        warnings.push(format!(
                            "no occlusion mask for pair ({}, {}); using all pixels",
                            t - 1,
                            t
                        ));
                        None
                    }
                };
                let mse = temporal_error(&stylized[t], &stylized[t - 1], &flow, occ.as_deref())?;
                if mse.is_none() {
                    warnings.push(format!("pair ({}, {}) has no valid pixels", t - 1, t));
                }
                PairRow { from: t - 1, to: t, mse }
            }
        };
        pairs.push(row);
    }
    let valid: Vec<f64> = pairs.iter().filter_map(|p| p.mse).collect();
    let mean_mse = if valid.is_empty() {
        None
    } else {
        Some(valid.iter().sum::<f64>() / valid.len() as f64)
    };
    Ok(Report::Video { pairs, mean_mse, warnings })
}

/// Evaluate the seams of a stylized sphere run.
pub fn evaluate_sphere_run(run_dir: &Path) -> Result<Report> {
    let RunMeta::Sphere { face_size, overlap } = RunMeta::load(run_dir)? else {
        return Err(Error::Manifest("run directory is not a sphere run".into()));
    };
    let faces_dir = run_dir.join("faces");
    let faces: Vec<RasterImage> = ALL_FACES
        .iter()
        .map(|&f| io::read_image(face_path(&faces_dir, f)))
        .collect::<Result<_>>()?;
    let cube = CubeFaceSet::new(
        faces.try_into().map_err(|_| Error::Manifest("six faces".into()))?,
        overlap,
    )?;
    if cube.size() != face_size {
        return Err(Error::Manifest(format!(
            "face size {} does not match run metadata {face_size}",
            cube.size()
        )));
    }
    let m = sphere_seam_metrics(&cube, overlap)?;
    Ok(Report::Sphere {
        e_grad: m.e_grad,
        e_grad_cut: m.e_grad_cut,
        e_grad_inner: m.e_grad_inner,
    })
}

/// Evaluate whatever kind of run lives in the directory.
pub fn evaluate_run(run_dir: &Path, gt_manifest: Option<&Path>) -> Result<Report> {
    match RunMeta::load(run_dir)? {
        RunMeta::Video { .. } => {
            let gt = gt_manifest.ok_or_else(|| {
                Error::Manifest("video evaluation needs a ground-truth manifest".into())
            })?;
            evaluate_video_run(run_dir, gt)
        }
        RunMeta::Sphere { .. } => evaluate_sphere_run(run_dir),
    }
}
