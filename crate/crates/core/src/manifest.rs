//! Sequence manifest: a JSON document listing frames, per-pair flows, the
//! style image and optional ground truth, plus the eager loader the
//! pipelines consume.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io;
use crate::raster::{FlowDirection, FlowField, RasterImage};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PairEntry {
    pub from: usize,
    pub to: usize,
    /// Flow estimated from `from` to `to`, on `from`'s grid.
    pub forward: PathBuf,
    /// Flow estimated from `to` to `from`, on `to`'s grid.
    pub backward: PathBuf,
    /// Mask on `from`'s grid: nonzero where the pixel is occluded in `to`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub occlusion: Option<PathBuf>,
    /// Mask on `to`'s grid: nonzero where the pixel was not visible in `from`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub disocclusion: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SequenceManifest {
    pub frames: Vec<PathBuf>,
    pub style: PathBuf,
    #[serde(default)]
    pub pairs: Vec<PairEntry>,
}

impl SequenceManifest {
    pub fn validate(&self) -> Result<()> {
        if self.frames.is_empty() {
            return Err(Error::Manifest("no frames listed".into()));
        }
        for p in &self.pairs {
            if p.from >= p.to {
                return Err(Error::Manifest(format!(
                    "pair ({}, {}) must have from < to",
                    p.from, p.to
                )));
            }
            if p.to >= self.frames.len() {
                return Err(Error::Manifest(format!(
                    "pair ({}, {}) references a missing frame (have {})",
                    p.from,
                    p.to,
                    self.frames.len()
                )));
            }
        }
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let manifest: SequenceManifest =
            serde_json::from_str(&text).map_err(|e| Error::Manifest(e.to_string()))?;
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Manifest(e.to_string()))?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }
}

/// A frame pair's two flow fields.
#[derive(Debug, Clone)]
pub struct FlowPair {
    pub forward: FlowField,
    pub backward: FlowField,
}

impl FlowPair {
    /// The same pair viewed with the temporal order reversed: what was the
    /// forward flow becomes the reversed pair's backward flow.
    pub fn reversed(&self) -> FlowPair {
        let mut forward = self.backward.clone();
        forward.direction = FlowDirection::Forward;
        let mut backward = self.forward.clone();
        backward.direction = FlowDirection::Backward;
        FlowPair { forward, backward }
    }
}

/// Ground-truth masks attached to a pair, when present.
#[derive(Debug, Clone, Default)]
pub struct PairMasks {
    /// On `from`'s grid: true where the pixel is occluded in `to`.
    pub occlusion: Option<Vec<bool>>,
    /// On `to`'s grid: true where the pixel was not visible in `from`.
    pub disocclusion: Option<Vec<bool>>,
}

/// A fully-loaded sequence ready for stylization or evaluation.
pub struct LoadedSequence {
    pub frames: Vec<RasterImage>,
    pub style: RasterImage,
    pub pairs: HashMap<(usize, usize), FlowPair>,
    pub masks: HashMap<(usize, usize), PairMasks>,
}

impl LoadedSequence {
    pub fn load(manifest: &SequenceManifest, base: impl AsRef<Path>) -> Result<Self> {
        manifest.validate()?;
        let base = base.as_ref();
        let resolve = |p: &Path| -> PathBuf {
            if p.is_absolute() {
                p.to_path_buf()
            } else {
                base.join(p)
            }
        };
        let frames = manifest
            .frames
            .iter()
            .map(|p| io::read_image(resolve(p)))
            .collect::<Result<Vec<_>>>()?;
        let style = io::read_image(resolve(&manifest.style))?;
        let mut pairs = HashMap::new();
        let mut masks = HashMap::new();
        for entry in &manifest.pairs {
            let forward = io::read_flo(resolve(&entry.forward), FlowDirection::Forward)?;
            let backward = io::read_flo(resolve(&entry.backward), FlowDirection::Backward)?;
            let mut pm = PairMasks::default();
            if let Some(p) = &entry.occlusion {
                pm.occlusion = Some(io::read_mask_pgm(resolve(p))?.2);
            }
            if let Some(p) = &entry.disocclusion {
                pm.disocclusion = Some(io::read_mask_pgm(resolve(p))?.2);
            }
            pairs.insert((entry.from, entry.to), FlowPair { forward, backward });
            masks.insert((entry.from, entry.to), pm);
        }
        Ok(LoadedSequence {
            frames,
            style,
            pairs,
            masks,
        })
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn pair(&self, from: usize, to: usize) -> Result<&FlowPair> {
        self.pairs
            .get(&(from, to))
            .ok_or(Error::MissingFlow { from, to })
    }
}
