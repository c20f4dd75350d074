//! Multi-pass stylization: alternating forward/backward sweeps whose pass
//! initializations blend the previous pass's output with the warped
//! current-pass neighbor.

use serde::{Deserialize, Serialize};

use crate::consistency::{shortterm_weights, warp_image};
use crate::energy::TemporalTerm;
use crate::error::{Error, Result};
use crate::manifest::LoadedSequence;
use crate::perceptual::{style_grams, FeatureExtractor, LossWeights};
use crate::raster::{RasterImage, WeightMap};
use crate::solver::SolverConfig;
use crate::video::{noise_image, solve_frame};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct MultiPassConfig {
    pub passes: usize,
    pub iterations_per_pass: usize,
    /// Blend factor between the warped neighbor and the previous pass.
    pub delta: f64,
    /// First pass (1-based) in which the temporal loss participates.
    pub temporal_from_pass: usize,
}

impl Default for MultiPassConfig {
    fn default() -> Self {
        MultiPassConfig {
            passes: 10,
            iterations_per_pass: 100,
            delta: 0.5,
            temporal_from_pass: 4,
        }
    }
}

impl MultiPassConfig {
    pub fn validate(&self) -> Result<()> {
        if self.passes == 0 {
            return Err(Error::Config("multipass needs at least one pass".into()));
        }
        if !(0.0..=1.0).contains(&self.delta) {
            return Err(Error::Config("multipass delta must lie in [0,1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PassDirection {
    /// Independent per-frame processing (first pass only).
    Independent,
    Forward,
    Backward,
}

/// Direction of pass `pass` (1-based): pass 1 is independent, even passes
/// run backward, odd passes forward.
pub fn pass_direction(pass: usize) -> PassDirection {
    if pass == 1 {
        PassDirection::Independent
    } else if pass % 2 == 0 {
        PassDirection::Backward
    } else {
        PassDirection::Forward
    }
}

/// Pass initialization blend: `delta c . warped + ((1-delta) 1 + delta (1-c)) . prev`.
/// With no neighbor (first frame of a forward sweep, last of a backward
/// sweep) the previous pass's output passes through unchanged.
pub fn multipass_init(
    prev_pass_output: &RasterImage,
    neighbor: Option<(&RasterImage, &WeightMap)>,
    delta: f64,
) -> Result<RasterImage> {
    let Some((warped, c)) = neighbor else {
        return Ok(prev_pass_output.clone());
    };
    if !prev_pass_output.same_dims(warped) {
        return Err(Error::dims(
            "multipass_init",
            format!("{}x{}", prev_pass_output.height, prev_pass_output.width),
            format!("{}x{}", warped.height, warped.width),
        ));
    }
    if c.height != warped.height || c.width != warped.width {
        return Err(Error::dims(
            "multipass_init weights",
            format!("{}x{}", warped.height, warped.width),
            format!("{}x{}", c.height, c.width),
        ));
    }
    let ch = prev_pass_output.channels;
    let mut out = RasterImage::new(prev_pass_output.height, prev_pass_output.width, ch);
    for px in 0..c.weights.len() {
        let w = c.weights[px];
        for cc in 0..ch {
            let k = px * ch + cc;
            out.data[k] = delta * w * warped.data[k]
                + ((1.0 - delta) + delta * (1.0 - w)) * prev_pass_output.data[k];
        }
    }
    Ok(out)
}

pub struct MultiPassResult {
    pub frames: Vec<RasterImage>,
    pub directions: Vec<PassDirection>,
    /// Per-pass frame outputs, kept when requested.
    pub pass_outputs: Option<Vec<Vec<RasterImage>>>,
}

pub struct MultiPassStylizer<'a> {
    pub extractor: &'a FeatureExtractor,
    pub weights: LossWeights,
    pub solver: SolverConfig,
    pub config: MultiPassConfig,
    pub seed: u64,
    /// Keep every pass's outputs (for inspection dumps and evaluation).
    pub keep_passes: bool,
}

impl MultiPassStylizer<'_> {
    pub fn run(&self, seq: &LoadedSequence) -> Result<MultiPassResult> {
        self.config.validate()?;
        self.weights.validate()?;
        if seq.is_empty() {
            return Err(Error::Manifest("empty sequence".into()));
        }
        let n = seq.len();
        let grams = style_grams(self.extractor, &seq.style)?;
        let solver = SolverConfig {
            max_iterations: self.config.iterations_per_pass,
            ..self.solver.clone()
        };

        let mut directions = Vec::with_capacity(self.config.passes);
        let mut kept: Vec<Vec<RasterImage>> = Vec::new();

        // Pass 1: every frame independently from seeded noise, no temporal
        // loss. Frames are mutually independent here.
        let mut current: Vec<RasterImage> = Vec::with_capacity(n);
        let independent_weights = LossWeights { gamma: 0.0, ..self.weights };
        for (i, frame) in seq.frames.iter().enumerate() {
            let init = noise_image(
                frame.height,
                frame.width,
                frame.channels,
                self.seed.wrapping_add(i as u64),
            );
            let (img, _) = solve_frame(
                self.extractor,
                frame,
                &grams,
                Vec::new(),
                independent_weights,
                &solver,
                &init,
            )?;
            current.push(img);
        }
        directions.push(PassDirection::Independent);
        if self.keep_passes {
            kept.push(current.clone());
        }

        for pass in 2..=self.config.passes {
            let direction = pass_direction(pass);
            directions.push(direction);
            let temporal_on = pass >= self.config.temporal_from_pass;
            let prev_pass = current.clone();
            let order: Vec<usize> = match direction {
                PassDirection::Backward => (0..n).rev().collect(),
                _ => (0..n).collect(),
            };
            for &i in &order {
                // Warped current-pass neighbor and its weight map, if any.
                let neighbor = match direction {
                    PassDirection::Forward if i > 0 => {
                        let pair = seq.pair(i - 1, i)?;
                        let c = shortterm_weights(&pair.forward, &pair.backward)?;
                        let (warped, _) = warp_image(&current[i - 1], &pair.backward)?;
                        Some((warped, c))
                    }
                    PassDirection::Backward if i + 1 < n => {
                        let rev = seq.pair(i, i + 1)?.reversed();
                        let c = shortterm_weights(&rev.forward, &rev.backward)?;
                        let (warped, _) = warp_image(&current[i + 1], &rev.backward)?;
                        Some((warped, c))
                    }
                    _ => None,
                };
                let init = multipass_init(
                    &prev_pass[i],
                    neighbor.as_ref().map(|(w, c)| (w, c)),
                    self.config.delta,
                )?;
                let terms = match (&neighbor, temporal_on) {
                    (Some((warped, c)), true) => vec![TemporalTerm {
                        target: warped.clone(),
                        weights: c.clone(),
                    }],
                    _ => Vec::new(),
                };
                let weights = if temporal_on {
                    self.weights
                } else {
                    LossWeights { gamma: 0.0, ..self.weights }
                };
                let (img, _) =
                    solve_frame(self.extractor, &seq.frames[i], &grams, terms, weights, &solver, &init)?;
                current[i] = img;
            }
            if self.keep_passes {
                kept.push(current.clone());
            }
        }

        Ok(MultiPassResult {
            frames: current,
            directions,
            pass_outputs: if self.keep_passes { Some(kept) } else { None },
        })
    }
}
