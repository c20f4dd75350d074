//! Sequential cube-face stylization for spherical images and videos.
//!
//! Faces are stylized on extended canvases in a fixed order; each face's
//! energy carries a prior-consistency term that ties the overlap region to
//! the already-stylized neighbors (and, for videos, to the warped previous
//! frame). Final faces are the cropped cores.

use serde::{Deserialize, Serialize};

use super::faces::{extend_face, CubeFaceSet};
use super::geometry::{FaceId, ALL_FACES};
use super::prior::{build_face_prior, FacePrior, FillPolicy};
use crate::consistency::{shortterm_weights, warp_image};
use crate::energy::TemporalTerm;
use crate::error::{Error, Result};
use crate::manifest::FlowPair;
use crate::perceptual::{style_grams, FeatureExtractor, GramMatrix, LossWeights};
use crate::raster::{RasterImage, WeightMap};
use crate::solver::SolverConfig;
use crate::video::{noise_image, solve_frame};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct SphereConfig {
    pub overlap: usize,
    /// Stylization order; every face after the first has at least one
    /// already-stylized neighbor.
    pub order: Vec<FaceId>,
    pub fill: FillPolicy,
}

impl Default for SphereConfig {
    fn default() -> Self {
        SphereConfig {
            overlap: 64,
            order: vec![
                FaceId::PosZ,
                FaceId::PosX,
                FaceId::NegZ,
                FaceId::NegX,
                FaceId::PosY,
                FaceId::NegY,
            ],
            fill: FillPolicy::Zeros,
        }
    }
}

impl SphereConfig {
    pub fn validate(&self, face_size: usize) -> Result<()> {
        if self.order.len() != 6 {
            return Err(Error::Config("stylization order must list all six faces".into()));
        }
        let mut seen = [false; 6];
        for f in &self.order {
            if seen[f.index()] {
                return Err(Error::Config(format!("face {} repeated in order", f.label())));
            }
            seen[f.index()] = true;
        }
        if self.overlap == 0 || self.overlap >= face_size / 2 {
            return Err(Error::Config(format!(
                "overlap {} invalid for face size {}",
                self.overlap, face_size
            )));
        }
        Ok(())
    }
}

pub struct SphereResult {
    /// Cropped stylized faces (raw optimizer output, clamp at write-out).
    pub cube: CubeFaceSet,
    /// Full extended canvases, used as priors downstream.
    pub extended: [RasterImage; 6],
}

fn face_seed(base: u64, frame: usize, face: FaceId) -> u64 {
    base.wrapping_add(1000 * frame as u64)
        .wrapping_add(face.index() as u64)
}

/// Initialization: prior content where the mask is valid, seeded noise in
/// the free region (an all-zero start is a stationary point of the
/// bias-free extractor losses).
fn init_from_prior(prior: &FacePrior, seed: u64) -> RasterImage {
    let p = &prior.prior;
    let mut init = noise_image(p.height, p.width, p.channels, seed);
    for px in 0..prior.mask.weights.len() {
        if prior.mask.weights[px] == 1.0 {
            for c in 0..p.channels {
                init.data[px * p.channels + c] = p.data[px * p.channels + c];
            }
        }
    }
    init
}

pub struct SphereStylizer<'a> {
    pub extractor: &'a FeatureExtractor,
    pub weights: LossWeights,
    pub solver: SolverConfig,
    pub config: SphereConfig,
    pub seed: u64,
}

impl SphereStylizer<'_> {
    pub fn run(&self, cube: &CubeFaceSet, style: &RasterImage) -> Result<SphereResult> {
        let grams = style_grams(self.extractor, style)?;
        self.stylize_frame(cube, &grams, None, 0)
    }

    /// Stylize one spherical frame. `temporal` optionally supplies, per
    /// face, the warped previous extended frame and its weight map.
    fn stylize_frame(
        &self,
        cube: &CubeFaceSet,
        grams: &[(usize, GramMatrix)],
        temporal: Option<&[(RasterImage, WeightMap); 6]>,
        frame: usize,
    ) -> Result<SphereResult> {
        let size = cube.size();
        self.config.validate(size)?;
        self.weights.validate()?;
        let o = self.config.overlap;
        let ch = cube.channels();

        let mut extended: [Option<RasterImage>; 6] = Default::default();
        let mut done: Vec<FaceId> = Vec::with_capacity(6);
        for &face in &self.config.order {
            let content_ext = extend_face(cube, face, o);
            let refs: [Option<&RasterImage>; 6] =
                std::array::from_fn(|i| extended[i].as_ref());
            let border = build_face_prior(
                face,
                size,
                o,
                ch,
                &refs,
                &done,
                self.config.fill,
                face_seed(self.seed, frame, face).wrapping_add(71),
            );

            // Merge border strips over the temporal prior: the border is the
            // hard seam constraint and wins on the overlap strips.
            let prior = match temporal {
                Some(warped) => {
                    let (warp_img, warp_map) = &warped[face.index()];
                    let mut prior = border;
                    for px in 0..prior.mask.weights.len() {
                        if prior.mask.weights[px] == 0.0 && warp_map.weights[px] == 1.0 {
                            for c in 0..ch {
                                prior.prior.data[px * ch + c] = warp_img.data[px * ch + c];
                            }
                            prior.mask.weights[px] = 1.0;
                        }
                    }
                    prior
                }
                None => border,
            };

            let init = init_from_prior(&prior, face_seed(self.seed, frame, face));
            let terms = vec![TemporalTerm {
                target: prior.prior,
                weights: prior.mask,
            }];
            let (img, _) = solve_frame(
                self.extractor,
                &content_ext,
                grams,
                terms,
                self.weights,
                &self.solver,
                &init,
            )?;
            extended[face.index()] = Some(img);
            done.push(face);
        }

        let extended: [RasterImage; 6] =
            std::array::from_fn(|i| extended[i].take().expect("all faces stylized"));
        let faces: [RasterImage; 6] = std::array::from_fn(|i| extended[i].crop(o, o, size, size));
        Ok(SphereResult {
            cube: CubeFaceSet::new(faces, o)?,
            extended,
        })
    }

    /// Stylize a spherical video: per face, the prior blends the warped
    /// previous stylized frame with the border strips of already-stylized
    /// neighbors in the current frame.
    ///
    /// `flows` holds one `FlowPair` per face per consecutive frame pair,
    /// defined on the extended canvas grid.
    pub fn run_video(
        &self,
        cubes: &[CubeFaceSet],
        flows: &[[FlowPair; 6]],
        style: &RasterImage,
    ) -> Result<Vec<SphereResult>> {
        if cubes.is_empty() {
            return Err(Error::Manifest("empty spherical sequence".into()));
        }
        if flows.len() + 1 != cubes.len() {
            return Err(Error::Manifest(format!(
                "need {} flow sets for {} frames, got {}",
                cubes.len() - 1,
                cubes.len(),
                flows.len()
            )));
        }
        let grams = style_grams(self.extractor, style)?;
        let mut results: Vec<SphereResult> = Vec::with_capacity(cubes.len());
        for (t, cube) in cubes.iter().enumerate() {
            let temporal = if t == 0 {
                None
            } else {
                let prev = &results[t - 1];
                let mut warped: Vec<(RasterImage, WeightMap)> = Vec::with_capacity(6);
                for face in ALL_FACES {
                    let pair = &flows[t - 1][face.index()];
                    let map = shortterm_weights(&pair.forward, &pair.backward)?;
                    let (img, _) = warp_image(&prev.extended[face.index()], &pair.backward)?;
                    warped.push((img, map));
                }
                let arr: [(RasterImage, WeightMap); 6] =
                    warped.try_into().map_err(|_| Error::Numeric("six faces".into()))?;
                Some(arr)
            };
            let result = self.stylize_frame(cube, &grams, temporal.as_ref(), t)?;
            results.push(result);
        }
        Ok(results)
    }
}
