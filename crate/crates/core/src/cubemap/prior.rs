//! Prior images for sequential cube-face stylization: reprojected border
//! strips of already-stylized neighbors plus a validity mask.

use serde::{Deserialize, Serialize};

use super::geometry::{direction, pixel_to_plane, plane_coords, plane_to_pixel, FaceId};
use crate::raster::{RasterImage, WeightMap};
use crate::video::noise_image;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FillPolicy {
    Zeros,
    SeededNoise,
}

impl Default for FillPolicy {
    fn default() -> Self {
        FillPolicy::Zeros
    }
}

/// A partially valid target image on the extended face canvas.
#[derive(Debug, Clone)]
pub struct FacePrior {
    pub prior: RasterImage,
    pub mask: WeightMap,
}

/// Build the prior for `face` from the already-stylized extended faces.
///
/// Every extended-canvas pixel whose viewing direction falls inside a
/// stylized neighbor's extended plane samples that neighbor (first match in
/// stylization order wins) and gets mask 1. Everything else is filled per
/// policy with mask 0.
pub fn build_face_prior(
    face: FaceId,
    size: usize,
    overlap: usize,
    channels: usize,
    stylized_ext: &[Option<&RasterImage>; 6],
    order: &[FaceId],
    fill: FillPolicy,
    fill_seed: u64,
) -> FacePrior {
    let ext = size + 2 * overlap;
    let limit = 1.0 + 2.0 * overlap as f64 / size as f64;
    let mut prior = match fill {
        FillPolicy::Zeros => RasterImage::new(ext, ext, channels),
        FillPolicy::SeededNoise => noise_image(ext, ext, channels, fill_seed),
    };
    let mut mask = WeightMap::zeros(ext, ext);

    for ye in 0..ext {
        let v = pixel_to_plane(ye as f64 - overlap as f64, size);
        for xe in 0..ext {
            let u = pixel_to_plane(xe as f64 - overlap as f64, size);
            let dir = direction(face, u, v);
            for &candidate in order {
                if candidate == face {
                    continue;
                }
                let Some(img) = stylized_ext[candidate.index()] else {
                    continue;
                };
                let Some((cu, cv)) = plane_coords(candidate, dir) else {
                    continue;
                };
                if cu.abs() > limit || cv.abs() > limit {
                    continue;
                }
                let px = plane_to_pixel(cu, size) + overlap as f64;
                let py = plane_to_pixel(cv, size) + overlap as f64;
                for c in 0..channels {
                    prior.set(ye, xe, c, img.sample_bilinear_clamped(px, py, c));
                }
                let i = ye * ext + xe;
                mask.weights[i] = 1.0;
                break;
            }
        }
    }
    FacePrior { prior, mask }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cubemap::geometry::{edge_link, Edge, ALL_FACES};

    fn ext_image(size: usize, overlap: usize, value: f64) -> RasterImage {
        let e = size + 2 * overlap;
        RasterImage::splat(e, e, 3, value)
    }

    #[test]
    fn first_face_has_empty_mask() {
        let prior = build_face_prior(
            FaceId::PosZ,
            16,
            4,
            3,
            &[None, None, None, None, None, None],
            &[],
            FillPolicy::Zeros,
            0,
        );
        assert!(prior.mask.weights.iter().all(|&w| w == 0.0));
        assert!(prior.prior.data.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn noise_fill_applies_where_invalid() {
        let prior = build_face_prior(
            FaceId::PosZ,
            16,
            4,
            3,
            &[None, None, None, None, None, None],
            &[],
            FillPolicy::SeededNoise,
            9,
        );
        assert!(prior.mask.weights.iter().all(|&w| w == 0.0));
        let mean = prior.prior.data.iter().sum::<f64>() / prior.prior.data.len() as f64;
        assert!((mean - 0.5).abs() < 0.05);
    }

    #[test]
    fn second_face_gets_one_border_strip() {
        let (size, o) = (16, 4);
        let stylized = ext_image(size, o, 0.9);
        // +X was stylized; build the prior for +Z (its left/right neighbor).
        let mut refs: [Option<&RasterImage>; 6] = [None; 6];
        refs[FaceId::PosX.index()] = Some(&stylized);
        let prior = build_face_prior(
            FaceId::PosZ,
            size,
            o,
            3,
            &refs,
            &[FaceId::PosX],
            FillPolicy::Zeros,
            0,
        );
        let ext = size + 2 * o;

        // Which edge of +Z faces +X?
        let edge = crate::cubemap::geometry::ALL_EDGES
            .iter()
            .copied()
            .find(|&e| edge_link(FaceId::PosZ, e).neighbor == FaceId::PosX)
            .unwrap();
        assert_eq!(edge, Edge::Right);

        // The margin strip on that side is fully valid (width = overlap).
        for y in o..o + size {
            for x in ext - o..ext {
                assert_eq!(prior.mask.at(y, x), 1.0, "margin pixel ({y},{x})");
                assert!((prior.prior.get(y, x, 0) - 0.9).abs() < 1e-12);
            }
            // Opposite margin is untouched.
            for x in 0..o {
                assert_eq!(prior.mask.at(y, x), 0.0);
            }
        }
        // A strip just inside the core on the shared edge is covered by the
        // neighbor's extended plane.
        let d_in = (o * size) as f64 / (size + 2 * o) as f64;
        let covered = ext - o - d_in.floor() as usize;
        for y in o + 2..o + size - 2 {
            assert_eq!(prior.mask.at(y, covered), 1.0);
        }
        // Face center is never covered.
        assert_eq!(prior.mask.at(ext / 2, ext / 2), 0.0);
        // Mask binary.
        assert!(prior.mask.weights.iter().all(|&w| w == 0.0 || w == 1.0));
    }

    #[test]
    fn last_face_sees_multiple_strips() {
        let (size, o) = (16, 4);
        let stylized = ext_image(size, o, 0.5);
        let mut refs: [Option<&RasterImage>; 6] = [None; 6];
        let order = [FaceId::PosZ, FaceId::PosX, FaceId::NegZ, FaceId::NegX];
        for f in order {
            refs[f.index()] = Some(&stylized);
        }
        // +Y touches all four stylized faces: all four margins valid.
        let prior = build_face_prior(
            FaceId::PosY,
            size,
            o,
            3,
            &refs,
            &order,
            FillPolicy::Zeros,
            0,
        );
        let ext = size + 2 * o;
        let mut margin_valid = 0usize;
        let mut margin_total = 0usize;
        for y in 0..ext {
            for x in 0..ext {
                let in_core = (o..o + size).contains(&y) && (o..o + size).contains(&x);
                if !in_core {
                    margin_total += 1;
                    if prior.mask.at(y, x) == 1.0 {
                        margin_valid += 1;
                    }
                }
            }
        }
        assert_eq!(margin_valid, margin_total, "entire margin covered");
        assert_eq!(prior.mask.at(ext / 2, ext / 2), 0.0);
        let _ = ALL_FACES;
    }
}
