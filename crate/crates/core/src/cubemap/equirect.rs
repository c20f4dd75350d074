//! Equirectangular panorama <-> cubemap conversion (standard spherical
//! sampling, used to synthesize test spheres and to ingest panoramas).

use std::f64::consts::PI;

use super::faces::CubeFaceSet;
use super::geometry::{direction, pixel_to_plane, ALL_FACES};
use crate::error::Result;
use crate::raster::RasterImage;

/// Longitude/latitude of a direction: lon 0 at +Z, increasing toward +X;
/// lat positive toward +Y.
fn lon_lat(dir: [f64; 3]) -> (f64, f64) {
    let lon = dir[0].atan2(dir[2]);
    let lat = dir[1].atan2((dir[0] * dir[0] + dir[2] * dir[2]).sqrt());
    (lon, lat)
}

/// Bilinear panorama sample with longitude wrap-around.
pub fn sample_equirect(pano: &RasterImage, dir: [f64; 3], c: usize) -> f64 {
    let (w, h) = (pano.width, pano.height);
    let (lon, lat) = lon_lat(dir);
    let x = (lon + PI) / (2.0 * PI) * w as f64 - 0.5;
    let y = (0.5 - lat / PI) * h as f64 - 0.5;
    let y = y.clamp(0.0, (h - 1) as f64);
    let x0f = x.floor();
    let fx = x - x0f;
    let x0 = ((x0f as i64).rem_euclid(w as i64)) as usize;
    let x1 = (x0 + 1) % w;
    let y0 = y.floor() as usize;
    let y1 = (y0 + 1).min(h - 1);
    let fy = y - y0 as f64;
    pano.get(y0, x0, c) * (1.0 - fx) * (1.0 - fy)
        + pano.get(y0, x1, c) * fx * (1.0 - fy)
        + pano.get(y1, x0, c) * (1.0 - fx) * fy
        + pano.get(y1, x1, c) * fx * fy
}

/// Render the six cube faces of a panorama.
pub fn equirect_to_cube(pano: &RasterImage, face_size: usize, overlap: usize) -> Result<CubeFaceSet> {
    let ch = pano.channels;
    let mut faces: Vec<RasterImage> = Vec::with_capacity(6);
    for face in ALL_FACES {
        let mut img = RasterImage::new(face_size, face_size, ch);
        for y in 0..face_size {
            let v = pixel_to_plane(y as f64, face_size);
            for x in 0..face_size {
                let u = pixel_to_plane(x as f64, face_size);
                let dir = direction(face, u, v);
                for c in 0..ch {
                    img.set(y, x, c, sample_equirect(pano, dir, c));
                }
            }
        }
        faces.push(img);
    }
    CubeFaceSet::new(faces.try_into().expect("six faces"), overlap)
}

/// Render a panorama from a cube.
pub fn cube_to_equirect(cube: &CubeFaceSet, width: usize, height: usize) -> RasterImage {
    let ch = cube.channels();
    let mut pano = RasterImage::new(height, width, ch);
    for y in 0..height {
        let lat = (0.5 - (y as f64 + 0.5) / height as f64) * PI;
        for x in 0..width {
            let lon = ((x as f64 + 0.5) / width as f64) * 2.0 * PI - PI;
            let dir = [
                lat.cos() * lon.sin(),
                lat.sin(),
                lat.cos() * lon.cos(),
            ];
            for c in 0..ch {
                pano.set(y, x, c, cube.sample(dir, c));
            }
        }
    }
    pano
}

/// Seeded smooth textured panorama for tests and demos.
pub fn synthetic_panorama(width: usize, height: usize, seed: u64) -> RasterImage {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    // A handful of random directional waves gives smooth, seam-free texture.
    let waves: Vec<([f64; 3], f64, f64)> = (0..8)
        .map(|_| {
            let axis = [
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
                rng.gen_range(-1.0..1.0),
            ];
            (axis, rng.gen_range(2.0..7.0), rng.gen_range(0.0..PI))
        })
        .collect();
    let mut pano = RasterImage::new(height, width, 3);
    for y in 0..height {
        let lat = (0.5 - (y as f64 + 0.5) / height as f64) * PI;
        for x in 0..width {
            let lon = ((x as f64 + 0.5) / width as f64) * 2.0 * PI - PI;
            let dir = [lat.cos() * lon.sin(), lat.sin(), lat.cos() * lon.cos()];
            for c in 0..3 {
                let mut v = 0.5;
                for (k, (axis, freq, phase)) in waves.iter().enumerate() {
                    if k % 3 != c {
                        continue;
                    }
                    let proj = axis[0] * dir[0] + axis[1] * dir[1] + axis[2] * dir[2];
                    v += 0.18 * (freq * proj + phase).sin();
                }
                pano.set(y, x, c, v.clamp(0.0, 1.0));
            }
        }
    }
    pano
}
