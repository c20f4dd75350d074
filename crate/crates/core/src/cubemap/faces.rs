//! Cube face containers, overlap extension and border reprojection.

use super::geometry::{
    direction, edge_link, face_for_direction, pixel_to_plane, plane_coords,
    sample_face, Edge, FaceId, ALL_FACES,
};
use crate::error::{Error, Result};
use crate::raster::RasterImage;

/// Six square faces of a spherical image plus the overlap margin used when
/// stylizing them.
#[derive(Debug, Clone)]
pub struct CubeFaceSet {
    /// Indexed by `FaceId::index()`.
    pub faces: [RasterImage; 6],
    pub overlap: usize,
}

impl CubeFaceSet {
    pub fn new(faces: [RasterImage; 6], overlap: usize) -> Result<Self> {
        let size = faces[0].height;
        for (i, f) in faces.iter().enumerate() {
            if f.height != f.width {
                return Err(Error::Config(format!(
                    "face {} is {}x{}, faces must be square",
                    ALL_FACES[i].label(),
                    f.height,
                    f.width
                )));
            }
            if f.height != size || f.channels != faces[0].channels {
                return Err(Error::Config("faces must share size and channels".into()));
            }
        }
        if overlap >= size / 2 {
            return Err(Error::Config(format!(
                "overlap {overlap} too large for face size {size}"
            )));
        }
        Ok(CubeFaceSet { faces, overlap })
    }

    pub fn solid(size: usize, channels: usize, value: f64, overlap: usize) -> Self {
        let face = RasterImage::splat(size, size, channels, value);
        CubeFaceSet {
            faces: [
                face.clone(),
                face.clone(),
                face.clone(),
                face.clone(),
                face.clone(),
                face,
            ],
            overlap,
        }
    }

    pub fn size(&self) -> usize {
        self.faces[0].height
    }

    pub fn channels(&self) -> usize {
        self.faces[0].channels
    }

    pub fn face(&self, id: FaceId) -> &RasterImage {
        &self.faces[id.index()]
    }

    /// Sample the cube along a direction (dominant face, clamped bilinear).
    pub fn sample(&self, dir: [f64; 3], c: usize) -> f64 {
        let (face, u, v) = face_for_direction(dir);
        sample_face(self.face(face), u, v, c)
    }
}

/// Extend a face by `overlap` pixels on every side; the margin content is
/// the neighbors' imagery reprojected onto this face's plane. The core
/// region is a verbatim copy.
pub fn extend_face(cube: &CubeFaceSet, face: FaceId, overlap: usize) -> RasterImage {
    let size = cube.size();
    let ch = cube.channels();
    let ext = size + 2 * overlap;
    let src = cube.face(face);
    let mut out = RasterImage::new(ext, ext, ch);
    for ye in 0..ext {
        let yc = ye as f64 - overlap as f64;
        let v = pixel_to_plane(yc, size);
        for xe in 0..ext {
            let xc = xe as f64 - overlap as f64;
            let u = pixel_to_plane(xc, size);
            if u.abs() <= 1.0 && v.abs() <= 1.0 {
                let (y, x) = (yc as usize, xc as usize);
                for c in 0..ch {
                    out.set(ye, xe, c, src.get(y, x, c));
                }
            } else {
                let (owner, ou, ov) = face_for_direction(direction(face, u, v));
                for c in 0..ch {
                    out.set(ye, xe, c, sample_face(cube.face(owner), ou, ov, c));
                }
            }
        }
    }
    out
}

/// Reproject the neighbor across `edge` into this face's margin strip
/// (pinhole projection between two planes meeting at 90 degrees). The
/// strip excludes the corner blocks: `overlap` x `size` pixels for
/// left/right edges, `size` x `overlap` for top/bottom.
pub fn project_border(
    neighbor_img: &RasterImage,
    face: FaceId,
    edge: Edge,
    overlap: usize,
) -> Result<RasterImage> {
    if neighbor_img.height != neighbor_img.width {
        return Err(Error::Config("neighbor face must be square".into()));
    }
    let size = neighbor_img.height;
    let ch = neighbor_img.channels;
    let neighbor = edge_link(face, edge).neighbor;
    let (h, w) = match edge {
        Edge::Left | Edge::Right => (size, overlap),
        Edge::Top | Edge::Bottom => (overlap, size),
    };
    let mut out = RasterImage::new(h, w, ch);
    for sy in 0..h {
        for sx in 0..w {
            // Plane coordinates of this strip pixel, outside the core.
            let (u, v) = match edge {
                Edge::Left => (
                    pixel_to_plane(sx as f64 - overlap as f64, size),
                    pixel_to_plane(sy as f64, size),
                ),
                Edge::Right => (
                    pixel_to_plane((size + sx) as f64, size),
                    pixel_to_plane(sy as f64, size),
                ),
                Edge::Top => (
                    pixel_to_plane(sx as f64, size),
                    pixel_to_plane(sy as f64 - overlap as f64, size),
                ),
                Edge::Bottom => (
                    pixel_to_plane(sx as f64, size),
                    pixel_to_plane((size + sy) as f64, size),
                ),
            };
            let dir = direction(face, u, v);
            let (nu, nv) = plane_coords(neighbor, dir)
                .ok_or_else(|| Error::Numeric("border ray misses neighbor plane".into()))?;
            for c in 0..ch {
                out.set(sy, sx, c, sample_face(neighbor_img, nu, nv, c));
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cubemap::geometry::ALL_EDGES;

    fn textured_cube(size: usize) -> CubeFaceSet {
        // Smooth function of the direction so all faces agree at edges.
        let mut faces: Vec<RasterImage> = Vec::with_capacity(6);
        for face in ALL_FACES {
            let mut img = RasterImage::new(size, size, 3);
            for y in 0..size {
                for x in 0..size {
                    let u = pixel_to_plane(x as f64, size);
                    let v = pixel_to_plane(y as f64, size);
                    let d = direction(face, u, v);
                    let norm = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
                    let (dx, dy, dz) = (d[0] / norm, d[1] / norm, d[2] / norm);
                    img.set(y, x, 0, 0.5 + 0.45 * (2.1 * dx + 1.3 * dy).sin());
                    img.set(y, x, 1, 0.5 + 0.45 * (1.7 * dy - 2.3 * dz).cos() * 0.9);
                    img.set(y, x, 2, 0.5 + 0.4 * (1.1 * dx * dz + dy).sin());
                }
            }
            faces.push(img);
        }
        CubeFaceSet::new(faces.try_into().unwrap(), 2).unwrap()
    }

    #[test]
    fn face_set_validation() {
        let good = CubeFaceSet::solid(16, 3, 0.5, 4);
        assert_eq!(good.size(), 16);
        let mut faces = good.faces.clone();
        faces[2] = RasterImage::new(8, 8, 3);
        assert!(CubeFaceSet::new(faces, 4).is_err());
    }

    #[test]
    fn zero_overlap_extension_is_identity() {
        let cube = textured_cube(16);
        let ext = extend_face(&cube, FaceId::PosZ, 0);
        assert_eq!(ext.data, cube.face(FaceId::PosZ).data);
    }

    #[test]
    fn extension_sizes() {
        let cube = textured_cube(16);
        let ext = extend_face(&cube, FaceId::PosX, 4);
        assert_eq!((ext.height, ext.width), (24, 24));
        // 640 + 2*64 = 768 at production scale; same arithmetic here.
        assert_eq!(16 + 2 * 4, 24);
    }

    #[test]
    fn solid_cube_extends_to_constant() {
        let cube = CubeFaceSet::solid(16, 3, 0.37, 4);
        for face in ALL_FACES {
            let ext = extend_face(&cube, face, 4);
            assert!(ext.data.iter().all(|&v| (v - 0.37).abs() < 1e-12));
        }
    }

    #[test]
    fn extension_core_is_exact_copy() {
        let cube = textured_cube(12);
        let ext = extend_face(&cube, FaceId::NegY, 3);
        let core = ext.crop(3, 3, 12, 12);
        assert_eq!(core.data, cube.face(FaceId::NegY).data);
    }

    #[test]
    fn project_border_preserves_constants() {
        let img = RasterImage::splat(16, 16, 3, 0.81);
        for edge in ALL_EDGES {
            let strip = project_border(&img, FaceId::PosZ, edge, 4).unwrap();
            assert!(strip.data.iter().all(|&v| (v - 0.81).abs() < 1e-12));
        }
    }

    #[test]
    fn extension_margin_matches_smooth_cube() {
        // On a cube sampled from a smooth directional function, the margin
        // must agree with directly evaluating that function (bilinear
        // tolerance on the mean; the outermost ring clamps at face borders).
        let size = 32;
        let cube = textured_cube(size);
        let o = 6;
        let ext = extend_face(&cube, FaceId::PosZ, o);
        let mut err_sum = 0.0f64;
        let mut count = 0usize;
        for ye in 0..size + 2 * o {
            for xe in 0..size + 2 * o {
                let u = pixel_to_plane(xe as f64 - o as f64, size);
                let v = pixel_to_plane(ye as f64 - o as f64, size);
                if u.abs() <= 1.0 && v.abs() <= 1.0 {
                    continue;
                }
                let d = direction(FaceId::PosZ, u, v);
                let norm = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
                let (dx, dy, _dz) = (d[0] / norm, d[1] / norm, d[2] / norm);
                let expect = 0.5 + 0.45 * (2.1 * dx + 1.3 * dy).sin();
                err_sum += (ext.get(ye, xe, 0) - expect).abs();
                count += 1;
            }
        }
        let mean_err = err_sum / count as f64;
        assert!(mean_err < 2.0 / 255.0, "margin error {mean_err}");
    }
}
