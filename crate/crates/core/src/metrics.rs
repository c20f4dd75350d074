//! Quantitative evaluation: short-term temporal error and the
//! gradient-ratio seam metric for stitched cube faces.

use crate::cubemap::{edge_link, CubeFaceSet, Edge, FaceId, ALL_EDGES, ALL_FACES};
use crate::error::{Error, Result};
use crate::raster::{FlowField, RasterImage};

/// Mean squared difference between frame t warped back by the ground-truth
/// forward flow (defined on frame t-1's grid) and frame t-1, over pixels
/// that are neither occluded nor warped from outside the image. Values are
/// averaged over pixel-channels. `None` when no pixel is valid.
pub fn temporal_error(
    stylized_t: &RasterImage,
    stylized_tm1: &RasterImage,
    gt_flow: &FlowField,
    occluded: Option<&[bool]>,
) -> Result<Option<f64>> {
    if !stylized_t.same_dims(stylized_tm1) {
        return Err(Error::dims(
            "temporal_error frames",
            format!("{}x{}", stylized_t.height, stylized_t.width),
            format!("{}x{}", stylized_tm1.height, stylized_tm1.width),
        ));
    }
    if gt_flow.height != stylized_tm1.height || gt_flow.width != stylized_tm1.width {
        return Err(Error::dims(
            "temporal_error flow",
            format!("{}x{}", stylized_tm1.height, stylized_tm1.width),
            format!("{}x{}", gt_flow.height, gt_flow.width),
        ));
    }
    if let Some(m) = occluded {
        if m.len() != gt_flow.height * gt_flow.width {
            return Err(Error::dims("temporal_error mask", m.len(), gt_flow.vectors.len() / 2));
        }
    }
    let (h, w, ch) = (stylized_tm1.height, stylized_tm1.width, stylized_tm1.channels);
    let mut sum = 0.0;
    let mut count = 0usize;
    for y in 0..h {
        for x in 0..w {
            if occluded.map_or(false, |m| m[y * w + x]) {
                continue;
            }
            let (u, v) = gt_flow.uv(y, x);
            let sx = x as f64 + u;
            let sy = y as f64 + v;
            if !(sx >= 0.0 && sx <= (w - 1) as f64 && sy >= 0.0 && sy <= (h - 1) as f64) {
                continue;
            }
            for c in 0..ch {
                let warped = stylized_t.sample_bilinear_clamped(sx, sy, c);
                let d = warped - stylized_tm1.get(y, x, c);
                sum += d * d;
            }
            count += ch;
        }
    }
    Ok(if count == 0 { None } else { Some(sum / count as f64) })
}

/// Forward-difference gradient magnitudes, max over channels of the
/// absolute per-channel difference. The x field has (W-1) x H samples,
/// the y field W x (H-1).
pub fn gradient_fields(img: &RasterImage) -> (Vec<f64>, Vec<f64>) {
    let (h, w, ch) = (img.height, img.width, img.channels);
    let mut gx = vec![0.0; (w - 1) * h];
    let mut gy = vec![0.0; w * (h - 1)];
    for y in 0..h {
        for x in 0..w - 1 {
            let mut m = 0.0f64;
            for c in 0..ch {
                m = m.max((img.get(y, x + 1, c) - img.get(y, x, c)).abs());
            }
            gx[y * (w - 1) + x] = m;
        }
    }
    for y in 0..h - 1 {
        for x in 0..w {
            let mut m = 0.0f64;
            for c in 0..ch {
                m = m.max((img.get(y + 1, x, c) - img.get(y, x, c)).abs());
            }
            gy[y * w + x] = m;
        }
    }
    (gx, gy)
}

/// Gradient-ratio metric: how much stronger gradients are inside the masked
/// regions than on image average. 1 means unremarkable; larger values mean
/// excess gradients (seams). `mask_x` indexes the x-gradient samples,
/// `mask_y` the y-gradient samples; a direction with an empty mask drops
/// out of the weighted average.
pub fn e_gradient(img: &RasterImage, mask_x: &[bool], mask_y: &[bool]) -> Result<f64> {
    let (gx, gy) = gradient_fields(img);
    if mask_x.len() != gx.len() {
        return Err(Error::dims("e_gradient x mask", mask_x.len(), gx.len()));
    }
    if mask_y.len() != gy.len() {
        return Err(Error::dims("e_gradient y mask", mask_y.len(), gy.len()));
    }
    let ratio = |g: &[f64], mask: &[bool]| -> Result<Option<(f64, usize)>> {
        let n_mask = mask.iter().filter(|&&m| m).count();
        if n_mask == 0 {
            return Ok(None);
        }
        let total: f64 = g.iter().sum();
        if total <= 0.0 {
            return Err(Error::Numeric(
                "e_gradient undefined on a gradient-free image".into(),
            ));
        }
        let masked: f64 = g.iter().zip(mask).filter(|(_, &m)| m).map(|(v, _)| v).sum();
        let r = (masked / n_mask as f64) / (total / g.len() as f64);
        Ok(Some((r, n_mask)))
    };
    let rx = ratio(&gx, mask_x)?;
    let ry = ratio(&gy, mask_y)?;
    match (rx, ry) {
        (None, None) => Err(Error::Config("both e_gradient masks are empty".into())),
        (Some((r, _)), None) | (None, Some((r, _))) => Ok(r),
        (Some((rx, nx)), Some((ry, ny))) => {
            Ok((nx as f64 * rx + ny as f64 * ry) / ((nx + ny) as f64))
        }
    }
}

/// Masks over a stitched two-face image (width 2S, height S, vertical seam
/// between columns S-1 and S), addressing x-gradient samples.
#[derive(Debug, Clone)]
pub struct SeamMasks {
    /// Cut-edge strip: gradient samples at pixel columns S-1 and S.
    pub cut_x: Vec<bool>,
    /// Inner-prior strips: two columns around the prior boundary at inset
    /// `round(overlap * S / (S + 2 overlap))` on each side of the seam.
    pub inner_x: Vec<bool>,
    /// Empty y-direction mask matching the stitched image.
    pub empty_y: Vec<bool>,
    pub width: usize,
    pub height: usize,
}

pub fn seam_masks(face_size: usize, overlap: usize) -> SeamMasks {
    let s = face_size;
    let (w, h) = (2 * s, s);
    let gx_w = w - 1;
    let mut cut_x = vec![false; gx_w * h];
    let mut inner_x = vec![false; gx_w * h];
    let inset = ((overlap * s) as f64 / (s + 2 * overlap) as f64).round() as usize;
    let cut_cols = [s - 1, s];
    let inner_cols = [
        s.saturating_sub(inset + 1),
        s.saturating_sub(inset),
        s + inset - 1,
        s + inset,
    ];
    for y in 0..h {
        for &c in &cut_cols {
            if c < gx_w {
                cut_x[y * gx_w + c] = true;
            }
        }
        for &c in &inner_cols {
            if c < gx_w {
                inner_x[y * gx_w + c] = true;
            }
        }
    }
    SeamMasks {
        cut_x,
        inner_x,
        empty_y: vec![false; w * (h - 1)],
        width: w,
        height: h,
    }
}

/// The eight rigid transforms of a square image, as index maps
/// `dst(y, x) = src(map(y, x))`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Dihedral {
    Id,
    Rot90,
    Rot180,
    Rot270,
    FlipH,
    FlipV,
    Transpose,
    AntiTranspose,
}

const ALL_DIHEDRAL: [Dihedral; 8] = [
    Dihedral::Id,
    Dihedral::Rot90,
    Dihedral::Rot180,
    Dihedral::Rot270,
    Dihedral::FlipH,
    Dihedral::FlipV,
    Dihedral::Transpose,
    Dihedral::AntiTranspose,
];

fn dihedral_map(op: Dihedral, y: usize, x: usize, s: usize) -> (usize, usize) {
    let m = s - 1;
    match op {
        Dihedral::Id => (y, x),
        // Clockwise quarter turn.
        Dihedral::Rot90 => (m - x, y),
        Dihedral::Rot180 => (m - y, m - x),
        Dihedral::Rot270 => (x, m - y),
        Dihedral::FlipH => (y, m - x),
        Dihedral::FlipV => (m - y, x),
        Dihedral::Transpose => (x, y),
        Dihedral::AntiTranspose => (m - x, m - y),
    }
}

fn apply_dihedral(img: &RasterImage, op: Dihedral) -> RasterImage {
    let s = img.height;
    let mut out = RasterImage::new(s, s, img.channels);
    for y in 0..s {
        for x in 0..s {
            let (sy, sx) = dihedral_map(op, y, x, s);
            for c in 0..img.channels {
                out.set(y, x, c, img.get(sy, sx, c));
            }
        }
    }
    out
}

/// Orientation that brings `edge` of a face to its right side.
fn orient_edge_right(edge: Edge) -> Dihedral {
    match edge {
        Edge::Right => Dihedral::Id,
        Edge::Left => Dihedral::Rot180,
        Edge::Top => Dihedral::Rot90,
        Edge::Bottom => Dihedral::Rot270,
    }
}

/// The neighbor-edge pixel matched by row `y` of the oriented face's right
/// edge, found by probing the shared 3D edge.
fn neighbor_edge_pixel(face: FaceId, edge: Edge, a_op: Dihedral, y: usize, s: usize) -> (usize, usize) {
    use crate::cubemap::geometry::{direction, face_for_direction, pixel_to_plane, plane_to_pixel};
    // Pixel of the original face sitting at oriented position (y, s-1).
    let (ay, ax) = dihedral_map(a_op, y, s - 1, s);
    let u = pixel_to_plane(ax as f64, s);
    let v = pixel_to_plane(ay as f64, s);
    // Next oriented column (s-2) tells us the outward in-plane direction.
    let (py, px) = dihedral_map(a_op, y, s - 2, s);
    let du = u - pixel_to_plane(px as f64, s);
    let dv = v - pixel_to_plane(py as f64, s);
    // Three quarter pixels beyond the edge: strictly outside the core (half
    // a pixel lands exactly on the 45-degree tie) but still rounding to the
    // neighbor's edge pixel.
    let dir = direction(face, u + 0.75 * du, v + 0.75 * dv);
    let (nf, nu, nv) = face_for_direction(dir);
    debug_assert_eq!(nf, edge_link(face, edge).neighbor);
    let nx = plane_to_pixel(nu, s).round().clamp(0.0, (s - 1) as f64) as usize;
    let ny = plane_to_pixel(nv, s).round().clamp(0.0, (s - 1) as f64) as usize;
    (ny, nx)
}

/// Lay two adjacent faces side by side with the shared edge aligned:
/// columns [0, S) hold the (re-oriented) `face`, columns [S, 2S) the
/// matching orientation of its neighbor across `edge`. Both halves are
/// exact pixel permutations of the inputs.
pub fn stitch_edge(cube: &CubeFaceSet, face: FaceId, edge: Edge) -> Result<RasterImage> {
    let s = cube.size();
    let link = edge_link(face, edge);
    let a_op = orient_edge_right(edge);

    // Two probe rows pin the neighbor's orientation.
    let y1 = s / 4;
    let y2 = (3 * s) / 4;
    let q1 = neighbor_edge_pixel(face, edge, a_op, y1, s);
    let q2 = neighbor_edge_pixel(face, edge, a_op, y2, s);
    let b_op = ALL_DIHEDRAL
        .into_iter()
        .find(|&op| dihedral_map(op, y1, 0, s) == q1 && dihedral_map(op, y2, 0, s) == q2)
        .ok_or_else(|| Error::Numeric("no rigid orientation aligns the shared edge".into()))?;

    let a = apply_dihedral(cube.face(face), a_op);
    let b = apply_dihedral(cube.face(link.neighbor), b_op);
    let ch = cube.channels();
    let mut out = RasterImage::new(s, 2 * s, ch);
    for y in 0..s {
        for x in 0..s {
            for c in 0..ch {
                out.set(y, x, c, a.get(y, x, c));
                out.set(y, s + x, c, b.get(y, x, c));
            }
        }
    }
    Ok(out)
}

/// The twelve undirected cube edges as (face, edge) with a canonical side.
pub fn undirected_edges() -> Vec<(FaceId, Edge)> {
    let mut out = Vec::with_capacity(12);
    for face in ALL_FACES {
        for edge in ALL_EDGES {
            let link = edge_link(face, edge);
            let here = (face.index(), edge.index());
            let there = (link.neighbor.index(), link.neighbor_edge.index());
            if here < there {
                out.push((face, edge));
            }
        }
    }
    out
}

/// Seam metrics of a stylized cube, averaged over all twelve edges:
/// gradient ratios on the cut strip, the inner-prior strip, and their union.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeamMetrics {
    pub e_grad: f64,
    pub e_grad_cut: f64,
    pub e_grad_inner: f64,
}

pub fn sphere_seam_metrics(cube: &CubeFaceSet, overlap: usize) -> Result<SeamMetrics> {
    let s = cube.size();
    let masks = seam_masks(s, overlap);
    let union: Vec<bool> = masks
        .cut_x
        .iter()
        .zip(&masks.inner_x)
        .map(|(a, b)| *a || *b)
        .collect();
    let mut cut = 0.0;
    let mut inner = 0.0;
    let mut both = 0.0;
    let edges = undirected_edges();
    for &(face, edge) in &edges {
        let stitched = stitch_edge(cube, face, edge)?;
        cut += e_gradient(&stitched, &masks.cut_x, &masks.empty_y)?;
        inner += e_gradient(&stitched, &masks.inner_x, &masks.empty_y)?;
        both += e_gradient(&stitched, &union, &masks.empty_y)?;
    }
    let n = edges.len() as f64;
    Ok(SeamMetrics {
        e_grad: both / n,
        e_grad_cut: cut / n,
        e_grad_inner: inner / n,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::FlowDirection;

    #[test]
    fn temporal_error_identical_frames() {
        let img = RasterImage::splat(4, 4, 3, 0.5);
        let flow = FlowField::new(4, 4, FlowDirection::Forward);
        let e = temporal_error(&img, &img, &flow, None).unwrap().unwrap();
        assert_eq!(e, 0.0);
    }

    #[test]
    fn temporal_error_uniform_offset() {
        let a = RasterImage::splat(5, 5, 3, 0.6);
        let b = RasterImage::splat(5, 5, 3, 0.5);
        let flow = FlowField::new(5, 5, FlowDirection::Forward);
        let e = temporal_error(&a, &b, &flow, None).unwrap().unwrap();
        assert!((e - 0.01).abs() < 1e-12);
    }

    #[test]
    fn temporal_error_respects_mask_and_bounds() {
        let mut a = RasterImage::splat(2, 4, 1, 0.0);
        a.set(0, 0, 0, 1.0);
        let b = RasterImage::splat(2, 4, 1, 0.0);
        let flow = FlowField::new(2, 4, FlowDirection::Forward);
        let mut occ = vec![false; 8];
        occ[0] = true; // hide the differing pixel
        let e = temporal_error(&a, &b, &flow, Some(&occ)).unwrap().unwrap();
        assert_eq!(e, 0.0);

        // All occluded: undefined.
        let all = vec![true; 8];
        assert!(temporal_error(&a, &b, &flow, Some(&all)).unwrap().is_none());
    }

    #[test]
    fn temporal_error_symmetric_under_zero_flow() {
        let mut a = RasterImage::splat(3, 3, 1, 0.2);
        a.set(1, 1, 0, 0.9);
        let b = RasterImage::splat(3, 3, 1, 0.4);
        let flow = FlowField::new(3, 3, FlowDirection::Forward);
        let e1 = temporal_error(&a, &b, &flow, None).unwrap().unwrap();
        let e2 = temporal_error(&b, &a, &flow, None).unwrap().unwrap();
        assert!((e1 - e2).abs() < 1e-15);
    }

    fn ramp(h: usize, w: usize, slope: f64) -> RasterImage {
        let mut img = RasterImage::new(h, w, 3);
        for y in 0..h {
            for x in 0..w {
                for c in 0..3 {
                    img.set(y, x, c, slope * (x + y) as f64);
                }
            }
        }
        img
    }

    #[test]
    fn e_gradient_uniform_ramp_is_one() {
        let img = ramp(8, 16, 0.01);
        let mut mask_x = vec![false; 15 * 8];
        for y in 0..8 {
            mask_x[y * 15 + 4] = true;
        }
        let mut mask_y = vec![false; 16 * 7];
        for x in 0..16 {
            mask_y[2 * 16 + x] = true;
        }
        let e = e_gradient(&img, &mask_x, &mask_y).unwrap();
        assert!((e - 1.0).abs() < 1e-12);
    }

    #[test]
    fn e_gradient_matches_hand_ratio() {
        // Gradient 2g inside the region, g outside, region 10% of samples:
        // r = 2/(0.1*2 + 0.9) = 1.8181...
        let (h, w) = (10, 11);
        let mut img = RasterImage::new(h, w, 1);
        // Column differences: row 0 gets slope 2g, others g.
        let g = 0.02;
        for y in 0..h {
            let slope = if y == 0 { 2.0 * g } else { g };
            for x in 0..w {
                img.set(y, x, 0, slope * x as f64);
            }
        }
        let gx_w = w - 1;
        let mut mask_x = vec![false; gx_w * h];
        for x in 0..gx_w {
            mask_x[x] = true; // row 0 = 10% of 10 rows
        }
        let mask_y = vec![false; w * (h - 1)];
        let e = e_gradient(&img, &mask_x, &mask_y).unwrap();
        assert!((e - 2.0 / 1.1).abs() < 1e-9, "e={e}");
    }

    #[test]
    fn e_gradient_zero_region_in_textured_image() {
        let (h, w) = (6, 8);
        let mut img = RasterImage::new(h, w, 1);
        // Texture everywhere except the flat first two columns.
        for y in 0..h {
            for x in 0..w {
                let v = if x < 3 { 0.5 } else { ((x * y) % 5) as f64 / 5.0 };
                img.set(y, x, 0, v);
            }
        }
        let gx_w = w - 1;
        let mut mask_x = vec![false; gx_w * h];
        for y in 0..h {
            mask_x[y * gx_w] = true; // fully inside the flat region
        }
        let mask_y = vec![false; w * (h - 1)];
        let e = e_gradient(&img, &mask_x, &mask_y).unwrap();
        assert_eq!(e, 0.0);
    }

    #[test]
    fn e_gradient_scale_invariant() {
        let img = ramp(8, 12, 0.013);
        let mut mask_x = vec![false; 11 * 8];
        for i in 0..20 {
            mask_x[(i * 7) % (11 * 8)] = true;
        }
        let mask_y = vec![false; 12 * 7];
        let e1 = e_gradient(&img, &mask_x, &mask_y).unwrap();
        let mut half = img.clone();
        for v in &mut half.data {
            *v *= 0.5;
        }
        let e2 = e_gradient(&half, &mask_x, &mask_y).unwrap();
        assert!((e1 - e2).abs() < 1e-12);
    }

    #[test]
    fn seam_mask_geometry() {
        let s = 16;
        let masks = seam_masks(s, 4);
        // Vertical seam populates x, leaves y empty.
        assert!(masks.empty_y.iter().all(|&m| !m));
        let count = masks.cut_x.iter().filter(|&&m| m).count();
        assert_eq!(count, 2 * s);
        // Degenerate overlap: inner coincides with cut columns.
        let m0 = seam_masks(s, 0);
        assert_eq!(m0.inner_x, m0.cut_x);
    }

    #[test]
    fn stitched_smooth_cube_has_no_seam() {
        // A cube sampled from a smooth panorama stitches continuously:
        // E_grad_cut should be unremarkable (about 1).
        let pano = crate::cubemap::synthetic_panorama(256, 128, 3);
        let cube = crate::cubemap::equirect_to_cube(&pano, 32, 4).unwrap();
        let m = sphere_seam_metrics(&cube, 4).unwrap();
        assert!(
            (m.e_grad_cut - 1.0).abs() < 0.35,
            "smooth cube cut ratio {}",
            m.e_grad_cut
        );
    }

    #[test]
    fn stitching_detects_decorrelated_faces() {
        // Independently textured faces produce a visible seam: the cut
        // ratio must exceed the smooth cube's by a clear margin.
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let s = 32;
        let faces: Vec<RasterImage> = (0..6)
            .map(|k| {
                let mut img = RasterImage::new(s, s, 3);
                let base = k as f64 / 6.0;
                for y in 0..s {
                    for x in 0..s {
                        for c in 0..3 {
                            let noise: f64 = rng.gen_range(-0.02..0.02);
                            img.set(y, x, c, (base + noise).clamp(0.0, 1.0));
                        }
                    }
                }
                img
            })
            .collect();
        let cube = CubeFaceSet::new(faces.try_into().unwrap(), 4).unwrap();
        let m = sphere_seam_metrics(&cube, 4).unwrap();
        assert!(m.e_grad_cut > 2.0, "flat faces should seam, got {}", m.e_grad_cut);
    }

    #[test]
    fn undirected_edges_count() {
        assert_eq!(undirected_edges().len(), 12);
    }
}
