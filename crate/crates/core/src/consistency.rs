//! Flow-derived machinery: backward warping, forward-backward consistency,
//! motion-boundary detection and per-pixel temporal weight maps.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::raster::{weight_flags, FlowField, RasterImage, WeightMap};

/// Disocclusion test: |w~ + w^|^2 > A (|w~|^2 + |w^|^2) + B.
pub const DISOCCLUSION_REL: f64 = 0.01;
pub const DISOCCLUSION_ABS: f64 = 0.5;

/// Motion-boundary test: |grad u|^2 + |grad v|^2 > A |w|^2 + B.
pub const MOTION_BOUNDARY_REL: f64 = 0.01;
pub const MOTION_BOUNDARY_ABS: f64 = 0.002;

/// Marker stored in a warped flow where the lookup left the grid. Large
/// enough that the disocclusion inequality always fires on it.
pub const FLOW_SENTINEL: f64 = 1.0e10;

/// Backward-warp an image: `out(x, y) = src(x + u, y + v)` by bilinear
/// sampling. The flow lives on the *target* grid and points into the
/// *source*; to warp stylized frame t-1 toward frame t, pass the backward
/// flow of the pair (t-1, t).
///
/// Samples that leave the source rectangle yield mid-gray and a zero weight
/// flagged `OUT_OF_BOUNDS`; everything else gets weight 1.
pub fn warp_image(src: &RasterImage, flow: &FlowField) -> Result<(RasterImage, WeightMap)> {
    if src.height != flow.height || src.width != flow.width {
        return Err(Error::dims(
            "warp_image",
            format!("{}x{}", src.height, src.width),
            format!("{}x{}", flow.height, flow.width),
        ));
    }
    let (h, w, ch) = (src.height, src.width, src.channels);
    let mut out = RasterImage::new(h, w, ch);
    let mut map = WeightMap::ones(h, w);

    let rows: Vec<(Vec<f64>, Vec<bool>)> = (0..h)
        .into_par_iter()
        .map(|y| {
            let mut row = vec![0.0; w * ch];
            let mut oob = vec![false; w];
            for x in 0..w {
                let (u, v) = flow.uv(y, x);
                let sx = x as f64 + u;
                let sy = y as f64 + v;
                let inside = sx >= 0.0
                    && sx <= (w - 1) as f64
                    && sy >= 0.0
                    && sy <= (h - 1) as f64;
                if inside {
                    for c in 0..ch {
                        row[x * ch + c] = src.sample_bilinear_clamped(sx, sy, c);
                    }
                } else {
                    oob[x] = true;
                    for c in 0..ch {
                        row[x * ch + c] = 0.5;
                    }
                }
            }
            (row, oob)
        })
        .collect();

    for (y, (row, oob)) in rows.into_iter().enumerate() {
        out.data[y * w * ch..(y + 1) * w * ch].copy_from_slice(&row);
        for (x, is_oob) in oob.into_iter().enumerate() {
            if is_oob {
                map.clear(y, x, weight_flags::OUT_OF_BOUNDS);
            }
        }
    }
    Ok((out, map))
}

/// Warp the forward flow to the second frame's grid:
/// `w~(x, y) = w((x, y) + w^(x, y))` by bilinear sampling of `fwd`.
/// Lookups that leave the grid produce `FLOW_SENTINEL` components, which
/// downstream consistency checks treat as inconsistent.
pub fn warp_flow(fwd: &FlowField, bwd: &FlowField) -> Result<FlowField> {
    if !fwd.same_dims(bwd) {
        return Err(Error::dims(
            "warp_flow",
            format!("{}x{}", fwd.height, fwd.width),
            format!("{}x{}", bwd.height, bwd.width),
        ));
    }
    if fwd.direction == bwd.direction {
        return Err(Error::Config(
            "warp_flow expects one forward and one backward flow".into(),
        ));
    }
    let (h, w) = (bwd.height, bwd.width);
    let mut out = FlowField::new(h, w, fwd.direction);
    for y in 0..h {
        for x in 0..w {
            let (bu, bv) = bwd.uv(y, x);
            match fwd.sample_bilinear(x as f64 + bu, y as f64 + bv) {
                Some((u, v)) => out.set_uv(y, x, u, v),
                None => out.set_uv(y, x, FLOW_SENTINEL, FLOW_SENTINEL),
            }
        }
    }
    Ok(out)
}

#[inline]
fn is_sentinel(u: f64, v: f64) -> bool {
    u.abs() >= FLOW_SENTINEL || v.abs() >= FLOW_SENTINEL
}

/// Mark pixels whose warped-forward and backward flows disagree:
/// `|w~ + w^|^2 > 0.01 (|w~|^2 + |w^|^2) + 0.5`, plus all sentinel pixels.
pub fn detect_disocclusion(warped_fwd: &FlowField, bwd: &FlowField) -> Result<Vec<bool>> {
    if !warped_fwd.same_dims(bwd) {
        return Err(Error::dims(
            "detect_disocclusion",
            format!("{}x{}", warped_fwd.height, warped_fwd.width),
            format!("{}x{}", bwd.height, bwd.width),
        ));
    }
    let (h, w) = (bwd.height, bwd.width);
    let mut mask = vec![false; h * w];
    for y in 0..h {
        for x in 0..w {
            let (wu, wv) = warped_fwd.uv(y, x);
            let (bu, bv) = bwd.uv(y, x);
            if is_sentinel(wu, wv) {
                mask[y * w + x] = true;
                continue;
            }
            let lhs = (wu + bu) * (wu + bu) + (wv + bv) * (wv + bv);
            let rhs = DISOCCLUSION_REL * (wu * wu + wv * wv + bu * bu + bv * bv)
                + DISOCCLUSION_ABS;
            mask[y * w + x] = lhs > rhs;
        }
    }
    Ok(mask)
}

/// Flow gradient by central differences, one-sided at the border.
#[inline]
fn flow_grad(f: &FlowField, y: usize, x: usize, comp: usize) -> (f64, f64) {
    let get = |yy: usize, xx: usize| f.vectors[2 * (yy * f.width + xx) + comp];
    let gx = if f.width == 1 {
        0.0
    } else if x == 0 {
        get(y, 1) - get(y, 0)
    } else if x == f.width - 1 {
        get(y, x) - get(y, x - 1)
    } else {
        (get(y, x + 1) - get(y, x - 1)) * 0.5
    };
    let gy = if f.height == 1 {
        0.0
    } else if y == 0 {
        get(1, x) - get(0, x)
    } else if y == f.height - 1 {
        get(y, x) - get(y - 1, x)
    } else {
        (get(y + 1, x) - get(y - 1, x)) * 0.5
    };
    (gx, gy)
}

/// Mark pixels on motion boundaries of the backward flow:
/// `|grad u|^2 + |grad v|^2 > 0.01 |w|^2 + 0.002`.
pub fn detect_motion_boundary(bwd: &FlowField) -> Vec<bool> {
    let (h, w) = (bwd.height, bwd.width);
    let mut mask = vec![false; h * w];
    for y in 0..h {
        for x in 0..w {
            let (ux, uy) = flow_grad(bwd, y, x, 0);
            let (vx, vy) = flow_grad(bwd, y, x, 1);
            let (u, v) = bwd.uv(y, x);
            let lhs = ux * ux + uy * uy + vx * vx + vy * vy;
            let rhs = MOTION_BOUNDARY_REL * (u * u + v * v) + MOTION_BOUNDARY_ABS;
            mask[y * w + x] = lhs > rhs;
        }
    }
    mask
}

/// Short-term per-pixel weights on the target frame's grid: 0 where the
/// flow pair is disoccluded, on a motion boundary, or points off-image;
/// 1 elsewhere.
pub fn shortterm_weights(fwd: &FlowField, bwd: &FlowField) -> Result<WeightMap> {
    let warped = warp_flow(fwd, bwd)?;
    let dis = detect_disocclusion(&warped, bwd)?;
    let mb = detect_motion_boundary(bwd);
    let (h, w) = (bwd.height, bwd.width);
    let mut map = WeightMap::ones(h, w);
    for y in 0..h {
        for x in 0..w {
            let i = y * w + x;
            let (u, v) = bwd.uv(y, x);
            let sx = x as f64 + u;
            let sy = y as f64 + v;
            let oob =
                !(sx >= 0.0 && sx <= (w - 1) as f64 && sy >= 0.0 && sy <= (h - 1) as f64);
            if oob {
                map.clear(y, x, weight_flags::OUT_OF_BOUNDS);
            }
            if dis[i] && !oob {
                map.clear(y, x, weight_flags::DISOCCLUDED);
            }
            if mb[i] {
                map.clear(y, x, weight_flags::MOTION_BOUNDARY);
            }
        }
    }
    Ok(map)
}

/// Long-term weights: connect each pixel only to the closest admissible
/// frame. Input maps are ordered by increasing offset; the output for
/// offset j is `max(c_j - sum of all closer maps, 0)` elementwise.
pub fn longterm_weights(maps: &[WeightMap]) -> Result<Vec<WeightMap>> {
    let Some(first) = maps.first() else {
        return Ok(Vec::new());
    };
    for m in maps {
        if !m.same_dims(first) {
            return Err(Error::dims(
                "longterm_weights",
                format!("{}x{}", first.height, first.width),
                format!("{}x{}", m.height, m.width),
            ));
        }
    }
    let n = first.weights.len();
    let mut out = Vec::with_capacity(maps.len());
    let mut closer_sum = vec![0.0f64; n];
    for m in maps {
        let mut cl = m.clone();
        for i in 0..n {
            cl.weights[i] = (m.weights[i] - closer_sum[i]).max(0.0);
        }
        for i in 0..n {
            closer_sum[i] += m.weights[i];
        }
        out.push(cl);
    }
    Ok(out)
}
