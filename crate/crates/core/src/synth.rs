//! Synthetic sequences with analytic ground-truth flow and occlusion:
//! translated/zoomed window crops of a source image, plus a moving-occluder
//! scene for long-term consistency tests.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::manifest::FlowPair;
use crate::raster::{FlowDirection, FlowField, RasterImage};

/// Per-axis affine window in source coordinates. Offsets and sizes stay
/// integral so pure translations reproduce pixels exactly.
#[derive(Debug, Clone, Copy)]
struct Window {
    ox: f64,
    oy: f64,
    w: f64,
    h: f64,
}

/// A generated sequence: frames are window crops resized to the base
/// window, correspondences are exact affine maps, so flows and occlusion
/// masks for any frame pair are analytic.
pub struct SyntheticSequence {
    pub frames: Vec<RasterImage>,
    windows: Vec<Window>,
    size: usize,
}

/// Frame-to-source scale per axis: corner-aligned resize mapping
/// `X = ox + x * (w - 1) / (S - 1)`.
#[inline]
fn scale(extent: f64, size: usize) -> f64 {
    (extent - 1.0) / (size - 1) as f64
}

impl SyntheticSequence {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn frame_size(&self) -> usize {
        self.size
    }

    /// Per-axis affine from frame `b` pixel coordinates to frame `a` pixel
    /// coordinates (through the shared source point).
    fn map_between(&self, from: usize, to: usize) -> ((f64, f64), (f64, f64)) {
        let s = self.size;
        let wa = self.windows[to];
        let wb = self.windows[from];
        // x_to = (ox_from - ox_to + x_from * m_from) / m_to
        let mx_from = scale(wb.w, s);
        let mx_to = scale(wa.w, s);
        let ax = mx_from / mx_to;
        let bx = (wb.ox - wa.ox) / mx_to;
        let my_from = scale(wb.h, s);
        let my_to = scale(wa.h, s);
        let ay = my_from / my_to;
        let by = (wb.oy - wa.oy) / my_to;
        ((ax, bx), (ay, by))
    }

    /// Ground-truth flows for the ordered pair (a, b), a < b: forward on
    /// a's grid, backward on b's grid.
    pub fn flow_pair(&self, a: usize, b: usize) -> FlowPair {
        let s = self.size;
        let ((fax, fbx), (fay, fby)) = self.map_between(a, b);
        let mut forward = FlowField::new(s, s, FlowDirection::Forward);
        for y in 0..s {
            let ty = fay * y as f64 + fby;
            for x in 0..s {
                let tx = fax * x as f64 + fbx;
                forward.set_uv(y, x, tx - x as f64, ty - y as f64);
            }
        }
        let ((bax, bbx), (bay, bby)) = self.map_between(b, a);
        let mut backward = FlowField::new(s, s, FlowDirection::Backward);
        for y in 0..s {
            let ty = bay * y as f64 + bby;
            for x in 0..s {
                let tx = bax * x as f64 + bbx;
                backward.set_uv(y, x, tx - x as f64, ty - y as f64);
            }
        }
        FlowPair { forward, backward }
    }

    fn out_of_frame_mask(&self, from: usize, to: usize) -> Vec<bool> {
        let s = self.size;
        let ((ax, bx), (ay, by)) = self.map_between(from, to);
        let lim = (s - 1) as f64;
        let mut mask = vec![false; s * s];
        for y in 0..s {
            let ty = ay * y as f64 + by;
            for x in 0..s {
                let tx = ax * x as f64 + bx;
                mask[y * s + x] = !(tx >= 0.0 && tx <= lim && ty >= 0.0 && ty <= lim);
            }
        }
        mask
    }

    /// On frame a's grid: pixels whose correspondence leaves frame b.
    pub fn occlusion_mask(&self, a: usize, b: usize) -> Vec<bool> {
        self.out_of_frame_mask(a, b)
    }

    /// On frame b's grid: pixels whose correspondence leaves frame a.
    pub fn disocclusion_mask(&self, a: usize, b: usize) -> Vec<bool> {
        self.out_of_frame_mask(b, a)
    }
}

/// Crop-and-move sequence generator. Per step, the visible content shifts
/// by an integer sampled uniformly from [-max_shift, max_shift] per axis,
/// and the window grows by an integer from [0, max_zoom] per axis (zoom
/// out); crops are resized back to `window` pixels.
pub fn generate_sequence(
    source: &RasterImage,
    frames: usize,
    window: usize,
    max_shift: usize,
    max_zoom: usize,
    seed: u64,
) -> Result<SyntheticSequence> {
    if frames == 0 {
        return Err(Error::Config("need at least one frame".into()));
    }
    if window < 2 {
        return Err(Error::Config("window must be at least 2 pixels".into()));
    }
    let steps = frames.saturating_sub(1);
    let margin = steps * (max_shift + max_zoom);
    if window + 2 * margin > source.width.min(source.height) {
        return Err(Error::Config(format!(
            "source {}x{} too small for window {window} with {steps} steps of up to {} px",
            source.height,
            source.width,
            max_shift + max_zoom
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut windows = Vec::with_capacity(frames);
    let mut current = Window {
        ox: ((source.width - window) / 2) as f64,
        oy: ((source.height - window) / 2) as f64,
        w: window as f64,
        h: window as f64,
    };
    windows.push(current);
    for _ in 0..steps {
        let shift_x = rng.gen_range(-(max_shift as i64)..=max_shift as i64) as f64;
        let shift_y = rng.gen_range(-(max_shift as i64)..=max_shift as i64) as f64;
        let zoom_x = rng.gen_range(0..=max_zoom as i64) as f64;
        let zoom_y = rng.gen_range(0..=max_zoom as i64) as f64;
        // Content moves by +shift, so the window moves by -shift; zoom-out
        // grows the window, splitting the growth across both sides.
        let mut next = Window {
            ox: current.ox - shift_x - (zoom_x / 2.0).floor(),
            oy: current.oy - shift_y - (zoom_y / 2.0).floor(),
            w: current.w + zoom_x,
            h: current.h + zoom_y,
        };
        next.ox = next.ox.clamp(0.0, (source.width as f64 - next.w).max(0.0));
        next.oy = next.oy.clamp(0.0, (source.height as f64 - next.h).max(0.0));
        windows.push(next);
        current = next;
    }

    let frames_out = windows
        .iter()
        .map(|win| render_window(source, win, window))
        .collect();
    Ok(SyntheticSequence {
        frames: frames_out,
        windows,
        size: window,
    })
}

fn render_window(source: &RasterImage, win: &Window, size: usize) -> RasterImage {
    let mut out = RasterImage::new(size, size, source.channels);
    let exact = win.w as usize == size && win.h as usize == size;
    let mx = scale(win.w, size);
    let my = scale(win.h, size);
    for y in 0..size {
        let sy = win.oy + y as f64 * my;
        for x in 0..size {
            let sx = win.ox + x as f64 * mx;
            for c in 0..source.channels {
                let v = if exact {
                    source.get(sy as usize, sx as usize, c)
                } else {
                    source.sample_bilinear_clamped(sx, sy, c)
                };
                out.set(y, x, c, v);
            }
        }
    }
    out
}

/// Residuals of warping frame b back to frame a by the ground-truth
/// forward flow, measured off-occlusion.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GtResidual {
    pub mean_abs: f64,
    pub max_abs: f64,
}

/// Self-check of a generated tuple: warping each frame by the ground truth
/// must reproduce its predecessor away from occlusions (exactly for pure
/// integer translations, within bilinear tolerance for zooms).
pub fn verify_gt(seq: &SyntheticSequence) -> Vec<GtResidual> {
    let s = seq.frame_size();
    let mut out = Vec::new();
    for a in 0..seq.len().saturating_sub(1) {
        let b = a + 1;
        let pair = seq.flow_pair(a, b);
        let occ = seq.occlusion_mask(a, b);
        let frame_a = &seq.frames[a];
        let frame_b = &seq.frames[b];
        let mut sum = 0.0;
        let mut max: f64 = 0.0;
        let mut count = 0usize;
        for y in 0..s {
            for x in 0..s {
                if occ[y * s + x] {
                    continue;
                }
                let (u, v) = pair.forward.uv(y, x);
                let sx = x as f64 + u;
                let sy = y as f64 + v;
                for c in 0..frame_a.channels {
                    let warped = frame_b.sample_bilinear_clamped(sx, sy, c);
                    let r = (warped - frame_a.get(y, x, c)).abs();
                    sum += r;
                    max = max.max(r);
                }
                count += frame_a.channels;
            }
        }
        out.push(GtResidual {
            mean_abs: if count == 0 { 0.0 } else { sum / count as f64 },
            max_abs: max,
        });
    }
    out
}

/// Seeded smooth test image (low-frequency waves plus mild texture).
pub fn procedural_source(height: usize, width: usize, seed: u64) -> RasterImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let waves: Vec<(f64, f64, f64, f64)> = (0..10)
        .map(|_| {
            (
                rng.gen_range(0.5..4.0) * std::f64::consts::PI / width as f64,
                rng.gen_range(0.5..4.0) * std::f64::consts::PI / height as f64,
                rng.gen_range(0.0..std::f64::consts::TAU),
                rng.gen_range(0.05..0.22),
            )
        })
        .collect();
    let mut img = RasterImage::new(height, width, 3);
    for y in 0..height {
        for x in 0..width {
            for c in 0..3 {
                let mut v = 0.5;
                for (k, &(fx, fy, ph, amp)) in waves.iter().enumerate() {
                    if k % 3 != c {
                        continue;
                    }
                    v += amp * (fx * x as f64 + fy * y as f64 * (1.0 + c as f64 * 0.3) + ph).sin();
                }
                img.set(y, x, c, v.clamp(0.0, 1.0));
            }
        }
    }
    img
}

/// A static textured background crossed by a solid vertical bar: the
/// canonical occlude-then-disocclude scene. `positions[t]` is the bar's
/// left column in frame t.
pub struct OccluderSequence {
    pub frames: Vec<RasterImage>,
    pub positions: Vec<i64>,
    pub bar_width: usize,
    size: usize,
}

pub fn generate_occluder_sequence(
    background: &RasterImage,
    positions: &[i64],
    bar_width: usize,
    bar_value: f64,
) -> Result<OccluderSequence> {
    if background.height != background.width {
        return Err(Error::Config("occluder scene wants a square background".into()));
    }
    let size = background.height;
    let frames = positions
        .iter()
        .map(|&pos| {
            let mut f = background.clone();
            for y in 0..size {
                for x in 0..size {
                    let xi = x as i64;
                    if xi >= pos && xi < pos + bar_width as i64 {
                        for c in 0..f.channels {
                            f.set(y, x, c, bar_value);
                        }
                    }
                }
            }
            f
        })
        .collect();
    Ok(OccluderSequence {
        frames,
        positions: positions.to_vec(),
        bar_width,
        size,
    })
}

impl OccluderSequence {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    fn under_bar(&self, t: usize, x: usize) -> bool {
        let pos = self.positions[t];
        let xi = x as i64;
        xi >= pos && xi < pos + self.bar_width as i64
    }

    /// True motion fields for the pair (a, b): the bar carries its own
    /// displacement, the static background carries zero. Background pixels
    /// that were covered in the other frame end up with inconsistent
    /// forward/backward flows, exactly as an estimator would see them.
    pub fn flow_pair(&self, a: usize, b: usize) -> FlowPair {
        let s = self.size;
        let d = (self.positions[b] - self.positions[a]) as f64;
        let mut forward = FlowField::new(s, s, FlowDirection::Forward);
        let mut backward = FlowField::new(s, s, FlowDirection::Backward);
        for y in 0..s {
            for x in 0..s {
                if self.under_bar(a, x) {
                    forward.set_uv(y, x, d, 0.0);
                }
                if self.under_bar(b, x) {
                    backward.set_uv(y, x, -d, 0.0);
                }
            }
        }
        FlowPair { forward, backward }
    }

    /// Columns hidden by the bar at any of the given frames but visible at
    /// both endpoints; the region the long-term loss should preserve.
    pub fn covered_then_free(&self, covered_at: &[usize], free_at: &[usize]) -> Vec<usize> {
        (0..self.size)
            .filter(|&x| {
                covered_at.iter().any(|&t| self.under_bar(t, x))
                    && free_at.iter().all(|&t| !self.under_bar(t, x))
            })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::consistency::{detect_disocclusion, warp_flow};

    #[test]
    fn zero_motion_gives_identity() {
        let src = procedural_source(64, 64, 1);
        let seq = generate_sequence(&src, 3, 32, 0, 0, 7).unwrap();
        for f in &seq.frames[1..] {
            assert_eq!(f.data, seq.frames[0].data);
        }
        let pair = seq.flow_pair(0, 1);
        assert!(pair.forward.vectors.iter().all(|&v| v == 0.0));
        assert!(seq.occlusion_mask(0, 1).iter().all(|&m| !m));
    }

    #[test]
    fn known_shift_flow_and_strip() {
        // Drive the window by hand: content shift (4, 0).
        let src = procedural_source(96, 96, 2);
        let mut seq = generate_sequence(&src, 2, 32, 0, 0, 0).unwrap();
        seq.windows[1].ox = seq.windows[0].ox - 4.0;
        seq.frames[1] = render_window(&src, &seq.windows[1], 32);

        let pair = seq.flow_pair(0, 1);
        // Backward flow is -4 everywhere on frame 2's grid.
        for y in 0..32 {
            for x in 0..32 {
                assert_eq!(pair.backward.uv(y, x), (-4.0, 0.0));
                assert_eq!(pair.forward.uv(y, x), (4.0, 0.0));
            }
        }
        // Disocclusion strip: 4 leading columns of frame 2.
        let dis = seq.disocclusion_mask(0, 1);
        for y in 0..32 {
            for x in 0..32 {
                assert_eq!(dis[y * 32 + x], x < 4, "({y},{x})");
            }
        }
        // Occlusion strip: 4 trailing columns of frame 1.
        let occ = seq.occlusion_mask(0, 1);
        for y in 0..32 {
            for x in 0..32 {
                assert_eq!(occ[y * 32 + x], x >= 28);
            }
        }
        // Integer translation reproduces pixels exactly.
        let res = verify_gt(&seq);
        assert_eq!(res[0].max_abs, 0.0);
    }

    #[test]
    fn integer_shift_residual_exactly_zero() {
        let src = procedural_source(160, 160, 3);
        let seq = generate_sequence(&src, 5, 48, 6, 0, 11).unwrap();
        for r in verify_gt(&seq) {
            assert_eq!(r.max_abs, 0.0);
        }
    }

    #[test]
    fn zoom_residual_within_bilinear_tolerance() {
        let src = procedural_source(256, 256, 4);
        let seq = generate_sequence(&src, 5, 64, 3, 4, 13).unwrap();
        for r in verify_gt(&seq) {
            assert!(r.mean_abs < 2.0 / 255.0, "mean residual {}", r.mean_abs);
        }
    }

    #[test]
    fn corrupted_flow_fails_check() {
        let src = procedural_source(160, 160, 5);
        let mut seq = generate_sequence(&src, 2, 48, 5, 0, 17).unwrap();
        let clean = verify_gt(&seq)[0];
        // Corrupt the geometry badly and re-check.
        seq.windows[1].ox += 9.0;
        let broken = verify_gt(&seq)[0];
        assert!(broken.mean_abs > clean.mean_abs + 0.01);
    }

    #[test]
    fn zoom_flow_grows_from_center() {
        let src = procedural_source(256, 256, 6);
        let mut seq = generate_sequence(&src, 2, 65, 0, 0, 0).unwrap();
        // Window grows by 16 on each axis, centered.
        seq.windows[1] = Window {
            ox: seq.windows[0].ox - 8.0,
            oy: seq.windows[0].oy - 8.0,
            w: seq.windows[0].w + 16.0,
            h: seq.windows[0].h + 16.0,
        };
        seq.frames[1] = render_window(&src, &seq.windows[1], 65);
        let pair = seq.flow_pair(0, 1);
        let (uc, vc) = pair.backward.uv(32, 32);
        assert!(uc.abs() < 1e-9 && vc.abs() < 1e-9, "zero at center");
        // Zoom-out: border pixels of the later frame are new content whose
        // correspondence points outside the earlier frame.
        let (ul, _) = pair.backward.uv(32, 0);
        let (ur, _) = pair.backward.uv(32, 64);
        assert!(ul < -6.0 && ul > -9.0, "left border magnitude {ul}");
        assert!((ul + ur).abs() < 1e-9, "antisymmetric about the center");
        // Brute-force correspondence at a probe pixel: map through source.
        let s = 65usize;
        let (ax, bx) = (
            scale(seq.windows[0].w, s) / scale(seq.windows[1].w, s),
            (seq.windows[0].ox - seq.windows[1].ox) / scale(seq.windows[1].w, s),
        );
        for &x in &[3usize, 20, 50, 64] {
            let expect = ax * x as f64 + bx - x as f64;
            let (u, _) = pair.forward.uv(7, x);
            assert!((u - expect).abs() < 1e-9);
        }
    }

    #[test]
    fn detector_agrees_with_analytic_disocclusion() {
        // Integer-shift sequences: the flow-consistency detector must agree
        // with the analytic mask on at least 99% of pixels.
        for seed in [21u64, 22, 23] {
            let src = procedural_source(200, 200, seed);
            let seq = generate_sequence(&src, 4, 64, 6, 0, seed).unwrap();
            for a in 0..seq.len() - 1 {
                let pair = seq.flow_pair(a, a + 1);
                let analytic = seq.disocclusion_mask(a, a + 1);
                let warped = warp_flow(&pair.forward, &pair.backward).unwrap();
                let detected = detect_disocclusion(&warped, &pair.backward).unwrap();
                let agree = analytic
                    .iter()
                    .zip(&detected)
                    .filter(|(a, d)| a == d)
                    .count();
                let frac = agree as f64 / analytic.len() as f64;
                assert!(frac >= 0.99, "agreement {frac}");
            }
        }
    }

    #[test]
    fn determinism_under_seed() {
        let src = procedural_source(160, 160, 9);
        let a = generate_sequence(&src, 4, 48, 5, 3, 42).unwrap();
        let b = generate_sequence(&src, 4, 48, 5, 3, 42).unwrap();
        for (fa, fb) in a.frames.iter().zip(&b.frames) {
            assert_eq!(fa.data, fb.data);
        }
        let c = generate_sequence(&src, 4, 48, 5, 3, 43).unwrap();
        assert_ne!(a.frames[1].data, c.frames[1].data);
    }

    #[test]
    fn infeasible_window_rejected() {
        let src = procedural_source(64, 64, 10);
        assert!(generate_sequence(&src, 5, 48, 16, 16, 0).is_err());
    }

    #[test]
    fn occluder_flows_fire_consistency_check() {
        let bg = procedural_source(48, 48, 30);
        let seq = generate_occluder_sequence(&bg, &[4, 12, 20], 8, 1.0).unwrap();
        let pair = seq.flow_pair(0, 1);
        let warped = warp_flow(&pair.forward, &pair.backward).unwrap();
        let dis = detect_disocclusion(&warped, &pair.backward).unwrap();
        // Columns covered at frame 0 but free at frame 1 must be flagged.
        for x in 4..12 {
            assert!(dis[10 * 48 + x], "column {x} should be inconsistent");
        }
        // Far-away background is consistent.
        assert!(!dis[10 * 48 + 40]);
    }
}
