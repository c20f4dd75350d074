//! Per-frame stylization energies: weighted content, style and temporal
//! terms with analytic gradients, exposed through the solver's `Energy`
//! trait.

use crate::error::{Error, Result};
use crate::perceptual::{
    content_loss, style_loss, FeatureExtractor, FeatureStack, GramMatrix, LossWeights,
};
use crate::raster::{RasterImage, WeightMap};
use crate::solver::Energy;

/// Weighted per-pixel distance to a warped reference:
/// `1/D * sum_k c_k (x_k - w_k)^2` with `D = W*H*C` and the weight map
/// broadcast across channels. The robust variant uses the absolute error
/// with subgradient 0 at ties.
///
/// Returns the loss and its gradient with respect to `x` (flat, interleaved
/// like `RasterImage::data`).
pub fn temporal_loss(
    x: &RasterImage,
    warped: &RasterImage,
    c: &WeightMap,
    robust: bool,
) -> Result<(f64, Vec<f64>)> {
    if !x.same_dims(warped) {
        return Err(Error::dims(
            "temporal_loss images",
            format!("{}x{}x{}", x.height, x.width, x.channels),
            format!("{}x{}x{}", warped.height, warped.width, warped.channels),
        ));
    }
    if c.height != x.height || c.width != x.width {
        return Err(Error::dims(
            "temporal_loss weights",
            format!("{}x{}", x.height, x.width),
            format!("{}x{}", c.height, c.width),
        ));
    }
    let d = (x.height * x.width * x.channels) as f64;
    let inv_d = 1.0 / d;
    let ch = x.channels;
    let mut loss = 0.0;
    let mut grad = vec![0.0; x.data.len()];
    for px in 0..x.height * x.width {
        let w = c.weights[px];
        if w == 0.0 {
            continue;
        }
        for cc in 0..ch {
            let k = px * ch + cc;
            let diff = x.data[k] - warped.data[k];
            if robust {
                loss += inv_d * w * diff.abs();
                let sign = if diff > 0.0 {
                    1.0
                } else if diff < 0.0 {
                    -1.0
                } else {
                    0.0
                };
                grad[k] = inv_d * w * sign;
            } else {
                loss += inv_d * w * diff * diff;
                grad[k] = 2.0 * inv_d * w * diff;
            }
        }
    }
    Ok((loss, grad))
}

/// One temporal attachment: a warped earlier stylization (or prior image)
/// and its per-pixel confidence.
#[derive(Debug, Clone)]
pub struct TemporalTerm {
    pub target: RasterImage,
    pub weights: WeightMap,
}

/// The full per-frame objective
/// `alpha * L_content + beta * L_style + gamma_eff * sum L_temporal`.
pub struct FrameEnergy<'a> {
    extractor: &'a FeatureExtractor,
    content_features: FeatureStack,
    style_grams: &'a [(usize, GramMatrix)],
    weights: LossWeights,
    temporal: Vec<TemporalTerm>,
    height: usize,
    width: usize,
    channels: usize,
}

impl<'a> FrameEnergy<'a> {
    /// Energy with any number of temporal terms; pass none for the first
    /// frame and one per admissible long-term offset otherwise. The
    /// short-term energy is the single-term case.
    pub fn new(
        extractor: &'a FeatureExtractor,
        content_frame: &RasterImage,
        style_grams: &'a [(usize, GramMatrix)],
        temporal: Vec<TemporalTerm>,
        weights: LossWeights,
    ) -> Result<Self> {
        weights.validate()?;
        for term in &temporal {
            if term.target.height != content_frame.height
                || term.target.width != content_frame.width
            {
                return Err(Error::dims(
                    "temporal term",
                    format!("{}x{}", content_frame.height, content_frame.width),
                    format!("{}x{}", term.target.height, term.target.width),
                ));
            }
        }
        let content_features = extractor.extract(content_frame)?;
        Ok(FrameEnergy {
            extractor,
            content_features,
            style_grams,
            weights,
            temporal,
            height: content_frame.height,
            width: content_frame.width,
            channels: content_frame.channels,
        })
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.channels)
    }

    fn image_from(&self, x: &[f64]) -> Result<RasterImage> {
        RasterImage::from_data(self.height, self.width, self.channels, x.to_vec())
    }

    fn perceptual_active(&self) -> bool {
        self.weights.alpha > 0.0 || self.weights.beta > 0.0
    }

    fn temporal_active(&self) -> bool {
        self.weights.gamma > 0.0 && !self.temporal.is_empty()
    }

    fn add_temporal(&self, img: &RasterImage, grad: Option<&mut [f64]>) -> Result<f64> {
        let g_eff = self.weights.effective_gamma();
        let mut total = 0.0;
        let mut acc = grad;
        for term in &self.temporal {
            let (l, g) = temporal_loss(img, &term.target, &term.weights, self.weights.robust)?;
            total += g_eff * l;
            if let Some(dst) = acc.as_deref_mut() {
                for (d, gi) in dst.iter_mut().zip(&g) {
                    *d += g_eff * gi;
                }
            }
        }
        Ok(total)
    }
}

impl Energy for FrameEnergy<'_> {
    fn loss(&self, x: &[f64]) -> Result<f64> {
        let img = self.image_from(x)?;
        let mut total = 0.0;
        if self.perceptual_active() {
            let stack = self.extractor.extract(&img)?;
            if self.weights.alpha > 0.0 {
                let (lc, _) =
                    content_loss(&self.content_features, &stack, self.extractor.content_layers())?;
                total += self.weights.alpha * lc;
            }
            if self.weights.beta > 0.0 {
                let (ls, _) = style_loss(self.style_grams, &stack)?;
                total += self.weights.beta * ls;
            }
        }
        if self.temporal_active() {
            total += self.add_temporal(&img, None)?;
        }
        Ok(total)
    }

    fn loss_grad(&self, x: &[f64]) -> Result<(f64, Vec<f64>)> {
        let img = self.image_from(x)?;
        let mut total = 0.0;
        let mut grad = vec![0.0; x.len()];

        if self.perceptual_active() {
            let acts = self.extractor.forward(&img)?;
            let stack = self.extractor.stack(&acts);
            let mut tap_grads: Vec<(usize, crate::perceptual::FeatureMap)> = Vec::new();
            if self.weights.alpha > 0.0 {
                let (lc, grads) =
                    content_loss(&self.content_features, &stack, self.extractor.content_layers())?;
                total += self.weights.alpha * lc;
                for (l, mut g) in grads {
                    for v in &mut g.data {
                        *v *= self.weights.alpha;
                    }
                    tap_grads.push((l, g));
                }
            }
            if self.weights.beta > 0.0 {
                let (ls, grads) = style_loss(self.style_grams, &stack)?;
                total += self.weights.beta * ls;
                for (l, mut g) in grads {
                    for v in &mut g.data {
                        *v *= self.weights.beta;
                    }
                    tap_grads.push((l, g));
                }
            }
            let img_grad = self.extractor.backward(&acts, &tap_grads);
            for (d, g) in grad.iter_mut().zip(&img_grad.data) {
                *d += g;
            }
        }
        if self.temporal_active() {
            total += self.add_temporal(&img, Some(&mut grad))?;
        }
        Ok((total, grad))
    }
}
