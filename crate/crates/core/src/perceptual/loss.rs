//! Content and style losses over extractor features, with analytic
//! gradients with respect to the features.

use serde::{Deserialize, Serialize};

use super::extractor::FeatureStack;
use super::tensor::FeatureMap;
use crate::error::{Error, Result};

/// Relative term weights of the stylization energy.
#[derive(Debug, Clone, Copy, Serialize, Deserialize, PartialEq)]
pub struct LossWeights {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    /// Absolute-error temporal term; doubles the effective temporal weight.
    #[serde(default)]
    pub robust: bool,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            alpha: 1.0,
            beta: 20.0,
            gamma: 200.0,
            robust: false,
        }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        if self.alpha < 0.0 || self.beta < 0.0 || self.gamma < 0.0 {
            return Err(Error::Config("loss weights must be non-negative".into()));
        }
        Ok(())
    }

    /// Weight applied to temporal terms; the absolute-error variant runs
    /// with twice the squared-error weight.
    pub fn effective_gamma(&self) -> f64 {
        if self.robust {
            2.0 * self.gamma
        } else {
            self.gamma
        }
    }
}

/// Channel correlation matrix `G_ij = sum_k F_ik F_jk` (no normalization).
#[derive(Debug, Clone, PartialEq)]
pub struct GramMatrix {
    pub n: usize,
    pub data: Vec<f64>,
}

impl GramMatrix {
    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n + j]
    }
}

pub fn gram(features: &FeatureMap) -> GramMatrix {
    let n = features.channels;
    let mut data = vec![0.0; n * n];
    for i in 0..n {
        let fi = features.plane(i);
        for j in i..n {
            let fj = features.plane(j);
            let s: f64 = fi.iter().zip(fj).map(|(a, b)| a * b).sum();
            data[i * n + j] = s;
            data[j * n + i] = s;
        }
    }
    GramMatrix { n, data }
}

/// Mean-squared feature distance over the given tap layers:
/// `sum_l 1/(N_l M_l) sum_ij (F - P)^2`, with gradient `2 (F - P)/(N_l M_l)`
/// at each tap.
pub fn content_loss(
    target: &FeatureStack,
    current: &FeatureStack,
    layers: &[usize],
) -> Result<(f64, Vec<(usize, FeatureMap)>)> {
    let mut loss = 0.0;
    let mut grads = Vec::with_capacity(layers.len());
    for &l in layers {
        let p = target
            .get(l)
            .ok_or_else(|| Error::Config(format!("missing content tap layer{}", l + 1)))?;
        let f = current
            .get(l)
            .ok_or_else(|| Error::Config(format!("missing content tap layer{}", l + 1)))?;
        if p.data.len() != f.data.len() {
            return Err(Error::dims("content tap", p.data.len(), f.data.len()));
        }
        let norm = 1.0 / (f.channels * f.positions()) as f64;
        let mut grad = FeatureMap::zeros(f.channels, f.height, f.width);
        for (i, (fv, pv)) in f.data.iter().zip(&p.data).enumerate() {
            let d = fv - pv;
            loss += norm * d * d;
            grad.data[i] = 2.0 * norm * d;
        }
        grads.push((l, grad));
    }
    Ok((loss, grads))
}

/// Gram-matrix distance over the style tap layers:
/// `sum_l 1/(N_l^2 M_l^2) sum_ij (G - A)^2`, with feature gradient
/// `4/(N_l^2 M_l^2) (G - A) F` per tap.
pub fn style_loss(
    style_grams: &[(usize, GramMatrix)],
    current: &FeatureStack,
) -> Result<(f64, Vec<(usize, FeatureMap)>)> {
    let mut loss = 0.0;
    let mut grads = Vec::with_capacity(style_grams.len());
    for (l, a) in style_grams {
        let f = current
            .get(*l)
            .ok_or_else(|| Error::Config(format!("missing style tap layer{}", l + 1)))?;
        let n = f.channels;
        let m = f.positions();
        if a.n != n {
            return Err(Error::dims("style gram", a.n, n));
        }
        let g = gram(f);
        let norm = 1.0 / ((n * n) as f64 * (m * m) as f64);
        let mut diff = vec![0.0; n * n];
        for (i, (gv, av)) in g.data.iter().zip(&a.data).enumerate() {
            let d = gv - av;
            loss += norm * d * d;
            diff[i] = d;
        }
        // grad = 4/(N^2 M^2) * (G - A) F
        let mut grad = FeatureMap::zeros(n, f.height, f.width);
        for i in 0..n {
            let gi = grad.plane_mut(i);
            for j in 0..n {
                let d = diff[i * n + j];
                if d == 0.0 {
                    continue;
                }
                let fj = f.plane(j);
                let c = 4.0 * norm * d;
                for (gv, fv) in gi.iter_mut().zip(fj) {
                    *gv += c * fv;
                }
            }
        }
        grads.push((*l, grad));
    }
    Ok((loss, grads))
}

/// Style Gram matrices of an image, one per style tap layer.
pub fn style_grams(
    extractor: &super::extractor::FeatureExtractor,
    style: &crate::raster::RasterImage,
) -> Result<Vec<(usize, GramMatrix)>> {
    let stack = extractor.extract(style)?;
    extractor
        .style_layers()
        .iter()
        .map(|&l| {
            let f = stack
                .get(l)
                .ok_or_else(|| Error::Config(format!("missing style tap layer{}", l + 1)))?;
            Ok((l, gram(f)))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::perceptual::extractor::{ExtractorConfig, FeatureExtractor};
    use crate::raster::RasterImage;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn feature(channels: usize, h: usize, w: usize, seed: u64) -> FeatureMap {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut f = FeatureMap::zeros(channels, h, w);
        for v in &mut f.data {
            *v = rng.gen_range(-1.0..1.0);
        }
        f
    }

    #[test]
    fn gram_constant_single_channel() {
        let mut f = FeatureMap::zeros(1, 2, 2);
        f.data.fill(1.0);
        let g = gram(&f);
        assert_eq!(g.data, vec![4.0]);
    }

    #[test]
    fn gram_disjoint_support_off_diagonal_zero() {
        let mut f = FeatureMap::zeros(2, 1, 4);
        f.plane_mut(0)[0] = 2.0;
        f.plane_mut(0)[1] = 1.0;
        f.plane_mut(1)[2] = 3.0;
        f.plane_mut(1)[3] = -1.0;
        let g = gram(&f);
        assert_eq!(g.at(0, 1), 0.0);
        assert_eq!(g.at(1, 0), 0.0);
        assert_eq!(g.at(0, 0), 5.0);
        assert_eq!(g.at(1, 1), 10.0);
    }

    #[test]
    fn gram_matches_brute_force() {
        let f = feature(3, 1, 5, 9);
        let g = gram(&f);
        for i in 0..3 {
            for j in 0..3 {
                let mut s = 0.0;
                for k in 0..5 {
                    s += f.plane(i)[k] * f.plane(j)[k];
                }
                assert_eq!(g.at(i, j), s);
            }
        }
    }

    #[test]
    fn gram_is_symmetric_psd() {
        let f = feature(4, 3, 3, 17);
        let g = gram(&f);
        for i in 0..4 {
            for j in 0..4 {
                assert_eq!(g.at(i, j), g.at(j, i));
            }
        }
        // PSD: x^T G x = |F^T x|^2 >= 0 for probe vectors.
        let mut rng = ChaCha8Rng::seed_from_u64(18);
        for _ in 0..20 {
            let x: Vec<f64> = (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let mut quad = 0.0;
            for i in 0..4 {
                for j in 0..4 {
                    quad += x[i] * g.at(i, j) * x[j];
                }
            }
            assert!(quad >= -1e-8);
        }
    }

    #[test]
    fn content_loss_zero_at_target() {
        let f = feature(2, 2, 2, 3);
        let stack = FeatureStack { taps: vec![(0, f)] };
        let (loss, grads) = content_loss(&stack, &stack.clone(), &[0]).unwrap();
        assert_eq!(loss, 0.0);
        assert!(grads[0].1.data.iter().all(|&g| g == 0.0));
    }

    #[test]
    fn content_loss_single_element() {
        // N = M = 1, F - P = 0.5: loss 0.25, gradient 1.0.
        let mut p = FeatureMap::zeros(1, 1, 1);
        p.data[0] = 0.25;
        let mut f = FeatureMap::zeros(1, 1, 1);
        f.data[0] = 0.75;
        let target = FeatureStack { taps: vec![(0, p)] };
        let current = FeatureStack { taps: vec![(0, f)] };
        let (loss, grads) = content_loss(&target, &current, &[0]).unwrap();
        assert!((loss - 0.25).abs() < 1e-15);
        assert!((grads[0].1.data[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn content_loss_matches_brute_force() {
        let p = feature(3, 4, 4, 21);
        let f = feature(3, 4, 4, 22);
        let target = FeatureStack { taps: vec![(0, p.clone())] };
        let current = FeatureStack { taps: vec![(0, f.clone())] };
        let (loss, _) = content_loss(&target, &current, &[0]).unwrap();
        let mut expect = 0.0;
        for (a, b) in f.data.iter().zip(&p.data) {
            expect += (a - b) * (a - b) / (3.0 * 16.0);
        }
        assert!((loss - expect).abs() < 1e-12);
    }

    #[test]
    fn style_loss_toy_value() {
        // N=1, M=2, features (0,0) vs target gram [4]: G=[0],
        // loss = 1/(1*4) * 16 = 4.
        let f = FeatureMap::zeros(1, 1, 2);
        let current = FeatureStack { taps: vec![(0, f)] };
        let a = GramMatrix { n: 1, data: vec![4.0] };
        let (loss, _) = style_loss(&[(0, a)], &current).unwrap();
        assert!((loss - 4.0).abs() < 1e-15);
    }

    #[test]
    fn style_loss_zero_for_same_image() {
        let ex = FeatureExtractor::new(ExtractorConfig::default()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut img = RasterImage::new(16, 16, 3);
        for v in &mut img.data {
            *v = rng.gen_range(0.0..1.0);
        }
        let grams = style_grams(&ex, &img).unwrap();
        let stack = ex.extract(&img).unwrap();
        let (loss, _) = style_loss(&grams, &stack).unwrap();
        assert_eq!(loss, 0.0);
    }

    /// Style gradient against central finite differences through gram().
    #[test]
    fn style_gradient_matches_finite_differences() {
        let f = feature(2, 1, 3, 40);
        let a = {
            let fa = feature(2, 1, 3, 41);
            gram(&fa)
        };
        let current = FeatureStack { taps: vec![(0, f.clone())] };
        let (_, grads) = style_loss(&[(0, a.clone())], &current).unwrap();
        let h = 1e-6;
        for i in 0..f.data.len() {
            let mut fp = f.clone();
            let mut fm = f.clone();
            fp.data[i] += h;
            fm.data[i] -= h;
            let lp = style_loss(&[(0, a.clone())], &FeatureStack { taps: vec![(0, fp)] })
                .unwrap()
                .0;
            let lm = style_loss(&[(0, a.clone())], &FeatureStack { taps: vec![(0, fm)] })
                .unwrap()
                .0;
            let fd = (lp - lm) / (2.0 * h);
            let an = grads[0].1.data[i];
            assert!(
                (fd - an).abs() / fd.abs().max(an.abs()).max(1e-9) < 1e-5,
                "i={i} fd={fd} an={an}"
            );
        }
    }

    #[test]
    fn losses_invariant_under_spatial_permutation() {
        // Permuting positions identically in both stacks leaves both losses
        // unchanged; gram is order-free over positions.
        let p = feature(2, 1, 6, 50);
        let f = feature(2, 1, 6, 51);
        let perm = [3usize, 0, 5, 1, 4, 2];
        let apply = |m: &FeatureMap| {
            let mut out = m.clone();
            for c in 0..m.channels {
                for (dst, &src) in perm.iter().enumerate() {
                    out.plane_mut(c)[dst] = m.plane(c)[src];
                }
            }
            out
        };
        let (l1, _) = content_loss(
            &FeatureStack { taps: vec![(0, p.clone())] },
            &FeatureStack { taps: vec![(0, f.clone())] },
            &[0],
        )
        .unwrap();
        let (l2, _) = content_loss(
            &FeatureStack { taps: vec![(0, apply(&p))] },
            &FeatureStack { taps: vec![(0, apply(&f))] },
            &[0],
        )
        .unwrap();
        assert!((l1 - l2).abs() < 1e-12);

        let ga = gram(&f);
        let gb = gram(&apply(&f));
        for (a, b) in ga.data.iter().zip(&gb.data) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
