//! Deterministic convolutional feature extractor.
//!
//! A small stack of 3x3 convolutions with seeded fixed weights, optional
//! per-channel instance normalization and ReLU after every layer. Named
//! taps expose intermediate activations for the content and style losses.
//! Two extractors built from equal configs produce bit-identical features.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::norm::{normalize_plane, normalize_plane_backward};
use super::tensor::FeatureMap;
use crate::error::{Error, Result};
use crate::raster::RasterImage;

const KERNEL: usize = 3;
const PAD: usize = 1;

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct LayerSpec {
    pub out_channels: usize,
    pub stride: usize,
    #[serde(default)]
    pub instance_norm: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ExtractorConfig {
    pub seed: u64,
    pub layers: Vec<LayerSpec>,
    pub content_taps: Vec<String>,
    pub style_taps: Vec<String>,
}

impl Default for ExtractorConfig {
    fn default() -> Self {
        ExtractorConfig {
            seed: 0,
            layers: vec![
                LayerSpec { out_channels: 8, stride: 1, instance_norm: false },
                LayerSpec { out_channels: 16, stride: 2, instance_norm: false },
                LayerSpec { out_channels: 16, stride: 2, instance_norm: false },
            ],
            content_taps: vec!["layer3".into()],
            style_taps: vec!["layer1".into(), "layer2".into(), "layer3".into()],
        }
    }
}

fn parse_tap(name: &str, n_layers: usize) -> Result<usize> {
    let idx: usize = name
        .strip_prefix("layer")
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::Config(format!("bad tap name {name:?}, expected layerK")))?;
    if idx == 0 || idx > n_layers {
        return Err(Error::Config(format!(
            "tap {name:?} out of range for {n_layers} layers"
        )));
    }
    Ok(idx - 1)
}

struct ConvLayer {
    in_channels: usize,
    out_channels: usize,
    stride: usize,
    instance_norm: bool,
    /// [oc][ic][ky][kx] flattened.
    weights: Vec<f64>,
}

impl ConvLayer {
    #[inline]
    fn weight(&self, oc: usize, ic: usize, ky: usize, kx: usize) -> f64 {
        self.weights[((oc * self.in_channels + ic) * KERNEL + ky) * KERNEL + kx]
    }

    fn out_dims(&self, h: usize, w: usize) -> (usize, usize) {
        let oh = (h + 2 * PAD - KERNEL) / self.stride + 1;
        let ow = (w + 2 * PAD - KERNEL) / self.stride + 1;
        (oh, ow)
    }
}

/// Per-layer activations kept by a cached forward pass.
pub struct Activations {
    input: FeatureMap,
    /// For each layer: pre-activation (after conv and optional norm),
    /// post-ReLU output, and per-channel inv-std when normalized.
    layers: Vec<LayerActivation>,
}

struct LayerActivation {
    pre: FeatureMap,
    post: FeatureMap,
    inv_std: Vec<f64>,
}

impl Activations {
    pub fn tap(&self, layer: usize) -> &FeatureMap {
        &self.layers[layer].post
    }
}

/// Per-tap features of one image: `(layer index, N_l x M_l features)`.
#[derive(Debug, Clone)]
pub struct FeatureStack {
    pub taps: Vec<(usize, FeatureMap)>,
}

impl FeatureStack {
    pub fn get(&self, layer: usize) -> Option<&FeatureMap> {
        self.taps.iter().find(|(l, _)| *l == layer).map(|(_, m)| m)
    }
}

pub struct FeatureExtractor {
    config: ExtractorConfig,
    layers: Vec<ConvLayer>,
    content_layers: Vec<usize>,
    style_layers: Vec<usize>,
}

impl FeatureExtractor {
    pub fn new(config: ExtractorConfig) -> Result<Self> {
        if config.layers.is_empty() {
            return Err(Error::Config("extractor needs at least one layer".into()));
        }
        for spec in &config.layers {
            if spec.stride == 0 || spec.out_channels == 0 {
                return Err(Error::Config("layer stride/channels must be positive".into()));
            }
        }
        let n = config.layers.len();
        let content_layers = resolve_taps(&config.content_taps, n)?;
        let style_layers = resolve_taps(&config.style_taps, n)?;

        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let normal = StandardNormal;
        let mut layers = Vec::with_capacity(n);
        let mut in_channels = 3;
        for spec in &config.layers {
            let fan_in = in_channels * KERNEL * KERNEL;
            let scale = 1.0 / (fan_in as f64).sqrt();
            let weights: Vec<f64> = (0..spec.out_channels * fan_in)
                .map(|_| {
                    let z: f64 = normal.sample(&mut rng);
                    z * scale
                })
                .collect();
            layers.push(ConvLayer {
                in_channels,
                out_channels: spec.out_channels,
                stride: spec.stride,
                instance_norm: spec.instance_norm,
                weights,
            });
            in_channels = spec.out_channels;
        }
        Ok(FeatureExtractor {
            config,
            layers,
            content_layers,
            style_layers,
        })
    }

    pub fn config(&self) -> &ExtractorConfig {
        &self.config
    }

    pub fn content_layers(&self) -> &[usize] {
        &self.content_layers
    }

    pub fn style_layers(&self) -> &[usize] {
        &self.style_layers
    }

    /// All layers tapped by either loss, deduplicated, ascending.
    pub fn tap_layers(&self) -> Vec<usize> {
        let mut taps: Vec<usize> = self
            .content_layers
            .iter()
            .chain(&self.style_layers)
            .copied()
            .collect();
        taps.sort_unstable();
        taps.dedup();
        taps
    }

    /// Extract features at all tap layers.
    pub fn extract(&self, img: &RasterImage) -> Result<FeatureStack> {
        Ok(self.stack(&self.forward(img)?))
    }

    pub fn stack(&self, acts: &Activations) -> FeatureStack {
        FeatureStack {
            taps: self
                .tap_layers()
                .into_iter()
                .map(|l| (l, acts.layers[l].post.clone()))
                .collect(),
        }
    }

    /// Forward pass keeping every intermediate activation for `backward`.
    pub fn forward(&self, img: &RasterImage) -> Result<Activations> {
        if img.channels != 3 {
            return Err(Error::Config(format!(
                "extractor expects 3 channels, got {}",
                img.channels
            )));
        }
        let input = FeatureMap::from_image(img);
        let mut layers = Vec::with_capacity(self.layers.len());
        let mut current = &input;
        for layer in &self.layers {
            if current.height < KERNEL || current.width < KERNEL {
                return Err(Error::Config(format!(
                    "input {}x{} too small for the layer stack",
                    img.height, img.width
                )));
            }
            let mut pre = conv_forward(layer, current);
            let mut inv_std = Vec::new();
            if layer.instance_norm {
                inv_std.reserve(pre.channels);
                for c in 0..pre.channels {
                    let (_, inv) = normalize_plane(pre.plane_mut(c));
                    inv_std.push(inv);
                }
            }
            let mut post = pre.clone();
            for v in &mut post.data {
                if *v < 0.0 {
                    *v = 0.0;
                }
            }
            layers.push(LayerActivation { pre, post, inv_std });
            current = &layers.last().unwrap().post;
        }
        Ok(Activations { input, layers })
    }

    /// Backpropagate per-tap feature gradients to an image-space gradient.
    /// `tap_grads` holds `(layer, gradient at that layer's output)` entries;
    /// layers may repeat and are accumulated.
    pub fn backward(&self, acts: &Activations, tap_grads: &[(usize, FeatureMap)]) -> RasterImage {
        let n = self.layers.len();
        let mut pending: Vec<Option<FeatureMap>> = (0..n).map(|_| None).collect();
        for (layer, grad) in tap_grads {
            match &mut pending[*layer] {
                Some(acc) => {
                    for (a, g) in acc.data.iter_mut().zip(&grad.data) {
                        *a += g;
                    }
                }
                slot => *slot = Some(grad.clone()),
            }
        }

        let mut downstream: Option<FeatureMap> = None;
        for l in (0..n).rev() {
            let mut grad = match (downstream.take(), pending[l].take()) {
                (Some(mut d), Some(p)) => {
                    for (a, g) in d.data.iter_mut().zip(&p.data) {
                        *a += g;
                    }
                    d
                }
                (Some(d), None) => d,
                (None, Some(p)) => p,
                (None, None) => continue,
            };
            let act = &acts.layers[l];
            // ReLU: pass gradient only where the pre-activation was positive.
            for (g, &pre) in grad.data.iter_mut().zip(&act.pre.data) {
                if pre <= 0.0 {
                    *g = 0.0;
                }
            }
            if self.layers[l].instance_norm {
                for c in 0..grad.channels {
                    let back = normalize_plane_backward(
                        act.pre.plane(c),
                        grad.plane(c),
                        act.inv_std[c],
                    );
                    grad.plane_mut(c).copy_from_slice(&back);
                }
            }
            let input = if l == 0 { &acts.input } else { &acts.layers[l - 1].post };
            downstream = Some(conv_backward_input(&self.layers[l], input, &grad));
        }

        let grad_in = downstream
            .unwrap_or_else(|| FeatureMap::zeros(3, acts.input.height, acts.input.width));
        grad_in.to_image().expect("input gradient is 3-channel")
    }
}

fn resolve_taps(names: &[String], n_layers: usize) -> Result<Vec<usize>> {
    let mut out = Vec::with_capacity(names.len());
    for name in names {
        let idx = parse_tap(name, n_layers)?;
        if out.contains(&idx) {
            return Err(Error::Config(format!("duplicate tap {name:?}")));
        }
        out.push(idx);
    }
    Ok(out)
}

fn conv_forward(layer: &ConvLayer, input: &FeatureMap) -> FeatureMap {
    let (oh, ow) = layer.out_dims(input.height, input.width);
    let (ih, iw) = (input.height, input.width);
    let mut out = FeatureMap::zeros(layer.out_channels, oh, ow);
    let m = oh * ow;
    out.data
        .par_chunks_mut(m)
        .enumerate()
        .for_each(|(oc, plane)| {
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut acc = 0.0;
                    for ic in 0..layer.in_channels {
                        let src = input.plane(ic);
                        for ky in 0..KERNEL {
                            let iy = (oy * layer.stride + ky).wrapping_sub(PAD);
                            if iy >= ih {
                                continue;
                            }
                            for kx in 0..KERNEL {
                                let ix = (ox * layer.stride + kx).wrapping_sub(PAD);
                                if ix >= iw {
                                    continue;
                                }
                                acc += layer.weight(oc, ic, ky, kx) * src[iy * iw + ix];
                            }
                        }
                    }
                    plane[oy * ow + ox] = acc;
                }
            }
        });
    out
}

fn conv_backward_input(layer: &ConvLayer, input: &FeatureMap, grad_out: &FeatureMap) -> FeatureMap {
    let (ih, iw) = (input.height, input.width);
    let (oh, ow) = (grad_out.height, grad_out.width);
    let mut grad_in = FeatureMap::zeros(layer.in_channels, ih, iw);
    let m = ih * iw;
    grad_in
        .data
        .par_chunks_mut(m)
        .enumerate()
        .for_each(|(ic, plane)| {
            for oc in 0..layer.out_channels {
                let gout = grad_out.plane(oc);
                for oy in 0..oh {
                    for ox in 0..ow {
                        let g = gout[oy * ow + ox];
                        if g == 0.0 {
                            continue;
                        }
                        for ky in 0..KERNEL {
                            let iy = (oy * layer.stride + ky).wrapping_sub(PAD);
                            if iy >= ih {
                                continue;
                            }
                            for kx in 0..KERNEL {
                                let ix = (ox * layer.stride + kx).wrapping_sub(PAD);
                                if ix >= iw {
                                    continue;
                                }
                                plane[iy * iw + ix] += layer.weight(oc, ic, ky, kx) * g;
                            }
                        }
                    }
                }
            }
        });
    grad_in
}
