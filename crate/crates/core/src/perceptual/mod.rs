//! Deterministic perceptual backend: seeded convolutional feature
//! extractor, Gram matrices, content/style losses and normalization layers.

pub mod extractor;
pub mod loss;
pub mod norm;
pub mod tensor;

pub use extractor::{Activations, ExtractorConfig, FeatureExtractor, FeatureStack, LayerSpec};
pub use loss::{content_loss, gram, style_grams, style_loss, GramMatrix, LossWeights};
pub use norm::{batch_norm, instance_norm, NORM_EPS};
pub use tensor::{FeatureMap, Tensor4};
