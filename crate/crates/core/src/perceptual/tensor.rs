//! Planar feature containers used by the convolutional extractor.

use crate::error::{Error, Result};
use crate::raster::RasterImage;

/// C×H×W feature map, channel-major planar layout.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMap {
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

impl FeatureMap {
    pub fn zeros(channels: usize, height: usize, width: usize) -> Self {
        FeatureMap {
            channels,
            height,
            width,
            data: vec![0.0; channels * height * width],
        }
    }

    /// Spatial size M = H * W.
    #[inline]
    pub fn positions(&self) -> usize {
        self.height * self.width
    }

    #[inline]
    pub fn plane(&self, c: usize) -> &[f64] {
        let m = self.positions();
        &self.data[c * m..(c + 1) * m]
    }

    #[inline]
    pub fn plane_mut(&mut self, c: usize) -> &mut [f64] {
        let m = self.positions();
        &mut self.data[c * m..(c + 1) * m]
    }

    #[inline]
    pub fn at(&self, c: usize, y: usize, x: usize) -> f64 {
        self.data[(c * self.height + y) * self.width + x]
    }

    /// Convert an interleaved raster image into a planar feature map.
    pub fn from_image(img: &RasterImage) -> Self {
        let mut map = FeatureMap::zeros(img.channels, img.height, img.width);
        let m = img.height * img.width;
        for i in 0..m {
            for c in 0..img.channels {
                map.data[c * m + i] = img.data[i * img.channels + c];
            }
        }
        map
    }

    /// Convert a 3- or 1-channel map back to an interleaved raster image.
    pub fn to_image(&self) -> Result<RasterImage> {
        if self.channels != 1 && self.channels != 3 {
            return Err(Error::Config(format!(
                "feature map with {} channels is not an image",
                self.channels
            )));
        }
        let m = self.positions();
        let mut data = vec![0.0; m * self.channels];
        for i in 0..m {
            for c in 0..self.channels {
                data[i * self.channels + c] = self.data[c * m + i];
            }
        }
        RasterImage::from_data(self.height, self.width, self.channels, data)
    }
}

/// B×C×H×W tensor for the normalization layers.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor4 {
    pub batch: usize,
    pub channels: usize,
    pub height: usize,
    pub width: usize,
    pub data: Vec<f64>,
}

impl Tensor4 {
    pub fn zeros(batch: usize, channels: usize, height: usize, width: usize) -> Self {
        Tensor4 {
            batch,
            channels,
            height,
            width,
            data: vec![0.0; batch * channels * height * width],
        }
    }

    pub fn from_data(
        batch: usize,
        channels: usize,
        height: usize,
        width: usize,
        data: Vec<f64>,
    ) -> Result<Self> {
        if data.len() != batch * channels * height * width {
            return Err(Error::dims(
                "tensor data length",
                data.len(),
                batch * channels * height * width,
            ));
        }
        Ok(Tensor4 {
            batch,
            channels,
            height,
            width,
            data,
        })
    }

    #[inline]
    pub fn instance(&self, b: usize, c: usize) -> &[f64] {
        let m = self.height * self.width;
        let start = (b * self.channels + c) * m;
        &self.data[start..start + m]
    }

    #[inline]
    pub fn instance_mut(&mut self, b: usize, c: usize) -> &mut [f64] {
        let m = self.height * self.width;
        let start = (b * self.channels + c) * m;
        &mut self.data[start..start + m]
    }
}
