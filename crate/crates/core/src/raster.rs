//! Dense raster containers: images, flow fields and per-pixel weight maps.
//!
//! All pixel data is stored row-major. Images are channel-interleaved so a
//! pixel's channels are adjacent in memory. Values are `f64`; image values
//! live in `[0,1]` at I/O boundaries but may leave that range inside
//! optimizer iterates.

use crate::error::{Error, Result};

/// H×W×C float image, row-major, channel-interleaved.
#[derive(Debug, Clone, PartialEq)]
pub struct RasterImage {
    pub height: usize,
    pub width: usize,
    pub channels: usize,
    pub data: Vec<f64>,
}

impl RasterImage {
    pub fn new(height: usize, width: usize, channels: usize) -> Self {
        assert!(channels == 1 || channels == 3, "channels must be 1 or 3");
        RasterImage {
            height,
            width,
            channels,
            data: vec![0.0; height * width * channels],
        }
    }

    pub fn from_data(height: usize, width: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != height * width * channels {
            return Err(Error::dims(
                "image data length",
                data.len(),
                height * width * channels,
            ));
        }
        if !(channels == 1 || channels == 3) {
            return Err(Error::Config(format!(
                "unsupported channel count {channels}, expected 1 or 3"
            )));
        }
        Ok(RasterImage {
            height,
            width,
            channels,
            data,
        })
    }

    /// Constant-valued image.
    pub fn splat(height: usize, width: usize, channels: usize, value: f64) -> Self {
        let mut img = Self::new(height, width, channels);
        img.data.fill(value);
        img
    }

    #[inline]
    pub fn idx(&self, y: usize, x: usize, c: usize) -> usize {
        (y * self.width + x) * self.channels + c
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize, c: usize) -> f64 {
        self.data[self.idx(y, x, c)]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, c: usize, v: f64) {
        let i = self.idx(y, x, c);
        self.data[i] = v;
    }

    pub fn same_dims(&self, other: &RasterImage) -> bool {
        self.height == other.height && self.width == other.width && self.channels == other.channels
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Clamp all values into `[0,1]`, used at write-out boundaries.
    pub fn clamped(&self) -> RasterImage {
        let mut out = self.clone();
        for v in &mut out.data {
            *v = v.clamp(0.0, 1.0);
        }
        out
    }

    /// Bilinear sample at a fractional position, `None` when the position
    /// falls outside `[0, W-1] x [0, H-1]`.
    pub fn sample_bilinear(&self, x: f64, y: f64, c: usize) -> Option<f64> {
        if !(x >= 0.0 && x <= (self.width - 1) as f64 && y >= 0.0 && y <= (self.height - 1) as f64)
        {
            return None;
        }
        Some(self.sample_bilinear_clamped(x, y, c))
    }

    /// Bilinear sample with the position clamped to the pixel grid.
    pub fn sample_bilinear_clamped(&self, x: f64, y: f64, c: usize) -> f64 {
        let x = x.clamp(0.0, (self.width - 1) as f64);
        let y = y.clamp(0.0, (self.height - 1) as f64);
        let x0 = x.floor() as usize;
        let y0 = y.floor() as usize;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let fx = x - x0 as f64;
        let fy = y - y0 as f64;
        let v00 = self.get(y0, x0, c);
        let v01 = self.get(y0, x1, c);
        let v10 = self.get(y1, x0, c);
        let v11 = self.get(y1, x1, c);
        v00 * (1.0 - fx) * (1.0 - fy)
            + v01 * fx * (1.0 - fy)
            + v10 * (1.0 - fx) * fy
            + v11 * fx * fy
    }

    /// Crop a rectangular window (top-left `(y0, x0)`, size `h`×`w`).
    pub fn crop(&self, y0: usize, x0: usize, h: usize, w: usize) -> RasterImage {
        assert!(y0 + h <= self.height && x0 + w <= self.width);
        let mut out = RasterImage::new(h, w, self.channels);
        for y in 0..h {
            for x in 0..w {
                for c in 0..self.channels {
                    out.set(y, x, c, self.get(y0 + y, x0 + x, c));
                }
            }
        }
        out
    }

    pub fn mean_abs_diff(&self, other: &RasterImage) -> f64 {
        assert!(self.same_dims(other));
        let n = self.data.len() as f64;
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
            / n
    }
}

/// Direction of a flow field relative to the frame pair it belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum FlowDirection {
    /// Estimated from the earlier frame to the later one (t -> t+1),
    /// defined on the earlier frame's grid.
    Forward,
    /// Estimated from the later frame to the earlier one (t+1 -> t),
    /// defined on the later frame's grid.
    Backward,
}

/// H×W×2 displacement field in pixels, `(u, v)` interleaved.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    pub height: usize,
    pub width: usize,
    /// Interleaved (u, v) displacements, row-major.
    pub vectors: Vec<f64>,
    pub direction: FlowDirection,
}

impl FlowField {
    pub fn new(height: usize, width: usize, direction: FlowDirection) -> Self {
        FlowField {
            height,
            width,
            vectors: vec![0.0; height * width * 2],
            direction,
        }
    }

    pub fn from_vectors(
        height: usize,
        width: usize,
        vectors: Vec<f64>,
        direction: FlowDirection,
    ) -> Result<Self> {
        if vectors.len() != height * width * 2 {
            return Err(Error::dims(
                "flow vector length",
                vectors.len(),
                height * width * 2,
            ));
        }
        Ok(FlowField {
            height,
            width,
            vectors,
            direction,
        })
    }

    /// Constant flow field.
    pub fn splat(height: usize, width: usize, u: f64, v: f64, direction: FlowDirection) -> Self {
        let mut f = Self::new(height, width, direction);
        for i in 0..height * width {
            f.vectors[2 * i] = u;
            f.vectors[2 * i + 1] = v;
        }
        f
    }

    #[inline]
    pub fn uv(&self, y: usize, x: usize) -> (f64, f64) {
        let i = 2 * (y * self.width + x);
        (self.vectors[i], self.vectors[i + 1])
    }

    #[inline]
    pub fn set_uv(&mut self, y: usize, x: usize, u: f64, v: f64) {
        let i = 2 * (y * self.width + x);
        self.vectors[i] = u;
        self.vectors[i + 1] = v;
    }

    pub fn same_dims(&self, other: &FlowField) -> bool {
        self.height == other.height && self.width == other.width
    }

    /// Bilinear sample of the flow vector at a fractional position; `None`
    /// outside the grid.
    pub fn sample_bilinear(&self, x: f64, y: f64) -> Option<(f64, f64)> {
        if !(x >= 0.0 && x <= (self.width - 1) as f64 && y >= 0.0 && y <= (self.height - 1) as f64)
        {
            return None;
        }
        let x0 = x.floor() as usize;
        let y0 = y.floor() as usize;
        let x1 = (x0 + 1).min(self.width - 1);
        let y1 = (y0 + 1).min(self.height - 1);
        let fx = x - x0 as f64;
        let fy = y - y0 as f64;
        let lerp = |c: usize| {
            let g = |yy: usize, xx: usize| self.vectors[2 * (yy * self.width + xx) + c];
            g(y0, x0) * (1.0 - fx) * (1.0 - fy)
                + g(y0, x1) * fx * (1.0 - fy)
                + g(y1, x0) * (1.0 - fx) * fy
                + g(y1, x1) * fx * fy
        };
        Some((lerp(0), lerp(1)))
    }
}

/// Reasons a pixel's temporal weight was zeroed.
pub mod weight_flags {
    pub const DISOCCLUDED: u8 = 1;
    pub const MOTION_BOUNDARY: u8 = 2;
    pub const OUT_OF_BOUNDS: u8 = 4;
}

/// H×W per-pixel weights in `[0,1]` with provenance flags.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMap {
    pub height: usize,
    pub width: usize,
    pub weights: Vec<f64>,
    pub flags: Vec<u8>,
}

impl WeightMap {
    pub fn ones(height: usize, width: usize) -> Self {
        WeightMap {
            height,
            width,
            weights: vec![1.0; height * width],
            flags: vec![0; height * width],
        }
    }

    pub fn zeros(height: usize, width: usize) -> Self {
        WeightMap {
            height,
            width,
            weights: vec![0.0; height * width],
            flags: vec![0; height * width],
        }
    }

    #[inline]
    pub fn at(&self, y: usize, x: usize) -> f64 {
        self.weights[y * self.width + x]
    }

    #[inline]
    pub fn flag_at(&self, y: usize, x: usize) -> u8 {
        self.flags[y * self.width + x]
    }

    /// Zero the weight at a pixel and record why.
    pub fn clear(&mut self, y: usize, x: usize, flag: u8) {
        let i = y * self.width + x;
        self.weights[i] = 0.0;
        self.flags[i] |= flag;
    }

    pub fn same_dims(&self, other: &WeightMap) -> bool {
        self.height == other.height && self.width == other.width
    }

    pub fn valid(&self) -> bool {
        self.weights.iter().all(|w| (0.0..=1.0).contains(w))
            && self
                .weights
                .iter()
                .zip(&self.flags)
                .all(|(w, f)| *f == 0 || *w == 0.0)
    }
}
