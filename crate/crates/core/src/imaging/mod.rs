//! Float RGB/HSV rasters, PPM interchange, and the crop grid.

mod color;
mod ppm;
mod tiling;

pub use color::{hsv_to_rgb, hsv_to_rgb_pixel, rgb_to_hsv, rgb_to_hsv_pixel, to_space};
pub use ppm::{decode_ppm, encode_ppm, quantize, read_ppm, write_ppm};
pub use tiling::{join_crops, split_crops, CropGrid};

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColorSpace {
    Rgb,
    /// Hue is stored as `degrees / 360`, so every channel stays in `[0, 1]`.
    Hsv,
}

/// Row-major, channel-interleaved 3-channel raster with values in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    data: Vec<f32>,
    space: ColorSpace,
}

impl Image {
    pub const CHANNELS: usize = 3;

    pub fn new(width: usize, height: usize, data: Vec<f32>, space: ColorSpace) -> Result<Self> {
        if data.len() != width * height * 3 {
            return Err(Error::Dimension(format!(
                "{}x{} image needs {} values, got {}",
                width,
                height,
                width * height * 3,
                data.len()
            )));
        }
        if let Some(v) = data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::Contract(format!("pixel value {v} outside [0, 1]")));
        }
        Ok(Self {
            width,
            height,
            data,
            space,
        })
    }

    /// Builds an image from values already known to lie in `[0, 1]`.
    pub(crate) fn from_raw(width: usize, height: usize, data: Vec<f32>, space: ColorSpace) -> Self {
        debug_assert_eq!(data.len(), width * height * 3);
        debug_assert!(data.iter().all(|v| (0.0..=1.0).contains(v)));
        Self {
            width,
            height,
            data,
            space,
        }
    }

    /// Like [`Image::new`] but clamps every value into `[0, 1]` (NaN maps to 0).
    pub fn from_clamped(width: usize, height: usize, mut data: Vec<f32>, space: ColorSpace) -> Result<Self> {
        for v in &mut data {
            *v = if v.is_nan() { 0.0 } else { v.clamp(0.0, 1.0) };
        }
        Self::new(width, height, data, space)
    }

    pub fn filled(width: usize, height: usize, rgb: [f32; 3]) -> Self {
        let mut data = Vec::with_capacity(width * height * 3);
        for _ in 0..width * height {
            data.extend_from_slice(&rgb);
        }
        Self::from_raw(width, height, data, ColorSpace::Rgb)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn space(&self) -> ColorSpace {
        self.space
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn pixel(&self, x: usize, y: usize) -> [f32; 3] {
        let i = (y * self.width + x) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    pub fn pixels(&self) -> impl Iterator<Item = &[f32]> {
        self.data.chunks_exact(3)
    }

    pub fn require_space(&self, space: ColorSpace, op: &str) -> Result<()> {
        if self.space != space {
            return Err(Error::Contract(format!(
                "{op} expects a {space:?} image, got {:?}",
                self.space
            )));
        }
        Ok(())
    }

    pub fn mean(&self) -> f64 {
        if self.data.is_empty() {
            return 0.0;
        }
        self.data.iter().map(|&v| v as f64).sum::<f64>() / self.data.len() as f64
    }

    /// Rec. 601 luma plane.
    pub fn luma(&self) -> Vec<f32> {
        self.pixels()
            .map(|p| 0.299 * p[0] + 0.587 * p[1] + 0.114 * p[2])
            .collect()
    }

    /// Channel-planar copy (`[3, H, W]`), the layout the network consumes.
    pub fn to_planar(&self) -> Vec<f32> {
        let n = self.width * self.height;
        let mut out = vec![0.0; 3 * n];
        for (i, p) in self.pixels().enumerate() {
            out[i] = p[0];
            out[n + i] = p[1];
            out[2 * n + i] = p[2];
        }
        out
    }

    /// Inverse of [`Image::to_planar`]; values are clamped into `[0, 1]`.
    pub fn from_planar(width: usize, height: usize, planar: &[f32], space: ColorSpace) -> Result<Self> {
        let n = width * height;
        if planar.len() != 3 * n {
            return Err(Error::Dimension(format!(
                "planar buffer of {} values does not fit {width}x{height}x3",
                planar.len()
            )));
        }
        let mut data = Vec::with_capacity(3 * n);
        for i in 0..n {
            data.extend_from_slice(&[planar[i], planar[n + i], planar[2 * n + i]]);
        }
        Self::from_clamped(width, height, data, space)
    }
}

/// Mean squared error over all channels of two same-sized images.
pub fn mse(a: &Image, b: &Image) -> Result<f64> {
    if a.width != b.width || a.height != b.height {
        return Err(Error::Dimension(format!(
            "cannot compare {}x{} with {}x{}",
            a.width, a.height, b.width, b.height
        )));
    }
    let n = a.data.len().max(1) as f64;
    Ok(a.data
        .iter()
        .zip(&b.data)
        .map(|(&x, &y)| {
            let d = x as f64 - y as f64;
            d * d
        })
        .sum::<f64>()
        / n)
}
