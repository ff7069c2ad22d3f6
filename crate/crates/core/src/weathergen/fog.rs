use serde::{Deserialize, Serialize};

use super::{check_input, noise::ValueNoise, WeatherModel};
use crate::rng::derive;
use crate::{Image, Result};

/// Fog as a scattering blend toward a uniform airlight.
///
/// `out = tau * x + (1 - tau) * airlight` with `tau = exp(-k * d)`,
/// `k = extinction * t` and a depth proxy `d = 0.5 + 0.5 * noise(x, y)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FogModel {
    pub airlight: f32,
    pub extinction: f64,
    pub noise_cell: f64,
    pub noise_octaves: u32,
}

impl Default for FogModel {
    fn default() -> Self {
        Self {
            airlight: 0.92,
            extinction: 4.0,
            noise_cell: 32.0,
            noise_octaves: 3,
        }
    }
}

impl FogModel {
    pub fn transmission(&self, t: f64, depth: f64) -> f64 {
        (-self.extinction * t * depth).exp()
    }

    pub fn blend(&self, value: f32, tau: f64) -> f32 {
        let a = self.airlight as f64;
        ((tau * value as f64 + (1.0 - tau) * a) as f32).clamp(0.0, 1.0)
    }

    /// Per-pixel depth proxy `d` in `[0.5, 1]`.
    pub fn depth_field(&self, width: usize, height: usize, seed: u64) -> Vec<f64> {
        ValueNoise::new(derive(seed, "fog"), self.noise_cell, self.noise_octaves)
            .field(width, height)
            .into_iter()
            .map(|n| 0.5 + 0.5 * n)
            .collect()
    }
}

impl WeatherModel for FogModel {
    fn name(&self) -> &'static str {
        "fog"
    }

    fn apply(&self, img: &Image, t: f64, seed: u64) -> Result<Image> {
        check_input(img, t)?;
        if t == 0.0 {
            return Ok(img.clone());
        }
        let depth = self.depth_field(img.width(), img.height(), seed);
        let mut data = img.data().to_vec();
        for (px, d) in data.chunks_exact_mut(3).zip(depth) {
            let tau = self.transmission(t, d);
            for v in px {
                *v = self.blend(*v, tau);
            }
        }
        Ok(Image::from_raw(img.width(), img.height(), data, img.space()))
    }
}
