use serde::{Deserialize, Serialize};

use super::{check_input, density_count, WeatherModel};
use crate::rng::{derive, unit_f64, CounterRng};
use crate::{Image, Result};

/// Snow as soft white Gaussian flakes plus a uniform white veil.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SnowModel {
    /// Flakes per 128000 px at `t = 1`.
    pub density: f64,
    pub min_radius: f64,
    pub max_radius: f64,
    pub peak_alpha: f64,
    /// Veil weight at `t = 1`.
    pub veil: f32,
}

impl Default for SnowModel {
    fn default() -> Self {
        Self {
            density: 200.0,
            min_radius: 1.0,
            max_radius: 3.0,
            peak_alpha: 0.9,
            veil: 0.3,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Flake {
    pub cx: f64,
    pub cy: f64,
    pub radius: f64,
}

impl SnowModel {
    pub fn flake_count(&self, width: usize, height: usize, t: f64) -> usize {
        density_count(self.density, width, height, t)
    }

    pub fn plan(&self, width: usize, height: usize, t: f64, seed: u64) -> Vec<Flake> {
        let key = derive(seed, "snow");
        (0..self.flake_count(width, height, t) as u64)
            .map(|i| {
                let u = |j: u64| unit_f64(CounterRng::at(key, 3 * i + j));
                Flake {
                    cx: u(0) * width as f64,
                    cy: u(1) * height as f64,
                    radius: self.min_radius + (self.max_radius - self.min_radius) * u(2),
                }
            })
            .collect()
    }
}

impl WeatherModel for SnowModel {
    fn name(&self) -> &'static str {
        "snow"
    }

    fn apply(&self, img: &Image, t: f64, seed: u64) -> Result<Image> {
        check_input(img, t)?;
        if t == 0.0 {
            return Ok(img.clone());
        }
        let (w, h) = (img.width(), img.height());
        let mut data = img.data().to_vec();
        for f in self.plan(w, h, t, seed) {
            // sigma = radius / 2; the flake is cut off at two radii.
            let two_sigma_sq = 2.0 * (f.radius / 2.0).powi(2);
            let reach = 2.0 * f.radius;
            let xs = (f.cx - reach).floor().max(0.0) as usize;
            let xe = ((f.cx + reach).ceil() as usize + 1).min(w);
            let ys = (f.cy - reach).floor().max(0.0) as usize;
            let ye = ((f.cy + reach).ceil() as usize + 1).min(h);
            for y in ys..ye {
                for x in xs..xe {
                    let d2 = (x as f64 + 0.5 - f.cx).powi(2) + (y as f64 + 0.5 - f.cy).powi(2);
                    if d2 > reach * reach {
                        continue;
                    }
                    let alpha = (self.peak_alpha * (-d2 / two_sigma_sq).exp()) as f32;
                    let i = (y * w + x) * 3;
                    for v in &mut data[i..i + 3] {
                        *v += alpha * (1.0 - *v);
                    }
                }
            }
        }
        let veil = self.veil * t as f32;
        for v in &mut data {
            *v = ((1.0 - veil) * *v + veil).clamp(0.0, 1.0);
        }
        Ok(Image::from_raw(w, h, data, img.space()))
    }
}
