use serde::{Deserialize, Serialize};

use super::{check_input, density_count, WeatherModel};
use crate::rng::{derive, unit_f64, CounterRng};
use crate::{Image, Result};

/// Rain as thin, slanted additive streaks followed by a slight desaturation.
///
/// Streak `i` draws its start point and angle from fixed positions of the
/// seeded stream, so raising `t` only adds streaks and lengthens existing
/// ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RainModel {
    /// Streaks per 128000 px at `t = 1`.
    pub density: f64,
    pub min_length: f64,
    pub max_length: f64,
    pub min_angle_deg: f64,
    pub max_angle_deg: f64,
    pub brightness: f32,
    /// Fraction of the desaturation blend at `t = 1`.
    pub desaturation: f32,
}

impl Default for RainModel {
    fn default() -> Self {
        Self {
            density: 300.0,
            min_length: 8.0,
            max_length: 20.0,
            min_angle_deg: 75.0,
            max_angle_deg: 85.0,
            brightness: 0.25,
            desaturation: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Streak {
    pub x0: f64,
    pub y0: f64,
    pub dx: f64,
    pub dy: f64,
    pub length: f64,
}

impl Streak {
    fn distance(&self, px: f64, py: f64) -> f64 {
        let (rx, ry) = (px - self.x0, py - self.y0);
        let along = (rx * self.dx + ry * self.dy).clamp(0.0, self.length);
        let (cx, cy) = (self.x0 + along * self.dx, self.y0 + along * self.dy);
        ((px - cx).powi(2) + (py - cy).powi(2)).sqrt()
    }
}

impl RainModel {
    pub fn streak_count(&self, width: usize, height: usize, t: f64) -> usize {
        density_count(self.density, width, height, t)
    }

    pub fn plan(&self, width: usize, height: usize, t: f64, seed: u64) -> Vec<Streak> {
        let key = derive(seed, "rain");
        let length = self.min_length + (self.max_length - self.min_length) * t;
        (0..self.streak_count(width, height, t) as u64)
            .map(|i| {
                let u = |j: u64| unit_f64(CounterRng::at(key, 4 * i + j));
                let angle = (self.min_angle_deg + (self.max_angle_deg - self.min_angle_deg) * u(2)).to_radians();
                Streak {
                    x0: u(0) * width as f64,
                    y0: u(1) * (height as f64 + self.max_length) - self.max_length,
                    dx: angle.cos(),
                    dy: angle.sin(),
                    length,
                }
            })
            .collect()
    }
}

impl WeatherModel for RainModel {
    fn name(&self) -> &'static str {
        "rain"
    }

    fn apply(&self, img: &Image, t: f64, seed: u64) -> Result<Image> {
        check_input(img, t)?;
        if t == 0.0 {
            return Ok(img.clone());
        }
        let (w, h) = (img.width(), img.height());
        let mut glow = vec![0.0f32; w * h];
        for s in self.plan(w, h, t, seed) {
            let (x1, y1) = (s.x0 + s.dx * s.length, s.y0 + s.dy * s.length);
            let xs = (s.x0.min(x1) - 1.5).floor().max(0.0) as usize;
            let xe = ((s.x0.max(x1) + 1.5).ceil().max(0.0) as usize).min(w);
            let ys = (s.y0.min(y1) - 1.5).floor().max(0.0) as usize;
            let ye = ((s.y0.max(y1) + 1.5).ceil().max(0.0) as usize).min(h);
            for y in ys..ye {
                for x in xs..xe {
                    let weight = 1.0 - s.distance(x as f64 + 0.5, y as f64 + 0.5);
                    if weight > 0.0 {
                        glow[y * w + x] += self.brightness * weight as f32;
                    }
                }
            }
        }
        let s = self.desaturation * t as f32;
        let mut data = img.data().to_vec();
        for (px, g) in data.chunks_exact_mut(3).zip(glow) {
            for v in px.iter_mut() {
                *v = (*v + g).min(1.0);
            }
            let gray = (px[0] + px[1] + px[2]) / 3.0;
            for v in px.iter_mut() {
                *v = ((1.0 - s) * *v + s * gray).clamp(0.0, 1.0);
            }
        }
        Ok(Image::from_raw(w, h, data, img.space()))
    }
}
