use serde::{Deserialize, Serialize};

use crate::rng::{mix64, unit_f64};

/// Multi-octave value noise in `[0, 1]`.
///
/// Lattice values are hashed from `(seed, octave, ix, iy)` and interpolated
/// with a smoothstep-weighted bilinear blend. Octave `o` has cell size
/// `cell / 2^o` and weight `2^-o`; the weighted sum is normalized by the
/// total weight.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValueNoise {
    pub seed: u64,
    pub cell: f64,
    pub octaves: u32,
}

impl ValueNoise {
    pub fn new(seed: u64, cell: f64, octaves: u32) -> Self {
        Self {
            seed,
            cell,
            octaves,
        }
    }

    fn lattice(&self, octave: u32, ix: i64, iy: i64) -> f64 {
        let k = mix64(self.seed ^ mix64(octave as u64 + 1));
        let h = mix64(k ^ (ix as u64).wrapping_mul(0xA24B_AED4_963E_E407) ^ (iy as u64).wrapping_mul(0x9FB2_1C65_1E98_DF25));
        unit_f64(h)
    }

    fn octave(&self, octave: u32, x: f64, y: f64) -> f64 {
        let cell = self.cell / (1u64 << octave) as f64;
        let (fx, fy) = (x / cell, y / cell);
        let (x0, y0) = (fx.floor(), fy.floor());
        let smooth = |t: f64| t * t * (3.0 - 2.0 * t);
        let (sx, sy) = (smooth(fx - x0), smooth(fy - y0));
        let (ix, iy) = (x0 as i64, y0 as i64);
        let top = self.lattice(octave, ix, iy) * (1.0 - sx) + self.lattice(octave, ix + 1, iy) * sx;
        let bottom =
            self.lattice(octave, ix, iy + 1) * (1.0 - sx) + self.lattice(octave, ix + 1, iy + 1) * sx;
        top * (1.0 - sy) + bottom * sy
    }

    /// Noise sampled at the center of pixel `(x, y)`.
    pub fn at(&self, x: usize, y: usize) -> f64 {
        let (px, py) = (x as f64 + 0.5, y as f64 + 0.5);
        let mut sum = 0.0;
        let mut norm = 0.0;
        let mut amp = 1.0;
        for o in 0..self.octaves.max(1) {
            sum += amp * self.octave(o, px, py);
            norm += amp;
            amp *= 0.5;
        }
        (sum / norm).clamp(0.0, 1.0)
    }

    pub fn field(&self, width: usize, height: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                out.push(self.at(x, y));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stays_in_unit_interval_and_is_deterministic() {
        let n = ValueNoise::new(5, 16.0, 3);
        let f = n.field(64, 40);
        assert!(f.iter().all(|v| (0.0..=1.0).contains(v)));
        assert_eq!(f, ValueNoise::new(5, 16.0, 3).field(64, 40));
        assert_ne!(f, ValueNoise::new(6, 16.0, 3).field(64, 40));
    }

    #[test]
    fn is_spatially_smooth() {
        let n = ValueNoise::new(1, 32.0, 1);
        let f = n.field(64, 64);
        for y in 0..64 {
            for x in 0..63 {
                assert!((f[y * 64 + x] - f[y * 64 + x + 1]).abs() < 0.1);
            }
        }
    }
}
