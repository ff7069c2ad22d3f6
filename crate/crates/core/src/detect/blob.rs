use std::collections::BTreeMap;
use std::fmt::Debug;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::{BBox, Detection};
use crate::{ColorSpace, Error, Image, Result};

pub const CLASS_CAR: u32 = 0;
pub const CLASS_PEDESTRIAN: u32 = 1;

/// A detector that can be selected by name at runtime.
pub trait Detector: Send + Sync + Debug {
    fn name(&self) -> &'static str;
    fn detect(&self, img: &Image, image_id: &str) -> Result<Vec<Detection>>;
}

/// Contrast-blob detector for the synthetic scenes.
///
/// Signed local contrast (luma minus a clamped box mean) is thresholded,
/// bright and dark pixels are grouped into separate 4-connected components,
/// and the ring of opposite contrast that the box filter leaves around every
/// object is suppressed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BlobDetector {
    pub radius: usize,
    pub threshold: f32,
    pub min_area: usize,
    /// Height / width at or above which a blob is a pedestrian.
    pub pedestrian_aspect: f64,
}

impl Default for BlobDetector {
    fn default() -> Self {
        Self {
            radius: 4,
            threshold: 0.15,
            min_area: 12,
            pedestrian_aspect: 1.8,
        }
    }
}

#[derive(Debug, Clone)]
struct Component {
    positive: bool,
    bbox: BBox,
    area: usize,
    contrast_sum: f64,
}

/// Mean over the `(2r+1)^2` window clipped to the image.
pub fn box_mean(values: &[f32], width: usize, height: usize, r: usize) -> Vec<f32> {
    let w1 = width + 1;
    let mut sat = vec![0.0f64; w1 * (height + 1)];
    for y in 0..height {
        let mut row = 0.0;
        for x in 0..width {
            row += values[y * width + x] as f64;
            sat[(y + 1) * w1 + x + 1] = sat[y * w1 + x + 1] + row;
        }
    }
    let mut out = Vec::with_capacity(values.len());
    for y in 0..height {
        let (y0, y1) = (y.saturating_sub(r), (y + r + 1).min(height));
        for x in 0..width {
            let (x0, x1) = (x.saturating_sub(r), (x + r + 1).min(width));
            let s = sat[y1 * w1 + x1] - sat[y0 * w1 + x1] - sat[y1 * w1 + x0] + sat[y0 * w1 + x0];
            out.push((s / ((y1 - y0) * (x1 - x0)) as f64) as f32);
        }
    }
    out
}

impl BlobDetector {
    /// Signed local contrast of every pixel.
    pub fn contrast(&self, img: &Image) -> Vec<f32> {
        let luma = img.luma();
        let mean = box_mean(&luma, img.width(), img.height(), self.radius);
        luma.iter().zip(&mean).map(|(l, m)| l - m).collect()
    }

    fn components(&self, contrast: &[f32], width: usize, height: usize) -> Vec<Component> {
        let label = |c: f32| -> i8 {
            if c >= self.threshold {
                1
            } else if c <= -self.threshold {
                -1
            } else {
                0
            }
        };
        let mut seen = vec![false; contrast.len()];
        let mut out = Vec::new();
        let mut stack = Vec::new();
        for start in 0..contrast.len() {
            let sign = label(contrast[start]);
            if sign == 0 || seen[start] {
                continue;
            }
            seen[start] = true;
            stack.push(start);
            let (mut x0, mut y0, mut x1, mut y1) = (usize::MAX, usize::MAX, 0, 0);
            let (mut area, mut sum) = (0usize, 0.0f64);
            while let Some(i) = stack.pop() {
                let (x, y) = (i % width, i / width);
                x0 = x0.min(x);
                y0 = y0.min(y);
                x1 = x1.max(x + 1);
                y1 = y1.max(y + 1);
                area += 1;
                sum += contrast[i].abs() as f64;
                let mut visit = |j: usize| {
                    if !seen[j] && label(contrast[j]) == sign {
                        seen[j] = true;
                        stack.push(j);
                    }
                };
                if x > 0 {
                    visit(i - 1);
                }
                if x + 1 < width {
                    visit(i + 1);
                }
                if y > 0 {
                    visit(i - width);
                }
                if y + 1 < height {
                    visit(i + width);
                }
            }
            out.push(Component {
                positive: sign > 0,
                bbox: BBox::new(x0 as f64, y0 as f64, x1 as f64, y1 as f64),
                area,
                contrast_sum: sum,
            });
        }
        out
    }

    fn suppressed(a: &Component, others: &[Component]) -> bool {
        others.iter().filter(|b| b.positive != a.positive).any(|b| {
            if a.bbox.contains(&b.bbox) {
                return true;
            }
            let grown = BBox::new(a.bbox.left - 1.0, a.bbox.top - 1.0, a.bbox.right + 1.0, a.bbox.bottom + 1.0);
            grown.intersection(&b.bbox) > 0.0 && !b.bbox.contains(&a.bbox) && a.area < b.area
        })
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0) || self.min_area == 0 || !(self.pedestrian_aspect > 0.0) {
            return Err(Error::Config(format!("invalid blob detector settings {self:?}")));
        }
        Ok(())
    }
}

impl Detector for BlobDetector {
    fn name(&self) -> &'static str {
        "blob"
    }

    fn detect(&self, img: &Image, image_id: &str) -> Result<Vec<Detection>> {
        img.require_space(ColorSpace::Rgb, "blob detection")?;
        let contrast = self.contrast(img);
        let comps: Vec<Component> = self
            .components(&contrast, img.width(), img.height())
            .into_iter()
            .filter(|c| c.area >= self.min_area)
            .collect();
        Ok(comps
            .iter()
            .filter(|c| !Self::suppressed(c, &comps))
            .map(|c| {
                let class_id = if c.bbox.height() >= self.pedestrian_aspect * c.bbox.width() {
                    CLASS_PEDESTRIAN
                } else {
                    CLASS_CAR
                };
                Detection {
                    image_id: image_id.to_string(),
                    class_id,
                    bbox: c.bbox,
                    confidence: (c.contrast_sum / c.area as f64).clamp(0.0, 1.0),
                }
            })
            .collect())
    }
}

/// Named detectors; `blob` is registered by default.
#[derive(Debug, Clone)]
pub struct DetectorRegistry {
    detectors: BTreeMap<String, Arc<dyn Detector>>,
}

impl DetectorRegistry {
    pub fn empty() -> Self {
        Self {
            detectors: BTreeMap::new(),
        }
    }

    pub fn register(&mut self, detector: Arc<dyn Detector>) {
        self.detectors.insert(detector.name().to_string(), detector);
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn Detector>> {
        self.detectors
            .get(name)
            .cloned()
            .ok_or_else(|| Error::Config(format!("unknown detector {name:?}")))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.detectors.keys().map(String::as_str)
    }
}

impl Default for DetectorRegistry {
    fn default() -> Self {
        let mut r = Self::empty();
        r.register(Arc::new(BlobDetector::default()));
        r
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scene(rects: &[([usize; 4], f32)]) -> Image {
        let (w, h) = (64, 32);
        let mut data = vec![0.45f32; w * h * 3];
        for &([l, t, r, b], v) in rects {
            for y in t..b {
                for x in l..r {
                    data[(y * w + x) * 3..(y * w + x) * 3 + 3].fill(v);
                }
            }
        }
        Image::new(w, h, data, ColorSpace::Rgb).unwrap()
    }

    #[test]
    fn blank_image_has_no_detections() {
        let d = BlobDetector::default().detect(&Image::filled(64, 32, [0.45; 3]), "x").unwrap();
        assert!(d.is_empty());
    }

    #[test]
    fn bright_car_found_exactly() {
        let d = BlobDetector::default().detect(&scene(&[([10, 8, 30, 18], 0.95)]), "x").unwrap();
        assert_eq!(d.len(), 1, "{d:?}");
        assert_eq!(d[0].bbox, BBox::new(10.0, 8.0, 30.0, 18.0));
        assert_eq!(d[0].class_id, CLASS_CAR);
    }

    #[test]
    fn dark_pedestrian_found() {
        let d = BlobDetector::default().detect(&scene(&[([40, 10, 44, 24], 0.05)]), "x").unwrap();
        assert_eq!(d.len(), 1, "{d:?}");
        assert_eq!(d[0].class_id, CLASS_PEDESTRIAN);
        assert_eq!(d[0].bbox, BBox::new(40.0, 10.0, 44.0, 24.0));
    }

    #[test]
    fn box_mean_clamps_at_border() {
        let v: Vec<f32> = (0..12).map(|i| i as f32).collect();
        let m = box_mean(&v, 4, 3, 1);
        assert!((m[0] - (0.0 + 1.0 + 4.0 + 5.0) / 4.0).abs() < 1e-6);
        assert!((m[5] - (0..=10).filter(|i| i % 4 != 3).map(|i| i as f32).sum::<f32>() / 9.0).abs() < 1e-6);
    }

    #[test]
    fn registry_lookup() {
        let r = DetectorRegistry::default();
        assert_eq!(r.names().collect::<Vec<_>>(), vec!["blob"]);
        assert!(r.get("yolo").unwrap_err().is_config());
    }
}
