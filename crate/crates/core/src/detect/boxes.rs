use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Axis-aligned box in pixel coordinates; `right` and `bottom` are exclusive.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BBox {
    pub left: f64,
    pub top: f64,
    pub right: f64,
    pub bottom: f64,
}

impl BBox {
    pub fn new(left: f64, top: f64, right: f64, bottom: f64) -> Self {
        Self { left, top, right, bottom }
    }

    pub fn width(&self) -> f64 {
        self.right - self.left
    }

    pub fn height(&self) -> f64 {
        self.bottom - self.top
    }

    pub fn area(&self) -> f64 {
        self.width().max(0.0) * self.height().max(0.0)
    }

    pub fn is_valid(&self) -> bool {
        [self.left, self.top, self.right, self.bottom].iter().all(|v| v.is_finite())
            && self.right > self.left
            && self.bottom > self.top
    }

    pub fn validate(&self) -> Result<()> {
        if self.is_valid() {
            Ok(())
        } else {
            Err(Error::Contract(format!("degenerate box {self:?}")))
        }
    }

    pub fn intersection(&self, other: &BBox) -> f64 {
        let w = self.right.min(other.right) - self.left.max(other.left);
        let h = self.bottom.min(other.bottom) - self.top.max(other.top);
        w.max(0.0) * h.max(0.0)
    }

    pub fn contains(&self, other: &BBox) -> bool {
        self.left <= other.left && self.top <= other.top && self.right >= other.right && self.bottom >= other.bottom
    }
}

/// Intersection over union; degenerate boxes are a contract error.
pub fn iou(a: &BBox, b: &BBox) -> Result<f64> {
    a.validate()?;
    b.validate()?;
    let inter = a.intersection(b);
    Ok(inter / (a.area() + b.area() - inter))
}

/// A ground-truth box. `ignore` marks a don't-care region.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GtBox {
    pub class_id: u32,
    #[serde(flatten)]
    pub bbox: BBox,
    #[serde(default)]
    pub ignore: bool,
}

impl GtBox {
    pub fn new(class_id: u32, bbox: BBox) -> Self {
        Self {
            class_id,
            bbox,
            ignore: false,
        }
    }

    pub fn ignore_region(bbox: BBox) -> Self {
        Self {
            class_id: u32::MAX,
            bbox,
            ignore: true,
        }
    }
}

/// One detector output, keyed by the image it was found in.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Detection {
    pub image_id: String,
    pub class_id: u32,
    #[serde(flatten)]
    pub bbox: BBox,
    pub confidence: f64,
}

impl Detection {
    pub fn validate(&self) -> Result<()> {
        self.bbox.validate()?;
        if !(0.0..=1.0).contains(&self.confidence) {
            return Err(Error::Contract(format!("confidence {} outside [0, 1]", self.confidence)));
        }
        Ok(())
    }
}
