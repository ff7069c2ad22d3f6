use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::{ColorSpace, CropGrid, Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct WUNetConfig {
    /// Number of encoder (and decoder) levels.
    pub depth: usize,
    /// Channels at the first level; doubled at every level below.
    pub base_channels: usize,
    pub color_space: ColorSpace,
    pub crop_mode: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub crop_grid: Option<CropGrid>,
    /// Whole-image `(width, height)` the model accepts.
    pub input_size: (usize, usize),
}

impl Default for WUNetConfig {
    fn default() -> Self {
        Self {
            depth: 3,
            base_channels: 16,
            color_space: ColorSpace::Rgb,
            crop_mode: false,
            crop_grid: None,
            input_size: (64, 32),
        }
    }
}

impl WUNetConfig {
    /// Full-resolution whole-image setup: 640x200 input.
    pub fn full_whole() -> Self {
        Self {
            input_size: (640, 200),
            ..Self::default()
        }
    }

    /// Full-resolution crop setup: 640x200 split into eight 160x100 crops.
    ///
    /// 100 px is not divisible by 8, so crops use two levels.
    pub fn full_crops() -> Self {
        Self {
            depth: 2,
            crop_mode: true,
            crop_grid: Some(CropGrid::new(4, 2, 160, 100)),
            input_size: (640, 200),
            ..Self::default()
        }
    }

    /// `(width, height)` of one network input: the crop in crop mode, else the image.
    pub fn tensor_size(&self) -> (usize, usize) {
        match (self.crop_mode, self.crop_grid) {
            (true, Some(g)) => (g.crop_width, g.crop_height),
            _ => self.input_size,
        }
    }

    pub fn channels(&self, level: usize) -> usize {
        self.base_channels << level
    }

    pub fn validate(&self) -> Result<()> {
        if self.depth == 0 || self.depth > 8 {
            return Err(Error::Config(format!("depth must be in 1..=8, got {}", self.depth)));
        }
        if self.base_channels == 0 {
            return Err(Error::Config("base_channels must be at least 1".into()));
        }
        if self.crop_mode {
            let grid = self
                .crop_grid
                .ok_or_else(|| Error::Config("crop_mode requires crop_grid".into()))?;
            grid.check_image(self.input_size.0, self.input_size.1)
                .map_err(|e| Error::Config(e.to_string()))?;
        }
        let (w, h) = self.tensor_size();
        let m = 1usize << self.depth;
        if w == 0 || h == 0 || w % m != 0 || h % m != 0 {
            return Err(Error::Config(format!(
                "{w}x{h} input is not divisible by 2^{} = {m}",
                self.depth
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
    /// Where `best.wun`, `last.wun` and `train_log.csv` go; nothing is written when unset.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub checkpoint_dir: Option<PathBuf>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 200,
            batch_size: 24,
            lr: 0.01,
            seed: 0,
            checkpoint_dir: None,
        }
    }
}

impl TrainConfig {
    /// Defaults for crop-mode training (batches of 160 crops).
    pub fn crop_default() -> Self {
        Self {
            batch_size: 160,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Config("epochs must be at least 1".into()));
        }
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(Error::Config(format!("lr must be positive, got {}", self.lr)));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_validate() {
        WUNetConfig::default().validate().unwrap();
        WUNetConfig::full_whole().validate().unwrap();
        WUNetConfig::full_crops().validate().unwrap();
        assert_eq!(TrainConfig::default().batch_size, 24);
        assert_eq!(TrainConfig::crop_default().batch_size, 160);
        assert_eq!(TrainConfig::default().epochs, 200);
        assert_eq!(TrainConfig::default().lr, 0.01);
    }

    #[test]
    fn indivisible_height_is_rejected() {
        let cfg = WUNetConfig {
            depth: 3,
            input_size: (160, 100),
            ..WUNetConfig::default()
        };
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        let crops = WUNetConfig {
            depth: 3,
            ..WUNetConfig::full_crops()
        };
        assert!(matches!(crops.validate(), Err(Error::Config(_))));
    }

    #[test]
    fn crop_mode_needs_a_matching_grid() {
        let mut cfg = WUNetConfig {
            crop_mode: true,
            ..WUNetConfig::default()
        };
        assert!(cfg.validate().is_err());
        cfg.crop_grid = Some(CropGrid::new(2, 2, 32, 16));
        cfg.depth = 2;
        cfg.validate().unwrap();
        assert_eq!(cfg.tensor_size(), (32, 16));
        cfg.crop_grid = Some(CropGrid::new(3, 2, 32, 16));
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn train_config_rules() {
        assert!(TrainConfig { epochs: 0, ..Default::default() }.validate().is_err());
        assert!(TrainConfig { batch_size: 0, ..Default::default() }.validate().is_err());
        assert!(TrainConfig { lr: 0.0, ..Default::default() }.validate().is_err());
    }
}
