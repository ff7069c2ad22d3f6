//! Exact crop grids. Crops are ordered row-major: left to right, then top to
//! bottom.

use serde::{Deserialize, Serialize};

use super::Image;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct CropGrid {
    pub cols: usize,
    pub rows: usize,
    pub crop_width: usize,
    pub crop_height: usize,
}

impl CropGrid {
    pub fn new(cols: usize, rows: usize, crop_width: usize, crop_height: usize) -> Self {
        Self {
            cols,
            rows,
            crop_width,
            crop_height,
        }
    }

    /// Grid of `cols x rows` crops over an image of the given size.
    pub fn for_image(width: usize, height: usize, cols: usize, rows: usize) -> Result<Self> {
        if cols == 0 || rows == 0 || width % cols != 0 || height % rows != 0 {
            return Err(Error::Dimension(format!(
                "{width}x{height} is not divisible into a {cols}x{rows} grid"
            )));
        }
        Ok(Self::new(cols, rows, width / cols, height / rows))
    }

    pub fn count(&self) -> usize {
        self.cols * self.rows
    }

    pub fn full_width(&self) -> usize {
        self.cols * self.crop_width
    }

    pub fn full_height(&self) -> usize {
        self.rows * self.crop_height
    }

    pub fn check_image(&self, width: usize, height: usize) -> Result<()> {
        if self.count() == 0 || self.crop_width == 0 || self.crop_height == 0 {
            return Err(Error::Dimension(format!("degenerate crop grid {self:?}")));
        }
        if width != self.full_width() || height != self.full_height() {
            return Err(Error::Dimension(format!(
                "{width}x{height} image does not split into {}x{} crops of {}x{}",
                self.cols, self.rows, self.crop_width, self.crop_height
            )));
        }
        Ok(())
    }
}

pub fn split_crops(img: &Image, grid: &CropGrid) -> Result<Vec<Image>> {
    grid.check_image(img.width(), img.height())?;
    let (cw, ch) = (grid.crop_width, grid.crop_height);
    let src = img.data();
    let mut crops = Vec::with_capacity(grid.count());
    for gy in 0..grid.rows {
        for gx in 0..grid.cols {
            let mut data = Vec::with_capacity(cw * ch * 3);
            for y in gy * ch..(gy + 1) * ch {
                let start = (y * img.width() + gx * cw) * 3;
                data.extend_from_slice(&src[start..start + cw * 3]);
            }
            crops.push(Image::from_raw(cw, ch, data, img.space()));
        }
    }
    Ok(crops)
}

pub fn join_crops(crops: &[Image], grid: &CropGrid) -> Result<Image> {
    if crops.len() != grid.count() || crops.is_empty() {
        return Err(Error::Dimension(format!(
            "{} crops cannot fill a {}x{} grid",
            crops.len(),
            grid.cols,
            grid.rows
        )));
    }
    let space = crops[0].space();
    if let Some(bad) = crops.iter().find(|c| {
        c.width() != grid.crop_width || c.height() != grid.crop_height || c.space() != space
    }) {
        return Err(Error::Dimension(format!(
            "crop of {}x{} ({:?}) does not match grid cell {}x{} ({space:?})",
            bad.width(),
            bad.height(),
            bad.space(),
            grid.crop_width,
            grid.crop_height
        )));
    }
    let (w, h) = (grid.full_width(), grid.full_height());
    let (cw, ch) = (grid.crop_width, grid.crop_height);
    let mut data = vec![0.0f32; w * h * 3];
    for (k, crop) in crops.iter().enumerate() {
        let (gx, gy) = (k % grid.cols, k / grid.cols);
        for row in 0..ch {
            let dst = ((gy * ch + row) * w + gx * cw) * 3;
            let src = row * cw * 3;
            data[dst..dst + cw * 3].copy_from_slice(&crop.data()[src..src + cw * 3]);
        }
    }
    Ok(Image::from_raw(w, h, data, space))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ColorSpace;
    use proptest::prelude::*;

    fn ramp(w: usize, h: usize) -> Image {
        let n = w * h * 3;
        let data = (0..n).map(|i| i as f32 / n as f32).collect();
        Image::new(w, h, data, ColorSpace::Rgb).unwrap()
    }

    #[test]
    fn full_geometry_gives_eight_crops() {
        let img = ramp(640, 200);
        let grid = CropGrid::new(4, 2, 160, 100);
        let crops = split_crops(&img, &grid).unwrap();
        assert_eq!(crops.len(), 8);
        assert!(crops.iter().all(|c| c.width() == 160 && c.height() == 100));
        let joined = join_crops(&crops, &grid).unwrap();
        assert_eq!((joined.width(), joined.height()), (640, 200));
        assert_eq!(joined, img);
    }

    #[test]
    fn crops_are_row_major() {
        let img = ramp(4, 2);
        let crops = split_crops(&img, &CropGrid::new(2, 2, 2, 1)).unwrap();
        assert_eq!(crops[1].pixel(0, 0), img.pixel(2, 0));
        assert_eq!(crops[2].pixel(0, 0), img.pixel(0, 1));
    }

    #[test]
    fn identity_grid() {
        let img = ramp(5, 3);
        let crops = split_crops(&img, &CropGrid::new(1, 1, 5, 3)).unwrap();
        assert_eq!(crops, vec![img]);
    }

    #[test]
    fn rejects_bad_geometry() {
        let img = ramp(641, 200);
        assert!(matches!(
            split_crops(&img, &CropGrid::new(4, 2, 160, 100)),
            Err(Error::Dimension(_))
        ));
        assert!(CropGrid::for_image(641, 200, 4, 2).is_err());
        let crops = split_crops(&ramp(640, 200), &CropGrid::new(4, 2, 160, 100)).unwrap();
        assert!(matches!(
            join_crops(&crops[..7], &CropGrid::new(4, 2, 160, 100)),
            Err(Error::Dimension(_))
        ));
    }

    proptest! {
        #[test]
        fn join_inverts_split(cols in 1usize..5, rows in 1usize..5, cw in 1usize..7, ch in 1usize..7, seed in any::<u64>()) {
            let mut rng = crate::rng::CounterRng::new(seed);
            let (w, h) = (cols * cw, rows * ch);
            let data = (0..w * h * 3).map(|_| rng.next_f64() as f32).collect();
            let img = Image::new(w, h, data, ColorSpace::Rgb).unwrap();
            let grid = CropGrid::for_image(w, h, cols, rows).unwrap();
            let back = join_crops(&split_crops(&img, &grid).unwrap(), &grid).unwrap();
            prop_assert_eq!(back, img);
        }
    }
}
