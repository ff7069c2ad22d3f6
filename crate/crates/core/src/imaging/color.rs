//! Hexcone RGB <-> HSV. Arithmetic is done in `f64`; storage is `f32`.

use super::{ColorSpace, Image};
use crate::Result;

pub fn rgb_to_hsv_pixel(rgb: [f64; 3]) -> [f64; 3] {
    let [r, g, b] = rgb;
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let s = if max > 0.0 { delta / max } else { 0.0 };
    let h = if delta <= 0.0 {
        0.0
    } else if max == r {
        ((g - b) / delta).rem_euclid(6.0) / 6.0
    } else if max == g {
        ((b - r) / delta + 2.0) / 6.0
    } else {
        ((r - g) / delta + 4.0) / 6.0
    };
    [if h >= 1.0 { h - 1.0 } else { h }, s, max]
}

pub fn hsv_to_rgb_pixel(hsv: [f64; 3]) -> [f64; 3] {
    let [h, s, v] = hsv;
    if s <= 0.0 {
        return [v, v, v];
    }
    let h6 = h.rem_euclid(1.0) * 6.0;
    let sector = h6.floor();
    let f = h6 - sector;
    let p = v * (1.0 - s);
    let q = v * (1.0 - s * f);
    let t = v * (1.0 - s * (1.0 - f));
    match sector as u8 % 6 {
        0 => [v, t, p],
        1 => [q, v, p],
        2 => [p, v, t],
        3 => [p, q, v],
        4 => [t, p, v],
        _ => [v, p, q],
    }
}

fn convert(img: &Image, f: fn([f64; 3]) -> [f64; 3], space: ColorSpace) -> Image {
    let mut data = Vec::with_capacity(img.data().len());
    for p in img.pixels() {
        let out = f([p[0] as f64, p[1] as f64, p[2] as f64]);
        for c in out {
            data.push((c as f32).clamp(0.0, 1.0));
        }
    }
    if space == ColorSpace::Hsv {
        // A hue just below 1 can round up to 1.0 in f32; that is hue 0.
        for h in data.iter_mut().step_by(3) {
            if *h >= 1.0 {
                *h = 0.0;
            }
        }
    }
    Image::from_raw(img.width(), img.height(), data, space)
}

pub fn rgb_to_hsv(img: &Image) -> Result<Image> {
    img.require_space(ColorSpace::Rgb, "rgb_to_hsv")?;
    Ok(convert(img, rgb_to_hsv_pixel, ColorSpace::Hsv))
}

pub fn hsv_to_rgb(img: &Image) -> Result<Image> {
    img.require_space(ColorSpace::Hsv, "hsv_to_rgb")?;
    Ok(convert(img, hsv_to_rgb_pixel, ColorSpace::Rgb))
}

/// Converts to `space`, copying when the image is already there.
pub fn to_space(img: &Image, space: ColorSpace) -> Image {
    match (img.space(), space) {
        (ColorSpace::Rgb, ColorSpace::Hsv) => convert(img, rgb_to_hsv_pixel, ColorSpace::Hsv),
        (ColorSpace::Hsv, ColorSpace::Rgb) => convert(img, hsv_to_rgb_pixel, ColorSpace::Rgb),
        _ => img.clone(),
    }
}
