//! Binary PPM (P6, maxval 255).

use std::fs;
use std::path::Path;

use super::{ColorSpace, Image};
use crate::{Error, Result};

/// Round-half-up quantization of a `[0, 1]` value to a byte.
///
/// Evaluated in `f64` so the result is identical on every platform.
#[inline]
pub fn quantize(v: f32) -> u8 {
    let scaled = (v as f64 * 255.0 + 0.5).floor();
    scaled.clamp(0.0, 255.0) as u8
}

pub fn encode_ppm(img: &Image) -> Result<Vec<u8>> {
    img.require_space(ColorSpace::Rgb, "write_ppm")?;
    let header = format!("P6\n{} {}\n255\n", img.width(), img.height());
    let mut out = Vec::with_capacity(header.len() + img.data().len());
    out.extend_from_slice(header.as_bytes());
    out.extend(img.data().iter().map(|&v| quantize(v)));
    Ok(out)
}

pub fn write_ppm(img: &Image, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_ppm(img)?;
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_ppm(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_ppm(&bytes).map_err(|e| match e {
        Error::Format(msg) => Error::Format(format!("{}: {msg}", path.display())),
        other => other,
    })
}

struct Header<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl Header<'_> {
    fn skip_whitespace_and_comments(&mut self) {
        while self.pos < self.bytes.len() {
            match self.bytes[self.pos] {
                b'#' => {
                    while self.pos < self.bytes.len() && self.bytes[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                b if b.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        self.skip_whitespace_and_comments();
        let start = self.pos;
        while self.pos < self.bytes.len() && self.bytes[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::Format(format!("missing {what} in PPM header")));
        }
        std::str::from_utf8(&self.bytes[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or_else(|| Error::Format(format!("{what} out of range in PPM header")))
    }
}

pub fn decode_ppm(bytes: &[u8]) -> Result<Image> {
    if bytes.len() < 2 || &bytes[..2] != b"P6" {
        let magic = String::from_utf8_lossy(&bytes[..bytes.len().min(2)]).into_owned();
        return Err(Error::Format(format!("expected magic P6, found {magic:?}")));
    }
    let mut header = Header { bytes, pos: 2 };
    let width = header.number("width")?;
    let height = header.number("height")?;
    let maxval = header.number("maxval")?;
    if maxval != 255 {
        return Err(Error::Format(format!("unsupported maxval {maxval}")));
    }
    // Exactly one whitespace byte separates the header from the payload.
    match bytes.get(header.pos) {
        Some(b) if b.is_ascii_whitespace() => header.pos += 1,
        _ => return Err(Error::Format("missing separator after maxval".into())),
    }
    let expected = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(3))
        .ok_or_else(|| Error::Format("image dimensions overflow".into()))?;
    let payload = &bytes[header.pos..];
    if payload.len() < expected {
        return Err(Error::Format(format!(
            "truncated pixel payload: {} of {expected} bytes",
            payload.len()
        )));
    }
    let data = payload[..expected].iter().map(|&b| b as f32 / 255.0).collect();
    Ok(Image::from_raw(width, height, data, ColorSpace::Rgb))
}
