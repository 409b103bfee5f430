//! Binary PGM and raw byte files.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GrayImage {
    pub width: usize,
    pub height: usize,
    /// Raster order, row by row.
    pub pixels: Vec<u8>,
}

impl GrayImage {
    pub fn new(width: usize, height: usize, pixels: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Format("image dimensions must be positive".into()));
        }
        if width.checked_mul(height) != Some(pixels.len()) {
            return Err(Error::Format(format!(
                "{width}x{height} image needs {} pixels, got {}",
                width.saturating_mul(height),
                pixels.len()
            )));
        }
        Ok(GrayImage { width, height, pixels })
    }

    /// Same dimensions, new pixels.
    pub fn with_pixels(&self, pixels: Vec<u8>) -> Result<Self> {
        GrayImage::new(self.width, self.height, pixels)
    }

    /// Nearest-neighbour resampling to `width` x `height`.
    pub fn downsample(&self, width: usize, height: usize) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::Format("image dimensions must be positive".into()));
        }
        let mut pixels = Vec::with_capacity(width * height);
        for row in 0..height {
            let sy = row * self.height / height;
            for col in 0..width {
                let sx = col * self.width / width;
                pixels.push(self.pixels[sy * self.width + sx]);
            }
        }
        GrayImage::new(width, height, pixels)
    }
}

struct Header<'a> {
    data: &'a [u8],
    pos: usize,
}

impl Header<'_> {
    fn skip_space_and_comments(&mut self) {
        while self.pos < self.data.len() {
            match self.data[self.pos] {
                b'#' => {
                    while self.pos < self.data.len() && self.data[self.pos] != b'\n' {
                        self.pos += 1;
                    }
                }
                b if b.is_ascii_whitespace() => self.pos += 1,
                _ => break,
            }
        }
    }

    fn number(&mut self, what: &str) -> Result<usize> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.data.len() && self.data[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(Error::Format(format!("missing {what} in PGM header")));
        }
        std::str::from_utf8(&self.data[start..self.pos])
            .unwrap()
            .parse()
            .map_err(|_| Error::Format(format!("{what} out of range")))
    }
}

pub fn read_pgm(data: &[u8]) -> Result<GrayImage> {
    match data.get(..2) {
        Some(b"P5") => {}
        Some(b"P6") | Some(b"P3") => {
            return Err(Error::Format(
                "colour PPM input is not supported, convert to 8-bit grayscale (P5)".into(),
            ))
        }
        _ => return Err(Error::Format("not a binary PGM (magic P5)".into())),
    }
    let mut h = Header { data, pos: 2 };
    let width = h.number("width")?;
    let height = h.number("height")?;
    let maxval = h.number("maxval")?;
    if maxval != 255 {
        return Err(Error::Format(format!("maxval must be 255, got {maxval}")));
    }
    // exactly one whitespace byte separates the header from the raster
    match data.get(h.pos) {
        Some(b) if b.is_ascii_whitespace() => h.pos += 1,
        _ => return Err(Error::Format("truncated PGM header".into())),
    }
    let need = width
        .checked_mul(height)
        .ok_or_else(|| Error::Format("image dimensions overflow".into()))?;
    let payload = &data[h.pos..];
    if payload.len() < need {
        return Err(Error::Format(format!(
            "truncated payload: expected {need} bytes, found {}",
            payload.len()
        )));
    }
    GrayImage::new(width, height, payload[..need].to_vec())
}

pub fn write_pgm(img: &GrayImage) -> Vec<u8> {
    let mut out = format!("P5\n{} {}\n255\n", img.width, img.height).into_bytes();
    out.extend_from_slice(&img.pixels);
    out
}

/// Headerless bytes; when a length is declared the file must match it.
pub fn read_raw(data: &[u8], declared: Option<usize>) -> Result<Vec<u8>> {
    if let Some(len) = declared {
        if len != data.len() {
            return Err(Error::Format(format!(
                "raw file holds {} bytes, expected {len}",
                data.len()
            )));
        }
    }
    Ok(data.to_vec())
}

pub fn write_raw(bytes: &[u8]) -> Vec<u8> {
    bytes.to_vec()
}

pub fn load_pgm(path: impl AsRef<Path>) -> Result<GrayImage> {
    read_pgm(&fs::read(path)?)
}

pub fn save_pgm(path: impl AsRef<Path>, img: &GrayImage) -> Result<()> {
    fs::write(path, write_pgm(img))?;
    Ok(())
}
