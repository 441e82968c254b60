use std::io::Cursor;
use std::path::Path;

use image::{GrayImage, ImageFormat, RgbImage};

use crate::error::{Error, Result};

/// Interleaved row-major float raster with samples in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Raster {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub data: Vec<f32>,
}

impl Raster {
    pub fn new(width: usize, height: usize, channels: usize) -> Self {
        Self::filled(width, height, channels, 0.0)
    }

    pub fn filled(width: usize, height: usize, channels: usize, value: f32) -> Self {
        Self {
            width,
            height,
            channels,
            data: vec![value; width * height * channels],
        }
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f32,
    ) -> Self {
        let mut data = Vec::with_capacity(width * height * channels);
        for y in 0..height {
            for x in 0..width {
                for c in 0..channels {
                    data.push(f(x, y, c));
                }
            }
        }
        Self {
            width,
            height,
            channels,
            data,
        }
    }

    pub fn from_data(width: usize, height: usize, channels: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != width * height * channels {
            return Err(Error::Dimension(format!(
                "buffer of {} samples does not match {width}x{height}x{channels}",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
        })
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize) -> usize {
        (y * self.width + x) * self.channels
    }

    #[inline]
    pub fn pixel(&self, x: usize, y: usize) -> &[f32] {
        let i = self.index(x, y);
        &self.data[i..i + self.channels]
    }

    #[inline]
    pub fn pixel_mut(&mut self, x: usize, y: usize) -> &mut [f32] {
        let i = self.index(x, y);
        &mut self.data[i..i + self.channels]
    }

    pub fn same_shape(&self, other: &Raster) -> bool {
        self.width == other.width && self.height == other.height && self.channels == other.channels
    }

    pub fn to_png_bytes(&self) -> Result<Vec<u8>> {
        let mut out = Vec::new();
        match self.channels {
            1 => {
                let img = GrayImage::from_raw(
                    self.width as u32,
                    self.height as u32,
                    self.data.iter().map(|&v| quantize(v)).collect(),
                )
                .expect("buffer length checked by construction");
                img.write_to(&mut Cursor::new(&mut out), ImageFormat::Png)?;
            }
            3 => {
                let img = RgbImage::from_raw(
                    self.width as u32,
                    self.height as u32,
                    self.data.iter().map(|&v| quantize(v)).collect(),
                )
                .expect("buffer length checked by construction");
                img.write_to(&mut Cursor::new(&mut out), ImageFormat::Png)?;
            }
            c => {
                return Err(Error::Dimension(format!(
                    "cannot encode {c}-channel raster as PNG"
                )))
            }
        }
        Ok(out)
    }

    /// Decodes any PNG into a 3-channel raster.
    pub fn from_png_bytes(bytes: &[u8]) -> Result<Self> {
        let img = image::load_from_memory_with_format(bytes, ImageFormat::Png)?.to_rgb8();
        let (w, h) = img.dimensions();
        Ok(Self {
            width: w as usize,
            height: h as usize,
            channels: 3,
            data: img.into_raw().into_iter().map(dequantize).collect(),
        })
    }

    pub fn load_png(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_png_bytes(&bytes)
    }

    /// Rounds every sample to the nearest 8-bit level.
    pub fn quantized(&self) -> Raster {
        Raster {
            data: self.data.iter().map(|&v| dequantize(quantize(v))).collect(),
            ..*self
        }
    }
}

#[inline]
pub fn quantize(v: f32) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

#[inline]
pub fn dequantize(v: u8) -> f32 {
    v as f32 / 255.0
}

/// Per-pixel known/unknown flags.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Mask {
    pub width: usize,
    pub height: usize,
    pub data: Vec<bool>,
}

impl Mask {
    pub fn new(width: usize, height: usize, known: bool) -> Self {
        Self {
            width,
            height,
            data: vec![known; width * height],
        }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> bool) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.data[y * self.width + x] = v;
    }

    pub fn count_known(&self) -> usize {
        self.data.iter().filter(|&&k| k).count()
    }

    pub fn all_known(&self) -> bool {
        self.data.iter().all(|&k| k)
    }

    pub fn any_known(&self) -> bool {
        self.data.iter().any(|&k| k)
    }

    pub fn union(&self, other: &Mask) -> Mask {
        Mask {
            width: self.width,
            height: self.height,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| a || b)
                .collect(),
        }
    }

    /// 0 = unknown, 255 = known.
    pub fn to_png_bytes(&self) -> Result<Vec<u8>> {
        let img = GrayImage::from_raw(
            self.width as u32,
            self.height as u32,
            self.data.iter().map(|&k| if k { 255 } else { 0 }).collect(),
        )
        .expect("buffer length checked by construction");
        let mut out = Vec::new();
        img.write_to(&mut Cursor::new(&mut out), ImageFormat::Png)?;
        Ok(out)
    }

    /// Any sample of 128 or above counts as known.
    pub fn from_png_bytes(bytes: &[u8]) -> Result<Self> {
        let img = image::load_from_memory_with_format(bytes, ImageFormat::Png)?.to_luma8();
        let (w, h) = img.dimensions();
        Ok(Self {
            width: w as usize,
            height: h as usize,
            data: img.into_raw().into_iter().map(|v| v >= 128).collect(),
        })
    }

    pub fn load_png(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_png_bytes(&bytes)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn png_round_trip_is_exact_on_quantized_values() {
        let r = Raster::from_fn(9, 5, 3, |x, y, c| {
            ((x * 31 + y * 7 + c * 3) % 256) as f32 / 255.0
        });
        let back = Raster::from_png_bytes(&r.to_png_bytes().unwrap()).unwrap();
        assert_eq!(back, r);
    }

    #[test]
    fn mask_png_uses_0_and_255() {
        let m = Mask::from_fn(4, 3, |x, y| (x + y) % 2 == 0);
        let bytes = m.to_png_bytes().unwrap();
        let img = image::load_from_memory(&bytes).unwrap().to_luma8();
        assert!(img.pixels().all(|p| p.0[0] == 0 || p.0[0] == 255));
        assert_eq!(Mask::from_png_bytes(&bytes).unwrap(), m);
    }

    #[test]
    fn from_data_rejects_wrong_length() {
        assert!(matches!(
            Raster::from_data(2, 2, 3, vec![0.0; 11]),
            Err(Error::Dimension(_))
        ));
    }
}
