use std::ops::{Deref, DerefMut};

use super::raster::{Mask, Raster};
use crate::error::{Error, Result};

/// Equirectangular raster: `width == 2 * height`, `width >= 4`.
///
/// Pixel `(u, v)` has its center at
/// `lon = (u + 0.5) / width * 360 - 180`, `lat = 90 - (v + 0.5) / height * 180`.
#[derive(Debug, Clone, PartialEq)]
pub struct EquirectImage(Raster);

impl EquirectImage {
    pub fn new(raster: Raster) -> Result<Self> {
        check_equirect_dims(raster.width, raster.height)?;
        Ok(Self(raster))
    }

    pub fn filled(width: usize, channels: usize, value: f32) -> Result<Self> {
        Self::new(Raster::filled(width, width / 2, channels, value))
    }

    /// Builds an image from a function of pixel-center `(lon, lat)` in degrees.
    pub fn from_lon_lat(
        width: usize,
        channels: usize,
        mut f: impl FnMut(f64, f64, usize) -> f32,
    ) -> Result<Self> {
        let height = width / 2;
        check_equirect_dims(width, height)?;
        Ok(Self(Raster::from_fn(width, height, channels, |x, y, c| {
            f(column_lon(x, width), row_lat(y, height), c)
        })))
    }

    pub fn into_raster(self) -> Raster {
        self.0
    }

    pub fn raster(&self) -> &Raster {
        &self.0
    }

    /// Bilinear sample at a column-space position.
    pub fn sample(&self, pos: SamplePos, out: &mut [f32]) {
        let taps = pos.taps(self.width, self.height);
        for (c, o) in out.iter_mut().enumerate().take(self.channels) {
            let mut acc = 0.0f64;
            for (x, y, w) in taps {
                acc += w * self.0.data[(y * self.width + x) * self.channels + c] as f64;
            }
            *o = acc as f32;
        }
    }

    /// Continuous-coordinate sample at `(lon, lat)` in degrees.
    pub fn sample_lon_lat(&self, lon: f64, lat: f64, out: &mut [f32]) {
        self.sample(
            SamplePos::from_lon_lat(lon, lat, self.width, self.height),
            out,
        )
    }
}

impl Deref for EquirectImage {
    type Target = Raster;
    fn deref(&self) -> &Raster {
        &self.0
    }
}

impl DerefMut for EquirectImage {
    fn deref_mut(&mut self) -> &mut Raster {
        &mut self.0
    }
}

pub fn check_equirect_dims(width: usize, height: usize) -> Result<()> {
    if width < 4 || !width.is_multiple_of(2) || width != 2 * height {
        return Err(Error::Dimension(format!(
            "equirectangular raster must be 2:1 and at least 4 wide, got {width}x{height}"
        )));
    }
    Ok(())
}

#[inline]
pub fn column_lon(u: usize, width: usize) -> f64 {
    (u as f64 + 0.5) / width as f64 * 360.0 - 180.0
}

#[inline]
pub fn row_lat(v: usize, height: usize) -> f64 {
    90.0 - (v as f64 + 0.5) / height as f64 * 180.0
}

/// Position in equirectangular pixel space, with pixel centers at integers.
///
/// The column is split into an integer offset and a local fractional part so
/// that shifting by whole columns never changes the interpolation weights.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplePos {
    pub col: i64,
    pub local: f64,
    pub row: f64,
}

impl SamplePos {
    pub fn from_lon_lat(lon: f64, lat: f64, width: usize, height: usize) -> Self {
        Self {
            col: 0,
            local: (lon + 180.0) / 360.0 * width as f64 - 0.5,
            row: (90.0 - lat) / 180.0 * height as f64 - 0.5,
        }
    }

    /// Four bilinear taps `(x, y, weight)`; columns wrap, rows clamp.
    #[inline]
    pub fn taps(&self, width: usize, height: usize) -> [(usize, usize, f64); 4] {
        let fl = self.local.floor();
        let fu = self.local - fl;
        let c0 = (self.col + fl as i64).rem_euclid(width as i64) as usize;
        let c1 = (c0 + 1) % width;

        let max_row = (height - 1) as f64;
        let (r0, r1, fv) = if self.row <= 0.0 {
            (0, 0, 0.0)
        } else if self.row >= max_row {
            (height - 1, height - 1, 0.0)
        } else {
            let r = self.row.floor();
            (r as usize, r as usize + 1, self.row - r)
        };
        [
            (c0, r0, (1.0 - fu) * (1.0 - fv)),
            (c1, r0, fu * (1.0 - fv)),
            (c0, r1, (1.0 - fu) * fv),
            (c1, r1, fu * fv),
        ]
    }

    /// Conservative mask lookup: known only when all four taps are known.
    #[inline]
    pub fn sample_mask(&self, mask: &Mask) -> bool {
        self.taps(mask.width, mask.height)
            .iter()
            .all(|&(x, y, _)| mask.get(x, y))
    }
}

/// Rotates the panorama about the vertical axis so that
/// `out(lon) = img(lon + delta_lon)`.
///
/// Whole-column shifts are exact; other shifts interpolate linearly in longitude.
pub fn rotate_horizontal(img: &EquirectImage, delta_lon: f64) -> EquirectImage {
    let w = img.width;
    let shift = delta_lon * w as f64 / 360.0;
    let whole = shift.round();
    let mut out = img.0.clone();
    let ch = img.channels;
    if (shift - whole).abs() < 1e-9 {
        let s = (whole as i64).rem_euclid(w as i64) as usize;
        for y in 0..img.height {
            for u in 0..w {
                let src = img.index((u + s) % w, y);
                let dst = out.index(u, y);
                out.data[dst..dst + ch].copy_from_slice(&img.data[src..src + ch]);
            }
        }
    } else {
        let fl = shift.floor();
        let frac = shift - fl;
        let base = fl as i64;
        for y in 0..img.height {
            for u in 0..w {
                let a = (u as i64 + base).rem_euclid(w as i64) as usize;
                let b = (a + 1) % w;
                let ia = img.index(a, y);
                let ib = img.index(b, y);
                let dst = out.index(u, y);
                for c in 0..ch {
                    let v = (1.0 - frac) * img.data[ia + c] as f64 + frac * img.data[ib + c] as f64;
                    out.data[dst + c] = v as f32;
                }
            }
        }
    }
    EquirectImage(out)
}

/// Same rotation applied to a mask (whole-column shifts only round to nearest).
pub fn rotate_mask_horizontal(mask: &Mask, delta_lon: f64) -> Mask {
    let w = mask.width;
    let s = ((delta_lon * w as f64 / 360.0).round() as i64).rem_euclid(w as i64) as usize;
    Mask::from_fn(w, mask.height, |u, y| mask.get((u + s) % w, y))
}
