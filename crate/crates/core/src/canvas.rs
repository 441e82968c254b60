//! The incomplete panorama and its hard-selection compositing operator.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{backproject_view, row_lat, EquirectImage, Mask, Raster, ViewSpec};

/// An equirectangular image with a per-pixel known flag.
///
/// Unknown pixels always hold 0 and are never read.
#[derive(Debug, Clone, PartialEq)]
pub struct Panorama {
    image: EquirectImage,
    mask: Mask,
    known_fraction: f64,
}

/// Sidecar metadata stored next to `state.png` / `mask.png`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanoramaMeta {
    pub width: usize,
    pub height: usize,
    pub known_fraction: f64,
}

impl Panorama {
    pub fn new(mut image: EquirectImage, mask: Mask) -> Result<Self> {
        if image.width != mask.width || image.height != mask.height {
            return Err(Error::Dimension(format!(
                "image {}x{} and mask {}x{} differ",
                image.width, image.height, mask.width, mask.height
            )));
        }
        let ch = image.channels;
        for (i, &known) in mask.data.iter().enumerate() {
            if !known {
                image.data[i * ch..(i + 1) * ch].fill(0.0);
            }
        }
        let known_fraction = solid_angle_fraction(&mask);
        Ok(Self {
            image,
            mask,
            known_fraction,
        })
    }

    pub fn empty(width: usize, channels: usize) -> Result<Self> {
        let image = EquirectImage::filled(width, channels, 0.0)?;
        let mask = Mask::new(width, width / 2, false);
        Self::new(image, mask)
    }

    pub fn image(&self) -> &EquirectImage {
        &self.image
    }

    pub fn mask(&self) -> &Mask {
        &self.mask
    }

    pub fn width(&self) -> usize {
        self.image.width
    }

    pub fn height(&self) -> usize {
        self.image.height
    }

    /// Solid-angle weighted share of the sphere that is known.
    pub fn known_fraction(&self) -> f64 {
        self.known_fraction
    }

    pub fn is_complete(&self) -> bool {
        self.mask.all_known()
    }

    pub fn meta(&self) -> PanoramaMeta {
        PanoramaMeta {
            width: self.width(),
            height: self.height(),
            known_fraction: self.known_fraction,
        }
    }

    /// Rounds the image to 8-bit levels, the precision runs are stored at.
    pub fn quantized(&self) -> Panorama {
        Panorama {
            image: EquirectImage::new(self.image.quantized()).expect("same dimensions"),
            mask: self.mask.clone(),
            known_fraction: self.known_fraction,
        }
    }

    pub fn into_parts(self) -> (EquirectImage, Mask) {
        (self.image, self.mask)
    }

    fn same_dims(&self, other: &Panorama) -> Result<()> {
        if self.width() != other.width()
            || self.height() != other.height()
            || self.image.channels != other.image.channels
        {
            return Err(Error::Dimension(format!(
                "panoramas {}x{}x{} and {}x{}x{} differ",
                self.width(),
                self.height(),
                self.image.channels,
                other.width(),
                other.height(),
                other.image.channels
            )));
        }
        Ok(())
    }
}

/// Per-row solid-angle weight of an equirectangular row.
pub fn row_weights(height: usize) -> Vec<f64> {
    (0..height)
        .map(|v| row_lat(v, height).to_radians().cos())
        .collect()
}

/// Weighted area of the `true` pixels, normalized so the full sphere is 1.
///
/// Counts are accumulated per row as integers, so the result only depends
/// on how many pixels each row holds, not on their columns.
pub fn solid_angle_fraction(mask: &Mask) -> f64 {
    let weights = row_weights(mask.height);
    let mut known = 0.0;
    let mut total = 0.0;
    for (v, w) in weights.iter().enumerate() {
        let row = &mask.data[v * mask.width..(v + 1) * mask.width];
        let count = row.iter().filter(|&&k| k).count();
        known += count as f64 * w;
        total += mask.width as f64 * w;
    }
    known / total
}

/// Weighted area of `a && b`, same normalization as [`solid_angle_fraction`].
pub fn intersection_fraction(a: &Mask, b: &Mask) -> f64 {
    let weights = row_weights(a.height);
    let mut known = 0.0;
    let mut total = 0.0;
    for (v, w) in weights.iter().enumerate() {
        let lo = v * a.width;
        let hi = lo + a.width;
        let count = a.data[lo..hi]
            .iter()
            .zip(&b.data[lo..hi])
            .filter(|(&x, &y)| x && y)
            .count();
        known += count as f64 * w;
        total += a.width as f64 * w;
    }
    known / total
}

/// `alpha ⊕ beta`: alpha's pixel where alpha is known, beta's otherwise.
pub fn compose(alpha: &Panorama, beta: &Panorama) -> Result<Panorama> {
    alpha.same_dims(beta)?;
    let ch = alpha.image.channels;
    let mut image = beta.image.clone();
    let mut mask = beta.mask.clone();
    for (i, &known) in alpha.mask.data.iter().enumerate() {
        if known {
            image.data[i * ch..(i + 1) * ch]
                .copy_from_slice(&alpha.image.data[i * ch..(i + 1) * ch]);
            mask.data[i] = true;
        }
    }
    Ok(Panorama {
        known_fraction: solid_angle_fraction(&mask),
        image,
        mask,
    })
}

/// Backprojects a completed view and fills only previously unknown pixels.
pub fn attach_view(state: &Panorama, nfov: &Raster, view: &ViewSpec) -> Result<Panorama> {
    let (image, mask) = backproject_view(nfov, view, state.width())?;
    let generated = Panorama::new(image, mask)?;
    compose(state, &generated)
}

/// First canvas state: the seed view backprojected onto an empty sphere.
pub fn init_from_nfov(x: &Raster, view: &ViewSpec, pano_width: usize) -> Result<Panorama> {
    let (image, mask) = backproject_view(x, view, pano_width)?;
    Panorama::new(image, mask)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pano(width: usize, f: impl Fn(usize, usize) -> Option<f32>) -> Panorama {
        let h = width / 2;
        let mut img = Raster::new(width, h, 1);
        let mut mask = Mask::new(width, h, false);
        for v in 0..h {
            for u in 0..width {
                if let Some(val) = f(u, v) {
                    img.pixel_mut(u, v)[0] = val;
                    mask.set(u, v, true);
                }
            }
        }
        Panorama::new(EquirectImage::new(img).unwrap(), mask).unwrap()
    }

    #[test]
    fn unknown_pixels_are_zeroed() {
        let mut img = EquirectImage::filled(8, 1, 0.7).unwrap();
        img.pixel_mut(0, 0)[0] = 0.3;
        let mut mask = Mask::new(8, 4, false);
        mask.set(0, 0, true);
        let p = Panorama::new(img, mask).unwrap();
        assert_eq!(p.image().pixel(0, 0)[0], 0.3);
        assert_eq!(p.image().pixel(1, 0)[0], 0.0);
    }

    #[test]
    fn fully_known_alpha_wins() {
        let a = pano(8, |u, v| Some((u + v) as f32 / 20.0));
        let b = pano(8, |u, _| if u < 4 { Some(0.9) } else { None });
        assert_eq!(compose(&a, &b).unwrap(), a);
    }

    #[test]
    fn fully_unknown_alpha_yields_beta() {
        let a = Panorama::empty(8, 1).unwrap();
        let b = pano(8, |u, _| if u < 4 { Some(0.9) } else { None });
        assert_eq!(compose(&a, &b).unwrap(), b);
    }

    #[test]
    fn compose_is_idempotent() {
        let a = pano(16, |u, v| {
            if (u * 7 + v * 3) % 5 < 2 {
                Some(u as f32 / 16.0)
            } else {
                None
            }
        });
        assert_eq!(compose(&a, &a).unwrap(), a);
    }

    #[test]
    fn known_fraction_bounds() {
        assert_eq!(Panorama::empty(16, 3).unwrap().known_fraction(), 0.0);
        assert_eq!(pano(16, |_, _| Some(0.1)).known_fraction(), 1.0);
        let half = pano(16, |u, _| if u < 8 { Some(0.1) } else { None });
        assert!((half.known_fraction() - 0.5).abs() < 1e-12);
        // polar rows carry less weight than equatorial ones
        let top = pano(16, |_, v| if v == 0 { Some(0.1) } else { None });
        let mid = pano(16, |_, v| if v == 3 { Some(0.1) } else { None });
        assert!(top.known_fraction() < mid.known_fraction());
    }

    #[test]
    fn mismatched_dimensions() {
        let a = Panorama::empty(16, 1).unwrap();
        let b = Panorama::empty(32, 1).unwrap();
        assert!(matches!(compose(&a, &b), Err(Error::Dimension(_))));
        let c = Panorama::empty(16, 3).unwrap();
        assert!(matches!(compose(&a, &c), Err(Error::Dimension(_))));
    }

    #[test]
    fn attach_inside_known_region_is_noop() {
        let state = pano(64, |_, v| {
            if (8..24).contains(&v) {
                Some(0.25)
            } else {
                None
            }
        });
        let view = ViewSpec::new(30.0, 0.0, 40.0, 16, 16).unwrap();
        let nfov = Raster::filled(16, 16, 1, 0.9);
        assert_eq!(attach_view(&state, &nfov, &view).unwrap(), state);
    }

    #[test]
    fn attach_to_empty_equals_backprojection() {
        let view = ViewSpec::square(10.0, 20.0, 16).unwrap();
        let nfov = Raster::from_fn(16, 16, 1, |x, y, _| (x * 16 + y) as f32 / 256.0);
        let got = attach_view(&Panorama::empty(64, 1).unwrap(), &nfov, &view).unwrap();
        let (img, mask) = backproject_view(&nfov, &view, 64).unwrap();
        assert_eq!(got, Panorama::new(img, mask).unwrap());
    }

    #[test]
    fn init_mask_is_backprojection_coverage() {
        let view = ViewSpec::square(0.0, 0.0, 32).unwrap();
        let x = Raster::filled(32, 32, 3, 0.4);
        let p = init_from_nfov(&x, &view, 128).unwrap();
        let (_, mask) = backproject_view(&x, &view, 128).unwrap();
        assert_eq!(p.mask(), &mask);
        assert!(p.known_fraction() < 0.25);
    }
}
