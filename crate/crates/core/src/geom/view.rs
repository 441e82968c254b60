//! Gnomonic (tangent-plane) views of the sphere.
//!
//! A view is a perspective camera at the sphere center looking at
//! `center`, with `fov_deg` spanning the raster width. Image-plane
//! coordinates put pixel centers at half-integer offsets from the
//! principal point, `x` to the east and `y` downward.
//!
//! Longitude is handled in equirectangular column space: the view center
//! column is split into an integer part and a fraction, and every ray is
//! computed relative to a camera at longitude zero. Views whose centers
//! differ by a whole number of columns therefore sample with bit-identical
//! weights, which keeps the whole pipeline equivariant under
//! [`rotate_horizontal`](super::rotate_horizontal).

use serde::{Deserialize, Serialize};

use super::equirect::{check_equirect_dims, row_lat, EquirectImage, SamplePos};
use super::raster::{Mask, Raster};
use super::sphere::{wrap_lon, SphereCoord};
use crate::error::{Error, Result};

pub const MAX_VIEW_FOV: f64 = 120.0;
pub const DEFAULT_VIEW_FOV: f64 = 90.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ViewSpec {
    pub center: SphereCoord,
    pub fov_deg: f64,
    pub width: usize,
    pub height: usize,
}

impl ViewSpec {
    pub fn new(lon: f64, lat: f64, fov_deg: f64, width: usize, height: usize) -> Result<Self> {
        let v = Self {
            center: SphereCoord::new(lon, lat),
            fov_deg,
            width,
            height,
        };
        v.validate()?;
        Ok(v)
    }

    /// Square view with the default 90 degree field of view.
    pub fn square(lon: f64, lat: f64, size: usize) -> Result<Self> {
        Self::new(lon, lat, DEFAULT_VIEW_FOV, size, size)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fov_deg > 0.0 && self.fov_deg < 180.0) {
            return Err(Error::Geometry(format!(
                "gnomonic projection needs 0 < fov < 180, got {}",
                self.fov_deg
            )));
        }
        if self.fov_deg > MAX_VIEW_FOV {
            return Err(Error::Geometry(format!(
                "view fov {} exceeds the {MAX_VIEW_FOV} degree limit",
                self.fov_deg
            )));
        }
        if self.width < 8 || self.height < 8 {
            return Err(Error::Geometry(format!(
                "view raster must be at least 8x8, got {}x{}",
                self.width, self.height
            )));
        }
        if !self.center.lon.is_finite() || !self.center.lat.is_finite() {
            return Err(Error::Geometry("view center is not finite".into()));
        }
        Ok(())
    }

    pub fn with_center(&self, lon: f64, lat: f64) -> Self {
        Self {
            center: SphereCoord::new(lon, lat),
            ..*self
        }
    }

    /// Focal length in pixels.
    pub fn focal(&self) -> f64 {
        self.width as f64 / 2.0 / (self.fov_deg.to_radians() / 2.0).tan()
    }

    /// Camera basis `(right, up, forward)` in world coordinates.
    pub fn basis(&self) -> ([f64; 3], [f64; 3], [f64; 3]) {
        let (sl, cl) = self.center.lon.to_radians().sin_cos();
        let (sp, cp) = self.center.lat.to_radians().sin_cos();
        let fwd = [cp * sl, sp, cp * cl];
        let right = [cl, 0.0, -sl];
        let up = [-sp * sl, cp, -sp * cl];
        (right, up, fwd)
    }

    fn frame(&self, pano_width: usize) -> Frame {
        let (s0, c0) = self.center.lat.to_radians().sin_cos();
        let cpos = self.center.lon * pano_width as f64 / 360.0;
        let k = cpos.floor();
        Frame {
            sin0: s0,
            cos0: c0,
            focal: self.focal(),
            half_w: self.width as f64 / 2.0,
            half_h: self.height as f64 / 2.0,
            col: k as i64,
            frac: cpos - k,
            lat0: self.center.lat,
            half_diag_deg: (self.width as f64 / 2.0)
                .hypot(self.height as f64 / 2.0)
                .atan2(self.focal())
                .to_degrees(),
        }
    }

    fn is_pole_square(&self, pano_width: usize) -> bool {
        self.center.lat.abs() == 90.0
            && self.width == self.height
            && self.width.is_multiple_of(2)
            && pano_width.is_multiple_of(4)
    }
}

struct Frame {
    sin0: f64,
    cos0: f64,
    focal: f64,
    half_w: f64,
    half_h: f64,
    col: i64,
    frac: f64,
    lat0: f64,
    half_diag_deg: f64,
}

impl Frame {
    /// Rows farther in latitude than the frustum's half diagonal cannot hit it.
    fn row_may_hit(&self, lat: f64) -> bool {
        (lat - self.lat0).abs() <= self.half_diag_deg + 1e-6
    }

    /// Longitude offset from the view center and latitude of pixel `(x, y)`.
    fn pixel_rel_lon_lat(&self, x: usize, y: usize) -> (f64, f64) {
        let px = x as f64 + 0.5 - self.half_w;
        let py = self.half_h - y as f64 - 0.5;
        let dx = px;
        let dy = py * self.cos0 + self.focal * self.sin0;
        let dz = -py * self.sin0 + self.focal * self.cos0;
        let dlon = dx.atan2(dz).to_degrees();
        let lat = dy.atan2(dx.hypot(dz)).to_degrees();
        (dlon, lat)
    }

    fn pixel_pos(&self, x: usize, y: usize, pano_w: usize, pano_h: usize) -> SamplePos {
        let (dlon, lat) = self.pixel_rel_lon_lat(x, y);
        SamplePos {
            col: self.col,
            local: self.frac + dlon * pano_w as f64 / 360.0 + (pano_w as f64 / 2.0 - 0.5),
            row: (90.0 - lat) / 180.0 * pano_h as f64 - 0.5,
        }
    }

    /// Camera-space ray of equirect pixel `(u, v)`.
    fn pano_pixel_ray(&self, u: usize, v: usize, pano_w: usize, pano_h: usize) -> [f64; 3] {
        let w = pano_w as i64;
        let mut m = (u as i64 - self.col - w / 2).rem_euclid(w);
        if m >= w / 2 {
            m -= w;
        }
        let dlon = (m as f64 + 0.5 - self.frac) * 360.0 / pano_w as f64;
        let lat = row_lat(v, pano_h);
        let (sl, cl) = dlon.to_radians().sin_cos();
        let (sp, cp) = lat.to_radians().sin_cos();
        let (dx, dy, dz) = (cp * sl, sp, cp * cl);
        [
            dx,
            dy * self.cos0 - dz * self.sin0,
            dy * self.sin0 + dz * self.cos0,
        ]
    }

    /// Raster coordinates of a camera-space ray if it lies in the frustum.
    fn ray_to_raster(&self, r: [f64; 3]) -> Option<(f64, f64)> {
        let [cx, cy, cz] = r;
        if cz <= 0.0 {
            return None;
        }
        if cx.abs() * self.focal > self.half_w * cz || cy.abs() * self.focal > self.half_h * cz {
            return None;
        }
        let x = cx / cz * self.focal + self.half_w - 0.5;
        let y = self.half_h - cy / cz * self.focal - 0.5;
        Some((x, y))
    }
}

/// Equirect sample positions of every view pixel, row-major.
pub fn view_sample_positions(view: &ViewSpec, pano_w: usize, pano_h: usize) -> Vec<SamplePos> {
    let frame = view.frame(pano_w);
    let (w, h) = (view.width, view.height);
    if !view.is_pole_square(pano_w) {
        let mut out = Vec::with_capacity(w * h);
        for y in 0..h {
            for x in 0..w {
                out.push(frame.pixel_pos(x, y, pano_w, pano_h));
            }
        }
        return out;
    }

    // Pole-centered square views: a quarter turn of the raster about its
    // center is a quarter turn in longitude. Only one quadrant is computed
    // and the rest reuse its fractional positions so the sampled raster
    // rotates exactly under whole-quarter panorama rotations.
    let n = w;
    let quarter = pano_w as i64 / 4;
    let step = if view.center.lat > 0.0 {
        -quarter
    } else {
        quarter
    };
    let mut out = vec![
        SamplePos {
            col: 0,
            local: 0.0,
            row: 0.0
        };
        n * n
    ];
    for y in 0..n / 2 {
        for x in 0..n / 2 {
            let base = frame.pixel_pos(x, y, pano_w, pano_h);
            let (mut px, mut py) = (x, y);
            for q in 0..4i64 {
                out[py * n + px] = SamplePos {
                    col: base.col + q * step,
                    ..base
                };
                (px, py) = (n - 1 - py, px);
            }
        }
    }
    out
}

/// Absolute `(lon, lat)` in degrees of every view pixel center, row-major.
pub fn view_pixel_lon_lat(view: &ViewSpec) -> Vec<(f64, f64)> {
    let frame = view.frame(360);
    let mut out = Vec::with_capacity(view.width * view.height);
    for y in 0..view.height {
        for x in 0..view.width {
            let (dlon, lat) = frame.pixel_rel_lon_lat(x, y);
            out.push((wrap_lon(view.center.lon + dlon), lat));
        }
    }
    out
}

/// Samples a gnomonic view out of an equirectangular image.
pub fn project_view(img: &EquirectImage, view: &ViewSpec) -> Result<Raster> {
    view.validate()?;
    let positions = view_sample_positions(view, img.width, img.height);
    let mut out = Raster::new(view.width, view.height, img.channels);
    for (i, pos) in positions.iter().enumerate() {
        let c = img.channels;
        img.sample(*pos, &mut out.data[i * c..(i + 1) * c]);
    }
    Ok(out)
}

/// Samples a view together with its conservative known mask.
pub fn project_view_masked(
    img: &EquirectImage,
    mask: &Mask,
    view: &ViewSpec,
) -> Result<(Raster, Mask)> {
    if mask.width != img.width || mask.height != img.height {
        return Err(Error::Dimension("image and mask sizes differ".into()));
    }
    view.validate()?;
    let positions = view_sample_positions(view, img.width, img.height);
    let c = img.channels;
    let mut out = Raster::new(view.width, view.height, c);
    let mut out_mask = Mask::new(view.width, view.height, false);
    for (i, pos) in positions.iter().enumerate() {
        if pos.sample_mask(mask) {
            img.sample(*pos, &mut out.data[i * c..(i + 1) * c]);
            out_mask.data[i] = true;
        }
    }
    Ok((out, out_mask))
}

/// Equirect pixels whose rays fall inside the view frustum.
pub fn view_footprint(view: &ViewSpec, pano_w: usize) -> Result<Mask> {
    view.validate()?;
    let pano_h = pano_w / 2;
    check_equirect_dims(pano_w, pano_h)?;
    let frame = view.frame(pano_w);
    let mut mask = Mask::new(pano_w, pano_h, false);
    for v in 0..pano_h {
        if !frame.row_may_hit(row_lat(v, pano_h)) {
            continue;
        }
        for u in 0..pano_w {
            let ray = frame.pano_pixel_ray(u, v, pano_w, pano_h);
            if frame.ray_to_raster(ray).is_some() {
                mask.set(u, v, true);
            }
        }
    }
    Ok(mask)
}

/// Maps a view raster back onto the sphere. Pixels outside the frustum
/// come back unknown with value 0.
///
/// A view narrower than the panorama pixel pitch can miss every pixel
/// center; that is reported as a geometry error rather than an empty mask.
pub fn backproject_view(
    nfov: &Raster,
    view: &ViewSpec,
    pano_width: usize,
) -> Result<(EquirectImage, Mask)> {
    view.validate()?;
    if nfov.width != view.width || nfov.height != view.height {
        return Err(Error::Dimension(format!(
            "raster {}x{} does not match view {}x{}",
            nfov.width, nfov.height, view.width, view.height
        )));
    }
    let pano_h = pano_width / 2;
    check_equirect_dims(pano_width, pano_h)?;
    let frame = view.frame(pano_width);
    let c = nfov.channels;
    let mut img = Raster::new(pano_width, pano_h, c);
    let mut mask = Mask::new(pano_width, pano_h, false);
    for v in 0..pano_h {
        if !frame.row_may_hit(row_lat(v, pano_h)) {
            continue;
        }
        for u in 0..pano_width {
            let ray = frame.pano_pixel_ray(u, v, pano_width, pano_h);
            if let Some((x, y)) = frame.ray_to_raster(ray) {
                let i = img.index(u, v);
                sample_clamped(nfov, x, y, &mut img.data[i..i + c]);
                mask.set(u, v, true);
            }
        }
    }
    if !mask.any_known() {
        return Err(Error::Geometry(format!(
            "view at ({}, {}) with fov {} covers no pixel of a {pano_width}-wide panorama",
            view.center.lon, view.center.lat, view.fov_deg
        )));
    }
    Ok((EquirectImage::new(img)?, mask))
}

/// Bilinear sample with clamp-to-edge addressing.
pub fn sample_clamped(r: &Raster, x: f64, y: f64, out: &mut [f32]) {
    let x = x.clamp(0.0, (r.width - 1) as f64);
    let y = y.clamp(0.0, (r.height - 1) as f64);
    let x0 = x.floor() as usize;
    let y0 = y.floor() as usize;
    let x1 = (x0 + 1).min(r.width - 1);
    let y1 = (y0 + 1).min(r.height - 1);
    let fx = x - x0 as f64;
    let fy = y - y0 as f64;
    for (c, o) in out.iter_mut().enumerate().take(r.channels) {
        let p = |xx: usize, yy: usize| r.data[(yy * r.width + xx) * r.channels + c] as f64;
        let v = (1.0 - fx) * (1.0 - fy) * p(x0, y0)
            + fx * (1.0 - fy) * p(x1, y0)
            + (1.0 - fx) * fy * p(x0, y1)
            + fx * fy * p(x1, y1);
        *o = v as f32;
    }
}
