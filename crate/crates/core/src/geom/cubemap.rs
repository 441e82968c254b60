use serde::{Deserialize, Serialize};

use super::equirect::{column_lon, row_lat, EquirectImage};
use super::raster::{Mask, Raster};
use super::sphere::{dot, lon_lat_to_dir};
use super::view::{project_view, project_view_masked, ViewSpec};
use crate::error::{Error, Result};

/// Cube faces in storage order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Face {
    F,
    L,
    B,
    R,
    U,
    D,
}

impl Face {
    pub const ALL: [Face; 6] = [Face::F, Face::L, Face::B, Face::R, Face::U, Face::D];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn name(self) -> &'static str {
        match self {
            Face::F => "F",
            Face::L => "L",
            Face::B => "B",
            Face::R => "R",
            Face::U => "U",
            Face::D => "D",
        }
    }

    /// `(lon, lat)` of the face center.
    pub fn center(self) -> (f64, f64) {
        match self {
            Face::F => (0.0, 0.0),
            Face::L => (-90.0, 0.0),
            Face::B => (180.0, 0.0),
            Face::R => (90.0, 0.0),
            Face::U => (0.0, 90.0),
            Face::D => (0.0, -90.0),
        }
    }

    /// 90 degree square view covering this face.
    pub fn view(self, size: usize) -> Result<ViewSpec> {
        let (lon, lat) = self.center();
        ViewSpec::new(lon, lat, 90.0, size, size)
    }

    /// Exact `(right, up, forward)` axes; matches [`ViewSpec::basis`] of [`Face::view`].
    fn axes(self) -> ([f64; 3], [f64; 3], [f64; 3]) {
        match self {
            Face::F => ([1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]),
            Face::R => ([0.0, 0.0, -1.0], [0.0, 1.0, 0.0], [1.0, 0.0, 0.0]),
            Face::B => ([-1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, -1.0]),
            Face::L => ([0.0, 0.0, 1.0], [0.0, 1.0, 0.0], [-1.0, 0.0, 0.0]),
            Face::U => ([1.0, 0.0, 0.0], [0.0, 0.0, -1.0], [0.0, 1.0, 0.0]),
            Face::D => ([1.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.0, -1.0, 0.0]),
        }
    }

    /// Face hit by a ray (largest absolute component wins).
    pub fn for_direction(d: [f64; 3]) -> Face {
        let [x, y, z] = d;
        let (ax, ay, az) = (x.abs(), y.abs(), z.abs());
        if ay >= ax && ay >= az {
            if y > 0.0 {
                Face::U
            } else {
                Face::D
            }
        } else if ax >= az {
            if x > 0.0 {
                Face::R
            } else {
                Face::L
            }
        } else if z > 0.0 {
            Face::F
        } else {
            Face::B
        }
    }

    /// Continuous pixel coordinates of a ray on this face.
    fn ray_to_pixel(self, d: [f64; 3], size: usize) -> (f64, f64) {
        let (right, up, fwd) = self.axes();
        let half = size as f64 / 2.0;
        let cz = dot(d, fwd);
        let x = dot(d, right) / cz * half + half - 0.5;
        let y = half - dot(d, up) / cz * half - 0.5;
        (x, y)
    }

    /// Ray through (possibly out-of-range) pixel `(x, y)`.
    fn pixel_to_ray(self, x: f64, y: f64, size: usize) -> [f64; 3] {
        let (right, up, fwd) = self.axes();
        let half = size as f64 / 2.0;
        let px = x + 0.5 - half;
        let py = half - y - 0.5;
        std::array::from_fn(|i| right[i] * px + up[i] * py + fwd[i] * half)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CubemapImage {
    /// Indexed by [`Face::index`].
    pub faces: Vec<Raster>,
    pub face_size: usize,
}

impl CubemapImage {
    pub fn new(faces: Vec<Raster>) -> Result<Self> {
        if faces.len() != 6 {
            return Err(Error::Dimension(format!(
                "cubemap needs 6 faces, got {}",
                faces.len()
            )));
        }
        let size = faces[0].width;
        let ch = faces[0].channels;
        if size < 8 {
            return Err(Error::Dimension(format!("face size {size} is below 8")));
        }
        if faces
            .iter()
            .any(|f| f.width != size || f.height != size || f.channels != ch)
        {
            return Err(Error::Dimension(
                "cubemap faces must be square and share size and channel count".into(),
            ));
        }
        Ok(Self {
            faces,
            face_size: size,
        })
    }

    pub fn face(&self, face: Face) -> &Raster {
        &self.faces[face.index()]
    }

    pub fn channels(&self) -> usize {
        self.faces[0].channels
    }

    /// Nearest-pixel lookup for a ray, used for taps that leave a face.
    fn nearest(&self, d: [f64; 3]) -> (Face, usize, usize) {
        let face = Face::for_direction(d);
        let (x, y) = face.ray_to_pixel(d, self.face_size);
        let m = (self.face_size - 1) as f64;
        (
            face,
            x.round().clamp(0.0, m) as usize,
            y.round().clamp(0.0, m) as usize,
        )
    }

    /// Bilinear sample of a face at continuous coordinates; taps that fall
    /// off the face are fetched from the neighboring face.
    fn sample_face(&self, face: Face, x: f64, y: f64, out: &mut [f32]) {
        let n = self.face_size as i64;
        let x0 = x.floor();
        let y0 = y.floor();
        let fx = x - x0;
        let fy = y - y0;
        let ch = self.channels();
        let mut acc = [0.0f64; 4];
        let taps = [
            (x0 as i64, y0 as i64, (1.0 - fx) * (1.0 - fy)),
            (x0 as i64 + 1, y0 as i64, fx * (1.0 - fy)),
            (x0 as i64, y0 as i64 + 1, (1.0 - fx) * fy),
            (x0 as i64 + 1, y0 as i64 + 1, fx * fy),
        ];
        for (tx, ty, w) in taps {
            if w == 0.0 {
                continue;
            }
            let (f, px, py) = if (0..n).contains(&tx) && (0..n).contains(&ty) {
                (face, tx as usize, ty as usize)
            } else {
                self.nearest(face.pixel_to_ray(tx as f64, ty as f64, self.face_size))
            };
            let p = self.faces[f.index()].pixel(px, py);
            for c in 0..ch {
                acc[c] += w * p[c] as f64;
            }
        }
        for c in 0..ch {
            out[c] = acc[c] as f32;
        }
    }
}

/// Resamples an equirectangular image onto the six cube faces.
pub fn equirect_to_cubemap(img: &EquirectImage, face_size: usize) -> Result<CubemapImage> {
    if face_size < 8 {
        return Err(Error::Dimension(format!(
            "face size {face_size} is below 8"
        )));
    }
    let faces = Face::ALL
        .iter()
        .map(|f| project_view(img, &f.view(face_size)?))
        .collect::<Result<Vec<_>>>()?;
    CubemapImage::new(faces)
}

/// Cube faces of an image together with conservative per-face masks.
pub fn equirect_to_cubemap_masked(
    img: &EquirectImage,
    mask: &Mask,
    face_size: usize,
) -> Result<(CubemapImage, Vec<Mask>)> {
    let mut faces = Vec::with_capacity(6);
    let mut masks = Vec::with_capacity(6);
    for f in Face::ALL {
        let (r, m) = project_view_masked(img, mask, &f.view(face_size)?)?;
        faces.push(r);
        masks.push(m);
    }
    Ok((CubemapImage::new(faces)?, masks))
}

/// Reassembles an equirectangular image of the given width from cube faces.
pub fn cubemap_to_equirect(cube: &CubemapImage, width: usize) -> Result<EquirectImage> {
    if width < 8 || !width.is_multiple_of(2) {
        return Err(Error::Dimension(format!(
            "equirectangular width must be even and at least 8, got {width}"
        )));
    }
    let height = width / 2;
    let ch = cube.channels();
    let mut out = Raster::new(width, height, ch);
    for v in 0..height {
        let lat = row_lat(v, height);
        for u in 0..width {
            let d = lon_lat_to_dir(column_lon(u, width), lat);
            let face = Face::for_direction(d);
            let (x, y) = face.ray_to_pixel(d, cube.face_size);
            let i = out.index(u, v);
            cube.sample_face(face, x, y, &mut out.data[i..i + ch]);
        }
    }
    EquirectImage::new(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn face_axes_agree_with_view_basis() {
        for f in Face::ALL {
            let (r, u, fw) = f.view(16).unwrap().basis();
            let (er, eu, efw) = f.axes();
            for i in 0..3 {
                assert!((r[i] - er[i]).abs() < 1e-12, "{f:?} right");
                assert!((u[i] - eu[i]).abs() < 1e-12, "{f:?} up");
                assert!((fw[i] - efw[i]).abs() < 1e-12, "{f:?} fwd");
            }
        }
    }

    #[test]
    fn face_centers_classify_to_their_face() {
        for f in Face::ALL {
            let (lon, lat) = f.center();
            assert_eq!(Face::for_direction(lon_lat_to_dir(lon, lat)), f);
        }
    }

    #[test]
    fn constant_round_trips() {
        let img = EquirectImage::filled(64, 3, 0.5).unwrap();
        let cube = equirect_to_cubemap(&img, 16).unwrap();
        for f in &cube.faces {
            assert!(f.data.iter().all(|&v| (v - 0.5).abs() < 1e-6));
        }
        let back = cubemap_to_equirect(&cube, 64).unwrap();
        assert!(back.data.iter().all(|&v| (v - 0.5).abs() < 1e-6));
    }

    #[test]
    fn front_center_column_matches_lon_zero() {
        let img =
            EquirectImage::from_lon_lat(64, 1, |lon, _, _| ((lon + 180.0) / 360.0) as f32).unwrap();
        let cube = equirect_to_cubemap(&img, 16).unwrap();
        let mut expect = [0.0f32];
        img.sample_lon_lat(0.0, 0.0, &mut expect);
        let f = cube.face(Face::F);
        // the two columns straddling the center are symmetric about lon 0
        for y in 0..16 {
            let mid = 0.5 * (f.pixel(7, y)[0] + f.pixel(8, y)[0]);
            assert!((mid - expect[0]).abs() < 1e-6, "row {y}: {mid}");
        }
    }

    #[test]
    fn white_front_center_lands_at_origin() {
        let n = 32;
        let mut faces = vec![Raster::new(n, n, 1); 6];
        faces[Face::F.index()].pixel_mut(n / 2, n / 2)[0] = 1.0;
        let cube = CubemapImage::new(faces).unwrap();
        let eq = cubemap_to_equirect(&cube, 128).unwrap();
        let (mut best, mut at) = (0.0, (0, 0));
        for v in 0..64 {
            for u in 0..128 {
                if eq.pixel(u, v)[0] > best {
                    best = eq.pixel(u, v)[0];
                    at = (u, v);
                }
            }
        }
        // lon 0 / lat 0 sits between columns 63,64 and rows 31,32
        assert!(best > 0.0);
        assert!(
            (63..=65).contains(&at.0) && (31..=33).contains(&at.1),
            "{at:?}"
        );
    }

    #[test]
    fn invalid_dimensions() {
        let img = EquirectImage::filled(64, 3, 0.5).unwrap();
        assert!(matches!(
            equirect_to_cubemap(&img, 4),
            Err(Error::Dimension(_))
        ));
        let cube = equirect_to_cubemap(&img, 16).unwrap();
        assert!(matches!(
            cubemap_to_equirect(&cube, 63),
            Err(Error::Dimension(_))
        ));
        let mut bad = cube.faces.clone();
        bad[3] = Raster::new(8, 8, 3);
        assert!(CubemapImage::new(bad).is_err());
    }
}
