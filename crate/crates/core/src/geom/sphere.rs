use serde::{Deserialize, Serialize};

/// A point on the unit sphere in degrees.
///
/// Longitude wraps into `[-180, 180)`, latitude is clamped into `[-90, 90]`.
/// Every longitude at `lat = ±90` denotes the same pole.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SphereCoord {
    pub lon: f64,
    pub lat: f64,
}

impl SphereCoord {
    pub fn new(lon: f64, lat: f64) -> Self {
        Self {
            lon: wrap_lon(lon),
            lat: lat.clamp(-90.0, 90.0),
        }
    }

    /// Unit direction: +Z at (0, 0), +X at (90, 0), +Y at the north pole.
    pub fn direction(&self) -> [f64; 3] {
        lon_lat_to_dir(self.lon, self.lat)
    }

    pub fn from_direction(d: [f64; 3]) -> Self {
        let (lon, lat) = dir_to_lon_lat(d);
        Self::new(lon, lat)
    }
}

pub fn wrap_lon(lon: f64) -> f64 {
    let w = (lon + 180.0).rem_euclid(360.0) - 180.0;
    // rem_euclid can round up to exactly 360 for tiny negative inputs
    if w >= 180.0 {
        w - 360.0
    } else {
        w
    }
}

pub fn lon_lat_to_dir(lon_deg: f64, lat_deg: f64) -> [f64; 3] {
    let (sl, cl) = lon_deg.to_radians().sin_cos();
    let (sp, cp) = lat_deg.to_radians().sin_cos();
    [cp * sl, sp, cp * cl]
}

pub fn dir_to_lon_lat(d: [f64; 3]) -> (f64, f64) {
    let lon = d[0].atan2(d[2]).to_degrees();
    let lat = d[1].atan2(d[0].hypot(d[2])).to_degrees();
    (lon, lat)
}

pub(crate) fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn longitude_wraps_into_half_open_range() {
        assert_eq!(SphereCoord::new(180.0, 0.0).lon, -180.0);
        assert_eq!(SphereCoord::new(-180.0, 0.0).lon, -180.0);
        assert_eq!(SphereCoord::new(270.0, 0.0).lon, -90.0);
        assert_eq!(SphereCoord::new(-450.0, 0.0).lon, -90.0);
        assert_eq!(SphereCoord::new(0.0, 0.0).lon, 0.0);
        assert_eq!(SphereCoord::new(10.0, 120.0).lat, 90.0);
        assert_eq!(SphereCoord::new(10.0, -95.0).lat, -90.0);
    }

    #[test]
    fn axis_convention() {
        let z = SphereCoord::new(0.0, 0.0).direction();
        let x = SphereCoord::new(90.0, 0.0).direction();
        let y = SphereCoord::new(33.0, 90.0).direction();
        assert!((z[2] - 1.0).abs() < 1e-12);
        assert!((x[0] - 1.0).abs() < 1e-12);
        assert!((y[1] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn direction_round_trip() {
        for &(lon, lat) in &[(0.0, 0.0), (-170.0, 45.0), (95.5, -60.25), (179.0, 10.0)] {
            let c = SphereCoord::from_direction(SphereCoord::new(lon, lat).direction());
            assert!((c.lon - lon).abs() < 1e-9 && (c.lat - lat).abs() < 1e-9);
        }
    }
}
