use serde::{Deserialize, Serialize};

use super::cubemap::Face;
use super::raster::Raster;
use super::view::{view_pixel_lon_lat, ViewSpec};
use crate::error::Result;

/// Channel layout of a geometry map.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GeometryEncoding {
    /// `(cos lon, sin lon, sin lat, cos lat)`.
    #[default]
    Full,
    /// `(cos lon, sin lat)`.
    Compact,
}

impl GeometryEncoding {
    pub fn channels(self) -> usize {
        match self {
            GeometryEncoding::Full => 4,
            GeometryEncoding::Compact => 2,
        }
    }

    pub fn encode(self, lon_deg: f64, lat_deg: f64) -> [f32; 4] {
        let (sl, cl) = lon_deg.to_radians().sin_cos();
        let (sp, cp) = lat_deg.to_radians().sin_cos();
        match self {
            GeometryEncoding::Full => [cl as f32, sl as f32, sp as f32, cp as f32],
            GeometryEncoding::Compact => [cl as f32, sp as f32, 0.0, 0.0],
        }
    }
}

/// What a geometry map is laid over.
#[derive(Debug, Clone, Copy)]
pub enum GeometryTarget {
    View(ViewSpec),
    Face(Face, usize),
}

/// Per-pixel spherical coordinate encoding, one raster channel per component.
pub fn geometry_map_for(target: GeometryTarget, encoding: GeometryEncoding) -> Result<Raster> {
    let view = match target {
        GeometryTarget::View(v) => {
            v.validate()?;
            v
        }
        GeometryTarget::Face(f, size) => f.view(size)?,
    };
    let ch = encoding.channels();
    let coords = view_pixel_lon_lat(&view);
    let mut out = Raster::new(view.width, view.height, ch);
    for (i, &(lon, lat)) in coords.iter().enumerate() {
        let e = encoding.encode(lon, lat);
        out.data[i * ch..(i + 1) * ch].copy_from_slice(&e[..ch]);
    }
    Ok(out)
}
