//! Sphere coordinates, equirectangular and cubemap rasters, gnomonic views.

mod cubemap;
mod equirect;
mod geometry;
mod raster;
mod sphere;
mod view;

pub use cubemap::{
    cubemap_to_equirect, equirect_to_cubemap, equirect_to_cubemap_masked, CubemapImage, Face,
};
pub use equirect::{
    check_equirect_dims, column_lon, rotate_horizontal, rotate_mask_horizontal, row_lat,
    EquirectImage, SamplePos,
};
pub use geometry::{geometry_map_for, GeometryEncoding, GeometryTarget};
pub use raster::{dequantize, quantize, Mask, Raster};
pub use sphere::{dir_to_lon_lat, lon_lat_to_dir, wrap_lon, SphereCoord};
pub use view::{
    backproject_view, project_view, project_view_masked, sample_clamped, view_footprint,
    view_pixel_lon_lat, view_sample_positions, ViewSpec, DEFAULT_VIEW_FOV, MAX_VIEW_FOV,
};
