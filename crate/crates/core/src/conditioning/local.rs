use ndarray::{Array1, Array2};

use super::seeded::seeded_matrix;
use super::ConditioningConfig;
use crate::error::{Error, Result};
use crate::geom::{geometry_map_for, Face, GeometryTarget, Mask, Raster, ViewSpec};

/// View-level tokens: one per patch of the `grid x grid` split of the view,
/// plus geometry tokens for the view patches and for the six faces.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalGuidance {
    pub nfov_tokens: Array2<f64>,
    /// Encoded geometry of the view, aligned with `nfov_tokens`.
    pub geometry_tokens: Array2<f64>,
    /// Encoded geometry of the cube faces, aligned with the omni rows.
    pub face_geometry_tokens: Array2<f64>,
}

fn patch_bounds(len: usize, grid: usize, i: usize) -> (usize, usize) {
    (
        i * len / grid,
        ((i + 1) * len / grid).max(i * len / grid + 1),
    )
}

/// Mean of the first `k` channels over a rectangle.
fn rect_mean(r: &Raster, xs: (usize, usize), ys: (usize, usize), k: usize) -> [f64; 4] {
    let mut acc = [0.0; 4];
    let mut n = 0.0;
    for y in ys.0..ys.1 {
        for x in xs.0..xs.1 {
            let p = r.pixel(x, y);
            for c in 0..k.min(r.channels) {
                acc[c] += p[c] as f64;
            }
            n += 1.0;
        }
    }
    acc.map(|a| a / n)
}

fn geometry_encoder(cfg: &ConditioningConfig) -> Array2<f64> {
    seeded_matrix(cfg.seed, "geometry/proj", cfg.dim, 4, 0.5)
}

pub fn encode_local(
    nfov: &Raster,
    nfov_mask: &Mask,
    view: &ViewSpec,
    cfg: &ConditioningConfig,
) -> Result<LocalGuidance> {
    if nfov.width != view.width || nfov.height != view.height {
        return Err(Error::Dimension(
            "view raster size does not match the view".into(),
        ));
    }
    if nfov_mask.width != nfov.width || nfov_mask.height != nfov.height {
        return Err(Error::Dimension(
            "view mask does not match its raster".into(),
        ));
    }
    let g = cfg.grid;
    let tokens = g * g;
    let e_nfov = seeded_matrix(cfg.seed, "nfov/proj", cfg.dim, 4, 0.5);
    let pos = seeded_matrix(cfg.seed, "nfov/pos", tokens, cfg.dim, 0.1);
    let e_geo = geometry_encoder(cfg);
    let geo_map = geometry_map_for(GeometryTarget::View(*view), cfg.geometry_encoding)?;
    let ch = nfov.channels.min(3);

    let mut nfov_tokens = Array2::zeros((tokens, cfg.dim));
    let mut geometry_tokens = Array2::zeros((tokens, cfg.dim));
    for py in 0..g {
        for px in 0..g {
            let t = py * g + px;
            let xs = patch_bounds(nfov.width, g, px);
            let ys = patch_bounds(nfov.height, g, py);
            let mut color = [0.0f64; 3];
            let mut known = 0usize;
            let mut count = 0usize;
            for y in ys.0..ys.1 {
                for x in xs.0..xs.1 {
                    count += 1;
                    if nfov_mask.get(x, y) {
                        known += 1;
                        for (c, v) in nfov.pixel(x, y)[..ch].iter().enumerate() {
                            color[c] += *v as f64;
                        }
                    }
                }
            }
            let denom = known.max(1) as f64;
            let feat = Array1::from(vec![
                color[0] / denom,
                color[1] / denom,
                color[2] / denom,
                known as f64 / count as f64,
            ]);
            nfov_tokens
                .row_mut(t)
                .assign(&(e_nfov.dot(&feat) + pos.row(t)));
            let geo = Array1::from(rect_mean(&geo_map, xs, ys, geo_map.channels).to_vec());
            geometry_tokens.row_mut(t).assign(&e_geo.dot(&geo));
        }
    }

    let mut face_geometry_tokens = Array2::zeros((6, cfg.dim));
    for f in Face::ALL {
        let m = geometry_map_for(
            GeometryTarget::Face(f, cfg.face_size),
            cfg.geometry_encoding,
        )?;
        let geo = Array1::from(rect_mean(&m, (0, m.width), (0, m.height), m.channels).to_vec());
        face_geometry_tokens
            .row_mut(f.index())
            .assign(&e_geo.dot(&geo));
    }

    Ok(LocalGuidance {
        nfov_tokens,
        geometry_tokens,
        face_geometry_tokens,
    })
}
