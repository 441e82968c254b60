use ndarray::{Array1, Array2};

use super::seeded::{seeded_matrix, seeded_unit_vector};
use super::ConditioningConfig;
use crate::canvas::Panorama;
use crate::error::{Error, Result};
use crate::geom::{equirect_to_cubemap_masked, Face, Mask, Raster};

const GRAY_LEVELS: f64 = 65535.0;

/// One embedding per cube face of the current panorama, rows ordered
/// F, L, B, R, U, D.
#[derive(Debug, Clone, PartialEq)]
pub struct OmniVisualGuidance {
    pub faces: Array2<f64>,
}

impl OmniVisualGuidance {
    pub fn face(&self, face: Face) -> ndarray::ArrayView1<'_, f64> {
        self.faces.row(face.index())
    }
}

/// Quarter-turn orbit id of every grid cell, plus the orbit count.
///
/// Features are pooled over these orbits, so a face and its in-plane
/// quarter turns encode identically.
fn cell_orbits(grid: usize) -> (Vec<usize>, usize) {
    let mut id = vec![usize::MAX; grid * grid];
    let mut next = 0;
    for y in 0..grid {
        for x in 0..grid {
            if id[y * grid + x] != usize::MAX {
                continue;
            }
            let (mut cx, mut cy) = (x, y);
            for _ in 0..4 {
                id[cy * grid + cx] = next;
                (cx, cy) = (grid - 1 - cy, cx);
            }
            next += 1;
        }
    }
    (id, next)
}

/// Integer gray and known-pixel sums per orbit. Integer accumulation keeps
/// the sums independent of visiting order.
fn face_orbit_sums(
    face: &Raster,
    mask: &Mask,
    grid: usize,
    orbits: &[usize],
    n_orbits: usize,
) -> (Vec<u64>, Vec<u64>) {
    let n = face.width;
    let mut gray = vec![0u64; n_orbits];
    let mut known = vec![0u64; n_orbits];
    for y in 0..n {
        for x in 0..n {
            if !mask.get(x, y) {
                continue;
            }
            let cell = (y * grid / n) * grid + x * grid / n;
            let p = face.pixel(x, y);
            let g = p.iter().map(|&v| v as f64).sum::<f64>() / p.len() as f64;
            let o = orbits[cell];
            gray[o] += (g.clamp(0.0, 1.0) * GRAY_LEVELS).round() as u64;
            known[o] += 1;
        }
    }
    (gray, known)
}

/// Stub omni-visual encoder: per-face 8x8 gray and known-fraction grids,
/// pooled over quarter-turn orbits and projected by a fixed seeded matrix.
pub fn encode_omni(state: &Panorama, cfg: &ConditioningConfig) -> Result<OmniVisualGuidance> {
    let n = cfg.face_size;
    let grid = cfg.grid;
    if grid == 0 || !n.is_multiple_of(grid) || !grid.is_multiple_of(2) {
        return Err(Error::Config(format!(
            "face size {n} must be a multiple of an even grid {grid}"
        )));
    }
    let (cube, masks) = equirect_to_cubemap_masked(state.image(), state.mask(), n)?;
    let (orbits, n_orbits) = cell_orbits(grid);
    let pixels_per_orbit = (n / grid) * (n / grid) * 4;
    let proj = seeded_matrix(
        cfg.seed,
        "omni/proj",
        cfg.dim,
        2 * n_orbits,
        1.0 / (2.0 * n_orbits as f64).sqrt(),
    );
    let bias = Array1::from(seeded_unit_vector(cfg.seed, "omni/bias", cfg.dim)) * 0.1;

    let mut faces = Array2::zeros((6, cfg.dim));
    for f in Face::ALL {
        let (gray, known) =
            face_orbit_sums(cube.face(f), &masks[f.index()], grid, &orbits, n_orbits);
        let mut feat = Array1::zeros(2 * n_orbits);
        for o in 0..n_orbits {
            feat[o] = gray[o] as f64 / (pixels_per_orbit as f64 * GRAY_LEVELS);
            feat[n_orbits + o] = known[o] as f64 / pixels_per_orbit as f64;
        }
        let v = proj.dot(&feat) + &bias;
        faces.row_mut(f.index()).assign(&v);
    }
    Ok(OmniVisualGuidance { faces })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geom::{rotate_horizontal, rotate_mask_horizontal, EquirectImage};

    fn cfg() -> ConditioningConfig {
        ConditioningConfig::default()
    }

    fn textured(width: usize) -> Panorama {
        let img = EquirectImage::from_lon_lat(width, 3, |lon, lat, c| {
            let (l, p) = (lon.to_radians(), lat.to_radians());
            (0.5 + 0.3 * (2.0 * l + c as f64).sin() * p.cos() + 0.1 * (3.0 * p).sin()) as f32
        })
        .unwrap();
        let mask = Mask::from_fn(width, width / 2, |u, v| (u / 5 + v / 3) % 4 != 0);
        Panorama::new(img, mask).unwrap()
    }

    #[test]
    fn orbit_ids_cover_grid() {
        let (ids, n) = cell_orbits(8);
        assert_eq!(n, 16);
        for o in 0..n {
            assert_eq!(ids.iter().filter(|&&i| i == o).count(), 4);
        }
    }

    #[test]
    fn unknown_panorama_gives_identical_faces() {
        let g = encode_omni(&Panorama::empty(64, 3).unwrap(), &cfg()).unwrap();
        for f in 1..6 {
            assert_eq!(g.faces.row(0), g.faces.row(f));
        }
        assert!(g.faces.row(0).iter().any(|&v| v != 0.0));
    }

    #[test]
    fn quarter_turn_permutes_side_faces_exactly() {
        let p = textured(128);
        let (img, mask) = p.clone().into_parts();
        let rotated = Panorama::new(
            rotate_horizontal(&img, 90.0),
            rotate_mask_horizontal(&mask, 90.0),
        )
        .unwrap();
        let a = encode_omni(&p, &cfg()).unwrap();
        let b = encode_omni(&rotated, &cfg()).unwrap();
        // out(lon) = in(lon + 90): the rotated F face is the original R face
        assert_eq!(b.face(Face::F), a.face(Face::R));
        assert_eq!(b.face(Face::R), a.face(Face::B));
        assert_eq!(b.face(Face::B), a.face(Face::L));
        assert_eq!(b.face(Face::L), a.face(Face::F));
        assert_eq!(b.face(Face::U), a.face(Face::U));
        assert_eq!(b.face(Face::D), a.face(Face::D));
    }

    #[test]
    fn vectors_are_finite_and_nonzero() {
        let g = encode_omni(&textured(64), &cfg()).unwrap();
        for row in g.faces.rows() {
            assert!(row.iter().all(|v| v.is_finite()));
            assert!(row.dot(&row) > 0.0);
        }
    }
}
