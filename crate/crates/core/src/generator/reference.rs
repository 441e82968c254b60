use std::time::Instant;

use ndarray::Array1;
use rand::Rng;

use super::nearest::nearest_known;
use super::{Generator, OutpaintRequest, OutpaintResult};
use crate::conditioning::seeded::{order_free_column_sums, rng_for, seeded_matrix};
use crate::error::Result;
use crate::geom::Raster;

/// Blend weights: nearest known pixel, known mean, guidance color, noise.
pub const REFERENCE_WEIGHTS: [f64; 4] = [0.55, 0.3, 0.05, 0.1];

/// Largest per-channel offset of the guidance color from mid gray.
pub const TINT_MAGNITUDE: f64 = 0.05;

const NOISE_CELLS: usize = 4;
const TINT_SEED: u64 = 0x5eed_7147;

/// Deterministic stand-in for a diffusion inpainter.
///
/// Each unknown pixel becomes
/// `0.55 * nearest + 0.3 * mean + 0.05 * (0.5 + tint) + 0.1 * (0.5 + 0.5 * noise)`,
/// clamped to `[0, 1]`. `tint` is a fixed projection of the mean global
/// guidance token squashed into `[-0.05, 0.05]`, and `noise` is bilinear
/// value noise in `[-1, 1]` seeded by the request seed. Known pixels are
/// copied through.
#[derive(Debug, Clone, Copy, Default)]
pub struct ReferenceGenerator;

impl ReferenceGenerator {
    /// Guidance color offset for a bundle's global stream.
    pub fn tint(&self, global: &ndarray::Array2<f64>) -> [f64; 3] {
        let rows = global.nrows().max(1) as f64;
        let mean = Array1::from(order_free_column_sums(global)) / rows;
        let proj = seeded_matrix(TINT_SEED, "reference/tint", 3, global.ncols(), 1.0);
        let t = proj.dot(&mean);
        [0, 1, 2].map(|c| TINT_MAGNITUDE * t[c].tanh())
    }

    /// Smooth noise field in `[-1, 1]`, one value per pixel and channel.
    pub fn noise(&self, seed: u64, width: usize, height: usize, channels: usize) -> Raster {
        let mut rng = rng_for(seed, "reference/noise");
        let lattice: Vec<f64> = (0..(NOISE_CELLS + 1) * (NOISE_CELLS + 1) * channels)
            .map(|_| rng.random_range(-1.0..=1.0))
            .collect();
        let at = |i: usize, j: usize, c: usize| lattice[(j * (NOISE_CELLS + 1) + i) * channels + c];
        Raster::from_fn(width, height, channels, |x, y, c| {
            let gx = (x as f64 + 0.5) / width as f64 * NOISE_CELLS as f64;
            let gy = (y as f64 + 0.5) / height as f64 * NOISE_CELLS as f64;
            let (i, j) = (gx.floor() as usize, gy.floor() as usize);
            let (fx, fy) = (gx - i as f64, gy - j as f64);
            let v = (1.0 - fx) * (1.0 - fy) * at(i, j, c)
                + fx * (1.0 - fy) * at(i + 1, j, c)
                + (1.0 - fx) * fy * at(i, j + 1, c)
                + fx * fy * at(i + 1, j + 1, c);
            v as f32
        })
    }
}

impl Generator for ReferenceGenerator {
    fn id(&self) -> String {
        "reference-v1".into()
    }

    fn outpaint(&self, req: &OutpaintRequest) -> Result<OutpaintResult> {
        let started = Instant::now();
        req.validate()?;
        let src = &req.nfov;
        let mask = &req.nfov_mask;
        let ch = src.channels;
        let nearest = nearest_known(mask).expect("validated: mask has known pixels");

        let mut mean = vec![0.0f64; ch];
        let mut n = 0.0;
        for (i, &k) in mask.data.iter().enumerate() {
            if k {
                for (m, &v) in mean.iter_mut().zip(&src.data[i * ch..(i + 1) * ch]) {
                    *m += v as f64;
                }
                n += 1.0;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);

        let tint = self.tint(&req.bundle.global_stream);
        let noise = self.noise(req.seed, src.width, src.height, ch);
        let [w_near, w_mean, w_tint, w_noise] = REFERENCE_WEIGHTS;

        let mut out = src.clone();
        for (i, &k) in mask.data.iter().enumerate() {
            if k {
                continue;
            }
            let j = nearest[i];
            for c in 0..ch {
                let guide = 0.5 + tint[c.min(2)];
                let noise_color = 0.5 + 0.5 * noise.data[i * ch + c] as f64;
                let v = w_near * src.data[j * ch + c] as f64
                    + w_mean * mean[c]
                    + w_tint * guide
                    + w_noise * noise_color;
                out.data[i * ch + c] = v.clamp(0.0, 1.0) as f32;
            }
        }
        Ok(OutpaintResult {
            nfov: out,
            generator_id: self.id(),
            latency_ms: started.elapsed().as_millis() as u64,
        })
    }
}
