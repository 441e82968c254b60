use crate::canvas::Panorama;
use crate::geom::Raster;

pub const PREVIEW_MAX_WIDTH: usize = 1024;
pub const CHECKER_LIGHT: f32 = 0.8;
pub const CHECKER_DARK: f32 = 0.6;
const CHECKER_CELL: usize = 8;

/// Downsampled RGB preview with unknown areas drawn as a checkerboard.
///
/// The panorama is reduced by the smallest integer factor that brings it to
/// at most [`PREVIEW_MAX_WIDTH`] columns. Each preview pixel averages the
/// known pixels of its block; blocks with none show the checkerboard.
pub fn render_preview(state: &Panorama) -> Raster {
    let w = state.width();
    let h = state.height();
    let f = w.div_ceil(PREVIEW_MAX_WIDTH);
    let (pw, ph) = (w / f, h / f);
    let img = state.image();
    let ch = img.channels;
    let mask = state.mask();
    let mut out = Raster::new(pw, ph, 3);
    for y in 0..ph {
        for x in 0..pw {
            let mut acc = [0.0f32; 3];
            let mut n = 0usize;
            for sy in y * f..(y + 1) * f {
                for sx in x * f..(x + 1) * f {
                    if mask.get(sx, sy) {
                        let p = img.pixel(sx, sy);
                        for c in 0..3 {
                            acc[c] += p[c.min(ch - 1)];
                        }
                        n += 1;
                    }
                }
            }
            let px = out.pixel_mut(x, y);
            if n == 0 {
                let light = (x / CHECKER_CELL + y / CHECKER_CELL).is_multiple_of(2);
                px.fill(if light { CHECKER_LIGHT } else { CHECKER_DARK });
            } else {
                for c in 0..3 {
                    px[c] = acc[c] / n as f32;
                }
            }
        }
    }
    out
}
