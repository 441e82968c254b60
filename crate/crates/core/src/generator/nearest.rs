//! Exact nearest-known-pixel lookup via a separable Euclidean feature
//! transform (lower envelope of parabolas per row).

use crate::geom::Mask;

/// For every pixel, the flat index of a nearest known pixel in Euclidean
/// distance, or `None` when the mask has no known pixel.
pub fn nearest_known(mask: &Mask) -> Option<Vec<usize>> {
    if !mask.any_known() {
        return None;
    }
    let (w, h) = (mask.width, mask.height);
    const FAR: i64 = i64::MAX / 4;

    // column pass: nearest known row in the same column
    let mut col_row = vec![usize::MAX; w * h];
    let mut col_d2 = vec![FAR; w * h];
    for x in 0..w {
        let mut last: Option<usize> = None;
        for y in 0..h {
            if mask.get(x, y) {
                last = Some(y);
            }
            if let Some(ly) = last {
                col_row[y * w + x] = ly;
                col_d2[y * w + x] = ((y - ly) * (y - ly)) as i64;
            }
        }
        last = None;
        for y in (0..h).rev() {
            if mask.get(x, y) {
                last = Some(y);
            }
            if let Some(ly) = last {
                let d = ((ly - y) * (ly - y)) as i64;
                if d < col_d2[y * w + x] {
                    col_d2[y * w + x] = d;
                    col_row[y * w + x] = ly;
                }
            }
        }
    }

    // row pass over parabolas x -> (x - q)^2 + g(q)
    let mut out = vec![0usize; w * h];
    let mut v = vec![0usize; w];
    let mut z = vec![0f64; w + 1];
    for y in 0..h {
        let g = |q: usize| col_d2[y * w + q];
        let candidates: Vec<usize> = (0..w).filter(|&q| g(q) < FAR).collect();
        let mut k = 0usize;
        v[0] = candidates[0];
        z[0] = f64::NEG_INFINITY;
        z[1] = f64::INFINITY;
        for &q in &candidates[1..] {
            // z[0] is -inf, so k never underflows
            let s = loop {
                let p = v[k];
                let s = ((g(q) + (q * q) as i64) - (g(p) + (p * p) as i64)) as f64
                    / (2.0 * (q as f64 - p as f64));
                if s <= z[k] {
                    k -= 1;
                } else {
                    break s;
                }
            };
            k += 1;
            v[k] = q;
            z[k] = s;
            z[k + 1] = f64::INFINITY;
        }
        let mut k = 0;
        for x in 0..w {
            while z[k + 1] < x as f64 {
                k += 1;
            }
            let q = v[k];
            out[y * w + x] = col_row[y * w + q] * w + q;
        }
    }
    Some(out)
}
