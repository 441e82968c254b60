use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// RNG keyed by a run seed and a purpose tag.
pub fn rng_for(seed: u64, tag: &str) -> ChaCha8Rng {
    let mut h = Sha256::new();
    h.update(seed.to_le_bytes());
    h.update(tag.as_bytes());
    let digest: [u8; 32] = h.finalize().into();
    ChaCha8Rng::from_seed(digest)
}

/// Uniform `[-scale, scale]` matrix, filled row-major.
pub fn seeded_matrix(seed: u64, tag: &str, rows: usize, cols: usize, scale: f64) -> Array2<f64> {
    let mut rng = rng_for(seed, tag);
    Array2::from_shape_simple_fn((rows, cols), || rng.random_range(-1.0..=1.0) * scale)
}

/// Unit-norm vector from a seeded stream.
pub fn seeded_unit_vector(seed: u64, tag: &str, dim: usize) -> Vec<f64> {
    let mut rng = rng_for(seed, tag);
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 1e-6 {
            return v.into_iter().map(|x| x / norm).collect();
        }
    }
}

/// Column sums that do not depend on row order: each column is summed in
/// ascending value order.
pub fn order_free_column_sums(m: &Array2<f64>) -> Vec<f64> {
    m.columns()
        .into_iter()
        .map(|col| {
            let mut vals: Vec<f64> = col.to_vec();
            vals.sort_by(f64::total_cmp);
            vals.iter().sum()
        })
        .collect()
}
