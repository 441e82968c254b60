//! Cross-attention stacks with fixed, seeded projections.
//!
//! Each layer computes `h = q + softmax(q Wq (kv Wk)^T / sqrt(d)) kv Wv`
//! and normalizes every token of `h` to zero mean and unit variance.
//! Query rows are processed independently of each other, so permuting the
//! query tokens permutes the output rows bit for bit.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};

use super::seeded::seeded_matrix;
use crate::error::{Error, Result};

const NORM_EPS: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct AttentionLayer {
    pub wq: Array2<f64>,
    pub wk: Array2<f64>,
    pub wv: Array2<f64>,
}

impl AttentionLayer {
    pub fn seeded(seed: u64, tag: &str, dim: usize) -> Self {
        let scale = (3.0 / dim as f64).sqrt();
        Self {
            wq: seeded_matrix(seed, &format!("{tag}/wq"), dim, dim, scale),
            wk: seeded_matrix(seed, &format!("{tag}/wk"), dim, dim, scale),
            wv: seeded_matrix(seed, &format!("{tag}/wv"), dim, dim, scale),
        }
    }

    pub fn identity(dim: usize) -> Self {
        Self {
            wq: Array2::eye(dim),
            wk: Array2::eye(dim),
            wv: Array2::eye(dim),
        }
    }

    pub fn dim(&self) -> usize {
        self.wq.nrows()
    }
}

/// Output of one attention block before normalization.
#[derive(Debug, Clone)]
pub struct BlockOutput {
    /// `softmax(...) V`, one row per query.
    pub attended: Array2<f64>,
    /// `query + attended`.
    pub residual: Array2<f64>,
    /// Attention weights, `queries x keys`.
    pub weights: Array2<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CrossAttention {
    pub layers: Vec<AttentionLayer>,
}

impl CrossAttention {
    pub fn seeded(seed: u64, tag: &str, dim: usize, layers: usize) -> Self {
        Self {
            layers: (0..layers)
                .map(|l| AttentionLayer::seeded(seed, &format!("{tag}/layer{l}"), dim))
                .collect(),
        }
    }

    /// Runs the stack; returns the final tokens and each layer's weights.
    pub fn forward(
        &self,
        query: &Array2<f64>,
        kv: &Array2<f64>,
    ) -> Result<(Array2<f64>, Vec<Array2<f64>>)> {
        check_inputs(query, kv, self.layers.first().map(|l| l.dim()))?;
        let mut x = query.clone();
        let mut all_weights = Vec::with_capacity(self.layers.len());
        for layer in &self.layers {
            let block = attention_block(layer, &x.view(), &kv.view());
            let mut h = block.residual;
            for mut row in h.rows_mut() {
                normalize_token(row.view_mut());
            }
            x = h;
            all_weights.push(block.weights);
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numeric(
                "attention produced non-finite values".into(),
            ));
        }
        Ok((x, all_weights))
    }
}

fn check_inputs(query: &Array2<f64>, kv: &Array2<f64>, dim: Option<usize>) -> Result<()> {
    if query.iter().chain(kv.iter()).any(|v| !v.is_finite()) {
        return Err(Error::Numeric("attention input contains NaN or Inf".into()));
    }
    if query.ncols() != kv.ncols() {
        return Err(Error::Dimension(format!(
            "query dim {} differs from key/value dim {}",
            query.ncols(),
            kv.ncols()
        )));
    }
    if kv.nrows() == 0 {
        return Err(Error::Dimension("attention needs at least one key".into()));
    }
    if let Some(d) = dim {
        if d != query.ncols() {
            return Err(Error::Dimension(format!(
                "layer dim {d} differs from token dim {}",
                query.ncols()
            )));
        }
    }
    Ok(())
}

/// One scaled dot-product cross-attention block with residual.
pub fn attention_block(
    layer: &AttentionLayer,
    query: &ArrayView2<f64>,
    kv: &ArrayView2<f64>,
) -> BlockOutput {
    let dim = layer.dim();
    let scale = 1.0 / (dim as f64).sqrt();
    let keys = kv.dot(&layer.wk);
    let values = kv.dot(&layer.wv);
    let nq = query.nrows();
    let nk = kv.nrows();
    let mut attended = Array2::zeros((nq, dim));
    let mut weights = Array2::zeros((nq, nk));
    for (i, qrow) in query.rows().into_iter().enumerate() {
        let q = project_row(qrow, &layer.wq);
        let scores: Vec<f64> = keys
            .rows()
            .into_iter()
            .map(|k| dot(q.view(), k) * scale)
            .collect();
        let w = softmax(&scores);
        let mut out = Array1::zeros(dim);
        for (j, &wj) in w.iter().enumerate() {
            out.scaled_add(wj, &values.row(j));
        }
        attended.row_mut(i).assign(&out);
        weights.row_mut(i).assign(&Array1::from(w));
    }
    let residual = query.to_owned() + &attended;
    BlockOutput {
        attended,
        residual,
        weights,
    }
}

fn project_row(row: ArrayView1<f64>, w: &Array2<f64>) -> Array1<f64> {
    let mut out = Array1::zeros(w.ncols());
    for (k, &x) in row.iter().enumerate() {
        out.scaled_add(x, &w.index_axis(Axis(0), k));
    }
    out
}

fn dot(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

pub fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

fn normalize_token(mut row: ndarray::ArrayViewMut1<f64>) {
    let n = row.len() as f64;
    let mean = row.sum() / n;
    let var = row.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let inv = 1.0 / (var + NORM_EPS).sqrt();
    row.mapv_inplace(|v| (v - mean) * inv);
}
