use ndarray::Array2;

use super::seeded::seeded_unit_vector;
use crate::error::{Error, Result};

pub const MAX_PROMPT_CHARS: usize = 4096;

/// Prompt plus its token embeddings, one row per token.
#[derive(Debug, Clone, PartialEq)]
pub struct TextGuidance {
    pub prompt: String,
    pub embedding: Array2<f64>,
}

impl TextGuidance {
    pub fn tokens(&self) -> usize {
        self.embedding.nrows()
    }

    pub fn is_blank(&self) -> bool {
        self.prompt.split_whitespace().next().is_none()
    }
}

/// Source of text embeddings. The built-in stub hashes tokens; a real
/// encoder service can be plugged in behind the same trait.
pub trait TextEncoder: Send + Sync {
    fn encode(&self, prompt: &str) -> Result<TextGuidance>;
}

/// Whitespace tokenizer mapping each token to a hashed unit vector.
#[derive(Debug, Clone, Copy)]
pub struct HashedTextEncoder {
    pub dim: usize,
    pub seed: u64,
}

impl TextEncoder for HashedTextEncoder {
    fn encode(&self, prompt: &str) -> Result<TextGuidance> {
        encode_text(prompt, self.dim, self.seed)
    }
}

pub fn encode_text(prompt: &str, dim: usize, seed: u64) -> Result<TextGuidance> {
    if prompt.chars().count() > MAX_PROMPT_CHARS {
        return Err(Error::Config(format!(
            "prompt exceeds {MAX_PROMPT_CHARS} characters"
        )));
    }
    let tokens: Vec<&str> = prompt.split_whitespace().collect();
    let embedding = if tokens.is_empty() {
        // blank prompt: a single zero token
        Array2::zeros((1, dim))
    } else {
        let mut m = Array2::zeros((tokens.len(), dim));
        for (i, tok) in tokens.iter().enumerate() {
            let v = seeded_unit_vector(seed, &format!("text-token:{tok}"), dim);
            m.row_mut(i).assign(&ndarray::Array1::from(v));
        }
        m
    };
    Ok(TextGuidance {
        prompt: prompt.to_string(),
        embedding,
    })
}
