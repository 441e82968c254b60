//! Guidance construction: text, omni-visual, view and geometry conditions
//! fused into a global and a local stream by cross-attention.
//!
//! The encoders are deterministic seeded stand-ins; what the engine relies
//! on is their shapes, determinism and stream wiring.

mod attention;
mod bundle;
mod local;
mod omni;
pub mod seeded;
mod text;

pub use attention::{attention_block, softmax, AttentionLayer, BlockOutput, CrossAttention};
pub use bundle::{fuse_global, fuse_local, Conditioner, GuidanceBundle, TensorPayload};
pub use local::{encode_local, LocalGuidance};
pub use omni::{encode_omni, OmniVisualGuidance};
pub use text::{encode_text, HashedTextEncoder, TextEncoder, TextGuidance, MAX_PROMPT_CHARS};

use serde::{Deserialize, Serialize};

use crate::geom::GeometryEncoding;

/// Which conditioning streams are wired in. Turning one off reproduces the
/// corresponding ablation: the global stream falls back to the raw text
/// embedding, the local stream is dropped, or geometry tokens are zeroed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConditioningFlags {
    pub global: bool,
    pub local: bool,
    pub geometry: bool,
}

impl Default for ConditioningFlags {
    fn default() -> Self {
        Self {
            global: true,
            local: true,
            geometry: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConditioningConfig {
    pub dim: usize,
    pub grid: usize,
    pub layers: usize,
    pub face_size: usize,
    pub seed: u64,
    pub geometry_encoding: GeometryEncoding,
    pub flags: ConditioningFlags,
}

impl Default for ConditioningConfig {
    fn default() -> Self {
        Self {
            dim: 64,
            grid: 8,
            layers: 2,
            face_size: 32,
            seed: 0,
            geometry_encoding: GeometryEncoding::Full,
            flags: ConditioningFlags::default(),
        }
    }
}

impl ConditioningConfig {
    pub fn validate(&self) -> crate::Result<()> {
        if self.dim == 0 || self.layers == 0 {
            return Err(crate::Error::Config(
                "dim and layers must be positive".into(),
            ));
        }
        if self.grid == 0
            || !self.grid.is_multiple_of(2)
            || !self.face_size.is_multiple_of(self.grid)
        {
            return Err(crate::Error::Config(format!(
                "face size {} must be a multiple of an even grid {}",
                self.face_size, self.grid
            )));
        }
        Ok(())
    }
}
