use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine;
use ndarray::{Array2, Axis};
use serde::{Deserialize, Serialize};

use super::attention::CrossAttention;
use super::local::{encode_local, LocalGuidance};
use super::omni::{encode_omni, OmniVisualGuidance};
use super::text::{encode_text, TextGuidance};
use super::{ConditioningConfig, ConditioningFlags};
use crate::canvas::Panorama;
use crate::error::{Error, Result};
use crate::geom::{Mask, Raster, ViewSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct GuidanceBundle {
    pub global_stream: Array2<f64>,
    /// Absent when the local stream is switched off.
    pub local_stream: Option<Array2<f64>>,
    pub flags: ConditioningFlags,
}

impl GuidanceBundle {
    pub fn is_finite(&self) -> bool {
        self.global_stream.iter().all(|v| v.is_finite())
            && self
                .local_stream
                .as_ref()
                .is_none_or(|l| l.iter().all(|v| v.is_finite()))
    }
}

/// Query = omni face tokens, key/value = text tokens.
pub fn fuse_global(
    text: &TextGuidance,
    omni: &OmniVisualGuidance,
    attention: &CrossAttention,
) -> Result<Array2<f64>> {
    let (out, _) = attention.forward(&omni.faces, &text.embedding)?;
    Ok(out)
}

/// Query = view tokens + view geometry, key/value = omni face tokens + face
/// geometry. With `geometry` off the geometry tokens are zero.
pub fn fuse_local(
    local: &LocalGuidance,
    omni: &OmniVisualGuidance,
    attention: &CrossAttention,
    geometry: bool,
) -> Result<Array2<f64>> {
    let (query, kv) = if geometry {
        (
            &local.nfov_tokens + &local.geometry_tokens,
            &omni.faces + &local.face_geometry_tokens,
        )
    } else {
        (local.nfov_tokens.clone(), omni.faces.clone())
    };
    let (out, _) = attention.forward(&query, &kv)?;
    Ok(out)
}

/// Builds guidance bundles with attention weights fixed at construction.
#[derive(Debug, Clone)]
pub struct Conditioner {
    pub config: ConditioningConfig,
    global: CrossAttention,
    local: CrossAttention,
}

impl Conditioner {
    pub fn new(config: ConditioningConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            global: CrossAttention::seeded(config.seed, "global", config.dim, config.layers),
            local: CrossAttention::seeded(config.seed, "local", config.dim, config.layers),
            config,
        })
    }

    pub fn global_attention(&self) -> &CrossAttention {
        &self.global
    }

    pub fn local_attention(&self) -> &CrossAttention {
        &self.local
    }

    pub fn text(&self, prompt: &str) -> Result<TextGuidance> {
        encode_text(prompt, self.config.dim, self.config.seed)
    }

    pub fn build(
        &self,
        prompt: &str,
        state: &Panorama,
        nfov: &Raster,
        nfov_mask: &Mask,
        view: &ViewSpec,
    ) -> Result<GuidanceBundle> {
        let flags = self.config.flags;
        let text = self.text(prompt)?;
        let omni = encode_omni(state, &self.config)?;
        let global_stream = if flags.global {
            fuse_global(&text, &omni, &self.global)?
        } else {
            text.embedding.clone()
        };
        let local_stream = if flags.local {
            let local = encode_local(nfov, nfov_mask, view, &self.config)?;
            Some(fuse_local(&local, &omni, &self.local, flags.geometry)?)
        } else {
            None
        };
        let bundle = GuidanceBundle {
            global_stream,
            local_stream,
            flags,
        };
        if !bundle.is_finite() {
            return Err(Error::Numeric("guidance bundle is not finite".into()));
        }
        Ok(bundle)
    }
}

/// Row-major float32 little-endian tensor, base64 encoded, with its shape.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TensorPayload {
    pub data: String,
    pub shape: Vec<usize>,
}

impl TensorPayload {
    pub fn encode(m: &Array2<f64>) -> Self {
        let mut bytes = Vec::with_capacity(m.len() * 4);
        for row in m.axis_iter(Axis(0)) {
            for &v in row {
                bytes.extend_from_slice(&(v as f32).to_le_bytes());
            }
        }
        Self {
            data: B64.encode(bytes),
            shape: vec![m.nrows(), m.ncols()],
        }
    }

    pub fn decode(&self) -> Result<Array2<f64>> {
        let bytes = B64
            .decode(&self.data)
            .map_err(|e| Error::Protocol(format!("bad base64 tensor: {e}")))?;
        let [rows, cols] = self.shape[..] else {
            return Err(Error::Protocol(format!(
                "expected a 2-d shape, got {:?}",
                self.shape
            )));
        };
        if bytes.len() != rows * cols * 4 {
            return Err(Error::Protocol(format!(
                "tensor of {} bytes does not match shape {rows}x{cols}",
                bytes.len()
            )));
        }
        let vals = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
            .collect();
        Array2::from_shape_vec((rows, cols), vals).map_err(|e| Error::Protocol(e.to_string()))
    }
}
