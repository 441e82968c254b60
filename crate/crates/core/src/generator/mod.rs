//! Single-step outpainting behind a pluggable [`Generator`] interface.

mod nearest;
mod reference;
mod remote;
mod step;

pub use nearest::nearest_known;
pub use reference::{ReferenceGenerator, REFERENCE_WEIGHTS, TINT_MAGNITUDE};
pub use remote::{
    OutpaintWireRequest, OutpaintWireResponse, RemoteGenerator, WireGuidance, MAX_BODY_BYTES,
};
pub use step::{enforce_known, step, StepOutcome, PASSTHROUGH_ID};

use crate::conditioning::GuidanceBundle;
use crate::error::{Error, Result};
use crate::geom::{Mask, Raster, ViewSpec};

#[derive(Debug, Clone)]
pub struct OutpaintRequest {
    pub nfov: Raster,
    pub nfov_mask: Mask,
    pub bundle: GuidanceBundle,
    pub prompt: String,
    pub seed: u64,
    pub view: ViewSpec,
}

impl OutpaintRequest {
    /// The mask must mix known and unknown pixels and match the raster.
    pub fn validate(&self) -> Result<()> {
        if self.nfov.width != self.nfov_mask.width || self.nfov.height != self.nfov_mask.height {
            return Err(Error::Contract("view raster and mask sizes differ".into()));
        }
        if self.nfov.width != self.view.width || self.nfov.height != self.view.height {
            return Err(Error::Contract(
                "view raster size does not match the view".into(),
            ));
        }
        if !self.nfov_mask.any_known() {
            return Err(Error::Contract(
                "view has no known pixels to condition on".into(),
            ));
        }
        if self.nfov_mask.all_known() {
            return Err(Error::Contract(
                "view has no unknown pixels to outpaint".into(),
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct OutpaintResult {
    pub nfov: Raster,
    pub generator_id: String,
    pub latency_ms: u64,
}

/// A conditioned outpainting function for one view.
pub trait Generator: Send + Sync {
    fn id(&self) -> String;

    fn outpaint(&self, req: &OutpaintRequest) -> Result<OutpaintResult>;
}

impl<G: Generator + ?Sized> Generator for &G {
    fn id(&self) -> String {
        (**self).id()
    }

    fn outpaint(&self, req: &OutpaintRequest) -> Result<OutpaintResult> {
        (**self).outpaint(req)
    }
}

impl<G: Generator + ?Sized> Generator for Box<G> {
    fn id(&self) -> String {
        (**self).id()
    }

    fn outpaint(&self, req: &OutpaintRequest) -> Result<OutpaintResult> {
        (**self).outpaint(req)
    }
}

impl<G: Generator + ?Sized> Generator for std::sync::Arc<G> {
    fn id(&self) -> String {
        (**self).id()
    }

    fn outpaint(&self, req: &OutpaintRequest) -> Result<OutpaintResult> {
        (**self).outpaint(req)
    }
}
