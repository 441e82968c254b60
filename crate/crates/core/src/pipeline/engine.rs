use std::sync::atomic::Ordering;
use std::time::Duration;

use super::GeneratorSpec;
use crate::error::Result;
use crate::generator::{
    Generator, OutpaintRequest, OutpaintResult, ReferenceGenerator, RemoteGenerator,
};

/// The generator a run is configured with.
#[derive(Debug, Clone)]
pub enum EngineGenerator {
    Reference(ReferenceGenerator),
    Remote(RemoteGenerator),
}

impl EngineGenerator {
    /// `endpoint_override` (typically from the environment) wins over the configured endpoint.
    pub fn from_spec(spec: &GeneratorSpec, endpoint_override: Option<&str>) -> Self {
        match endpoint_override.or(spec.endpoint.as_deref()) {
            Some(url) if !url.is_empty() => EngineGenerator::Remote(
                RemoteGenerator::new(url)
                    .with_timeout(Duration::from_millis(spec.timeout_ms))
                    .with_retries(spec.retries, Duration::from_millis(spec.backoff_ms)),
            ),
            _ => EngineGenerator::Reference(ReferenceGenerator),
        }
    }

    /// Aborts in-flight remote calls; a no-op for the reference generator.
    pub fn cancel(&self) {
        if let EngineGenerator::Remote(r) = self {
            r.cancel_handle().store(true, Ordering::SeqCst);
        }
    }
}

impl Generator for EngineGenerator {
    fn id(&self) -> String {
        match self {
            EngineGenerator::Reference(g) => g.id(),
            EngineGenerator::Remote(g) => g.id(),
        }
    }

    fn outpaint(&self, req: &OutpaintRequest) -> Result<OutpaintResult> {
        match self {
            EngineGenerator::Reference(g) => g.outpaint(req),
            EngineGenerator::Remote(g) => g.outpaint(req),
        }
    }
}
