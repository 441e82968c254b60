//! Run lifecycle: init, stepping, steering, persistence, replay and export.

mod engine;
mod preview;
mod run;
mod store;

pub use engine::EngineGenerator;
pub use preview::{render_preview, CHECKER_DARK, CHECKER_LIGHT, PREVIEW_MAX_WIDTH};
pub use run::{replay, step_seed, ExportSummary, Run};
pub use store::{recover, sha256_hex, RecoveryAction, Transaction, COMMIT_MARKER};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::conditioning::ConditioningConfig;
use crate::error::{Error, Result};
use crate::geom::ViewSpec;
use crate::scheduler::{TraversalPlan, DEFAULT_MIN_OVERLAP, DEFAULT_STRIDE_DEG};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const STATE_FILE: &str = "state.png";
pub const MASK_FILE: &str = "mask.png";
pub const INPUT_FILE: &str = "input.png";
pub const STEPS_DIR: &str = "steps";

/// Environment variable that overrides the generator endpoint.
pub const GENERATOR_URL_ENV: &str = "PANOGEN_GENERATOR_URL";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GeneratorSpec {
    /// Remote endpoint; the built-in reference generator when absent.
    pub endpoint: Option<String>,
    pub timeout_ms: u64,
    pub retries: u32,
    pub backoff_ms: u64,
}

impl Default for GeneratorSpec {
    fn default() -> Self {
        Self {
            endpoint: None,
            timeout_ms: 120_000,
            retries: 3,
            backoff_ms: 250,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub pano_width: usize,
    /// Field of view of the input image and of every planned view.
    pub fov_deg: f64,
    /// Side length of the square planned views.
    pub view_size: usize,
    pub stride_lon: f64,
    pub stride_lat: f64,
    pub min_overlap: f64,
    pub seed: u64,
    pub conditioning: ConditioningConfig,
    pub generator: GeneratorSpec,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            pano_width: 1024,
            fov_deg: 90.0,
            view_size: 256,
            stride_lon: DEFAULT_STRIDE_DEG,
            stride_lat: DEFAULT_STRIDE_DEG,
            min_overlap: DEFAULT_MIN_OVERLAP,
            seed: 0,
            conditioning: ConditioningConfig::default(),
            generator: GeneratorSpec::default(),
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.pano_width < 8 || !self.pano_width.is_multiple_of(2) {
            return Err(Error::Config(format!(
                "panorama width must be even and at least 8, got {}",
                self.pano_width
            )));
        }
        if self.view_size < 8 {
            return Err(Error::Config(format!(
                "view size must be at least 8, got {}",
                self.view_size
            )));
        }
        self.conditioning.validate()?;
        ViewSpec::new(0.0, 0.0, self.fov_deg, self.view_size, self.view_size)
            .map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }

    /// A square planned view centered at `(lon, lat)`.
    pub fn view_at(&self, lon: f64, lat: f64) -> Result<ViewSpec> {
        ViewSpec::new(lon, lat, self.fov_deg, self.view_size, self.view_size)
    }
}

/// Per-step user overrides.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StepOverrides {
    pub prompt: Option<String>,
    pub yaw: Option<f64>,
    pub pitch: Option<f64>,
    pub seed: Option<u64>,
}

impl StepOverrides {
    pub fn view_center(&self) -> Result<Option<(f64, f64)>> {
        match (self.yaw, self.pitch) {
            (Some(y), Some(p)) if y.is_finite() && (-90.0..=90.0).contains(&p) => Ok(Some((y, p))),
            (None, None) => Ok(None),
            (Some(_), Some(p)) => Err(Error::Config(format!(
                "view override needs a finite yaw and a pitch in [-90, 90], got pitch {p}"
            ))),
            _ => Err(Error::Config("yaw and pitch must be given together".into())),
        }
    }
}

/// `"ok"` or `"failed:<reason>"` on the wire.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum StepStatus {
    Ok,
    Failed(String),
}

impl StepStatus {
    pub fn is_ok(&self) -> bool {
        matches!(self, StepStatus::Ok)
    }
}

impl From<StepStatus> for String {
    fn from(s: StepStatus) -> String {
        match s {
            StepStatus::Ok => "ok".into(),
            StepStatus::Failed(r) => format!("failed:{r}"),
        }
    }
}

impl TryFrom<String> for StepStatus {
    type Error = String;

    fn try_from(s: String) -> std::result::Result<Self, String> {
        if s == "ok" {
            Ok(StepStatus::Ok)
        } else if let Some(r) = s.strip_prefix("failed:") {
            Ok(StepStatus::Failed(r.to_string()))
        } else {
            Err(format!("unknown step status {s:?}"))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    /// 1-based and contiguous over all attempts, failed ones included.
    pub index: usize,
    pub plan_index: usize,
    pub view: ViewSpec,
    pub prompt_in_force: String,
    pub seed: u64,
    pub generator_id: String,
    pub known_fraction_after: f64,
    pub duration_ms: u64,
    pub status: StepStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptChange {
    /// Index of the first step that used the prompt; 0 for the initial one.
    pub step: usize,
    pub prompt: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub created_at: DateTime<Utc>,
    pub config: RunConfig,
    pub initial_view: ViewSpec,
    pub input_sha256: String,
    pub plan: TraversalPlan,
    /// Plan position where the next scan for an open view starts.
    pub cursor: usize,
    pub prompt: String,
    pub prompt_history: Vec<PromptChange>,
    pub steps: Vec<StepRecord>,
    pub known_fraction: f64,
    pub complete: bool,
    pub state_sha256: String,
    pub mask_sha256: String,
}

impl RunManifest {
    pub fn ok_steps(&self) -> usize {
        self.steps.iter().filter(|s| s.status.is_ok()).count()
    }
}
