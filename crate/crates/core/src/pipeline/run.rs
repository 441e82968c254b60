use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicBool, Ordering};
use std::time::Instant;

use chrono::Utc;

use super::store::{recover, sha256_hex, Transaction};
use super::{
    PromptChange, RunConfig, RunManifest, StepOverrides, StepRecord, StepStatus, INPUT_FILE,
    MANIFEST_FILE, MASK_FILE, STATE_FILE, STEPS_DIR,
};
use crate::canvas::{init_from_nfov, Panorama};
use crate::conditioning::Conditioner;
use crate::error::{Error, Result};
use crate::generator::{self, Generator};
use crate::geom::{equirect_to_cubemap, EquirectImage, Face, Mask, Raster, ViewSpec};
use crate::scheduler::{next_view, plan_traversal, replan_from};

/// Seed for the view at `plan_index`, so equal plans see equal seeds.
pub fn step_seed(base: u64, plan_index: usize) -> u64 {
    let mut z = base ^ (plan_index as u64 + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

fn is_generator_failure(e: &Error) -> bool {
    matches!(
        e,
        Error::Transport { .. }
            | Error::Generator { .. }
            | Error::Protocol(_)
            | Error::Numeric(_)
            | Error::Contract(_)
            | Error::Aborted
    )
}

/// A panorama run backed by a directory.
#[derive(Debug)]
pub struct Run {
    dir: PathBuf,
    manifest: RunManifest,
    state: Panorama,
    conditioner: Conditioner,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExportSummary {
    pub panorama: PathBuf,
    pub faces: Vec<PathBuf>,
    pub manifest: PathBuf,
}

fn input_view(input: &Raster, yaw: f64, pitch: f64, config: &RunConfig) -> Result<ViewSpec> {
    ViewSpec::new(yaw, pitch, config.fov_deg, input.width, input.height)
}

fn initial_state(input: &Raster, view: &ViewSpec, config: &RunConfig) -> Result<Panorama> {
    Ok(init_from_nfov(input, view, config.pano_width)?.quantized())
}

fn encode_state(state: &Panorama) -> Result<(Vec<u8>, Vec<u8>)> {
    Ok((state.image().to_png_bytes()?, state.mask().to_png_bytes()?))
}

impl Run {
    /// Creates a run directory seeded with `input_png` seen at `(yaw, pitch)`.
    pub fn init(
        dir: &Path,
        input_png: &[u8],
        yaw: f64,
        pitch: f64,
        prompt: &str,
        config: RunConfig,
    ) -> Result<Run> {
        let id = uuid::Uuid::new_v4().to_string();
        Self::init_with_id(dir, &id, input_png, yaw, pitch, prompt, config)
    }

    /// [`Run::init`] with a caller-chosen run id.
    #[allow(clippy::too_many_arguments)]
    pub fn init_with_id(
        dir: &Path,
        run_id: &str,
        input_png: &[u8],
        yaw: f64,
        pitch: f64,
        prompt: &str,
        config: RunConfig,
    ) -> Result<Run> {
        config.validate()?;
        if dir.join(MANIFEST_FILE).exists() {
            return Err(Error::Config(format!(
                "{} already holds a run",
                dir.display()
            )));
        }
        let input = Raster::from_png_bytes(input_png)?;
        let view = input_view(&input, yaw, pitch, &config)?;
        let conditioner = Conditioner::new(config.conditioning.clone())?;
        conditioner.text(prompt)?;
        let state = initial_state(&input, &view, &config)?;
        let plan = plan_traversal(
            &config.view_at(yaw, pitch)?,
            config.pano_width,
            config.stride_lon,
            config.stride_lat,
            config.min_overlap,
        )?;

        fs::create_dir_all(dir.join(STEPS_DIR)).map_err(|e| Error::io(dir, e))?;
        let (state_png, mask_png) = encode_state(&state)?;
        let manifest = RunManifest {
            run_id: run_id.to_string(),
            created_at: Utc::now(),
            input_sha256: sha256_hex(input_png),
            initial_view: view,
            plan,
            cursor: 0,
            prompt: prompt.to_string(),
            prompt_history: vec![PromptChange {
                step: 0,
                prompt: prompt.to_string(),
            }],
            steps: Vec::new(),
            known_fraction: state.known_fraction(),
            complete: state.is_complete(),
            state_sha256: sha256_hex(&state_png),
            mask_sha256: sha256_hex(&mask_png),
            config,
        };
        let mut tx = Transaction::new(dir);
        tx.stage(INPUT_FILE, input_png)?;
        tx.stage(STATE_FILE, &state_png)?;
        tx.stage(MASK_FILE, &mask_png)?;
        tx.stage(MANIFEST_FILE, &serde_json::to_vec_pretty(&manifest)?)?;
        tx.commit()?;
        Ok(Run {
            dir: dir.to_path_buf(),
            manifest,
            state,
            conditioner,
        })
    }

    /// Loads a run directory, first completing or discarding any
    /// interrupted commit.
    pub fn open(dir: &Path) -> Result<Run> {
        if !dir.join(MANIFEST_FILE).exists()
            && !dir.join(format!("{MANIFEST_FILE}.pending")).exists()
        {
            return Err(Error::State(format!("{} holds no run", dir.display())));
        }
        recover(dir)?;
        let path = dir.join(MANIFEST_FILE);
        let bytes = fs::read(&path).map_err(|e| Error::io(&path, e))?;
        let manifest: RunManifest = serde_json::from_slice(&bytes)
            .map_err(|e| Error::State(format!("unreadable manifest: {e}")))?;
        let read = |name: &str| {
            let p = dir.join(name);
            fs::read(&p).map_err(|e| Error::io(&p, e))
        };
        let state_png = read(STATE_FILE)?;
        let mask_png = read(MASK_FILE)?;
        if sha256_hex(&state_png) != manifest.state_sha256
            || sha256_hex(&mask_png) != manifest.mask_sha256
        {
            return Err(Error::State(format!(
                "{}: state files do not match the manifest",
                dir.display()
            )));
        }
        let image = EquirectImage::new(Raster::from_png_bytes(&state_png)?)?;
        let state = Panorama::new(image, Mask::from_png_bytes(&mask_png)?)?;
        let conditioner = Conditioner::new(manifest.config.conditioning.clone())?;
        Ok(Run {
            dir: dir.to_path_buf(),
            manifest,
            state,
            conditioner,
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn manifest(&self) -> &RunManifest {
        &self.manifest
    }

    pub fn state(&self) -> &Panorama {
        &self.state
    }

    pub fn config(&self) -> &RunConfig {
        &self.manifest.config
    }

    pub fn is_complete(&self) -> bool {
        self.state.is_complete()
    }

    /// The view the next un-steered step would outpaint.
    pub fn peek_next(&self) -> Result<Option<(usize, ViewSpec)>> {
        next_view(&self.manifest.plan, &self.state, self.manifest.cursor)
    }

    /// Runs one step. Generator failures are recorded with a failed status
    /// and leave the panorama unchanged; invalid overrides are errors and
    /// leave the run untouched.
    pub fn step<G: Generator + ?Sized>(
        &mut self,
        gen: &G,
        overrides: &StepOverrides,
    ) -> Result<StepRecord> {
        if self.is_complete() {
            return Err(Error::State("run is already complete".into()));
        }
        let mut manifest = self.manifest.clone();
        let index = manifest.steps.len() + 1;
        if let Some(p) = &overrides.prompt {
            if *p != manifest.prompt {
                self.conditioner.text(p)?;
                manifest.prompt = p.clone();
                manifest.prompt_history.push(PromptChange {
                    step: index,
                    prompt: p.clone(),
                });
            }
        }
        if let Some((yaw, pitch)) = overrides.view_center()? {
            let view = manifest.config.view_at(yaw, pitch)?;
            manifest.plan = replan_from(&self.state, &view, &manifest.plan, manifest.cursor)?;
            manifest.cursor = 0;
        }
        let (plan_index, view) = next_view(&manifest.plan, &self.state, manifest.cursor)?
            .ok_or_else(|| Error::State("run is already complete".into()))?;
        let seed = overrides
            .seed
            .unwrap_or_else(|| step_seed(manifest.config.seed, plan_index));

        let started = Instant::now();
        let result = generator::step(
            &self.state,
            &view,
            &manifest.prompt,
            seed,
            gen,
            &self.conditioner,
        );
        let mut record = StepRecord {
            index,
            plan_index,
            view,
            prompt_in_force: manifest.prompt.clone(),
            seed,
            generator_id: gen.id(),
            known_fraction_after: self.state.known_fraction(),
            duration_ms: 0,
            status: StepStatus::Ok,
        };
        let mut tx = Transaction::new(&self.dir);
        let next = match result {
            Ok((next, outcome)) => {
                let next = next.quantized();
                let (state_png, mask_png) = encode_state(&next)?;
                tx.stage(STATE_FILE, &state_png)?;
                tx.stage(MASK_FILE, &mask_png)?;
                tx.stage(
                    &format!("{STEPS_DIR}/{index}.png"),
                    &outcome.nfov.to_png_bytes()?,
                )?;
                manifest.state_sha256 = sha256_hex(&state_png);
                manifest.mask_sha256 = sha256_hex(&mask_png);
                manifest.known_fraction = next.known_fraction();
                manifest.complete = next.is_complete();
                manifest.cursor = plan_index + 1;
                record.generator_id = outcome.generator_id;
                record.known_fraction_after = next.known_fraction();
                Some(next)
            }
            Err(e) if is_generator_failure(&e) => {
                tracing::warn!(step = index, error = %e, "generator failed");
                record.status = StepStatus::Failed(e.to_string());
                None
            }
            Err(e) => return Err(e),
        };
        record.duration_ms = started.elapsed().as_millis() as u64;
        manifest.steps.push(record.clone());
        tx.stage(MANIFEST_FILE, &serde_json::to_vec_pretty(&manifest)?)?;
        tx.commit()?;
        self.manifest = manifest;
        if let Some(next) = next {
            self.state = next;
        }
        Ok(record)
    }

    /// Steps until the panorama is complete, `max_steps` attempts were made,
    /// a step fails or `cancel` is raised. Reports every record as it lands.
    pub fn auto<G: Generator + ?Sized>(
        &mut self,
        gen: &G,
        max_steps: Option<usize>,
        cancel: Option<&AtomicBool>,
        mut on_record: impl FnMut(&StepRecord),
    ) -> Result<Vec<StepRecord>> {
        let mut records = Vec::new();
        while !self.is_complete() && max_steps.is_none_or(|m| records.len() < m) {
            if cancel.is_some_and(|c| c.load(Ordering::SeqCst)) {
                return Err(Error::Aborted);
            }
            let rec = self.step(gen, &StepOverrides::default())?;
            on_record(&rec);
            let failed = !rec.status.is_ok();
            records.push(rec);
            if failed {
                break;
            }
        }
        Ok(records)
    }

    /// Writes the equirect, the six cube faces and the manifest to `out`.
    pub fn export(&self, out: &Path) -> Result<ExportSummary> {
        if !self.is_complete() {
            return Err(Error::State(format!(
                "run is incomplete ({:.4} of the sphere known)",
                self.state.known_fraction()
            )));
        }
        let faces_dir = out.join("cubemap");
        fs::create_dir_all(&faces_dir).map_err(|e| Error::io(&faces_dir, e))?;
        let write = |p: PathBuf, bytes: &[u8]| -> Result<PathBuf> {
            fs::write(&p, bytes).map_err(|e| Error::io(&p, e))?;
            Ok(p)
        };
        let panorama = write(
            out.join("panorama.png"),
            &self.state.image().to_png_bytes()?,
        )?;
        let cube = equirect_to_cubemap(self.state.image(), self.state.width() / 4)?;
        let faces = Face::ALL
            .iter()
            .map(|&f| {
                write(
                    faces_dir.join(format!("{}.png", f.name())),
                    &cube.face(f).to_png_bytes()?,
                )
            })
            .collect::<Result<Vec<_>>>()?;
        let manifest = write(
            out.join(MANIFEST_FILE),
            &serde_json::to_vec_pretty(&self.manifest)?,
        )?;
        Ok(ExportSummary {
            panorama,
            faces,
            manifest,
        })
    }

    /// Re-executes this run's recorded steps from its stored input.
    pub fn replay<G: Generator + ?Sized>(&self, gen: &G) -> Result<Panorama> {
        let p = self.dir.join(INPUT_FILE);
        let input = fs::read(&p).map_err(|e| Error::io(&p, e))?;
        replay(&self.manifest, &input, gen)
    }
}

/// Rebuilds the final panorama of `manifest` from its input image.
pub fn replay<G: Generator + ?Sized>(
    manifest: &RunManifest,
    input_png: &[u8],
    gen: &G,
) -> Result<Panorama> {
    if sha256_hex(input_png) != manifest.input_sha256 {
        return Err(Error::State(
            "input image does not match the manifest".into(),
        ));
    }
    let input = Raster::from_png_bytes(input_png)?;
    let conditioner = Conditioner::new(manifest.config.conditioning.clone())?;
    let mut state = initial_state(&input, &manifest.initial_view, &manifest.config)?;
    for rec in manifest.steps.iter().filter(|r| r.status.is_ok()) {
        let (next, _) = generator::step(
            &state,
            &rec.view,
            &rec.prompt_in_force,
            rec.seed,
            gen,
            &conditioner,
        )?;
        state = next.quantized();
    }
    Ok(state)
}
