//! C ABI for driving panorama runs.
//!
//! Every fallible function returns a [`PanogenStatus`]. On failure the
//! message is available from [`panogen_last_error`] on the same thread.
//! Runs are opaque [`PanogenRun`] handles released with [`panogen_run_free`].

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;

use panogen::pipeline::{EngineGenerator, Run, RunConfig, StepOverrides, GENERATOR_URL_ENV};
use panogen::Error;

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PanogenStatus {
    Ok = 0,
    /// A null pointer or a string that is not UTF-8.
    InvalidArgument = 1,
    /// Bad configuration, geometry or steering request.
    Config = 2,
    /// The generator failed; the run state is unchanged.
    Generator = 3,
    /// Run state, storage or I/O problem.
    State = 4,
    /// A Rust panic was caught at the boundary.
    Panic = 5,
}

/// Opaque run handle.
pub struct PanogenRun {
    run: Run,
    generator: EngineGenerator,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let s = CString::new(msg.into().replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(s));
}

fn status_of(e: &Error) -> PanogenStatus {
    match e.exit_code() {
        2 => PanogenStatus::Config,
        3 => PanogenStatus::Generator,
        _ => PanogenStatus::State,
    }
}

struct Invalid(&'static str);

enum Failure {
    Invalid(&'static str),
    Engine(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Engine(e)
    }
}

impl From<Invalid> for Failure {
    fn from(i: Invalid) -> Self {
        Failure::Invalid(i.0)
    }
}

fn guard(f: impl FnOnce() -> Result<(), Failure>) -> PanogenStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => PanogenStatus::Ok,
        Ok(Err(Failure::Invalid(what))) => {
            set_error(format!("invalid argument: {what}"));
            PanogenStatus::InvalidArgument
        }
        Ok(Err(Failure::Engine(e))) => {
            set_error(e.to_string());
            status_of(&e)
        }
        Err(_) => {
            set_error("panic inside panogen");
            PanogenStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &'static str) -> Result<&'a str, Invalid> {
    if p.is_null() {
        return Err(Invalid(what));
    }
    CStr::from_ptr(p).to_str().map_err(|_| Invalid(what))
}

unsafe fn opt_str_arg<'a>(
    p: *const c_char,
    what: &'static str,
) -> Result<Option<&'a str>, Invalid> {
    if p.is_null() {
        Ok(None)
    } else {
        str_arg(p, what).map(Some)
    }
}

unsafe fn handle<'a>(h: *mut PanogenRun) -> Result<&'a mut PanogenRun, Invalid> {
    h.as_mut().ok_or(Invalid("run handle"))
}

fn wrap(run: Run) -> *mut PanogenRun {
    let url = std::env::var(GENERATOR_URL_ENV)
        .ok()
        .filter(|u| !u.is_empty());
    let generator = EngineGenerator::from_spec(&run.config().generator, url.as_deref());
    Box::into_raw(Box::new(PanogenRun { run, generator }))
}

/// Message of the last failed call on this thread, or NULL. The pointer
/// stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn panogen_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Creates a run in `dir` from the PNG at `input_png`.
///
/// `config_json` may be NULL for defaults; `fov_deg` and `pano_width`
/// override its fields when positive.
///
/// # Safety
/// String arguments must be NULL or valid NUL-terminated strings and `out`
/// must point to writable storage for one handle.
#[no_mangle]
pub unsafe extern "C" fn panogen_run_init(
    dir: *const c_char,
    input_png: *const c_char,
    yaw_deg: f64,
    pitch_deg: f64,
    fov_deg: f64,
    pano_width: u32,
    prompt: *const c_char,
    config_json: *const c_char,
    out: *mut *mut PanogenRun,
) -> PanogenStatus {
    guard(|| {
        if out.is_null() {
            return Err(Invalid("out").into());
        }
        let dir = PathBuf::from(str_arg(dir, "dir")?);
        let input = PathBuf::from(str_arg(input_png, "input_png")?);
        let prompt = opt_str_arg(prompt, "prompt")?.unwrap_or("");
        let mut config: RunConfig = match opt_str_arg(config_json, "config_json")? {
            Some(j) => serde_json::from_str(j).map_err(|e| Error::Config(e.to_string()))?,
            None => RunConfig::default(),
        };
        if fov_deg > 0.0 {
            config.fov_deg = fov_deg;
        }
        if pano_width > 0 {
            config.pano_width = pano_width as usize;
        }
        let bytes = std::fs::read(&input)
            .map_err(|e| Error::Config(format!("{}: {e}", input.display())))?;
        let run = Run::init(&dir, &bytes, yaw_deg, pitch_deg, prompt, config)?;
        *out = wrap(run);
        Ok(())
    })
}

/// Opens an existing run directory, recovering an interrupted step.
///
/// # Safety
/// `dir` must be a valid NUL-terminated string and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn panogen_run_open(
    dir: *const c_char,
    out: *mut *mut PanogenRun,
) -> PanogenStatus {
    guard(|| {
        if out.is_null() {
            return Err(Invalid("out").into());
        }
        let run = Run::open(&PathBuf::from(str_arg(dir, "dir")?))?;
        *out = wrap(run);
        Ok(())
    })
}

/// Runs one step. `prompt` may be NULL to keep the current prompt. When
/// `steer` is true the step outpaints the view at `(yaw_deg, pitch_deg)`.
/// A failed generator call returns `Generator` and leaves the panorama
/// unchanged.
///
/// # Safety
/// `run` must be a live handle; `prompt` NULL or a valid string.
#[no_mangle]
pub unsafe extern "C" fn panogen_run_step(
    run: *mut PanogenRun,
    prompt: *const c_char,
    steer: bool,
    yaw_deg: f64,
    pitch_deg: f64,
) -> PanogenStatus {
    guard(|| {
        let h = handle(run)?;
        let overrides = StepOverrides {
            prompt: opt_str_arg(prompt, "prompt")?.map(String::from),
            yaw: steer.then_some(yaw_deg),
            pitch: steer.then_some(pitch_deg),
            seed: None,
        };
        let rec = h.run.step(&h.generator, &overrides)?;
        if !rec.status.is_ok() {
            return Err(Error::Generator {
                status: 0,
                body: String::from(rec.status),
            }
            .into());
        }
        Ok(())
    })
}

/// Steps until complete, or at most `max_steps` times when nonzero.
/// Writes the number of attempted steps to `steps_taken` if non-NULL.
///
/// # Safety
/// `run` must be a live handle; `steps_taken` NULL or writable.
#[no_mangle]
pub unsafe extern "C" fn panogen_run_auto(
    run: *mut PanogenRun,
    max_steps: u32,
    steps_taken: *mut u32,
) -> PanogenStatus {
    guard(|| {
        let h = handle(run)?;
        let budget = (max_steps > 0).then_some(max_steps as usize);
        let recs = h.run.auto(&h.generator, budget, None, |_| {})?;
        if !steps_taken.is_null() {
            *steps_taken = recs.len() as u32;
        }
        if let Some(r) = recs.last().filter(|r| !r.status.is_ok()) {
            return Err(Error::Generator {
                status: 0,
                body: String::from(r.status.clone()),
            }
            .into());
        }
        Ok(())
    })
}

/// Solid-angle weighted known share of the sphere, in `[0, 1]`.
///
/// # Safety
/// `run` must be a live handle and `out` writable.
#[no_mangle]
pub unsafe extern "C" fn panogen_run_known_fraction(
    run: *const PanogenRun,
    out: *mut f64,
) -> PanogenStatus {
    guard(|| {
        let h = run.as_ref().ok_or(Invalid("run handle"))?;
        if out.is_null() {
            return Err(Invalid("out").into());
        }
        *out = h.run.state().known_fraction();
        Ok(())
    })
}

/// Writes the panorama, cube faces and manifest of a complete run.
///
/// # Safety
/// `run` must be a live handle and `out_dir` a valid string.
#[no_mangle]
pub unsafe extern "C" fn panogen_run_export(
    run: *const PanogenRun,
    out_dir: *const c_char,
) -> PanogenStatus {
    guard(|| {
        let h = run.as_ref().ok_or(Invalid("run handle"))?;
        h.run.export(&PathBuf::from(str_arg(out_dir, "out_dir")?))?;
        Ok(())
    })
}

/// The run manifest as JSON. Free the result with [`panogen_string_free`].
/// Returns NULL on failure.
///
/// # Safety
/// `run` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn panogen_run_manifest_json(run: *const PanogenRun) -> *mut c_char {
    let mut out = ptr::null_mut();
    guard(|| {
        let h = run.as_ref().ok_or(Invalid("run handle"))?;
        let json = serde_json::to_string(h.run.manifest()).map_err(Error::from)?;
        out = CString::new(json)
            .map_err(|_| Invalid("manifest"))?
            .into_raw();
        Ok(())
    });
    out
}

/// # Safety
/// `s` must be NULL or a string returned by this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn panogen_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// # Safety
/// `run` must be NULL or a handle from this library, not yet freed.
#[no_mangle]
pub unsafe extern "C" fn panogen_run_free(run: *mut PanogenRun) {
    if !run.is_null() {
        drop(Box::from_raw(run));
    }
}
