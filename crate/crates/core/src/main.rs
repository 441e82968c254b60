use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;
use std::sync::Arc;

use clap::{Parser, Subcommand};

use panogen::pipeline::{
    EngineGenerator, Run, RunConfig, StepOverrides, StepRecord, GENERATOR_URL_ENV,
};
use panogen::service::AppState;
use panogen::{Error, Result};

#[derive(Parser)]
#[command(
    name = "panogen",
    version,
    about = "Autoregressive 360-degree panorama outpainting"
)]
struct Cli {
    /// Remote generator endpoint; overrides the one stored in the run.
    #[arg(long, global = true, env = GENERATOR_URL_ENV)]
    generator_url: Option<String>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Create a run from one perspective image.
    Init {
        #[arg(long)]
        input: PathBuf,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        yaw: f64,
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        pitch: f64,
        #[arg(long, default_value_t = 90.0)]
        fov: f64,
        #[arg(long, default_value_t = 1024)]
        pano_width: usize,
        #[arg(long, default_value = "")]
        prompt: String,
        #[arg(long)]
        out: PathBuf,
        /// JSON file with further run settings; flags above take precedence.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        view_size: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Outpaint the next view, optionally steered.
    Step {
        dir: PathBuf,
        #[arg(long)]
        prompt: Option<String>,
        #[arg(long, requires = "pitch", allow_hyphen_values = true)]
        yaw: Option<f64>,
        #[arg(long, requires = "yaw", allow_hyphen_values = true)]
        pitch: Option<f64>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run several steps, or all remaining ones.
    Auto {
        dir: PathBuf,
        #[arg(long, default_value = "all")]
        steps: StepBudget,
    },
    /// Write the finished panorama, its cube faces and the manifest.
    Export {
        dir: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-execute the recorded steps and compare with the stored state.
    Replay { dir: PathBuf },
    /// Serve the HTTP API.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long, default_value = "runs")]
        data: PathBuf,
        #[arg(long, default_value = "127.0.0.1")]
        host: String,
    },
}

#[derive(Clone, Copy, Debug)]
struct StepBudget(Option<usize>);

impl FromStr for StepBudget {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        if s == "all" {
            return Ok(StepBudget(None));
        }
        s.parse()
            .map(|n| StepBudget(Some(n)))
            .map_err(|_| format!("expected a step count or \"all\", got {s:?}"))
    }
}

fn generator_for(run: &Run, url: Option<&str>) -> EngineGenerator {
    EngineGenerator::from_spec(&run.config().generator, url)
}

fn print_record(rec: &StepRecord) -> Result<()> {
    println!("{}", serde_json::to_string(rec)?);
    Ok(())
}

fn failed_step(rec: &StepRecord) -> Error {
    Error::Generator {
        status: 0,
        body: format!(
            "step {} failed: {}",
            rec.index,
            String::from(rec.status.clone())
        ),
    }
}

fn read_config(path: Option<&Path>) -> Result<RunConfig> {
    match path {
        None => Ok(RunConfig::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)
                .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?;
            serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", p.display())))
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let url = cli.generator_url.as_deref().filter(|u| !u.is_empty());
    match cli.command {
        Command::Init {
            input,
            yaw,
            pitch,
            fov,
            pano_width,
            prompt,
            out,
            config,
            view_size,
            seed,
        } => {
            let mut cfg = read_config(config.as_deref())?;
            cfg.fov_deg = fov;
            cfg.pano_width = pano_width;
            if let Some(v) = view_size {
                cfg.view_size = v;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(u) = url {
                cfg.generator.endpoint = Some(u.to_string());
            }
            let bytes = std::fs::read(&input)
                .map_err(|e| Error::Config(format!("{}: {e}", input.display())))?;
            let run = Run::init(&out, &bytes, yaw, pitch, &prompt, cfg)?;
            let m = run.manifest();
            println!(
                "{}",
                serde_json::json!({
                    "run_id": m.run_id,
                    "dir": out,
                    "plan_len": m.plan.len(),
                    "known_fraction": m.known_fraction,
                })
            );
        }
        Command::Step {
            dir,
            prompt,
            yaw,
            pitch,
            seed,
        } => {
            let mut run = Run::open(&dir)?;
            let gen = generator_for(&run, url);
            let rec = run.step(
                &gen,
                &StepOverrides {
                    prompt,
                    yaw,
                    pitch,
                    seed,
                },
            )?;
            print_record(&rec)?;
            if !rec.status.is_ok() {
                return Err(failed_step(&rec));
            }
        }
        Command::Auto { dir, steps } => {
            let mut run = Run::open(&dir)?;
            let gen = generator_for(&run, url);
            let mut printed = Ok(());
            let recs = run.auto(&gen, steps.0, None, |r| {
                if printed.is_ok() {
                    printed = print_record(r);
                }
            })?;
            printed?;
            if let Some(rec) = recs.last().filter(|r| !r.status.is_ok()) {
                return Err(failed_step(rec));
            }
        }
        Command::Export { dir, out } => {
            let run = Run::open(&dir)?;
            let summary = run.export(&out)?;
            println!("{}", summary.panorama.display());
        }
        Command::Replay { dir } => {
            let run = Run::open(&dir)?;
            let replayed = run.replay(&generator_for(&run, url))?;
            if &replayed != run.state() {
                return Err(Error::State(
                    "replay does not reproduce the stored panorama".into(),
                ));
            }
            println!(
                "replay matches {} recorded steps",
                run.manifest().ok_steps()
            );
        }
        Command::Serve { port, data, host } => {
            let addr: SocketAddr = format!("{host}:{port}")
                .parse()
                .map_err(|e| Error::Config(format!("bad listen address: {e}")))?;
            let app = Arc::new(AppState::load(&data, url.map(String::from))?);
            let rt = tokio::runtime::Runtime::new().map_err(|e| Error::io("runtime", e))?;
            rt.block_on(panogen::service::serve(addr, app))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("warn")),
        )
        .init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
