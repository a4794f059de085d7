use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use lft_cli::commands::{self, FitOptions, ReproduceOptions};
use lft_cli::service::{self, ServiceConfig};
use lft_cli::{documents, CliError};
use lft_core::executor::DEFAULT_TAU_SCALE;

/// Learn plug insertion from a demonstration and replay it in simulation.
#[derive(Debug, Parser)]
#[command(name = "lft", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Record a scripted demonstration into an archive directory.
    DemoGen {
        /// Scene JSON (defaults to the built-in scene).
        #[arg(long)]
        scene: Option<PathBuf>,
        /// Output archive directory.
        out: PathBuf,
    },
    /// Fit a skill (trajectory primitive and wrench mixture) from an archive.
    Fit(FitArgs),
    /// Run one episode from an offset start pose.
    Reproduce {
        skill: PathBuf,
        #[arg(long)]
        scene: Option<PathBuf>,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        dx: f64,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        dy: f64,
        #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
        dyaw: f64,
        /// Execution duration as a multiple of the demonstration's.
        #[arg(long, default_value_t = DEFAULT_TAU_SCALE)]
        tau_scale: f64,
        /// Output result document.
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Evaluate a skill over a list of initial conditions.
    Evaluate {
        skill: PathBuf,
        #[arg(long)]
        scene: Option<PathBuf>,
        /// JSON array of conditions (defaults to the built-in 10-condition set).
        #[arg(long)]
        conditions: Option<PathBuf>,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Export demo, reference and measured wrench profiles of an episode as CSV.
    ExportProfiles {
        skill: PathBuf,
        result: PathBuf,
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Serve the simulator over websocket for live teleoperation.
    Serve {
        #[arg(long)]
        scene: Option<PathBuf>,
        #[arg(long, default_value = "127.0.0.1:8080")]
        bind: SocketAddr,
        /// Directory receiving recorded archives.
        #[arg(long, default_value = "recordings")]
        out_dir: PathBuf,
    },
}

#[derive(Debug, Args)]
struct FitArgs {
    archive: PathBuf,
    #[arg(long, short)]
    out: PathBuf,
    #[arg(long, default_value_t = FitOptions::default().n_basis)]
    n_basis: usize,
    /// Mixture components.
    #[arg(long, default_value_t = FitOptions::default().k)]
    k: usize,
    /// Choose the component count by BIC over 1..=BIC (overrides --k).
    #[arg(long, value_name = "MAX_K")]
    bic: Option<usize>,
    #[arg(long, default_value_t = FitOptions::default().pose_stream)]
    pose_stream: String,
    /// Optional quaternion stream for an orientation primitive.
    #[arg(long)]
    orientation_stream: Option<String>,
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::DemoGen { scene, out } => {
            let frames = commands::demo_gen(scene.as_deref(), &out)?;
            println!("wrote {} ({frames} frames)", out.display());
        }
        Command::Fit(a) => {
            let opts = FitOptions {
                n_basis: a.n_basis,
                k: a.k,
                bic_max: a.bic,
                pose_stream: a.pose_stream,
                orientation_stream: a.orientation_stream,
            };
            commands::fit(&a.archive, &a.out, &opts)?;
            println!("wrote {}", a.out.display());
        }
        Command::Reproduce {
            skill,
            scene,
            dx,
            dy,
            dyaw,
            tau_scale,
            out,
        } => {
            let opts = ReproduceOptions { dx, dy, dyaw, tau_scale };
            let doc = commands::reproduce(&skill, scene.as_deref(), &opts, &out)?;
            let r = &doc.result;
            println!(
                "success={} failure_reason={} duration={:.3}s peak_force={:.3}N",
                r.success,
                serde_json::to_value(r.failure_reason).map_err(CliError::input)?,
                r.duration,
                r.peak_force
            );
        }
        Command::Evaluate {
            skill,
            scene,
            conditions,
            out,
        } => {
            let doc = commands::evaluate(&skill, scene.as_deref(), conditions.as_deref(), &out)?;
            let r = &doc.report;
            println!("{}/{} successes (rate {})", r.successes, r.episodes.len(), r.success_rate);
        }
        Command::ExportProfiles { skill, result, out } => {
            let rows = commands::export_profiles(&skill, &result, &out)?;
            println!("wrote {} ({rows} rows)", out.display());
        }
        Command::Serve { scene, bind, out_dir } => {
            let scene = documents::read_scene(scene.as_deref())?;
            std::fs::create_dir_all(&out_dir)
                .map_err(|e| CliError::input(format!("cannot create {}: {e}", out_dir.display())))?;
            let rt = tokio::runtime::Runtime::new().map_err(CliError::input)?;
            rt.block_on(service::serve(bind, ServiceConfig::new(scene, out_dir)))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env().unwrap_or_else(|_| "warn".into()),
        )
        .init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
