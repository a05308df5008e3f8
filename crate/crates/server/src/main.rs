use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Parser, Subcommand};
use fakewatch::capture::Scenario;
use fakewatch::scoring::ScorerSpec;
use fakewatch::service::{ManagerConfig, SessionManager};
use fakewatch_server::batch::{emit, evaluate_dir, score_bundle_report};
use fakewatch_server::{router, AppState};
use log::info;

#[derive(Parser)]
#[command(name = "fakewatch", version, about = "Score a face on screen for manipulation, segment by segment")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the local session API.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8787")]
        addr: SocketAddr,
        /// Directory for summary exports; export is disabled without it.
        #[arg(long)]
        export_dir: Option<PathBuf>,
        /// Sessions allowed to monitor at once.
        #[arg(long, default_value_t = 1)]
        max_monitoring: usize,
    },
    /// Score a recorded bundle and write the timeline and summary.
    ScoreBundle {
        #[arg(long)]
        bundle: PathBuf,
        /// Model file, or `reference`.
        #[arg(long, default_value = "reference")]
        scorer: ScorerSpec,
        #[arg(long, default_value_t = 30)]
        stride: usize,
        /// Report path; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score every labeled bundle in a directory and report AUC.
    Evaluate {
        #[arg(long)]
        bundles: PathBuf,
        #[arg(long, default_value = "reference")]
        scorer: ScorerSpec,
        /// Seed for the subject-independent split.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render a synthetic scenario to a bundle directory (test fixtures).
    MakeBundle {
        #[arg(long)]
        scenario: Scenario,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(cli: Cli) -> Result<(), Box<dyn std::error::Error>> {
    match cli.command {
        Command::Serve { addr, export_dir, max_monitoring } => {
            if !addr.ip().is_loopback() {
                return Err(format!("refusing to listen on non-loopback address {addr}").into());
            }
            let manager = SessionManager::new(ManagerConfig { max_monitoring, ..ManagerConfig::default() });
            let app = router(AppState { manager: Arc::new(manager), export_dir });
            let rt = tokio::runtime::Runtime::new()?;
            rt.block_on(async move {
                let listener = tokio::net::TcpListener::bind(addr).await?;
                info!("listening on http://{addr}");
                axum::serve(listener, app)
                    .with_graceful_shutdown(async {
                        let _ = tokio::signal::ctrl_c().await;
                    })
                    .await
            })?;
        }
        Command::ScoreBundle { bundle, scorer, stride, out } => {
            emit(&score_bundle_report(&bundle, &scorer, stride)?, out.as_deref())?;
        }
        Command::Evaluate { bundles, scorer, seed, out } => {
            emit(&evaluate_dir(&bundles, &scorer, seed)?, out.as_deref())?;
        }
        Command::MakeBundle { scenario, out } => {
            let manifest = scenario.write_bundle(&out)?;
            info!("wrote {} frames to {}", manifest.frame_count, out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
