use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::Context;
use clap::{Parser, Subcommand};
use narrlab_service::config::LabConfig;
use narrlab_service::error::LabError;
use narrlab_service::run::{new_run_id, RunDir};
use narrlab_service::server::{self, AppState};
use narrlab_service::stages::{self, ORDER};

#[derive(Debug, Parser)]
#[command(name = "narrlab", about = "Narrative morphing lab for earnings calls")]
struct Cli {
    /// Overrides every seed in the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// JSON config file; defaults apply to anything it leaves out.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Run to operate on. A fresh id is generated when omitted.
    #[arg(long, global = true)]
    run_id: Option<String>,
    #[arg(long, global = true, default_value = "runs")]
    runs_dir: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic world with planted narrative effects.
    Synth,
    /// Split transcripts into prepared remarks.
    Ingest,
    /// Replace numerals with the mask token.
    Mask,
    /// Embed masked remarks.
    Embed,
    /// Compute belief and outcome targets.
    Targets,
    /// Assemble the fundamentals and text feature matrix.
    Features,
    /// Fit boosted models for every target, horizon and specification.
    Train,
    /// Held-out R² and the analyst benchmark.
    Evaluate,
    /// Clark-West tests of the text columns.
    Cw,
    /// Partial dependence of the fundamentals.
    Pdp,
    /// Rewrite held-out remarks along each narrative dimension.
    Morph,
    /// Predicted treatment effects of accepted morphs.
    Pte,
    /// Interpretable factor scores and their predictive fit.
    Factors,
    /// Render tables and figures and seal the run.
    Report,
    /// Every stage in order.
    All,
    /// Start the HTTP service.
    Serve {
        #[arg(long)]
        host: Option<String>,
        #[arg(long)]
        port: Option<u16>,
        /// Completed run whose models answer what-if requests.
        #[arg(long)]
        model_run: Option<String>,
    },
}

impl Command {
    fn stage(&self) -> Option<&'static str> {
        Some(match self {
            Command::Synth => "synth",
            Command::Ingest => "ingest",
            Command::Mask => "mask",
            Command::Embed => "embed",
            Command::Targets => "targets",
            Command::Features => "features",
            Command::Train => "train",
            Command::Evaluate => "evaluate",
            Command::Cw => "cw",
            Command::Pdp => "pdp",
            Command::Morph => "morph",
            Command::Pte => "pte",
            Command::Factors => "factors",
            Command::Report => "report",
            Command::All | Command::Serve { .. } => return None,
        })
    }
}

fn load_config(cli: &Cli) -> anyhow::Result<Option<LabConfig>> {
    let cfg = match &cli.config {
        Some(path) => Some(LabConfig::load(path)?),
        None => None,
    };
    Ok(match (cfg, cli.seed) {
        (Some(c), Some(s)) => Some(c.with_seed(s)),
        (None, Some(s)) => Some(LabConfig::default().with_seed(s)),
        (c, None) => c,
    })
}

fn open_run(cli: &Cli, cfg: Option<LabConfig>) -> anyhow::Result<RunDir> {
    let id = match &cli.run_id {
        Some(id) => id.clone(),
        None => new_run_id(cfg.as_ref().unwrap_or(&LabConfig::default())),
    };
    Ok(RunDir::open_or_create(&cli.runs_dir, &id, cfg)?)
}

fn serve(
    cli: &Cli,
    cfg: Option<LabConfig>,
    host: Option<String>,
    port: Option<u16>,
    model_run: Option<String>,
) -> anyhow::Result<()> {
    let mut cfg = cfg.unwrap_or_default();
    if let Some(h) = host {
        cfg.serve.host = h;
    }
    if let Some(p) = port {
        cfg.serve.port = p;
    }
    if model_run.is_some() {
        cfg.serve.model_run = model_run;
    }
    cfg.validate()?;
    let state = AppState::from_config(cli.runs_dir.clone(), &cfg)?;
    let app = server::router(Arc::new(state), server::cors(cfg.serve.cors_origin.as_deref())?);
    let addr = format!("{}:{}", cfg.serve.host, cfg.serve.port);
    let rt = tokio::runtime::Runtime::new().context("starting runtime")?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind(&addr)
            .await
            .map_err(|e| LabError::io(std::path::Path::new(&addr), e))?;
        tracing::info!(%addr, model_run = ?cfg.serve.model_run, "listening");
        server::serve(listener, app)
            .await
            .map_err(|e| LabError::io(std::path::Path::new(&addr), e))?;
        Ok(())
    })
}

fn execute(cli: Cli) -> anyhow::Result<()> {
    let cfg = load_config(&cli)?;
    match &cli.command {
        Command::Serve { host, port, model_run } => serve(&cli, cfg, host.clone(), *port, model_run.clone()),
        Command::All => {
            let mut run = open_run(&cli, cfg)?;
            println!("{}", run.manifest.run_id);
            let imported = run.config.inputs.transcripts.is_some();
            for stage in ORDER {
                if stage == "synth" && imported {
                    continue;
                }
                stages::run_stage(&mut run, stage).with_context(|| format!("stage {stage}"))?;
            }
            Ok(())
        }
        cmd => {
            let stage = cmd.stage().expect("stage command");
            let mut run = open_run(&cli, cfg)?;
            println!("{}", run.manifest.run_id);
            stages::run_stage(&mut run, stage).with_context(|| format!("stage {stage}"))?;
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    tracing_subscriber::fmt()
        .with_env_filter(
            tracing_subscriber::EnvFilter::try_from_default_env()
                .unwrap_or_else(|_| "narrlab=info,narrlab_service=info".into()),
        )
        .with_writer(std::io::stderr)
        .init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = e
                .chain()
                .find_map(|c| c.downcast_ref::<LabError>())
                .map_or(2, LabError::exit_code);
            ExitCode::from(code)
        }
    }
}
