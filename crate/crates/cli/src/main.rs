mod commands;
mod config;
mod workspace;

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};

use commands::Ctx;
use config::RunConfig;
use workspace::{record_run, Workspace};

/// Aspect-sentiment mining over peer reviews.
#[derive(Parser)]
#[command(name = "revmine", version)]
struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,
    #[arg(long, global = true, default_value = "workspace")]
    workspace: PathBuf,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Copy a corpus (and configured embeddings and training set) into the workspace.
    Ingest {
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Download a venue from an OpenReview-style API.
    Fetch {
        #[arg(long)]
        api_config: Option<PathBuf>,
    },
    /// Split reviews into sentences.
    Segment,
    /// Build the first selection round from embedding neighbourhoods.
    Bootstrap,
    /// Select the next round by model entropy.
    SelectBatch {
        /// Round number; defaults to one past the latest round.
        #[arg(long)]
        round: Option<u32>,
    },
    /// Run the annotation service.
    Serve {
        #[arg(long)]
        addr: Option<String>,
        /// Export the adjudicated training set and exit.
        #[arg(long)]
        export: bool,
    },
    /// Cross-validate the configured models and train the labeller.
    Train,
    /// Label every sentence of the corpus.
    LabelAll,
    /// Build review and paper aspect profiles.
    Aggregate,
    /// Train the recommendation network and run the ablation.
    Analyze,
    /// Write tables, figures and the summary.
    Report,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Ingest { .. } => "ingest",
            Command::Fetch { .. } => "fetch",
            Command::Segment => "segment",
            Command::Bootstrap => "bootstrap",
            Command::SelectBatch { .. } => "select-batch",
            Command::Serve { .. } => "serve",
            Command::Train => "train",
            Command::LabelAll => "label-all",
            Command::Aggregate => "aggregate",
            Command::Analyze => "analyze",
            Command::Report => "report",
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let mut config = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    rayon::ThreadPoolBuilder::new().num_threads(cli.threads).build_global()?;
    let ws = Workspace::create(&cli.workspace)?;
    let ctx = Ctx { ws: &ws, config: &config };
    let outputs = match &cli.command {
        Command::Ingest { input } => commands::ingest(&ctx, input.as_deref())?,
        Command::Fetch { api_config } => commands::fetch(&ctx, api_config.as_deref())?,
        Command::Segment => commands::segment(&ctx)?,
        Command::Bootstrap => commands::bootstrap(&ctx)?,
        Command::SelectBatch { round } => commands::select_batch(&ctx, *round)?,
        Command::Serve { addr, export } => commands::serve(&ctx, addr.as_deref(), *export)?,
        Command::Train => commands::train(&ctx)?,
        Command::LabelAll => commands::label_all(&ctx)?,
        Command::Aggregate => commands::aggregate(&ctx)?,
        Command::Analyze => commands::analyze(&ctx)?,
        Command::Report => commands::report(&ctx)?,
    };
    record_run(&ws, cli.command.name(), &config, cli.threads, &outputs)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
