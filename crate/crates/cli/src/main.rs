//! `scanlab`: run the scanning-demonstration pipeline stage by stage.
//!
//! Every stage reads and writes under `--out`. Failures print a JSON object
//! to stderr and exit with 2 (bad config or arguments), 3 (missing input) or
//! 4 (stage failure).

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::{parse_split, Overrides, RunConfig};

#[derive(Debug, Parser)]
#[command(name = "scanlab", version, about = "Surgical-surface scanning demonstrations and behavior cloning")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// TOML or JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Master seed; replaces every stage seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (results do not depend on it).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Demonstrations (target regions) per scene.
    #[arg(long, global = true)]
    demos: Option<usize>,
    /// Number of scenes.
    #[arg(long, global = true)]
    scenes: Option<usize>,
    /// Train, validation and evaluation demo counts, e.g. 24,8,18.
    #[arg(long, global = true, value_parser = parse_split)]
    split: Option<[usize; 3]>,
    /// Training epochs
    #[arg(long, global = true)]
    epochs: Option<usize>,
    /// Channel-width multiplier of the policy network
    #[arg(long = "width-mult", global = true)]
    width_mult: Option<usize>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write the procedural scenes.
    GenScenes,
    /// Generate scenes and demonstrations with the manifest.
    GenDemos,
    /// Print trajectory-length and area percentiles.
    Stats,
    /// Write the train/val/eval split.
    Split,
    /// Train the policy; writes policy.bin and curves.csv.
    Train,
    /// Evaluate the trained policy on the eval split; writes report.json.
    Eval,
    /// Plot predicted next positions over demonstrations.
    Viz {
        /// Demo index; defaults to every eval-split demo.
        #[arg(long)]
        demo: Option<usize>,
    },
    /// Plot a demonstration's target hull and trajectory.
    Render {
        #[arg(long, default_value_t = 0)]
        demo: usize,
    },
    /// Compare reverse-mode gradients with finite differences.
    Gradcheck {
        /// Randomly sampled parameters, in addition to one per tensor.
        #[arg(long, default_value_t = 200)]
        samples: usize,
    },
}

#[derive(Debug)]
pub struct CliError {
    kind: &'static str,
    message: String,
}

impl CliError {
    pub fn config(m: impl Into<String>) -> Self {
        Self {
            kind: "config",
            message: m.into(),
        }
    }

    pub fn missing(m: impl Into<String>) -> Self {
        Self {
            kind: "missing-input",
            message: m.into(),
        }
    }

    pub fn stage(m: impl std::fmt::Display) -> Self {
        Self {
            kind: "stage",
            message: m.to_string(),
        }
    }

    pub fn code(&self) -> u8 {
        match self.kind {
            "config" => 2,
            "missing-input" => 3,
            _ => 4,
        }
    }

    fn report(&self) -> ExitCode {
        let body = serde_json::json!({ "error": self.kind, "code": self.code(), "message": self.message });
        eprintln!("{body}");
        ExitCode::from(self.code())
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    cfg.apply(&Overrides {
        seed: cli.seed,
        out: cli.out.clone(),
        scenes: cli.scenes,
        demos: cli.demos,
        split: cli.split,
        epochs: cli.epochs,
        width_mult: cli.width_mult,
    });
    cfg.validate()?;
    if let Some(j) = cli.jobs {
        if j == 0 {
            return Err(CliError::config("--jobs must be at least 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build_global()
            .map_err(|e| CliError::config(e.to_string()))?;
    }
    match cli.command {
        Command::GenScenes => commands::gen_scenes(&cfg),
        Command::GenDemos => commands::gen_demos(&cfg),
        Command::Stats => commands::stats(&cfg),
        Command::Split => commands::split(&cfg),
        Command::Train => commands::train(&cfg),
        Command::Eval => commands::eval(&cfg),
        Command::Viz { demo } => commands::viz(&cfg, demo),
        Command::Render { demo } => commands::render(&cfg, demo),
        Command::Gradcheck { samples } => commands::gradcheck(&cfg, samples),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("SCANLAB_LOG", "warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => return CliError::config(e.to_string().trim_end()).report(),
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => e.report(),
    }
}
