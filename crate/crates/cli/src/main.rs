mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::config::{ConfigError, RunConfig};

/// Knowledge-graph reasoning with priority-pruned path propagation.
#[derive(Debug, Parser)]
#[command(name = "astarnet", version)]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Configuration file (`key = value` lines grouped in sections).
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Dataset directory holding train.txt, valid.txt and test.txt.
    #[arg(long, global = true)]
    dataset: Option<PathBuf>,
    /// Node ratio α in (0, 1].
    #[arg(long, global = true)]
    alpha: Option<f64>,
    /// Degree ratio β in (0, 1].
    #[arg(long, global = true)]
    beta: Option<f64>,
    /// Propagation steps T.
    #[arg(long, global = true)]
    steps: Option<usize>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads; 0 uses every core.
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Checkpoint to continue training from.
    #[arg(long, global = true)]
    resume: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SplitArg {
    Train,
    Valid,
    Test,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FaultArg {
    ShiftedBoundary,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train a model with periodic validation and checkpointing.
    Train,
    /// Rank a split with a trained checkpoint.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long, value_enum, default_value = "test")]
        split: SplitArg,
        /// Rank against every entity without removing other known answers.
        #[arg(long)]
        unfiltered: bool,
    },
    /// List the most important paths between a head and an answer.
    Explain {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        head: String,
        /// Relation name; a `^-1` suffix selects the inverse relation.
        #[arg(long)]
        relation: String,
        #[arg(long)]
        answer: String,
        #[arg(long, default_value_t = 10)]
        beam: usize,
        /// Graph to search: `test`, or the training graph for `train` and `valid`.
        #[arg(long, value_enum, default_value = "test")]
        graph: SplitArg,
        /// Also write a DOT rendering of the paths here.
        #[arg(long)]
        dot: Option<PathBuf>,
    },
    /// Compare message counts, time and memory of full and pruned propagation.
    Bench {
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Also time one training epoch per node ratio.
        #[arg(long)]
        train_epoch: bool,
    },
    /// Check propagation against exhaustive path enumeration on random graphs.
    OracleCheck {
        #[arg(long, default_value_t = 500)]
        trials: usize,
        #[arg(long, value_enum)]
        fault: Option<FaultArg>,
    },
}

/// A command-line or configuration mistake (exit code 2).
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn effective_config(common: &Common) -> anyhow::Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    let mut set = |key: &str, value: Option<String>| -> anyhow::Result<()> {
        if let Some(v) = value {
            cfg.set(key, &v)
                .map_err(|m| UsageError(format!("--{}: {m}", key.rsplit('.').next().unwrap_or(key))))?;
        }
        Ok(())
    };
    set("data.dataset", common.dataset.as_ref().map(|p| p.display().to_string()))?;
    set("train.alpha", common.alpha.map(|v| v.to_string()))?;
    set("train.beta", common.beta.map(|v| v.to_string()))?;
    set("model.steps", common.steps.map(|v| v.to_string()))?;
    set("train.seed", common.seed.map(|v| v.to_string()))?;
    set("run.threads", common.threads.map(|v| v.to_string()))?;
    set("run.out", common.out.as_ref().map(|p| p.display().to_string()))?;
    Ok(cfg)
}

fn run(cli: Cli) -> anyhow::Result<ExitCode> {
    let cfg = effective_config(&cli.common)?;
    if cfg.threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cfg.threads)
            .build_global()
            .map_err(|e| anyhow::anyhow!("cannot start thread pool: {e}"))?;
    }
    match cli.command {
        Command::Train => commands::train(&cfg, cli.common.resume.as_deref()),
        Command::Eval {
            checkpoint,
            split,
            unfiltered,
        } => commands::eval(&cfg, &checkpoint, split, !unfiltered),
        Command::Explain {
            checkpoint,
            head,
            relation,
            answer,
            beam,
            graph,
            dot,
        } => commands::explain(&cfg, &checkpoint, &head, &relation, &answer, beam, graph, dot.as_deref()),
        Command::Bench {
            checkpoint,
            train_epoch,
        } => commands::bench(&cfg, checkpoint.as_deref(), train_epoch),
        Command::OracleCheck { trials, fault } => commands::oracle_check(cli.common.seed.unwrap_or(0), trials, fault),
    }
}

fn is_usage_error(err: &anyhow::Error) -> bool {
    err.chain().any(|cause| {
        cause.is::<UsageError>()
            || cause.is::<ConfigError>()
            || matches!(
                cause.downcast_ref::<astarnet::Error>(),
                Some(astarnet::Error::Config(_) | astarnet::Error::Parse { .. } | astarnet::Error::UnknownSymbol { .. })
            )
    })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            if is_usage_error(&err) {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}
