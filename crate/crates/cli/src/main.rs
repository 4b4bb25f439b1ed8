use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;

/// Counterfactual explanations selected from an ensemble of explainers.
#[derive(Debug, Parser)]
#[command(name = "cfselect", version)]
struct Cli {
    /// More logging (-v info, -vv debug). `RUST_LOG` takes precedence.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Run configuration (TOML).
    #[arg(long)]
    pub config: PathBuf,
    /// Overrides every seed in the config.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Overrides the output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Train the classifier and save it.
    Train {
        #[command(flatten)]
        common: Common,
    },
    /// Explain one instance step by step.
    Explain(ExplainArgs),
    /// Compare every method over the test split and write reports.
    Evaluate {
        #[command(flatten)]
        common: Common,
        /// Number of test instances; overrides the config.
        #[arg(long)]
        instances: Option<usize>,
    },
    /// Sweep utility weights over the outcomes of `evaluate`.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Weight step `1/n`, given as `n`; overrides the config.
        #[arg(long)]
        grid: Option<u32>,
    },
}

#[derive(Debug, Args)]
pub struct ExplainArgs {
    #[command(flatten)]
    pub common: Common,
    #[command(flatten)]
    pub source: InstanceSource,
    /// Selection metric (l1, l2, linf, nadir); overrides the config.
    #[arg(long)]
    pub metric: Option<String>,
    /// Class the counterfactual should reach; defaults to the other class.
    #[arg(long)]
    pub desired: Option<String>,
    /// Also write the scored candidates as JSON lines.
    #[arg(long)]
    pub dump: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct InstanceSource {
    /// Row index in the data file (0-based, header excluded).
    #[arg(long)]
    pub instance_id: Option<usize>,
    /// Feature values as `name=value,name=value,...`.
    #[arg(long)]
    pub values: Option<String>,
    /// Replay a candidate dump instead of running the explainers.
    #[arg(long)]
    pub fixture: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    let result = match cli.command {
        Command::Train { common } => commands::train(&common),
        Command::Explain(args) => commands::explain(&args),
        Command::Evaluate { common, instances } => commands::evaluate(&common, instances),
        Command::Sweep { common, grid } => commands::sweep(&common, grid),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code())
        }
    }
}
