use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

mod commands;

#[derive(Parser)]
#[command(name = "sal", version, about = "Learned receive-antenna placement for MIMO radar imaging")]
struct Cli {
    /// Worker threads for dataset generation and baseline jobs (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone, Default)]
pub struct Common {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed (overrides the config file).
    #[arg(long)]
    seed: Option<u64>,
    /// Overwrite existing outputs.
    #[arg(long)]
    force: bool,
}

#[derive(Clone, Copy, ValueEnum)]
pub enum ScenarioArg {
    Discrete,
    Continuous,
}

#[derive(Clone, Copy, ValueEnum, Default)]
pub enum SplitArg {
    Train,
    #[default]
    Test,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a dataset of baseband cubes and ground-truth maps.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// Dataset file to write.
        #[arg(long)]
        out: PathBuf,
    },
    /// Learn a receive design (and reconstruction network) on a dataset.
    Train {
        #[command(flatten)]
        common: Common,
        /// Dataset written by `simulate`.
        #[arg(long)]
        data: PathBuf,
        /// Run directory for the checkpoint, design and history.
        #[arg(long)]
        out: PathBuf,
        /// Selection scenario (overrides the config file).
        #[arg(long, value_enum)]
        scenario: Option<ScenarioArg>,
        /// Number of receivers to keep (overrides the config file).
        #[arg(long)]
        budget: Option<usize>,
    },
    /// Score a trained run and its baselines on the test split.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Dataset written by `simulate`.
        #[arg(long)]
        data: PathBuf,
        /// Run directory written by `train`.
        #[arg(long)]
        run: PathBuf,
        /// Metrics CSV to write.
        #[arg(long)]
        out: PathBuf,
        /// Choose the best random design on the test split.
        #[arg(long)]
        select_on_test: bool,
    },
    /// Write the hard design of a run as plain text.
    ExportDesign {
        /// Run directory written by `train`.
        #[arg(long)]
        run: PathBuf,
        /// Design text file to write.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        force: bool,
    },
    /// Render ground truth, measured and reconstructed maps side by side.
    Render {
        /// Dataset written by `simulate`.
        #[arg(long)]
        data: PathBuf,
        /// Run directory; without it the full array is shown.
        #[arg(long)]
        run: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "test")]
        split: SplitArg,
        #[arg(long, default_value_t = 0)]
        index: usize,
        /// PGM file to write.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        force: bool,
    },
}

fn fail(kind: &str, message: &str) -> ExitCode {
    eprintln!("{}", serde_json::json!({ "error": kind, "message": message }));
    ExitCode::from(1)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail("usage", e.to_string().trim()),
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            return fail("usage", &e.to_string());
        }
    }
    let result = match cli.command {
        Command::Simulate { common, out } => commands::simulate(&common, &out),
        Command::Train { common, data, out, scenario, budget } => {
            commands::train(&common, &data, &out, scenario, budget)
        }
        Command::Eval { common, data, run, out, select_on_test } => {
            commands::eval(&common, &data, &run, &out, select_on_test)
        }
        Command::ExportDesign { run, out, force } => commands::export_design(&run, &out, force),
        Command::Render { data, run, split, index, out, force } => {
            commands::render(&data, run.as_deref(), split, index, &out, force)
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => fail(commands::error_kind(&e), &e.to_string()),
    }
}
