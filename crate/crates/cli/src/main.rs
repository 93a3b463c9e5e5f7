//! Command-line front end: vocabulary building, tv-embedding training,
//! supervised training and selection, evaluation, prediction and
//! benchmarks, all driven by one `key = value` run configuration.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "wordcnn", version, about = "Shallow word-level CNN text categorizer")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Run configuration file (`key = value` lines, `#` comments).
    #[arg(short, long, global = true)]
    config: Option<PathBuf>,
    /// Override a configuration key; repeatable, applied after the file.
    #[arg(short = 's', long = "set", value_name = "KEY=VALUE", global = true)]
    overrides: Vec<String>,
    /// Shorthand for `--set seed=N`.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Shorthand for `--set work_dir=DIR`.
    #[arg(long, global = true, value_name = "DIR")]
    work_dir: Option<PathBuf>,
    /// Shorthand for `--set model=PATH`.
    #[arg(long, global = true, value_name = "PATH")]
    model: Option<PathBuf>,
    /// Log progress to standard error (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build vocabularies from the training corpus.
    Vocab,
    /// Train the configured tv-embeddings on the training corpus.
    TvTrain {
        /// Train only the tv-embedding at this position in `tvs`.
        #[arg(long)]
        index: Option<usize>,
    },
    /// Train one model at the configured region size, pooling and rate.
    Train,
    /// Train the selection grid and keep the best model on validation error.
    Select,
    /// Print the error rate of a model on the test corpus.
    Eval,
    /// Classify standard input, one document per line.
    Predict,
    /// Time inference and run the vocabulary-size independence benchmark.
    Bench {
        /// Skip the vocabulary-size independence benchmark.
        #[arg(long)]
        skip_independence: bool,
    },
    /// Print the parameter count of the configured model.
    Params,
    /// Print the effective configuration.
    Config,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { commands::EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let level = match cli.common.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let mut overrides = cli.common.overrides.clone();
    if let Some(seed) = cli.common.seed {
        overrides.push(format!("seed={seed}"));
    }
    if let Some(dir) = &cli.common.work_dir {
        overrides.push(format!("work_dir={}", dir.display()));
    }
    if let Some(model) = &cli.common.model {
        overrides.push(format!("model={}", model.display()));
    }
    let result = wordcnn::RunConfig::load(cli.common.config.as_deref(), &overrides).and_then(|cfg| match cli.command {
        Command::Vocab => commands::vocab(&cfg),
        Command::TvTrain { index } => commands::tv_train(&cfg, index),
        Command::Train => commands::train(&cfg),
        Command::Select => commands::select(&cfg),
        Command::Eval => commands::eval(&cfg),
        Command::Predict => commands::predict(&cfg),
        Command::Bench { skip_independence } => commands::bench(&cfg, skip_independence),
        Command::Params => commands::params(&cfg),
        Command::Config => commands::show_config(&cfg),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
