use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use hardem::learning::{AnnealDirection, Objective};
use hardem::TaskKind;
use hardem_cli::commands;
use hardem_cli::config::{parse_pruning, Overrides};
use hardem_cli::CliError;

#[derive(Parser)]
#[command(name = "hardem", version, about = "Weakly supervised QA with precomputed solution sets")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    task: Option<TaskKind>,
    #[arg(long)]
    seed: Option<u64>,
    /// first_only, mml, hard or annealed_hard.
    #[arg(long)]
    objective: Option<Objective>,
    #[arg(long)]
    tau: Option<u64>,
    /// literal or inverted.
    #[arg(long)]
    anneal_direction: Option<AnnealDirection>,
    /// exhaustive or column_grounded.
    #[arg(long, value_parser = parse_pruning)]
    pruning: Option<hardem::sqlgen::Pruning>,
    /// Any configuration key, as `key=value`; repeatable.
    #[arg(long = "set", value_parser = parse_kv)]
    set: Vec<(String, String)>,
}

impl Common {
    fn overrides(&self) -> Overrides {
        Overrides {
            task: self.task,
            seed: self.seed,
            objective: self.objective,
            tau: self.tau,
            anneal_direction: self.anneal_direction,
            pruning: self.pruning,
            set: self.set.clone(),
        }
    }
}

fn parse_kv(s: &str) -> Result<(String, String), String> {
    s.split_once('=')
        .map(|(k, v)| (k.trim().to_owned(), v.trim().to_owned()))
        .ok_or_else(|| format!("expected key=value, got `{s}`"))
}

#[derive(Subcommand)]
enum Command {
    /// Enumerate candidates and write the solution set of every example.
    Precompute {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Train a scorer and write a checkpoint plus `<out>.steps.csv`.
    Train {
        #[arg(long = "in")]
        input: PathBuf,
        /// Precomputed solution sets; computed on the fly when absent.
        #[arg(long)]
        solutions: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Evaluate a checkpoint; writes predictions, metrics and breakdown files.
    Eval {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        solutions: Option<PathBuf>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
    /// Compare evaluation directories by |Z| bucket and sparsity threshold.
    Analyze {
        #[arg(long = "in", required = true)]
        inputs: Vec<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        #[command(flatten)]
        common: Common,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Precompute { input, out, common } => {
            let cfg = commands::load_config(common.config.as_deref(), &common.overrides())?;
            println!("{}", commands::precompute(&input, &out, &cfg)?);
        }
        Command::Train {
            input,
            solutions,
            out,
            common,
        } => {
            let cfg = commands::load_config(common.config.as_deref(), &common.overrides())?;
            println!("{}", commands::train(&input, solutions.as_deref(), &out, &cfg)?);
        }
        Command::Eval {
            input,
            checkpoint,
            solutions,
            out,
            common,
        } => {
            let agg = commands::eval(
                &input,
                &checkpoint,
                solutions.as_deref(),
                &out,
                common.config.as_deref(),
                &common.overrides(),
            )?;
            let sp: Vec<String> = agg.sparsity.iter().map(|s| format!("{s:.4}")).collect();
            println!(
                "count={} em={:.4} f1={:.4} rouge_l={:.4} sparsity=[{}]",
                agg.count,
                agg.em,
                agg.f1,
                agg.rouge_l,
                sp.join(",")
            );
        }
        Command::Analyze { inputs, out, common } => {
            let cfg = commands::load_config(common.config.as_deref(), &common.overrides())?;
            commands::analyze(&inputs, &out, &cfg)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
