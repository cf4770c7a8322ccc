use std::io::Write as _;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use csiloc::error::Error;
use csiloc::experiment::{self, Command, ExperimentConfig, Outcome};

/// CSI-fingerprint positioning lab.
///
/// Any config value can be overridden with `--section.key=value`,
/// e.g. `--schedule.max_epochs=20` or `--preset.base=desk-nlos`.
#[derive(Parser, Debug)]
#[command(name = "csiloc", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Generate a dataset preset and write a CSID file.
    Gen {
        #[command(flatten)]
        common: Common,
        /// Output file (defaults to a new run directory).
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Train a network and evaluate it on the held-out split.
    Train(Common),
    /// Finetune a checkpoint on calibration samples.
    Finetune(Common),
    /// Evaluate a checkpoint.
    Eval(Common),
    /// Run a parameter sweep.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// antenna, sample-distance, phase-ablation, finetune or pretrain.
        #[arg(long)]
        kind: Option<String>,
    },
    /// Summarise a run directory.
    Report {
        run_dir: PathBuf,
    },
}

#[derive(Args, Debug)]
struct Common {
    /// Experiment config file; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for sweeps.
    #[arg(long)]
    jobs: Option<usize>,
    /// Output root (default: $CSILOC_OUT, else ./runs).
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Splits `--section.key=value` overrides from the arguments clap parses.
fn split_overrides(args: impl Iterator<Item = String>) -> (Vec<String>, Vec<String>) {
    let (mut rest, mut overrides) = (Vec::new(), Vec::new());
    for a in args {
        match a.strip_prefix("--") {
            Some(body) if body.split_once('=').is_some_and(|(k, _)| k.contains('.')) => {
                overrides.push(body.to_string())
            }
            _ => rest.push(a),
        }
    }
    (rest, overrides)
}

fn load(common: &Common, mut overrides: Vec<String>) -> Result<ExperimentConfig, Error> {
    if let Some(s) = common.seed {
        overrides.push(format!("experiment.seed={s}"));
    }
    if let Some(j) = common.jobs {
        overrides.push(format!("experiment.jobs={j}"));
    }
    match &common.config {
        Some(p) => ExperimentConfig::load(p, &overrides),
        None => ExperimentConfig::parse("", &overrides),
    }
}

fn run(cli: Cli, mut overrides: Vec<String>) -> Result<Outcome, Error> {
    let (command, common) = match &cli.command {
        Cmd::Report { run_dir } => return experiment::cmd_report(run_dir),
        Cmd::Gen { common, output } => {
            if let Some(o) = output {
                overrides.push(format!("gen.path={}", o.display()));
            }
            (Command::Gen, common)
        }
        Cmd::Train(c) => (Command::Train, c),
        Cmd::Finetune(c) => (Command::Finetune, c),
        Cmd::Eval(c) => (Command::Eval, c),
        Cmd::Sweep { common, kind } => {
            if let Some(k) = kind {
                overrides.push(format!("sweep.kind={k}"));
            }
            (Command::Sweep, common)
        }
    };
    let cfg = load(common, overrides)?;
    let root = experiment::output_root(common.out.as_deref());
    experiment::run(command, &cfg, &root)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let (args, overrides) = split_overrides(std::env::args());
    let cli = Cli::parse_from(args);
    match run(cli, overrides) {
        Ok(out) => {
            // A closed pipe (e.g. `| head`) is not an error.
            let mut stdout = std::io::stdout().lock();
            for l in &out.lines {
                let _ = writeln!(stdout, "{l}");
            }
            if let Some(d) = out.run_dir {
                let _ = writeln!(stdout, "run directory: {}", d.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error[{}]: {e}", e.category());
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
