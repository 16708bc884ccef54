use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hhgnn_cli::commands::{self, SplitName};
use hhgnn_cli::ExperimentConfig;
use hhgnn_core::Variant;

#[derive(Parser)]
#[command(name = "hhgnn", version, about = "Hypergraph activity recognition experiments")]
struct Cli {
    /// Experiment configuration (TOML). Defaults apply when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Pipeline seed, overriding the config.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Working directory, overriding `paths.out`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write the planted synthetic dataset to <out>/synthetic.csv.
    Synth,
    /// Clean labels, split, normalize and compute loss weights.
    Preprocess {
        /// Raw CSV; defaults to `paths.input`, then <out>/synthetic.csv.
        #[arg(long)]
        input: Option<PathBuf>,
        /// Cleaning rules (TOML).
        #[arg(long)]
        rules: Option<PathBuf>,
    },
    /// Build the hypergraph from the training split.
    BuildGraph,
    /// Grid-search training; keeps the best checkpoint.
    Train {
        #[arg(long, value_parser = parse_variant)]
        variant: Option<Variant>,
    },
    /// Report metrics for a checkpoint on one split.
    Evaluate {
        #[arg(long, default_value = "test", value_parser = parse_split)]
        split: SplitName,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
    },
    /// Train and compare all four variants on the test split.
    Ablate,
    /// Finite-difference check of every parameter gradient.
    Gradcheck,
}

fn parse_variant(s: &str) -> Result<Variant, String> {
    Variant::parse(s).ok_or_else(|| {
        let names: Vec<_> = Variant::ALL.iter().map(|v| v.name()).collect();
        format!("expected one of {}", names.join(", "))
    })
}

fn parse_split(s: &str) -> Result<SplitName, String> {
    SplitName::parse(s).ok_or_else(|| "expected train, val or test".to_string())
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let mut cfg = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = cli.out {
        cfg.paths.out = out;
    }
    match cli.command {
        Command::Synth => {
            let r = commands::synth(&cfg)?;
            println!("wrote {} rows to {}", r.rows, r.path.display());
        }
        Command::Preprocess { input, rules } => {
            if input.is_some() {
                cfg.paths.input = input;
            }
            if rules.is_some() {
                cfg.paths.rules = rules;
            }
            print!("{}", commands::preprocess(&cfg)?.to_text());
        }
        Command::BuildGraph => print!("{}", commands::build(&cfg)?.to_text()),
        Command::Train { variant } => {
            if let Some(v) = variant {
                cfg.train.variant = v;
            }
            print!("{}", commands::train(&cfg)?.to_text());
        }
        Command::Evaluate { split, checkpoint } => {
            let r = commands::evaluate(&cfg, checkpoint.as_deref(), split)?;
            print!("{}", r.metrics.to_text());
        }
        Command::Ablate => print!("{}", commands::ablate(&cfg)?.to_text()),
        Command::Gradcheck => print!("{}", commands::gradcheck(&cfg)?.to_text()),
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::exit_code(&e) as u8)
        }
    }
}
