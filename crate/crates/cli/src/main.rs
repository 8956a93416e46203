use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fedol_core::harness::{run_experiment, write_outputs};
use fedol_core::{Error, ExperimentConfig};

#[derive(Parser)]
#[command(name = "fedol", version, about = "One-shot federated learning experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every strategy in a config and write metrics.csv, cost.csv and config.resolved.
    Run {
        /// Path to the experiment config.
        config: PathBuf,
        /// Replace the config's seed list with a single seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Comma-separated strategies, overriding the config.
        #[arg(long)]
        strategies: Option<String>,
    },
}

fn load_config(
    path: &PathBuf,
    seed: Option<u64>,
    strategies: Option<&str>,
) -> Result<ExperimentConfig, Error> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    let mut cfg = ExperimentConfig::parse(&text)?;
    if let Some(s) = seed {
        cfg.seeds = vec![s];
    }
    if let Some(list) = strategies {
        cfg.set_strategies(list)?;
    }
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let Command::Run {
        config,
        seed,
        out,
        strategies,
    } = cli.command;

    let cfg = match load_config(&config, seed, strategies.as_deref()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let output = match run_experiment(&cfg) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    if let Err(e) = write_outputs(&out, &cfg, &output) {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    for g in &output.groups {
        let mut line = format!("seed {} {}:", g.seed, g.partition);
        for name in ["local", "fedavg", "fedprox", "feddf", "min_entropy", "fedol"] {
            if let Some(acc) = g.final_accuracy(name) {
                line.push_str(&format!(" {name}={acc:.3}"));
            }
        }
        println!("{line}");
        for (strategy, e) in &g.failures {
            eprintln!("  {strategy} failed: {e}");
        }
        if let Err(e) = &g.one_shot {
            eprintln!("  {e}");
        }
    }
    println!("wrote {}", out.display());
    if output.has_failures() {
        ExitCode::from(2)
    } else {
        ExitCode::SUCCESS
    }
}
