use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use qattr_bench::config::ExperimentConfig;
use qattr_bench::embed::read_embeddings;
use qattr_bench::run_and_write;
use qattr_core::theta::{predict, MarketShape, PartitionProtocol, ThetaConfig};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "qattr-bench", about = "Quotient attribution benchmark runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment config and write per-run, aggregate and plot files.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated seeds replacing the config's list.
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Predict the admissible cosine-threshold interval of an EMBED1 pool.
    PredictTheta {
        #[arg(long)]
        embeddings: PathBuf,
        #[arg(long)]
        providers: usize,
        #[arg(long = "units-per")]
        units_per: usize,
        #[arg(long, default_value = "random")]
        protocol: String,
        #[arg(long, default_value_t = 0.10)]
        cutoff: f64,
        #[arg(long, default_value_t = 30)]
        trials: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Write the JSON report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Parse and check a config without running it.
    ValidateConfig { path: PathBuf },
    Version,
}

fn main() -> ExitCode {
    match real_main() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn real_main() -> anyhow::Result<ExitCode> {
    match Cli::parse().command {
        Command::Run { config, seeds, out } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(s) = seeds {
                cfg.seeds = s;
            }
            let dir = out.unwrap_or_else(|| cfg.output_dir.clone());
            let result = run_and_write(&cfg, &dir)?;
            println!("{} runs written to {}", result.records.len(), dir.display());
            if !result.failures.is_empty() {
                for f in &result.failures {
                    eprintln!("failed: {f}");
                }
                return Ok(ExitCode::from(1));
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::PredictTheta { embeddings, providers, units_per, protocol, cutoff, trials, seed, out } => {
            let protocol: PartitionProtocol = protocol.parse()?;
            let file = read_embeddings(&embeddings)?;
            let cfg = ThetaConfig { cutoff, trials, protocol, seed, ..ThetaConfig::default() };
            let pred = predict(&file.pool, MarketShape { n_providers: providers, units_each: units_per }, &cfg)?;
            let text = serde_json::to_string_pretty(&pred)?;
            match out {
                Some(p) => std::fs::write(&p, text).with_context(|| format!("writing {}", p.display()))?,
                None => println!("{text}"),
            }
            if pred.interval_empty {
                eprintln!("warning: admissible interval is empty");
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::ValidateConfig { path } => match ExperimentConfig::load(&path) {
            Ok(cfg) => {
                println!("ok: {} ({} seeds)", cfg.experiment.name(), cfg.seeds.len());
                Ok(ExitCode::SUCCESS)
            }
            Err(e) => bail!("{e}"),
        },
        Command::Version => {
            println!("qattr-bench {}", env!("CARGO_PKG_VERSION"));
            Ok(ExitCode::SUCCESS)
        }
    }
}
