use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use ascn_core::harness::{default_out_dir, parse_libsvm, run_experiment, summarize_dir, ExperimentConfig, OUT_DIR_ENV};
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "ascn", version, about = "Run and summarize accelerated stochastic cubic Newton experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every (method, seed) pair of an experiment config.
    Run {
        config: PathBuf,
        /// Comma-separated seeds replacing the config's list.
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        /// Output root; defaults to $ASCN_OUT_DIR, then ./runs.
        #[arg(long)]
        out_dir: Option<PathBuf>,
        /// Worker threads; defaults to all cores.
        #[arg(long)]
        threads: Option<usize>,
    },
    /// Parse a LibSVM file and report problems.
    Parse {
        path: PathBuf,
        /// Print size and label statistics.
        #[arg(long)]
        stats: bool,
        /// Declared feature dimension.
        #[arg(long)]
        dim: Option<usize>,
    },
    /// Rebuild a summary from the CSV logs in a run directory.
    Summarize {
        run_dir: PathBuf,
        /// Gradient-sample budget at which to compare methods.
        #[arg(long)]
        budget: Option<u64>,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn run(cli: Cli) -> Result<ExitCode> {
    match cli.command {
        Command::Run {
            config,
            seeds,
            out_dir,
            threads,
        } => {
            let mut cfg = ExperimentConfig::load(&config).with_context(|| format!("loading {}", config.display()))?;
            if let Some(seeds) = seeds {
                cfg.seeds = seeds;
                cfg.validate()?;
            }
            if threads == Some(0) {
                bail!("--threads must be at least 1");
            }
            let out_dir = out_dir.unwrap_or_else(default_out_dir);
            log::info!("writing to {} (override with --out-dir or {OUT_DIR_ENV})", out_dir.display());
            let outcome = run_experiment(&cfg, &out_dir, threads)?;
            print!("{}", outcome.summary.to_toml());
            println!("# written to {}", outcome.dir.display());
            Ok(if outcome.summary.has_failures() {
                ExitCode::FAILURE
            } else {
                ExitCode::SUCCESS
            })
        }
        Command::Parse { path, stats, dim } => {
            let file = File::open(&path).with_context(|| format!("opening {}", path.display()))?;
            let name = path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            let data = parse_libsvm(BufReader::new(file), &name, dim).with_context(|| format!("parsing {}", path.display()))?;
            if stats {
                let s = data.stats();
                println!("name = {:?}", data.name);
                println!("rows = {}", s.n);
                println!("dim = {}", s.dim);
                println!("nnz = {}", s.nnz);
                println!("density = {:.6}", s.density());
                println!("positives = {}", s.positives);
                println!("negatives = {}", s.negatives);
            } else {
                println!("ok: {} rows, dimension {}", data.len(), data.dim);
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Summarize { run_dir, budget } => {
            let summary = summarize_dir(&run_dir, budget).with_context(|| format!("summarizing {}", run_dir.display()))?;
            print!("{}", summary.to_toml());
            Ok(if summary.has_failures() {
                ExitCode::FAILURE
            } else {
                ExitCode::SUCCESS
            })
        }
    }
}
