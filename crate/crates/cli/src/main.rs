use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use synthword::batch::{generate_batch, preview, stats, Execution};
use synthword::config::GenConfig;
use synthword::resources::ResourceSet;

/// Synthetic word-box image generator for text recognition training.
#[derive(Debug, Parser)]
#[command(name = "synthword", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Render a batch of images with a ground-truth manifest.
    Generate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        count: Option<u64>,
        #[arg(long)]
        seed: Option<u64>,
        /// Worker threads; 0 uses every core.
        #[arg(long)]
        workers: Option<usize>,
        #[arg(long)]
        output: Option<PathBuf>,
    },
    /// Label length histogram and per-character word counts of a manifest, as JSON.
    Stats {
        #[arg(long)]
        manifest: PathBuf,
    },
    /// Render a few samples with every intermediate stage image.
    Preview {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        count: u64,
        /// Defaults to `<output.dir>/preview`.
        #[arg(long)]
        output: Option<PathBuf>,
    },
}

fn load(config: &Path) -> Result<(GenConfig, ResourceSet)> {
    let cfg = GenConfig::load(config)?;
    let resources = ResourceSet::load(&cfg.resources).context("loading resources")?;
    Ok((cfg, resources))
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Generate { config, count, seed, workers, output } => {
            let (mut cfg, resources) = load(&config)?;
            cfg.output.count = count.unwrap_or(cfg.output.count);
            cfg.output.seed = seed.unwrap_or(cfg.output.seed);
            cfg.output.workers = workers.unwrap_or(cfg.output.workers);
            if let Some(dir) = output {
                cfg.output.dir = dir;
            }
            cfg.validate()?;
            let summary = generate_batch(&resources, &cfg, Execution::for_workers(cfg.output.workers))?;
            eprintln!(
                "{} written, {} failed, {} discards in {:.1}s -> {}",
                summary.succeeded,
                summary.failed,
                summary.discards,
                summary.wall_time_secs,
                cfg.output.dir.display()
            );
        }
        Command::Stats { manifest } => {
            let report = stats(&manifest)?;
            println!("{}", serde_json::to_string_pretty(&report)?);
        }
        Command::Preview { config, count, output } => {
            let (cfg, resources) = load(&config)?;
            let dir = output.unwrap_or_else(|| cfg.output.dir.join("preview"));
            let records = preview(&resources, &cfg, count, &dir)?;
            for r in &records {
                match (&r.label, &r.error) {
                    (Some(label), _) => eprintln!("{:08} {label:?} {:?}", r.index, r.trace),
                    (None, Some(e)) => eprintln!("{:08} failed: {e}", r.index),
                    _ => {}
                }
            }
            eprintln!("preview written to {}", dir.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
