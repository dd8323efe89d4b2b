use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use headbench::bench::{
    self, fixture, BenchConfig, DatasetManifest, FeatureSource, Target,
};
use headbench::embed::MODEL_DIR_ENV;

#[derive(Parser)]
#[command(name = "headbench", version, about = "Talking-head generation benchmark")]
struct Cli {
    /// TOML configuration; unset fields take their defaults.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    output: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads, 0 for all cores.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Directory relative model paths are resolved against.
    #[arg(long, global = true, env = MODEL_DIR_ENV)]
    model_dir: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Crop faces and estimate head pose for every manifest entry.
    Preprocess {
        #[arg(long)]
        manifest: PathBuf,
    },
    /// Train the lipreading, emotion or blink network.
    Train {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        target: Target,
        #[arg(long)]
        epochs: Option<usize>,
    },
    /// Score generated clips against their real counterparts.
    Eval {
        #[arg(long)]
        manifest: PathBuf,
        /// Enable a semantic metric from the given checkpoint, e.g. `lipreading=ck.hbst`.
        #[arg(long = "checkpoint", value_parser = parse_checkpoint)]
        checkpoints: Vec<(Target, PathBuf)>,
        /// Skip the set-level Fréchet distance.
        #[arg(long)]
        no_fid: bool,
    },
    /// Re-aggregate an existing report under the configured bins.
    Report {
        #[arg(long)]
        input: PathBuf,
    },
    /// Export clip features of a network, or frame embeddings of `provider:<name>`.
    Features {
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        source: FeatureSource,
    },
    /// Write a small synthetic dataset.
    Synth {
        #[arg(long)]
        dir: PathBuf,
        #[arg(long, default_value_t = 4)]
        reals: usize,
        #[arg(long, default_value_t = 0)]
        train_clips: usize,
    },
}

fn parse_checkpoint(s: &str) -> Result<(Target, PathBuf), String> {
    let (t, p) = s.split_once('=').ok_or("expected TARGET=PATH")?;
    Ok((t.parse().map_err(|e| format!("{e}"))?, PathBuf::from(p)))
}

fn load_config(cli: &Cli) -> Result<BenchConfig> {
    let mut cfg = match &cli.config {
        Some(p) => BenchConfig::load(p)?,
        None => BenchConfig::default(),
    };
    if let Some(o) = &cli.output {
        cfg.output_dir = o.clone();
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(w) = cli.workers {
        cfg.workers = w;
    }
    Ok(cfg)
}

fn manifest(path: &PathBuf) -> Result<DatasetManifest> {
    DatasetManifest::load(path).with_context(|| format!("loading {}", path.display()))
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    if let Some(dir) = &cli.model_dir {
        std::env::set_var(MODEL_DIR_ENV, dir);
    }
    let mut cfg = load_config(&cli)?;
    match &cli.cmd {
        Cmd::Preprocess { manifest: m } => {
            let s = bench::run_preprocess(&manifest(m)?, &cfg)?;
            println!(
                "{} processed, {} unchanged, {} failed",
                s.processed(),
                s.skipped(),
                s.failures().len()
            );
        }
        Cmd::Train { manifest: m, target, epochs } => {
            if let Some(e) = epochs {
                cfg.networks.section_mut(*target).epochs = *e;
            }
            let t = bench::run_train(&manifest(m)?, &cfg, *target)?;
            println!("{} ({})", t.checkpoint.display(), t.fingerprint);
        }
        Cmd::Eval { manifest: m, checkpoints, no_fid } => {
            for (t, p) in checkpoints {
                // relative to where the command runs, not to the output dir
                cfg.checkpoints.set(*t, std::path::absolute(p)?);
                match t {
                    Target::Lipreading => cfg.metrics.lrsd = true,
                    Target::Emotion => cfg.metrics.esd = true,
                    Target::Blink => cfg.metrics.bsd = true,
                }
            }
            if *no_fid {
                cfg.metrics.fid = false;
            }
            let r = bench::run_eval(&manifest(m)?, &cfg)?;
            println!(
                "{} clips scored, {} failures -> {}",
                r.records.len(),
                r.failures.len(),
                cfg.output_dir.join("reports").display()
            );
        }
        Cmd::Report { input } => {
            let r = bench::run_report(input, &cfg)?;
            println!("{} records re-aggregated", r.records.len());
        }
        Cmd::Features { manifest: m, source } => {
            let p = bench::run_features(&manifest(m)?, &cfg, source)?;
            println!("{}", p.display());
        }
        Cmd::Synth { dir, reals, train_clips } => {
            let spec = fixture::FixtureSpec {
                reals: *reals,
                train_clips: *train_clips,
                val_clips: train_clips / 4,
                ..Default::default()
            };
            println!("{}", fixture::write_fixture(dir, &spec)?.display());
        }
    }
    Ok(())
}
