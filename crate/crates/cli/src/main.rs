//! `negmargin`: pretrain, evaluate, sweep and analyse negative-margin
//! few-shot models from the command line.
//!
//! Exit codes: 0 success, 2 configuration or usage error, 3 I/O error,
//! 4 numeric failure, 5 malformed input file, 6 contract violation.

mod commands;
mod config;
mod error;
mod grid;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::RunConfig;
use crate::error::CliError;

#[derive(Parser)]
#[command(name = "negmargin", version, about = "Negative-margin softmax few-shot experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Options shared by every command that reads a run config.
#[derive(Args, Clone, Debug, Default)]
pub struct ConfigArgs {
    /// `key = value` run config; defaults apply to missing keys.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Dataset manifest (overrides `data` in the config).
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Override a config key; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Seed (overrides the config and NEGMARGIN_SEED).
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Args, Clone, Debug, Default)]
pub struct EpisodeArgs {
    #[arg(long)]
    pub way: Option<usize>,
    #[arg(long)]
    pub shot: Option<usize>,
    #[arg(long)]
    pub query: Option<usize>,
    #[arg(long)]
    pub episodes: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Train backbone and base classifier; writes checkpoint.txt and training_log.csv.
    Pretrain {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, allow_hyphen_values = true)]
        margin: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Episodic evaluation of a checkpoint; writes eval.csv and episodes.csv.
    FinetuneEval {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[command(flatten)]
        episodes: EpisodeArgs,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// `novel` or `base` (held-out base records).
        #[arg(long)]
        split: Option<String>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Pretrain and evaluate over a margin grid; writes sweep.csv, variance.csv and per-run files.
    SweepMargin {
        #[command(flatten)]
        cfg: ConfigArgs,
        /// `start:step:end` (inclusive) or a comma-separated list.
        #[arg(long, allow_hyphen_values = true)]
        margins: Option<String>,
        #[arg(long)]
        seeds: Option<String>,
        #[arg(long)]
        shots: Option<String>,
        #[arg(long)]
        episodes: Option<usize>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Variance, confusion and angular-histogram reports for a checkpoint.
    Analyze {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check the margin/discriminability condition on one instance or on random ones.
    CheckProposition(commands::PropositionArgs),
    /// Write backbone features as `class,f0,...` CSV.
    ExportEmbeddings {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// `base` (training records), `holdout`, `novel`, `val` or `all`.
        #[arg(long, default_value = "novel")]
        split: String,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Config from file and environment with command-line overrides applied.
fn resolve(args: &ConfigArgs) -> Result<RunConfig, CliError> {
    let mut cfg = match &args.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::from_env()?,
    };
    for kv in &args.set {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| CliError::Config(format!("--set expects KEY=VALUE, got '{kv}'")))?;
        cfg.set(k.trim(), v, 0)?;
    }
    if let Some(d) = &args.data {
        cfg.data = Some(d.clone());
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
        cfg.seeds = vec![s];
    }
    // Written configs must stay valid when read from another directory.
    for p in [&mut cfg.data, &mut cfg.checkpoint].into_iter().flatten() {
        if let Ok(abs) = std::path::absolute(&*p) {
            *p = abs;
        }
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Pretrain { cfg, margin, out } => {
            let mut c = resolve(&cfg)?;
            if let Some(m) = margin {
                c.margin = m;
            }
            commands::pretrain(&c, &out)
        }
        Command::FinetuneEval {
            cfg,
            episodes,
            checkpoint,
            split,
            out,
        } => {
            let mut c = resolve(&cfg)?;
            if let Some(p) = checkpoint {
                c.checkpoint = Some(std::path::absolute(&p).unwrap_or(p));
            }
            if let Some(s) = split {
                c.set("eval_split", &s, 0)?;
            }
            if let Some(w) = episodes.way {
                c.way = w;
                c.base_way = w;
            }
            if let Some(s) = episodes.shot {
                c.shot = s;
            }
            if let Some(q) = episodes.query {
                c.query = q;
            }
            if let Some(n) = episodes.episodes {
                c.episodes = n;
            }
            commands::finetune_eval(&c, &out)
        }
        Command::SweepMargin {
            cfg,
            margins,
            seeds,
            shots,
            episodes,
            out,
        } => {
            let mut c = resolve(&cfg)?;
            if let Some(m) = margins {
                c.set("margins", &m, 0)?;
            }
            if let Some(s) = seeds {
                c.set("seeds", &s, 0)?;
            }
            if let Some(s) = shots {
                c.set("shots", &s, 0)?;
            }
            if let Some(n) = episodes {
                c.episodes = n;
            }
            commands::sweep(&c, &out)
        }
        Command::Analyze { cfg, checkpoint, out } => {
            let mut c = resolve(&cfg)?;
            if let Some(p) = checkpoint {
                c.checkpoint = Some(std::path::absolute(&p).unwrap_or(p));
            }
            commands::analyze(&c, &out)
        }
        Command::CheckProposition(args) => commands::check_proposition(&args),
        Command::ExportEmbeddings {
            cfg,
            checkpoint,
            split,
            out,
        } => {
            let mut c = resolve(&cfg)?;
            if let Some(p) = checkpoint {
                c.checkpoint = Some(std::path::absolute(&p).unwrap_or(p));
            }
            commands::export_embeddings(&c, &split, &out)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("negmargin: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
