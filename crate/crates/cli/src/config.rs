//! Run configuration: `key = value` lines, `#` comments, every key
//! optional. Relative paths in a file resolve against its directory,
//! those given on the command line against the working directory.
//! [`RunConfig::to_text`] writes the effective configuration
//! back in the same format; reading that text reproduces the config.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use negmargin_core::data::SplitTag;
use negmargin_core::kv::parse_kv;
use negmargin_core::loss::LossSpec;
use negmargin_core::model::{Activation, BackboneConfig, SimilarityKind};
use negmargin_core::optim::{OptimConfig, WeightDecayMode};
use negmargin_core::pipeline::{EpisodeSpec, FinetuneConfig, PretrainConfig, SweepConfig};

use crate::error::CliError;
use crate::grid::{format_list, parse_grid};

pub const SEED_ENV: &str = "NEGMARGIN_SEED";

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    /// Dataset manifest.
    pub data: Option<PathBuf>,
    /// Checkpoint read by evaluation and analysis commands.
    pub checkpoint: Option<PathBuf>,
    pub hidden_dims: Vec<usize>,
    pub feature_dim: usize,
    pub activation: Activation,
    pub similarity: SimilarityKind,
    pub temperature: f64,
    pub margin: f64,
    pub label_smoothing: f64,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub adam_eps: f64,
    pub weight_decay: f64,
    pub decay_mode: WeightDecayMode,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub finetune_margin: f64,
    pub finetune_temperature: f64,
    pub finetune_lr: f64,
    pub finetune_weight_decay: f64,
    pub finetune_steps: usize,
    pub way: usize,
    pub base_way: usize,
    pub shot: usize,
    pub query: usize,
    pub episodes: usize,
    pub eval_split: SplitTag,
    pub margins: Vec<f64>,
    pub seeds: Vec<u64>,
    pub shots: Vec<usize>,
    pub histogram_bins: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            data: None,
            checkpoint: None,
            hidden_dims: vec![128, 64],
            feature_dim: 2,
            activation: Activation::Relu,
            similarity: SimilarityKind::Cosine,
            temperature: 8.0,
            margin: 0.0,
            label_smoothing: 0.0,
            lr: 3e-3,
            beta1: 0.9,
            beta2: 0.999,
            adam_eps: 1e-8,
            weight_decay: 5e-4,
            decay_mode: WeightDecayMode::Decoupled,
            epochs: 20,
            batch_size: 128,
            seed: 0,
            finetune_margin: 0.0,
            finetune_temperature: 8.0,
            finetune_lr: 0.5,
            finetune_weight_decay: 0.0,
            finetune_steps: 100,
            way: 5,
            base_way: 5,
            shot: 1,
            query: 16,
            episodes: 600,
            eval_split: SplitTag::Novel,
            margins: vec![-0.5, -0.3, -0.1, 0.0, 0.1, 0.3],
            seeds: vec![0],
            shots: vec![1, 5],
            histogram_bins: 72,
        }
    }
}

/// Where a setting came from: a config line, or 0 for the command line.
fn origin(line: usize) -> String {
    if line == 0 {
        "(command line)".to_string()
    } else {
        format!("(line {line})")
    }
}

fn parse_value<V: std::str::FromStr>(key: &str, value: &str, line: usize) -> Result<V, CliError> {
    value.parse().map_err(|_| {
        CliError::Config(format!("invalid value '{value}' for key '{key}' {}", origin(line)))
    })
}

fn parse_list<V: std::str::FromStr>(key: &str, value: &str, line: usize) -> Result<Vec<V>, CliError> {
    value
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| parse_value(key, s, line))
        .collect()
}

fn parse_enum<V>(key: &str, value: &str, line: usize) -> Result<V, CliError>
where
    V: std::str::FromStr<Err = negmargin_core::Error>,
{
    value
        .parse()
        .map_err(|e: negmargin_core::Error| CliError::Config(format!("{e} for key '{key}' {}", origin(line))))
}

impl RunConfig {
    /// Defaults, with the seed taken from `NEGMARGIN_SEED` when set.
    pub fn from_env() -> Result<Self, CliError> {
        let mut cfg = Self::default();
        if let Ok(v) = std::env::var(SEED_ENV) {
            cfg.seed = v
                .trim()
                .parse()
                .map_err(|_| CliError::Config(format!("{SEED_ENV}='{v}' is not an unsigned integer")))?;
            cfg.seeds = vec![cfg.seed];
        }
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| negmargin_core::Error::Io {
            path: path.to_path_buf(),
            source: e,
        })?;
        let mut cfg = Self::from_env()?;
        cfg.apply_text(&text, &path.display().to_string())?;
        // Paths inside a config file are relative to the file.
        let dir = path.parent().unwrap_or(Path::new(""));
        for p in [&mut cfg.data, &mut cfg.checkpoint].into_iter().flatten() {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn apply_text(&mut self, text: &str, path: &str) -> Result<(), CliError> {
        let entries = parse_kv(text, path).map_err(|e| CliError::Config(e.to_string()))?;
        let has_temperature = entries.iter().any(|e| e.key == "temperature");
        let has_ft_temperature = entries.iter().any(|e| e.key == "finetune_temperature");
        for e in &entries {
            self.set(&e.key, &e.value, e.line)?;
        }
        if has_temperature && !has_ft_temperature {
            self.finetune_temperature = self.temperature;
        }
        Ok(())
    }

    /// Sets one key; `line` only labels error messages (0 for command-line
    /// overrides).
    pub fn set(&mut self, key: &str, value: &str, line: usize) -> Result<(), CliError> {
        let v = value.trim();
        match key {
            "data" => self.data = Some(PathBuf::from(v)),
            "checkpoint" => self.checkpoint = Some(PathBuf::from(v)),
            "hidden_dims" => self.hidden_dims = if v == "-" { Vec::new() } else { parse_list(key, v, line)? },
            "feature_dim" => self.feature_dim = parse_value(key, v, line)?,
            "activation" => self.activation = parse_enum(key, v, line)?,
            "similarity" => self.similarity = parse_enum(key, v, line)?,
            "temperature" => self.temperature = parse_value(key, v, line)?,
            "margin" => self.margin = parse_value(key, v, line)?,
            "label_smoothing" => self.label_smoothing = parse_value(key, v, line)?,
            "lr" => self.lr = parse_value(key, v, line)?,
            "beta1" => self.beta1 = parse_value(key, v, line)?,
            "beta2" => self.beta2 = parse_value(key, v, line)?,
            "adam_eps" => self.adam_eps = parse_value(key, v, line)?,
            "weight_decay" => self.weight_decay = parse_value(key, v, line)?,
            "decay_mode" => self.decay_mode = parse_enum(key, v, line)?,
            "epochs" => self.epochs = parse_value(key, v, line)?,
            "batch_size" => self.batch_size = parse_value(key, v, line)?,
            "seed" => self.seed = parse_value(key, v, line)?,
            "finetune_margin" => self.finetune_margin = parse_value(key, v, line)?,
            "finetune_temperature" => self.finetune_temperature = parse_value(key, v, line)?,
            "finetune_lr" => self.finetune_lr = parse_value(key, v, line)?,
            "finetune_weight_decay" => self.finetune_weight_decay = parse_value(key, v, line)?,
            "finetune_steps" => self.finetune_steps = parse_value(key, v, line)?,
            "way" => self.way = parse_value(key, v, line)?,
            "base_way" => self.base_way = parse_value(key, v, line)?,
            "shot" => self.shot = parse_value(key, v, line)?,
            "query" => self.query = parse_value(key, v, line)?,
            "episodes" => self.episodes = parse_value(key, v, line)?,
            "eval_split" => self.eval_split = parse_enum(key, v, line)?,
            "margins" => {
                self.margins = parse_grid(v)
                    .map_err(|m| CliError::Config(format!("{m} for key 'margins' {}", origin(line))))?
            }
            "seeds" => self.seeds = parse_list(key, v, line)?,
            "shots" => self.shots = parse_list(key, v, line)?,
            "histogram_bins" => self.histogram_bins = parse_value(key, v, line)?,
            other => {
                return Err(CliError::Config(format!("unknown key '{other}' {}", origin(line))));
            }
        }
        Ok(())
    }

    /// Effective configuration in the input format.
    pub fn to_text(&self) -> String {
        let hidden = if self.hidden_dims.is_empty() {
            "-".to_string()
        } else {
            format_list(&self.hidden_dims)
        };
        let mut out = String::from("# effective configuration\n");
        let mut kv = |k: &str, v: String| {
            let _ = writeln!(out, "{k} = {v}");
        };
        if let Some(p) = &self.data {
            kv("data", p.display().to_string());
        }
        if let Some(p) = &self.checkpoint {
            kv("checkpoint", p.display().to_string());
        }
        kv("hidden_dims", hidden);
        kv("feature_dim", self.feature_dim.to_string());
        kv("activation", self.activation.to_string());
        kv("similarity", self.similarity.to_string());
        kv("temperature", self.temperature.to_string());
        kv("margin", self.margin.to_string());
        kv("label_smoothing", self.label_smoothing.to_string());
        kv("lr", self.lr.to_string());
        kv("beta1", self.beta1.to_string());
        kv("beta2", self.beta2.to_string());
        kv("adam_eps", self.adam_eps.to_string());
        kv("weight_decay", self.weight_decay.to_string());
        kv("decay_mode", self.decay_mode.to_string());
        kv("epochs", self.epochs.to_string());
        kv("batch_size", self.batch_size.to_string());
        kv("seed", self.seed.to_string());
        kv("finetune_margin", self.finetune_margin.to_string());
        kv("finetune_temperature", self.finetune_temperature.to_string());
        kv("finetune_lr", self.finetune_lr.to_string());
        kv("finetune_weight_decay", self.finetune_weight_decay.to_string());
        kv("finetune_steps", self.finetune_steps.to_string());
        kv("way", self.way.to_string());
        kv("base_way", self.base_way.to_string());
        kv("shot", self.shot.to_string());
        kv("query", self.query.to_string());
        kv("episodes", self.episodes.to_string());
        kv("eval_split", self.eval_split.to_string());
        kv("margins", format_list(&self.margins));
        kv("seeds", format_list(&self.seeds));
        kv("shots", format_list(&self.shots));
        kv("histogram_bins", self.histogram_bins.to_string());
        out
    }

    pub fn backbone(&self, input_dim: usize) -> BackboneConfig {
        BackboneConfig {
            input_dim,
            hidden_dims: self.hidden_dims.clone(),
            feature_dim: self.feature_dim,
            activation: self.activation,
        }
    }

    pub fn pretrain_config(&self, input_dim: usize) -> PretrainConfig {
        PretrainConfig {
            backbone: self.backbone(input_dim),
            loss: LossSpec {
                margin: self.margin,
                temperature: self.temperature,
                similarity: self.similarity,
                label_smoothing: self.label_smoothing,
            },
            optim: OptimConfig {
                lr0: self.lr,
                beta1: self.beta1,
                beta2: self.beta2,
                eps: self.adam_eps,
                weight_decay: self.weight_decay,
                decay_mode: self.decay_mode,
                total_steps: 1,
            },
            epochs: self.epochs,
            batch_size: self.batch_size,
            seed: self.seed,
        }
    }

    pub fn finetune_config(&self) -> FinetuneConfig {
        let mut ft = FinetuneConfig::new(self.similarity, self.finetune_temperature);
        ft.loss.margin = self.finetune_margin;
        ft.optim.lr0 = self.finetune_lr;
        ft.optim.beta1 = self.beta1;
        ft.optim.beta2 = self.beta2;
        ft.optim.eps = self.adam_eps;
        ft.optim.weight_decay = self.finetune_weight_decay;
        ft.optim.decay_mode = self.decay_mode;
        ft.steps = self.finetune_steps;
        ft.seed = self.seed;
        ft
    }

    pub fn episode_spec(&self, split: SplitTag) -> EpisodeSpec {
        EpisodeSpec {
            way: if split == SplitTag::Base { self.base_way } else { self.way },
            shot: self.shot,
            query: self.query,
            n_episodes: self.episodes,
        }
    }

    pub fn sweep_config(&self, input_dim: usize) -> SweepConfig {
        SweepConfig {
            margins: self.margins.clone(),
            seeds: self.seeds.clone(),
            pretrain: self.pretrain_config(input_dim),
            finetune: self.finetune_config(),
            novel_episodes: self.episode_spec(SplitTag::Novel),
            base_episodes: self.episode_spec(SplitTag::Base),
            shots: self.shots.clone(),
        }
    }
}
