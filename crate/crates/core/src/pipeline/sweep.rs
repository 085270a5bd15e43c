use std::fmt::Write as _;

use rayon::prelude::*;

use super::{evaluate_features, pretrain, EpisodeSpec, EvalResult, FinetuneConfig, PretrainConfig, TrainingLog};
use crate::analysis::{confusion_profile, variance_report, AnalysisReport, ConfusionProfile};
use crate::data::{ensure_class_disjoint, LabeledDataset, SplitTag, Splits};
use crate::error::{ensure, Result};
use crate::model::Network;

/// A grid of margins trained and evaluated under otherwise identical
/// settings, once per seed.
#[derive(Clone, Debug, PartialEq)]
pub struct SweepConfig {
    pub margins: Vec<f64>,
    pub seeds: Vec<u64>,
    /// The margin and seed are replaced per run.
    pub pretrain: PretrainConfig,
    /// The seed is replaced per run.
    pub finetune: FinetuneConfig,
    /// Episode shapes for novel and held-out base records; `shot` is
    /// replaced by each entry of `shots`.
    pub novel_episodes: EpisodeSpec,
    pub base_episodes: EpisodeSpec,
    pub shots: Vec<usize>,
}

#[derive(Clone, Debug)]
pub struct Evaluation {
    pub split: SplitTag,
    pub shot: usize,
    pub result: EvalResult,
}

/// Everything produced by one `(seed, margin)` run.
#[derive(Clone, Debug)]
pub struct MarginRun {
    pub margin: f64,
    pub seed: u64,
    pub network: Network<f64>,
    pub log: TrainingLog,
    pub evaluations: Vec<Evaluation>,
    pub base_report: AnalysisReport<f64>,
    pub novel_report: AnalysisReport<f64>,
    pub confusion: ConfusionProfile<f64>,
}

impl MarginRun {
    pub fn evaluation(&self, split: SplitTag, shot: usize) -> Option<&EvalResult> {
        self.evaluations
            .iter()
            .find(|e| e.split == split && e.shot == shot)
            .map(|e| &e.result)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepFailure {
    pub margin: f64,
    pub seed: u64,
    pub error: String,
}

#[derive(Clone, Debug, Default)]
pub struct SweepResult {
    /// Ordered by seed (as configured), then ascending margin.
    pub runs: Vec<MarginRun>,
    pub failures: Vec<SweepFailure>,
}

pub const SWEEP_CSV_HEADER: &str = "margin,split,shot,mean_acc,ci95,n_episodes,seed";

impl SweepResult {
    /// `margin,split,shot,mean_acc,ci95,n_episodes,seed`.
    pub fn to_csv(&self) -> String {
        let mut out = format!("{SWEEP_CSV_HEADER}\n");
        for run in &self.runs {
            for e in &run.evaluations {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{}",
                    run.margin, e.split, e.shot, e.result.mean, e.result.ci95, e.result.n_episodes, run.seed
                );
            }
        }
        out
    }

    /// `margin,split,D_inter,D_intra,phi,seed` for base and novel features.
    pub fn variance_csv(&self) -> String {
        let mut out = format!("{},seed\n", crate::analysis::VARIANCE_CSV_HEADER);
        for run in &self.runs {
            for r in [&run.base_report, &run.novel_report] {
                let _ = writeln!(out, "{},{}", r.csv_row(), run.seed);
            }
        }
        out
    }

    /// `margin,seed,error` for runs that failed.
    pub fn failures_csv(&self) -> String {
        let mut out = String::from("margin,seed,error\n");
        for f in &self.failures {
            let _ = writeln!(out, "{},{},\"{}\"", f.margin, f.seed, f.error.replace('"', "'"));
        }
        out
    }

    /// Runs for one seed, ascending in margin.
    pub fn runs_for_seed(&self, seed: u64) -> Vec<&MarginRun> {
        self.runs.iter().filter(|r| r.seed == seed).collect()
    }
}

fn embedded(net: &Network<f64>, ds: &LabeledDataset) -> Result<LabeledDataset> {
    ds.with_features(net.embed(ds.features())?)
}

/// Pretrains at `margin` with `seed`, then evaluates and analyses the
/// frozen features on held-out base records and on novel records.
pub fn run_margin(splits: &Splits, cfg: &SweepConfig, margin: f64, seed: u64) -> Result<MarginRun> {
    ensure_class_disjoint(&splits.base_train, &splits.novel)?;
    let pre = PretrainConfig {
        loss: cfg.pretrain.loss.with_margin(margin),
        seed,
        ..cfg.pretrain.clone()
    };
    let holdout = (!splits.base_holdout.is_empty()).then_some(&splits.base_holdout);
    let (network, log) = pretrain(&splits.base_train, holdout, &pre)?;
    let ft = FinetuneConfig {
        seed,
        ..cfg.finetune.clone()
    };

    let novel_z = embedded(&network, &splits.novel)?;
    let base_eval_set = holdout.unwrap_or(&splits.base_train);
    let base_z = embedded(&network, base_eval_set)?;
    let mut evaluations = Vec::new();
    for &shot in &cfg.shots {
        for (split, data, spec) in [
            (SplitTag::Novel, &novel_z, cfg.novel_episodes),
            (SplitTag::Base, &base_z, cfg.base_episodes),
        ] {
            let result = evaluate_features(data, &EpisodeSpec { shot, ..spec }, &ft)?;
            evaluations.push(Evaluation { split, shot, result });
        }
    }
    let base_report = variance_report(
        base_z.features(),
        base_z.labels(),
        base_z.num_classes(),
        SplitTag::Base,
        margin,
    )?;
    let novel_report = variance_report(
        novel_z.features(),
        novel_z.labels(),
        novel_z.num_classes(),
        SplitTag::Novel,
        margin,
    )?;
    let confusion = confusion_profile(&network, &splits.novel, pre.loss.temperature)?;
    Ok(MarginRun {
        margin,
        seed,
        network,
        log,
        evaluations,
        base_report,
        novel_report,
        confusion,
    })
}

/// Runs every `(seed, margin)` pair concurrently. A failing run is
/// recorded in `failures` and the others continue.
pub fn sweep_margin(splits: &Splits, cfg: &SweepConfig) -> Result<SweepResult> {
    ensure!(!cfg.margins.is_empty(), "margin grid is empty");
    ensure!(!cfg.seeds.is_empty(), "no seeds");
    ensure!(!cfg.shots.is_empty(), "no shots");
    ensure!(
        cfg.margins.iter().all(|m| m.is_finite()),
        "margins must be finite"
    );
    ensure_class_disjoint(&splits.base_train, &splits.novel)?;
    let mut margins = cfg.margins.clone();
    margins.sort_by(f64::total_cmp);
    margins.dedup();
    let jobs: Vec<(u64, f64)> = cfg
        .seeds
        .iter()
        .flat_map(|&s| margins.iter().map(move |&m| (s, m)))
        .collect();
    let outcomes: Vec<Result<MarginRun>> = jobs
        .par_iter()
        .map(|&(seed, margin)| run_margin(splits, cfg, margin, seed))
        .collect();
    let mut result = SweepResult::default();
    for ((seed, margin), outcome) in jobs.into_iter().zip(outcomes) {
        match outcome {
            Ok(run) => result.runs.push(run),
            Err(e) => result.failures.push(SweepFailure {
                margin,
                seed,
                error: e.to_string(),
            }),
        }
    }
    Ok(result)
}
