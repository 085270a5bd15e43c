use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use clap::Args;

use negmargin_core::analysis::{
    angular_histogram, check_proposition as evaluate_proposition, confusion_profile, embeddings_csv,
    random_admissible_instance, variance_report, ConfusionProfile, PropositionInstance,
    PropositionVerdict, VARIANCE_CSV_HEADER,
};
use negmargin_core::data::{DataManifest, LabeledDataset, LoadedData, SplitTag};
use negmargin_core::model::{load_checkpoint, to_checkpoint_string, Network};
use negmargin_core::numerics::Rng;
use negmargin_core::pipeline::{
    evaluate_features, pretrain as run_pretrain, sweep_margin, EvalResult, MarginRun, SWEEP_CSV_HEADER,
};
use negmargin_core::Error;

use crate::config::RunConfig;
use crate::error::CliError;

type CliResult = Result<(), CliError>;

fn write(path: &Path, text: &str) -> Result<(), Error> {
    std::fs::write(path, text).map_err(|e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    })
}

fn prepare_out(out: &Path, cfg: &RunConfig) -> Result<(), Error> {
    std::fs::create_dir_all(out).map_err(|e| Error::Io {
        path: out.to_path_buf(),
        source: e,
    })?;
    write(&out.join("config.txt"), &cfg.to_text())
}

fn load_data(cfg: &RunConfig) -> Result<LoadedData, CliError> {
    let path = cfg
        .data
        .as_ref()
        .ok_or_else(|| CliError::Config("no dataset: pass --data or set 'data' in the config".into()))?;
    Ok(DataManifest::load(path)?.load_data()?)
}

fn load_network(cfg: &RunConfig) -> Result<Network<f64>, CliError> {
    let path = cfg.checkpoint.as_ref().ok_or_else(|| {
        CliError::Config("no checkpoint: pass --checkpoint or set 'checkpoint' in the config".into())
    })?;
    Ok(load_checkpoint(path)?)
}

fn embed(net: &Network<f64>, ds: &LabeledDataset) -> Result<LabeledDataset, Error> {
    ds.with_features(net.embed(ds.features())?)
}

/// Held-out base records, or the training records when nothing was held out.
fn base_eval_set(data: &LoadedData) -> &LabeledDataset {
    if data.splits.base_holdout.is_empty() {
        &data.splits.base_train
    } else {
        &data.splits.base_holdout
    }
}

fn eval_row(margin: f64, split: SplitTag, shot: usize, r: &EvalResult, seed: u64) -> String {
    format!(
        "{margin},{split},{shot},{},{},{},{seed}\n",
        r.mean, r.ci95, r.n_episodes
    )
}

fn ps_accuracy_csv(confusion: &ConfusionProfile<f64>, eval: &EvalResult, names: &[String]) -> String {
    let mut out = String::from("novel_class,P_js,accuracy\n");
    for (j, acc) in eval.class_accuracy().iter().enumerate() {
        let acc = acc.map(|a| a.to_string()).unwrap_or_default();
        let _ = writeln!(out, "{},{},{acc}", names[j], confusion.per_class[j]);
    }
    out
}

/// Confusion, hard-assignment, histogram and `(P_jˢ, accuracy)` files for
/// one trained network.
fn write_run_reports(
    dir: &Path,
    net: &Network<f64>,
    data: &LoadedData,
    confusion: &ConfusionProfile<f64>,
    novel_eval: Option<&EvalResult>,
    bins: usize,
) -> CliResult {
    let novel_names = data.splits.novel.class_names();
    let base_names = data.splits.base_train.class_names();
    write(&dir.join("confusion.csv"), &confusion.to_csv(novel_names, base_names)?)?;
    write(
        &dir.join("confusion_hard.csv"),
        &confusion.hard_counts_csv(novel_names, base_names)?,
    )?;
    if let Some(e) = novel_eval {
        write(&dir.join("ps_accuracy.csv"), &ps_accuracy_csv(confusion, e, novel_names))?;
    }
    if net.config().feature_dim == 2 {
        for (name, ds) in [("histogram_base.csv", base_eval_set(data)), ("histogram_novel.csv", &data.splits.novel)] {
            let z = net.embed(ds.features())?;
            let h = angular_histogram(&z, ds.labels(), ds.num_classes(), bins)?;
            write(&dir.join(name), &h.to_csv(ds.class_names())?)?;
        }
    }
    Ok(())
}

pub fn pretrain(cfg: &RunConfig, out: &Path) -> CliResult {
    let data = load_data(cfg)?;
    prepare_out(out, cfg)?;
    let pre = cfg.pretrain_config(data.full.dim());
    let holdout = (!data.splits.base_holdout.is_empty()).then_some(&data.splits.base_holdout);
    let (net, log) = run_pretrain(&data.splits.base_train, holdout, &pre)?;
    write(&out.join("checkpoint.txt"), &to_checkpoint_string(&net))?;
    write(&out.join("training_log.csv"), &log.to_csv())?;
    if let Some(last) = log.epochs.last() {
        println!("epoch {} loss {:.6}", last.epoch, last.loss);
    }
    Ok(())
}

pub fn finetune_eval(cfg: &RunConfig, out: &Path) -> CliResult {
    let data = load_data(cfg)?;
    let net = load_network(cfg)?;
    prepare_out(out, cfg)?;
    let ds = match cfg.eval_split {
        SplitTag::Novel => &data.splits.novel,
        SplitTag::Base => base_eval_set(&data),
        SplitTag::Val => &data.splits.val,
    };
    let spec = cfg.episode_spec(cfg.eval_split);
    let result = evaluate_features(&embed(&net, ds)?, &spec, &cfg.finetune_config())?;
    let mut csv = format!("{SWEEP_CSV_HEADER}\n");
    csv.push_str(&eval_row(cfg.margin, cfg.eval_split, spec.shot, &result, cfg.seed));
    write(&out.join("eval.csv"), &csv)?;
    let mut episodes = String::from("episode,accuracy\n");
    for (i, a) in result.accuracies.iter().enumerate() {
        let _ = writeln!(episodes, "{i},{a}");
    }
    write(&out.join("episodes.csv"), &episodes)?;
    println!(
        "{}-way {}-shot {}: {:.2}% ± {:.2}% over {} episodes",
        spec.way,
        spec.shot,
        cfg.eval_split,
        100.0 * result.mean,
        100.0 * result.ci95,
        result.n_episodes
    );
    Ok(())
}

fn run_dir_name(run: &MarginRun) -> String {
    format!("seed{}_m{}", run.seed, run.margin)
}

pub fn sweep(cfg: &RunConfig, out: &Path) -> CliResult {
    let data = load_data(cfg)?;
    prepare_out(out, cfg)?;
    let sweep_cfg = cfg.sweep_config(data.full.dim());
    let result = sweep_margin(&data.splits, &sweep_cfg)?;
    write(&out.join("sweep.csv"), &result.to_csv())?;
    write(&out.join("variance.csv"), &result.variance_csv())?;
    write(&out.join("failures.csv"), &result.failures_csv())?;
    for run in &result.runs {
        let dir = out.join("runs").join(run_dir_name(run));
        std::fs::create_dir_all(&dir).map_err(|e| Error::Io {
            path: dir.clone(),
            source: e,
        })?;
        write(&dir.join("checkpoint.txt"), &to_checkpoint_string(&run.network))?;
        write(&dir.join("training_log.csv"), &run.log.to_csv())?;
        let shot = sweep_cfg.shots[0];
        write_run_reports(
            &dir,
            &run.network,
            &data,
            &run.confusion,
            run.evaluation(SplitTag::Novel, shot),
            cfg.histogram_bins,
        )?;
    }
    for f in &result.failures {
        eprintln!("negmargin: margin {} seed {} failed: {}", f.margin, f.seed, f.error);
    }
    println!(
        "{} runs completed, {} failed; results in {}",
        result.runs.len(),
        result.failures.len(),
        out.display()
    );
    Ok(())
}

pub fn analyze(cfg: &RunConfig, out: &Path) -> CliResult {
    let data = load_data(cfg)?;
    let net = load_network(cfg)?;
    prepare_out(out, cfg)?;
    let base = embed(&net, base_eval_set(&data))?;
    let novel = embed(&net, &data.splits.novel)?;
    let mut csv = format!("{VARIANCE_CSV_HEADER}\n");
    for (ds, tag) in [(&base, SplitTag::Base), (&novel, SplitTag::Novel)] {
        let r = variance_report(ds.features(), ds.labels(), ds.num_classes(), tag, cfg.margin)?;
        csv.push_str(&r.csv_row());
        csv.push('\n');
    }
    write(&out.join("variance.csv"), &csv)?;
    let confusion = confusion_profile(&net, &data.splits.novel, cfg.temperature)?;
    let eval = evaluate_features(&novel, &cfg.episode_spec(SplitTag::Novel), &cfg.finetune_config())?;
    write_run_reports(out, &net, &data, &confusion, Some(&eval), cfg.histogram_bins)?;
    println!("Ps = {}", confusion.p_s);
    Ok(())
}

pub fn export_embeddings(cfg: &RunConfig, split: &str, out: &Path) -> CliResult {
    let data = load_data(cfg)?;
    let net = load_network(cfg)?;
    let ds = match split {
        "base" => data.splits.base_train.clone(),
        "holdout" => data.splits.base_holdout.clone(),
        "novel" => data.splits.novel.clone(),
        "val" => data.splits.val.clone(),
        "all" => data.full.clone(),
        other => {
            return Err(CliError::Config(format!(
                "unknown split '{other}' (expected base, holdout, novel, val or all)"
            )))
        }
    };
    write(out, &embeddings_csv(&net, &ds)?)?;
    Ok(())
}

#[derive(Args, Clone, Debug)]
pub struct PropositionArgs {
    /// Check this many random admissible instances with Pˢ drawn below the threshold.
    #[arg(long)]
    pub random_instances: Option<usize>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, allow_hyphen_values = true)]
    pub m1: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub m2: Option<f64>,
    /// Base `D_inter,D_intra` at m1.
    #[arg(long)]
    pub base_m1: Option<String>,
    /// Base `D_inter,D_intra` at m2.
    #[arg(long)]
    pub base_m2: Option<String>,
    /// Novel `D_inter` at m1 and m2, comma separated.
    #[arg(long)]
    pub novel_inter: Option<String>,
    #[arg(long)]
    pub ps: Option<f64>,
    /// Directory for proposition.csv.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn pair(name: &str, v: &Option<String>) -> Result<(f64, f64), CliError> {
    let raw = v
        .as_ref()
        .ok_or_else(|| CliError::Config(format!("--{name} is required")))?;
    let parts: Vec<f64> = raw
        .split(',')
        .map(|s| s.trim().parse::<f64>())
        .collect::<Result<_, _>>()
        .map_err(|_| CliError::Config(format!("--{name} expects two numbers, got '{raw}'")))?;
    match parts[..] {
        [a, b] => Ok((a, b)),
        _ => Err(CliError::Config(format!("--{name} expects two numbers, got '{raw}'"))),
    }
}

const PROPOSITION_CSV_HEADER: &str = "instance,m1,m2,r,t,threshold,p_s,predicted,phi_novel_m1,phi_novel_m2,holds";

fn verdict_row(i: usize, inst: &PropositionInstance<f64>, p_s: f64, v: &PropositionVerdict<f64>) -> String {
    match v {
        PropositionVerdict::Evaluated {
            r,
            t,
            threshold,
            predicted,
            phi_novel_m1,
            phi_novel_m2,
            holds,
        } => format!(
            "{i},{},{},{r},{t},{threshold},{p_s},{predicted},{phi_novel_m1},{phi_novel_m2},{holds}\n",
            inst.m1, inst.m2
        ),
        PropositionVerdict::NotApplicable { r, t, .. } => {
            format!("{i},{},{},{r},{t},,{p_s},not_applicable,,,\n", inst.m1, inst.m2)
        }
    }
}

pub fn check_proposition(args: &PropositionArgs) -> CliResult {
    let mut csv = format!("{PROPOSITION_CSV_HEADER}\n");
    if let Some(n) = args.random_instances {
        let mut rng = Rng::new(args.seed).child("proposition");
        let mut agree = 0usize;
        for i in 0..n {
            let inst = random_admissible_instance(&mut rng);
            let p_s = rng.uniform_in(1e-6, 1.0) * inst.threshold().min(1.0);
            let v = check_proposition_inner(&inst, p_s)?;
            if let PropositionVerdict::Evaluated { predicted, holds, .. } = v {
                if predicted == holds {
                    agree += 1;
                }
            }
            csv.push_str(&verdict_row(i, &inst, p_s, &v));
        }
        println!(
            "{n} random instances below threshold: direct inequality agrees in {agree} ({:.2}%)",
            if n == 0 { 100.0 } else { 100.0 * agree as f64 / n as f64 }
        );
    } else {
        let inst = PropositionInstance {
            m1: args.m1.ok_or_else(|| CliError::Config("--m1 is required".into()))?,
            m2: args.m2.ok_or_else(|| CliError::Config("--m2 is required".into()))?,
            base_m1: pair("base-m1", &args.base_m1)?,
            base_m2: pair("base-m2", &args.base_m2)?,
            novel_inter_m1: pair("novel-inter", &args.novel_inter)?.0,
            novel_inter_m2: pair("novel-inter", &args.novel_inter)?.1,
        };
        let p_s = args.ps.ok_or_else(|| CliError::Config("--ps is required".into()))?;
        let v = check_proposition_inner(&inst, p_s)?;
        match &v {
            PropositionVerdict::Evaluated {
                threshold,
                predicted,
                phi_novel_m1,
                phi_novel_m2,
                holds,
                ..
            } => println!(
                "threshold {threshold}; Ps {p_s} below threshold: {predicted}; \
                 phi_novel(m1) {phi_novel_m1}, phi_novel(m2) {phi_novel_m2}; decreasing: {holds}"
            ),
            PropositionVerdict::NotApplicable { reason, .. } => println!("{reason}"),
        }
        csv.push_str(&verdict_row(0, &inst, p_s, &v));
    }
    if let Some(out) = &args.out {
        std::fs::create_dir_all(out).map_err(|e| Error::Io {
            path: out.clone(),
            source: e,
        })?;
        write(&out.join("proposition.csv"), &csv)?;
    }
    Ok(())
}

fn check_proposition_inner(
    inst: &PropositionInstance<f64>,
    p_s: f64,
) -> Result<PropositionVerdict<f64>, CliError> {
    Ok(evaluate_proposition(inst, p_s)?)
}
