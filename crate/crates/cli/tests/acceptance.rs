//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion.
//! With `NEGMARGIN_ACCEPTANCE_STRICT=1` the run exits nonzero if any fails.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::time::Instant;

use negmargin_core::analysis::{
    check_proposition, random_admissible_instance, spearman, variance_report, PropositionVerdict,
};
use negmargin_core::data::SplitTag;
use negmargin_core::loss::{loss_monotonicity_witness, margin_loss, margin_loss_value, LossSpec};
use negmargin_core::model::{Activation, BackboneConfig, Network, SimilarityKind};
use negmargin_core::numerics::{Matrix, Rng};
use negmargin_core::optim::Parameters;
use negmargin_core::pipeline::{ci95, EvalResult};

type Outcome = Result<String, String>;

fn random_matrix(rng: &mut Rng, rows: usize, cols: usize, scale: f64) -> Matrix<f64> {
    Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| scale * rng.normal()).collect()).unwrap()
}

fn batch_loss(net: &Network<f64>, x: &Matrix<f64>, y: &[usize], spec: &LossSpec<f64>) -> f64 {
    margin_loss_value(&net.scores(x).unwrap(), y, spec).unwrap()
}

fn gradient_exactness() -> Outcome {
    const H: f64 = 1e-5;
    // Relative error |a − f| / max(|a|, |f|, 1e-4); the floor keeps
    // near-zero entries from dividing roundoff by roundoff.
    let mut rng = Rng::new(1);
    let mut worst = 0.0f64;
    let mut checked = 0usize;
    let mut nets = 0usize;
    for i in 0..24 {
        for similarity in [SimilarityKind::Cosine, SimilarityKind::InnerProduct] {
            let input_dim = 3 + rng.below(3);
            let hidden: Vec<usize> = (0..rng.below(3)).map(|_| 3 + rng.below(3)).collect();
            let classes = 3 + rng.below(3);
            let cfg = BackboneConfig {
                input_dim,
                hidden_dims: hidden,
                feature_dim: 2 + rng.below(2),
                activation: if i % 2 == 0 { Activation::Tanh } else { Activation::Relu },
            };
            let mut net = Network::new(cfg, classes, similarity, &mut rng).unwrap();
            // Fresh biases are zero, which puts dead ReLU rows exactly on
            // the kink; jitter every parameter off it.
            net.visit_parameters(&mut |_, p, _| {
                for v in p.as_mut_slice() {
                    *v += 0.3 * rng.normal();
                }
                Ok(())
            })
            .unwrap();
            let x = random_matrix(&mut rng, 6, input_dim, 1.0);
            let y: Vec<usize> = (0..6).map(|_| rng.below(classes)).collect();
            let spec = LossSpec {
                margin: rng.uniform_in(-0.5, 0.5),
                temperature: if similarity == SimilarityKind::Cosine { 8.0 } else { 1.0 },
                similarity,
                label_smoothing: if rng.uniform() < 0.5 { 0.0 } else { 0.1 },
            };
            let out = net.forward(&x).unwrap();
            let lo = margin_loss(&out.scores, &y, &spec).unwrap();
            net.backward(&lo.grad_scores).unwrap();
            let mut analytic = Vec::new();
            net.visit_parameters(&mut |_, _, g| {
                analytic.extend_from_slice(g.as_slice());
                Ok(())
            })
            .unwrap();
            for (k, &a) in analytic.iter().enumerate() {
                let loss_at = |net: &mut Network<f64>, delta: f64| {
                    let mut idx = 0usize;
                    net.visit_parameters(&mut |_, p, _| {
                        let len = p.as_slice().len();
                        if (idx..idx + len).contains(&k) {
                            p.as_mut_slice()[k - idx] += delta;
                        }
                        idx += len;
                        Ok(())
                    })
                    .unwrap();
                    batch_loss(net, &x, &y, &spec)
                };
                let plus = loss_at(&mut net, H);
                let minus = loss_at(&mut net, -2.0 * H);
                loss_at(&mut net, H);
                let fd = (plus - minus) / (2.0 * H);
                let rel = (a - fd).abs() / a.abs().max(fd.abs()).max(1e-4);
                worst = worst.max(rel);
                checked += 1;
            }
            nets += 1;
        }
    }
    let detail = format!("{nets} networks, {checked} parameters, max relative error {worst:.2e}");
    if worst <= 1e-6 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn plain_cross_entropy(logits: &[f64], y: usize) -> f64 {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|l| (l - max).exp()).sum::<f64>().ln();
    lse - logits[y]
}

fn zero_margin_reduction() -> Outcome {
    let mut rng = Rng::new(2);
    let mut worst = 0.0f64;
    for _ in 0..1000 {
        let n = 1 + rng.below(8);
        let c = 2 + rng.below(6);
        let beta = rng.uniform_in(0.5, 20.0);
        let s = random_matrix(&mut rng, n, c, 1.0);
        let y: Vec<usize> = (0..n).map(|_| rng.below(c)).collect();
        let spec = LossSpec {
            margin: 0.0,
            temperature: beta,
            similarity: SimilarityKind::Cosine,
            label_smoothing: 0.0,
        };
        let got = margin_loss_value(&s, &y, &spec).unwrap();
        let expected = (0..n)
            .map(|i| {
                let logits: Vec<f64> = s.row(i).iter().map(|v| beta * v).collect();
                plain_cross_entropy(&logits, y[i])
            })
            .sum::<f64>()
            / n as f64;
        worst = worst.max((got - expected).abs());
    }
    let detail = format!("1000 batches, max |difference| {worst:.2e}");
    if worst <= 1e-12 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn loss_monotonicity() -> Outcome {
    let mut rng = Rng::new(3);
    let mut violations = 0usize;
    let mut pairs = 0usize;
    for _ in 0..20 {
        let n = 1 + rng.below(10);
        let c = 2 + rng.below(5);
        let s = random_matrix(&mut rng, n, c, 1.0);
        let y: Vec<usize> = (0..n).map(|_| rng.below(c)).collect();
        let spec = LossSpec {
            margin: 0.0,
            temperature: rng.uniform_in(1.0, 16.0),
            similarity: SimilarityKind::Cosine,
            label_smoothing: if rng.uniform() < 0.5 { 0.0 } else { 0.1 },
        };
        for _ in 0..100 {
            let a = rng.uniform_in(-1.0, 1.0);
            let b = rng.uniform_in(-1.0, 1.0);
            if a == b {
                continue;
            }
            let w = loss_monotonicity_witness(&s, &y, &spec, a.min(b), a.max(b)).unwrap();
            pairs += 1;
            if w.loss_low > w.loss_high + 1e-12 {
                violations += 1;
            }
        }
    }
    let detail = format!("{pairs} margin pairs over 20 batches, {violations} violations");
    if violations == 0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn proposition_oracle() -> Outcome {
    let mut rng = Rng::new(4);
    let mut holds = 0usize;
    let n = 1000;
    for _ in 0..n {
        let inst = random_admissible_instance(&mut rng);
        let p_s = inst.threshold().min(1.0) * rng.uniform_in(1e-9, 1.0);
        match check_proposition(&inst, p_s) {
            Ok(PropositionVerdict::Evaluated {
                predicted: true,
                holds: true,
                ..
            }) => holds += 1,
            other => return Err(format!("instance {inst:?} with Ps {p_s}: {other:?}")),
        }
    }
    Ok(format!("{holds}/{n} instances satisfy the direct inequality"))
}

fn confidence_interval() -> Outcome {
    let r = EvalResult::from_accuracies(vec![0.8, 0.9, 1.0]).map_err(|e| e.to_string())?;
    let oracle = 1.96 * 0.1 / 3f64.sqrt();
    let detail = format!("ci95 {:.7} (oracle {oracle:.7}, mean {})", r.ci95, r.mean);
    if (r.ci95 - 0.11316).abs() <= 1e-5 && (ci95(&[0.8, 0.9, 1.0]) - oracle).abs() <= 1e-12 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn variance_oracle() -> Outcome {
    let mut rng = Rng::new(8);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let c = 2 + rng.below(5);
        let d = 2 + rng.below(6);
        let per = 2 + rng.below(10);
        let n = c * per;
        let labels: Vec<usize> = (0..n).map(|i| i % c).collect();
        let x = random_matrix(&mut rng, n, d, 1.0);
        let r = variance_report(&x, &labels, c, SplitTag::Base, 0.0).unwrap();

        let unit: Vec<Vec<f64>> = (0..n)
            .map(|i| {
                let norm = x.row(i).iter().map(|v| v * v).sum::<f64>().sqrt();
                x.row(i).iter().map(|v| v / norm).collect()
            })
            .collect();
        let mut mu = vec![vec![0.0; d]; c];
        for i in 0..n {
            for k in 0..d {
                mu[labels[i]][k] += unit[i][k] / per as f64;
            }
        }
        let mut inter = 0.0;
        for j in 0..c {
            for l in 0..c {
                if j != l {
                    for k in 0..d {
                        inter += (mu[j][k] - mu[l][k]).powi(2);
                    }
                }
            }
        }
        inter /= (c * (c - 1)) as f64;
        let mut intra = 0.0;
        for i in 0..n {
            for k in 0..d {
                intra += (unit[i][k] - mu[labels[i]][k]).powi(2);
            }
        }
        intra /= n as f64;
        worst = worst
            .max((r.d_inter - inter).abs())
            .max((r.d_intra - intra).abs());
    }
    let detail = format!("100 datasets, max |difference| {worst:.2e}");
    if worst <= 1e-12 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn workspace_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn negmargin(args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_negmargin"))
        .args(args)
        .env_remove("NEGMARGIN_SEED")
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!(
            "negmargin {} exited with {}: {}",
            args.join(" "),
            out.status,
            String::from_utf8_lossy(&out.stderr).trim()
        ))
    }
}

/// Rows of a CSV file keyed by header name.
fn read_csv(path: &Path) -> Result<Vec<BTreeMap<String, String>>, String> {
    let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
    let mut lines = text.lines();
    let header: Vec<&str> = lines.next().unwrap_or_default().split(',').collect();
    Ok(lines
        .map(|l| {
            header
                .iter()
                .zip(l.split(','))
                .map(|(h, v)| (h.to_string(), v.to_string()))
                .collect()
        })
        .collect())
}

fn num(row: &BTreeMap<String, String>, key: &str) -> f64 {
    row[key].parse().unwrap_or(f64::NAN)
}

/// Mean over seeds of `value` for rows matching `split`, per margin.
fn per_margin(rows: &[BTreeMap<String, String>], split: &str, value: &str) -> BTreeMap<i64, (f64, usize)> {
    let mut acc: BTreeMap<i64, (f64, usize)> = BTreeMap::new();
    for r in rows.iter().filter(|r| r["split"] == split) {
        if let Some("1") | None = r.get("shot").map(String::as_str) {
            let e = acc.entry((num(r, "margin") * 1000.0).round() as i64).or_default();
            e.0 += num(r, value);
            e.1 += 1;
        }
    }
    acc.into_iter().map(|(m, (s, n))| (m, (s / n as f64, n))).collect()
}

struct MnistRuns {
    sweep: Vec<BTreeMap<String, String>>,
    variance: Vec<BTreeMap<String, String>>,
    smoothed: Vec<BTreeMap<String, String>>,
    seconds: f64,
}

fn mnist_runs(dir: &Path) -> Result<MnistRuns, String> {
    let start = Instant::now();
    let config = workspace_root().join("data/mnist5k/experiment.txt");
    let config = config.to_str().unwrap();
    let sweep_dir = dir.join("sweep");
    negmargin(&["sweep-margin", "--config", config, "--out", sweep_dir.to_str().unwrap()])?;
    let smooth_dir = dir.join("smoothed");
    negmargin(&[
        "sweep-margin",
        "--config",
        config,
        "--margins",
        "0",
        "--set",
        "label_smoothing=0.05",
        "--out",
        smooth_dir.to_str().unwrap(),
    ])?;
    Ok(MnistRuns {
        sweep: read_csv(&sweep_dir.join("sweep.csv"))?,
        variance: read_csv(&sweep_dir.join("variance.csv"))?,
        smoothed: read_csv(&smooth_dir.join("sweep.csv"))?,
        seconds: start.elapsed().as_secs_f64(),
    })
}

fn seeds_of(rows: &[BTreeMap<String, String>]) -> usize {
    let mut seeds: Vec<&str> = rows.iter().map(|r| r["seed"].as_str()).collect();
    seeds.sort_unstable();
    seeds.dedup();
    seeds.len()
}

fn spearman_of(table: &BTreeMap<i64, (f64, usize)>) -> f64 {
    let m: Vec<f64> = table.keys().map(|&k| k as f64 / 1000.0).collect();
    let v: Vec<f64> = table.values().map(|v| v.0).collect();
    spearman(&m, &v).unwrap_or(f64::NAN)
}

fn discriminability_trend(runs: &MnistRuns) -> Outcome {
    let base = per_margin(&runs.variance, "base", "phi");
    let novel = per_margin(&runs.variance, "novel", "phi");
    let (rb, rn) = (spearman_of(&base), spearman_of(&novel));
    let fmt = |t: &BTreeMap<i64, (f64, usize)>| {
        t.iter()
            .map(|(m, v)| format!("{}:{:.3}", *m as f64 / 1000.0, v.0))
            .collect::<Vec<_>>()
            .join(" ")
    };
    let detail = format!(
        "{} seeds, {} margins; rho(m, phi_base) {rb:.3}, rho(m, phi_novel) {rn:.3}; phi_base [{}] phi_novel [{}]; {:.0}s",
        seeds_of(&runs.variance),
        base.len(),
        fmt(&base),
        fmt(&novel),
        runs.seconds
    );
    if seeds_of(&runs.variance) >= 3 && base.len() == 6 && rb > 0.0 && rn < 0.0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn accuracy_bell_shape(runs: &MnistRuns) -> Outcome {
    let novel = per_margin(&runs.sweep, "novel", "mean_acc");
    let base = per_margin(&runs.sweep, "base", "mean_acc");
    let best_negative = novel
        .iter()
        .filter(|(&m, _)| m < 0)
        .max_by(|a, b| a.1 .0.total_cmp(&b.1 .0))
        .map(|(&m, v)| (m as f64 / 1000.0, v.0));
    let at_plus = novel.get(&300).map(|v| v.0);
    let rb = spearman_of(&base);
    let (Some((m_best, best)), Some(plus)) = (best_negative, at_plus) else {
        return Err("sweep is missing margins".into());
    };
    let gap = 100.0 * (best - plus);
    let detail = format!(
        "{} seeds; novel 1-shot acc {:.2}% at m={m_best} vs {:.2}% at m=0.3 (gap {gap:.2} points); rho(m, base acc) {rb:.3}",
        seeds_of(&runs.sweep),
        100.0 * best,
        100.0 * plus
    );
    if seeds_of(&runs.sweep) >= 3 && gap >= 2.0 && rb > 0.0 {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn smoothing_contrast(runs: &MnistRuns) -> Outcome {
    let smoothed_base = per_margin(&runs.smoothed, "base", "mean_acc")[&0].0;
    let smoothed_novel = per_margin(&runs.smoothed, "novel", "mean_acc")[&0].0;
    let plain_base = per_margin(&runs.sweep, "base", "mean_acc")[&0].0;
    let neg_novel = per_margin(&runs.sweep, "novel", "mean_acc")[&-300].0;
    let detail = format!(
        "eps=0.05: base {:.2}% (plain {:.2}%), novel {:.2}% (m=-0.3: {:.2}%)",
        100.0 * smoothed_base,
        100.0 * plain_base,
        100.0 * smoothed_novel,
        100.0 * neg_novel
    );
    if smoothed_base >= plain_base && smoothed_novel <= neg_novel {
        Ok(detail)
    } else {
        Err(detail)
    }
}

const SYNTHETIC_MANIFEST: &str = "\
format = synthetic
n_classes = 9
per_class = 30
dim = 6
cluster_std = 0.4
confusability = 0.3
seed = 5
n_base = 6
holdout_fraction = 0.2
";

const SMALL_CONFIG: &str = "\
data = manifest.txt
hidden_dims = 16
epochs = 4
batch_size = 32
way = 3
base_way = 3
query = 5
episodes = 20
margins = -0.2:0.2:0.2
seeds = 1,2
shots = 1
";

/// Every file of a run directory, by relative path.
fn snapshot(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for entry in std::fs::read_dir(&d).unwrap() {
            let p = entry.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else {
                out.insert(p.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

fn determinism(dir: &Path) -> Outcome {
    let root = dir.join("determinism");
    std::fs::create_dir_all(&root).map_err(|e| e.to_string())?;
    std::fs::write(root.join("manifest.txt"), SYNTHETIC_MANIFEST).map_err(|e| e.to_string())?;
    std::fs::write(root.join("small.txt"), SMALL_CONFIG).map_err(|e| e.to_string())?;
    let cfg = root.join("small.txt");
    let cfg = cfg.to_str().unwrap();

    let run_all = |tag: &str| -> Result<PathBuf, String> {
        let out = root.join(tag);
        let o = |name: &str| out.join(name).to_str().unwrap().to_string();
        negmargin(&["pretrain", "--config", cfg, "--margin", "-0.1", "--out", &o("pretrain")])?;
        let ckpt = o("pretrain/checkpoint.txt");
        negmargin(&["finetune-eval", "--config", cfg, "--checkpoint", &ckpt, "--out", &o("eval")])?;
        negmargin(&["analyze", "--config", cfg, "--checkpoint", &ckpt, "--out", &o("analyze")])?;
        negmargin(&["sweep-margin", "--config", cfg, "--out", &o("sweep")])?;
        negmargin(&["check-proposition", "--random-instances", "200", "--seed", "7", "--out", &o("prop")])?;
        negmargin(&["export-embeddings", "--config", cfg, "--checkpoint", &ckpt, "--out", &o("emb.csv")])?;
        Ok(out)
    };
    // config.txt echoes the checkpoint path, which names the run directory.
    let outputs = |dir: PathBuf| {
        let mut files = snapshot(&dir);
        files.retain(|p, _| !p.ends_with("config.txt"));
        files
    };
    let a = outputs(run_all("a")?);
    let b = outputs(run_all("b")?);
    let csvs = a.keys().filter(|p| p.extension().is_some_and(|e| e == "csv")).count();
    if a != b {
        let differing: Vec<String> = a
            .keys()
            .filter(|k| a.get(*k) != b.get(*k))
            .map(|k| k.display().to_string())
            .collect();
        return Err(format!("outputs differ: {}", differing.join(", ")));
    }

    // Re-running from the echoed config reproduces the sweep.
    let echoed = root.join("a/sweep/config.txt");
    let rerun = root.join("rerun");
    negmargin(&[
        "sweep-margin",
        "--config",
        echoed.to_str().unwrap(),
        "--out",
        rerun.to_str().unwrap(),
    ])?;
    let original = snapshot(&root.join("a/sweep"));
    let again = snapshot(&rerun);
    if original != again {
        return Err("sweep re-run from its echoed config differs".into());
    }
    Ok(format!(
        "{} output files ({csvs} CSV) identical across two runs of six commands; sweep re-run from its config.txt identical",
        a.len()
    ))
}

fn report(n: usize, name: &str, outcome: &Outcome, failed: &mut usize) {
    match outcome {
        Ok(d) => println!("criterion {n:>2} PASS  {name}: {d}"),
        Err(d) => {
            *failed += 1;
            println!("criterion {n:>2} FAIL  {name}: {d}");
        }
    }
}

fn main() {
    let dir = tempfile::tempdir().expect("temporary directory");
    let mut failed = 0;
    report(1, "gradient exactness", &gradient_exactness(), &mut failed);
    report(2, "zero-margin reduction", &zero_margin_reduction(), &mut failed);
    report(3, "loss monotone in margin", &loss_monotonicity(), &mut failed);
    report(4, "proposition oracle", &proposition_oracle(), &mut failed);
    match mnist_runs(dir.path()) {
        Ok(runs) => {
            report(5, "discriminability trend", &discriminability_trend(&runs), &mut failed);
            report(6, "few-shot accuracy bell shape", &accuracy_bell_shape(&runs), &mut failed);
            report(7, "confidence interval", &confidence_interval(), &mut failed);
            report(8, "variance report oracle", &variance_oracle(), &mut failed);
            report(9, "label smoothing contrast", &smoothing_contrast(&runs), &mut failed);
        }
        Err(e) => {
            for (n, name) in [(5, "discriminability trend"), (6, "few-shot accuracy bell shape")] {
                report(n, name, &Err(e.clone()), &mut failed);
            }
            report(7, "confidence interval", &confidence_interval(), &mut failed);
            report(8, "variance report oracle", &variance_oracle(), &mut failed);
            report(9, "label smoothing contrast", &Err(e), &mut failed);
        }
    }
    report(10, "determinism", &determinism(dir.path()), &mut failed);
    if failed == 0 {
        println!("all acceptance criteria passed");
        return;
    }
    println!("{failed} acceptance criteria failed");
    // Failures are reported, not fatal, unless strict mode is requested.
    if std::env::var_os("NEGMARGIN_ACCEPTANCE_STRICT").is_some_and(|v| v == "1") {
        std::process::exit(1);
    }
}
