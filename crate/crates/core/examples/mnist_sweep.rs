//! Margin sweep on the bundled MNIST subset with a 2-D feature MLP.
//!
//! ```text
//! cargo run --release -p negmargin-core --example mnist_sweep -- \
//!     [hidden=128,64] [activation=relu] [beta=8] [epochs=20] [wd=5e-4] [lr=3e-3] [batch=128] [ftlr=0.5] [seeds=0,1,2] [episodes=100] [smoothing=0]
//! ```

use std::path::Path;
use std::time::Instant;

use negmargin_core::analysis::spearman;
use negmargin_core::data::{DataManifest, SplitTag};
use negmargin_core::model::{BackboneConfig, SimilarityKind};
use negmargin_core::pipeline::{sweep_margin, EpisodeSpec, FinetuneConfig, PretrainConfig, SweepConfig};

fn arg<'a>(args: &'a [String], key: &str, default: &'a str) -> &'a str {
    args.iter()
        .find_map(|a| a.strip_prefix(&format!("{key}=")))
        .unwrap_or(default)
}

fn list<T: std::str::FromStr>(s: &str) -> Vec<T> {
    s.split(',').filter_map(|v| v.trim().parse().ok()).collect()
}

fn main() -> negmargin_core::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let manifest_path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/mnist5k/manifest.txt");
    let data = DataManifest::load(&manifest_path)?.load_data()?;
    let beta: f64 = arg(&args, "beta", "8").parse().expect("beta");
    let backbone = BackboneConfig {
        input_dim: data.full.dim(),
        hidden_dims: list(arg(&args, "hidden", "128,64")),
        feature_dim: 2,
        activation: arg(&args, "activation", "relu").parse()?,
    };
    let mut pretrain = PretrainConfig::new(backbone, SimilarityKind::Cosine);
    pretrain.loss.temperature = beta;
    pretrain.loss.label_smoothing = arg(&args, "smoothing", "0").parse().expect("smoothing");
    pretrain.epochs = arg(&args, "epochs", "20").parse().expect("epochs");
    pretrain.optim.weight_decay = arg(&args, "wd", "5e-4").parse().expect("wd");
    pretrain.optim.lr0 = arg(&args, "lr", "3e-3").parse().expect("lr");
    pretrain.batch_size = arg(&args, "batch", "128").parse().expect("batch");
    let mut finetune = FinetuneConfig::new(SimilarityKind::Cosine, beta);
    finetune.optim.lr0 = arg(&args, "ftlr", "0.5").parse().expect("ftlr");
    let episodes: usize = arg(&args, "episodes", "100").parse().expect("episodes");
    let cfg = SweepConfig {
        margins: list(arg(&args, "margins", "-0.5,-0.3,-0.1,0,0.1,0.3")),
        seeds: list(arg(&args, "seeds", "0,1,2")),
        pretrain,
        finetune,
        novel_episodes: EpisodeSpec { way: 3, shot: 1, query: 15, n_episodes: episodes },
        base_episodes: EpisodeSpec { way: 5, shot: 1, query: 15, n_episodes: episodes },
        shots: vec![1],
    };
    let start = Instant::now();
    let result = sweep_margin(&data.splits, &cfg)?;
    for f in &result.failures {
        println!("failed: margin {} seed {}: {}", f.margin, f.seed, f.error);
    }
    println!("margin  phi_base  phi_novel  acc_novel  acc_base  train_loss  holdout_acc");
    let mut margins = cfg.margins.clone();
    margins.sort_by(f64::total_cmp);
    let mut rows = Vec::new();
    for &m in &margins {
        let runs: Vec<_> = result.runs.iter().filter(|r| r.margin == m).collect();
        let mean = |f: &dyn Fn(&negmargin_core::pipeline::MarginRun) -> f64| {
            runs.iter().map(|r| f(r)).sum::<f64>() / runs.len() as f64
        };
        let row = (
            m,
            mean(&|r| r.base_report.phi.value()),
            mean(&|r| r.novel_report.phi.value()),
            mean(&|r| r.evaluation(SplitTag::Novel, 1).unwrap().mean),
            mean(&|r| r.evaluation(SplitTag::Base, 1).unwrap().mean),
            mean(&|r| r.log.epochs.last().unwrap().loss),
            mean(&|r| r.log.epochs.last().unwrap().base_val_acc.unwrap_or(f64::NAN)),
        );
        println!(
            "{:>6.2}  {:>8.3}  {:>9.3}  {:>9.4}  {:>8.4}  {:>10.4}  {:>11.4}",
            row.0, row.1, row.2, row.3, row.4, row.5, row.6
        );
        rows.push(row);
    }
    let ms: Vec<f64> = rows.iter().map(|r| r.0).collect();
    let col = |k: usize| -> Vec<f64> {
        rows.iter()
            .map(|r| [r.1, r.2, r.3, r.4][k])
            .collect()
    };
    if ms.len() >= 2 {
        println!(
            "spearman: phi_base {:.3}  phi_novel {:.3}  acc_base {:.3}",
            spearman(&ms, &col(0)).unwrap_or(f64::NAN),
            spearman(&ms, &col(1)).unwrap_or(f64::NAN),
            spearman(&ms, &col(3)).unwrap_or(f64::NAN)
        );
    }
    println!("elapsed {:.1}s", start.elapsed().as_secs_f64());
    Ok(())
}
