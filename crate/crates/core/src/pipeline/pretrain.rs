use std::fmt::Write as _;

use crate::data::LabeledDataset;
use crate::error::{ensure, Error, Result};
use crate::loss::{margin_loss, LossSpec};
use crate::model::{BackboneConfig, Network, SimilarityKind};
use crate::numerics::{argmax, Matrix, Rng};
use crate::optim::{Adam, OptimConfig};

/// Stage one: backbone and base classifier trained jointly.
#[derive(Clone, Debug, PartialEq)]
pub struct PretrainConfig {
    pub backbone: BackboneConfig,
    pub loss: LossSpec<f64>,
    /// `total_steps` is overwritten with `epochs × batches per epoch`.
    pub optim: OptimConfig<f64>,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
}

impl PretrainConfig {
    /// 20 epochs of batch 128 under the plain loss of `similarity`.
    pub fn new(backbone: BackboneConfig, similarity: SimilarityKind) -> Self {
        Self {
            backbone,
            loss: LossSpec::plain(similarity),
            optim: OptimConfig::new(1),
            epochs: 20,
            batch_size: 128,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(self.epochs >= 1, "epochs must be at least 1");
        ensure!(self.batch_size >= 1, "batch_size must be at least 1");
        self.backbone.validate()?;
        self.loss.validate()
    }

    pub fn batches_per_epoch(&self, n: usize) -> usize {
        n.div_ceil(self.batch_size)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean training loss over the epoch.
    pub loss: f64,
    /// Top-1 accuracy of the base classifier on held-out base records.
    pub base_val_acc: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainingLog {
    pub epochs: Vec<EpochRecord>,
}

pub const TRAINING_LOG_CSV_HEADER: &str = "epoch,loss,base_val_acc";

impl TrainingLog {
    /// `epoch,loss,base_val_acc`; the accuracy is empty without a holdout.
    pub fn to_csv(&self) -> String {
        let mut out = format!("{TRAINING_LOG_CSV_HEADER}\n");
        for r in &self.epochs {
            let acc = r.base_val_acc.map(|a| a.to_string()).unwrap_or_default();
            let _ = writeln!(out, "{},{},{acc}", r.epoch, r.loss);
        }
        out
    }
}

/// Fraction of records whose highest-scoring class is the label.
pub fn classification_accuracy(net: &Network<f64>, ds: &LabeledDataset) -> Result<f64> {
    ensure!(!ds.is_empty(), "accuracy of an empty dataset");
    let scores = net.scores(ds.features())?;
    let hits = (0..ds.len())
        .filter(|&i| argmax(scores.row(i)) == Some(ds.labels()[i]))
        .count();
    Ok(hits as f64 / ds.len() as f64)
}

fn tag_epoch(epoch: usize, e: Error) -> Error {
    match e {
        Error::Numeric(msg) => Error::Numeric(format!("training diverged in epoch {epoch}: {msg}")),
        other => other,
    }
}

/// Trains a fresh network on `base` with mini-batch Adam under a cosine
/// schedule. Record order is reshuffled every epoch from the config seed.
pub fn pretrain(
    base: &LabeledDataset,
    holdout: Option<&LabeledDataset>,
    cfg: &PretrainConfig,
) -> Result<(Network<f64>, TrainingLog)> {
    cfg.validate()?;
    ensure!(!base.is_empty(), "pretraining set is empty");
    ensure!(
        base.num_classes() >= 2,
        "pretraining needs at least 2 classes, got {}",
        base.num_classes()
    );
    ensure!(
        base.dim() == cfg.backbone.input_dim,
        "data width {} does not match input_dim {}",
        base.dim(),
        cfg.backbone.input_dim
    );
    if let Some(h) = holdout {
        ensure!(
            h.is_empty() || h.class_names() == base.class_names(),
            "holdout classes differ from the pretraining classes"
        );
    }
    let holdout = holdout.filter(|h| !h.is_empty());

    let root = Rng::new(cfg.seed);
    let mut net = Network::new(
        cfg.backbone.clone(),
        base.num_classes(),
        cfg.loss.similarity,
        &mut root.child("init"),
    )?;
    let mut order_rng = root.child("order");
    let per_epoch = cfg.batches_per_epoch(base.len());
    let optim = OptimConfig {
        total_steps: cfg.epochs * per_epoch,
        ..cfg.optim
    };
    optim.validate()?;
    let mut adam = Adam::new();
    let mut log = TrainingLog::default();
    let mut order: Vec<usize> = (0..base.len()).collect();
    let mut labels = Vec::with_capacity(cfg.batch_size);

    for epoch in 0..cfg.epochs {
        order_rng.shuffle(&mut order);
        let mut total = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let x: Matrix<f64> = base.features().select_rows(batch);
            labels.clear();
            labels.extend(batch.iter().map(|&i| base.labels()[i]));
            let step = (|| -> Result<f64> {
                let out = net.forward(&x)?;
                let lo = margin_loss(&out.scores, &labels, &cfg.loss)?;
                if !lo.loss.is_finite() {
                    return Err(Error::numeric(format!("loss is {}", lo.loss)));
                }
                net.backward(&lo.grad_scores)?;
                adam.step(&mut net, &optim)?;
                Ok(lo.loss)
            })()
            .map_err(|e| tag_epoch(epoch, e))?;
            total += step * batch.len() as f64;
        }
        let base_val_acc = match holdout {
            Some(h) => Some(classification_accuracy(&net, h)?),
            None => None,
        };
        log.epochs.push(EpochRecord {
            epoch,
            loss: total / base.len() as f64,
            base_val_acc,
        });
    }
    Ok((net, log))
}
