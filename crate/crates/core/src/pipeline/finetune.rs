use rayon::prelude::*;

use crate::data::{sample_episode, LabeledDataset};
use crate::error::{ensure, Result};
use crate::loss::{margin_loss, LossSpec};
use crate::model::{glorot_limit, head_backward, head_forward, Network, SimilarityKind};
use crate::numerics::{argmax, Matrix, Rng};
use crate::optim::{Adam, OptimConfig, Parameters};

/// Stage two: a fresh classifier on frozen features of the support set.
///
/// Episode `i` draws its classes, records and classifier initialization
/// from `Rng::new(seed).child("episode/i")`, so episodes are independent of
/// evaluation order and of each other.
#[derive(Clone, Debug, PartialEq)]
pub struct FinetuneConfig {
    pub loss: LossSpec<f64>,
    /// `total_steps` is overwritten with `steps`.
    pub optim: OptimConfig<f64>,
    /// Full-batch Adam steps per episode.
    pub steps: usize,
    pub seed: u64,
}

impl FinetuneConfig {
    /// Zero margin, the given head and temperature, 100 steps at `lr0 = 0.05`
    /// without weight decay.
    pub fn new(similarity: SimilarityKind, temperature: f64) -> Self {
        Self {
            loss: LossSpec {
                temperature,
                ..LossSpec::plain(similarity)
            },
            optim: OptimConfig {
                lr0: 0.05,
                weight_decay: 0.0,
                ..OptimConfig::new(100)
            },
            steps: 100,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(self.steps >= 1, "fine-tuning needs at least one step");
        self.loss.validate()?;
        self.optimizer().validate()
    }

    fn optimizer(&self) -> OptimConfig<f64> {
        OptimConfig {
            total_steps: self.steps,
            ..self.optim
        }
    }
}

/// Shape of the evaluation episodes.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct EpisodeSpec {
    pub way: usize,
    pub shot: usize,
    pub query: usize,
    pub n_episodes: usize,
}

impl EpisodeSpec {
    /// 5-way, 16 queries per class, 600 episodes.
    pub fn standard(shot: usize) -> Self {
        Self {
            way: 5,
            shot,
            query: 16,
            n_episodes: 600,
        }
    }
}

/// Per-episode query accuracies and their summary.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalResult {
    pub accuracies: Vec<f64>,
    pub mean: f64,
    pub ci95: f64,
    pub n_episodes: usize,
    /// `(correct, total)` query predictions per dataset class.
    pub class_hits: Vec<(usize, usize)>,
}

/// `1.96 · s / √n` with `s` the sample standard deviation; 0 when `n < 2`.
pub fn ci95(accuracies: &[f64]) -> f64 {
    let n = accuracies.len();
    if n < 2 {
        return 0.0;
    }
    let mean = accuracies.iter().sum::<f64>() / n as f64;
    let var = accuracies.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / (n - 1) as f64;
    1.96 * var.sqrt() / (n as f64).sqrt()
}

impl EvalResult {
    pub fn from_accuracies(accuracies: Vec<f64>) -> Result<Self> {
        ensure!(!accuracies.is_empty(), "no episodes");
        ensure!(
            accuracies.iter().all(|a| (0.0..=1.0).contains(a)),
            "accuracies must lie in [0, 1]"
        );
        let n = accuracies.len();
        Ok(Self {
            mean: accuracies.iter().sum::<f64>() / n as f64,
            ci95: ci95(&accuracies),
            n_episodes: n,
            accuracies,
            class_hits: Vec::new(),
        })
    }

    /// Accuracy on each dataset class, `None` for classes never queried.
    pub fn class_accuracy(&self) -> Vec<Option<f64>> {
        self.class_hits
            .iter()
            .map(|&(h, t)| (t > 0).then(|| h as f64 / t as f64))
            .collect()
    }
}

struct Classifier {
    w: Matrix<f64>,
    g: Matrix<f64>,
}

impl Parameters<f64> for Classifier {
    fn visit_parameters(
        &mut self,
        f: &mut dyn FnMut(&str, &mut Matrix<f64>, &mut Matrix<f64>) -> crate::Result<()>,
    ) -> crate::Result<()> {
        f("classifier", &mut self.w, &mut self.g)
    }
}

/// Trains a bias-free `D × way` classifier on fixed features.
pub fn train_classifier(
    features: &Matrix<f64>,
    labels: &[usize],
    way: usize,
    cfg: &FinetuneConfig,
    rng: &mut Rng,
) -> Result<Matrix<f64>> {
    cfg.validate()?;
    let d = features.cols();
    let mut clf = Classifier {
        w: Matrix::zeros(d, way),
        g: Matrix::zeros(d, way),
    };
    crate::model::uniform_fill(&mut clf.w, glorot_limit(d, way), rng);
    let optim = cfg.optimizer();
    let mut adam = Adam::new();
    for _ in 0..cfg.steps {
        let (scores, cache) = head_forward(features, &clf.w, cfg.loss.similarity)?;
        let lo = margin_loss(&scores, labels, &cfg.loss)?;
        let (_, grad_w) = head_backward(features, &clf.w, &cache, &lo.grad_scores)?;
        clf.g = grad_w;
        adam.step(&mut clf, &optim)?;
    }
    Ok(clf.w)
}

/// Highest-scoring class per row; ties go to the lowest index.
pub fn predict(features: &Matrix<f64>, w: &Matrix<f64>, kind: SimilarityKind) -> Result<Vec<usize>> {
    let (scores, _) = head_forward(features, w, kind)?;
    Ok((0..scores.rows())
        .map(|i| argmax(scores.row(i)).expect("classifier has at least one column"))
        .collect())
}

/// Episodic evaluation on already-embedded features.
pub fn evaluate_features(
    embedded: &LabeledDataset,
    spec: &EpisodeSpec,
    cfg: &FinetuneConfig,
) -> Result<EvalResult> {
    cfg.validate()?;
    ensure!(spec.n_episodes >= 1, "need at least one episode");
    let root = Rng::new(cfg.seed);
    let per_episode: Vec<(f64, Vec<(usize, usize, bool)>)> = (0..spec.n_episodes)
        .into_par_iter()
        .map(|i| {
            let mut rng = root.child(&format!("episode/{i}"));
            let ep = sample_episode(embedded, spec.way, spec.shot, spec.query, &mut rng)?;
            let w = train_classifier(&ep.support, &ep.support_labels, spec.way, cfg, &mut rng)?;
            let pred = predict(&ep.query, &w, cfg.loss.similarity)?;
            let outcomes: Vec<(usize, usize, bool)> = pred
                .iter()
                .zip(&ep.query_labels)
                .map(|(&p, &y)| (ep.classes[y], y, p == y))
                .collect();
            let correct = outcomes.iter().filter(|o| o.2).count();
            Ok((correct as f64 / pred.len() as f64, outcomes))
        })
        .collect::<Result<_>>()?;
    let mut class_hits = vec![(0usize, 0usize); embedded.num_classes()];
    let mut accuracies = Vec::with_capacity(per_episode.len());
    for (acc, outcomes) in per_episode {
        accuracies.push(acc);
        for (class, _, ok) in outcomes {
            class_hits[class].1 += 1;
            if ok {
                class_hits[class].0 += 1;
            }
        }
    }
    let mut result = EvalResult::from_accuracies(accuracies)?;
    result.class_hits = class_hits;
    Ok(result)
}

/// Embeds `ds` with the frozen backbone, then runs `spec.n_episodes`
/// episodes of classifier training on support features and top-1 scoring
/// on query features.
pub fn finetune_eval(
    net: &Network<f64>,
    ds: &LabeledDataset,
    spec: &EpisodeSpec,
    cfg: &FinetuneConfig,
) -> Result<EvalResult> {
    let embedded = ds.with_features(net.embed(ds.features())?)?;
    evaluate_features(&embedded, spec, cfg)
}
