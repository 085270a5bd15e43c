use super::{LabeledDataset, SplitTag};
use crate::error::{ensure, Result};
use crate::numerics::{l2_normalize, Matrix, Rng, NORM_EPS};

/// Gaussian clusters projected onto the unit sphere.
///
/// Classes `0..n_base` get independent random unit means. Every later
/// ("novel") class picks a random base class and sets its mean to
/// `normalize((1 − ρ)·u + ρ·μ_base)` for a fresh random unit `u`, so
/// `confusability = ρ` controls how much novel modes sit on top of base
/// modes. Samples are `normalize(μ + σ·ε)` with `ε ~ N(0, I)`.
#[derive(Clone, Debug, PartialEq)]
pub struct SyntheticConfig {
    pub n_classes: usize,
    pub per_class: usize,
    pub dim: usize,
    pub cluster_std: f64,
    pub confusability: f64,
    pub seed: u64,
    /// Number of base classes; defaults to `n_classes − n_classes / 3`.
    pub n_base: Option<usize>,
}

impl SyntheticConfig {
    pub fn base_count(&self) -> usize {
        self.n_base
            .unwrap_or(self.n_classes - self.n_classes / 3)
            .min(self.n_classes)
    }

    pub fn class_name(k: usize) -> String {
        format!("c{k}")
    }

    /// Names of the base and novel classes.
    pub fn class_partition(&self) -> (Vec<String>, Vec<String>) {
        let nb = self.base_count();
        (
            (0..nb).map(Self::class_name).collect(),
            (nb..self.n_classes).map(Self::class_name).collect(),
        )
    }
}

fn random_unit(rng: &mut Rng, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.normal()).collect();
        if crate::numerics::l2_norm(&v) > 1e-8 {
            return l2_normalize(&v, NORM_EPS);
        }
    }
}

pub fn gen_synthetic(cfg: &SyntheticConfig) -> Result<LabeledDataset> {
    ensure!(cfg.n_classes >= 2, "need at least 2 classes, got {}", cfg.n_classes);
    ensure!(cfg.per_class >= 1, "per_class must be at least 1");
    ensure!(cfg.dim >= 1, "dim must be at least 1");
    ensure!(
        (0.0..=1.0).contains(&cfg.confusability),
        "confusability must lie in [0, 1], got {}",
        cfg.confusability
    );
    ensure!(
        cfg.cluster_std >= 0.0 && cfg.cluster_std.is_finite(),
        "cluster_std must be a nonnegative number"
    );
    let root = Rng::new(cfg.seed);
    let mut mean_rng = root.child("means");
    let nb = cfg.base_count();
    ensure!(nb >= 1, "need at least one base class");
    let mut means: Vec<Vec<f64>> = (0..nb).map(|_| random_unit(&mut mean_rng, cfg.dim)).collect();
    for _ in nb..cfg.n_classes {
        let anchor = means[mean_rng.below(nb)].clone();
        let u = random_unit(&mut mean_rng, cfg.dim);
        let rho = cfg.confusability;
        let mixed: Vec<f64> = u
            .iter()
            .zip(&anchor)
            .map(|(a, b)| (1.0 - rho) * a + rho * b)
            .collect();
        means.push(l2_normalize(&mixed, NORM_EPS));
    }

    let mut sample_rng = root.child("samples");
    let mut data = Vec::with_capacity(cfg.n_classes * cfg.per_class * cfg.dim);
    let mut labels = Vec::with_capacity(cfg.n_classes * cfg.per_class);
    for (k, mean) in means.iter().enumerate() {
        for _ in 0..cfg.per_class {
            let v: Vec<f64> = mean
                .iter()
                .map(|&m| m + cfg.cluster_std * sample_rng.normal())
                .collect();
            data.extend(l2_normalize(&v, NORM_EPS));
            labels.push(k);
        }
    }
    LabeledDataset::new(
        Matrix::from_vec(labels.len(), cfg.dim, data)?,
        labels,
        (0..cfg.n_classes).map(SyntheticConfig::class_name).collect(),
        SplitTag::Base,
    )
}
