use std::fmt::Write as _;

use crate::data::LabeledDataset;
use crate::error::{ensure, Error, Result};
use crate::model::Network;
use crate::numerics::{argmax, softmax, Matrix, Scalar};

/// How novel classes spread over the base classifier.
#[derive(Clone, Debug, PartialEq)]
pub struct ConfusionProfile<T> {
    /// `C^n × C^b`; row `j` holds `P_jk`, the class-mean softmax.
    pub p: Matrix<T>,
    /// `P_jˢ = Σ_k P_jk²` per novel class.
    pub per_class: Vec<T>,
    /// Mean of `per_class`.
    pub p_s: T,
    pub temperature: T,
    /// `C^n × C^b` argmax counts.
    pub hard_counts: Vec<Vec<usize>>,
}

pub const CONFUSION_CSV_HEADER: &str = "novel_class,base_class,P_jk";

impl<T: Scalar> ConfusionProfile<T> {
    /// One `novel_class,base_class,P_jk` row per cell, header included.
    pub fn to_csv(&self, novel_names: &[String], base_names: &[String]) -> Result<String> {
        ensure!(
            novel_names.len() == self.p.rows() && base_names.len() == self.p.cols(),
            "class names do not match the profile shape"
        );
        let mut out = format!("{CONFUSION_CSV_HEADER}\n");
        for (j, nj) in novel_names.iter().enumerate() {
            for (k, bk) in base_names.iter().enumerate() {
                let _ = writeln!(out, "{nj},{bk},{}", self.p.get(j, k));
            }
        }
        Ok(out)
    }

    /// Argmax histogram, `novel_class,base_class,count`.
    pub fn hard_counts_csv(&self, novel_names: &[String], base_names: &[String]) -> Result<String> {
        ensure!(
            novel_names.len() == self.hard_counts.len() && base_names.len() == self.p.cols(),
            "class names do not match the profile shape"
        );
        let mut out = String::from("novel_class,base_class,count\n");
        for (j, nj) in novel_names.iter().enumerate() {
            for (k, bk) in base_names.iter().enumerate() {
                let _ = writeln!(out, "{nj},{bk},{}", self.hard_counts[j][k]);
            }
        }
        Ok(out)
    }
}

/// Profile from precomputed similarity scores (`N × C^b`) of novel samples.
pub fn confusion_from_scores<T: Scalar>(
    scores: &Matrix<T>,
    labels: &[usize],
    n_novel: usize,
    temperature: T,
) -> Result<ConfusionProfile<T>> {
    ensure!(scores.rows() == labels.len(), "score rows and labels differ in length");
    ensure!(scores.cols() >= 1, "no base classes");
    ensure!(temperature > T::zero(), "temperature must be positive");
    let cb = scores.cols();
    let mut p = Matrix::zeros(n_novel, cb);
    let mut counts = vec![0usize; n_novel];
    let mut hard_counts = vec![vec![0usize; cb]; n_novel];
    let mut logits = vec![T::zero(); cb];
    for (i, &y) in labels.iter().enumerate() {
        ensure!(y < n_novel, "label {y} out of range for {n_novel} novel classes");
        for (l, &s) in logits.iter_mut().zip(scores.row(i)) {
            *l = temperature * s;
        }
        let probs = softmax(&logits)?;
        for (acc, q) in p.row_mut(y).iter_mut().zip(&probs) {
            *acc += *q;
        }
        hard_counts[y][argmax(&logits).expect("nonempty")] += 1;
        counts[y] += 1;
    }
    if let Some(j) = counts.iter().position(|&n| n == 0) {
        return Err(Error::contract(format!("novel class {j} has no samples")));
    }
    let mut per_class = Vec::with_capacity(n_novel);
    for (j, &n) in counts.iter().enumerate() {
        let inv = T::one() / T::of_usize(n);
        let row = p.row_mut(j);
        for v in row.iter_mut() {
            *v *= inv;
        }
        per_class.push(row.iter().map(|&v| v * v).sum());
    }
    let p_s = if n_novel == 0 {
        T::zero()
    } else {
        per_class.iter().copied().sum::<T>() / T::of_usize(n_novel)
    };
    Ok(ConfusionProfile {
        p,
        per_class,
        p_s,
        temperature,
        hard_counts,
    })
}

/// Profile of `novel` under a pretrained backbone and its base classifier.
pub fn confusion_profile<T: Scalar>(
    net: &Network<T>,
    novel: &LabeledDataset,
    temperature: T,
) -> Result<ConfusionProfile<T>> {
    let scores = net.scores(&novel.features().cast())?;
    confusion_from_scores(&scores, novel.labels(), novel.num_classes(), temperature)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_scores_give_uniform_rows() {
        let s: Matrix<f64> = Matrix::from_rows(&[vec![0.3; 4], vec![0.3; 4]]).unwrap();
        let c = confusion_from_scores(&s, &[0, 0], 1, 10.0).unwrap();
        assert!(c.p.row(0).iter().all(|&v| (v - 0.25).abs() < 1e-15));
        assert!((c.p_s - 0.25).abs() < 1e-15);
    }

    #[test]
    fn dominant_class_gives_one_hot() {
        let s = Matrix::from_rows(&[vec![0.0, 1e4, 0.0]]).unwrap();
        let c = confusion_from_scores(&s, &[0], 1, 1.0).unwrap();
        assert_eq!(c.p.row(0), &[0.0, 1.0, 0.0]);
        assert_eq!(c.per_class, vec![1.0]);
        assert_eq!(c.hard_counts, vec![vec![0, 1, 0]]);
    }

    #[test]
    fn empty_novel_class_rejected() {
        let s = Matrix::from_rows(&[vec![0.0, 1.0]]).unwrap();
        assert!(confusion_from_scores(&s, &[0], 2, 1.0).is_err());
    }

    #[test]
    fn csv_layout() {
        let s = Matrix::from_rows(&[vec![0.0, 0.0]]).unwrap();
        let c = confusion_from_scores(&s, &[0], 1, 1.0).unwrap();
        let csv = c.to_csv(&["7".into()], &["0".into(), "1".into()]).unwrap();
        assert_eq!(csv, "novel_class,base_class,P_jk\n7,0,0.5\n7,1,0.5\n");
    }
}
