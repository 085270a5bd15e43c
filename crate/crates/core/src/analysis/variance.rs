use std::fmt;

use crate::data::SplitTag;
use crate::error::{ensure, Result};
use crate::numerics::{l2_normalize, Matrix, Scalar, NORM_EPS};

/// `φ = D_inter / D_intra`, or a flag when `D_intra = 0`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Discriminability<T> {
    Finite(T),
    Infinite,
}

impl<T: Scalar> Discriminability<T> {
    /// The ratio as a number; `+∞` for the infinite case.
    pub fn value(self) -> T {
        match self {
            Discriminability::Finite(v) => v,
            Discriminability::Infinite => T::infinity(),
        }
    }

    pub fn is_infinite(self) -> bool {
        matches!(self, Discriminability::Infinite)
    }
}

impl<T: Scalar> fmt::Display for Discriminability<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Discriminability::Finite(v) => write!(f, "{v}"),
            Discriminability::Infinite => f.write_str("inf"),
        }
    }
}

/// Class centers and the inter/intra-class variance of one split.
#[derive(Clone, Debug, PartialEq)]
pub struct AnalysisReport<T> {
    /// One row per class.
    pub centers: Matrix<T>,
    pub d_inter: T,
    pub d_intra: T,
    pub phi: Discriminability<T>,
    pub split: SplitTag,
    pub margin: T,
}

pub const VARIANCE_CSV_HEADER: &str = "margin,split,D_inter,D_intra,phi";

impl<T: Scalar> AnalysisReport<T> {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{}",
            self.margin, self.split, self.d_inter, self.d_intra, self.phi
        )
    }
}

fn normalized_rows<T: Scalar>(features: &Matrix<T>) -> Matrix<T> {
    let mut out = features.clone();
    let eps = T::of(NORM_EPS);
    for r in 0..out.rows() {
        let unit = l2_normalize(out.row(r), eps);
        out.row_mut(r).copy_from_slice(&unit);
    }
    out
}

fn check_labels(features_rows: usize, labels: &[usize], n_classes: usize) -> Result<()> {
    ensure!(
        features_rows == labels.len(),
        "{features_rows} feature rows but {} labels",
        labels.len()
    );
    ensure!(
        labels.iter().all(|&y| y < n_classes),
        "label out of range for {n_classes} classes"
    );
    Ok(())
}

/// Per-class mean of the L2-normalized features. Centers are not
/// re-normalized.
pub fn class_centers<T: Scalar>(
    features: &Matrix<T>,
    labels: &[usize],
    n_classes: usize,
) -> Result<Matrix<T>> {
    check_labels(features.rows(), labels, n_classes)?;
    centers_of_unit(&normalized_rows(features), labels, n_classes)
}

fn centers_of_unit<T: Scalar>(unit: &Matrix<T>, labels: &[usize], n_classes: usize) -> Result<Matrix<T>> {
    let mut sums = Matrix::zeros(n_classes, unit.cols());
    let mut counts = vec![0usize; n_classes];
    for (i, &y) in labels.iter().enumerate() {
        counts[y] += 1;
        for (s, &v) in sums.row_mut(y).iter_mut().zip(unit.row(i)) {
            *s += v;
        }
    }
    if let Some(c) = counts.iter().position(|&n| n == 0) {
        return Err(crate::Error::Contract(format!("class {c} has no samples")));
    }
    for (c, &n) in counts.iter().enumerate() {
        let inv = T::one() / T::of_usize(n);
        for v in sums.row_mut(c) {
            *v *= inv;
        }
    }
    Ok(sums)
}

fn squared_distance<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| (x - y) * (x - y)).sum()
}

/// `D_inter` is the mean of `‖μ_j − μ_k‖²` over ordered pairs `j ≠ k`;
/// `D_intra` is the mean over classes of the mean squared distance from a
/// normalized sample to its center.
pub fn variance_report<T: Scalar>(
    features: &Matrix<T>,
    labels: &[usize],
    n_classes: usize,
    split: SplitTag,
    margin: T,
) -> Result<AnalysisReport<T>> {
    ensure!(n_classes >= 2, "variance report needs at least 2 classes");
    check_labels(features.rows(), labels, n_classes)?;
    let unit = normalized_rows(features);
    let centers = centers_of_unit(&unit, labels, n_classes)?;

    let mut inter = T::zero();
    for j in 0..n_classes {
        for k in 0..n_classes {
            if j != k {
                inter += squared_distance(centers.row(j), centers.row(k));
            }
        }
    }
    let d_inter = inter / T::of_usize(n_classes * (n_classes - 1));

    let mut per_class = vec![T::zero(); n_classes];
    let mut counts = vec![0usize; n_classes];
    for (i, &y) in labels.iter().enumerate() {
        per_class[y] += squared_distance(unit.row(i), centers.row(y));
        counts[y] += 1;
    }
    let d_intra = per_class
        .iter()
        .zip(&counts)
        .map(|(&s, &n)| s / T::of_usize(n))
        .sum::<T>()
        / T::of_usize(n_classes);

    let phi = if d_intra > T::zero() {
        Discriminability::Finite(d_inter / d_intra)
    } else {
        Discriminability::Infinite
    };
    Ok(AnalysisReport {
        centers,
        d_inter,
        d_intra,
        phi,
        split,
        margin,
    })
}
