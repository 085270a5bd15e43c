use std::fmt::Write as _;

use crate::error::{ensure, Result};
use crate::numerics::{Matrix, Scalar};

/// Per-class counts of 2-D feature directions over uniform angle bins.
#[derive(Clone, Debug, PartialEq)]
pub struct AngularHistogram {
    pub n_bins: usize,
    /// `counts[class][bin]`.
    pub counts: Vec<Vec<usize>>,
}

pub const HISTOGRAM_CSV_HEADER: &str = "class,bin_start_rad,count";

impl AngularHistogram {
    pub fn bin_start(&self, bin: usize) -> f64 {
        std::f64::consts::TAU * bin as f64 / self.n_bins as f64
    }

    pub fn to_csv(&self, class_names: &[String]) -> Result<String> {
        ensure!(
            class_names.len() == self.counts.len(),
            "{} class names for {} histogram rows",
            class_names.len(),
            self.counts.len()
        );
        let mut out = format!("{HISTOGRAM_CSV_HEADER}\n");
        for (name, row) in class_names.iter().zip(&self.counts) {
            for (b, &n) in row.iter().enumerate() {
                let _ = writeln!(out, "{name},{},{n}", self.bin_start(b));
            }
        }
        Ok(out)
    }
}

/// Bin index of `atan2(y, x)` mapped to `[0, 2π)`. The zero vector falls
/// in bin 0.
pub fn angle_bin<T: Scalar>(x: T, y: T, n_bins: usize) -> usize {
    let (x, y) = (x.as_f64(), y.as_f64());
    if x == 0.0 && y == 0.0 {
        return 0;
    }
    let mut angle = y.atan2(x);
    if angle < 0.0 {
        angle += std::f64::consts::TAU;
    }
    let bin = (angle / std::f64::consts::TAU * n_bins as f64).floor() as usize;
    bin.min(n_bins - 1)
}

pub fn angular_histogram<T: Scalar>(
    features: &Matrix<T>,
    labels: &[usize],
    n_classes: usize,
    n_bins: usize,
) -> Result<AngularHistogram> {
    ensure!(
        features.cols() == 2,
        "angular histogram needs 2-D features, got {}",
        features.cols()
    );
    ensure!(n_bins >= 4, "need at least 4 bins, got {n_bins}");
    ensure!(features.rows() == labels.len(), "feature rows and labels differ in length");
    let mut counts = vec![vec![0usize; n_bins]; n_classes];
    for (i, &y) in labels.iter().enumerate() {
        ensure!(y < n_classes, "label {y} out of range for {n_classes} classes");
        let row = features.row(i);
        counts[y][angle_bin(row[0], row[1], n_bins)] += 1;
    }
    Ok(AngularHistogram { n_bins, counts })
}
