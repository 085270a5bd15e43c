//! Additive-margin softmax losses.
//!
//! For a sample with label `y` and similarity scores `s_j`, the loss is the
//! cross-entropy of the softmax over the adjusted logits
//!
//! ```text
//! l_y = β (s_y − m),    l_j = β s_j  (j ≠ y)
//! ```
//!
//! averaged over the batch. Plugging inner-product scores gives the
//! margin softmax loss, cosine scores give the margin cosine loss. The
//! margin may be negative, zero or positive. With label smoothing `ε` the
//! target distribution is `(1 − ε)·onehot(y) + ε/C`.

use crate::error::{ensure, Error, Result};
use crate::model::SimilarityKind;
use crate::numerics::{log_sum_exp_unchecked, Matrix, Scalar};

/// Full parameterization of the margin loss.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossSpec<T> {
    pub margin: T,
    pub temperature: T,
    pub similarity: SimilarityKind,
    pub label_smoothing: T,
}

impl<T: Scalar> LossSpec<T> {
    /// Zero margin, no smoothing, the head's default temperature.
    pub fn plain(similarity: SimilarityKind) -> Self {
        Self {
            margin: T::zero(),
            temperature: T::of(similarity.default_temperature()),
            similarity,
            label_smoothing: T::zero(),
        }
    }

    pub fn with_margin(mut self, margin: T) -> Self {
        self.margin = margin;
        self
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(
            self.temperature.is_finite() && self.temperature > T::zero(),
            "temperature must be positive, got {}",
            self.temperature
        );
        ensure!(self.margin.is_finite(), "margin must be finite");
        ensure!(
            self.label_smoothing >= T::zero() && self.label_smoothing < T::one(),
            "label smoothing must lie in [0, 1), got {}",
            self.label_smoothing
        );
        Ok(())
    }
}

/// Mean loss and its gradient w.r.t. the scores.
#[derive(Clone, Debug)]
pub struct LossOutput<T> {
    pub loss: T,
    pub grad_scores: Matrix<T>,
}

fn check_inputs<T: Scalar>(scores: &Matrix<T>, labels: &[usize], spec: &LossSpec<T>) -> Result<()> {
    spec.validate()?;
    ensure!(
        scores.rows() == labels.len(),
        "{} score rows but {} labels",
        scores.rows(),
        labels.len()
    );
    ensure!(scores.rows() > 0, "loss over an empty batch");
    ensure!(scores.cols() > 0, "loss over zero classes");
    if let Some((i, &y)) = labels.iter().enumerate().find(|(_, &y)| y >= scores.cols()) {
        return Err(Error::contract(format!(
            "label {y} at row {i} is out of range for {} classes",
            scores.cols()
        )));
    }
    if !scores.is_finite() {
        return Err(Error::numeric("non-finite score passed to the loss"));
    }
    Ok(())
}

// Adjusted logits for one row, written into `buf`.
fn adjusted_logits<T: Scalar>(row: &[T], y: usize, spec: &LossSpec<T>, buf: &mut Vec<T>) {
    buf.clear();
    buf.extend(row.iter().map(|&s| spec.temperature * s));
    buf[y] = spec.temperature * (row[y] - spec.margin);
}

fn target<T: Scalar>(j: usize, y: usize, classes: usize, eps: T) -> T {
    let uniform = eps / T::of_usize(classes);
    if j == y {
        T::one() - eps + uniform
    } else {
        uniform
    }
}

/// Mean margin loss over the batch plus the exact gradient w.r.t. `scores`.
pub fn margin_loss<T: Scalar>(
    scores: &Matrix<T>,
    labels: &[usize],
    spec: &LossSpec<T>,
) -> Result<LossOutput<T>> {
    check_inputs(scores, labels, spec)?;
    let (n, c) = scores.shape();
    let inv_n = T::one() / T::of_usize(n);
    let eps = spec.label_smoothing;
    let mut total = T::zero();
    let mut grad = Matrix::zeros(n, c);
    let mut logits = Vec::with_capacity(c);
    for (i, &y) in labels.iter().enumerate() {
        adjusted_logits(scores.row(i), y, spec, &mut logits);
        let lse = log_sum_exp_unchecked(&logits);
        let g = grad.row_mut(i);
        for j in 0..c {
            let q = target(j, y, c, eps);
            let log_p = logits[j] - lse;
            total -= q * log_p;
            // dL/dl_j = p_j − q_j and dl_j/ds_j = β for every j.
            g[j] = spec.temperature * (log_p.exp() - q) * inv_n;
        }
    }
    Ok(LossOutput {
        loss: total * inv_n,
        grad_scores: grad,
    })
}

/// Loss value only.
pub fn margin_loss_value<T: Scalar>(
    scores: &Matrix<T>,
    labels: &[usize],
    spec: &LossSpec<T>,
) -> Result<T> {
    check_inputs(scores, labels, spec)?;
    let c = scores.cols();
    let mut total = T::zero();
    let mut logits = Vec::with_capacity(c);
    for (i, &y) in labels.iter().enumerate() {
        adjusted_logits(scores.row(i), y, spec, &mut logits);
        let lse = log_sum_exp_unchecked(&logits);
        for (j, &l) in logits.iter().enumerate() {
            total -= target(j, y, c, spec.label_smoothing) * (l - lse);
        }
    }
    Ok(total / T::of_usize(labels.len()))
}

/// Loss evaluated at two margins `low < high`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MarginOrdering<T> {
    pub low_margin: T,
    pub high_margin: T,
    pub loss_low: T,
    pub loss_high: T,
    /// `loss_low ≤ loss_high + 1e-12`.
    pub ordered: bool,
}

/// Evaluates the loss at `m1 < m2` with everything else in `spec` fixed.
///
/// The loss is nondecreasing in the margin (its derivative is
/// `β (1 − p_y)` per sample), so `ordered` is expected to hold.
pub fn loss_monotonicity_witness<T: Scalar>(
    scores: &Matrix<T>,
    labels: &[usize],
    spec: &LossSpec<T>,
    m1: T,
    m2: T,
) -> Result<MarginOrdering<T>> {
    ensure!(m1 < m2, "witness needs m1 < m2, got {m1} and {m2}");
    let loss_low = margin_loss_value(scores, labels, &spec.with_margin(m1))?;
    let loss_high = margin_loss_value(scores, labels, &spec.with_margin(m2))?;
    Ok(MarginOrdering {
        low_margin: m1,
        high_margin: m2,
        loss_low,
        loss_high,
        ordered: loss_low <= loss_high + T::of(1e-12),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::Rng;
    use proptest::prelude::*;

    // ln(1 + e^{-x}) evaluated with mpmath at 40 digits.
    const LN1P_EXP_NEG_1: f64 = 0.313_261_687_518_222_834;
    const LN1P_EXP_NEG_1_3: f64 = 0.241_008_453_832_992_196;
    const LN1P_EXP_NEG_0_7: f64 = 0.403_186_048_885_457_908;

    fn spec(m: f64) -> LossSpec<f64> {
        LossSpec {
            margin: m,
            temperature: 1.0,
            similarity: SimilarityKind::InnerProduct,
            label_smoothing: 0.0,
        }
    }

    fn two_class() -> Matrix<f64> {
        Matrix::from_rows(&[vec![1.0, 0.0]]).unwrap()
    }

    // Independent reference: plain softmax cross-entropy on β·s with a
    // naive exp/sum/log, no margin, no shifting.
    fn naive_cross_entropy(scores: &Matrix<f64>, labels: &[usize], beta: f64) -> f64 {
        let mut total = 0.0;
        for (i, &y) in labels.iter().enumerate() {
            let z: f64 = scores.row(i).iter().map(|s| (beta * s).exp()).sum();
            total += -((beta * scores.get(i, y)).exp() / z).ln();
        }
        total / labels.len() as f64
    }

    fn random_batch(rng: &mut Rng, n: usize, c: usize, scale: f64) -> (Matrix<f64>, Vec<usize>) {
        let data = (0..n * c).map(|_| rng.uniform_in(-scale, scale)).collect();
        let labels = (0..n).map(|_| rng.below(c)).collect();
        (Matrix::from_vec(n, c, data).unwrap(), labels)
    }

    #[test]
    fn reference_values() {
        let s = two_class();
        let cases = [(0.0, LN1P_EXP_NEG_1), (-0.3, LN1P_EXP_NEG_1_3), (0.3, LN1P_EXP_NEG_0_7)];
        for (m, expected) in cases {
            let out = margin_loss(&s, &[0], &spec(m)).unwrap();
            assert!((out.loss - expected).abs() < 1e-14, "m={m}: {}", out.loss);
        }
    }

    #[test]
    fn zero_margin_matches_cross_entropy() {
        let mut rng = Rng::new(3);
        for _ in 0..50 {
            let (s, y) = random_batch(&mut rng, 8, 5, 3.0);
            let beta = rng.uniform_in(0.5, 4.0);
            let sp = LossSpec { temperature: beta, ..spec(0.0) };
            let got = margin_loss(&s, &y, &sp).unwrap().loss;
            assert!((got - naive_cross_entropy(&s, &y, beta)).abs() <= 1e-12);
        }
    }

    #[test]
    fn gradient_matches_central_differences() {
        let mut rng = Rng::new(8);
        let h = 1e-5;
        for (m, eps, beta) in [(-0.3, 0.0, 10.0), (0.2, 0.05, 1.0), (0.0, 0.1, 3.0)] {
            let (s, y) = random_batch(&mut rng, 4, 3, 1.0);
            let sp = LossSpec { margin: m, temperature: beta, label_smoothing: eps, ..spec(0.0) };
            let analytic = margin_loss(&s, &y, &sp).unwrap().grad_scores;
            for k in 0..s.as_slice().len() {
                let mut plus = s.clone();
                plus.as_mut_slice()[k] += h;
                let mut minus = s.clone();
                minus.as_mut_slice()[k] -= h;
                let fd = (margin_loss_value(&plus, &y, &sp).unwrap()
                    - margin_loss_value(&minus, &y, &sp).unwrap())
                    / (2.0 * h);
                let a = analytic.as_slice()[k];
                let rel = (a - fd).abs() / a.abs().max(fd.abs()).max(1e-4);
                assert!(rel <= 1e-6, "entry {k}: analytic {a} vs fd {fd}");
            }
        }
    }

    #[test]
    fn witness_reference_values() {
        let w = loss_monotonicity_witness(&two_class(), &[0], &spec(0.0), -0.3, 0.0).unwrap();
        assert!((w.loss_low - LN1P_EXP_NEG_1_3).abs() < 1e-14);
        assert!((w.loss_high - LN1P_EXP_NEG_1).abs() < 1e-14);
        assert!(w.ordered);
    }

    #[test]
    fn single_class_loss_is_zero_for_any_margin() {
        let s = Matrix::from_rows(&[vec![0.7], vec![-2.0]]).unwrap();
        for m in [-1.0, 0.0, 2.5] {
            assert_eq!(margin_loss(&s, &[0, 0], &spec(m)).unwrap().loss, 0.0);
        }
        let w = loss_monotonicity_witness(&s, &[0, 0], &spec(0.0), -1.0, 1.0).unwrap();
        assert_eq!(w.loss_low, w.loss_high);
        assert!(w.ordered);
    }

    #[test]
    fn witness_requires_increasing_margins() {
        assert!(loss_monotonicity_witness(&two_class(), &[0], &spec(0.0), 0.1, 0.1).is_err());
    }

    #[test]
    fn invalid_inputs() {
        let s = two_class();
        assert!(matches!(margin_loss(&s, &[2], &spec(0.0)), Err(Error::Contract(_))));
        assert!(matches!(margin_loss(&s, &[0, 1], &spec(0.0)), Err(Error::Contract(_))));
        let bad_beta = LossSpec { temperature: 0.0, ..spec(0.0) };
        assert!(margin_loss(&s, &[0], &bad_beta).is_err());
        let bad_eps = LossSpec { label_smoothing: 1.0, ..spec(0.0) };
        assert!(margin_loss(&s, &[0], &bad_eps).is_err());
    }

    #[test]
    fn smoothing_zero_is_identity() {
        let mut rng = Rng::new(12);
        let (s, y) = random_batch(&mut rng, 6, 4, 2.0);
        let a = margin_loss(&s, &y, &spec(-0.2)).unwrap();
        let b = margin_loss(&s, &y, &LossSpec { label_smoothing: 0.0, ..spec(-0.2) }).unwrap();
        assert_eq!(a.loss, b.loss);
        assert_eq!(a.grad_scores, b.grad_scores);
    }

    proptest! {
        #[test]
        fn nondecreasing_in_margin(seed in any::<u64>(), m1 in -2.0f64..2.0, gap in 1e-6f64..2.0) {
            let mut rng = Rng::new(seed);
            let (s, y) = random_batch(&mut rng, 5, 4, 1.0);
            let sp = LossSpec { temperature: 10.0, ..spec(0.0) };
            let w = loss_monotonicity_witness(&s, &y, &sp, m1, m1 + gap).unwrap();
            prop_assert!(w.ordered);
        }

        #[test]
        fn row_shift_invariant(seed in any::<u64>(), c in -20.0f64..20.0) {
            let mut rng = Rng::new(seed);
            let (s, y) = random_batch(&mut rng, 5, 4, 1.0);
            let shifted = s.map(|v| v + c);
            let sp = spec(-0.3);
            let a = margin_loss_value(&s, &y, &sp).unwrap();
            let b = margin_loss_value(&shifted, &y, &sp).unwrap();
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }
}
