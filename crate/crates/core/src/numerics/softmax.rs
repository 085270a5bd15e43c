use super::Scalar;
use crate::error::{ensure, Error, Result};

/// `log Σ exp(x)` with max subtraction. Assumes `x` is nonempty and finite.
pub(crate) fn log_sum_exp_unchecked<T: Scalar>(x: &[T]) -> T {
    let max = x.iter().fold(T::neg_infinity(), |m, &v| m.max(v));
    let mut acc = T::zero();
    for &v in x {
        acc += (v - max).exp();
    }
    max + acc.ln()
}

fn check<T: Scalar>(x: &[T]) -> Result<()> {
    ensure!(!x.is_empty(), "softmax of an empty vector");
    if let Some(i) = x.iter().position(|v| !v.is_finite()) {
        return Err(Error::numeric(format!("non-finite logit at index {i}")));
    }
    Ok(())
}

pub fn log_sum_exp<T: Scalar>(x: &[T]) -> Result<T> {
    check(x)?;
    Ok(log_sum_exp_unchecked(x))
}

/// Log of the softmax distribution over `logits`.
pub fn log_softmax<T: Scalar>(logits: &[T]) -> Result<Vec<T>> {
    check(logits)?;
    // Subtract the max before the log term so large logits keep precision.
    let max = logits.iter().fold(T::neg_infinity(), |m, &v| m.max(v));
    let shifted: Vec<T> = logits.iter().map(|&v| v - max).collect();
    let log_norm = log_sum_exp_unchecked(&shifted);
    Ok(shifted.into_iter().map(|v| v - log_norm).collect())
}

pub fn softmax<T: Scalar>(logits: &[T]) -> Result<Vec<T>> {
    Ok(log_softmax(logits)?.into_iter().map(T::exp).collect())
}

/// Index of the largest entry; ties resolve to the lowest index.
pub fn argmax<T: Scalar>(x: &[T]) -> Option<usize> {
    let mut best: Option<(usize, T)> = None;
    for (i, &v) in x.iter().enumerate() {
        match best {
            Some((_, b)) if v <= b => {}
            _ => best = Some((i, v)),
        }
    }
    best.map(|(i, _)| i)
}
