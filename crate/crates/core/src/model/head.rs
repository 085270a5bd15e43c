use std::fmt;
use std::str::FromStr;

use crate::error::{ensure, Error, Result};
use crate::numerics::{l2_norm, Matrix, Scalar, NORM_EPS};

/// Similarity between a feature vector and a classifier column.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SimilarityKind {
    /// `W_jᵀ z`
    InnerProduct,
    /// `W_jᵀ z / (‖W_j‖ ‖z‖)`
    Cosine,
}

impl SimilarityKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SimilarityKind::InnerProduct => "inner_product",
            SimilarityKind::Cosine => "cosine",
        }
    }

    /// Default softmax temperature for this head.
    pub fn default_temperature(self) -> f64 {
        match self {
            SimilarityKind::InnerProduct => 1.0,
            SimilarityKind::Cosine => 10.0,
        }
    }
}

impl fmt::Display for SimilarityKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SimilarityKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "inner_product" | "inner-product" | "softmax" => Ok(SimilarityKind::InnerProduct),
            "cosine" => Ok(SimilarityKind::Cosine),
            other => Err(Error::contract(format!(
                "unknown similarity '{other}' (expected inner_product or cosine)"
            ))),
        }
    }
}

/// Intermediate values kept by [`head_forward`] for the backward pass.
#[derive(Clone, Debug)]
pub struct HeadCache<T> {
    kind: SimilarityKind,
    // Cosine only: normalized rows of Z, normalized columns of W and their
    // (floored) norms.
    z_hat: Option<Matrix<T>>,
    z_norm: Vec<T>,
    w_hat: Option<Matrix<T>>,
    w_norm: Vec<T>,
}

fn normalize_rows<T: Scalar>(m: &Matrix<T>) -> (Matrix<T>, Vec<T>) {
    let eps = T::of(NORM_EPS);
    let mut out = m.clone();
    let mut norms = Vec::with_capacity(m.rows());
    for r in 0..m.rows() {
        let n = l2_norm(m.row(r)).max(eps);
        out.row_mut(r).iter_mut().for_each(|v| *v /= n);
        norms.push(n);
    }
    (out, norms)
}

fn normalize_cols<T: Scalar>(m: &Matrix<T>) -> (Matrix<T>, Vec<T>) {
    let (t, norms) = normalize_rows(&m.transpose());
    (t.transpose(), norms)
}

/// Scores `s(z_i, W_j)` for every row of `features` (N×D) against every
/// column of `weights` (D×C).
pub fn head_forward<T: Scalar>(
    features: &Matrix<T>,
    weights: &Matrix<T>,
    kind: SimilarityKind,
) -> Result<(Matrix<T>, HeadCache<T>)> {
    ensure!(
        features.cols() == weights.rows(),
        "feature width {} does not match classifier rows {}",
        features.cols(),
        weights.rows()
    );
    match kind {
        SimilarityKind::InnerProduct => Ok((
            features.matmul(weights)?,
            HeadCache {
                kind,
                z_hat: None,
                z_norm: Vec::new(),
                w_hat: None,
                w_norm: Vec::new(),
            },
        )),
        SimilarityKind::Cosine => {
            let (z_hat, z_norm) = normalize_rows(features);
            let (w_hat, w_norm) = normalize_cols(weights);
            let scores = z_hat.matmul(&w_hat)?;
            Ok((
                scores,
                HeadCache {
                    kind,
                    z_hat: Some(z_hat),
                    z_norm,
                    w_hat: Some(w_hat),
                    w_norm,
                },
            ))
        }
    }
}

// Backprop through v̂ = v / max(‖v‖, eps) for one vector:
// dv = (g − (g·v̂) v̂) / ‖v‖ when the norm is above the floor, g / eps otherwise.
fn normalization_backward<T: Scalar>(g: &mut [T], v_hat: &[T], norm: T) {
    if norm > T::of(NORM_EPS) {
        let proj = crate::numerics::dot(g, v_hat);
        for (gi, &vi) in g.iter_mut().zip(v_hat) {
            *gi = (*gi - proj * vi) / norm;
        }
    } else {
        g.iter_mut().for_each(|gi| *gi /= norm);
    }
}

/// Gradients of a scalar objective w.r.t. features and weights, given its
/// gradient `upstream` (N×C) w.r.t. the scores.
pub fn head_backward<T: Scalar>(
    features: &Matrix<T>,
    weights: &Matrix<T>,
    cache: &HeadCache<T>,
    upstream: &Matrix<T>,
) -> Result<(Matrix<T>, Matrix<T>)> {
    ensure!(
        upstream.shape() == (features.rows(), weights.cols()),
        "upstream gradient is {}x{}, scores are {}x{}",
        upstream.rows(),
        upstream.cols(),
        features.rows(),
        weights.cols()
    );
    match cache.kind {
        SimilarityKind::InnerProduct => {
            let grad_z = upstream.matmul_t(weights)?;
            let grad_w = features.t_matmul(upstream)?;
            Ok((grad_z, grad_w))
        }
        SimilarityKind::Cosine => {
            let (z_hat, w_hat) = match (&cache.z_hat, &cache.w_hat) {
                (Some(z), Some(w)) => (z, w),
                _ => return Err(Error::contract("cosine head cache is incomplete")),
            };
            let mut grad_z = upstream.matmul_t(w_hat)?;
            for r in 0..grad_z.rows() {
                normalization_backward(grad_z.row_mut(r), z_hat.row(r), cache.z_norm[r]);
            }
            // Work on columns of W as rows of Wᵀ.
            let mut grad_wt = upstream.t_matmul(z_hat)?;
            let w_hat_t = w_hat.transpose();
            for c in 0..grad_wt.rows() {
                normalization_backward(grad_wt.row_mut(c), w_hat_t.row(c), cache.w_norm[c]);
            }
            Ok((grad_z, grad_wt.transpose()))
        }
    }
}
