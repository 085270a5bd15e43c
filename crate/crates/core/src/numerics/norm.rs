use super::Scalar;

/// Floor applied to norms before dividing.
pub const NORM_EPS: f64 = 1e-12;

pub fn l2_norm<T: Scalar>(v: &[T]) -> T {
    super::dot(v, v).sqrt()
}

/// `v / max(‖v‖₂, eps)`. A zero vector maps to zero.
pub fn l2_normalize<T: Scalar>(v: &[T], eps: T) -> Vec<T> {
    let denom = l2_norm(v).max(eps);
    v.iter().map(|&x| x / denom).collect()
}
