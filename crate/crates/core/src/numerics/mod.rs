//! Dense linear algebra, stable softmax and seeded randomness.

mod matrix;
mod norm;
mod rng;
mod scalar;
mod softmax;

pub use matrix::{dot, Matrix};
pub use norm::{l2_norm, l2_normalize, NORM_EPS};
pub use rng::Rng;
pub use scalar::Scalar;
pub use softmax::{argmax, log_softmax, log_sum_exp, softmax};
pub(crate) use softmax::log_sum_exp_unchecked;
