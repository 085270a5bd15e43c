//! Adam with weight decay and a cosine learning-rate schedule.

use std::fmt;
use std::str::FromStr;

use crate::error::{ensure, Error, Result};
use crate::numerics::{Matrix, Scalar};

/// Anything exposing `(parameter, gradient)` pairs in a fixed order.
pub trait Parameters<T> {
    fn visit_parameters(
        &mut self,
        f: &mut dyn FnMut(&str, &mut Matrix<T>, &mut Matrix<T>) -> Result<()>,
    ) -> Result<()>;
}

/// How weight decay enters the update.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum WeightDecayMode {
    /// `p ← p − lr·λ·p` next to the Adam step (AdamW).
    Decoupled,
    /// `g ← g + λ·p` before the moments are updated.
    L2,
}

impl WeightDecayMode {
    pub fn as_str(self) -> &'static str {
        match self {
            WeightDecayMode::Decoupled => "decoupled",
            WeightDecayMode::L2 => "l2",
        }
    }
}

impl fmt::Display for WeightDecayMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for WeightDecayMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "decoupled" => Ok(WeightDecayMode::Decoupled),
            "l2" => Ok(WeightDecayMode::L2),
            other => Err(Error::contract(format!(
                "unknown weight decay mode '{other}' (expected decoupled or l2)"
            ))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OptimConfig<T> {
    pub lr0: T,
    pub beta1: T,
    pub beta2: T,
    pub eps: T,
    pub weight_decay: T,
    pub decay_mode: WeightDecayMode,
    pub total_steps: usize,
}

impl<T: Scalar> OptimConfig<T> {
    /// `lr0 = 3e-3`, betas `(0.9, 0.999)`, `eps = 1e-8`, `λ = 1e-4` decoupled.
    pub fn new(total_steps: usize) -> Self {
        Self {
            lr0: T::of(3e-3),
            beta1: T::of(0.9),
            beta2: T::of(0.999),
            eps: T::of(1e-8),
            weight_decay: T::of(1e-4),
            decay_mode: WeightDecayMode::Decoupled,
            total_steps,
        }
    }

    pub fn validate(&self) -> Result<()> {
        ensure!(self.lr0 > T::zero(), "initial learning rate must be positive");
        ensure!(self.total_steps >= 1, "total_steps must be at least 1");
        ensure!(
            self.weight_decay >= T::zero(),
            "weight decay must be nonnegative"
        );
        ensure!(
            self.beta1 >= T::zero()
                && self.beta1 < T::one()
                && self.beta2 >= T::zero()
                && self.beta2 < T::one(),
            "Adam betas must lie in [0, 1)"
        );
        ensure!(self.eps > T::zero(), "Adam eps must be positive");
        Ok(())
    }

    /// Cosine-decayed learning rate `lr0 · ½ (1 + cos(π t / T))`.
    pub fn lr_at(&self, t: usize) -> Result<T> {
        ensure!(
            t <= self.total_steps,
            "step {t} is past the schedule end {}",
            self.total_steps
        );
        let frac = T::of_usize(t) / T::of_usize(self.total_steps);
        Ok(self.lr0 * T::of(0.5) * (T::one() + (T::PI() * frac).cos()))
    }
}

/// Per-parameter moment estimates and the step counter.
#[derive(Clone, Debug, Default)]
pub struct Adam<T> {
    first: Vec<Matrix<T>>,
    second: Vec<Matrix<T>>,
    step: usize,
}

impl<T: Scalar> Adam<T> {
    pub fn new() -> Self {
        Self {
            first: Vec::new(),
            second: Vec::new(),
            step: 0,
        }
    }

    /// Number of updates applied so far.
    pub fn steps_taken(&self) -> usize {
        self.step
    }

    /// One bias-corrected Adam update at `lr_at(t)` for every parameter,
    /// followed by zeroing each gradient buffer.
    ///
    /// Non-finite gradients abort the step before any parameter changes.
    pub fn step<P: Parameters<T> + ?Sized>(&mut self, params: &mut P, cfg: &OptimConfig<T>) -> Result<()> {
        cfg.validate()?;
        let lr = cfg.lr_at(self.step)?;

        params.visit_parameters(&mut |name, _p, g| {
            if g.is_finite() {
                Ok(())
            } else {
                Err(Error::numeric(format!("non-finite gradient in parameter '{name}'")))
            }
        })?;

        let t = self.step + 1;
        let bias1 = T::one() - cfg.beta1.powi(t as i32);
        let bias2 = T::one() - cfg.beta2.powi(t as i32);
        let first = &mut self.first;
        let second = &mut self.second;
        let mut index = 0usize;
        params.visit_parameters(&mut |name, p, g| {
            if index == first.len() {
                first.push(Matrix::zeros(p.rows(), p.cols()));
                second.push(Matrix::zeros(p.rows(), p.cols()));
            }
            let (m, v) = (&mut first[index], &mut second[index]);
            ensure!(
                m.shape() == p.shape() && g.shape() == p.shape(),
                "optimizer state for '{name}' does not match the parameter shape"
            );
            let pd = p.as_mut_slice();
            let gd = g.as_mut_slice();
            for (((pi, gi), mi), vi) in pd
                .iter_mut()
                .zip(gd.iter_mut())
                .zip(m.as_mut_slice())
                .zip(v.as_mut_slice())
            {
                let mut grad = *gi;
                if cfg.decay_mode == WeightDecayMode::L2 {
                    grad += cfg.weight_decay * *pi;
                }
                *mi = cfg.beta1 * *mi + (T::one() - cfg.beta1) * grad;
                *vi = cfg.beta2 * *vi + (T::one() - cfg.beta2) * grad * grad;
                let m_hat = *mi / bias1;
                let v_hat = *vi / bias2;
                let mut update = m_hat / (v_hat.sqrt() + cfg.eps);
                if cfg.decay_mode == WeightDecayMode::Decoupled {
                    update += cfg.weight_decay * *pi;
                }
                *pi -= lr * update;
                *gi = T::zero();
            }
            index += 1;
            Ok(())
        })?;
        self.step = t;
        Ok(())
    }
}
