//! Checker for the sufficient condition under which a larger margin makes
//! novel-class features less discriminative.
//!
//! Between margins `m1 < m2` the base inverse discriminability
//! `a(m) = D_intra(base)/D_inter(base)` falls at rate
//! `r = (a(m1) − a(m2)) / (m2 − m1)` and the novel/base inter-class ratio
//! `ψ(m) = D_inter(novel)/D_inter(base)` falls at rate
//! `t = (ψ(m1) − ψ(m2)) / (m2 − m1)`. If novel intra-class variance is
//! `D_intra(novel) = Pˢ·D_intra(base) + (1 − Pˢ)·D_inter(base)`, then
//! `φ(novel, m) = ψ(m) / (1 − Pˢ(1 − a(m)))` and
//! `φ(novel, m2) < φ(novel, m1)` exactly when
//! `Pˢ · (t(1 − a(m1)) + r ψ(m1)) < t`.

use crate::error::{ensure, Result};
use crate::numerics::{Rng, Scalar};

/// Measured variances at two margins.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PropositionInstance<T> {
    pub m1: T,
    pub m2: T,
    /// `(D_inter, D_intra)` of the base classes at `m1` and `m2`.
    pub base_m1: (T, T),
    pub base_m2: (T, T),
    /// `D_inter` of the novel classes at `m1` and `m2`.
    pub novel_inter_m1: T,
    pub novel_inter_m2: T,
}

#[derive(Clone, Debug, PartialEq)]
pub enum PropositionVerdict<T> {
    /// `r ≤ 0` or `t ≤ 0`; the sufficient condition says nothing.
    NotApplicable { r: T, t: T, reason: String },
    Evaluated {
        r: T,
        t: T,
        /// Largest `Pˢ` for which the condition guarantees the ordering;
        /// `+∞` when it holds for every `Pˢ`.
        threshold: T,
        /// `Pˢ < threshold`.
        predicted: bool,
        phi_novel_m1: T,
        phi_novel_m2: T,
        /// `φ(novel, m2) < φ(novel, m1)` by direct evaluation.
        holds: bool,
    },
}

impl<T: Scalar> PropositionInstance<T> {
    pub fn validate(&self) -> Result<()> {
        ensure!(self.m1 < self.m2, "need m1 < m2, got {} and {}", self.m1, self.m2);
        for (name, v) in [
            ("base D_inter(m1)", self.base_m1.0),
            ("base D_intra(m1)", self.base_m1.1),
            ("base D_inter(m2)", self.base_m2.0),
            ("base D_intra(m2)", self.base_m2.1),
            ("novel D_inter(m1)", self.novel_inter_m1),
            ("novel D_inter(m2)", self.novel_inter_m2),
        ] {
            ensure!(v.is_finite() && v > T::zero(), "{name} must be positive, got {v}");
        }
        Ok(())
    }

    fn inv_phi_base(pair: (T, T)) -> T {
        pair.1 / pair.0
    }

    pub fn r(&self) -> T {
        (Self::inv_phi_base(self.base_m1) - Self::inv_phi_base(self.base_m2)) / (self.m2 - self.m1)
    }

    pub fn psi_m1(&self) -> T {
        self.novel_inter_m1 / self.base_m1.0
    }

    pub fn psi_m2(&self) -> T {
        self.novel_inter_m2 / self.base_m2.0
    }

    pub fn t(&self) -> T {
        (self.psi_m1() - self.psi_m2()) / (self.m2 - self.m1)
    }

    /// `t / (t(1 − a(m1)) + r ψ(m1))`, or `+∞` when the denominator is not
    /// positive.
    pub fn threshold(&self) -> T {
        let t = self.t();
        let den = t * (T::one() - Self::inv_phi_base(self.base_m1)) + self.r() * self.psi_m1();
        if den > T::zero() {
            t / den
        } else {
            T::infinity()
        }
    }

    /// `φ(novel)` at each margin under the substitution for `D_intra(novel)`.
    pub fn phi_novel(&self, p_s: T) -> (T, T) {
        let at = |base: (T, T), novel_inter: T| {
            let intra = p_s * base.1 + (T::one() - p_s) * base.0;
            novel_inter / intra
        };
        (
            at(self.base_m1, self.novel_inter_m1),
            at(self.base_m2, self.novel_inter_m2),
        )
    }
}

pub fn check_proposition<T: Scalar>(
    inst: &PropositionInstance<T>,
    p_s: T,
) -> Result<PropositionVerdict<T>> {
    inst.validate()?;
    ensure!(
        p_s > T::zero() && p_s <= T::one(),
        "Pˢ must lie in (0, 1], got {p_s}"
    );
    let (r, t) = (inst.r(), inst.t());
    if !(r > T::zero() && t > T::zero()) {
        let reason = match (r > T::zero(), t > T::zero()) {
            (false, false) => "r ≤ 0 and t ≤ 0",
            (false, true) => "r ≤ 0",
            _ => "t ≤ 0",
        };
        return Ok(PropositionVerdict::NotApplicable {
            r,
            t,
            reason: format!("proposition not applicable: {reason}"),
        });
    }
    let threshold = inst.threshold();
    let (phi_novel_m1, phi_novel_m2) = inst.phi_novel(p_s);
    Ok(PropositionVerdict::Evaluated {
        r,
        t,
        threshold,
        predicted: p_s < threshold,
        phi_novel_m1,
        phi_novel_m2,
        holds: phi_novel_m2 < phi_novel_m1,
    })
}

/// Random instance with `r > 0` and `t > 0`.
pub fn random_admissible_instance(rng: &mut Rng) -> PropositionInstance<f64> {
    let m1 = rng.uniform_in(-1.0, 0.5);
    let m2 = m1 + rng.uniform_in(0.05, 1.0);
    let span = m2 - m1;
    let inter1 = rng.uniform_in(0.2, 3.0);
    let inter2 = rng.uniform_in(0.2, 3.0);
    let a1 = rng.uniform_in(0.05, 2.0);
    let a2 = a1 - rng.uniform_in(0.01, 0.95) * a1;
    let psi1 = rng.uniform_in(0.1, 2.0);
    let psi2 = psi1 - rng.uniform_in(0.01, 0.95) * psi1;
    debug_assert!(span > 0.0);
    PropositionInstance {
        m1,
        m2,
        base_m1: (inter1, a1 * inter1),
        base_m2: (inter2, a2 * inter2),
        novel_inter_m1: psi1 * inter1,
        novel_inter_m2: psi2 * inter2,
    }
}
