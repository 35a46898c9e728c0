//! Operators the iteration schemes act on.

use std::fmt;

use crate::bellman::{apply_optimality, evaluate_unchecked, DiscountFactor};
use crate::error::Result;
use crate::generators::{random_vector, SplitMix64};
use crate::model::{Mdp, Policy};
use crate::scalar::Real;
use crate::vector::{sup_dist, ValueVec};

/// A map `R^dim → R^dim`. `apply` must be pure.
pub trait Operator<T: Real>: Sync {
    fn dim(&self) -> usize;
    /// Callers guarantee `x.len() == self.dim()`.
    fn apply(&self, x: &[T]) -> ValueVec<T>;
    /// Declared Lipschitz constant in the sup-norm, if known to be at most 1.
    fn contraction(&self) -> Option<T> {
        None
    }
    fn label(&self) -> String;
}

type ApplyFn<'a, T> = Box<dyn Fn(&[T]) -> ValueVec<T> + Send + Sync + 'a>;

/// An operator built from a closure.
///
/// A declared contraction factor is spot-checked on random pairs when the
/// handle is built; a violation is logged, not rejected.
pub struct OperatorHandle<'a, T: Real> {
    dim: usize,
    apply: ApplyFn<'a, T>,
    contraction: Option<T>,
    label: String,
    violations: usize,
}

/// Number of random pairs used by the Lipschitz spot check.
pub const SPOT_CHECK_PAIRS: usize = 16;

impl<'a, T: Real> OperatorHandle<'a, T> {
    pub fn new(
        dim: usize,
        label: impl Into<String>,
        contraction: Option<T>,
        apply: impl Fn(&[T]) -> ValueVec<T> + Send + Sync + 'a,
    ) -> Self {
        let mut handle =
            Self { dim, apply: Box::new(apply), contraction, label: label.into(), violations: 0 };
        if let Some(g) = contraction {
            handle.violations = handle.spot_check(g);
            if handle.violations > 0 {
                log::warn!(
                    "operator `{}` violated its declared contraction {} on {}/{} random pairs",
                    handle.label,
                    g,
                    handle.violations,
                    SPOT_CHECK_PAIRS
                );
            }
        }
        handle
    }

    /// Wraps any [`Operator`] in a handle, running the same spot check.
    pub fn from_operator(op: &'a (impl Operator<T> + ?Sized)) -> Self {
        Self::new(op.dim(), op.label(), op.contraction(), move |x| op.apply(x))
    }

    /// Number of spot-check pairs on which the declared factor failed.
    pub fn contraction_violations(&self) -> usize {
        self.violations
    }

    fn spot_check(&self, gamma: T) -> usize {
        let mut rng = SplitMix64::new(0x5EED_0F_C0DE);
        let mut bad = 0;
        for _ in 0..SPOT_CHECK_PAIRS {
            let x: Vec<T> = random_vector(self.dim, -10.0, 10.0, &mut rng).into_iter().map(T::lit).collect();
            let y: Vec<T> = random_vector(self.dim, -10.0, 10.0, &mut rng).into_iter().map(T::lit).collect();
            let fx = (self.apply)(&x);
            let fy = (self.apply)(&y);
            assert_eq!(fx.len(), self.dim, "operator `{}` changed the dimension", self.label);
            let lhs = sup_dist(&fx, &fy).expect("equal lengths");
            let d = sup_dist(&x, &y).expect("equal lengths");
            let slack = T::lit(1e-9) * T::one().max(d) + T::epsilon() * T::lit(64.0);
            if lhs > gamma * d + slack {
                bad += 1;
            }
        }
        bad
    }
}

impl<T: Real> Operator<T> for OperatorHandle<'_, T> {
    fn dim(&self) -> usize {
        self.dim
    }
    fn apply(&self, x: &[T]) -> ValueVec<T> {
        (self.apply)(x)
    }
    fn contraction(&self) -> Option<T> {
        self.contraction
    }
    fn label(&self) -> String {
        self.label.clone()
    }
}

impl<T: Real> fmt::Debug for OperatorHandle<'_, T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("OperatorHandle")
            .field("dim", &self.dim)
            .field("contraction", &self.contraction)
            .field("label", &self.label)
            .finish()
    }
}

/// `T_γ`; `γ = 1` is the average-reward operator `T`.
#[derive(Clone, Copy, Debug)]
pub struct BellmanOptimality<'a, T> {
    pub mdp: &'a Mdp<T>,
    pub gamma: DiscountFactor<T>,
}

impl<'a, T: Real> BellmanOptimality<'a, T> {
    pub fn new(mdp: &'a Mdp<T>, gamma: DiscountFactor<T>) -> Self {
        Self { mdp, gamma }
    }
    pub fn undiscounted(mdp: &'a Mdp<T>) -> Self {
        Self::new(mdp, DiscountFactor::undiscounted())
    }
}

impl<T: Real> Operator<T> for BellmanOptimality<'_, T> {
    fn dim(&self) -> usize {
        self.mdp.n_states()
    }
    fn apply(&self, x: &[T]) -> ValueVec<T> {
        apply_optimality(self.mdp, x, self.gamma).expect("operator applied to a vector of the wrong length")
    }
    fn contraction(&self) -> Option<T> {
        Some(self.gamma.value())
    }
    fn label(&self) -> String {
        if self.gamma.is_discounted() {
            format!("T_gamma(gamma={})", self.gamma.value())
        } else {
            "T".into()
        }
    }
}

/// `T_γ^π` for a policy validated at construction.
#[derive(Clone, Debug)]
pub struct BellmanEvaluation<'a, T> {
    mdp: &'a Mdp<T>,
    pi: &'a Policy<T>,
    gamma: DiscountFactor<T>,
}

impl<'a, T: Real> BellmanEvaluation<'a, T> {
    pub fn new(mdp: &'a Mdp<T>, pi: &'a Policy<T>, gamma: DiscountFactor<T>) -> Result<Self> {
        pi.validate(mdp)?;
        Ok(Self { mdp, pi, gamma })
    }
}

impl<T: Real> Operator<T> for BellmanEvaluation<'_, T> {
    fn dim(&self) -> usize {
        self.mdp.n_states()
    }
    fn apply(&self, x: &[T]) -> ValueVec<T> {
        assert_eq!(x.len(), self.mdp.n_states(), "operator applied to a vector of the wrong length");
        evaluate_unchecked(self.mdp, self.pi, x, self.gamma.value())
    }
    fn contraction(&self) -> Option<T> {
        Some(self.gamma.value())
    }
    fn label(&self) -> String {
        format!("T^pi(gamma={})", self.gamma.value())
    }
}

/// `x ↦ L(x) − shift`.
pub struct Shifted<'a, T: Real, O: ?Sized> {
    pub inner: &'a O,
    pub shift: ValueVec<T>,
}

impl<T: Real, O: Operator<T> + ?Sized> Operator<T> for Shifted<'_, T, O> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn apply(&self, x: &[T]) -> ValueVec<T> {
        &self.inner.apply(x) - &self.shift
    }
    fn contraction(&self) -> Option<T> {
        self.inner.contraction()
    }
    fn label(&self) -> String {
        format!("{} - shift", self.inner.label())
    }
}
