//! Bellman optimality and evaluation operators.
//!
//! `T_γ(V)(s) = max_a r(s,a) + γ P_{sa} V` and `T_γ^π(V)(s) = Σ_a π(a|s)[r(s,a) + γ P_{sa} V]`.
//! `γ = 1` gives the average-reward operators `T` and `T^π`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Mdp, Policy};
use crate::scalar::Real;
use crate::vector::{sup_dist, ValueVec};

/// Discount factor in `(0, 1]`; `1` denotes the undiscounted operator.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct DiscountFactor<T>(T);

impl<T: Real> DiscountFactor<T> {
    pub fn new(gamma: T) -> Result<Self> {
        if gamma > T::zero() && gamma <= T::one() {
            Ok(Self(gamma))
        } else {
            Err(Error::GammaOutOfRange(gamma.as_f64()))
        }
    }

    pub fn undiscounted() -> Self {
        Self(T::one())
    }

    pub fn value(self) -> T {
        self.0
    }

    pub fn is_discounted(self) -> bool {
        self.0 < T::one()
    }

    /// `floor(1 / (1 - γ))`, guarding against `1/(1-γ)` landing a hair below
    /// an integer (as it does for `γ = 1 - 1/n`).
    pub fn effective_horizon(self) -> Result<usize> {
        if !self.is_discounted() {
            return Err(Error::GammaOutOfRange(self.0.as_f64()));
        }
        let h = 1.0 / (1.0 - self.0.as_f64());
        Ok((h + 1e-9 * h.max(1.0)).floor() as usize)
    }
}

fn check_len<T>(mdp: &Mdp<T>, v: &[T]) -> Result<()>
where
    T: Real,
{
    if v.len() != mdp.n_states() {
        return Err(Error::LengthMismatch { expected: mdp.n_states(), got: v.len() });
    }
    Ok(())
}

/// One-step lookahead `r(s,a) + γ P_{sa} V`.
#[inline]
pub fn q_value<T: Real>(mdp: &Mdp<T>, s: usize, a: usize, v: &[T], gamma: T) -> T {
    mdp.action(s, a).reward + gamma * mdp.expect(s, a, v)
}

/// Best lookahead value and its smallest maximizing action.
fn best_action<T: Real>(mdp: &Mdp<T>, s: usize, v: &[T], gamma: T) -> (usize, T) {
    let mut best = (0, q_value(mdp, s, 0, v, gamma));
    for a in 1..mdp.num_actions(s) {
        let q = q_value(mdp, s, a, v, gamma);
        if q > best.1 {
            best = (a, q);
        }
    }
    best
}

pub fn apply_optimality<T: Real>(mdp: &Mdp<T>, v: &[T], gamma: DiscountFactor<T>) -> Result<ValueVec<T>> {
    check_len(mdp, v)?;
    Ok((0..mdp.n_states()).map(|s| best_action(mdp, s, v, gamma.0).1).collect())
}

pub fn apply_evaluation<T: Real>(
    mdp: &Mdp<T>,
    pi: &Policy<T>,
    v: &[T],
    gamma: DiscountFactor<T>,
) -> Result<ValueVec<T>> {
    check_len(mdp, v)?;
    pi.validate(mdp)?;
    Ok(evaluate_unchecked(mdp, pi, v, gamma.0))
}

pub(crate) fn evaluate_unchecked<T: Real>(mdp: &Mdp<T>, pi: &Policy<T>, v: &[T], gamma: T) -> ValueVec<T> {
    match pi {
        Policy::Deterministic(d) => {
            d.iter().enumerate().map(|(s, &a)| q_value(mdp, s, a, v, gamma)).collect()
        }
        Policy::Randomized(rows) => rows
            .iter()
            .enumerate()
            .map(|(s, row)| {
                row.iter()
                    .enumerate()
                    .fold(T::zero(), |acc, (a, &w)| {
                        if w > T::zero() {
                            acc + w * q_value(mdp, s, a, v, gamma)
                        } else {
                            acc
                        }
                    })
            })
            .collect(),
    }
}

/// Deterministic greedy policy; ties go to the smallest action index.
pub fn greedy<T: Real>(mdp: &Mdp<T>, v: &[T], gamma: DiscountFactor<T>) -> Result<Policy<T>> {
    check_len(mdp, v)?;
    Ok(Policy::Deterministic((0..mdp.n_states()).map(|s| best_action(mdp, s, v, gamma.0).0).collect()))
}

/// `‖T_γ(V) − V‖_∞` for `γ < 1`.
pub fn residual_discounted<T: Real>(mdp: &Mdp<T>, v: &[T], gamma: DiscountFactor<T>) -> Result<T> {
    if !gamma.is_discounted() {
        return Err(Error::GammaOutOfRange(gamma.0.as_f64()));
    }
    let tv = apply_optimality(mdp, v, gamma)?;
    sup_dist(&tv, v)
}

/// `‖T(V) − V − ρ‖_∞`.
pub fn residual_average<T: Real>(mdp: &Mdp<T>, v: &[T], rho: &[T]) -> Result<T> {
    check_len(mdp, rho)?;
    let tv = apply_optimality(mdp, v, DiscountFactor::undiscounted())?;
    Ok(shifted_residual(&tv, v, rho))
}

/// `‖tv − v − shift‖_∞` for precomputed `tv`.
pub(crate) fn shifted_residual<T: Real>(tv: &[T], v: &[T], shift: &[T]) -> T {
    tv.iter()
        .zip(v)
        .zip(shift)
        .fold(T::zero(), |m, ((&a, &b), &c)| m.max((a - b - c).abs()))
}

/// `M(P ρ)`: the per-state maximum of `P_{sa} ρ`.
pub fn max_expected<T: Real>(mdp: &Mdp<T>, rho: &[T]) -> ValueVec<T> {
    (0..mdp.n_states())
        .map(|s| {
            (0..mdp.num_actions(s))
                .map(|a| mdp.expect(s, a, rho))
                .fold(T::neg_infinity(), T::max)
        })
        .collect()
}

/// `P_π v` for a possibly randomized policy.
pub fn policy_expect<T: Real>(mdp: &Mdp<T>, pi: &Policy<T>, v: &[T]) -> ValueVec<T> {
    (0..mdp.n_states())
        .map(|s| {
            pi.weights(s)
                .into_iter()
                .fold(T::zero(), |acc, (a, w)| acc + w * mdp.expect(s, a, v))
        })
        .collect()
}
