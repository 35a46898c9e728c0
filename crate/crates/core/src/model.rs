//! MDP and policy data model.
//!
//! An [`Mdp`] can only be obtained through validation, so every value of the
//! type satisfies the model invariants: at least one action per state,
//! stochastic transition rows, and rewards in `[0, 1]`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Real;

/// Absolute tolerance on probability-row sums.
pub const ROW_SUM_TOL: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Action<T> {
    pub probs: Vec<T>,
    pub reward: T,
}

/// A finite MDP with ragged per-state action lists.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Mdp<T> {
    name: Option<String>,
    n_states: usize,
    actions: Vec<Vec<Action<T>>>,
}

impl<T: Real> Mdp<T> {
    /// Validates the raw data and renormalizes each accepted row once so it
    /// sums to one.
    pub fn new(name: Option<String>, actions: Vec<Vec<Action<T>>>) -> Result<Self> {
        let n_states = actions.len();
        if n_states == 0 {
            return Err(Error::NoStates);
        }
        let mut actions = actions;
        for (s, acts) in actions.iter_mut().enumerate() {
            if acts.is_empty() {
                return Err(Error::EmptyActionSet(s));
            }
            for (a, act) in acts.iter_mut().enumerate() {
                if act.probs.len() != n_states {
                    return Err(Error::ProbLength {
                        state: s,
                        action: a,
                        expected: n_states,
                        got: act.probs.len(),
                    });
                }
                if let Some(&p) = act.probs.iter().find(|p| !p.is_finite() || **p < T::zero()) {
                    return Err(Error::InvalidProbability { state: s, action: a, value: p.as_f64() });
                }
                let sum: T = act.probs.iter().copied().sum();
                if (sum - T::one()).abs() > T::lit(ROW_SUM_TOL).max(T::epsilon() * T::lit(8.0)) {
                    return Err(Error::RowSumError { state: s, action: a, sum: sum.as_f64() });
                }
                if !(act.reward >= T::zero() && act.reward <= T::one()) {
                    return Err(Error::RewardRangeError {
                        state: s,
                        action: a,
                        reward: act.reward.as_f64(),
                    });
                }
                // Rows already within summation rounding of one are left
                // untouched, which keeps renormalization idempotent.
                let rounding = T::epsilon() * T::from_count(2 * n_states.max(1));
                if (sum - T::one()).abs() > rounding {
                    for p in act.probs.iter_mut() {
                        *p = *p / sum;
                    }
                }
            }
        }
        Ok(Self { name, n_states, actions })
    }

    pub fn name(&self) -> Option<&str> {
        self.name.as_deref()
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn actions(&self, s: usize) -> &[Action<T>] {
        &self.actions[s]
    }

    pub fn num_actions(&self, s: usize) -> usize {
        self.actions[s].len()
    }

    pub fn action(&self, s: usize, a: usize) -> &Action<T> {
        &self.actions[s][a]
    }

    pub fn states(&self) -> &[Vec<Action<T>>] {
        &self.actions
    }

    /// `P_{sa} v` with a fixed left-to-right summation order.
    pub fn expect(&self, s: usize, a: usize, v: &[T]) -> T {
        self.actions[s][a]
            .probs
            .iter()
            .zip(v)
            .fold(T::zero(), |acc, (&p, &x)| acc + p * x)
    }

    /// Number of deterministic stationary policies, saturating at `u128::MAX`.
    pub fn policy_count(&self) -> u128 {
        self.actions
            .iter()
            .fold(1u128, |acc, acts| acc.saturating_mul(acts.len() as u128))
    }

    pub fn with_name(mut self, name: impl Into<String>) -> Self {
        self.name = Some(name.into());
        self
    }

    /// Converts to another scalar type. Rows are renormalized in the target
    /// type, so this fails only if rounding pushes a reward out of `[0, 1]`.
    pub fn cast<U: Real>(&self) -> Result<Mdp<U>> {
        let actions = self
            .actions
            .iter()
            .map(|acts| {
                acts.iter()
                    .map(|a| Action {
                        probs: a.probs.iter().map(|&p| U::lit(p.as_f64())).collect(),
                        reward: U::lit(a.reward.as_f64()),
                    })
                    .collect()
            })
            .collect();
        Mdp::new(self.name.clone(), actions)
    }
}

/// Stationary Markov policy, deterministic or randomized.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy<T> {
    Deterministic(Vec<usize>),
    Randomized(Vec<Vec<T>>),
}

impl<T: Real> Policy<T> {
    pub fn deterministic(actions: Vec<usize>) -> Self {
        Policy::Deterministic(actions)
    }

    pub fn len(&self) -> usize {
        match self {
            Policy::Deterministic(d) => d.len(),
            Policy::Randomized(r) => r.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn is_deterministic(&self) -> bool {
        matches!(self, Policy::Deterministic(_))
    }

    pub fn as_deterministic(&self) -> Option<&[usize]> {
        match self {
            Policy::Deterministic(d) => Some(d),
            Policy::Randomized(_) => None,
        }
    }

    /// Checks lengths, index ranges and (for randomized policies) that each
    /// row is a probability vector within [`ROW_SUM_TOL`].
    pub fn validate(&self, mdp: &Mdp<T>) -> Result<()> {
        if self.len() != mdp.n_states() {
            return Err(Error::PolicyMismatch(format!(
                "policy covers {} states, MDP has {}",
                self.len(),
                mdp.n_states()
            )));
        }
        match self {
            Policy::Deterministic(d) => {
                for (s, &a) in d.iter().enumerate() {
                    if a >= mdp.num_actions(s) {
                        return Err(Error::PolicyMismatch(format!(
                            "state {s}: action {a} out of range ({} actions)",
                            mdp.num_actions(s)
                        )));
                    }
                }
            }
            Policy::Randomized(rows) => {
                for (s, row) in rows.iter().enumerate() {
                    if row.len() != mdp.num_actions(s) {
                        return Err(Error::PolicyMismatch(format!(
                            "state {s}: {} weights for {} actions",
                            row.len(),
                            mdp.num_actions(s)
                        )));
                    }
                    if row.iter().any(|w| !w.is_finite() || *w < T::zero()) {
                        return Err(Error::PolicyMismatch(format!("state {s}: negative weight")));
                    }
                    let sum: T = row.iter().copied().sum();
                    if (sum - T::one()).abs() > T::lit(ROW_SUM_TOL).max(T::epsilon() * T::lit(8.0)) {
                        return Err(Error::PolicyMismatch(format!(
                            "state {s}: weights sum to {sum}"
                        )));
                    }
                }
            }
        }
        Ok(())
    }

    /// Nonzero `(action, weight)` pairs at state `s`.
    pub fn weights(&self, s: usize) -> Vec<(usize, T)> {
        match self {
            Policy::Deterministic(d) => vec![(d[s], T::one())],
            Policy::Randomized(rows) => rows[s]
                .iter()
                .enumerate()
                .filter(|(_, w)| **w > T::zero())
                .map(|(a, &w)| (a, w))
                .collect(),
        }
    }

    /// Expands to a randomized policy with one-hot rows.
    pub fn to_randomized(&self, mdp: &Mdp<T>) -> Policy<T> {
        match self {
            Policy::Randomized(_) => self.clone(),
            Policy::Deterministic(d) => Policy::Randomized(
                d.iter()
                    .enumerate()
                    .map(|(s, &a)| {
                        let mut row = vec![T::zero(); mdp.num_actions(s)];
                        row[a] = T::one();
                        row
                    })
                    .collect(),
            ),
        }
    }
}

/// Validates an MDP given as raw action lists (the `validate` operation).
pub fn validate<T: Real>(name: Option<String>, actions: Vec<Vec<Action<T>>>) -> Result<Mdp<T>> {
    Mdp::new(name, actions)
}
