//! Complexity parameters: the minimum gain-optimality gap `Δ`, the
//! gain-dropping times `T_drop^π` and `T_drop`, and the transient times `B^π`
//! and `B`.
//!
//! A pair `(s, a)` is gain-dropping when `rho*(s) - P_{sa} rho* > tol_gap`
//! with `tol_gap = 1e-9 max(1, ‖rho*‖)`. Every quantity below depends on this
//! classification, so a misclassified pair silently changes `T_drop`.

use serde::Serialize;

use crate::chain;
use crate::error::{Error, Result};
use crate::model::{Mdp, Policy};
use crate::oracle::{fold_policies, Gap, ENUMERATION_CAP};
use crate::scalar::Real;
use crate::vector::sup_norm;

/// Sweep cap for the total-reward value iteration behind [`tdrop`].
pub const TDROP_MAX_SWEEPS: usize = 1_000_000;
const TDROP_STOP: f64 = 1e-12;
const TDROP_SUSPECT: f64 = 1e-9;
/// Per-policy maps are kept in reports only up to this many policies.
pub const REPORT_LIMIT: u128 = 4096;

pub fn tol_gap<T: Real>(rho_star: &[T]) -> T {
    T::lit(1e-9) * T::one().max(sup_norm(rho_star))
}

fn drop_of<T: Real>(mdp: &Mdp<T>, rho: &[T], s: usize, a: usize) -> T {
    rho[s] - mdp.expect(s, a, rho)
}

/// `Δ`: the smallest gap above `tol_gap`, or `Infinite` if none.
pub fn min_gain_gap<T: Real>(mdp: &Mdp<T>, rho_star: &[T]) -> Gap<T> {
    let tol = tol_gap(rho_star);
    let mut best: Option<T> = None;
    for s in 0..mdp.n_states() {
        for a in 0..mdp.num_actions(s) {
            let g = drop_of(mdp, rho_star, s, a);
            if g > tol {
                best = Some(best.map_or(g, |b| b.min(g)));
            }
        }
    }
    best.map_or(Gap::Infinite, Gap::Finite)
}

/// Indicator table `rbar[s][a] = 1{rho*(s) - P_{sa} rho* > tol_gap}`.
pub fn gain_dropping_reward<T: Real>(mdp: &Mdp<T>, rho_star: &[T]) -> Vec<Vec<T>> {
    let tol = tol_gap(rho_star);
    (0..mdp.n_states())
        .map(|s| {
            (0..mdp.num_actions(s))
                .map(|a| if drop_of(mdp, rho_star, s, a) > tol { T::one() } else { T::zero() })
                .collect()
        })
        .collect()
}

/// `rbar_pi(s) = Σ_a pi(a|s) rbar(s, a)`.
pub fn policy_rbar<T: Real>(rbar: &[Vec<T>], pi: &Policy<T>) -> Vec<T> {
    (0..rbar.len())
        .map(|s| pi.weights(s).into_iter().fold(T::zero(), |acc, (a, w)| acc + w * rbar[s][a]))
        .collect()
}

pub(crate) fn tdrop_from_analysis<T: Real>(analysis: &chain::ChainAnalysis<T>, rbar_pi: &[T]) -> Result<T> {
    for (s, &r) in rbar_pi.iter().enumerate() {
        if r > T::zero() && !analysis.is_transient(s) {
            return Err(Error::GainDropOnRecurrentState(s));
        }
    }
    let total = analysis.deviation.mul_vec(rbar_pi);
    Ok(total.into_iter().fold(T::zero(), T::max))
}

/// `T_drop^π = max_s (H_{P_π} rbar_π)(s)`, the worst-case expected number of
/// gain-dropping steps. Valid for randomized policies too.
pub fn tdrop_policy<T: Real>(mdp: &Mdp<T>, pi: &Policy<T>, rho_star: &[T]) -> Result<T> {
    let rbar = gain_dropping_reward(mdp, rho_star);
    let analysis = chain::analyze(mdp, pi)?;
    tdrop_from_analysis(&analysis, &policy_rbar(&rbar, pi))
}

/// `T_drop` as the optimal expected total `rbar`-reward, by monotone value
/// iteration from zero.
pub fn tdrop<T: Real>(mdp: &Mdp<T>, rho_star: &[T]) -> Result<T> {
    tdrop_with_cap(mdp, rho_star, TDROP_MAX_SWEEPS)
}

pub fn tdrop_with_cap<T: Real>(mdp: &Mdp<T>, rho_star: &[T], max_sweeps: usize) -> Result<T> {
    let rbar = gain_dropping_reward(mdp, rho_star);
    if rbar.iter().flatten().all(|&r| r == T::zero()) {
        return Ok(T::zero());
    }
    let n = mdp.n_states();
    let mut x = vec![T::zero(); n];
    let mut change = T::infinity();
    for _ in 0..max_sweeps {
        let next: Vec<T> = (0..n)
            .map(|s| {
                (0..mdp.num_actions(s))
                    .map(|a| rbar[s][a] + mdp.expect(s, a, &x))
                    .fold(T::neg_infinity(), T::max)
            })
            .collect();
        change = next.iter().zip(&x).fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs()));
        x = next;
        if change < T::lit(TDROP_STOP) {
            return Ok(x.into_iter().fold(T::zero(), T::max));
        }
    }
    if change > T::lit(TDROP_SUSPECT) {
        return Err(Error::NonconvergenceSuspected { sweeps: max_sweeps, change: change.as_f64() });
    }
    Ok(x.into_iter().fold(T::zero(), T::max))
}

/// A value attached to one deterministic policy.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct PolicyValue<T> {
    pub policy: Vec<usize>,
    pub value: T,
}

/// Per-policy values (kept when there are at most [`REPORT_LIMIT`]
/// policies) and their maximum.
#[derive(Clone, Debug, Serialize)]
pub struct Enumerated<T> {
    pub per_policy: Option<Vec<PolicyValue<T>>>,
    pub max: T,
}

fn enumerate_max<T: Real>(
    mdp: &Mdp<T>,
    f: impl Fn(&Policy<T>) -> Result<T> + Sync,
) -> Result<Enumerated<T>> {
    let keep = mdp.policy_count() <= REPORT_LIMIT;
    let (list, max) = fold_policies(
        mdp,
        ENUMERATION_CAP,
        (Vec::new(), T::zero()),
        |d| {
            let v = f(&Policy::Deterministic(d.to_vec()))?;
            let entry = if keep { vec![PolicyValue { policy: d.to_vec(), value: v }] } else { Vec::new() };
            Ok((entry, v))
        },
        |(mut a, ma), (mut b, mb)| {
            a.append(&mut b);
            (a, ma.max(mb))
        },
    )?;
    Ok(Enumerated { per_policy: keep.then_some(list), max })
}

/// `T_drop^π` over every deterministic policy; the cross-check path for
/// [`tdrop`].
pub fn tdrop_enumerated<T: Real>(mdp: &Mdp<T>, rho_star: &[T]) -> Result<Enumerated<T>> {
    let rbar = gain_dropping_reward(mdp, rho_star);
    enumerate_max(mdp, |pi| {
        let analysis = chain::analyze(mdp, pi)?;
        tdrop_from_analysis(&analysis, &policy_rbar(&rbar, pi))
    })
}

/// `B^π` for every deterministic policy and `B = max_π B^π`.
pub fn transient_time_bound<T: Real>(mdp: &Mdp<T>) -> Result<Enumerated<T>> {
    enumerate_max(mdp, |pi| chain::transient_time(mdp, pi))
}

#[derive(Clone, Debug, Serialize)]
pub struct ComplexityReport<T: Real> {
    pub delta: Gap<T>,
    pub tdrop: T,
    /// Enumerated `T_drop^π`, present when enumeration was requested.
    pub tdrop_pi: Option<Enumerated<T>>,
    pub b_pi: Option<Enumerated<T>>,
    pub b: Option<T>,
    pub rbar: Vec<Vec<T>>,
}

/// Computes `Δ`, `rbar` and `T_drop`; with `enumerate`, also `B` and the
/// enumerated `T_drop^π` cross-check.
pub fn complexity_report<T: Real>(mdp: &Mdp<T>, rho_star: &[T], enumerate: bool) -> Result<ComplexityReport<T>> {
    let tdrop = tdrop(mdp, rho_star)?;
    let (tdrop_pi, b_pi) = if enumerate {
        (Some(tdrop_enumerated(mdp, rho_star)?), Some(transient_time_bound(mdp)?))
    } else {
        (None, None)
    };
    Ok(ComplexityReport {
        delta: min_gain_gap(mdp, rho_star),
        tdrop,
        b: b_pi.as_ref().map(|e| e.max),
        tdrop_pi,
        b_pi,
        rbar: gain_dropping_reward(mdp, rho_star),
    })
}
