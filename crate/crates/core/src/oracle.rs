//! Ground truth for certification: optimal gain, discounted optima, a
//! Blackwell reference policy, and checkers for the two families of
//! multichain optimality equations.
//!
//! Unmodified equations:
//!   `max_a P_{sa} rho = rho(s)` and
//!   `max_{a : P_{sa} rho = rho(s)} r(s,a) + P_{sa} h = rho(s) + h(s)`.
//! Modified equations:
//!   `M(P rho) = rho` and `T(h) = rho + h`.

use std::fmt;

use rayon::prelude::*;
use serde::de::{self, Deserializer, Visitor};
use serde::{Deserialize, Serialize, Serializer};

use crate::bellman::{apply_optimality, greedy, max_expected, q_value, DiscountFactor};
use crate::chain;
use crate::complexity::min_gain_gap;
use crate::error::{Error, Result};
use crate::linalg::{Lu, Matrix};
use crate::model::{Mdp, Policy};
use crate::scalar::Real;
use crate::vector::{span, sup_dist, sup_norm, ValueVec};

/// Largest number of deterministic policies enumerated by default.
pub const ENUMERATION_CAP: u128 = 10_000_000;
/// Tolerance for the equation checkers used to accept ground truth.
pub const EQ_TOL: f64 = 1e-8;
/// Gain-optimality tolerance used when filtering enumerated policies.
pub const GAIN_TOL: f64 = 1e-9;
const CHUNK: u128 = 1024;

/// The minimum gain-optimality gap; `Infinite` when no action drops gain.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Gap<T> {
    Finite(T),
    Infinite,
}

impl<T: Real> Gap<T> {
    pub fn finite(self) -> Option<T> {
        match self {
            Gap::Finite(d) => Some(d),
            Gap::Infinite => None,
        }
    }

    /// `1/Δ`, with `1/∞ = 0`.
    pub fn recip(self) -> T {
        match self {
            Gap::Finite(d) => d.recip(),
            Gap::Infinite => T::zero(),
        }
    }

    pub fn as_f64(self) -> f64 {
        match self {
            Gap::Finite(d) => d.as_f64(),
            Gap::Infinite => f64::INFINITY,
        }
    }
}

impl<T: Real> fmt::Display for Gap<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Gap::Finite(d) => write!(f, "{d}"),
            Gap::Infinite => f.write_str("inf"),
        }
    }
}

impl<T: Real> Serialize for Gap<T> {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match self {
            Gap::Finite(d) => d.serialize(s),
            Gap::Infinite => s.serialize_str("inf"),
        }
    }
}

impl<'de, T: Real> Deserialize<'de> for Gap<T> {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct GapVisitor<T>(std::marker::PhantomData<T>);
        impl<T: Real> Visitor<'_> for GapVisitor<T> {
            type Value = Gap<T>;
            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a number or \"inf\"")
            }
            fn visit_f64<E: de::Error>(self, v: f64) -> std::result::Result<Gap<T>, E> {
                Ok(Gap::Finite(T::lit(v)))
            }
            fn visit_u64<E: de::Error>(self, v: u64) -> std::result::Result<Gap<T>, E> {
                Ok(Gap::Finite(T::lit(v as f64)))
            }
            fn visit_i64<E: de::Error>(self, v: i64) -> std::result::Result<Gap<T>, E> {
                Ok(Gap::Finite(T::lit(v as f64)))
            }
            fn visit_str<E: de::Error>(self, v: &str) -> std::result::Result<Gap<T>, E> {
                if v == "inf" {
                    Ok(Gap::Infinite)
                } else {
                    Err(E::invalid_value(de::Unexpected::Str(v), &self))
                }
            }
        }
        d.deserialize_any(GapVisitor(std::marker::PhantomData))
    }
}

/// Deterministic policy number `idx` in lexicographic order (last state
/// varies fastest).
pub fn policy_at<T: Real>(mdp: &Mdp<T>, mut idx: u128) -> Vec<usize> {
    let mut d = vec![0; mdp.n_states()];
    for s in (0..mdp.n_states()).rev() {
        let m = mdp.num_actions(s) as u128;
        d[s] = (idx % m) as usize;
        idx /= m;
    }
    d
}

fn advance<T: Real>(mdp: &Mdp<T>, d: &mut [usize]) {
    for s in (0..d.len()).rev() {
        d[s] += 1;
        if d[s] < mdp.num_actions(s) {
            return;
        }
        d[s] = 0;
    }
}

fn check_cap<T: Real>(mdp: &Mdp<T>, cap: u128) -> Result<u128> {
    let size = mdp.policy_count();
    if size > cap {
        return Err(Error::EnumerationTooLarge { size, cap });
    }
    Ok(size)
}

/// Maps every deterministic policy in fixed-size chunks (in parallel) and
/// folds the chunk results in enumeration order, so the outcome does not
/// depend on the number of workers.
pub fn fold_policies<T, R, M, F>(mdp: &Mdp<T>, cap: u128, identity: R, map: M, combine: F) -> Result<R>
where
    T: Real,
    R: Send + Sync + Clone,
    M: Fn(&[usize]) -> Result<R> + Sync,
    F: Fn(R, R) -> R + Sync,
{
    let size = check_cap(mdp, cap)?;
    let chunks = size.div_ceil(CHUNK);
    let parts: Vec<Result<R>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let start = c * CHUNK;
            let end = (start + CHUNK).min(size);
            let mut d = policy_at(mdp, start);
            let mut acc = identity.clone();
            for _ in start..end {
                acc = combine(acc, map(&d)?);
                advance(mdp, &mut d);
            }
            Ok(acc)
        })
        .collect();
    parts.into_iter().try_fold(identity, |acc, p| Ok(combine(acc, p?)))
}

/// First policy (in enumeration order) for which `find` returns `Some`.
pub fn find_policy<T, R, M>(mdp: &Mdp<T>, cap: u128, find: M) -> Result<Option<R>>
where
    T: Real,
    R: Send,
    M: Fn(&[usize]) -> Result<Option<R>> + Sync,
{
    let size = check_cap(mdp, cap)?;
    let chunks = size.div_ceil(CHUNK);
    let hit = (0..chunks).into_par_iter().find_map_first(|c| {
        let start = c * CHUNK;
        let end = (start + CHUNK).min(size);
        let mut d = policy_at(mdp, start);
        for _ in start..end {
            match find(&d) {
                Ok(None) => {}
                other => return Some(other),
            }
            advance(mdp, &mut d);
        }
        None
    });
    hit.transpose().map(Option::flatten)
}

fn entrywise_max<T: Real>(a: Option<ValueVec<T>>, b: Option<ValueVec<T>>) -> Option<ValueVec<T>> {
    match (a, b) {
        (None, x) | (x, None) => x,
        (Some(a), Some(b)) => Some(a.iter().zip(b.iter()).map(|(&x, &y)| x.max(y)).collect()),
    }
}

/// `rho*` by enumerating deterministic policies, plus every policy whose gain
/// matches `rho*` at all states within [`GAIN_TOL`], in enumeration order.
pub fn optimal_gain_bruteforce<T: Real>(mdp: &Mdp<T>) -> Result<(ValueVec<T>, Vec<Policy<T>>)> {
    optimal_gain_bruteforce_capped(mdp, ENUMERATION_CAP)
}

pub fn optimal_gain_bruteforce_capped<T: Real>(mdp: &Mdp<T>, cap: u128) -> Result<(ValueVec<T>, Vec<Policy<T>>)> {
    let rho = fold_policies(
        mdp,
        cap,
        None,
        |d| Ok(Some(chain::gain(mdp, &Policy::Deterministic(d.to_vec()))?)),
        entrywise_max,
    )?
    .expect("at least one policy");
    let tol = T::lit(GAIN_TOL);
    let optimal = fold_policies(
        mdp,
        cap,
        Vec::new(),
        |d| {
            let pi = Policy::Deterministic(d.to_vec());
            let g = chain::gain(mdp, &pi)?;
            Ok(if sup_dist(&g, &rho)? <= tol { vec![pi] } else { Vec::new() })
        },
        |mut a, mut b| {
            a.append(&mut b);
            a
        },
    )?;
    Ok((rho, optimal))
}

/// Evaluates `V^pi_gamma` by solving `(I - gamma P_pi) V = r_pi`.
pub fn discounted_value<T: Real>(mdp: &Mdp<T>, pi: &Policy<T>, gamma: T) -> Result<ValueVec<T>> {
    let (p, r) = chain::policy_matrices(mdp, pi)?;
    let a = Matrix::identity(mdp.n_states()).sub(&p.scale(gamma));
    Ok(Lu::factor(&a)?.solve(&r).into())
}

/// `V*_gamma` and an optimal policy by exact policy iteration. The incumbent
/// action is kept unless another action is strictly better.
pub fn discounted_optimal<T: Real>(mdp: &Mdp<T>, gamma: DiscountFactor<T>) -> Result<(ValueVec<T>, Policy<T>)> {
    if !gamma.is_discounted() {
        return Err(Error::GammaOutOfRange(gamma.value().as_f64()));
    }
    let g = gamma.value();
    let mut d = match greedy(mdp, &vec![T::zero(); mdp.n_states()], gamma)? {
        Policy::Deterministic(d) => d,
        Policy::Randomized(_) => unreachable!("greedy is deterministic"),
    };
    // Each improvement strictly increases V, so the loop ends after at most
    // |Π^MD| rounds; the cap only guards against float ping-pong.
    for _ in 0..10_000 {
        let pi = Policy::Deterministic(d.clone());
        let v = discounted_value(mdp, &pi, g)?;
        let scale = T::one().max(sup_norm(&v));
        let tie = T::lit(64.0) * T::epsilon() * scale;
        let mut changed = false;
        for s in 0..mdp.n_states() {
            let incumbent = q_value(mdp, s, d[s], &v, g);
            let mut best = (d[s], incumbent);
            for a in 0..mdp.num_actions(s) {
                let q = q_value(mdp, s, a, &v, g);
                if q > best.1 + tie && q > incumbent + tie {
                    best = (a, q);
                }
            }
            if best.0 != d[s] {
                d[s] = best.0;
                changed = true;
            }
        }
        if !changed {
            return Ok((v, pi));
        }
    }
    Err(Error::NonconvergenceSuspected { sweeps: 10_000, change: f64::NAN })
}

/// Per-state slack in each of the two equations of a family.
#[derive(Clone, Debug, Serialize)]
pub struct EquationCheck<T: Real> {
    pub pass: bool,
    pub tol: T,
    /// `|max_a P_{sa} rho - rho(s)|`.
    pub gain_slack: ValueVec<T>,
    /// Slack in the bias equation; infinite where the restricted action set
    /// is empty.
    pub bias_slack: ValueVec<T>,
    pub max_slack: T,
    pub worst_state: usize,
}

impl<T: Real> EquationCheck<T> {
    fn new(gain_slack: ValueVec<T>, bias_slack: ValueVec<T>, tol: T) -> Self {
        let (mut worst_state, mut max_slack) = (0, T::zero());
        for s in 0..gain_slack.len() {
            let m = gain_slack[s].max(bias_slack[s]);
            if m > max_slack || m.is_nan() {
                max_slack = m;
                worst_state = s;
            }
        }
        Self { pass: max_slack <= tol, tol, gain_slack, bias_slack, max_slack, worst_state }
    }
}

fn check_lengths<T: Real>(mdp: &Mdp<T>, rho: &[T], h: &[T]) -> Result<()> {
    for v in [rho, h] {
        if v.len() != mdp.n_states() {
            return Err(Error::LengthMismatch { expected: mdp.n_states(), got: v.len() });
        }
    }
    Ok(())
}

fn gain_slack<T: Real>(mdp: &Mdp<T>, rho: &[T]) -> ValueVec<T> {
    max_expected(mdp, rho).iter().zip(rho).map(|(&m, &r)| (m - r).abs()).collect()
}

/// Tolerance defining the gain-preserving action set `P_{sa} rho = rho(s)`.
pub fn tol_eq<T: Real>(rho: &[T]) -> T {
    T::lit(1e-9) * T::one().max(sup_norm(rho))
}

pub fn check_unmodified<T: Real>(mdp: &Mdp<T>, rho: &[T], h: &[T], tol: T) -> Result<EquationCheck<T>> {
    check_lengths(mdp, rho, h)?;
    let teq = tol_eq(rho);
    let bias = (0..mdp.n_states())
        .map(|s| {
            let best = (0..mdp.num_actions(s))
                .filter(|&a| (mdp.expect(s, a, rho) - rho[s]).abs() <= teq)
                .map(|a| q_value(mdp, s, a, h, T::one()))
                .fold(T::neg_infinity(), T::max);
            (best - rho[s] - h[s]).abs()
        })
        .collect();
    Ok(EquationCheck::new(gain_slack(mdp, rho), bias, tol))
}

pub fn check_modified<T: Real>(mdp: &Mdp<T>, rho: &[T], h: &[T], tol: T) -> Result<EquationCheck<T>> {
    check_lengths(mdp, rho, h)?;
    let th = apply_optimality(mdp, h, DiscountFactor::undiscounted())?;
    let bias = (0..mdp.n_states()).map(|s| (th[s] - rho[s] - h[s]).abs()).collect();
    Ok(EquationCheck::new(gain_slack(mdp, rho), bias, tol))
}

/// A deterministic policy attaining both `M(P rho)` and `T(h)` within `tol`
/// at every state (smallest such action), if one exists.
pub fn simultaneous_argmax<T: Real>(mdp: &Mdp<T>, rho: &[T], h: &[T], tol: T) -> Result<Option<Policy<T>>> {
    check_lengths(mdp, rho, h)?;
    let mp = max_expected(mdp, rho);
    let th = apply_optimality(mdp, h, DiscountFactor::undiscounted())?;
    let mut d = Vec::with_capacity(mdp.n_states());
    for s in 0..mdp.n_states() {
        let hit = (0..mdp.num_actions(s)).find(|&a| {
            (mdp.expect(s, a, rho) - mp[s]).abs() <= tol && (q_value(mdp, s, a, h, T::one()) - th[s]).abs() <= tol
        });
        match hit {
            Some(a) => d.push(a),
            None => return Ok(None),
        }
    }
    Ok(Some(Policy::Deterministic(d)))
}

pub const DEFAULT_ALPHAS: [f64; 5] = [-3.0, 0.0, 1.0, 5.0, 100.0];

#[derive(Clone, Debug, Serialize)]
pub struct CommutativityCheck<T: Real> {
    pub pass: bool,
    /// `(alpha, ‖T(h + alpha rho) - h - (alpha + 1) rho‖)` per alpha.
    pub residuals: Vec<(T, T)>,
}

/// Checks `T(h + alpha rho) = h + (alpha + 1) rho` within `tol` for each alpha.
pub fn check_restricted_commutativity<T: Real>(
    mdp: &Mdp<T>,
    rho: &[T],
    h: &[T],
    alphas: &[T],
    tol: T,
) -> Result<CommutativityCheck<T>> {
    check_lengths(mdp, rho, h)?;
    let h = ValueVec::from(h.to_vec());
    let residuals = alphas
        .iter()
        .map(|&alpha| {
            let lhs = apply_optimality(mdp, &h.axpy(alpha, rho), DiscountFactor::undiscounted())?;
            let rhs = h.axpy(alpha + T::one(), rho);
            Ok((alpha, sup_dist(&lhs, &rhs)?))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CommutativityCheck { pass: residuals.iter().all(|&(_, r)| r <= tol), residuals })
}

/// `h_unmod + ((span(h_unmod) + 1)/Δ) rho*`; `h_unmod` itself when `Δ = ∞`.
pub fn construct_h_both<T: Real>(rho_star: &[T], h_unmod: &[T], delta: Gap<T>) -> Result<ValueVec<T>> {
    let h = ValueVec::from(h_unmod.to_vec());
    match delta {
        Gap::Infinite => Ok(h),
        Gap::Finite(d) if !(d > T::zero()) => Err(Error::DegenerateDelta(d.as_f64())),
        Gap::Finite(d) => Ok(h.axpy((span(h_unmod)? + T::one()) / d, rho_star)),
    }
}

/// Scans gain-optimal deterministic policies for the first whose bias solves
/// the unmodified equations together with `rho_star`.
pub fn blackwell_reference<T: Real>(mdp: &Mdp<T>, rho_star: &[T]) -> Result<(Policy<T>, ValueVec<T>)> {
    let gain_tol = T::lit(GAIN_TOL);
    let hit = find_policy(mdp, ENUMERATION_CAP, |d| {
        let pi = Policy::Deterministic(d.to_vec());
        if sup_dist(&chain::gain(mdp, &pi)?, rho_star)? > gain_tol {
            return Ok(None);
        }
        let bias = chain::analyze(mdp, &pi)?.bias;
        let check = check_unmodified(mdp, rho_star, &bias, T::lit(EQ_TOL))?;
        Ok(check.pass.then_some((pi, bias)))
    })?;
    hit.ok_or_else(|| {
        Error::NoReferenceFound(format!(
            "no gain-optimal policy (gain tol {GAIN_TOL:e}) passed the unmodified check at {EQ_TOL:e}"
        ))
    })
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TruthSource {
    Enumeration,
    ReferencePolicy,
}

#[derive(Clone, Debug, Serialize)]
pub struct Provenance {
    pub source: TruthSource,
    pub policies_enumerated: Option<u128>,
    pub gain_optimal_policies: Option<usize>,
    pub gain_tol: f64,
    pub eq_tol: f64,
    pub tol_eq: f64,
    pub tol_gap: f64,
    pub unmodified_slack: f64,
    pub modified_slack: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct GroundTruth<T: Real> {
    pub rho_star: ValueVec<T>,
    pub blackwell_policy: Policy<T>,
    pub h_unmod: ValueVec<T>,
    pub h_both: ValueVec<T>,
    pub delta: Gap<T>,
    pub provenance: Provenance,
}

impl<T: Real> GroundTruth<T> {
    pub fn span_unmod(&self) -> T {
        span(&self.h_unmod).expect("nonempty")
    }

    pub fn span_both(&self) -> T {
        span(&self.h_both).expect("nonempty")
    }
}

fn finish<T: Real>(
    mdp: &Mdp<T>,
    rho_star: ValueVec<T>,
    pi: Policy<T>,
    h_unmod: ValueVec<T>,
    mut provenance: Provenance,
) -> Result<GroundTruth<T>> {
    let tol = T::lit(EQ_TOL);
    let delta = min_gain_gap(mdp, &rho_star);
    let h_both = construct_h_both(&rho_star, &h_unmod, delta)?;
    let unmod = check_unmodified(mdp, &rho_star, &h_unmod, tol)?;
    let both_u = check_unmodified(mdp, &rho_star, &h_both, tol)?;
    let both_m = check_modified(mdp, &rho_star, &h_both, tol)?;
    if !(unmod.pass && both_u.pass && both_m.pass) {
        return Err(Error::NoReferenceFound(format!(
            "equation slacks above {EQ_TOL:e}: unmodified(h_unmod) {}, unmodified(h_both) {}, modified(h_both) {}",
            unmod.max_slack, both_u.max_slack, both_m.max_slack
        )));
    }
    provenance.tol_eq = tol_eq(&rho_star).as_f64();
    provenance.tol_gap = crate::complexity::tol_gap(&rho_star).as_f64();
    provenance.unmodified_slack = unmod.max_slack.max(both_u.max_slack).as_f64();
    provenance.modified_slack = both_m.max_slack.as_f64();
    Ok(GroundTruth { rho_star, blackwell_policy: pi, h_unmod, h_both, delta, provenance })
}

fn provenance(source: TruthSource) -> Provenance {
    Provenance {
        source,
        policies_enumerated: None,
        gain_optimal_policies: None,
        gain_tol: GAIN_TOL,
        eq_tol: EQ_TOL,
        tol_eq: 0.0,
        tol_gap: 0.0,
        unmodified_slack: 0.0,
        modified_slack: 0.0,
    }
}

/// Ground truth by exhaustive enumeration of deterministic policies.
pub fn ground_truth<T: Real>(mdp: &Mdp<T>) -> Result<GroundTruth<T>> {
    let (rho_star, optimal) = optimal_gain_bruteforce(mdp)?;
    let (pi, h_unmod) = blackwell_reference(mdp, &rho_star)?;
    let mut prov = provenance(TruthSource::Enumeration);
    prov.policies_enumerated = Some(mdp.policy_count());
    prov.gain_optimal_policies = Some(optimal.len());
    finish(mdp, rho_star, pi, h_unmod, prov)
}

/// Ground truth from a known optimal policy: `rho* := rho^pi`, `h_unmod :=
/// h^pi`. Accepted only if the pair solves the unmodified equations, which
/// pins down `rho*` without enumeration.
pub fn ground_truth_from_reference<T: Real>(mdp: &Mdp<T>, pi: &Policy<T>) -> Result<GroundTruth<T>> {
    let analysis = chain::analyze(mdp, pi)?;
    finish(mdp, analysis.gain, pi.clone(), analysis.bias, provenance(TruthSource::ReferencePolicy))
}
