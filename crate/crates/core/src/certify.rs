//! Numerical certification of the sensitivity identity, the discounted
//! reduction, and the convergence bounds of every solver.
//!
//! Each inequality becomes a [`BoundCheck`]. A check passes when
//! `lhs ≤ rhs + 1e-9·max(1, |rhs|)`: the constants on the right are exact,
//! only the left side carries rounding error.

use std::f64::consts::E;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::bellman::{apply_evaluation, apply_optimality, residual_average, residual_discounted, DiscountFactor};
use crate::chain;
use crate::complexity::{self, gain_dropping_reward, policy_rbar, tol_gap, ComplexityReport};
use crate::error::{Error, Result};
use crate::model::{Mdp, Policy};
use crate::oracle::{discounted_optimal, GroundTruth};
use crate::scalar::Real;
use crate::solvers::{
    approx_shifted_halpern, dmdp_baseline, halpern_then_picard, solve_multichain, BellmanOptimality, SolveOptions,
};
use crate::vector::{sup_dist, sup_norm, ValueVec};

/// Relative slack granted to the right-hand side.
pub const BOUND_SLACK: f64 = 1e-9;
/// Slack on the ε-greedy precondition of the reduction bound.
pub const GREEDY_SLACK: f64 = 1e-12;
/// Ceiling on the sensitivity-identity residual.
pub const IDENTITY_TOL: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundCheck {
    pub label: String,
    pub n: Option<usize>,
    pub lhs: f64,
    pub rhs: f64,
    /// `rhs − lhs`.
    pub margin: f64,
    /// `lhs / rhs`, recorded for tightness studies; absent when `rhs = 0`.
    pub ratio: Option<f64>,
    pub pass: bool,
}

impl BoundCheck {
    pub fn new(label: impl Into<String>, n: Option<usize>, lhs: f64, rhs: f64) -> Self {
        let pass = lhs <= rhs + BOUND_SLACK * rhs.abs().max(1.0);
        let ratio = (rhs != 0.0 && rhs.is_finite()).then(|| lhs / rhs);
        Self { label: label.into(), n, lhs, rhs, margin: rhs - lhs, ratio, pass }
    }
}

/// Both sides of `ρ^π − ρ* = H_π(P_π ρ* − ρ*) + P_π^∞(r_π + P_π h − ρ* − h)`.
#[derive(Clone, Debug, Serialize)]
pub struct PerformanceDifference<T: Real> {
    pub gain_gap: ValueVec<T>,
    pub navigation_term: ValueVec<T>,
    pub evaluation_term: ValueVec<T>,
    /// Sup-norm mismatch between the two sides.
    pub identity_residual: T,
    /// `T_drop^π`; infinite when `π` takes a gain-dropping action on one of
    /// its recurrent states.
    pub tdrop_pi: f64,
    /// `‖ρ^π − ρ*‖ ≤ T_drop^π ‖P_π ρ* − ρ*‖ + ‖T^π(h) − h − ρ*‖`.
    pub check: BoundCheck,
}

/// `T_drop^π`, with a gain-dropping action on a recurrent state mapped to `∞`.
pub fn tdrop_pi_or_infinite<T: Real>(
    mdp: &Mdp<T>,
    pi: &Policy<T>,
    analysis: &chain::ChainAnalysis<T>,
    rho_star: &[T],
) -> Result<f64> {
    let rbar = gain_dropping_reward(mdp, rho_star);
    match complexity::tdrop_from_analysis(analysis, &policy_rbar(&rbar, pi)) {
        Ok(v) => Ok(v.as_f64()),
        Err(Error::GainDropOnRecurrentState(_)) => Ok(f64::INFINITY),
        Err(e) => Err(e),
    }
}

/// `T·x` with `∞·0 = 0`.
fn times(t: f64, x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        t * x
    }
}

pub fn performance_difference<T: Real>(
    mdp: &Mdp<T>,
    pi: &Policy<T>,
    h: &[T],
    rho_star: &[T],
) -> Result<PerformanceDifference<T>> {
    let analysis = chain::analyze(mdp, pi)?;
    let p_rho: Vec<T> = analysis.p_pi.mul_vec(rho_star);
    let drift: Vec<T> = p_rho.iter().zip(rho_star).map(|(&a, &b)| a - b).collect();
    let navigation_term = ValueVec::from(analysis.deviation.mul_vec(&drift));
    let p_h = analysis.p_pi.mul_vec(h);
    let bellman_gap: Vec<T> =
        (0..h.len()).map(|s| analysis.r_pi[s] + p_h[s] - rho_star[s] - h[s]).collect();
    let evaluation_term = ValueVec::from(analysis.p_inf.mul_vec(&bellman_gap));
    let gain_gap = &analysis.gain - rho_star;
    let rhs_sum = &navigation_term + &evaluation_term;
    let identity_residual = sup_dist(&gain_gap, &rhs_sum)?;

    let tdrop_pi = tdrop_pi_or_infinite(mdp, pi, &analysis, rho_star)?;
    let t_pi_h = apply_evaluation(mdp, pi, h, DiscountFactor::undiscounted())?;
    let eval_residual = crate::bellman::shifted_residual(&t_pi_h, h, rho_star);
    let rhs = times(tdrop_pi, sup_norm(&drift).as_f64()) + eval_residual.as_f64();
    let check = BoundCheck::new("sensitivity/corollary", None, gain_gap.sup_norm().as_f64(), rhs);
    Ok(PerformanceDifference { gain_gap, navigation_term, evaluation_term, identity_residual, tdrop_pi, check })
}

/// `min{span(h_both), span(h_unmod) + T_drop + span(h_unmod)·T_drop}`.
pub fn complexity_m<T: Real>(truth: &GroundTruth<T>, tdrop: T) -> f64 {
    let su = truth.span_unmod().as_f64();
    let t = tdrop.as_f64();
    truth.span_both().as_f64().min(su + t + su * t)
}

/// The three forms of the discounted reduction for a policy that is
/// `eps_greedy`-greedy for `r + γPV`. The `γ ≥ 1/2` form is omitted below
/// that threshold.
pub fn reduction_bound<T: Real>(
    mdp: &Mdp<T>,
    v: &[T],
    gamma: DiscountFactor<T>,
    pi: &Policy<T>,
    eps_greedy: f64,
    truth: &GroundTruth<T>,
    tdrop: T,
) -> Result<Vec<BoundCheck>> {
    let tv = apply_optimality(mdp, v, gamma)?;
    let tpi = apply_evaluation(mdp, pi, v, gamma)?;
    for s in 0..v.len() {
        let shortfall = (tv[s] - tpi[s]).as_f64() - eps_greedy;
        if shortfall > GREEDY_SLACK {
            return Err(Error::NotEpsGreedy { eps: eps_greedy, shortfall, state: s });
        }
    }
    let g = gamma.value().as_f64();
    let one_m = 1.0 - g;
    let analysis = chain::analyze(mdp, pi)?;
    let tdrop_pi = tdrop_pi_or_infinite(mdp, pi, &analysis, &truth.rho_star)?;
    let lhs = sup_dist(&analysis.gain, &truth.rho_star)?.as_f64();
    let fpe = sup_dist(&tv, v)?.as_f64();
    let value_gap = v
        .iter()
        .zip(truth.rho_star.iter())
        .map(|(&x, &r)| (x.as_f64() - r.as_f64() / one_m).abs())
        .fold(0.0, f64::max);
    let m = complexity_m(truth, tdrop);
    let factor = tdrop_pi + 1.0;
    let mut out = vec![
        BoundCheck::new(
            "reduction/raw",
            None,
            lhs,
            factor * (7.0 * one_m * value_gap + (2.0 - g) / g * fpe + 2.0 * one_m / g + 2.0 / g * eps_greedy),
        ),
        BoundCheck::new(
            "reduction/modified-solution",
            None,
            lhs,
            factor * (7.0 * one_m * m + (2.0 + 6.0 * g) / g * fpe + 2.0 * one_m / g + 2.0 / g * eps_greedy),
        ),
    ];
    if g >= 0.5 {
        out.push(BoundCheck::new(
            "reduction/gamma-at-least-half",
            None,
            lhs,
            factor * (one_m * (4.0 + 7.0 * m) + 16.0 * fpe + 4.0 * eps_greedy),
        ));
    }
    Ok(out)
}

/// Which `n` values and discount factors the suite sweeps.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct SuiteConfig {
    pub n_grid: Vec<usize>,
    /// Extra third-phase multipliers `k` for the multichain solver.
    pub extra_k: Vec<f64>,
    /// Contraction factors for the Halpern-then-Picard rate check.
    pub htp_gammas: Vec<f64>,
    /// Discount factors for the warm-start value-error check.
    pub warm_gammas: Vec<f64>,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        Self {
            n_grid: vec![1, 2, 5, 10, 50, 200],
            extra_k: vec![4.0],
            htp_gammas: vec![0.5, 0.9, 0.99],
            warm_gammas: vec![0.9, 0.99],
        }
    }
}

fn geometric_ratio(gamma: f64, t: usize) -> f64 {
    let s: f64 = (0..=t).map(|i| gamma.powi(i as i32)).sum();
    gamma.powi(t as i32) / s
}

/// Gain-dropping magnitude of `π`: `‖P_π ρ* − ρ*‖` with drops below the gap
/// tolerance counted as zero.
fn gain_drop_of_policy(mdp: &Mdp<f64>, pi: &Policy<f64>, rho: &[f64]) -> f64 {
    let tol = tol_gap(rho);
    (0..rho.len())
        .map(|s| {
            pi.weights(s)
                .into_iter()
                .map(|(a, _)| rho[s] - mdp.expect(s, a, rho))
                .filter(|&d| d > tol)
                .fold(0.0, f64::max)
        })
        .fold(0.0, f64::max)
}

/// All checks for one budget `n`.
fn checks_for_n(
    mdp: &Mdp<f64>,
    truth: &GroundTruth<f64>,
    cx: &ComplexityReport<f64>,
    cfg: &SuiteConfig,
    vstar: &[(f64, ValueVec<f64>)],
    n: usize,
) -> Result<Vec<BoundCheck>> {
    let rho = &truth.rho_star;
    let states = mdp.n_states();
    let zero = vec![0.0; states];
    let d0 = truth.h_both.sup_norm();
    let m = complexity_m(truth, cx.tdrop);
    let nf = n as f64;
    let some_n = Some(n);
    let mut out = Vec::new();

    // Picard from zero against the gain.
    let mut x = ValueVec::zeros(states);
    for _ in 0..n {
        x = apply_optimality(mdp, &x, DiscountFactor::undiscounted())?;
    }
    let drift = sup_dist(&x, &rho.iter().map(|r| nf * r).collect::<Vec<_>>())?;
    out.push(BoundCheck::new("picard-gain/span-h-both", some_n, drift, truth.span_both()));
    let su = truth.span_unmod();
    out.push(BoundCheck::new("picard-gain/tdrop", some_n, drift, su + cx.tdrop + su * cx.tdrop));
    let shifted: Vec<f64> = (0..states).map(|s| x[s] - nf * rho[s] - truth.h_both[s]).collect();
    out.push(BoundCheck::new("gain-estimation/iterate", some_n, sup_norm(&shifted), d0));

    if n >= 1 {
        let opts = SolveOptions::default().with_reference_gain(rho.clone());
        let r = approx_shifted_halpern(mdp, &zero, n, &opts)?;
        let pi = r.output_policy.as_ref().expect("alg1 extracts a policy");
        let rho_pi = chain::gain(mdp, pi)?;
        let subopt = sup_dist(&rho_pi, rho)?;
        let tail = 13.0 + 35.0 / nf + 20.0 / (nf * nf);
        let fpe = residual_average(mdp, &r.output_value, rho)?;
        out.push(BoundCheck::new("alg1/fixed-point-error", some_n, fpe, tail / nf * d0));
        out.push(BoundCheck::new(
            "alg1/suboptimality",
            some_n,
            subopt,
            (10.0 / 3.0 * cx.tdrop + tail) / nf * d0,
        ));
        let rho_hat = r.trace.gain_estimate.as_ref().expect("alg1 reports its gain estimate");
        out.push(BoundCheck::new("gain-estimation/rate", some_n, sup_dist(rho_hat, rho)?, 2.0 * d0 / nf));
        let threshold = match cx.delta.finite() {
            Some(delta) => 4.0 * d0 / delta,
            None => 0.0,
        };
        if nf >= threshold {
            out.push(BoundCheck::new("alg1/large-n-suboptimality", some_n, subopt, tail / nf * d0));
            out.push(BoundCheck::new("alg1/large-n-gain-preservation", some_n, gain_drop_of_policy(mdp, pi, rho), 0.0));
        }
        let pd = performance_difference(mdp, pi, &truth.h_both, rho)?;
        out.push(BoundCheck::new("sensitivity/identity", some_n, pd.identity_residual, IDENTITY_TOL));
        let mut cor = pd.check;
        cor.n = some_n;
        out.push(cor);
    }

    for (g, vs) in vstar {
        let gamma = DiscountFactor::new(*g)?;
        let op = BellmanOptimality::new(mdp, gamma);
        let r = halpern_then_picard(&op, &zero, n, &SolveOptions::default())?;
        let d = sup_norm(vs);
        out.push(BoundCheck::new(
            format!("alg2/rate(gamma={g})"),
            some_n,
            r.trace.final_residual(),
            8.0 * E * geometric_ratio(*g, n) * d,
        ));
        if n + 1 <= gamma.effective_horizon()? {
            out.push(BoundCheck::new(
                format!("alg2/halpern-phase(gamma={g})"),
                some_n,
                r.trace.final_residual(),
                4.0 / (nf + 1.0) * d,
            ));
        }
        if cfg.warm_gammas.contains(g) && n >= 1 && nf <= 1.0 / (1.0 - g) {
            let scale = 1.0 / (nf * (1.0 - g));
            let mut x = ValueVec::zeros(states);
            for _ in 0..n {
                x = apply_optimality(mdp, &x, DiscountFactor::undiscounted())?;
            }
            let err = sup_dist(&(&x * scale), vs)?;
            out.push(BoundCheck::new(format!("warm-start/value-error(gamma={g})"), some_n, err, 2.0 * m * scale));
        }
        let gap_v: f64 = vs.iter().zip(rho.iter()).map(|(&v, &r)| (v - r / (1.0 - g)).abs()).fold(0.0, f64::max);
        if n == cfg.n_grid[0] {
            out.push(BoundCheck::new(format!("discounted-gain/span-h-both(gamma={g})"), None, gap_v, truth.span_both()));
            out.push(BoundCheck::new(format!("discounted-gain/tdrop(gamma={g})"), None, gap_v, su + cx.tdrop + su * cx.tdrop));
        }
    }

    if n >= 2 {
        let r = solve_multichain(mdp, n, 0.0, &SolveOptions::default())?;
        let g = 1.0 - 1.0 / nf;
        let gamma = DiscountFactor::new(g)?;
        let e = gamma.effective_horizon()? - 1;
        let tail = 2 * n - e;
        let fpe = residual_discounted(mdp, &r.output_value, gamma)?;
        out.push(BoundCheck::new("alg3/residual", some_n, fpe, 8.0 * E / g * geometric_ratio(g, tail) * m));
        let pi = r.output_policy.as_ref().expect("alg3 extracts a policy");
        let rho_pi = chain::gain(mdp, pi)?;
        let shortfall = rho.iter().zip(rho_pi.iter()).map(|(&a, &b)| a - b).fold(0.0, f64::max);
        out.push(BoundCheck::new(
            "multichain/suboptimality",
            some_n,
            shortfall,
            (cx.tdrop + 1.0) * (71.0 * m + 2.0) / (nf - 1.0),
        ));
        for check in reduction_bound(mdp, &r.output_value, gamma, pi, 0.0, truth, cx.tdrop)? {
            out.push(BoundCheck { n: some_n, ..check });
        }
        for &k in &cfg.extra_k {
            let kn = k * nf;
            if (kn - kn.round()).abs() > 1e-9 * kn.max(1.0) {
                continue;
            }
            let r = solve_multichain(mdp, n, k, &SolveOptions::default())?;
            let pi = r.output_policy.as_ref().expect("alg3 extracts a policy");
            let rho_pi = chain::gain(mdp, pi)?;
            let shortfall = rho.iter().zip(rho_pi.iter()).map(|(&a, &b)| a - b).fold(0.0, f64::max);
            out.push(BoundCheck::new(
                format!("multichain/suboptimality(k={k})"),
                some_n,
                shortfall,
                (cx.tdrop + 1.0) * ((7.0 + 64.0 * (-k).exp()) * m + 2.0) / (nf - 1.0),
            ));
        }
    }

    if n >= 4 {
        if let Some(b) = cx.b {
            let r = dmdp_baseline(mdp, n, &SolveOptions::default())?;
            let pi = r.output_policy.as_ref().expect("baseline extracts a policy");
            let subopt = sup_dist(&chain::gain(mdp, pi)?, rho)?;
            out.push(BoundCheck::new(
                "baseline/suboptimality",
                some_n,
                subopt,
                2.0 * (3.0 * b + 3.0 * su + 2.0) * nf.ln() / nf,
            ));
        }
    }
    Ok(out)
}

/// Runs every in-scope algorithm over the configured budgets and returns one
/// check per bound per budget, ordered by label and then `n`.
pub fn theorem_suite(
    mdp: &Mdp<f64>,
    truth: &GroundTruth<f64>,
    complexity: &ComplexityReport<f64>,
    config: &SuiteConfig,
) -> Result<Vec<BoundCheck>> {
    if config.n_grid.is_empty() {
        return Err(Error::InvalidConfig("empty n grid".into()));
    }
    let vstar: Vec<(f64, ValueVec<f64>)> = config
        .htp_gammas
        .iter()
        .chain(config.warm_gammas.iter().filter(|g| !config.htp_gammas.contains(g)))
        .map(|&g| Ok((g, discounted_optimal(mdp, DiscountFactor::new(g)?)?.0)))
        .collect::<Result<_>>()?;
    let per_n: Vec<Vec<BoundCheck>> = config
        .n_grid
        .par_iter()
        .map(|&n| checks_for_n(mdp, truth, complexity, config, &vstar, n))
        .collect::<Result<_>>()?;
    let mut all: Vec<BoundCheck> = per_n.into_iter().flatten().collect();
    all.sort_by(|a, b| a.label.cmp(&b.label).then(a.n.cmp(&b.n)));
    Ok(all)
}

/// Fixed-width table with one line per check.
pub fn render_table(checks: &[BoundCheck]) -> String {
    let width = checks.iter().map(|c| c.label.len()).max().unwrap_or(5).max(5);
    let mut out = String::new();
    let _ = writeln!(out, "{:<width$}  {:>5}  {:>13}  {:>13}  {:>13}  {:>9}  result", "label", "n", "lhs", "rhs", "margin", "ratio");
    for c in checks {
        let n = c.n.map(|n| n.to_string()).unwrap_or_else(|| "-".into());
        let ratio = c.ratio.map(|r| format!("{r:.3e}")).unwrap_or_else(|| "-".into());
        let _ = writeln!(
            out,
            "{:<width$}  {:>5}  {:>13.6e}  {:>13.6e}  {:>13.6e}  {:>9}  {}",
            c.label,
            n,
            c.lhs,
            c.rhs,
            c.margin,
            ratio,
            if c.pass { "PASS" } else { "FAIL" }
        );
    }
    out
}
