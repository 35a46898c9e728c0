//! Seeded fixtures and property checks shared by the property-test files and
//! the acceptance suite. Every check takes one `u64` seed, draws its whole
//! case from it, and reports a violated invariant as `Err`.
#![allow(dead_code)]

use mvi_core::bench::{run_traces, write_csv, Algorithm, ExperimentConfig, InstanceSpec, Outputs, Tolerances};
use mvi_core::bellman::{apply_evaluation, apply_optimality, greedy, max_expected, residual_discounted};
use mvi_core::certify::{BoundCheck, BOUND_SLACK};
use mvi_core::chain;
use mvi_core::complexity::{complexity_report, tdrop_policy};
use mvi_core::generators::{
    four_state, mkt, random_dense, random_multichain, random_policy, random_vector, Instance, MultichainParams,
    RandomDenseParams, SplitMix64,
};
use mvi_core::io::{load_mdp, save_mdp};
use mvi_core::linalg::{solve, Matrix};
use mvi_core::oracle::{
    discounted_optimal, ground_truth, policy_at, simultaneous_argmax, tol_eq, GroundTruth,
};
use mvi_core::solvers::{
    approx_shifted_halpern, dmdp_baseline, halpern, halpern_then_picard, picard, solve_multichain,
    value_iteration, warm_start_htp, BellmanEvaluation, BellmanOptimality, Operator, Retention, Schedule, Shifted,
    SolveOptions,
};
use mvi_core::vector::{span, sup_dist, sup_norm};
use mvi_core::{DiscountFactor, Mdp, Policy, ValueVec};
use std::path::PathBuf;

pub type Check = std::result::Result<(), String>;

/// One proptest per named check, 1000 seeded cases each.
#[allow(unused_macros)]
macro_rules! property_tests {
    ($($name:ident),* $(,)?) => {
        proptest::proptest! {
            #![proptest_config(proptest::test_runner::Config {
                cases: 1000,
                failure_persistence: None,
                ..proptest::test_runner::Config::default()
            })]
            $(
                #[test]
                fn $name(seed in proptest::prelude::any::<u64>()) {
                    common::$name(seed).map_err(proptest::test_runner::TestCaseError::fail)?;
                }
            )*
        }
    };
}

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        if !$cond {
            return Err(format!($($fmt)+));
        }
    };
}

fn ok<T, E: std::fmt::Display>(r: std::result::Result<T, E>) -> std::result::Result<T, String> {
    r.map_err(|e| e.to_string())
}

/// `a ≤ b` up to an absolute-or-relative slack.
fn le(a: f64, b: f64, tol: f64) -> bool {
    a <= b + tol * b.abs().max(1.0)
}

// ---------------------------------------------------------------- fixtures

/// Unstructured MDP with 1..=8 states and 1..=3 actions per state.
pub fn dense(rng: &mut SplitMix64) -> Mdp<f64> {
    let p = RandomDenseParams {
        n_states: 1 + rng.below(8),
        max_actions: 1 + rng.below(3),
        density: 0.15 + 0.85 * rng.next_f64(),
    };
    random_dense(&p, rng.next_u64()).unwrap()
}

/// Multichain instance small enough for policy enumeration (≤ 6 states).
pub fn multichain(rng: &mut SplitMix64) -> Instance {
    let p = MultichainParams {
        n_components: 1 + rng.below(2),
        states_per: 1 + rng.below(2),
        actions_per: 1 + rng.below(3),
        transient_states: rng.below(3),
        leak_prob: 0.6 * rng.next_f64(),
    };
    random_multichain(&p, rng.next_u64()).unwrap()
}

/// Either family, with at most 5 states for the dense branch so that
/// enumeration stays cheap.
pub fn enumerable(rng: &mut SplitMix64) -> Mdp<f64> {
    if rng.bernoulli(0.5) {
        multichain(rng).mdp
    } else {
        let p = RandomDenseParams {
            n_states: 1 + rng.below(5),
            max_actions: 1 + rng.below(3),
            density: 0.15 + 0.85 * rng.next_f64(),
        };
        random_dense(&p, rng.next_u64()).unwrap()
    }
}

/// An enumerable instance together with its oracle ground truth and `T_drop`.
pub fn solved(rng: &mut SplitMix64) -> (Mdp<f64>, GroundTruth<f64>, f64) {
    let m = enumerable(rng);
    let truth = ground_truth(&m).unwrap();
    let tdrop = complexity_report(&m, &truth.rho_star, false).unwrap().tdrop;
    (m, truth, tdrop)
}

/// Built-in instances with a known optimal policy.
pub fn builtin() -> Vec<(String, Instance)> {
    vec![
        ("four-state(0.5)".into(), four_state(0.5).unwrap()),
        ("four-state(0.05)".into(), four_state(0.05).unwrap()),
        ("M(2,5,0.1)".into(), mkt(2, 5.0, 0.1, 0).unwrap()),
    ]
}

pub fn gamma(g: f64) -> DiscountFactor<f64> {
    DiscountFactor::new(g).unwrap()
}

// ----------------------------------------------------------------- mdp-core

pub fn span_shift_invariance(seed: u64) -> Check {
    let mut rng = SplitMix64::new(seed);
    let v = random_vector(1 + rng.below(10), -50.0, 50.0, &mut rng);
    let c = rng.uniform(-100.0, 100.0);
    let shifted: Vec<f64> = v.iter().map(|x| x + c).collect();
    let (a, b) = (ok(span(&v))?, ok(span(&shifted))?);
    ensure!((a - b).abs() <= 1e-12 * 200.0, "span {a} vs shifted span {b} (c = {c})");
    Ok(())
}

pub fn span_and_triangle(seed: u64) -> Check {
    let mut rng = SplitMix64::new(seed);
    let n = 1 + rng.below(10);
    let u = random_vector(n, -10.0, 10.0, &mut rng);
    let v = random_vector(n, -10.0, 10.0, &mut rng);
    let w = random_vector(n, -10.0, 10.0, &mut rng);
    ensure!(ok(span(&u))? <= 2.0 * sup_norm(&u), "span exceeds twice the sup norm");
    let (uv, vw, uw) = (ok(sup_dist(&u, &v))?, ok(sup_dist(&v, &w))?, ok(sup_dist(&u, &w))?);
    ensure!(uw <= uv + vw + 1e-12, "triangle: {uw} > {uv} + {vw}");
    Ok(())
}

pub fn json_roundtrip(seed: u64) -> Check {
    let mut rng = SplitMix64::new(seed);
    let m = match rng.below(4) {
        0 => dense(&mut rng),
        1 => multichain(&mut rng).mdp,
        2 => ok(mkt(1 + rng.below(6), 1.0 + 9.0 * rng.next_f64(), 0.01 + 0.2 * rng.next_f64(), rng.next_u64()))?.mdp,
        _ => ok(four_state(0.01 + 0.98 * rng.next_f64()))?.mdp,
    };
    let back = ok(load_mdp(&save_mdp(&m)))?;
    ensure!(back == m, "round trip changed {:?}", m.name());
    Ok(())
}

// ------------------------------------------------------------------ bellman

const GAMMAS: [f64; 5] = [0.3, 0.5, 0.9, 0.99, 1.0];

fn bellman_case(seed: u64) -> (Mdp<f64>, f64, Vec<f64>, Vec<f64>, SplitMix64) {
    let mut rng = SplitMix64::new(seed);
    let m = dense(&mut rng);
    let g = GAMMAS[rng.below(GAMMAS.len())];
    let u = random_vector(m.n_states(), -20.0, 20.0, &mut rng);
    let v = random_vector(m.n_states(), -20.0, 20.0, &mut rng);
    (m, g, u, v, rng)
}

pub fn bellman_contraction(seed: u64) -> Check {
    let (m, g, u, v, _) = bellman_case(seed);
    let tu = ok(apply_optimality(&m, &u, gamma(g)))?;
    let tv = ok(apply_optimality(&m, &v, gamma(g)))?;
    let (lhs, d) = (ok(tu.sup_dist(&tv))?, ok(sup_dist(&u, &v))?);
    ensure!(lhs <= g * d + 1e-12 * 40.0, "gamma {g}: {lhs} > {g} * {d}");
    Ok(())
}

pub fn bellman_monotone(seed: u64) -> Check {
    let (m, g, u, bump, _) = bellman_case(seed);
    let v: Vec<f64> = u.iter().zip(&bump).map(|(a, b)| a + b.abs()).collect();
    let tu = ok(apply_optimality(&m, &u, gamma(g)))?;
    let tv = ok(apply_optimality(&m, &v, gamma(g)))?;
    for s in 0..m.n_states() {
        ensure!(tu[s] <= tv[s] + 1e-12 * 40.0, "state {s}: {} > {}", tu[s], tv[s]);
    }
    Ok(())
}

pub fn bellman_constant_shift(seed: u64) -> Check {
    let (m, g, u, _, mut rng) = bellman_case(seed);
    let c = rng.uniform(-30.0, 30.0);
    let shifted: Vec<f64> = u.iter().map(|x| x + c).collect();
    let tu = ok(apply_optimality(&m, &u, gamma(g)))?;
    let ts = ok(apply_optimality(&m, &shifted, gamma(g)))?;
    for s in 0..m.n_states() {
        ensure!((ts[s] - tu[s] - g * c).abs() <= 1e-12 * 64.0, "state {s}: shift off by {}", ts[s] - tu[s] - g * c);
    }
    Ok(())
}

pub fn bellman_dominance(seed: u64) -> Check {
    let (m, g, u, _, mut rng) = bellman_case(seed);
    let randomized = rng.bernoulli(0.5);
    let pi = random_policy(&m, randomized, &mut rng);
    let tpi = ok(apply_evaluation(&m, &pi, &u, gamma(g)))?;
    let t = ok(apply_optimality(&m, &u, gamma(g)))?;
    for s in 0..m.n_states() {
        ensure!(tpi[s] <= t[s] + 1e-12 * 40.0, "state {s}: T^pi {} > T {}", tpi[s], t[s]);
    }
    Ok(())
}

pub fn bellman_greedy_consistent(seed: u64) -> Check {
    let (m, g, u, _, _) = bellman_case(seed);
    let pi = ok(greedy(&m, &u, gamma(g)))?;
    let tpi = ok(apply_evaluation(&m, &pi, &u, gamma(g)))?;
    let t = ok(apply_optimality(&m, &u, gamma(g)))?;
    ensure!(tpi == t, "greedy backup differs from optimal backup");
    Ok(())
}

// -------------------------------------------------------------------- chain

fn chain_case(seed: u64) -> (Mdp<f64>, Policy<f64>, SplitMix64) {
    let mut rng = SplitMix64::new(seed);
    let m = if rng.bernoulli(0.5) {
        let p = RandomDenseParams {
            n_states: 1 + rng.below(10),
            max_actions: 1 + rng.below(3),
            density: 0.1 + 0.6 * rng.next_f64(),
        };
        random_dense(&p, rng.next_u64()).unwrap()
    } else {
        multichain(&mut rng).mdp
    };
    let randomized = rng.bernoulli(0.5);
    let pi = random_policy(&m, randomized, &mut rng);
    (m, pi, rng)
}

fn mat_close(a: &Matrix<f64>, b: &Matrix<f64>, tol: f64) -> bool {
    a.max_abs_diff(b) <= tol
}

pub fn chain_invariants(seed: u64) -> Check {
    let (m, pi, _) = chain_case(seed);
    let an = ok(chain::analyze(&m, &pi))?;
    let n = m.n_states();
    let tol = 1e-9;
    let id = Matrix::identity(n);
    for i in 0..n {
        let row = an.p_inf.row(i);
        ensure!(row.iter().all(|&x| x >= -tol), "P_inf has a negative entry in row {i}");
        ensure!((row.iter().sum::<f64>() - 1.0).abs() <= tol, "P_inf row {i} does not sum to 1");
    }
    ensure!(mat_close(&an.p_inf.matmul(&an.p_pi), &an.p_inf, tol), "P_inf P != P_inf");
    ensure!(mat_close(&an.p_pi.matmul(&an.p_inf), &an.p_inf, tol), "P P_inf != P_inf");
    let i_minus_p = id.sub(&an.p_pi);
    let target = id.sub(&an.p_inf);
    ensure!(mat_close(&an.deviation.matmul(&i_minus_p), &target, tol), "H (I - P) != I - P_inf");
    ensure!(mat_close(&i_minus_p.matmul(&an.deviation), &target, tol), "(I - P) H != I - P_inf");
    let zero = Matrix::zeros(n, n);
    ensure!(mat_close(&an.deviation.matmul(&an.p_inf), &zero, tol), "H P_inf != 0");
    ensure!(mat_close(&an.p_inf.matmul(&an.deviation), &zero, tol), "P_inf H != 0");
    ensure!(ok(an.gain.sup_dist(&an.p_inf.mul_vec(&an.r_pi)))? <= tol, "gain != P_inf r");
    ensure!(ok(an.bias.sup_dist(&an.deviation.mul_vec(&an.r_pi)))? <= tol, "bias != H r");
    let p_bias = an.p_pi.mul_vec(&an.bias);
    for s in 0..n {
        let poisson = an.gain[s] + an.bias[s] - an.r_pi[s] - p_bias[s];
        ensure!(poisson.abs() <= tol, "Poisson equation off by {poisson} at state {s}");
    }
    ensure!(sup_norm(&an.p_inf.mul_vec(&an.bias)) <= tol, "P_inf bias != 0");
    let mut seen = vec![false; n];
    for class in &an.recurrent_classes {
        for &s in class {
            ensure!(!seen[s], "state {s} in two classes");
            seen[s] = true;
            let leaves: f64 = (0..n).filter(|j| !class.contains(j)).map(|j| an.p_pi.row(s)[j]).sum();
            ensure!(leaves == 0.0, "recurrent class containing {s} is not closed");
        }
    }
    for &s in &an.transient_states {
        ensure!(!seen[s], "state {s} both transient and recurrent");
        seen[s] = true;
    }
    ensure!(seen.iter().all(|&b| b), "classification does not cover every state");
    Ok(())
}

pub fn chain_restricted_monotonicity(seed: u64) -> Check {
    let (m, pi, mut rng) = chain_case(seed);
    let an = ok(chain::analyze(&m, &pi))?;
    let n = m.n_states();
    let mut x = vec![0.0; n];
    let mut y = vec![0.0; n];
    for &s in &an.transient_states {
        x[s] = rng.uniform(-5.0, 5.0);
        y[s] = x[s] + rng.uniform(0.0, 5.0);
    }
    ensure!(sup_norm(&an.p_inf.mul_vec(&x)) <= 1e-12, "transient support not annihilated by P_inf");
    let (hx, hy) = (an.deviation.mul_vec(&x), an.deviation.mul_vec(&y));
    for s in 0..n {
        ensure!(hx[s] <= hy[s] + 1e-9, "state {s}: Hx {} > Hy {}", hx[s], hy[s]);
    }
    Ok(())
}

pub fn chain_span_bound(seed: u64) -> Check {
    let (m, pi, mut rng) = chain_case(seed);
    let (p, _) = ok(chain::policy_matrices(&m, &pi))?;
    let n = m.n_states();
    let h = random_vector(n, -10.0, 10.0, &mut rng);
    let i_minus_p_h: Vec<f64> = h.iter().zip(p.mul_vec(&h)).map(|(a, b)| a - b).collect();
    let bound = ok(span(&h))?;
    for g in [0.5, 0.9, 0.99] {
        let a = Matrix::identity(n).sub(&p.scale(g));
        let x = ok(solve(&a, &i_minus_p_h))?;
        ensure!(sup_norm(&x) <= bound + 1e-9, "gamma {g}: {} > span {bound}", sup_norm(&x));
    }
    Ok(())
}

pub fn chain_visits_vs_transient_time(seed: u64) -> Check {
    let (m, pi, _) = chain_case(seed);
    let an = ok(chain::analyze(&m, &pi))?;
    let sums: Vec<f64> = (0..m.n_states())
        .map(|s| an.transient_states.iter().map(|&j| an.deviation.row(s)[j]).sum())
        .collect();
    let b = an.transient_time;
    for (s, &v) in sums.iter().enumerate() {
        ensure!(v <= b + 1e-9, "start {s}: visits {v} > B^pi {b}");
    }
    let top = sums.iter().copied().fold(0.0, f64::max);
    ensure!((top - b).abs() <= 1e-9 * b.max(1.0), "max visits {top} != B^pi {b}");
    Ok(())
}

// ------------------------------------------------------------------- oracle

pub fn oracle_gain_dominance(seed: u64) -> Check {
    let mut rng = SplitMix64::new(seed);
    let m = enumerable(&mut rng);
    let truth = ok(ground_truth(&m))?;
    for idx in 0..m.policy_count() {
        let pi = Policy::Deterministic(policy_at(&m, idx));
        let g = ok(chain::gain(&m, &pi))?;
        for s in 0..m.n_states() {
            ensure!(g[s] <= truth.rho_star[s] + 1e-10, "policy {idx} beats rho* at state {s}");
        }
    }
    Ok(())
}

pub fn oracle_optimality_conditions(seed: u64) -> Check {
    let mut rng = SplitMix64::new(seed);
    let m = enumerable(&mut rng);
    let truth = ok(ground_truth(&m))?;
    let rho = &truth.rho_star;
    let best = max_expected(&m, rho);
    for s in 0..m.n_states() {
        ensure!((best[s] - rho[s]).abs() <= 1e-9, "max_a P_sa rho* != rho*(s) at {s}");
    }
    ensure!(
        ok(simultaneous_argmax(&m, rho, &truth.h_both, tol_eq(rho)))?.is_some(),
        "no simultaneous argmax for (rho*, h_both)"
    );
    for g in [0.5, 0.9, 0.99] {
        let (v, _) = ok(discounted_optimal(&m, gamma(g)))?;
        let res = ok(residual_discounted(&m, &v, gamma(g)))?;
        ensure!(res <= 1e-10 / (1.0 - g), "gamma {g}: V* residual {res}");
    }
    Ok(())
}

// --------------------------------------------------------------- complexity

pub fn complexity_orderings(seed: u64) -> Check {
    let mut rng = SplitMix64::new(seed);
    let m = enumerable(&mut rng);
    let truth = ok(ground_truth(&m))?;
    let cx = ok(complexity_report(&m, &truth.rho_star, true))?;
    let b = cx.b.expect("enumerated");
    ensure!(cx.tdrop.is_finite() && cx.tdrop >= 0.0, "T_drop = {}", cx.tdrop);
    ensure!(cx.tdrop <= b + 1e-9, "T_drop {} > B {b}", cx.tdrop);
    ensure!(cx.tdrop <= cx.delta.recip() + 1e-9, "T_drop {} > 1/Delta {}", cx.tdrop, cx.delta.recip());
    let enumerated = cx.tdrop_pi.expect("enumerated").max;
    ensure!((cx.tdrop - enumerated).abs() <= 1e-8 * enumerated.max(1.0), "T_drop {} vs enumerated {enumerated}", cx.tdrop);
    let via_policy = ok(tdrop_policy(&m, &truth.blackwell_policy, &truth.rho_star))?;
    ensure!(via_policy <= cx.tdrop + 1e-9, "reference policy T_drop exceeds the maximum");
    Ok(())
}

// ------------------------------------------------------------------ solvers

pub fn solvers_coupling(seed: u64) -> Check {
    let (m, pi, mut rng) = chain_case(seed);
    let h0 = random_vector(m.n_states(), -5.0, 5.0, &mut rng);
    let rho = ok(chain::gain(&m, &pi))?;
    let op = ok(BellmanEvaluation::new(&m, &pi, DiscountFactor::undiscounted()))?;
    let sh = Shifted { inner: &op, shift: rho.clone() };
    let opts = SolveOptions { retention: Retention::Full, reference_gain: None };
    let steps = 200;
    for schedule in [Schedule::AnchorTwo, Schedule::AnchorOne] {
        let x = ok(halpern(&op, &h0, steps, schedule, &opts))?.trace.iterates.unwrap();
        let y = ok(halpern(&sh, &h0, steps, schedule, &opts))?.trace.iterates.unwrap();
        for t in 0..=steps {
            let lam: f64 = schedule.lambda(t);
            if schedule == Schedule::AnchorTwo {
                ensure!((lam - t as f64 / 3.0).abs() <= 1e-12 * t.max(1) as f64, "Lambda_{t} = {lam}");
            }
            let d = ok(x[t].sup_dist(&y[t].axpy(lam, &rho)))?;
            ensure!(d <= 1e-9 * (1.0 + t as f64), "{schedule:?} t={t}: coupling off by {d}");
        }
    }
    Ok(())
}

pub fn solvers_gain_estimation(seed: u64) -> Check {
    let mut rng = SplitMix64::new(seed);
    let (m, truth, _) = solved(&mut rng);
    let h0 = random_vector(m.n_states(), -5.0, 5.0, &mut rng);
    let d0 = ok(sup_dist(&h0, &truth.h_both))?;
    let mut x = ValueVec::from(h0.clone());
    for n in 1..=200usize {
        x = ok(apply_optimality(&m, &x, DiscountFactor::undiscounted()))?;
        let err = (0..m.n_states())
            .map(|s| (x[s] - n as f64 * truth.rho_star[s] - truth.h_both[s]).abs())
            .fold(0.0, f64::max);
        ensure!(le(err, d0, 1e-9 * n as f64), "n={n}: {err} > {d0}");
    }
    Ok(())
}

pub fn solvers_alg1_bounds(seed: u64) -> Check {
    let mut rng = SplitMix64::new(seed);
    let (m, truth, tdrop) = solved(&mut rng);
    let h0 = if rng.bernoulli(0.3) { vec![0.0; m.n_states()] } else { random_vector(m.n_states(), -5.0, 5.0, &mut rng) };
    let n = 1 + rng.below(200);
    let nf = n as f64;
    let d0 = ok(sup_dist(&h0, &truth.h_both))?;
    let r = ok(approx_shifted_halpern(&m, &h0, n, &SolveOptions::default()))?;
    let pi = r.output_policy.as_ref().ok_or("no policy")?;
    let rho_pi = ok(chain::gain(&m, pi))?;
    let subopt = ok(rho_pi.sup_dist(&truth.rho_star))?;
    let tail = 13.0 + 35.0 / nf + 20.0 / (nf * nf);
    let bound = (10.0 / 3.0 * tdrop + tail) / nf * d0;
    ensure!(BoundCheck::new("", None, subopt, bound).pass, "n={n}: suboptimality {subopt} > {bound}");
    if let Some(delta) = truth.delta.finite() {
        if nf >= 4.0 * d0 / delta {
            let large = tail / nf * d0;
            ensure!(BoundCheck::new("", None, subopt, large).pass, "n={n}: large-n suboptimality {subopt} > {large}");
            let drift = mvi_core::bellman::policy_expect(&m, pi, &truth.rho_star);
            let tol = mvi_core::complexity::tol_gap(&truth.rho_star);
            for s in 0..m.n_states() {
                ensure!(truth.rho_star[s] - drift[s] <= tol, "n={n}: greedy policy drops gain at {s}");
            }
        }
    }
    Ok(())
}

pub fn solvers_picard_gain(seed: u64) -> Check {
    let mut rng = SplitMix64::new(seed);
    let (m, truth, tdrop) = solved(&mut rng);
    let su = truth.span_unmod();
    let sb = truth.span_both();
    let mut x = ValueVec::zeros(m.n_states());
    for n in 1..=200usize {
        x = ok(apply_optimality(&m, &x, DiscountFactor::undiscounted()))?;
        let d = (0..m.n_states()).map(|s| (x[s] - n as f64 * truth.rho_star[s]).abs()).fold(0.0, f64::max);
        ensure!(le(d, sb, 1e-9 * n as f64), "n={n}: {d} > span(h_both) {sb}");
        let alt = su + tdrop + su * tdrop;
        ensure!(le(d, alt, 1e-9 * n as f64), "n={n}: {d} > {alt}");
    }
    Ok(())
}

pub fn solvers_discounted_gain(seed: u64) -> Check {
    let mut rng = SplitMix64::new(seed);
    let (m, truth, tdrop) = solved(&mut rng);
    let su = truth.span_unmod();
    let bound = truth.span_both().min(su + tdrop + su * tdrop);
    for g in [0.9, 0.99, 0.999] {
        let (v, _) = ok(discounted_optimal(&m, gamma(g)))?;
        let d = (0..m.n_states()).map(|s| (v[s] - truth.rho_star[s] / (1.0 - g)).abs()).fold(0.0, f64::max);
        ensure!(le(d, bound, 1e-9 / (1.0 - g)), "gamma {g}: {d} > {bound}");
    }
    Ok(())
}

/// Operators preserve length, traces have `iterations + 1` entries, and
/// every algorithm with a greedy extraction returns a policy.
pub fn solvers_shapes(seed: u64) -> Check {
    let mut rng = SplitMix64::new(seed);
    let m = dense(&mut rng);
    let k = m.n_states();
    let x0 = random_vector(k, -3.0, 3.0, &mut rng);
    let g = [0.5, 0.9, 0.95][rng.below(3)];
    let op = BellmanOptimality::new(&m, gamma(g));
    ensure!(op.apply(&x0).len() == k && op.dim() == k, "operator changed the length");
    let n = rng.below(40);
    let o = SolveOptions::default();
    ensure!(ok(picard(&op, &x0, n, &o))?.trace.residuals.len() == n + 1, "picard trace length");
    ensure!(ok(halpern(&op, &x0, n, Schedule::AnchorTwo, &o))?.trace.residuals.len() == n + 1, "halpern trace length");
    ensure!(ok(halpern_then_picard(&op, &x0, n, &o))?.trace.residuals.len() == n + 1, "HTP trace length");
    let vi = ok(value_iteration(&m, &x0, n, &o))?;
    ensure!(vi.trace.residuals.len() == n + 1 && vi.output_policy.is_some(), "vi shape");
    let n1 = n.max(1);
    let a1 = ok(approx_shifted_halpern(&m, &x0, n1, &o))?;
    ensure!(a1.trace.residuals.len() == 2 * n1 + 1 && a1.output_policy.is_some(), "alg1 shape");
    let e = ok(gamma(g).effective_horizon())?;
    let ws = ok(warm_start_htp(&m, gamma(g), e + n, &o))?;
    ensure!(ws.trace.residuals.len() == e + n + 1 && ws.output_policy.is_some(), "warm start shape");
    let nb = 2 + n;
    let mc = ok(solve_multichain(&m, nb, 0.0, &o))?;
    ensure!(mc.trace.residuals.len() == 2 * nb + 1 && mc.output_policy.is_some(), "multichain shape");
    let bl = ok(dmdp_baseline(&m, 4 + n, &o))?;
    ensure!(bl.trace.residuals.len() == 5 + n && bl.output_policy.is_some(), "baseline shape");
    Ok(())
}

// ------------------------------------------------------------------ certify

pub fn certify_slack_rule(seed: u64) -> Check {
    let mut rng = SplitMix64::new(seed);
    let rhs = rng.uniform(-5.0, 5.0) * 10f64.powi(rng.below(7) as i32 - 3);
    let lhs = rhs + rng.uniform(-3.0, 3.0) * BOUND_SLACK * rhs.abs().max(1.0);
    let c = BoundCheck::new("x", None, lhs, rhs);
    let expect = lhs <= rhs + BOUND_SLACK * rhs.abs().max(1.0);
    ensure!(c.pass == expect, "pass {} for lhs {lhs}, rhs {rhs}", c.pass);
    ensure!(c.margin == rhs - lhs, "margin");
    Ok(())
}

// -------------------------------------------------------------------- bench

pub fn bench_generators_validate(seed: u64) -> Check {
    let mut rng = SplitMix64::new(seed);
    let m = match rng.below(4) {
        0 => dense(&mut rng),
        1 => multichain(&mut rng).mdp,
        2 => ok(mkt(1 + rng.below(20), 1.0 + 20.0 * rng.next_f64(), 0.01 + 0.4 * rng.next_f64(), rng.next_u64()))?.mdp,
        _ => ok(four_state(0.001 + 0.998 * rng.next_f64()))?.mdp,
    };
    ok(mvi_core::model::validate(m.name().map(str::to_owned), m.states().to_vec()))?;
    Ok(())
}

pub fn bench_csv_rows(seed: u64) -> Check {
    let mut rng = SplitMix64::new(seed);
    let n = 2 * (2 + rng.below(10));
    let cfg = ExperimentConfig {
        instance: InstanceSpec::Mkt { k: 1 + rng.below(5), t: 1.0 + 9.0 * rng.next_f64(), eps: 0.05 + 0.4 * rng.next_f64() },
        algorithms: Algorithm::ALL.to_vec(),
        n,
        seeds: vec![rng.next_u64()],
        outputs: Outputs::default(),
        tolerances: Tolerances::default(),
        out_dir: PathBuf::from("unused"),
    };
    let a = ok(run_traces(&cfg))?;
    let b = ok(run_traces(&cfg))?;
    for (ra, rb) in a.iter().zip(&b) {
        let (mut ba, mut bb) = (Vec::new(), Vec::new());
        ok(write_csv(&ra.rows, &mut ba))?;
        ok(write_csv(&rb.rows, &mut bb))?;
        ensure!(ba == bb, "{:?}: CSV not bit-stable", ra.algorithm);
        let text = String::from_utf8(ba).map_err(|e| e.to_string())?;
        let mut lines = text.lines();
        ensure!(lines.next() == Some("iter,fpe,subopt,gain_pres"), "header");
        ensure!(lines.count() == n + 1, "{:?}: wrong row count", ra.algorithm);
    }
    Ok(())
}

/// Every property with its name, for the acceptance sweep.
pub const ALL: &[(&str, fn(u64) -> Check)] = &[
    ("mdp-core/span-shift", span_shift_invariance),
    ("mdp-core/span-triangle", span_and_triangle),
    ("mdp-core/json-roundtrip", json_roundtrip),
    ("bellman/contraction", bellman_contraction),
    ("bellman/monotone", bellman_monotone),
    ("bellman/constant-shift", bellman_constant_shift),
    ("bellman/dominance", bellman_dominance),
    ("bellman/greedy", bellman_greedy_consistent),
    ("chain/invariants", chain_invariants),
    ("chain/restricted-monotonicity", chain_restricted_monotonicity),
    ("chain/span-bound", chain_span_bound),
    ("chain/visits", chain_visits_vs_transient_time),
    ("oracle/gain-dominance", oracle_gain_dominance),
    ("oracle/optimality", oracle_optimality_conditions),
    ("complexity/orderings", complexity_orderings),
    ("solvers/coupling", solvers_coupling),
    ("solvers/gain-estimation", solvers_gain_estimation),
    ("solvers/alg1", solvers_alg1_bounds),
    ("solvers/picard-gain", solvers_picard_gain),
    ("solvers/discounted-gain", solvers_discounted_gain),
    ("solvers/shapes", solvers_shapes),
    ("certify/slack", certify_slack_rule),
    ("bench/generators", bench_generators_validate),
    ("bench/csv", bench_csv_rows),
];
