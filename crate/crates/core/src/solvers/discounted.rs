//! Discounted solvers and the discounted route to average-reward policies.

use super::fixed_point::{check_dim, halpern_steps, picard_steps, residual, start, State};
use super::{report, BellmanOptimality, Operator, Recorder, Schedule, SolveOptions, SolveReport};
use crate::bellman::{apply_optimality, greedy, DiscountFactor};
use crate::error::{Error, Result};
use crate::model::Mdp;
use crate::scalar::Real;
use crate::vector::ValueVec;

/// Halpern phase length `E = floor(1/(1−γ)) − 1`.
fn halpern_length<T: Real>(gamma: DiscountFactor<T>) -> Result<usize> {
    Ok(gamma.effective_horizon()?.saturating_sub(1))
}

fn htp_steps<T: Real, O: Operator<T> + ?Sized>(
    op: &O,
    st: State<T>,
    n: usize,
    e: usize,
    rec: &mut Recorder<T>,
) -> State<T> {
    let anchor = st.x.clone();
    let h = n.min(e);
    let st = halpern_steps(op, st, &anchor, h, Schedule::AnchorTwo, None, rec);
    picard_steps(op, st, n - h, None, rec)
}

fn htp_schedule(e: usize) -> String {
    format!("{} for t < {e}, then picard", Schedule::AnchorTwo.describe())
}

/// Halpern for the first `E = floor(1/(1−γ)) − 1` steps, Picard afterwards.
/// The operator must declare a contraction factor `γ < 1`.
pub fn halpern_then_picard<T: Real, O: Operator<T> + ?Sized>(
    op: &O,
    x0: &[T],
    n: usize,
    opts: &SolveOptions<T>,
) -> Result<SolveReport<T>> {
    let gamma = match op.contraction() {
        Some(g) if g < T::one() && g > T::zero() => DiscountFactor::new(g)?,
        _ => return Err(Error::MissingContraction(op.label())),
    };
    check_dim(op, x0)?;
    let e = halpern_length(gamma)?;
    let mut rec = Recorder::new(opts.retention, n);
    let st = start(op, ValueVec::from(x0.to_vec()), None, &mut rec);
    let st = htp_steps(op, st, n, e, &mut rec);
    Ok(report("alg2", st.x, None, rec.finish(htp_schedule(e), None))
        .meta("operator", op.label())
        .meta("gamma", gamma.value().as_f64())
        .meta("halpern_steps", e)
        .meta("n", n))
}

/// Warm-started Halpern-then-Picard.
///
/// `E' = floor(1/(1−γ))` undiscounted steps `x ← T(x)` from `0` (no
/// rescaling), then `n − E'` steps of [`halpern_then_picard`] on `T_γ`
/// from `x_{E'}`. Residuals are `‖T_γ(x) − x‖` over all `n + 1` iterates.
pub fn warm_start_htp<T: Real>(
    mdp: &Mdp<T>,
    gamma: DiscountFactor<T>,
    n: usize,
    opts: &SolveOptions<T>,
) -> Result<SolveReport<T>> {
    let warm = gamma.effective_horizon()?;
    if n < warm {
        return Err(Error::IterationBudgetTooSmall { n, required: warm });
    }
    let e = halpern_length(gamma)?;
    let op = BellmanOptimality::new(mdp, gamma);
    let undiscounted = DiscountFactor::undiscounted();
    let mut rec = Recorder::new(opts.retention, n);

    let mut x = ValueVec::zeros(mdp.n_states());
    for _ in 0..warm {
        let tgx = op.apply(&x);
        rec.push(residual(&tgx, &x, None), &x);
        x = apply_optimality(mdp, &x, undiscounted)?;
    }
    let st = start(&op, x, None, &mut rec);
    let st = htp_steps(&op, st, n - warm, e, &mut rec);

    let pi = greedy(mdp, &st.x, gamma)?;
    Ok(report("alg3", st.x, Some(pi), rec.finish(format!("T x{warm}, then {}", htp_schedule(e)), None))
        .meta("gamma", gamma.value().as_f64())
        .meta("warm_start_steps", warm)
        .meta("halpern_steps", e)
        .meta("n", n))
}

/// Average-reward solver: `γ = 1 − 1/n` and [`warm_start_htp`] with budget
/// `(2 + k) n`. `k n` must be a nonnegative integer.
pub fn solve_multichain<T: Real>(
    mdp: &Mdp<T>,
    n: usize,
    extra_k: f64,
    opts: &SolveOptions<T>,
) -> Result<SolveReport<T>> {
    if n < 2 {
        return Err(Error::InvalidIterationCount(format!("multichain solver needs n >= 2, got {n}")));
    }
    let kn = extra_k * n as f64;
    if !(extra_k >= 0.0 && kn.is_finite()) || (kn - kn.round()).abs() > 1e-9 * kn.max(1.0) {
        return Err(Error::InvalidIterationCount(format!("extra_k * n = {kn} is not a nonnegative integer")));
    }
    let budget = 2 * n + kn.round() as usize;
    let gamma = DiscountFactor::new(T::one() - T::one() / T::from_count(n))?;
    let mut r = warm_start_htp(mdp, gamma, budget, opts)?;
    r.algorithm = "multichain".into();
    Ok(r.meta("base_n", n).meta("extra_k", extra_k).meta("budget", budget))
}

/// Discount factor of the baseline: `1/(1−γ) = n / (2 ln n)`.
pub fn baseline_gamma(n: usize) -> f64 {
    let nf = n as f64;
    1.0 - 2.0 * nf.ln() / nf
}

/// Discounted baseline: `n` Picard steps of `T_γ` from `0` with
/// `γ` from [`baseline_gamma`], then the `γ`-greedy policy.
pub fn dmdp_baseline<T: Real>(mdp: &Mdp<T>, n: usize, opts: &SolveOptions<T>) -> Result<SolveReport<T>> {
    if n < 4 {
        return Err(Error::InvalidIterationCount(format!("discounted baseline needs n >= 4, got {n}")));
    }
    let g = baseline_gamma(n);
    let gamma = DiscountFactor::new(T::lit(g))?;
    let op = BellmanOptimality::new(mdp, gamma);
    let mut rec = Recorder::new(opts.retention, n);
    let st = start(&op, ValueVec::zeros(mdp.n_states()), None, &mut rec);
    let st = picard_steps(&op, st, n, None, &mut rec);
    let pi = greedy(mdp, &st.x, gamma)?;
    Ok(report("baseline", st.x, Some(pi), rec.finish("picard", None))
        .meta("gamma", g)
        .meta("effective_horizon", 1.0 / (1.0 - g))
        .meta("log_base", "natural")
        .meta("n", n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generators::{four_state, random_dense, random_vector, RandomDenseParams, SplitMix64};
    use crate::model::{Action, Policy};
    use crate::oracle::discounted_optimal;
    use crate::solvers::OperatorHandle;
    use crate::vector::sup_dist;

    fn htp_bound(gamma: f64, t: usize, d0: f64) -> f64 {
        let s: f64 = (0..=t).map(|i| gamma.powi(i as i32)).sum();
        8.0 * std::f64::consts::E * gamma.powi(t as i32) / s * d0
    }

    #[test]
    fn switch_point_for_gamma_09() {
        assert_eq!(halpern_length(DiscountFactor::new(0.9).unwrap()).unwrap(), 9);
        let op = OperatorHandle::new(1, "half", Some(0.9), |x: &[f64]| ValueVec::from(vec![0.9 * x[0] + 1.0]));
        let r = halpern_then_picard(&op, &[0.0], 12, &SolveOptions::full()).unwrap();
        let its = r.trace.iterates.unwrap();
        for t in 9..12 {
            assert!((its[t + 1][0] - (0.9 * its[t][0] + 1.0)).abs() < 1e-14, "picard at t={t}");
        }
        let beta9 = Schedule::AnchorTwo.beta::<f64>(9);
        assert!((its[9][0] - beta9 * (0.9 * its[8][0] + 1.0)).abs() < 1e-14);
    }

    #[test]
    fn missing_contraction() {
        let op = OperatorHandle::new(1, "id", Some(1.0), |x: &[f64]| ValueVec::from(x.to_vec()));
        assert!(matches!(
            halpern_then_picard(&op, &[0.0], 3, &SolveOptions::default()),
            Err(Error::MissingContraction(_))
        ));
        let op = OperatorHandle::new(1, "id", None, |x: &[f64]| ValueVec::from(x.to_vec()));
        assert!(matches!(
            halpern_then_picard(&op, &[0.0], 3, &SolveOptions::default()),
            Err(Error::MissingContraction(_))
        ));
    }

    #[test]
    fn htp_rate_on_random_mdps() {
        let mut rng = SplitMix64::new(99);
        for &g in &[0.5, 0.9, 0.99] {
            for seed in 0..3 {
                let m = random_dense(&RandomDenseParams { n_states: 6, max_actions: 3, density: 0.5 }, seed).unwrap();
                let gamma = DiscountFactor::new(g).unwrap();
                let (vstar, _) = discounted_optimal(&m, gamma).unwrap();
                let x0 = random_vector(6, -20.0, 20.0, &mut rng);
                let d0 = sup_dist(&x0, &vstar).unwrap();
                let op = BellmanOptimality::new(&m, gamma);
                let r = halpern_then_picard(&op, &x0, 600, &SolveOptions::default()).unwrap();
                for (t, &res) in r.trace.residuals.iter().enumerate() {
                    assert!(res <= htp_bound(g, t, d0) + 1e-9, "gamma {g} seed {seed} t {t}");
                }
            }
        }
    }

    #[test]
    fn fixed_point_start_stays() {
        let m = Mdp::new(None, vec![vec![Action { probs: vec![1.0], reward: 0.5 }]]).unwrap();
        let gamma = DiscountFactor::new(0.8).unwrap();
        let op = BellmanOptimality::new(&m, gamma);
        let r = halpern_then_picard(&op, &[2.5], 20, &SolveOptions::default()).unwrap();
        assert!(r.trace.residuals.iter().all(|&x: &f64| x.abs() < 1e-15));
    }

    #[test]
    fn warm_start_budget_checked() {
        let inst = four_state(0.5).unwrap();
        let gamma = DiscountFactor::new(0.9).unwrap();
        assert!(matches!(
            warm_start_htp(&inst.mdp, gamma, 9, &SolveOptions::default()),
            Err(Error::IterationBudgetTooSmall { n: 9, required: 10 })
        ));
        let r = warm_start_htp(&inst.mdp, gamma, 10, &SolveOptions::default()).unwrap();
        assert_eq!(r.trace.residuals.len(), 11);
    }

    #[test]
    fn zero_mdp_stays_zero() {
        let m = Mdp::new(
            None,
            vec![
                vec![Action { probs: vec![0.0, 1.0], reward: 0.0 }],
                vec![Action { probs: vec![0.0, 1.0], reward: 0.0 }, Action { probs: vec![1.0, 0.0], reward: 0.0 }],
            ],
        )
        .unwrap();
        let r = solve_multichain(&m, 8, 0.0, &SolveOptions::full()).unwrap();
        assert!(r.trace.iterates.unwrap().iter().all(|v| v.iter().all(|&x| x == 0.0)));
        assert_eq!(r.trace.residuals.len(), 17);
    }

    #[test]
    fn multichain_single_policy_is_exact() {
        let inst = four_state(0.5).unwrap();
        let single = Mdp::new(None, inst.mdp.states().iter().map(|a| vec![a[0].clone()]).collect()).unwrap();
        let r = solve_multichain(&single, 4, 0.0, &SolveOptions::default()).unwrap();
        assert_eq!(r.output_policy, Some(Policy::Deterministic(vec![0; 4])));
    }

    #[test]
    fn extra_k_integrality() {
        let inst = four_state(0.5).unwrap();
        assert!(solve_multichain(&inst.mdp, 8, 0.25, &SolveOptions::default()).is_ok());
        assert!(matches!(
            solve_multichain(&inst.mdp, 8, 0.3, &SolveOptions::default()),
            Err(Error::InvalidIterationCount(_))
        ));
        assert!(solve_multichain(&inst.mdp, 1, 0.0, &SolveOptions::default()).is_err());
        let r = solve_multichain(&inst.mdp, 8, 4.0, &SolveOptions::default()).unwrap();
        assert_eq!(r.trace.residuals.len(), 6 * 8 + 1);
    }

    #[test]
    fn baseline_horizon() {
        let h = 1.0 / (1.0 - baseline_gamma(100));
        assert!((h - 100.0 / (2.0 * 100f64.ln())).abs() < 1e-9);
        assert!((h - 10.857).abs() < 1e-3);
        let inst = four_state(0.5).unwrap();
        assert!(dmdp_baseline(&inst.mdp, 3, &SolveOptions::default()).is_err());
        let r = dmdp_baseline(&inst.mdp, 100, &SolveOptions::default()).unwrap();
        assert_eq!(r.metadata["log_base"], "natural");
    }
}
