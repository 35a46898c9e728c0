//! Average-reward solvers built on the undiscounted operators.

use super::fixed_point::{check_dim, halpern_steps, picard_steps, start};
use super::{report, BellmanEvaluation, BellmanOptimality, Recorder, Schedule, Shifted, SolveOptions, SolveReport};
use crate::bellman::{greedy, DiscountFactor};
use crate::chain;
use crate::error::{Error, Result};
use crate::model::{Mdp, Policy};
use crate::scalar::Real;
use crate::vector::ValueVec;

/// Undiscounted value iteration `h_{t+1} = T(h_t)` from `h0`, returning the
/// greedy policy of the last iterate. Residuals are `‖T(h) − h − ρ‖` for the
/// reference gain when one is supplied, else `‖T(h) − h‖`.
pub fn value_iteration<T: Real>(
    mdp: &Mdp<T>,
    h0: &[T],
    n: usize,
    opts: &SolveOptions<T>,
) -> Result<SolveReport<T>> {
    let op = BellmanOptimality::undiscounted(mdp);
    check_dim(&op, h0)?;
    let shift = opts.reference_gain.as_deref();
    if let Some(s) = shift {
        check_dim(&op, s)?;
    }
    let mut rec = Recorder::new(opts.retention, n);
    let st = start(&op, ValueVec::from(h0.to_vec()), shift, &mut rec);
    let st = picard_steps(&op, st, n, shift, &mut rec);
    let pi = greedy(mdp, &st.x, DiscountFactor::undiscounted())?;
    Ok(report("vi", st.x, Some(pi), rec.finish("picard", None)).meta("n", n))
}

/// Halpern iteration (`β_t = 1 − 1/(t+1)`) on the unshifted `T^π`.
/// Residuals are `‖T^π(h_t) − h_t − ρ^π‖` with `ρ^π` from the exact chain
/// analysis.
pub fn policy_eval_halpern<T: Real>(
    mdp: &Mdp<T>,
    pi: &Policy<T>,
    h0: &[T],
    n: usize,
    opts: &SolveOptions<T>,
) -> Result<SolveReport<T>> {
    let op = BellmanEvaluation::new(mdp, pi, DiscountFactor::undiscounted())?;
    check_dim(&op, h0)?;
    let rho = chain::gain(mdp, pi)?;
    let mut rec = Recorder::new(opts.retention, n);
    let st = start(&op, ValueVec::from(h0.to_vec()), Some(&rho), &mut rec);
    let st = halpern_steps(&op, st, h0, n, Schedule::AnchorOne, Some(&rho), &mut rec);
    let trace = rec.finish(Schedule::AnchorOne.describe(), Some(rho));
    Ok(report("policy_eval_halpern", st.x, None, trace).meta("n", n))
}

/// Approximately shifted Halpern iteration.
///
/// Phase 1 runs `n` Picard steps of `T` from `h0`; `ρ̂ = (x_n − h0)/n`.
/// Phase 2 runs `n` Halpern steps (`β_t = 1 − 2/(t+2)`) of `T − ρ̂`
/// anchored at `z_0 = x_n`. The returned policy is greedy for `z_n`.
///
/// The trace has `2n + 1` residuals `‖T(y) − y − ρ‖` over
/// `x_0, …, x_n = z_0, z_1, …, z_n`, where `ρ` is the reference gain if
/// supplied and `ρ̂` otherwise (phase 1 is then replayed once `ρ̂` is known).
pub fn approx_shifted_halpern<T: Real>(
    mdp: &Mdp<T>,
    h0: &[T],
    n: usize,
    opts: &SolveOptions<T>,
) -> Result<SolveReport<T>> {
    if n < 1 {
        return Err(Error::InvalidIterationCount("approximately shifted Halpern needs n >= 1".into()));
    }
    let op = BellmanOptimality::undiscounted(mdp);
    check_dim(&op, h0)?;
    if let Some(g) = &opts.reference_gain {
        check_dim(&op, g)?;
    }
    let x0 = ValueVec::from(h0.to_vec());
    let inv_n = T::one() / T::from_count(n);
    let mut rec = Recorder::new(opts.retention, 2 * n);

    let (xn, rho_hat) = match &opts.reference_gain {
        Some(g) => {
            let st = start(&op, x0.clone(), Some(g), &mut rec);
            let st = picard_steps(&op, st, n, Some(g), &mut rec);
            let rho_hat = &(&st.x - &x0) * inv_n;
            (st, rho_hat)
        }
        None => {
            let mut scratch = Recorder::new(super::Retention::None, 0);
            let st = picard_steps(&op, start(&op, x0.clone(), None, &mut scratch), n, None, &mut scratch);
            let rho_hat = &(&st.x - &x0) * inv_n;
            let st = start(&op, x0.clone(), Some(&rho_hat), &mut rec);
            (picard_steps(&op, st, n, Some(&rho_hat), &mut rec), rho_hat)
        }
    };

    let shifted = Shifted { inner: &op, shift: rho_hat.clone() };
    let gain = opts.reference_gain.clone().unwrap_or_else(|| rho_hat.clone());
    // T̂(z) − z − (g − ρ̂) = T(z) − z − g.
    let offset = &gain - &rho_hat;
    let z0 = xn.x.clone();
    let st = super::fixed_point::State { tx: &xn.tx - &rho_hat, x: xn.x };
    let st = halpern_steps(&shifted, st, &z0, n, Schedule::AnchorTwo, Some(&offset), &mut rec);

    let pi = greedy(mdp, &st.x, DiscountFactor::undiscounted())?;
    let trace = rec.finish(format!("picard x{n}, then {} x{n}", Schedule::AnchorTwo.describe()), Some(rho_hat));
    Ok(report("alg1", st.x, Some(pi), trace)
        .meta("n", n)
        .meta("phase_split", format!("{n}/{n}"))
        .meta("residual_gain", if opts.reference_gain.is_some() { "reference" } else { "estimate" }))
}
