//! Picard and Halpern iteration on a generic operator.

use super::{report, Operator, Recorder, SolveOptions, SolveReport, Schedule};
use crate::error::{Error, Result};
use crate::scalar::Real;
use crate::vector::ValueVec;

/// Current iterate together with the operator applied to it.
pub(super) struct State<T> {
    pub x: ValueVec<T>,
    pub tx: ValueVec<T>,
}

/// `‖tx − x − shift‖_∞`, with a missing shift meaning zero.
pub(super) fn residual<T: Real>(tx: &[T], x: &[T], shift: Option<&[T]>) -> T {
    match shift {
        Some(s) => crate::bellman::shifted_residual(tx, x, s),
        None => tx.iter().zip(x).fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs())),
    }
}

pub(super) fn check_dim<T: Real, O: Operator<T> + ?Sized>(op: &O, x0: &[T]) -> Result<()> {
    if x0.len() != op.dim() {
        return Err(Error::LengthMismatch { expected: op.dim(), got: x0.len() });
    }
    Ok(())
}

/// Applies the operator to `x0` and records the initial residual.
pub(super) fn start<T: Real, O: Operator<T> + ?Sized>(
    op: &O,
    x0: ValueVec<T>,
    shift: Option<&[T]>,
    rec: &mut Recorder<T>,
) -> State<T> {
    let tx = op.apply(&x0);
    rec.push(residual(&tx, &x0, shift), &x0);
    State { x: x0, tx }
}

/// `n` steps `x ← L(x)`.
pub(super) fn picard_steps<T: Real, O: Operator<T> + ?Sized>(
    op: &O,
    mut st: State<T>,
    n: usize,
    shift: Option<&[T]>,
    rec: &mut Recorder<T>,
) -> State<T> {
    for _ in 0..n {
        st.x = st.tx;
        st.tx = op.apply(&st.x);
        rec.push(residual(&st.tx, &st.x, shift), &st.x);
    }
    st
}

/// `n` Halpern steps anchored at `anchor`, using `β_1, …, β_n`.
pub(super) fn halpern_steps<T: Real, O: Operator<T> + ?Sized>(
    op: &O,
    mut st: State<T>,
    anchor: &[T],
    n: usize,
    schedule: Schedule,
    shift: Option<&[T]>,
    rec: &mut Recorder<T>,
) -> State<T> {
    for t in 1..=n {
        let beta: T = schedule.beta(t);
        let keep = T::one() - beta;
        st.x = anchor.iter().zip(st.tx.iter()).map(|(&a, &l)| keep * a + beta * l).collect();
        st.tx = op.apply(&st.x);
        rec.push(residual(&st.tx, &st.x, shift), &st.x);
    }
    st
}

/// Picard iteration `x_{t+1} = L(x_t)`; residuals are `‖L(x_t) − x_t‖`.
pub fn picard<T: Real, O: Operator<T> + ?Sized>(
    op: &O,
    x0: &[T],
    n: usize,
    opts: &SolveOptions<T>,
) -> Result<SolveReport<T>> {
    check_dim(op, x0)?;
    let mut rec = Recorder::new(opts.retention, n);
    let st = start(op, ValueVec::from(x0.to_vec()), None, &mut rec);
    let st = picard_steps(op, st, n, None, &mut rec);
    Ok(report("picard", st.x, None, rec.finish("picard", None)).meta("operator", op.label()).meta("n", n))
}

/// Halpern iteration `x_{t+1} = (1 − β_{t+1}) x_0 + β_{t+1} L(x_t)`.
pub fn halpern<T: Real, O: Operator<T> + ?Sized>(
    op: &O,
    x0: &[T],
    n: usize,
    schedule: Schedule,
    opts: &SolveOptions<T>,
) -> Result<SolveReport<T>> {
    let run = HalpernRun { schedule, shift: None };
    run.run(op, x0, n, opts)
}

/// A Halpern run whose recorded residual is `‖L(x) − x − shift‖`.
#[derive(Clone, Debug)]
pub struct HalpernRun<'s, T> {
    pub schedule: Schedule,
    pub shift: Option<&'s [T]>,
}

impl<T: Real> HalpernRun<'_, T> {
    pub fn run<O: Operator<T> + ?Sized>(
        &self,
        op: &O,
        x0: &[T],
        n: usize,
        opts: &SolveOptions<T>,
    ) -> Result<SolveReport<T>> {
        check_dim(op, x0)?;
        if let Some(s) = self.shift {
            check_dim(op, s)?;
        }
        let mut rec = Recorder::new(opts.retention, n);
        let st = start(op, ValueVec::from(x0.to_vec()), self.shift, &mut rec);
        let st = halpern_steps(op, st, x0, n, self.schedule, self.shift, &mut rec);
        Ok(report("halpern", st.x, None, rec.finish(self.schedule.describe(), None))
            .meta("operator", op.label())
            .meta("n", n))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bellman::DiscountFactor;
    use crate::model::{Action, Mdp};
    use crate::solvers::{BellmanOptimality, OperatorHandle, Retention};

    fn absorbing(r: f64) -> Mdp<f64> {
        Mdp::new(None, vec![vec![Action { probs: vec![1.0], reward: r }]]).unwrap()
    }

    #[test]
    fn identity_is_fixed() {
        let id = OperatorHandle::new(3, "id", Some(1.0), |x: &[f64]| ValueVec::from(x.to_vec()));
        let r = picard(&id, &[1.0, 2.0, 3.0], 5, &SolveOptions::default()).unwrap();
        assert_eq!(r.output_value.as_slice(), &[1.0, 2.0, 3.0]);
        assert_eq!(r.trace.residuals, vec![0.0; 6]);
    }

    #[test]
    fn discounted_absorbing_matches_geometric_series() {
        let m = absorbing(0.5);
        let op = BellmanOptimality::new(&m, DiscountFactor::new(0.9).unwrap());
        for n in [0usize, 1, 7, 40] {
            let r = picard(&op, &[0.0], n, &SolveOptions::default()).unwrap();
            let want = 5.0 * (1.0 - 0.9f64.powi(n as i32));
            assert!((r.output_value[0] - want).abs() < 1e-12, "n={n}");
            assert_eq!(r.trace.residuals.len(), n + 1);
        }
    }

    #[test]
    fn periodic_chain_oscillates() {
        let m = Mdp::new(
            None,
            vec![
                vec![Action { probs: vec![0.0, 1.0], reward: 1.0 }],
                vec![Action { probs: vec![1.0, 0.0], reward: 0.0 }],
            ],
        )
        .unwrap();
        let op = BellmanOptimality::undiscounted(&m);
        let r = picard(&op, &[0.0, 0.0], 20, &SolveOptions::default()).unwrap();
        // x_t = [ceil(t/2), floor(t/2)] never settles; ‖T(x_t) − x_t‖ stays 1.
        assert_eq!(r.output_value.as_slice(), &[10.0, 10.0]);
        let odd = picard(&op, &[0.0, 0.0], 21, &SolveOptions::default()).unwrap();
        assert_eq!(odd.output_value.as_slice(), &[11.0, 10.0]);
        assert!(r.trace.residuals.iter().all(|&x| x == 1.0));
    }

    #[test]
    fn first_halpern_step() {
        let op = OperatorHandle::new(2, "affine", None, |x: &[f64]| ValueVec::from(vec![x[0] + 3.0, -x[1]]));
        let x0 = [1.0, 2.0];
        let r = halpern(&op, &x0, 1, Schedule::AnchorTwo, &SolveOptions::default()).unwrap();
        assert!((r.output_value[0] - (2.0 / 3.0 + 4.0 / 3.0)).abs() < 1e-15);
        assert!((r.output_value[1] - (4.0 / 3.0 - 2.0 / 3.0)).abs() < 1e-15);
    }

    #[test]
    fn halpern_nonexpansive_rate() {
        // Rotation-like nonexpansive map in the sup-norm with fixed point 0.
        let op = OperatorHandle::new(2, "swap-neg", Some(1.0), |x: &[f64]| ValueVec::from(vec![-x[1], x[0]]));
        let x0 = [3.0, -1.0];
        let r = halpern(&op, &x0, 300, Schedule::AnchorTwo, &SolveOptions::default()).unwrap();
        for (t, &res) in r.trace.residuals.iter().enumerate() {
            assert!(res <= 4.0 / (t as f64 + 1.0) * 3.0 + 1e-12, "t={t}");
        }
    }

    #[test]
    fn full_retention_keeps_iterates() {
        let op = OperatorHandle::new(1, "half", Some(0.5), |x: &[f64]| ValueVec::from(vec![0.5 * x[0]]));
        let opts = SolveOptions { retention: Retention::Full, reference_gain: None };
        let r = picard(&op, &[8.0], 3, &opts).unwrap();
        let its: Vec<f64> = r.trace.iterates.unwrap().iter().map(|v| v[0]).collect();
        assert_eq!(its, vec![8.0, 4.0, 2.0, 1.0]);
    }

    #[test]
    fn dimension_checked() {
        let op = OperatorHandle::new(2, "id", None, |x: &[f64]| ValueVec::from(x.to_vec()));
        assert!(matches!(picard(&op, &[1.0], 1, &SolveOptions::default()), Err(Error::LengthMismatch { .. })));
    }
}
