//! Iteration schemes: Picard, Halpern, and the average-reward and
//! discounted solvers built from them.
//!
//! Every solver returns a [`SolveReport`] whose trace holds one residual per
//! iterate, so a run of `n` steps records `n + 1` residuals.

mod average;
mod discounted;
mod fixed_point;
mod operator;

use std::collections::BTreeMap;
use std::time::Instant;

use serde::{Deserialize, Serialize};

pub use average::{approx_shifted_halpern, policy_eval_halpern, value_iteration};
pub use discounted::{baseline_gamma, dmdp_baseline, halpern_then_picard, solve_multichain, warm_start_htp};
pub use fixed_point::{halpern, picard, HalpernRun};
pub use operator::{BellmanEvaluation, BellmanOptimality, Operator, OperatorHandle, Shifted, SPOT_CHECK_PAIRS};

use crate::certify::BoundCheck;
use crate::model::Policy;
use crate::scalar::Real;
use crate::vector::ValueVec;

/// The two Halpern step-size schedules.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Schedule {
    /// `β_t = 1 − 2/(t+2)`.
    AnchorTwo,
    /// `β_t = 1 − 1/(t+1)`.
    AnchorOne,
}

impl Schedule {
    /// `β_t` for `t ≥ 1`.
    pub fn beta<T: Real>(self, t: usize) -> T {
        let t = T::from_count(t);
        match self {
            Schedule::AnchorTwo => t / (t + T::lit(2.0)),
            Schedule::AnchorOne => t / (t + T::one()),
        }
    }

    /// Coupling coefficient `Λ_t`: Halpern on `L` and on `L − ρ` from the
    /// same anchor differ by `Λ_t ρ` when `L` commutes with shifts along
    /// `ρ`. `Λ_0 = 0`, `Λ_{t+1} = β_{t+1}(1 + Λ_t)`.
    pub fn lambda<T: Real>(self, t: usize) -> T {
        (1..=t).fold(T::zero(), |l, s| self.beta::<T>(s) * (T::one() + l))
    }

    pub fn describe(self) -> &'static str {
        match self {
            Schedule::AnchorTwo => "halpern beta_t = 1 - 2/(t+2)",
            Schedule::AnchorOne => "halpern beta_t = 1 - 1/(t+1)",
        }
    }
}

/// What a trace keeps.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Retention {
    /// Only the final residual.
    None,
    /// Every residual.
    #[default]
    Residuals,
    /// Every residual and every iterate.
    Full,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct SolveOptions<T> {
    pub retention: Retention,
    /// Gain used in average-reward residuals `‖T(x) − x − ρ‖`; solvers fall
    /// back to their own estimate when absent.
    pub reference_gain: Option<ValueVec<T>>,
}

impl<T: Real> SolveOptions<T> {
    pub fn full() -> Self {
        Self { retention: Retention::Full, reference_gain: None }
    }

    pub fn with_reference_gain(mut self, rho: ValueVec<T>) -> Self {
        self.reference_gain = Some(rho);
        self
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct IterTrace<T> {
    pub retention: Retention,
    /// One entry per iterate (`n + 1` for `n` steps) unless retention is
    /// [`Retention::None`], which keeps only the last.
    pub residuals: Vec<T>,
    pub iterates: Option<Vec<ValueVec<T>>>,
    pub gain_estimate: Option<ValueVec<T>>,
    /// Seconds.
    pub wallclock: f64,
    pub schedule: String,
}

impl<T: Real> IterTrace<T> {
    pub fn final_residual(&self) -> T {
        *self.residuals.last().expect("traces hold at least one residual")
    }

    pub fn min_residual(&self) -> T {
        self.residuals.iter().copied().fold(T::infinity(), T::min)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SolveReport<T> {
    pub algorithm: String,
    pub output_value: ValueVec<T>,
    pub output_policy: Option<Policy<T>>,
    pub trace: IterTrace<T>,
    pub certified: Option<Vec<BoundCheck>>,
    pub metadata: BTreeMap<String, serde_json::Value>,
}

impl<T: Real> SolveReport<T> {
    fn meta(mut self, key: &str, value: impl Into<serde_json::Value>) -> Self {
        self.metadata.insert(key.into(), value.into());
        self
    }
}

/// Accumulates residuals and iterates according to the retention policy.
struct Recorder<T> {
    retention: Retention,
    residuals: Vec<T>,
    iterates: Vec<ValueVec<T>>,
    start: Instant,
}

impl<T: Real> Recorder<T> {
    fn new(retention: Retention, steps: usize) -> Self {
        let cap = if retention == Retention::None { 1 } else { steps + 1 };
        Self {
            retention,
            residuals: Vec::with_capacity(cap),
            iterates: Vec::with_capacity(if retention == Retention::Full { cap } else { 0 }),
            start: Instant::now(),
        }
    }

    fn push(&mut self, residual: T, iterate: &[T]) {
        match self.retention {
            Retention::None => {
                self.residuals.clear();
                self.residuals.push(residual);
            }
            Retention::Residuals => self.residuals.push(residual),
            Retention::Full => {
                self.residuals.push(residual);
                self.iterates.push(ValueVec::from(iterate.to_vec()));
            }
        }
    }

    fn finish(self, schedule: impl Into<String>, gain_estimate: Option<ValueVec<T>>) -> IterTrace<T> {
        IterTrace {
            retention: self.retention,
            residuals: self.residuals,
            iterates: (self.retention == Retention::Full).then_some(self.iterates),
            gain_estimate,
            wallclock: self.start.elapsed().as_secs_f64(),
            schedule: schedule.into(),
        }
    }
}

fn report<T: Real>(
    algorithm: &str,
    output_value: ValueVec<T>,
    output_policy: Option<Policy<T>>,
    trace: IterTrace<T>,
) -> SolveReport<T> {
    SolveReport {
        algorithm: algorithm.into(),
        output_value,
        output_policy,
        trace,
        certified: None,
        metadata: BTreeMap::new(),
    }
}
