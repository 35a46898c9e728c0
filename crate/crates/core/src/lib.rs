//! Value-iteration solvers for general (multichain) average-reward MDPs,
//! with exact Markov-chain analysis, ground-truth oracles, complexity
//! parameters, and numerical certification of the convergence bounds.
//!
//! Everything numeric is generic over [`Real`] (`f32` or `f64`); the
//! aliases below fix the scalar for the common cases. Oracles, generators,
//! certification, and the experiment runner work in `f64`.

pub mod bellman;
pub mod bench;
pub mod certify;
pub mod chain;
pub mod complexity;
pub mod error;
pub mod generators;
pub mod io;
pub mod linalg;
pub mod model;
pub mod oracle;
pub mod scalar;
pub mod solvers;
pub mod vector;

pub use bellman::DiscountFactor;
pub use certify::BoundCheck;
pub use error::{Error, Result};
pub use model::{Action, Mdp, Policy};
pub use scalar::Real;
pub use solvers::{Retention, Schedule, SolveOptions, SolveReport};
pub use vector::ValueVec;

pub type Mdp64 = Mdp<f64>;
pub type Mdp32 = Mdp<f32>;
pub type Policy64 = Policy<f64>;
pub type Policy32 = Policy<f32>;
pub type ValueVec64 = ValueVec<f64>;
pub type ValueVec32 = ValueVec<f32>;
pub type SolveReport64 = SolveReport<f64>;
pub type SolveReport32 = SolveReport<f32>;
pub type GroundTruth64 = oracle::GroundTruth<f64>;
