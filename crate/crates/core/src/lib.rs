//! Projection-free online convex optimization with time-varying constraints.
//!
//! Four learners share one surrogate-loss reduction: each round's loss and
//! constraint violation are folded into `gamma beta f_t + beta Phi'(beta Q_t) g_t^+`,
//! which is then handed to an online Frank-Wolfe variant. Full-information
//! learners see subgradients; bandit learners see one function value per round.

// `!(x > 0.0)` is the validation idiom throughout: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bandit;
pub mod bfw;
pub mod config;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod learner;
pub mod linalg;
pub mod objectives;
pub mod ofw;
pub mod params;
pub mod scbfw;
pub mod scofw;
pub mod surrogate;

pub use config::{ExperimentConfig, PartialConfig, ProblemKind};
pub use error::{Error, Result};
pub use geometry::{FeasibleSet, SetKind, ShrunkSet};
pub use harness::{
    fit_slope, run_experiment, solve_comparator, ExperimentOutcome, SlopeFit, Summary,
};
pub use learner::{Algo, InvariantFailure, Learner, StepReport};
pub use objectives::{OffsetMode, ProblemMeta, ProblemStream, Round, RoundFunctions};
pub use params::{build_learner, resolve, Overrides, Resolved, ScVariant};
pub use surrogate::{CcvTracker, LyapunovFn, Surrogate, SurrogateParams};
