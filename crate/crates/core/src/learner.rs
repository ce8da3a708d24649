//! The interface shared by all four learners and the per-round report the
//! harness consumes.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objectives::RoundFunctions;
use crate::surrogate::{LyapunovFn, Surrogate, SurrogateParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Algo {
    #[serde(rename = "ofw-tvc")]
    OfwTvc,
    #[serde(rename = "scofw-tvc")]
    ScofwTvc,
    #[serde(rename = "bfw-tvc")]
    BfwTvc,
    #[serde(rename = "scbfw-tvc")]
    ScbfwTvc,
}

impl Algo {
    pub const ALL: [Algo; 4] = [Algo::OfwTvc, Algo::ScofwTvc, Algo::BfwTvc, Algo::ScbfwTvc];

    pub fn name(self) -> &'static str {
        match self {
            Algo::OfwTvc => "ofw-tvc",
            Algo::ScofwTvc => "scofw-tvc",
            Algo::BfwTvc => "bfw-tvc",
            Algo::ScbfwTvc => "scbfw-tvc",
        }
    }

    pub fn is_bandit(self) -> bool {
        matches!(self, Algo::BfwTvc | Algo::ScbfwTvc)
    }

    pub fn is_strongly_convex(self) -> bool {
        matches!(self, Algo::ScofwTvc | Algo::ScbfwTvc)
    }
}

impl fmt::Display for Algo {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algo {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Algo::ALL
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| {
                Error::invalid(format!(
                    "unknown algorithm '{s}' (ofw-tvc | scofw-tvc | bfw-tvc | scbfw-tvc)"
                ))
            })
    }
}

/// A broken runtime invariant, reported by a learner or the harness.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvariantFailure {
    pub invariant: String,
    pub round: usize,
    pub detail: String,
}

impl InvariantFailure {
    pub fn new(invariant: &str, round: usize, detail: impl Into<String>) -> Self {
        Self {
            invariant: invariant.to_string(),
            round,
            detail: detail.into(),
        }
    }
}

/// Doubling bookkeeping after a round (or block end).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochInfo {
    pub epoch: usize,
    pub g_tilde: f64,
}

#[derive(Debug, Clone)]
pub struct StepReport {
    /// The decision played this round.
    pub played: Vec<f64>,
    pub f_value: f64,
    pub g_value: f64,
    /// `Q_t` after this round's update.
    pub q: f64,
    /// Surrogate coefficients built from `Q_t`.
    pub surrogate: Surrogate,
    /// `f~_t(x_t)`
    pub surrogate_value: f64,
    /// `||grad f~_t(x_t)||`, full-information learners only.
    pub grad_norm: Option<f64>,
    pub sigma: Option<f64>,
    pub clamped: bool,
    pub epoch: Option<EpochInfo>,
    /// Block index of the played decision (bandit learners).
    pub block: Option<usize>,
    pub failures: Vec<InvariantFailure>,
}

pub trait Learner: Send {
    fn algo(&self) -> Algo;
    fn params(&self) -> SurrogateParams;
    fn lyapunov(&self) -> LyapunovFn;
    /// Plays one round against `round` and updates the internal state.
    fn step(&mut self, round: &dyn RoundFunctions) -> Result<StepReport>;
    /// Enables learner-internal invariant checks reported in [`StepReport::failures`].
    fn set_checks(&mut self, on: bool);
}
