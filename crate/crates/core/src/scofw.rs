//! Strongly convex online Frank-Wolfe over the surrogate losses, with exact
//! line search on the accumulated quadratic model.

use crate::error::{Error, Result};
use crate::geometry::FeasibleSet;
use crate::learner::{Algo, InvariantFailure, Learner, StepReport};
use crate::linalg::{axpy, dot, norm, norm_sq, step_toward, sub};
use crate::objectives::RoundFunctions;
use crate::surrogate::{CcvTracker, LyapunovFn, Surrogate, SurrogateParams};

#[derive(Debug, Clone)]
pub struct ScofwConfig {
    pub params: SurrogateParams,
    pub phi: LyapunovFn,
    pub strong_convexity: f64,
}

/// Accumulated model
/// `F_t(x) = sum_tau <grad f~_tau(x_tau), x> + C1 sum_tau ||x - x_tau||^2`.
#[derive(Debug, Clone)]
pub struct ScofwState {
    pub x: Vec<f64>,
    pub grad_sum: Vec<f64>,
    pub point_sum: Vec<f64>,
    point_sq_sum: f64,
    pub round: usize,
    /// `C1 = gamma beta alpha_f / 2`
    pub c1: f64,
}

impl ScofwState {
    pub fn new(x: Vec<f64>, c1: f64) -> Self {
        let d = x.len();
        Self {
            x,
            grad_sum: vec![0.0; d],
            point_sum: vec![0.0; d],
            point_sq_sum: 0.0,
            round: 0,
            c1,
        }
    }

    pub fn accumulate(&mut self, grad: &[f64], x_t: &[f64]) {
        axpy(1.0, grad, &mut self.grad_sum);
        axpy(1.0, x_t, &mut self.point_sum);
        self.point_sq_sum += norm_sq(x_t);
        self.round += 1;
    }

    /// `grad_sum + 2 C1 (t at - point_sum)`
    pub fn grad(&self, at: &[f64]) -> Vec<f64> {
        let t = self.round as f64;
        at.iter()
            .zip(&self.grad_sum)
            .zip(&self.point_sum)
            .map(|((a, g), p)| g + 2.0 * self.c1 * (t * a - p))
            .collect()
    }

    pub fn value(&self, at: &[f64]) -> f64 {
        let t = self.round as f64;
        dot(&self.grad_sum, at)
            + self.c1 * (t * norm_sq(at) - 2.0 * dot(at, &self.point_sum) + self.point_sq_sum)
    }

    /// Exact minimizer over `[0, 1]` of `sigma -> F_t(x + sigma (v - x))`.
    ///
    /// Returns `(sigma, fallback)`; `fallback` is set when the model has no
    /// curvature and the step `min(1, 2/sqrt(t))` was used instead.
    pub fn line_search_sigma(&self, x: &[f64], v: &[f64]) -> (f64, bool) {
        let d = sub(v, x);
        let dd = norm_sq(&d);
        if dd == 0.0 {
            return (0.0, false);
        }
        let slope = dot(&self.grad(x), &d);
        if slope >= 0.0 {
            return (0.0, false);
        }
        let curvature = 2.0 * self.c1 * self.round as f64 * dd;
        if curvature <= 0.0 {
            let t = self.round.max(1) as f64;
            return ((2.0 / t.sqrt()).min(1.0), true);
        }
        ((-slope / curvature).clamp(0.0, 1.0), false)
    }
}

#[derive(Debug, Clone)]
pub struct ScofwTvc {
    cfg: ScofwConfig,
    set: FeasibleSet,
    state: ScofwState,
    tracker: CcvTracker,
    checks: bool,
}

impl ScofwTvc {
    pub fn new(set: FeasibleSet, cfg: ScofwConfig) -> Result<Self> {
        if !(cfg.strong_convexity > 0.0) {
            return Err(Error::invalid(
                "scofw-tvc needs alpha_f > 0; use ofw-tvc for general convex losses",
            ));
        }
        let c1 = cfg.params.gamma * cfg.params.beta * cfg.strong_convexity / 2.0;
        Ok(Self {
            state: ScofwState::new(set.center(), c1),
            cfg,
            set,
            tracker: CcvTracker::new(),
            checks: false,
        })
    }

    pub fn state(&self) -> &ScofwState {
        &self.state
    }
}

impl Learner for ScofwTvc {
    fn algo(&self) -> Algo {
        Algo::ScofwTvc
    }

    fn params(&self) -> SurrogateParams {
        self.cfg.params
    }

    fn lyapunov(&self) -> LyapunovFn {
        self.cfg.phi
    }

    fn set_checks(&mut self, on: bool) {
        self.checks = on;
    }

    fn step(&mut self, round: &dyn RoundFunctions) -> Result<StepReport> {
        let x_t = self.state.x.clone();
        let f_value = round.loss_value(&x_t);
        let g_value = round.constraint_value(&x_t);
        let q = self.tracker.update(g_value);
        let surrogate = Surrogate::at(&self.cfg.params, &self.cfg.phi, q);
        let grad = surrogate.subgrad(
            &round.loss_subgrad(&x_t),
            g_value,
            &round.constraint_subgrad(&x_t),
        )?;

        let s = &mut self.state;
        s.accumulate(&grad, &x_t);
        let v = self.set.lmo(&s.grad(&x_t))?;
        let (sigma, fallback) = s.line_search_sigma(&x_t, &v);
        let before = if self.checks { s.value(&x_t) } else { 0.0 };
        step_toward(&mut s.x, &v, sigma);

        let mut failures = Vec::new();
        if self.checks {
            let after = s.value(&s.x);
            if after > before + 1e-9 * before.abs().max(1.0) {
                failures.push(InvariantFailure::new(
                    "line-search-descent",
                    s.round,
                    format!("F went from {before} to {after}"),
                ));
            }
            if !(0.0..=1.0).contains(&sigma) {
                failures.push(InvariantFailure::new(
                    "sigma-range",
                    s.round,
                    format!("sigma = {sigma}"),
                ));
            }
        }

        Ok(StepReport {
            played: x_t,
            f_value,
            g_value,
            q,
            surrogate,
            surrogate_value: surrogate.value(f_value, g_value),
            grad_norm: Some(norm(&grad)),
            sigma: Some(sigma),
            clamped: fallback,
            epoch: None,
            block: None,
            failures,
        })
    }
}
