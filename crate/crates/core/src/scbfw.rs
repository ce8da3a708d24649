//! Blocked bandit Frank-Wolfe for strongly convex losses: a fixed number of
//! line-searched inner steps on the accumulated quadratic model per block.

use crate::bandit::{make_blocks, one_point_grad, play_point, BlockSchedule, SphereSampler};
use crate::bfw::quadratic_line_search;
use crate::error::{Error, Result};
use crate::geometry::{FeasibleSet, ShrunkSet};
use crate::learner::{Algo, InvariantFailure, Learner, StepReport};
use crate::linalg::{axpy, dot, norm_sq, step_toward, sub};
use crate::objectives::RoundFunctions;
use crate::surrogate::{CcvTracker, LyapunovFn, Surrogate, SurrogateParams};

#[derive(Debug, Clone)]
pub struct ScbfwConfig {
    pub params: SurrogateParams,
    pub phi: LyapunovFn,
    pub strong_convexity: f64,
    pub horizon: usize,
    pub delta: f64,
    pub block_size: usize,
    pub inner_iters: usize,
    pub seed: u64,
}

/// `F(y) = <grad_sum, y> + c3 ||y||^2`
pub fn sc_model_value(grad_sum: &[f64], c3: f64, y: &[f64]) -> f64 {
    dot(grad_sum, y) + c3 * norm_sq(y)
}

/// Runs exactly `iters` line-searched Frank-Wolfe steps on the model from `start`.
/// Returns the final point and the model value after each step.
pub fn solve_sc_model(
    shrunk: &ShrunkSet,
    grad_sum: &[f64],
    c3: f64,
    start: &[f64],
    iters: usize,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut y = start.to_vec();
    let mut trail = Vec::with_capacity(iters + 1);
    trail.push(sc_model_value(grad_sum, c3, &y));
    for _ in 0..iters {
        let grad: Vec<f64> = grad_sum
            .iter()
            .zip(&y)
            .map(|(g, yi)| g + 2.0 * c3 * yi)
            .collect();
        let v = shrunk.lmo(&grad)?;
        let sigma = quadratic_line_search(&grad, &sub(&v, &y), c3);
        step_toward(&mut y, &v, sigma);
        trail.push(sc_model_value(grad_sum, c3, &y));
    }
    Ok((y, trail))
}

#[derive(Debug, Clone)]
pub struct ScbfwState {
    pub y_hat: Vec<f64>,
    pub block: usize,
    pub grad_sum: Vec<f64>,
    pub block_buffer: Vec<f64>,
    pub block_terms: usize,
    pub round: usize,
    /// `gamma beta alpha_f / 2`; the model coefficient is this times the round count.
    pub c3_coeff: f64,
}

#[derive(Debug, Clone)]
pub struct ScbfwTvc {
    cfg: ScbfwConfig,
    set: FeasibleSet,
    shrunk: ShrunkSet,
    schedule: BlockSchedule,
    sampler: SphereSampler,
    tracker: CcvTracker,
    state: ScbfwState,
    checks: bool,
}

impl ScbfwTvc {
    pub fn new(set: FeasibleSet, cfg: ScbfwConfig) -> Result<Self> {
        if !(cfg.strong_convexity > 0.0) {
            return Err(Error::invalid(
                "scbfw-tvc needs alpha_f > 0; use bfw-tvc for general convex losses",
            ));
        }
        let shrunk = ShrunkSet::new(set.clone(), cfg.delta)?;
        let schedule = make_blocks(cfg.horizon, cfg.block_size)?;
        let sampler = SphereSampler::new(cfg.seed, set.dimension())?;
        let d = set.dimension();
        let state = ScbfwState {
            y_hat: set.center(),
            block: 1,
            grad_sum: vec![0.0; d],
            block_buffer: vec![0.0; d],
            block_terms: 0,
            round: 0,
            c3_coeff: cfg.params.gamma * cfg.params.beta * cfg.strong_convexity / 2.0,
        };
        Ok(Self {
            cfg,
            set,
            shrunk,
            schedule,
            sampler,
            tracker: CcvTracker::new(),
            state,
            checks: false,
        })
    }

    pub fn state(&self) -> &ScbfwState {
        &self.state
    }

    pub fn schedule(&self) -> &BlockSchedule {
        &self.schedule
    }

    fn block_end(&mut self, failures: &mut Vec<InvariantFailure>) -> Result<()> {
        let s = &mut self.state;
        axpy(1.0, &s.block_buffer, &mut s.grad_sum);
        s.block_buffer.iter_mut().for_each(|g| *g = 0.0);
        let c3 = s.c3_coeff * s.round as f64;
        let (y, trail) = solve_sc_model(
            &self.shrunk,
            &s.grad_sum,
            c3,
            &s.y_hat,
            self.cfg.inner_iters,
        )?;

        if self.checks {
            for w in trail.windows(2) {
                if w[1] > w[0] + 1e-9 * w[0].abs().max(1.0) {
                    failures.push(InvariantFailure::new(
                        "line-search-descent",
                        s.round,
                        format!("model value rose from {} to {}", w[0], w[1]),
                    ));
                    break;
                }
            }
            let (start, end) = self.schedule.blocks[s.block - 1];
            if s.block_terms != end - start + 1 {
                failures.push(InvariantFailure::new(
                    "block-accounting",
                    s.round,
                    format!(
                        "{} estimator terms for block of length {}",
                        s.block_terms,
                        end - start + 1
                    ),
                ));
            }
            if !self.shrunk.contains(&y, 1e-9)? {
                failures.push(InvariantFailure::new(
                    "auxiliary-feasibility",
                    s.round,
                    "y_hat left the shrunk set",
                ));
            }
        }

        s.y_hat = y;
        s.block += 1;
        s.block_terms = 0;
        Ok(())
    }
}

impl Learner for ScbfwTvc {
    fn algo(&self) -> Algo {
        Algo::ScbfwTvc
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
        if self.state.round >= self.cfg.horizon {
            return Err(Error::Runtime(format!(
                "scbfw-tvc configured for {} rounds",
                self.cfg.horizon
            )));
        }
        let u = self.sampler.sample();
        let x_t = play_point(&self.state.y_hat, self.cfg.delta, &u);
        let f_value = round.loss_value(&x_t);
        let g_value = round.constraint_value(&x_t);
        let q = self.tracker.update(g_value);
        let surrogate = Surrogate::at(&self.cfg.params, &self.cfg.phi, q);
        let surrogate_value = surrogate.value(f_value, g_value);
        let est = one_point_grad(surrogate_value, &u, self.set.dimension(), self.cfg.delta)?;

        let block = self.state.block;
        let s = &mut self.state;
        axpy(1.0, &est, &mut s.block_buffer);
        s.block_terms += 1;
        s.round += 1;

        let mut failures = Vec::new();
        if self.schedule.is_block_end(self.state.round) {
            self.block_end(&mut failures)?;
        }

        Ok(StepReport {
            played: x_t,
            f_value,
            g_value,
            q,
            surrogate,
            surrogate_value,
            grad_norm: None,
            sigma: None,
            clamped: false,
            epoch: None,
            block: Some(block),
            failures,
        })
    }
}
