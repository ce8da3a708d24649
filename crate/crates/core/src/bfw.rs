//! Blocked bandit Frank-Wolfe over the surrogate losses for general convex
//! losses, with a doubling estimate checked at block ends.

use crate::bandit::{make_blocks, one_point_grad, play_point, BlockSchedule, SphereSampler};
use crate::error::{Error, Result};
use crate::geometry::{FeasibleSet, ShrunkSet};
use crate::learner::{Algo, EpochInfo, InvariantFailure, Learner, StepReport};
use crate::linalg::{axpy, dot, norm_sq, step_toward, sub};
use crate::objectives::RoundFunctions;
use crate::surrogate::{gradient_bound, CcvTracker, LyapunovFn, Surrogate, SurrogateParams};

/// Hard cap on inner Frank-Wolfe iterations per block.
pub const INNER_ITER_CAP: usize = 1_000_000;

/// `<grad, y - v>`
pub fn fw_gap(grad: &[f64], y: &[f64], v: &[f64]) -> f64 {
    grad.iter()
        .zip(y)
        .zip(v)
        .map(|((g, a), b)| g * (a - b))
        .sum()
}

/// Exact step on `sigma -> F(y + sigma d)` when `F` has Hessian `2 curvature I`:
/// `clamp(-<grad, d> / (2 curvature ||d||^2), 0, 1)`.
pub fn quadratic_line_search(grad: &[f64], d: &[f64], curvature: f64) -> f64 {
    let dd = norm_sq(d);
    if dd == 0.0 || curvature <= 0.0 {
        return 0.0;
    }
    (-dot(grad, d) / (2.0 * curvature * dd)).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct InnerSolve {
    pub y: Vec<f64>,
    pub iterations: usize,
    pub gap: f64,
}

/// Frank-Wolfe on `F(y) = eta <grad_sum, y> + ||y - anchor||^2` over the shrunk
/// set, started at `start` and stopped at the first iterate whose gap is at
/// most `epsilon`.
pub fn solve_block_model(
    shrunk: &ShrunkSet,
    grad_sum: &[f64],
    eta: f64,
    anchor: &[f64],
    start: &[f64],
    epsilon: f64,
) -> Result<InnerSolve> {
    let mut y = start.to_vec();
    let mut iterations = 0;
    loop {
        let grad: Vec<f64> = grad_sum
            .iter()
            .zip(&y)
            .zip(anchor)
            .map(|((g, yi), ai)| eta * g + 2.0 * (yi - ai))
            .collect();
        let v = shrunk.lmo(&grad)?;
        let gap = fw_gap(&grad, &y, &v);
        if gap <= epsilon {
            return Ok(InnerSolve { y, iterations, gap });
        }
        if iterations >= INNER_ITER_CAP {
            return Err(Error::Runtime(format!(
                "inner Frank-Wolfe loop hit {INNER_ITER_CAP} iterations with gap {gap} > epsilon {epsilon}; epsilon is too small for this problem scale"
            )));
        }
        let d = sub(&v, &y);
        let sigma = quadratic_line_search(&grad, &d, 1.0);
        step_toward(&mut y, &v, sigma);
        iterations += 1;
    }
}

#[derive(Debug, Clone)]
pub struct BfwConfig {
    pub params: SurrogateParams,
    pub phi: LyapunovFn,
    pub lipschitz: f64,
    /// Bound `M` on `|f_t|`.
    pub value_bound: f64,
    pub horizon: usize,
    /// Scale `c` in the learning rate.
    pub c: f64,
    pub delta: f64,
    pub block_size: usize,
    pub epsilon: f64,
    pub seed: u64,
}

#[derive(Debug, Clone)]
pub struct BfwState {
    pub y_hat: Vec<f64>,
    /// Current block, 1-based.
    pub block: usize,
    pub epoch: usize,
    pub g_tilde: f64,
    pub epoch_start_block: usize,
    pub eta: f64,
    pub block_buffer: Vec<f64>,
    pub block_terms: usize,
    pub grad_sum: Vec<f64>,
    pub anchor: Vec<f64>,
    pub block_qs: Vec<f64>,
    pub round: usize,
    pub last_inner: Option<InnerSolve>,
}

#[derive(Debug, Clone)]
pub struct BfwTvc {
    cfg: BfwConfig,
    set: FeasibleSet,
    shrunk: ShrunkSet,
    schedule: BlockSchedule,
    sampler: SphereSampler,
    tracker: CcvTracker,
    state: BfwState,
    checks: bool,
}

impl BfwTvc {
    pub fn new(set: FeasibleSet, cfg: BfwConfig) -> Result<Self> {
        if !(cfg.c > 0.0) || !(cfg.epsilon > 0.0) || !(cfg.value_bound > 0.0) {
            return Err(Error::invalid("bfw-tvc needs c > 0, epsilon > 0 and M > 0"));
        }
        let shrunk = ShrunkSet::new(set.clone(), cfg.delta)?;
        let schedule = make_blocks(cfg.horizon, cfg.block_size)?;
        let sampler = SphereSampler::new(cfg.seed, set.dimension())?;
        let y = set.center();
        let d = y.len();
        let mut learner = Self {
            state: BfwState {
                anchor: y.clone(),
                y_hat: y,
                block: 1,
                epoch: 1,
                g_tilde: 1.0,
                epoch_start_block: 1,
                eta: 0.0,
                block_buffer: vec![0.0; d],
                block_terms: 0,
                grad_sum: vec![0.0; d],
                block_qs: Vec::new(),
                round: 0,
                last_inner: None,
            },
            cfg,
            set,
            shrunk,
            schedule,
            sampler,
            tracker: CcvTracker::new(),
            checks: false,
        };
        learner.state.eta = learner.learning_rate();
        Ok(learner)
    }

    pub fn state(&self) -> &BfwState {
        &self.state
    }

    pub fn schedule(&self) -> &BlockSchedule {
        &self.schedule
    }

    pub fn shrunk(&self) -> &ShrunkSet {
        &self.shrunk
    }

    /// `c D / (d M G~ T^{3/4})`
    pub fn learning_rate(&self) -> f64 {
        let d = self.set.dimension() as f64;
        self.cfg.c * self.set.diameter()
            / (d * self.cfg.value_bound * self.state.g_tilde * (self.cfg.horizon as f64).powf(0.75))
    }

    fn block_bound(&self) -> f64 {
        self.state
            .block_qs
            .iter()
            .map(|&q| gradient_bound(&self.cfg.params, &self.cfg.phi, self.cfg.lipschitz, q))
            .fold(0.0, f64::max)
    }

    fn block_end(&mut self, failures: &mut Vec<InvariantFailure>) -> Result<()> {
        let bound = self.block_bound();
        let mut doubled = false;
        while self.state.g_tilde < bound {
            self.state.g_tilde *= 2.0;
            self.state.epoch += 1;
            doubled = true;
        }
        if doubled {
            let s = &mut self.state;
            s.epoch_start_block = s.block;
            s.grad_sum.iter_mut().for_each(|g| *g = 0.0);
            s.anchor.clone_from(&s.y_hat);
        }
        self.state.eta = self.learning_rate();

        if self.checks {
            let s = &self.state;
            if s.g_tilde < bound {
                failures.push(InvariantFailure::new(
                    "doubling-postcondition",
                    s.round,
                    format!("G~ = {} < block bound {bound}", s.g_tilde),
                ));
            }
            if s.g_tilde != 2f64.powi(s.epoch as i32 - 1) {
                failures.push(InvariantFailure::new(
                    "doubling-power-of-two",
                    s.round,
                    format!("G~ = {} at epoch {}", s.g_tilde, s.epoch),
                ));
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
        }

        let s = &mut self.state;
        axpy(1.0, &s.block_buffer, &mut s.grad_sum);
        s.block_buffer.iter_mut().for_each(|g| *g = 0.0);
        let inner = solve_block_model(
            &self.shrunk,
            &s.grad_sum,
            s.eta,
            &s.anchor,
            &s.y_hat,
            self.cfg.epsilon,
        )?;
        s.y_hat.clone_from(&inner.y);

        if self.checks && !self.shrunk.contains(&s.y_hat, 1e-9)? {
            failures.push(InvariantFailure::new(
                "auxiliary-feasibility",
                s.round,
                "y_hat left the shrunk set",
            ));
        }

        s.last_inner = Some(inner);
        s.block += 1;
        s.block_terms = 0;
        s.block_qs.clear();
        Ok(())
    }
}

impl Learner for BfwTvc {
    fn algo(&self) -> Algo {
        Algo::BfwTvc
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
                "bfw-tvc configured for {} rounds",
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
        s.block_qs.push(q);
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
            epoch: Some(EpochInfo {
                epoch: self.state.epoch,
                g_tilde: self.state.g_tilde,
            }),
            block: Some(block),
            failures,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::{Constraint, Loss, Round};

    #[test]
    fn fw_gap_examples() {
        assert_eq!(fw_gap(&[1.0, 2.0], &[0.3, 0.4], &[0.3, 0.4]), 0.0);
        let ball = FeasibleSet::l2_ball(2, 1.0).unwrap();
        let v = ball.lmo(&[1.0, 0.0]).unwrap();
        assert_eq!(v, vec![-1.0, 0.0]);
        assert_eq!(fw_gap(&[1.0, 0.0], &[0.0, 0.0], &v), 1.0);
    }

    #[test]
    fn model_already_at_minimizer_needs_no_steps() {
        let shrunk = ShrunkSet::new(FeasibleSet::l2_ball(2, 1.0).unwrap(), 0.1).unwrap();
        let anchor = [0.2, -0.1];
        let out = solve_block_model(&shrunk, &[0.0, 0.0], 0.5, &anchor, &anchor, 1e-3).unwrap();
        assert_eq!(out.iterations, 0);
        assert_eq!(out.y, anchor.to_vec());
        assert_eq!(out.gap, 0.0);
    }

    #[test]
    fn inner_solve_certifies_its_gap() {
        let shrunk = ShrunkSet::new(FeasibleSet::l2_ball(3, 1.0).unwrap(), 0.2).unwrap();
        let out =
            solve_block_model(&shrunk, &[3.0, -1.0, 2.0], 0.7, &[0.0; 3], &[0.0; 3], 1e-4).unwrap();
        let grad: Vec<f64> = [3.0, -1.0, 2.0]
            .iter()
            .zip(&out.y)
            .map(|(g, y)| 0.7 * g + 2.0 * y)
            .collect();
        let v = shrunk.lmo(&grad).unwrap();
        assert!(fw_gap(&grad, &out.y, &v) <= 1e-4);
        assert!(shrunk.contains(&out.y, 1e-9).unwrap());
    }

    fn learner(seed: u64, horizon: usize, k: usize) -> BfwTvc {
        let cfg = BfwConfig {
            params: SurrogateParams::new(0.2, 1.0).unwrap(),
            phi: LyapunovFn::Exp { lambda: 0.5 },
            lipschitz: 1.0,
            value_bound: 1.0,
            horizon,
            c: 0.5,
            delta: 0.1,
            block_size: k,
            epsilon: 1e-3,
            seed,
        };
        BfwTvc::new(FeasibleSet::l2_ball(2, 1.0).unwrap(), cfg).unwrap()
    }

    #[test]
    fn single_estimate_lands_in_the_buffer() {
        let mut l = learner(5, 10, 5);
        // f = 0 and inactive constraint: surrogate value 0, so the buffer stays zero
        let r = Round {
            loss: Loss::Linear { c: vec![0.0, 0.0] },
            constraint: Constraint::Affine {
                p: vec![0.0, 0.0],
                b: 1.0,
            },
        };
        l.step(&r).unwrap();
        assert_eq!(l.state().block_buffer, vec![0.0, 0.0]);
        assert_eq!(l.state().block_terms, 1);
    }

    #[test]
    fn plays_are_feasible_and_deterministic() {
        let r = Round {
            loss: Loss::Linear { c: vec![0.6, -0.8] },
            constraint: Constraint::Affine {
                p: vec![1.0, 0.0],
                b: 0.0,
            },
        };
        let set = FeasibleSet::l2_ball(2, 1.0).unwrap();
        let mut a = learner(9, 300, 17);
        let mut b = learner(9, 300, 17);
        a.set_checks(true);
        for _ in 0..300 {
            let ra = a.step(&r).unwrap();
            let rb = b.step(&r).unwrap();
            assert_eq!(ra.played, rb.played);
            assert!(set.contains(&ra.played, 1e-9).unwrap());
            assert!(ra.failures.is_empty(), "{:?}", ra.failures);
        }
        assert_eq!(a.state().block, 300usize.div_ceil(17) + 1);
        assert!(a.step(&r).is_err());
    }
}
