//! Parameter-free online Frank-Wolfe over the surrogate losses, with a
//! doubling estimate of the unknown surrogate gradient bound.

use crate::error::{Error, Result};
use crate::geometry::FeasibleSet;
use crate::learner::{Algo, EpochInfo, InvariantFailure, Learner, StepReport};
use crate::linalg::{axpy, norm, step_toward};
use crate::objectives::RoundFunctions;
use crate::surrogate::{gradient_bound, CcvTracker, LyapunovFn, Surrogate, SurrogateParams};

/// `D / (2 G~ T^{3/4})`
pub fn learning_rate(diameter: f64, g_tilde: f64, horizon: usize) -> f64 {
    diameter / (2.0 * g_tilde * (horizon as f64).powf(0.75))
}

/// `2 j^{-1/2}` clamped to `[0, 1]`; the flag reports whether the clamp was active.
pub fn step_size(j: usize) -> (f64, bool) {
    assert!(j >= 1, "step index starts at 1");
    let raw = 2.0 / (j as f64).sqrt();
    if raw > 1.0 {
        (1.0, true)
    } else {
        (raw, false)
    }
}

#[derive(Debug, Clone)]
pub struct OfwConfig {
    pub params: SurrogateParams,
    pub phi: LyapunovFn,
    pub lipschitz: f64,
    pub horizon: usize,
}

#[derive(Debug, Clone)]
pub struct OfwState {
    pub x: Vec<f64>,
    pub epoch: usize,
    pub g_tilde: f64,
    /// First round of the current epoch (1-based).
    pub epoch_start: usize,
    pub eta: f64,
    /// Sum of surrogate subgradients since `epoch_start`.
    pub grad_sum: Vec<f64>,
    pub anchor: Vec<f64>,
    /// Rounds played so far.
    pub round: usize,
    /// Terms accumulated into `grad_sum` in this epoch.
    pub epoch_terms: usize,
}

#[derive(Debug, Clone)]
pub struct OfwTvc {
    cfg: OfwConfig,
    set: FeasibleSet,
    state: OfwState,
    tracker: CcvTracker,
    checks: bool,
}

impl OfwTvc {
    pub fn new(set: FeasibleSet, cfg: OfwConfig) -> Result<Self> {
        if cfg.horizon == 0 || !(cfg.lipschitz > 0.0) {
            return Err(Error::invalid(
                "ofw-tvc needs a positive horizon and Lipschitz constant",
            ));
        }
        let x = set.center();
        let state = OfwState {
            epoch: 1,
            g_tilde: 1.0,
            epoch_start: 1,
            eta: learning_rate(set.diameter(), 1.0, cfg.horizon),
            grad_sum: vec![0.0; x.len()],
            anchor: x.clone(),
            x,
            round: 0,
            epoch_terms: 0,
        };
        Ok(Self {
            cfg,
            set,
            state,
            tracker: CcvTracker::new(),
            checks: false,
        })
    }

    pub fn state(&self) -> &OfwState {
        &self.state
    }

    pub fn tracker(&self) -> &CcvTracker {
        &self.tracker
    }

    /// Doubles `G~` until it covers `beta G (gamma + Phi'(beta q_t))`; on any
    /// change the epoch restarts at the current round. Returns the number of doublings.
    pub fn doubling_update(&mut self, q_t: f64) -> usize {
        let target = gradient_bound(&self.cfg.params, &self.cfg.phi, self.cfg.lipschitz, q_t);
        let s = &mut self.state;
        let mut doublings = 0;
        while s.g_tilde < target {
            s.g_tilde *= 2.0;
            s.epoch += 1;
            doublings += 1;
        }
        if doublings > 0 {
            s.epoch_start = s.round;
            s.eta = learning_rate(self.set.diameter(), s.g_tilde, self.cfg.horizon);
            s.grad_sum.iter_mut().for_each(|g| *g = 0.0);
            s.anchor.clone_from(&s.x);
            s.epoch_terms = 0;
        }
        doublings
    }
}

impl Learner for OfwTvc {
    fn algo(&self) -> Algo {
        Algo::OfwTvc
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

        self.state.round += 1;
        let t = self.state.round;
        self.doubling_update(q);

        let mut failures = Vec::new();
        let s = &mut self.state;
        axpy(1.0, &grad, &mut s.grad_sum);
        s.epoch_terms += 1;

        // grad F_{s_k:t}(x_t) = eta sum grad + 2 (x_t - anchor)
        let mut grad_f: Vec<f64> = s.grad_sum.iter().map(|g| s.eta * g).collect();
        for ((gf, xi), ai) in grad_f.iter_mut().zip(&s.x).zip(&s.anchor) {
            *gf += 2.0 * (xi - ai);
        }
        let v = self.set.lmo(&grad_f)?;
        let j = t - s.epoch_start + 1;
        let (sigma, clamped) = step_size(j);
        step_toward(&mut s.x, &v, sigma);

        if self.checks {
            let target = gradient_bound(&self.cfg.params, &self.cfg.phi, self.cfg.lipschitz, q);
            if s.g_tilde < target {
                failures.push(InvariantFailure::new(
                    "doubling-postcondition",
                    t,
                    format!("G~ = {} < bound {target}", s.g_tilde),
                ));
            }
            if s.g_tilde != 2f64.powi(s.epoch as i32 - 1) {
                failures.push(InvariantFailure::new(
                    "doubling-power-of-two",
                    t,
                    format!("G~ = {} at epoch {}", s.g_tilde, s.epoch),
                ));
            }
            if s.epoch_terms != j {
                failures.push(InvariantFailure::new(
                    "epoch-accounting",
                    t,
                    format!("{} gradient terms for {} rounds in epoch", s.epoch_terms, j),
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
            clamped,
            epoch: Some(EpochInfo {
                epoch: s.epoch,
                g_tilde: s.g_tilde,
            }),
            block: None,
            failures,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::objectives::{Constraint, Loss, Round};

    fn cfg(beta: f64, horizon: usize) -> OfwConfig {
        OfwConfig {
            params: SurrogateParams::new(beta, 1.0).unwrap(),
            phi: LyapunovFn::QuadLinear,
            lipschitz: 1.0,
            horizon,
        }
    }

    fn linear_round(c: Vec<f64>, p: Vec<f64>, b: f64) -> Round {
        Round {
            loss: Loss::Linear { c },
            constraint: Constraint::Affine { p, b },
        }
    }

    #[test]
    fn learning_rate_examples() {
        assert_eq!(learning_rate(2.0, 4.0, 256), 0.00390625);
        assert_eq!(learning_rate(1.0, 1.0, 1), 0.5);
        assert_eq!(
            learning_rate(3.0, 8.0, 100),
            learning_rate(3.0, 4.0, 100) / 2.0
        );
    }

    #[test]
    fn step_size_examples() {
        assert_eq!(step_size(4), (1.0, false));
        assert_eq!(step_size(16), (0.5, false));
        assert_eq!(step_size(1), (1.0, true));
        assert!(step_size(3).1);
    }

    fn learner_with_target_scale(beta: f64) -> OfwTvc {
        // QuadLinear at q = 0: target = beta * G * (gamma + 1) = 2 beta
        OfwTvc::new(FeasibleSet::l2_ball(2, 1.0).unwrap(), cfg(beta, 100)).unwrap()
    }

    #[test]
    fn doubling_examples() {
        let mut l = learner_with_target_scale(0.25);
        assert_eq!(l.doubling_update(0.0), 0);
        assert_eq!(l.state().g_tilde, 1.0);

        let mut l = learner_with_target_scale(2.5);
        assert_eq!(l.doubling_update(0.0), 3);
        assert_eq!((l.state().g_tilde, l.state().epoch), (8.0, 4));

        let mut l = learner_with_target_scale(0.5);
        assert_eq!(l.doubling_update(0.0), 0);
        assert_eq!(l.state().g_tilde, 1.0);
    }

    #[test]
    fn zero_gradient_is_a_fixed_point() {
        let mut l = learner_with_target_scale(0.1);
        let r = linear_round(vec![0.0, 0.0], vec![0.0, 0.0], 1.0);
        let rep = l.step(&r).unwrap();
        assert_eq!(rep.played, vec![0.0, 0.0]);
        assert_eq!(l.state().x, vec![0.0, 0.0]);
    }

    #[test]
    fn full_step_lands_on_the_lmo_vertex() {
        let mut l = learner_with_target_scale(0.1);
        let r = linear_round(vec![3.0, 4.0], vec![0.0, 0.0], 1.0);
        let rep = l.step(&r).unwrap();
        assert_eq!(rep.sigma, Some(1.0));
        let x = &l.state().x;
        assert!((x[0] + 0.6).abs() < 1e-12 && (x[1] + 0.8).abs() < 1e-12);
    }

    /// Plain OFW on `gamma beta f_t` with the same schedule, written independently.
    fn plain_ofw(rounds: &[Round], set: &FeasibleSet, weight: f64, eta: f64) -> Vec<Vec<f64>> {
        let mut x = set.center();
        let mut sum = vec![0.0; x.len()];
        let mut out = Vec::new();
        for (i, r) in rounds.iter().enumerate() {
            out.push(x.clone());
            let g = r.loss_subgrad(&x);
            for k in 0..sum.len() {
                sum[k] += weight * g[k];
            }
            let dir: Vec<f64> = (0..x.len()).map(|k| eta * sum[k] + 2.0 * x[k]).collect();
            let v = set.lmo(&dir).unwrap();
            let sigma = (2.0 / ((i + 1) as f64).sqrt()).min(1.0);
            for k in 0..x.len() {
                x[k] += sigma * (v[k] - x[k]);
            }
        }
        out
    }

    #[test]
    fn inactive_constraints_reduce_to_plain_ofw() {
        let set = FeasibleSet::l2_ball(3, 1.0).unwrap();
        let rounds: Vec<Round> = (0..60)
            .map(|t| {
                let a = t as f64;
                linear_round(vec![a.sin(), a.cos(), 0.3], vec![0.1, 0.0, 0.0], 10.0)
            })
            .collect();
        let mut l = OfwTvc::new(set.clone(), cfg(0.05, 60)).unwrap();
        let played: Vec<Vec<f64>> = rounds.iter().map(|r| l.step(r).unwrap().played).collect();
        let eta = learning_rate(set.diameter(), 1.0, 60);
        let reference = plain_ofw(&rounds, &set, 0.05, eta);
        for (a, b) in played.iter().zip(&reference) {
            for (p, q) in a.iter().zip(b) {
                assert!((p - q).abs() < 1e-12);
            }
        }
        assert_eq!(l.state().epoch, 1);
    }

    #[test]
    fn doubling_resets_epoch_at_current_round() {
        let set = FeasibleSet::l2_ball(2, 1.0).unwrap();
        let mut l = OfwTvc::new(set, cfg(0.3, 50)).unwrap();
        l.set_checks(true);
        // constant violation drives Phi'(beta Q) up until G~ has to double
        let r = linear_round(vec![1.0, 0.0], vec![0.0, 1.0], -1.0);
        let mut saw_reset = false;
        for _ in 0..50 {
            let before = l.state().epoch;
            let rep = l.step(&r).unwrap();
            assert!(rep.failures.is_empty(), "{:?}", rep.failures);
            if l.state().epoch > before {
                saw_reset = true;
                assert_eq!(l.state().epoch_start, l.state().round);
                assert_eq!(rep.sigma, Some(1.0));
            }
            assert!(FeasibleSet::l2_ball(2, 1.0)
                .unwrap()
                .contains(&l.state().x, 1e-9)
                .unwrap());
        }
        assert!(saw_reset);
    }
}
