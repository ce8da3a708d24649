//! Cumulative-constraint-violation tracking, Lyapunov functions, and the
//! composite surrogate loss `gamma beta f + beta Phi'(beta Q) g^+`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Exponent cap for the exponential Lyapunov function.
pub const EXP_ARG_CAP: f64 = 700.0;

/// `max(0, value)`.
pub fn g_plus(value: f64) -> f64 {
    value.max(0.0)
}

/// Running CCV `Q_t = Q_{t-1} + g_t^+(x_t)`, with `Q_0 = 0`.
#[derive(Debug, Clone, Default)]
pub struct CcvTracker {
    q: f64,
    history: Option<Vec<f64>>,
}

impl CcvTracker {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_history() -> Self {
        Self {
            q: 0.0,
            history: Some(Vec::new()),
        }
    }

    pub fn q(&self) -> f64 {
        self.q
    }

    pub fn history(&self) -> Option<&[f64]> {
        self.history.as_deref()
    }

    /// Adds `max(0, g_value)` and returns the new `Q`.
    pub fn update(&mut self, g_value: f64) -> f64 {
        self.q += g_plus(g_value);
        if let Some(h) = self.history.as_mut() {
            h.push(self.q);
        }
        self.q
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum LyapunovFn {
    /// `e^{lambda x} - 1`
    Exp { lambda: f64 },
    /// `x^2 + x`
    QuadLinear,
    /// `x^2`
    Quad,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhiValue {
    pub phi: f64,
    pub phi_prime: f64,
    /// The exponential argument hit [`EXP_ARG_CAP`].
    pub saturated: bool,
}

impl LyapunovFn {
    pub fn eval(&self, x: f64) -> Result<PhiValue> {
        if !(x >= 0.0) {
            return Err(Error::invalid(format!(
                "Lyapunov argument must be >= 0, got {x}"
            )));
        }
        Ok(self.eval_unchecked(x))
    }

    pub(crate) fn eval_unchecked(&self, x: f64) -> PhiValue {
        match *self {
            LyapunovFn::Exp { lambda } => {
                let arg = lambda * x;
                let saturated = arg > EXP_ARG_CAP;
                let e = arg.min(EXP_ARG_CAP).exp();
                PhiValue {
                    phi: e - 1.0,
                    phi_prime: lambda * e,
                    saturated,
                }
            }
            LyapunovFn::QuadLinear => PhiValue {
                phi: x * x + x,
                phi_prime: 2.0 * x + 1.0,
                saturated: false,
            },
            LyapunovFn::Quad => PhiValue {
                phi: x * x,
                phi_prime: 2.0 * x,
                saturated: false,
            },
        }
    }

    pub fn phi(&self, x: f64) -> f64 {
        self.eval_unchecked(x).phi
    }

    pub fn phi_prime(&self, x: f64) -> f64 {
        self.eval_unchecked(x).phi_prime
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SurrogateParams {
    pub beta: f64,
    pub gamma: f64,
}

impl SurrogateParams {
    pub fn new(beta: f64, gamma: f64) -> Result<Self> {
        if !(beta > 0.0 && beta.is_finite()) || !(gamma > 0.0 && gamma.is_finite()) {
            return Err(Error::invalid(format!(
                "beta and gamma must be positive and finite, got beta={beta}, gamma={gamma}"
            )));
        }
        Ok(Self { beta, gamma })
    }
}

/// Coefficients of one round's surrogate, fixed once `Q_t` is known.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Surrogate {
    /// `gamma * beta`
    pub loss_weight: f64,
    /// `beta * Phi'(beta Q_t)`
    pub penalty_weight: f64,
    pub saturated: bool,
}

impl Surrogate {
    pub fn at(params: &SurrogateParams, phi: &LyapunovFn, q_t: f64) -> Self {
        let pv = phi.eval_unchecked(params.beta * q_t);
        Self {
            loss_weight: params.gamma * params.beta,
            penalty_weight: params.beta * pv.phi_prime,
            saturated: pv.saturated,
        }
    }

    pub fn value(&self, f_value: f64, g_value: f64) -> f64 {
        self.loss_weight * f_value + self.penalty_weight * g_plus(g_value)
    }

    /// Subgradient; at `g = 0` the zero element of `[0, 1] grad g` is chosen.
    pub fn subgrad(&self, f_grad: &[f64], g_value: f64, g_grad: &[f64]) -> Result<Vec<f64>> {
        if f_grad.len() != g_grad.len() {
            return Err(Error::invalid(format!(
                "gradient dimension mismatch: {} vs {}",
                f_grad.len(),
                g_grad.len()
            )));
        }
        let mut out: Vec<f64> = f_grad.iter().map(|v| self.loss_weight * v).collect();
        if g_value > 0.0 {
            for (o, gg) in out.iter_mut().zip(g_grad) {
                *o += self.penalty_weight * gg;
            }
        }
        Ok(out)
    }
}

/// `q_t` must already include the current round's violation.
pub fn surrogate_value(
    params: &SurrogateParams,
    phi: &LyapunovFn,
    q_t: f64,
    f_value: f64,
    g_value: f64,
) -> f64 {
    Surrogate::at(params, phi, q_t).value(f_value, g_value)
}

pub fn surrogate_subgrad(
    params: &SurrogateParams,
    phi: &LyapunovFn,
    q_t: f64,
    f_grad: &[f64],
    g_value: f64,
    g_grad: &[f64],
) -> Result<Vec<f64>> {
    Surrogate::at(params, phi, q_t).subgrad(f_grad, g_value, g_grad)
}

/// Convexity bound on the Lyapunov drift:
/// `Phi(beta Q_t) - Phi(beta Q_{t-1}) <= Phi'(beta Q_t) beta g^+`.
pub fn drift_check(phi: &LyapunovFn, beta: f64, q_prev: f64, q_curr: f64, g_plus_val: f64) -> bool {
    let drift = phi.phi(beta * q_curr) - phi.phi(beta * q_prev);
    drift <= phi.phi_prime(beta * q_curr) * beta * g_plus_val + 1e-9
}

/// Upper bound `beta G (gamma + Phi'(beta Q))` on the surrogate subgradient norm.
pub fn gradient_bound(params: &SurrogateParams, phi: &LyapunovFn, lipschitz: f64, q: f64) -> f64 {
    params.beta * lipschitz * (params.gamma + phi.phi_prime(params.beta * q))
}
