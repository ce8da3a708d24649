//! Default hyperparameters per algorithm, user overrides, and learner
//! construction.

use serde::{Deserialize, Serialize};

use crate::bfw::{BfwConfig, BfwTvc};
use crate::error::{Error, Result};
use crate::learner::{Algo, Learner};
use crate::linalg::ceil_pow;
use crate::objectives::ProblemMeta;
use crate::ofw::{OfwConfig, OfwTvc};
use crate::scbfw::{ScbfwConfig, ScbfwTvc};
use crate::scofw::{ScofwConfig, ScofwTvc};
use crate::surrogate::{LyapunovFn, SurrogateParams};

/// Which parameterization the strongly convex learners use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ScVariant {
    /// Conservative constants that carry the convergence guarantee.
    #[default]
    Conservative,
    /// Simpler closed-form constants.
    Simple,
}

impl std::str::FromStr for ScVariant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "conservative" => Ok(ScVariant::Conservative),
            "simple" => Ok(ScVariant::Simple),
            _ => Err(Error::invalid(format!(
                "unknown variant '{s}' (conservative | simple)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Overrides {
    pub beta: Option<f64>,
    pub gamma: Option<f64>,
    pub lambda: Option<f64>,
    pub c: Option<f64>,
    pub block_k: Option<usize>,
    pub inner_l: Option<usize>,
    pub epsilon: Option<f64>,
    pub delta: Option<f64>,
    pub variant: Option<ScVariant>,
}

/// Fully resolved hyperparameters for one (algorithm, problem) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Resolved {
    pub algo: Algo,
    pub beta: f64,
    pub gamma: f64,
    pub phi: LyapunovFn,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub c: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub block_k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inner_l: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub variant: Option<ScVariant>,
}

/// Default `c` for the bandit learners, as a fraction of the inner radius.
pub const DEFAULT_C_FRACTION: f64 = 0.5;

fn exp_phi(t: f64, lambda: Option<f64>) -> LyapunovFn {
    LyapunovFn::Exp {
        lambda: lambda.unwrap_or(0.5 * t.powf(-0.75)),
    }
}

pub fn resolve(algo: Algo, meta: &ProblemMeta, ov: &Overrides) -> Result<Resolved> {
    let g = meta.lipschitz;
    let dd = meta.set.diameter();
    let r = meta.set.inner_radius();
    let t = meta.horizon as f64;
    let alpha = meta.strong_convexity;
    let dim = meta.set.dimension() as f64;
    let m = meta.value_bound;

    if algo.is_strongly_convex() && !(alpha > 0.0) {
        return Err(Error::invalid(format!("{algo} requires alpha_f > 0")));
    }
    let with_lambda = |phi: LyapunovFn| match (phi, ov.lambda) {
        (LyapunovFn::Exp { .. }, Some(l)) => LyapunovFn::Exp { lambda: l },
        _ => phi,
    };

    let mut out = match algo {
        Algo::OfwTvc => Resolved {
            algo,
            beta: 1.0 / (64.0 * g * dd),
            gamma: 1.0,
            phi: exp_phi(t, ov.lambda),
            c: None,
            delta: None,
            block_k: None,
            inner_l: None,
            epsilon: None,
            variant: None,
        },
        Algo::ScofwTvc => {
            let variant = ov.variant.unwrap_or_default();
            let beta = match variant {
                ScVariant::Conservative => {
                    alpha / (500.0 * g * t.powf(2.0 / 3.0) * (g + alpha * dd))
                }
                ScVariant::Simple => 1.0 / (g * dd * t.powf(2.0 / 3.0)),
            };
            Resolved {
                algo,
                beta,
                gamma: g / (g + alpha * dd),
                phi: LyapunovFn::QuadLinear,
                c: None,
                delta: None,
                block_k: None,
                inner_l: None,
                epsilon: None,
                variant: Some(variant),
            }
        }
        Algo::BfwTvc => {
            let c = ov.c.unwrap_or(DEFAULT_C_FRACTION * r);
            let c2 = 16.0
                * g
                * (c * dd / r + 3.0 * c + 1.0 + 2.0 * c * dd / (dim * m) + dim * m * dd / c);
            Resolved {
                algo,
                beta: 1.0 / c2,
                gamma: 1.0,
                phi: exp_phi(t, ov.lambda),
                c: Some(c),
                delta: Some(ov.delta.unwrap_or(c * t.powf(-0.25))),
                block_k: Some(ov.block_k.unwrap_or_else(|| ceil_pow(t, 0.5))),
                inner_l: None,
                epsilon: Some(ov.epsilon.unwrap_or(4.0 * dd * dd / t.sqrt())),
                variant: None,
            }
        }
        Algo::ScbfwTvc => {
            let c = ov.c.unwrap_or(DEFAULT_C_FRACTION * r);
            let variant = ov.variant.unwrap_or_default();
            let (beta, gamma) = match variant {
                ScVariant::Conservative => {
                    let cc = 8.0 + 3.0 * c + c * dd / r + 12.0 * dd;
                    let gamma = 16.0 / alpha
                        * (8.0 * t.powf(1.0 / 3.0).ln() + cc)
                        * g
                        * g
                        * t.powf(2.0 / 3.0);
                    (1.0, gamma)
                }
                ScVariant::Simple => (1.0 / (g * dd * t.powf(2.0 / 3.0)), g / (g + alpha * dd)),
            };
            let k = ceil_pow(t, 2.0 / 3.0);
            Resolved {
                algo,
                beta,
                gamma,
                phi: LyapunovFn::Quad,
                c: Some(c),
                delta: Some(ov.delta.unwrap_or(c * t.powf(-1.0 / 3.0))),
                block_k: Some(ov.block_k.unwrap_or(k)),
                inner_l: Some(ov.inner_l.unwrap_or(k)),
                epsilon: None,
                variant: Some(variant),
            }
        }
    };
    out.phi = with_lambda(out.phi);
    if let Some(b) = ov.beta {
        out.beta = b;
    }
    if let Some(gm) = ov.gamma {
        out.gamma = gm;
    }
    if let Some(k) = out.block_k {
        out.block_k = Some(k.min(meta.horizon));
    }
    validate(&out, meta)?;
    Ok(out)
}

fn validate(p: &Resolved, meta: &ProblemMeta) -> Result<()> {
    let mut bad = Vec::new();
    if !(p.beta > 0.0 && p.beta.is_finite()) {
        bad.push(format!("beta must be positive, got {}", p.beta));
    }
    if !(p.gamma > 0.0 && p.gamma.is_finite()) {
        bad.push(format!("gamma must be positive, got {}", p.gamma));
    }
    if let LyapunovFn::Exp { lambda } = p.phi {
        if !(lambda > 0.0 && lambda.is_finite()) {
            bad.push(format!("lambda must be positive, got {lambda}"));
        }
    }
    if let Some(c) = p.c {
        if !(c > 0.0) {
            bad.push(format!("c must be positive, got {c}"));
        }
    }
    if let Some(delta) = p.delta {
        let r = meta.set.inner_radius();
        if !(delta > 0.0 && delta < r) {
            bad.push(format!(
                "delta must satisfy 0 < delta < r = {r}, got {delta}"
            ));
        }
    }
    if p.block_k == Some(0) {
        bad.push("block_k must be at least 1".to_string());
    }
    if let Some(eps) = p.epsilon {
        if !(eps > 0.0) {
            bad.push(format!("epsilon must be positive, got {eps}"));
        }
    }
    if bad.is_empty() {
        Ok(())
    } else {
        Err(Error::Config(bad))
    }
}

/// Builds the learner described by `p` for a problem with metadata `meta`.
pub fn build_learner(p: &Resolved, meta: &ProblemMeta, seed: u64) -> Result<Box<dyn Learner>> {
    let params = SurrogateParams::new(p.beta, p.gamma)?;
    let set = meta.set.clone();
    let missing = |name: &str| Error::invalid(format!("{} needs {name}", p.algo));
    Ok(match p.algo {
        Algo::OfwTvc => Box::new(OfwTvc::new(
            set,
            OfwConfig {
                params,
                phi: p.phi,
                lipschitz: meta.lipschitz,
                horizon: meta.horizon,
            },
        )?),
        Algo::ScofwTvc => Box::new(ScofwTvc::new(
            set,
            ScofwConfig {
                params,
                phi: p.phi,
                strong_convexity: meta.strong_convexity,
            },
        )?),
        Algo::BfwTvc => Box::new(BfwTvc::new(
            set,
            BfwConfig {
                params,
                phi: p.phi,
                lipschitz: meta.lipschitz,
                value_bound: meta.value_bound,
                horizon: meta.horizon,
                c: p.c.ok_or_else(|| missing("c"))?,
                delta: p.delta.ok_or_else(|| missing("delta"))?,
                block_size: p.block_k.ok_or_else(|| missing("block_k"))?,
                epsilon: p.epsilon.ok_or_else(|| missing("epsilon"))?,
                seed,
            },
        )?),
        Algo::ScbfwTvc => Box::new(ScbfwTvc::new(
            set,
            ScbfwConfig {
                params,
                phi: p.phi,
                strong_convexity: meta.strong_convexity,
                horizon: meta.horizon,
                delta: p.delta.ok_or_else(|| missing("delta"))?,
                block_size: p.block_k.ok_or_else(|| missing("block_k"))?,
                inner_iters: p.inner_l.ok_or_else(|| missing("inner_l"))?,
                seed,
            },
        )?),
    })
}
