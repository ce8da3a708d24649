//! Experiment configuration: a partial, mergeable form (defaults < file <
//! flags) and the validated form the harness runs.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::FeasibleSet;
use crate::learner::Algo;
use crate::objectives::{
    gen_matrix_completion, gen_synthetic, load_movielens, MatrixCompletionConfig, OffsetMode,
    ProblemStream, RatingsOptions, SyntheticConfig, SyntheticMode,
};
use crate::params::{Overrides, ScVariant};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProblemKind {
    SyntheticLinear,
    SyntheticQuadratic,
    MatrixCompletion,
    MovielensFile,
}

impl ProblemKind {
    pub const ALL: [ProblemKind; 4] = [
        ProblemKind::SyntheticLinear,
        ProblemKind::SyntheticQuadratic,
        ProblemKind::MatrixCompletion,
        ProblemKind::MovielensFile,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ProblemKind::SyntheticLinear => "synthetic-linear",
            ProblemKind::SyntheticQuadratic => "synthetic-quadratic",
            ProblemKind::MatrixCompletion => "matrix-completion",
            ProblemKind::MovielensFile => "movielens-file",
        }
    }
}

impl fmt::Display for ProblemKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ProblemKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        ProblemKind::ALL.into_iter().find(|p| p.name() == s).ok_or_else(|| {
            Error::invalid(format!(
                "unknown problem '{s}' (synthetic-linear | synthetic-quadratic | matrix-completion | movielens-file)"
            ))
        })
    }
}

/// Shape of the feasible set for synthetic problems.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SetChoice {
    L2Ball,
    Box,
    Simplex,
}

impl FromStr for SetChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "l2-ball" => Ok(SetChoice::L2Ball),
            "box" => Ok(SetChoice::Box),
            "simplex" => Ok(SetChoice::Simplex),
            _ => Err(Error::invalid(format!(
                "unknown set '{s}' (l2-ball | box | simplex)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> OneOrMany<T> {
    pub fn to_vec(&self) -> Vec<T> {
        match self {
            OneOrMany::One(v) => vec![v.clone()],
            OneOrMany::Many(v) => v.clone(),
        }
    }
}

/// Every field optional; used for the config file and for command-line flags.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PartialConfig {
    pub algo: Option<OneOrMany<Algo>>,
    pub problem: Option<ProblemKind>,
    pub t_grid: Option<Vec<usize>>,
    pub seeds: Option<usize>,
    pub seed: Option<u64>,
    pub out_dir: Option<PathBuf>,
    pub assertions: Option<bool>,
    pub force: Option<bool>,
    pub threads: Option<usize>,
    pub comparator_iters: Option<usize>,

    pub beta: Option<f64>,
    pub gamma: Option<f64>,
    pub lambda: Option<f64>,
    pub c: Option<f64>,
    pub block_k: Option<usize>,
    pub inner_l: Option<usize>,
    pub epsilon: Option<f64>,
    pub delta: Option<f64>,
    pub alpha_f: Option<f64>,
    pub offset_mode: Option<OffsetMode>,
    pub variant: Option<ScVariant>,

    pub dimension: Option<usize>,
    pub set: Option<SetChoice>,
    pub radius: Option<f64>,
    /// Inner radius `r`; only shrinking the geometric value is allowed.
    pub r: Option<f64>,
    pub lipschitz: Option<f64>,
    pub slack_max: Option<f64>,
    pub loss_spread: Option<f64>,
    pub rows: Option<usize>,
    pub cols: Option<usize>,
    pub rank: Option<usize>,
    pub obs_per_round: Option<usize>,
    pub tau: Option<f64>,
    pub data_path: Option<PathBuf>,
}

macro_rules! overlay {
    ($base:ident, $top:ident; $($f:ident),* $(,)?) => {
        $( if $top.$f.is_some() { $base.$f = $top.$f; } )*
    };
}

impl PartialConfig {
    pub fn from_json_str(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Config(vec![format!("config file: {e}")]))
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text)
            .map_err(|e| Error::Config(vec![format!("{}: {e}", path.display())]))
    }

    /// Fields set in `top` replace those in `self`.
    pub fn merge(mut self, top: PartialConfig) -> Self {
        overlay!(self, top;
            algo, problem, t_grid, seeds, seed, out_dir, assertions, force, threads, comparator_iters,
            beta, gamma, lambda, c, block_k, inner_l, epsilon, delta, alpha_f, offset_mode, variant,
            dimension, set, radius, r, lipschitz, slack_max, loss_spread, rows, cols, rank, obs_per_round, tau, data_path,
        );
        self
    }

    /// Validates and fills defaults; every violated constraint is reported.
    pub fn resolve(self) -> Result<ExperimentConfig> {
        let mut bad: Vec<String> = Vec::new();
        let algos = self.algo.as_ref().map(|a| a.to_vec()).unwrap_or_default();
        if algos.is_empty() {
            bad.push("algo: at least one algorithm is required".into());
        }
        let problem = self.problem.unwrap_or(ProblemKind::SyntheticLinear);
        let t_grid = self.t_grid.clone().unwrap_or_default();
        if t_grid.is_empty() {
            bad.push("t_grid: at least one horizon T is required".into());
        }
        if t_grid.contains(&0) {
            bad.push("t_grid: horizons must be positive".into());
        }
        let seeds = self.seeds.unwrap_or(1);
        if seeds == 0 {
            bad.push("seeds: must be at least 1".into());
        }
        if self.threads == Some(0) {
            bad.push("threads: must be at least 1".into());
        }

        let alpha_f = self.alpha_f;
        if let Some(a) = alpha_f {
            if !(a >= 0.0 && a.is_finite()) {
                bad.push(format!("alpha_f: must be >= 0, got {a}"));
            }
        }
        let alpha_missing = !alpha_f.is_some_and(|a| a > 0.0);
        for a in &algos {
            if a.is_strongly_convex() && alpha_missing {
                bad.push(format!("alpha_f: {a} requires alpha_f > 0"));
            }
        }
        if problem == ProblemKind::SyntheticLinear {
            for a in algos.iter().filter(|a| a.is_strongly_convex()) {
                bad.push(format!(
                    "problem: {a} needs strongly convex losses; synthetic-linear has none"
                ));
            }
        }
        if problem == ProblemKind::SyntheticQuadratic && alpha_missing {
            bad.push("alpha_f: synthetic-quadratic requires alpha_f > 0".into());
        }
        if problem == ProblemKind::MovielensFile && self.data_path.is_none() {
            bad.push("data_path: movielens-file requires a rating file".into());
        }

        let options = ProblemOptions {
            dimension: self.dimension.unwrap_or(10),
            set: self.set.unwrap_or(SetChoice::L2Ball),
            radius: self.radius.unwrap_or(1.0),
            inner_radius: self.r,
            lipschitz: self.lipschitz,
            slack_max: self.slack_max.unwrap_or(0.1),
            loss_spread: self.loss_spread.unwrap_or(1.0),
            rows: self.rows.unwrap_or(32),
            cols: self.cols.unwrap_or(32),
            rank: self.rank.unwrap_or(3),
            obs_per_round: self.obs_per_round.unwrap_or(1),
            tau: self.tau,
            data_path: self.data_path.clone(),
        };
        if options.dimension == 0 {
            bad.push("dimension: must be positive".into());
        }
        if !(options.radius > 0.0 && options.radius.is_finite()) {
            bad.push(format!("radius: must be positive, got {}", options.radius));
        }
        if let Some(g) = options.lipschitz {
            if !(g > 0.0 && g.is_finite()) {
                bad.push(format!("lipschitz: must be positive, got {g}"));
            }
        }
        if !(options.slack_max >= 0.0) {
            bad.push(format!(
                "slack_max: must be >= 0, got {}",
                options.slack_max
            ));
        }
        if !(0.0..=1.0).contains(&options.loss_spread) {
            bad.push(format!(
                "loss_spread: must lie in [0, 1], got {}",
                options.loss_spread
            ));
        }
        if let Some(t) = options.tau {
            if !(t > 0.0 && t.is_finite()) {
                bad.push(format!("tau: must be positive, got {t}"));
            }
        }
        if let Some(r) = options.inner_radius {
            let natural = ProblemOptions {
                inner_radius: None,
                ..options.clone()
            }
            .inner_radius_for(problem);
            match natural {
                _ if !(r > 0.0) => bad.push(format!("r: must be positive, got {r}")),
                Ok(n) if r > n * (1.0 + 1e-12) && problem != ProblemKind::MatrixCompletion => bad
                    .push(format!(
                        "r: the set only contains a ball of radius {n}, got r = {r}"
                    )),
                _ => {}
            }
        }
        if options.set == SetChoice::Simplex && algos.iter().any(|a| a.is_bandit()) {
            bad.push("set: the simplex has empty interior, bandit algorithms need a full-dimensional set".into());
        }

        let overrides = Overrides {
            beta: self.beta,
            gamma: self.gamma,
            lambda: self.lambda,
            c: self.c,
            block_k: self.block_k,
            inner_l: self.inner_l,
            epsilon: self.epsilon,
            delta: self.delta,
            variant: self.variant,
        };
        for (name, v) in [
            ("beta", overrides.beta),
            ("gamma", overrides.gamma),
            ("lambda", overrides.lambda),
            ("c", overrides.c),
            ("epsilon", overrides.epsilon),
            ("delta", overrides.delta),
        ] {
            if let Some(v) = v {
                if !(v > 0.0 && v.is_finite()) {
                    bad.push(format!("{name}: must be positive, got {v}"));
                }
            }
        }
        if overrides.block_k == Some(0) {
            bad.push("block_k: must be at least 1".into());
        }

        // delta < r for bandit learners, checked against the geometric inner radius
        if algos.iter().any(|a| a.is_bandit()) && problem != ProblemKind::MovielensFile {
            if let Ok(r) = options.inner_radius_for(problem) {
                for a in algos.iter().filter(|a| a.is_bandit()) {
                    let exponent = if *a == Algo::BfwTvc {
                        -0.25
                    } else {
                        -1.0 / 3.0
                    };
                    for &t in &t_grid {
                        let delta = match (overrides.delta, overrides.c) {
                            (Some(d), _) => d,
                            (None, Some(c)) => c * (t.max(1) as f64).powf(exponent),
                            (None, None) => continue,
                        };
                        if !(delta < r) {
                            bad.push(format!("delta: {a} requires delta < r = {r}, got delta = {delta} at T = {t}"));
                            break;
                        }
                    }
                }
            }
        }

        if !bad.is_empty() {
            bad.dedup();
            return Err(Error::Config(bad));
        }
        Ok(ExperimentConfig {
            algos,
            problem,
            t_grid,
            seeds,
            base_seed: self.seed.unwrap_or(0),
            overrides,
            alpha_f,
            offset_mode: self.offset_mode.unwrap_or(OffsetMode::Zero),
            options,
            out_dir: self.out_dir.unwrap_or_else(|| PathBuf::from("runs")),
            assertions: self.assertions.unwrap_or(true),
            force: self.force.unwrap_or(false),
            threads: self.threads,
            comparator_iters: self.comparator_iters,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemOptions {
    pub dimension: usize,
    pub set: SetChoice,
    pub radius: f64,
    pub inner_radius: Option<f64>,
    pub lipschitz: Option<f64>,
    pub slack_max: f64,
    pub loss_spread: f64,
    pub rows: usize,
    pub cols: usize,
    pub rank: usize,
    pub obs_per_round: usize,
    pub tau: Option<f64>,
    pub data_path: Option<PathBuf>,
}

/// Nuclear-norm radius of rating-file problems when none is given.
pub const DEFAULT_RATINGS_TAU: f64 = 1e4;

impl ProblemOptions {
    fn synthetic_set(&self) -> Result<FeasibleSet> {
        let set = match self.set {
            SetChoice::L2Ball => FeasibleSet::l2_ball(self.dimension, self.radius)?,
            SetChoice::Box => FeasibleSet::cube(self.dimension, self.radius)?,
            SetChoice::Simplex => FeasibleSet::simplex(self.dimension, self.radius)?,
        };
        self.apply_inner(set)
    }

    fn apply_inner(&self, set: FeasibleSet) -> Result<FeasibleSet> {
        match self.inner_radius {
            Some(r) => set.with_inner_radius(r),
            None => Ok(set),
        }
    }

    /// Inner radius of the set the generator will build (for matrix
    /// completion with an unknown `tau`, a lower estimate from the side lengths).
    pub fn inner_radius_for(&self, problem: ProblemKind) -> Result<f64> {
        if let Some(r) = self.inner_radius {
            return Ok(r);
        }
        match problem {
            ProblemKind::SyntheticLinear | ProblemKind::SyntheticQuadratic => {
                Ok(self.synthetic_set()?.inner_radius())
            }
            ProblemKind::MatrixCompletion | ProblemKind::MovielensFile => {
                let tau = self.tau.unwrap_or(DEFAULT_RATINGS_TAU);
                Ok(FeasibleSet::trace_norm_ball(self.rows, self.cols, tau)?.inner_radius())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub algos: Vec<Algo>,
    pub problem: ProblemKind,
    pub t_grid: Vec<usize>,
    pub seeds: usize,
    pub base_seed: u64,
    pub overrides: Overrides,
    pub alpha_f: Option<f64>,
    pub offset_mode: OffsetMode,
    pub options: ProblemOptions,
    pub out_dir: PathBuf,
    pub assertions: bool,
    pub force: bool,
    pub threads: Option<usize>,
    pub comparator_iters: Option<usize>,
}

impl ExperimentConfig {
    /// Builds the problem instance for one `(seed, T)` pair.
    pub fn build_problem(&self, horizon: usize, seed: u64) -> Result<ProblemStream> {
        let o = &self.options;
        let alpha = self.alpha_f.unwrap_or(0.0);
        match self.problem {
            ProblemKind::SyntheticLinear | ProblemKind::SyntheticQuadratic => {
                let set = o.synthetic_set()?;
                let quadratic = self.problem == ProblemKind::SyntheticQuadratic;
                let lipschitz = o.lipschitz.unwrap_or(if quadratic {
                    alpha * set.diameter() + 1.0
                } else {
                    1.0
                });
                let stream = gen_synthetic(
                    &SyntheticConfig {
                        set,
                        horizon,
                        lipschitz,
                        strong_convexity: alpha,
                        mode: if quadratic {
                            SyntheticMode::Quadratic
                        } else {
                            SyntheticMode::Linear
                        },
                        slack_max: o.slack_max,
                        loss_spread: o.loss_spread,
                    },
                    seed,
                )?;
                Ok(stream)
            }
            ProblemKind::MatrixCompletion => {
                let mut stream = gen_matrix_completion(
                    &MatrixCompletionConfig {
                        rows: o.rows,
                        cols: o.cols,
                        rank: o.rank,
                        obs_per_round: o.obs_per_round,
                        horizon,
                        tau: o.tau,
                        offset_mode: self.offset_mode,
                        slack_max: o.slack_max,
                        strong_convexity: alpha,
                    },
                    seed,
                )?;
                stream.meta.set = o.apply_inner(stream.meta.set.clone())?;
                if let Some(g) = o.lipschitz {
                    stream.meta.lipschitz = g;
                }
                Ok(stream)
            }
            ProblemKind::MovielensFile => {
                let path = o.data_path.as_ref().ok_or_else(|| {
                    Error::Config(vec![
                        "data_path: movielens-file requires a rating file".into()
                    ])
                })?;
                let mut stream = load_movielens(
                    path,
                    horizon,
                    o.obs_per_round,
                    &RatingsOptions {
                        tau: o.tau.unwrap_or(DEFAULT_RATINGS_TAU),
                        strong_convexity: alpha,
                        seed,
                    },
                )?;
                stream.meta.set = o.apply_inner(stream.meta.set.clone())?;
                if let Some(g) = o.lipschitz {
                    stream.meta.lipschitz = g;
                }
                Ok(stream)
            }
        }
    }

    pub fn set_kind_name(&self) -> &'static str {
        match self.problem {
            ProblemKind::MatrixCompletion | ProblemKind::MovielensFile => "trace-norm-ball",
            _ => match self.options.set {
                SetChoice::L2Ball => "l2-ball",
                SetChoice::Box => "box",
                SetChoice::Simplex => "simplex",
            },
        }
    }
}
