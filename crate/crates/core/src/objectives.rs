//! Per-round loss and constraint functions, the problem generators, and the
//! rating-file loader.

use std::fmt;
use std::io::BufRead;
use std::path::Path;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{nuclear_norm, FeasibleSet, SetKind};
use crate::linalg::{dot, norm, norm_sq};

pub use crate::surrogate::g_plus;

/// One round's loss `f_t` and constraint `g_t`, as value and subgradient evaluators.
pub trait RoundFunctions {
    fn dimension(&self) -> usize;
    fn loss_value(&self, x: &[f64]) -> f64;
    fn loss_subgrad(&self, x: &[f64]) -> Vec<f64>;
    fn constraint_value(&self, x: &[f64]) -> f64;
    fn constraint_subgrad(&self, x: &[f64]) -> Vec<f64>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    /// Row-major flat index into the decision matrix.
    pub index: usize,
    pub target: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Loss {
    /// `<c, x>`
    Linear { c: Vec<f64> },
    /// `(alpha/2) ||x - center||^2 + <c, x>`
    Quadratic {
        alpha: f64,
        center: Vec<f64>,
        c: Vec<f64>,
    },
    /// `1/2 sum_{(i,j) in O} (X_ij - M_ij)^2`
    Observed {
        dimension: usize,
        entries: Vec<Observation>,
    },
}

impl Loss {
    pub fn dimension(&self) -> usize {
        match self {
            Loss::Linear { c } | Loss::Quadratic { c, .. } => c.len(),
            Loss::Observed { dimension, .. } => *dimension,
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            Loss::Linear { c } => dot(c, x),
            Loss::Quadratic { alpha, center, c } => {
                let sq: f64 = x.iter().zip(center).map(|(a, b)| (a - b) * (a - b)).sum();
                0.5 * alpha * sq + dot(c, x)
            }
            Loss::Observed { entries, .. } => entries
                .iter()
                .map(|o| {
                    let r = x[o.index] - o.target;
                    0.5 * r * r
                })
                .sum(),
        }
    }

    pub fn subgrad(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Loss::Linear { c } => c.clone(),
            Loss::Quadratic { alpha, center, c } => x
                .iter()
                .zip(center)
                .zip(c)
                .map(|((xi, ai), ci)| alpha * (xi - ai) + ci)
                .collect(),
            Loss::Observed { dimension, entries } => {
                let mut g = vec![0.0; *dimension];
                for o in entries {
                    g[o.index] += x[o.index] - o.target;
                }
                g
            }
        }
    }

    /// Adds this loss to a running separable-quadratic total.
    pub fn accumulate_into(&self, total: &mut SeparableQuadratic) {
        match self {
            Loss::Linear { c } => {
                for (l, ci) in total.linear.iter_mut().zip(c) {
                    *l += ci;
                }
            }
            Loss::Quadratic { alpha, center, c } => {
                for i in 0..c.len() {
                    total.weights[i] += alpha;
                    total.linear[i] += c[i] - alpha * center[i];
                }
                total.constant += 0.5 * alpha * norm_sq(center);
            }
            Loss::Observed { entries, .. } => {
                for o in entries {
                    total.weights[o.index] += 1.0;
                    total.linear[o.index] -= o.target;
                    total.constant += 0.5 * o.target * o.target;
                }
            }
        }
    }
}

/// `1/2 sum_i w_i x_i^2 + <linear, x> + constant`: the shape of any sum of
/// losses produced here.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparableQuadratic {
    pub weights: Vec<f64>,
    pub linear: Vec<f64>,
    pub constant: f64,
}

impl SeparableQuadratic {
    pub fn zeros(dimension: usize) -> Self {
        Self {
            weights: vec![0.0; dimension],
            linear: vec![0.0; dimension],
            constant: 0.0,
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        let mut v = self.constant;
        for ((xi, w), l) in x.iter().zip(&self.weights).zip(&self.linear) {
            v += 0.5 * w * xi * xi + l * xi;
        }
        v
    }

    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.weights)
            .zip(&self.linear)
            .map(|((xi, w), l)| w * xi + l)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Constraint {
    /// `<p, x> - b`
    Affine { p: Vec<f64>, b: f64 },
    /// `<p, x> - b` with `p` uniform on `[-1, 1]^dimension` regenerated from `seed`.
    SeededAffine { seed: u64, dimension: usize, b: f64 },
}

impl Constraint {
    /// The affine constraint through `anchor` with the given slack:
    /// `b = <p, anchor> + slack`, so `g(anchor) = -slack`.
    pub fn through(p: Vec<f64>, anchor: &[f64], slack: f64) -> Self {
        let b = dot(&p, anchor) + slack;
        Constraint::Affine { p, b }
    }

    pub fn normal(&self) -> std::borrow::Cow<'_, [f64]> {
        match self {
            Constraint::Affine { p, .. } => std::borrow::Cow::Borrowed(p),
            Constraint::SeededAffine {
                seed, dimension, ..
            } => {
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                std::borrow::Cow::Owned(
                    (0..*dimension)
                        .map(|_| rng.random_range(-1.0..=1.0))
                        .collect(),
                )
            }
        }
    }

    pub fn offset(&self) -> f64 {
        match self {
            Constraint::Affine { b, .. } | Constraint::SeededAffine { b, .. } => *b,
        }
    }

    pub fn value(&self, x: &[f64]) -> f64 {
        dot(&self.normal(), x) - self.offset()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Round {
    pub loss: Loss,
    pub constraint: Constraint,
}

impl RoundFunctions for Round {
    fn dimension(&self) -> usize {
        self.loss.dimension()
    }

    fn loss_value(&self, x: &[f64]) -> f64 {
        self.loss.value(x)
    }

    fn loss_subgrad(&self, x: &[f64]) -> Vec<f64> {
        self.loss.subgrad(x)
    }

    fn constraint_value(&self, x: &[f64]) -> f64 {
        self.constraint.value(x)
    }

    fn constraint_subgrad(&self, _x: &[f64]) -> Vec<f64> {
        self.constraint.normal().into_owned()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProblemMeta {
    /// Lipschitz constant `G` shared by `f_t` and `g_t` over the set.
    pub lipschitz: f64,
    /// Bound `M` on `|f_t|` over the set.
    pub value_bound: f64,
    /// Strong-convexity modulus `alpha_f`; 0 for general convex losses.
    pub strong_convexity: f64,
    pub horizon: usize,
    pub set: FeasibleSet,
}

impl ProblemMeta {
    pub fn validate(&self) -> Result<()> {
        let mut bad = Vec::new();
        if !(self.lipschitz > 0.0 && self.lipschitz.is_finite()) {
            bad.push(format!(
                "lipschitz G must be positive, got {}",
                self.lipschitz
            ));
        }
        if !(self.value_bound > 0.0 && self.value_bound.is_finite()) {
            bad.push(format!(
                "value bound M must be positive, got {}",
                self.value_bound
            ));
        }
        if !(self.strong_convexity >= 0.0 && self.strong_convexity.is_finite()) {
            bad.push(format!(
                "alpha_f must be >= 0, got {}",
                self.strong_convexity
            ));
        }
        if self.horizon == 0 {
            bad.push("horizon T must be positive".to_string());
        }
        if bad.is_empty() {
            Ok(())
        } else {
            Err(Error::invalid(bad.join("; ")))
        }
    }
}

/// A materialized, deterministic sequence of exactly `T` rounds.
#[derive(Debug, Clone)]
pub struct ProblemStream {
    pub meta: ProblemMeta,
    pub seed: u64,
    /// A point feasible for every round's constraint, when the generator knows one.
    pub comparator_hint: Option<Vec<f64>>,
    rounds: Vec<Round>,
}

impl ProblemStream {
    pub fn new(
        meta: ProblemMeta,
        seed: u64,
        rounds: Vec<Round>,
        comparator_hint: Option<Vec<f64>>,
    ) -> Result<Self> {
        meta.validate()?;
        if rounds.len() != meta.horizon {
            return Err(Error::invalid(format!(
                "stream has {} rounds but horizon is {}",
                rounds.len(),
                meta.horizon
            )));
        }
        Ok(Self {
            meta,
            seed,
            comparator_hint,
            rounds,
        })
    }

    pub fn rounds(&self) -> &[Round] {
        &self.rounds
    }

    pub fn iter(&self) -> std::slice::Iter<'_, Round> {
        self.rounds.iter()
    }

    pub fn len(&self) -> usize {
        self.rounds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rounds.is_empty()
    }

    pub fn total_loss(&self) -> SeparableQuadratic {
        let mut total = SeparableQuadratic::zeros(self.meta.set.dimension());
        for r in &self.rounds {
            r.loss.accumulate_into(&mut total);
        }
        total
    }
}

impl<'a> IntoIterator for &'a ProblemStream {
    type Item = &'a Round;
    type IntoIter = std::slice::Iter<'a, Round>;

    fn into_iter(self) -> Self::IntoIter {
        self.rounds.iter()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SyntheticMode {
    Linear,
    Quadratic,
}

#[derive(Debug, Clone)]
pub struct SyntheticConfig {
    pub set: FeasibleSet,
    pub horizon: usize,
    pub lipschitz: f64,
    /// Required (> 0) for quadratic mode.
    pub strong_convexity: f64,
    pub mode: SyntheticMode,
    /// Upper end of the uniform slack distribution.
    pub slack_max: f64,
    /// Scales the random loss parts (linear coefficients and quadratic
    /// centers) within their admissible ranges. Must lie in `[0, 1]`.
    pub loss_spread: f64,
}

/// Random linear or strongly convex quadratic losses with affine constraints
/// that all admit the comparator `x*`.
///
/// Each `p_t` is sign-oriented so that `<p_t, x*> >= 0`; together with
/// `b_t = <p_t, x*> + slack_t` this keeps both `x*` and the origin feasible.
pub fn gen_synthetic(cfg: &SyntheticConfig, seed: u64) -> Result<ProblemStream> {
    let set = &cfg.set;
    let d = set.dimension();
    let t_len = cfg.horizon;
    let g = cfg.lipschitz;
    let alpha = cfg.strong_convexity;
    if t_len == 0 {
        return Err(Error::invalid("horizon must be positive"));
    }
    if !(g > 0.0 && g.is_finite()) {
        return Err(Error::invalid(format!(
            "lipschitz G must be positive, got {g}"
        )));
    }
    if !(cfg.slack_max >= 0.0 && cfg.slack_max.is_finite()) {
        return Err(Error::invalid(format!(
            "slack_max must be >= 0, got {}",
            cfg.slack_max
        )));
    }
    if !(0.0..=1.0).contains(&cfg.loss_spread) {
        return Err(Error::invalid(format!(
            "loss_spread must lie in [0, 1], got {}",
            cfg.loss_spread
        )));
    }
    let big_d = set.diameter();
    let c_scale = match cfg.mode {
        SyntheticMode::Linear => g,
        SyntheticMode::Quadratic => {
            if !(alpha > 0.0) {
                return Err(Error::invalid("quadratic mode needs alpha_f > 0"));
            }
            if alpha * big_d > g {
                return Err(Error::invalid(format!(
                    "infeasible configuration: alpha_f * D = {} exceeds G = {g}; the quadratic \
                     term alone has gradients up to alpha_f * D over the set",
                    alpha * big_d
                )));
            }
            if !matches!(set.kind(), SetKind::L2Ball | SetKind::Box) {
                return Err(Error::invalid(
                    "quadratic mode supports the l2 ball and box only",
                ));
            }
            g - alpha * big_d
        }
    } * cfg.loss_spread
        / (d as f64).sqrt();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let uniform_vec = |rng: &mut ChaCha8Rng, s: f64| -> Vec<f64> {
        (0..d).map(|_| s * rng.random_range(-1.0..=1.0)).collect()
    };

    let cs: Vec<Vec<f64>> = (0..t_len).map(|_| uniform_vec(&mut rng, c_scale)).collect();
    let centers: Vec<Vec<f64>> = match cfg.mode {
        SyntheticMode::Linear => Vec::new(),
        SyntheticMode::Quadratic => {
            let s = cfg.loss_spread * set.inner_radius() / (d as f64).sqrt();
            (0..t_len).map(|_| uniform_vec(&mut rng, s)).collect()
        }
    };

    let mut c_sum = vec![0.0; d];
    for c in &cs {
        for (s, ci) in c_sum.iter_mut().zip(c) {
            *s += ci;
        }
    }
    let x_star = match cfg.mode {
        SyntheticMode::Linear => set.lmo(&c_sum)?,
        SyntheticMode::Quadratic => {
            // sum_t f_t = (alpha T / 2) ||x - z||^2 + const
            let tf = t_len as f64;
            let z: Vec<f64> = (0..d)
                .map(|i| centers.iter().map(|a| a[i]).sum::<f64>() / tf - c_sum[i] / (alpha * tf))
                .collect();
            clip_to_set(set, &z)
        }
    };

    let p_scale = g / (d as f64).sqrt();
    let mut rounds = Vec::with_capacity(t_len);
    for (t, c) in cs.into_iter().enumerate() {
        let mut p = uniform_vec(&mut rng, p_scale);
        if dot(&p, &x_star) < 0.0 {
            p.iter_mut().for_each(|v| *v = -*v);
        }
        let slack = if cfg.slack_max > 0.0 {
            rng.random_range(0.0..=cfg.slack_max)
        } else {
            0.0
        };
        let loss = match cfg.mode {
            SyntheticMode::Linear => Loss::Linear { c },
            SyntheticMode::Quadratic => Loss::Quadratic {
                alpha,
                center: centers[t].clone(),
                c,
            },
        };
        rounds.push(Round {
            loss,
            constraint: Constraint::through(p, &x_star, slack),
        });
    }

    let r_out = set.outer_radius();
    let value_bound = match cfg.mode {
        SyntheticMode::Linear => g * r_out,
        SyntheticMode::Quadratic => 0.5 * alpha * big_d * big_d + (g - alpha * big_d) * r_out,
    };
    let meta = ProblemMeta {
        lipschitz: g,
        value_bound: value_bound.max(f64::MIN_POSITIVE),
        strong_convexity: if cfg.mode == SyntheticMode::Quadratic {
            alpha
        } else {
            0.0
        },
        horizon: t_len,
        set: set.clone(),
    };
    ProblemStream::new(meta, seed, rounds, Some(x_star))
}

/// Nearest point of an l2 ball or box.
fn clip_to_set(set: &FeasibleSet, z: &[f64]) -> Vec<f64> {
    match set.kind() {
        SetKind::L2Ball => {
            let n = norm(z);
            if n <= set.radius() {
                z.to_vec()
            } else {
                z.iter().map(|v| v * set.radius() / n).collect()
            }
        }
        SetKind::Box => z
            .iter()
            .map(|v| v.clamp(-set.radius(), set.radius()))
            .collect(),
        _ => unreachable!("checked by caller"),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OffsetMode {
    /// `b_t = 0`: constraints `Tr(P_t X) <= 0` with no feasible comparator guarantee.
    Zero,
    /// `b_t = Tr(P_t X*) + slack_t` so the target matrix is feasible.
    Feasible,
}

impl FromStr for OffsetMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zero" => Ok(OffsetMode::Zero),
            "feasible" => Ok(OffsetMode::Feasible),
            other => Err(Error::invalid(format!(
                "unknown offset mode '{other}' (zero | feasible)"
            ))),
        }
    }
}

impl fmt::Display for OffsetMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            OffsetMode::Zero => "zero",
            OffsetMode::Feasible => "feasible",
        })
    }
}

#[derive(Debug, Clone)]
pub struct MatrixCompletionConfig {
    pub rows: usize,
    pub cols: usize,
    pub rank: usize,
    pub obs_per_round: usize,
    pub horizon: usize,
    /// Nuclear-norm bound; defaults to the target's nuclear norm.
    pub tau: Option<f64>,
    pub offset_mode: OffsetMode,
    pub slack_max: f64,
    pub strong_convexity: f64,
}

pub const MAX_DESK_SIDE: usize = 64;

/// Online completion of a random low-rank target over a trace-norm ball.
pub fn gen_matrix_completion(cfg: &MatrixCompletionConfig, seed: u64) -> Result<ProblemStream> {
    let (m, n) = (cfg.rows, cfg.cols);
    if m == 0 || n == 0 || m > MAX_DESK_SIDE || n > MAX_DESK_SIDE {
        return Err(Error::invalid(format!(
            "matrix sides must be in 1..={MAX_DESK_SIDE}, got {m}x{n}"
        )));
    }
    if cfg.rank == 0 || cfg.rank > m.min(n) {
        return Err(Error::invalid(format!(
            "rank must be in 1..={}, got {}",
            m.min(n),
            cfg.rank
        )));
    }
    if cfg.obs_per_round == 0 || cfg.obs_per_round > m * n {
        return Err(Error::invalid(format!(
            "obs_per_round must be in 1..={}, got {}",
            m * n,
            cfg.obs_per_round
        )));
    }
    if cfg.horizon == 0 {
        return Err(Error::invalid("horizon must be positive"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let left: Vec<f64> = (0..m * cfg.rank)
        .map(|_| rng.random_range(-1.0..=1.0))
        .collect();
    let right: Vec<f64> = (0..n * cfg.rank)
        .map(|_| rng.random_range(-1.0..=1.0))
        .collect();
    let mut target = vec![0.0; m * n];
    for i in 0..m {
        for j in 0..n {
            target[i * n + j] = (0..cfg.rank)
                .map(|k| left[i * cfg.rank + k] * right[j * cfg.rank + k])
                .sum();
        }
    }
    let peak = target.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if peak > 0.0 {
        target.iter_mut().for_each(|v| *v /= peak);
    }
    let target_nuclear = nuclear_norm(&target, m, n);
    let tau = cfg.tau.unwrap_or(target_nuclear);
    let set = FeasibleSet::trace_norm_ball(m, n, tau)?;
    let feasible = cfg.offset_mode == OffsetMode::Feasible;
    if feasible && target_nuclear > tau * (1.0 + 1e-12) {
        return Err(Error::invalid(format!(
            "feasible offset mode needs tau >= ||M||_* = {target_nuclear}, got {tau}"
        )));
    }

    let mut rounds = Vec::with_capacity(cfg.horizon);
    let mut indices: Vec<usize> = (0..m * n).collect();
    for _ in 0..cfg.horizon {
        // partial Fisher-Yates: distinct cells per round
        for k in 0..cfg.obs_per_round {
            let j = rng.random_range(k..indices.len());
            indices.swap(k, j);
        }
        let entries = indices[..cfg.obs_per_round]
            .iter()
            .map(|&index| Observation {
                index,
                target: target[index],
            })
            .collect();
        let mut p: Vec<f64> = (0..m * n).map(|_| rng.random_range(-1.0..=1.0)).collect();
        let constraint = if feasible {
            if dot(&p, &target) < 0.0 {
                p.iter_mut().for_each(|v| *v = -*v);
            }
            let slack = if cfg.slack_max > 0.0 {
                rng.random_range(0.0..=cfg.slack_max)
            } else {
                0.0
            };
            Constraint::through(p, &target, slack)
        } else {
            Constraint::Affine { p, b: 0.0 }
        };
        rounds.push(Round {
            loss: Loss::Observed {
                dimension: m * n,
                entries,
            },
            constraint,
        });
    }

    let spread = tau + 1.0;
    let meta = ProblemMeta {
        lipschitz: ((cfg.obs_per_round as f64).sqrt() * spread).max(((m * n) as f64).sqrt()),
        value_bound: 0.5 * cfg.obs_per_round as f64 * spread * spread,
        strong_convexity: cfg.strong_convexity,
        horizon: cfg.horizon,
        set,
    };
    ProblemStream::new(meta, seed, rounds, feasible.then_some(target))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rating {
    pub row: usize,
    pub col: usize,
    pub value: f64,
}

/// Parses one `user<TAB>item<TAB>rating<TAB>timestamp` line (ids are 1-based).
pub fn parse_rating_line(line: &str, line_no: usize) -> Result<Rating> {
    let parse_err = |message: String| Error::Parse {
        line: line_no,
        message,
    };
    let fields: Vec<&str> = line.split('\t').collect();
    if fields.len() != 4 {
        return Err(parse_err(format!(
            "expected 4 tab-separated fields, found {}",
            fields.len()
        )));
    }
    let id = |s: &str, what: &str| -> Result<usize> {
        let v: usize = s
            .trim()
            .parse()
            .map_err(|_| parse_err(format!("{what} id '{s}' is not a positive integer")))?;
        if v == 0 {
            return Err(parse_err(format!("{what} ids are 1-based, found 0")));
        }
        Ok(v - 1)
    };
    let row = id(fields[0], "user")?;
    let col = id(fields[1], "item")?;
    let value: f64 = fields[2]
        .trim()
        .parse()
        .map_err(|_| parse_err(format!("rating '{}' is not a number", fields[2])))?;
    if !value.is_finite() {
        return Err(parse_err("rating is not finite".to_string()));
    }
    Ok(Rating { row, col, value })
}

#[derive(Debug, Clone)]
pub struct RatingsOptions {
    pub tau: f64,
    pub strong_convexity: f64,
    /// Seeds the per-round constraint matrices `P_t`.
    pub seed: u64,
}

/// Streams consecutive batches of a rating file as completion rounds with
/// constraints `Tr(P_t X) <= 0`.
pub fn load_movielens(
    path: &Path,
    horizon: usize,
    obs_per_round: usize,
    opts: &RatingsOptions,
) -> Result<ProblemStream> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut ratings = Vec::new();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        ratings.push(parse_rating_line(line, i + 1)?);
    }
    ratings_to_stream(&ratings, horizon, obs_per_round, opts)
}

pub fn ratings_to_stream(
    ratings: &[Rating],
    horizon: usize,
    obs_per_round: usize,
    opts: &RatingsOptions,
) -> Result<ProblemStream> {
    if ratings.is_empty() {
        return Err(Error::invalid("rating file contains no ratings"));
    }
    if horizon == 0 || obs_per_round == 0 {
        return Err(Error::invalid("horizon and obs_per_round must be positive"));
    }
    let needed = horizon * obs_per_round;
    if ratings.len() < needed {
        return Err(Error::invalid(format!(
            "need T * obs_per_round = {needed} ratings, file has {}",
            ratings.len()
        )));
    }
    let rows = ratings.iter().map(|r| r.row).max().unwrap() + 1;
    let cols = ratings.iter().map(|r| r.col).max().unwrap() + 1;
    let set = FeasibleSet::trace_norm_ball(rows, cols, opts.tau)?;
    let peak = ratings.iter().fold(0.0f64, |a, r| a.max(r.value.abs()));
    let mut seeder = ChaCha8Rng::seed_from_u64(opts.seed);
    let rounds = ratings[..needed]
        .chunks(obs_per_round)
        .map(|batch| Round {
            loss: Loss::Observed {
                dimension: rows * cols,
                entries: batch
                    .iter()
                    .map(|r| Observation {
                        index: r.row * cols + r.col,
                        target: r.value,
                    })
                    .collect(),
            },
            constraint: Constraint::SeededAffine {
                seed: seeder.random(),
                dimension: rows * cols,
                b: 0.0,
            },
        })
        .collect();
    let spread = opts.tau + peak;
    let meta = ProblemMeta {
        lipschitz: ((obs_per_round as f64).sqrt() * spread).max(((rows * cols) as f64).sqrt()),
        value_bound: 0.5 * obs_per_round as f64 * spread * spread,
        strong_convexity: opts.strong_convexity,
        horizon,
        set,
    };
    ProblemStream::new(meta, opts.seed, rounds, None)
}
