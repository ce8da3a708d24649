//! Experiment orchestration: comparator solving, regret and CCV bookkeeping,
//! runtime invariant checks, growth-slope fits, and trace files.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, ProblemKind};
use crate::error::{Error, Result};
use crate::learner::{Algo, InvariantFailure, Learner};
use crate::linalg::{all_finite, step_toward, CompensatedSum};
use crate::objectives::{ProblemMeta, ProblemStream, RoundFunctions};
use crate::params::{build_learner, resolve, Resolved};
use crate::surrogate::{drift_check, g_plus, gradient_bound, LyapunovFn};

pub const CSV_HEADER: [&str; 15] = [
    "t",
    "algo",
    "problem",
    "seed",
    "f_value",
    "g_value",
    "cum_loss",
    "ccv",
    "regret",
    "surrogate_regret",
    "epoch",
    "g_tilde",
    "block",
    "sigma",
    "clamped",
];

/// Membership and comparator-feasibility tolerance.
pub const FEASIBILITY_TOL: f64 = 1e-9;
/// Slack allowed in the surrogate-regret decomposition check.
pub const DECOMPOSITION_TOL: f64 = 1e-6;
/// Failures kept verbatim per run; the rest are only counted.
pub const MAX_KEPT_FAILURES: usize = 50;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparatorReport {
    pub x_star: Vec<f64>,
    pub from_hint: bool,
    /// `sum_t f_t(x*)`
    pub objective: f64,
    /// `max_t g_t(x*)`
    pub max_violation: f64,
    pub feasible: bool,
    pub iterations: usize,
}

/// Best fixed decision for the whole stream: the generator's hint when there
/// is one, otherwise `iters` Frank-Wolfe steps on `sum_t f_t`.
pub fn solve_comparator(stream: &ProblemStream, iters: usize) -> Result<ComparatorReport> {
    let total = stream.total_loss();
    let (x_star, from_hint, iterations) = match &stream.comparator_hint {
        Some(h) => (h.clone(), true, 0),
        None => {
            let set = &stream.meta.set;
            let mut x = set.center();
            for k in 0..iters {
                let v = set.lmo(&total.gradient(&x))?;
                step_toward(&mut x, &v, 2.0 / (k as f64 + 2.0));
            }
            (x, false, iters)
        }
    };
    let max_violation = stream
        .iter()
        .map(|r| r.constraint_value(&x_star))
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(ComparatorReport {
        objective: total.value(&x_star),
        feasible: max_violation <= FEASIBILITY_TOL,
        x_star,
        from_hint,
        max_violation,
        iterations,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRow {
    pub t: usize,
    pub f_value: f64,
    pub g_value: f64,
    pub q: f64,
    pub cum_loss: f64,
    pub regret: Option<f64>,
    pub surrogate_regret: Option<f64>,
    pub epoch: Option<usize>,
    pub g_tilde: Option<f64>,
    pub block: Option<usize>,
    pub sigma: Option<f64>,
    pub clamped: Option<bool>,
    pub surrogate_value: f64,
    pub loss_weight: f64,
    pub penalty_weight: f64,
    pub saturated: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecompositionStats {
    pub checked: usize,
    pub violations: usize,
    /// `min_t surrogate_regret_t - gamma beta regret_t - Phi(beta Q_t)`
    pub min_slack: f64,
}

#[derive(Debug, Clone)]
pub struct RunRecord {
    pub algo: Algo,
    pub problem: ProblemKind,
    pub seed: usize,
    pub horizon: usize,
    pub params: Resolved,
    pub rows: Vec<RunRow>,
    pub comparator: Option<ComparatorReport>,
    pub decomposition: Option<DecompositionStats>,
    pub failures: Vec<InvariantFailure>,
    pub failure_count: usize,
}

impl RunRecord {
    fn push_failure(&mut self, f: InvariantFailure) {
        self.failure_count += 1;
        if self.failures.len() < MAX_KEPT_FAILURES {
            self.failures.push(f);
        }
    }

    pub fn last(&self) -> Option<&RunRow> {
        self.rows.last()
    }
}

/// Plays `learner` through `stream`; with `checks` on, per-round invariants
/// are verified and collected on the record.
pub fn run_learner(
    learner: &mut dyn Learner,
    stream: &ProblemStream,
    params: &Resolved,
    problem: ProblemKind,
    seed: usize,
    checks: bool,
) -> Result<RunRecord> {
    learner.set_checks(checks);
    let set = &stream.meta.set;
    let sp = learner.params();
    let phi = learner.lyapunov();
    let mut record = RunRecord {
        algo: learner.algo(),
        problem,
        seed,
        horizon: stream.len(),
        params: params.clone(),
        rows: Vec::with_capacity(stream.len()),
        comparator: None,
        decomposition: None,
        failures: Vec::new(),
        failure_count: 0,
    };
    let mut cum = CompensatedSum::default();
    let mut q_prev = 0.0;
    let mut max_target: f64 = 0.0;
    for (i, round) in stream.iter().enumerate() {
        let t = i + 1;
        let rep = learner.step(round)?;
        cum.add(rep.f_value);
        for f in rep.failures {
            record.push_failure(f);
        }
        if checks {
            if !all_finite(&rep.played) || !rep.f_value.is_finite() || !rep.g_value.is_finite() {
                record.push_failure(InvariantFailure::new(
                    "finite",
                    t,
                    "non-finite decision or value",
                ));
            } else if !set.contains(&rep.played, FEASIBILITY_TOL)? {
                record.push_failure(InvariantFailure::new(
                    "feasibility",
                    t,
                    "played decision outside K",
                ));
            }
            let gp = g_plus(rep.g_value);
            if rep.q < q_prev || (rep.q - q_prev - gp).abs() > 1e-9 * rep.q.max(1.0) {
                record.push_failure(InvariantFailure::new(
                    "ccv-update",
                    t,
                    format!("Q went from {q_prev} to {} with g+ = {gp}", rep.q),
                ));
            }
            if !drift_check(&phi, sp.beta, q_prev, rep.q, gp) {
                record.push_failure(InvariantFailure::new(
                    "lyapunov-drift",
                    t,
                    format!("Q = {}", rep.q),
                ));
            }
            if let Some(gn) = rep.grad_norm {
                let bound = gradient_bound(&sp, &phi, stream.meta.lipschitz, rep.q);
                if gn > bound * (1.0 + 1e-9) + 1e-12 {
                    record.push_failure(InvariantFailure::new(
                        "gradient-bound",
                        t,
                        format!("||grad|| = {gn} exceeds {bound}"),
                    ));
                }
            }
        }
        max_target = max_target.max(gradient_bound(&sp, &phi, stream.meta.lipschitz, rep.q));
        q_prev = rep.q;
        record.rows.push(RunRow {
            t,
            f_value: rep.f_value,
            g_value: rep.g_value,
            q: rep.q,
            cum_loss: cum.value(),
            regret: None,
            surrogate_regret: None,
            epoch: rep.epoch.map(|e| e.epoch),
            g_tilde: rep.epoch.map(|e| e.g_tilde),
            block: rep.block,
            sigma: rep.sigma,
            clamped: rep.sigma.map(|_| rep.clamped),
            surrogate_value: rep.surrogate_value,
            loss_weight: rep.surrogate.loss_weight,
            penalty_weight: rep.surrogate.penalty_weight,
            saturated: rep.surrogate.saturated,
        });
    }
    if checks {
        if let Some(last) = record.rows.last() {
            if let Some(g_tilde) = last.g_tilde {
                // G~ only doubles past a bound it fell short of, so it ends below twice the largest bound
                if g_tilde > 2.0 * max_target.max(1.0) {
                    let t = last.t;
                    record.push_failure(InvariantFailure::new(
                        "epoch-count",
                        t,
                        format!("G~ = {g_tilde} after bounds no larger than {max_target}"),
                    ));
                }
            }
        }
    }
    Ok(record)
}

/// Fills regret and surrogate-regret columns against `comparator` and checks
/// `surrogate_regret_t >= gamma beta regret_t + Phi(beta Q_t)` at every prefix.
///
/// Columns stay empty when the comparator violates some constraint.
pub fn compute_metrics(
    record: &mut RunRecord,
    stream: &ProblemStream,
    comparator: &ComparatorReport,
    phi: &LyapunovFn,
) {
    record.comparator = Some(comparator.clone());
    if !comparator.feasible {
        return;
    }
    let x = &comparator.x_star;
    let beta = record.params.beta;
    let mut regret = CompensatedSum::default();
    let mut sur = CompensatedSum::default();
    let mut excess = CompensatedSum::default();
    let mut stats = DecompositionStats {
        checked: 0,
        violations: 0,
        min_slack: f64::INFINITY,
    };
    let mut failures = Vec::new();
    for (row, round) in record.rows.iter_mut().zip(stream.iter()) {
        let f_star = round.loss_value(x);
        let sur_star =
            row.loss_weight * f_star + row.penalty_weight * g_plus(round.constraint_value(x));
        let dr = row.f_value - f_star;
        let ds = row.surrogate_value - sur_star;
        regret.add(dr);
        sur.add(ds);
        // per-round difference keeps the check free of cancellation between large sums
        excess.add(ds - row.loss_weight * dr);
        row.regret = Some(regret.value());
        row.surrogate_regret = Some(sur.value());
        if row.saturated {
            continue;
        }
        let slack = excess.value() - phi.phi(beta * row.q);
        stats.checked += 1;
        stats.min_slack = stats.min_slack.min(slack);
        if slack < -DECOMPOSITION_TOL {
            stats.violations += 1;
            failures.push(InvariantFailure::new(
                "surrogate-decomposition",
                row.t,
                format!("slack {slack} below -{DECOMPOSITION_TOL}"),
            ));
        }
    }
    record.decomposition = Some(stats);
    for f in failures {
        record.push_failure(f);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    /// `(ln T, ln metric)`
    pub points: Vec<(f64, f64)>,
}

/// Ordinary least squares of `ln metric` on `ln T`.
pub fn fit_slope(points: &[(f64, f64)]) -> Result<SlopeFit> {
    if points.len() < 2 {
        return Err(Error::invalid("a slope fit needs at least two points"));
    }
    if let Some(&(t, m)) = points.iter().find(|(t, m)| !(*t > 0.0) || !(*m > 0.0)) {
        return Err(Error::invalid(format!(
            "slope fits need positive values, got ({t}, {m})"
        )));
    }
    let logs: Vec<(f64, f64)> = points.iter().map(|&(t, m)| (t.ln(), m.ln())).collect();
    let n = logs.len() as f64;
    let mx = logs.iter().map(|p| p.0).sum::<f64>() / n;
    let my = logs.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = logs.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx <= 0.0 {
        return Err(Error::invalid(
            "a slope fit needs at least two distinct horizons",
        ));
    }
    let sxy: f64 = logs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let syy: f64 = logs.iter().map(|p| (p.1 - my).powi(2)).sum();
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let r_squared = if syy <= 1e-300 {
        1.0
    } else {
        let ss_res: f64 = logs
            .iter()
            .map(|p| (p.1 - intercept - slope * p.0).powi(2))
            .sum();
        (1.0 - ss_res / syy).clamp(0.0, 1.0)
    };
    Ok(SlopeFit {
        slope,
        intercept,
        r_squared,
        points: logs,
    })
}

/// Final-round totals of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub algo: Algo,
    pub problem: ProblemKind,
    pub seed: usize,
    pub horizon: usize,
    pub cum_loss: f64,
    pub ccv: f64,
    pub regret: Option<f64>,
    pub surrogate_regret: Option<f64>,
    #[serde(default)]
    pub comparator_max_violation: Option<f64>,
    #[serde(default)]
    pub decomposition: Option<DecompositionStats>,
    #[serde(default)]
    pub final_epoch: Option<usize>,
    #[serde(default)]
    pub failure_count: usize,
    #[serde(default)]
    pub failures: Vec<InvariantFailure>,
}

impl RunSummary {
    pub fn from_record(r: &RunRecord) -> Self {
        let last = r.rows.last();
        Self {
            algo: r.algo,
            problem: r.problem,
            seed: r.seed,
            horizon: r.horizon,
            cum_loss: last.map_or(0.0, |l| l.cum_loss),
            ccv: last.map_or(0.0, |l| l.q),
            regret: last.and_then(|l| l.regret),
            surrogate_regret: last.and_then(|l| l.surrogate_regret),
            comparator_max_violation: r.comparator.as_ref().map(|c| c.max_violation),
            decomposition: r.decomposition,
            final_epoch: last.and_then(|l| l.epoch),
            failure_count: r.failure_count,
            failures: r.failures.clone(),
        }
    }
}

/// Seed averages for one `(algo, problem, T)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanRow {
    pub algo: Algo,
    pub problem: ProblemKind,
    pub horizon: usize,
    pub seeds: usize,
    pub cum_loss: f64,
    pub ccv: f64,
    pub ccv_per_round: f64,
    /// Present only when every seed has a feasible comparator.
    pub regret: Option<f64>,
    pub surrogate_regret: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeRow {
    pub algo: Algo,
    pub problem: ProblemKind,
    pub metric: String,
    pub fit: Option<SlopeFit>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub runs: Vec<RunSummary>,
    pub means: Vec<MeanRow>,
    pub slopes: Vec<SlopeRow>,
    pub failure_count: usize,
}

impl Summary {
    pub fn mean(&self, algo: Algo, horizon: usize) -> Option<&MeanRow> {
        self.means
            .iter()
            .find(|m| m.algo == algo && m.horizon == horizon)
    }

    pub fn slope(&self, algo: Algo, metric: &str) -> Option<&SlopeRow> {
        self.slopes
            .iter()
            .find(|s| s.algo == algo && s.metric == metric)
    }
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

pub const SLOPE_METRICS: [&str; 3] = ["regret", "ccv", "cum_loss"];

pub fn summarize(mut runs: Vec<RunSummary>) -> Summary {
    runs.sort_by(|a, b| {
        (a.algo, a.problem, a.seed, a.horizon).cmp(&(b.algo, b.problem, b.seed, b.horizon))
    });
    let mut keys: Vec<(Algo, ProblemKind, usize)> = runs
        .iter()
        .map(|r| (r.algo, r.problem, r.horizon))
        .collect();
    keys.sort();
    keys.dedup();
    let means: Vec<MeanRow> = keys
        .iter()
        .map(|&(algo, problem, horizon)| {
            let group: Vec<&RunSummary> = runs
                .iter()
                .filter(|r| r.algo == algo && r.problem == problem && r.horizon == horizon)
                .collect();
            let pick = |f: &dyn Fn(&RunSummary) -> Option<f64>| -> Option<f64> {
                let v: Option<Vec<f64>> = group.iter().map(|r| f(r)).collect();
                v.map(|v| mean(&v))
            };
            let ccv = mean(&group.iter().map(|r| r.ccv).collect::<Vec<_>>());
            MeanRow {
                algo,
                problem,
                horizon,
                seeds: group.len(),
                cum_loss: mean(&group.iter().map(|r| r.cum_loss).collect::<Vec<_>>()),
                ccv,
                ccv_per_round: ccv / horizon as f64,
                regret: pick(&|r| r.regret),
                surrogate_regret: pick(&|r| r.surrogate_regret),
            }
        })
        .collect();

    let mut pairs: Vec<(Algo, ProblemKind)> = keys.iter().map(|k| (k.0, k.1)).collect();
    pairs.dedup();
    let mut slopes = Vec::new();
    for (algo, problem) in pairs {
        let rows: Vec<&MeanRow> = means
            .iter()
            .filter(|m| m.algo == algo && m.problem == problem)
            .collect();
        for metric in SLOPE_METRICS {
            let pts: Option<Vec<(f64, f64)>> = rows
                .iter()
                .map(|m| {
                    let v = match metric {
                        "regret" => m.regret,
                        "ccv" => Some(m.ccv),
                        _ => Some(m.cum_loss),
                    };
                    v.map(|v| (m.horizon as f64, v))
                })
                .collect();
            let (fit, note) = match pts {
                None => (None, Some("no feasible comparator".to_string())),
                Some(p) => match fit_slope(&p) {
                    Ok(f) => (Some(f), None),
                    Err(e) => (None, Some(e.to_string())),
                },
            };
            slopes.push(SlopeRow {
                algo,
                problem,
                metric: metric.to_string(),
                fit,
                note,
            });
        }
    }
    let failure_count = runs.iter().map(|r| r.failure_count).sum();
    Summary {
        runs,
        means,
        slopes,
        failure_count,
    }
}

/// Plain-text slope table, one row per `(algo, problem, metric)`.
pub fn slope_table(summary: &Summary) -> String {
    let mut out = format!(
        "{:<10} {:<20} {:<9} {:>8} {:>10} {:>6} {:>6}\n",
        "algo", "problem", "metric", "slope", "intercept", "r2", "points"
    );
    for s in &summary.slopes {
        match &s.fit {
            Some(f) => out.push_str(&format!(
                "{:<10} {:<20} {:<9} {:>8.4} {:>10.4} {:>6.3} {:>6}\n",
                s.algo.name(),
                s.problem.name(),
                s.metric,
                f.slope,
                f.intercept,
                f.r_squared,
                f.points.len()
            )),
            None => out.push_str(&format!(
                "{:<10} {:<20} {:<9} {:>8} ({})\n",
                s.algo.name(),
                s.problem.name(),
                s.metric,
                "-",
                s.note.as_deref().unwrap_or("")
            )),
        }
    }
    out
}

/// Shortest round-trip decimal, switching to exponent form outside `[1e-4, 1e15)`.
pub fn fmt_num(v: f64) -> String {
    let a = v.abs();
    if v == 0.0 || (1e-4..1e15).contains(&a) || !v.is_finite() {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

pub fn write_rows<W: Write>(w: &mut csv::Writer<W>, r: &RunRecord) -> Result<()> {
    let algo = r.algo.name();
    let problem = r.problem.name();
    let seed = r.seed.to_string();
    for row in &r.rows {
        w.write_record([
            row.t.to_string(),
            algo.to_string(),
            problem.to_string(),
            seed.clone(),
            fmt_num(row.f_value),
            fmt_num(row.g_value),
            fmt_num(row.cum_loss),
            fmt_num(row.q),
            row.regret.map(fmt_num).unwrap_or_default(),
            row.surrogate_regret.map(fmt_num).unwrap_or_default(),
            opt(row.epoch),
            row.g_tilde.map(fmt_num).unwrap_or_default(),
            opt(row.block),
            row.sigma.map(fmt_num).unwrap_or_default(),
            row.clamped
                .map(|c| if c { "1" } else { "0" })
                .unwrap_or_default()
                .to_string(),
        ])
        .map_err(|e| Error::Runtime(format!("csv write: {e}")))?;
    }
    Ok(())
}

/// Per-run final totals recovered from a trace file. A run ends where
/// `(algo, problem, seed)` changes or `t` restarts at 1.
pub fn read_trace(path: &Path) -> Result<Vec<RunSummary>> {
    let mut rdr = csv::Reader::from_path(path)
        .map_err(|e| Error::Runtime(format!("{}: {e}", path.display())))?;
    let headers = rdr
        .headers()
        .map_err(|e| Error::Runtime(format!("{}: {e}", path.display())))?
        .clone();
    if headers.iter().collect::<Vec<_>>() != CSV_HEADER {
        return Err(Error::Parse {
            line: 1,
            message: format!("{}: unexpected header", path.display()),
        });
    }
    let mut runs: Vec<RunSummary> = Vec::new();
    let mut prev_t = 0usize;
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| Error::Parse {
            line,
            message: e.to_string(),
        })?;
        let perr = |what: &str| Error::Parse {
            line,
            message: format!("{}: bad {what}", path.display()),
        };
        let num = |k: usize, what: &str| -> Result<Option<f64>> {
            let s = &rec[k];
            if s.is_empty() {
                Ok(None)
            } else {
                s.parse::<f64>().map(Some).map_err(|_| perr(what))
            }
        };
        let t: usize = rec[0].parse().map_err(|_| perr("t"))?;
        let algo: Algo = rec[1].parse().map_err(|_| perr("algo"))?;
        let problem: ProblemKind = rec[2].parse().map_err(|_| perr("problem"))?;
        let seed: usize = rec[3].parse().map_err(|_| perr("seed"))?;
        let cum_loss = num(6, "cum_loss")?.ok_or_else(|| perr("cum_loss"))?;
        let ccv = num(7, "ccv")?.ok_or_else(|| perr("ccv"))?;
        let regret = num(8, "regret")?;
        let surrogate_regret = num(9, "surrogate_regret")?;
        let final_epoch = if rec[10].is_empty() {
            None
        } else {
            Some(rec[10].parse().map_err(|_| perr("epoch"))?)
        };
        let same_run = runs.last().is_some_and(|r| {
            r.algo == algo && r.problem == problem && r.seed == seed && t == prev_t + 1
        });
        if !same_run {
            if t != 1 {
                return Err(perr("run start (t must begin at 1)"));
            }
            runs.push(RunSummary {
                algo,
                problem,
                seed,
                horizon: 0,
                cum_loss: 0.0,
                ccv: 0.0,
                regret: None,
                surrogate_regret: None,
                comparator_max_violation: None,
                decomposition: None,
                final_epoch: None,
                failure_count: 0,
                failures: Vec::new(),
            });
        }
        let r = runs.last_mut().expect("pushed above");
        r.horizon = t;
        r.cum_loss = cum_loss;
        r.ccv = ccv;
        r.regret = regret;
        r.surrogate_regret = surrogate_regret;
        r.final_epoch = final_epoch;
        prev_t = t;
    }
    Ok(runs)
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of the problem instance shared by every algorithm at `(seed, T)`.
pub fn problem_seed(base: u64, seed: usize, horizon: usize) -> u64 {
    splitmix(splitmix(base ^ splitmix(seed as u64)) ^ horizon as u64)
}

pub fn learner_seed(problem_seed: u64, algo: Algo) -> u64 {
    splitmix(problem_seed ^ (algo as u64 + 1).wrapping_mul(0xa076_1d64_78bd_642f))
}

/// Runs every algorithm in `cfg` on one `(seed, T)` instance.
pub fn run_unit(
    cfg: &ExperimentConfig,
    seed: usize,
    horizon: usize,
    comparator_iters: usize,
) -> Result<(Vec<RunRecord>, ProblemMeta)> {
    let pseed = problem_seed(cfg.base_seed, seed, horizon);
    let stream = cfg.build_problem(horizon, pseed)?;
    let comparator = solve_comparator(&stream, comparator_iters)?;
    let mut algos = cfg.algos.clone();
    algos.sort();
    algos.dedup();
    let records = algos
        .into_iter()
        .map(|algo| {
            let params = resolve(algo, &stream.meta, &cfg.overrides)?;
            let mut learner = build_learner(&params, &stream.meta, learner_seed(pseed, algo))?;
            let mut rec = run_learner(
                learner.as_mut(),
                &stream,
                &params,
                cfg.problem,
                seed,
                cfg.assertions,
            )?;
            compute_metrics(&mut rec, &stream, &comparator, &params.phi);
            Ok(rec)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok((records, stream.meta))
}

#[derive(Debug, Clone, Serialize)]
struct Metadata<'a> {
    config: &'a ExperimentConfig,
    set: &'a str,
    comparator_iters: usize,
    resolved: Vec<ResolvedEntry>,
}

#[derive(Debug, Clone, Serialize)]
struct ResolvedEntry {
    horizon: usize,
    lipschitz: f64,
    value_bound: f64,
    diameter: f64,
    inner_radius: f64,
    params: Vec<Resolved>,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub trace_path: PathBuf,
    pub summary_path: PathBuf,
    pub metadata_path: PathBuf,
    pub summary: Summary,
    pub run_count: usize,
}

impl ExperimentOutcome {
    pub fn failures(&self) -> impl Iterator<Item = (&RunSummary, &InvariantFailure)> {
        self.summary
            .runs
            .iter()
            .flat_map(|r| r.failures.iter().map(move |f| (r, f)))
    }
}

pub const TRACE_FILE: &str = "trace.csv";
pub const SUMMARY_FILE: &str = "summary.json";
pub const METADATA_FILE: &str = "metadata.json";

/// Number of worker threads: `threads` if given, else `COCOFW_THREADS`, else all cores.
pub fn thread_count(threads: Option<usize>) -> usize {
    threads
        .or_else(|| {
            std::env::var("COCOFW_THREADS")
                .ok()
                .and_then(|s| s.parse().ok())
        })
        .filter(|&n| n > 0)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
}

/// Runs the full `(algo, T, seed)` cross product, then writes the trace, the
/// summary, and the resolved-parameter metadata into `cfg.out_dir`.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutcome> {
    let out = &cfg.out_dir;
    let trace_path = out.join(TRACE_FILE);
    if trace_path.exists() && !cfg.force {
        return Err(Error::Runtime(format!(
            "{} already exists; pass --force to overwrite",
            trace_path.display()
        )));
    }
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))?;

    let t_max = cfg.t_grid.iter().copied().max().unwrap_or(1);
    let comparator_iters = cfg.comparator_iters.unwrap_or(10 * t_max);
    let mut units: Vec<(usize, usize)> = Vec::new();
    for &t in &cfg.t_grid {
        for s in 0..cfg.seeds {
            units.push((s, t));
        }
    }
    units.sort();
    units.dedup();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(thread_count(cfg.threads))
        .build()
        .map_err(|e| Error::Runtime(format!("thread pool: {e}")))?;
    type UnitOut = (Vec<(RunSummary, Vec<u8>)>, Option<ResolvedEntry>);
    let results: Vec<Result<UnitOut>> = pool.install(|| {
        units
            .par_iter()
            .map(|&(seed, horizon)| {
                let (records, m) = run_unit(cfg, seed, horizon, comparator_iters)?;
                let mut outs = Vec::with_capacity(records.len());
                for rec in &records {
                    let mut w = csv::WriterBuilder::new()
                        .has_headers(false)
                        .from_writer(Vec::new());
                    write_rows(&mut w, rec)?;
                    let bytes = w
                        .into_inner()
                        .map_err(|e| Error::Runtime(format!("csv: {e}")))?;
                    outs.push((RunSummary::from_record(rec), bytes));
                }
                let entry = if seed == 0 {
                    Some(ResolvedEntry {
                        horizon,
                        lipschitz: m.lipschitz,
                        value_bound: m.value_bound,
                        diameter: m.set.diameter(),
                        inner_radius: m.set.inner_radius(),
                        params: records.iter().map(|r| r.params.clone()).collect(),
                    })
                } else {
                    None
                };
                Ok((outs, entry))
            })
            .collect()
    });

    let mut chunks: Vec<(RunSummary, Vec<u8>)> = Vec::new();
    let mut resolved = Vec::new();
    for r in results {
        let (outs, entry) = r?;
        chunks.extend(outs);
        resolved.extend(entry);
    }
    chunks.sort_by(|a, b| {
        (a.0.algo, a.0.problem, a.0.seed, a.0.horizon).cmp(&(
            b.0.algo,
            b.0.problem,
            b.0.seed,
            b.0.horizon,
        ))
    });
    resolved.sort_by_key(|e| e.horizon);

    let io = |e| Error::io(&trace_path, e);
    let mut file = std::io::BufWriter::new(fs::File::create(&trace_path).map_err(io)?);
    writeln!(file, "{}", CSV_HEADER.join(",")).map_err(io)?;
    for (_, bytes) in &chunks {
        file.write_all(bytes).map_err(io)?;
    }
    file.flush().map_err(io)?;

    let run_count = chunks.len();
    let summary = summarize(chunks.into_iter().map(|c| c.0).collect());
    let summary_path = out.join(SUMMARY_FILE);
    write_json(&summary_path, &summary)?;
    let metadata_path = out.join(METADATA_FILE);
    write_json(
        &metadata_path,
        &Metadata {
            config: cfg,
            set: cfg.set_kind_name(),
            comparator_iters,
            resolved,
        },
    )?;
    Ok(ExperimentOutcome {
        trace_path,
        summary_path,
        metadata_path,
        summary,
        run_count,
    })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text =
        serde_json::to_string_pretty(value).map_err(|e| Error::Runtime(format!("json: {e}")))?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}
