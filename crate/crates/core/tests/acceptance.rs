//! Acceptance suite. Prints one PASS/FAIL line per criterion.
//!
//! Criteria 1-5 and 7-9 are hard checks: any FAIL makes the binary exit with
//! status 1. Criterion 6 measures growth exponents of the learners at desk
//! scale; its line is reported but does not change the exit status.

use std::process::ExitCode;
use std::time::Instant;

use cocofw::bandit::{one_point_grad, smoothed_value_mc, SphereSampler};
use cocofw::bfw::quadratic_line_search;
use cocofw::geometry::nuclear_norm;
use cocofw::harness::{problem_seed, run_experiment, run_unit, RunRecord};
use cocofw::scofw::ScofwState;
use cocofw::{
    build_learner, resolve, Algo, ExperimentConfig, FeasibleSet, PartialConfig, RoundFunctions,
    SetKind,
};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Model = Box<dyn Fn(&[f64]) -> f64>;

/// Number, name, whether it decides the exit code, and the check itself.
type Criterion<'a> = (usize, &'static str, bool, Box<dyn Fn() -> Verdict + 'a>);

struct Verdict {
    pass: bool,
    detail: String,
}

impl Verdict {
    fn new(pass: bool, detail: impl Into<String>) -> Self {
        Self {
            pass,
            detail: detail.into(),
        }
    }
}

fn config(json: &str, out: &std::path::Path) -> ExperimentConfig {
    let mut p = PartialConfig::from_json_str(json).expect("acceptance config parses");
    p.out_dir = Some(out.to_path_buf());
    p.force = Some(true);
    p.resolve().expect("acceptance config resolves")
}

fn scratch() -> tempfile::TempDir {
    tempfile::tempdir().expect("temporary directory")
}

/// Kahan-Babuska summation, kept local so the oracle shares no code with the harness.
#[derive(Default)]
struct Neumaier {
    sum: f64,
    comp: f64,
}

impl Neumaier {
    fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }
    fn get(&self) -> f64 {
        self.sum + self.comp
    }
}

/// Configurations shared by the decomposition and doubling criteria.
fn invariant_sweep() -> Vec<&'static str> {
    vec![
        r#"{"algo": ["ofw-tvc", "bfw-tvc"], "problem": "synthetic-linear", "t_grid": [256, 1024, 4096], "seeds": 3}"#,
        r#"{"algo": ["ofw-tvc", "bfw-tvc"], "problem": "synthetic-linear", "t_grid": [1024], "seeds": 2, "set": "box", "slack_max": 0.0}"#,
        r#"{"algo": ["ofw-tvc", "scofw-tvc", "bfw-tvc", "scbfw-tvc"], "problem": "synthetic-quadratic", "alpha_f": 1.0, "t_grid": [256, 1024, 4096], "seeds": 3}"#,
        r#"{"algo": ["ofw-tvc", "scofw-tvc", "bfw-tvc", "scbfw-tvc"], "problem": "synthetic-quadratic", "alpha_f": 1.0, "loss_spread": 0.1, "t_grid": [1024], "seeds": 2}"#,
        // larger beta so that the gradient-bound estimate has to double
        r#"{"algo": ["ofw-tvc", "bfw-tvc"], "problem": "synthetic-linear", "beta": 4.0, "t_grid": [512, 2048], "seeds": 2}"#,
        r#"{"algo": ["ofw-tvc", "bfw-tvc"], "problem": "synthetic-quadratic", "alpha_f": 1.0, "beta": 20.0, "slack_max": 0.0, "t_grid": [2048], "seeds": 2}"#,
        r#"{"algo": ["ofw-tvc", "scofw-tvc"], "problem": "matrix-completion", "alpha_f": 1.0, "offset_mode": "feasible", "rows": 8, "cols": 8, "rank": 2, "obs_per_round": 8, "t_grid": [512], "seeds": 2}"#,
    ]
}

fn sweep_records() -> Vec<(ExperimentConfig, u64, RunRecord, f64)> {
    let dir = scratch();
    let mut out = Vec::new();
    for json in invariant_sweep() {
        let cfg = config(json, dir.path());
        for seed in 0..cfg.seeds {
            for &t in &cfg.t_grid {
                let (records, meta) = run_unit(&cfg, seed, t, 10 * t).expect("sweep run");
                let pseed = problem_seed(cfg.base_seed, seed, t);
                for r in records {
                    out.push((cfg.clone(), pseed, r, meta.lipschitz));
                }
            }
        }
    }
    out
}

fn criterion_1(records: &[(ExperimentConfig, u64, RunRecord, f64)]) -> Verdict {
    let mut checked = 0usize;
    let mut violations = 0usize;
    let mut harness_flags = 0usize;
    let mut worst = f64::INFINITY;
    for (cfg, pseed, rec, _) in records {
        let Some(comp) = rec.comparator.as_ref().filter(|c| c.feasible) else {
            continue;
        };
        let stream = cfg
            .build_problem(rec.horizon, *pseed)
            .expect("rebuild stream");
        let mut excess = Neumaier::default();
        for (row, round) in rec.rows.iter().zip(stream.iter()) {
            let f_star = round.loss_value(&comp.x_star);
            let g_star = round.constraint_value(&comp.x_star).max(0.0);
            let s_star = row.loss_weight * f_star + row.penalty_weight * g_star;
            // surrogate regret minus the weighted regret, accumulated per round
            excess.add((row.surrogate_value - s_star) - row.loss_weight * (row.f_value - f_star));
            if row.saturated {
                continue;
            }
            let slack = excess.get() - rec.params.phi.phi(rec.params.beta * row.q);
            checked += 1;
            worst = worst.min(slack);
            if slack < -1e-6 {
                violations += 1;
            }
        }
        harness_flags += rec
            .failures
            .iter()
            .filter(|f| f.invariant == "surrogate-decomposition")
            .count();
    }
    Verdict::new(
        checked > 0 && violations == 0 && harness_flags == 0,
        format!("{checked} prefixes checked, {violations} violations, harness flags {harness_flags}, min slack {worst:.3e}"),
    )
}

fn criterion_2(records: &[(ExperimentConfig, u64, RunRecord, f64)]) -> Verdict {
    let mut points = 0usize;
    let mut violations = Vec::new();
    for (_, _, rec, lipschitz) in records {
        if !matches!(rec.algo, Algo::OfwTvc | Algo::BfwTvc) {
            continue;
        }
        let p = &rec.params;
        let bound = |q: f64| p.beta * lipschitz * (p.gamma + p.phi.phi_prime(p.beta * q));
        // group rounds by the point where their bound is enforced: the round
        // itself for full information, the block end for bandit feedback
        let mut start = 0;
        while start < rec.rows.len() {
            let mut end = start;
            if rec.algo == Algo::BfwTvc {
                while end + 1 < rec.rows.len() && rec.rows[end + 1].block == rec.rows[start].block {
                    end += 1;
                }
            }
            let last = &rec.rows[end];
            let (Some(g), Some(k)) = (last.g_tilde, last.epoch) else {
                violations.push(format!("{} t={} missing epoch data", rec.algo, last.t));
                break;
            };
            points += 1;
            if g != 2f64.powi(k as i32 - 1) {
                violations.push(format!("{} t={} G~={g} epoch={k}", rec.algo, last.t));
            }
            let need = rec.rows[start..=end]
                .iter()
                .map(|r| bound(r.q))
                .fold(0.0, f64::max);
            if g < need {
                violations.push(format!("{} t={} G~={g} < {need}", rec.algo, last.t));
            }
            start = end + 1;
        }
        for f in &rec.failures {
            if f.invariant.starts_with("doubling") {
                violations.push(format!("{} harness: {}", rec.algo, f.detail));
            }
        }
    }
    let max_epoch = records
        .iter()
        .filter_map(|(_, _, r, _)| r.rows.last().and_then(|row| row.epoch))
        .max()
        .unwrap_or(0);
    Verdict::new(
        points > 0 && max_epoch > 1 && violations.is_empty(),
        format!(
            "{points} adjustment points checked, {} violations, largest epoch {max_epoch}{}",
            violations.len(),
            violations
                .first()
                .map(|v| format!(", first: {v}"))
                .unwrap_or_default()
        ),
    )
}

fn criterion_3() -> Verdict {
    let started = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let sets = [
        FeasibleSet::l2_ball(10, 1.5).unwrap(),
        FeasibleSet::cube(10, 0.7).unwrap(),
        FeasibleSet::simplex(10, 2.0).unwrap(),
        FeasibleSet::trace_norm_ball(6, 5, 3.0).unwrap(),
    ];
    let mut worst = f64::NEG_INFINITY;
    let mut bad = 0usize;
    for set in &sets {
        let points: Vec<Vec<f64>> = (0..100).map(|_| set.sample_point(&mut rng)).collect();
        for _ in 0..1000 {
            let g: Vec<f64> = (0..set.dimension())
                .map(|_| rng.random_range(-1.0..1.0))
                .collect();
            let v = set.lmo(&g).unwrap();
            let gv: f64 = g.iter().zip(&v).map(|(a, b)| a * b).sum();
            for x in &points {
                let gx: f64 = g.iter().zip(x).map(|(a, b)| a * b).sum();
                worst = worst.max(gv - gx);
                if gv > gx + 1e-6 {
                    bad += 1;
                }
            }
        }
    }

    let mut svd_err: f64 = 0.0;
    for trial in 0..300 {
        let rows = 1 + trial % 8;
        let cols = 1 + (trial / 8) % 8;
        let tau = rng.random_range(0.5..4.0);
        let set = FeasibleSet::trace_norm_ball(rows, cols, tau).unwrap();
        let g: Vec<f64> = (0..rows * cols)
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        let svd = DMatrix::from_row_slice(rows, cols, &g).svd(true, true);
        let (i, s1) =
            svd.singular_values
                .iter()
                .enumerate()
                .fold(
                    (0, f64::NEG_INFINITY),
                    |acc, (i, &s)| if s > acc.1 { (i, s) } else { acc },
                );
        let u = svd.u.as_ref().unwrap().column(i).into_owned();
        let vt = svd.v_t.as_ref().unwrap().row(i).into_owned();
        let expected: Vec<f64> = (0..rows * cols)
            .map(|k| -tau * u[k / cols] * vt[k % cols])
            .collect();
        let got = set.lmo(&g).unwrap();
        let scale = expected.iter().map(|e| e * e).sum::<f64>().sqrt();
        let diff = expected
            .iter()
            .zip(&got)
            .map(|(e, o)| (e - o).powi(2))
            .sum::<f64>()
            .sqrt();
        // a repeated top singular value makes the minimizer non-unique; compare values then
        let sorted_gap = svd
            .singular_values
            .iter()
            .filter(|&&s| s < s1)
            .fold(0.0, |m: f64, &s| m.max(s));
        let rel = if s1 - sorted_gap > 1e-6 {
            diff / scale
        } else {
            let lin: f64 = g.iter().zip(&got).map(|(a, b)| a * b).sum();
            (lin + tau * s1).abs() / (tau * s1)
        };
        svd_err = svd_err.max(rel);
        let nuc: f64 = svd.singular_values.iter().sum();
        svd_err = svd_err.max((nuclear_norm(&g, rows, cols) - nuc).abs() / nuc);
    }
    let secs = started.elapsed().as_secs_f64();
    Verdict::new(
        bad == 0 && svd_err <= 1e-6 && secs < 10.0,
        format!(
            "{bad} LMO violations (max excess {worst:.2e}), trace-norm vs SVD rel err {svd_err:.2e}, {secs:.2}s"
        ),
    )
}

fn criterion_4() -> Verdict {
    let dir = scratch();
    let configs = [
        r#"{"algo": ["ofw-tvc", "bfw-tvc"], "problem": "synthetic-linear", "t_grid": [4096]}"#,
        r#"{"algo": ["ofw-tvc", "scofw-tvc", "bfw-tvc", "scbfw-tvc"], "problem": "synthetic-quadratic", "alpha_f": 1.0, "t_grid": [4096]}"#,
        r#"{"algo": ["ofw-tvc", "scofw-tvc", "bfw-tvc", "scbfw-tvc"], "problem": "synthetic-quadratic", "alpha_f": 0.5, "set": "box", "radius": 0.8, "t_grid": [4096]}"#,
        r#"{"algo": ["ofw-tvc", "scofw-tvc"], "problem": "matrix-completion", "alpha_f": 1.0, "rows": 12, "cols": 10, "t_grid": [4096]}"#,
    ];
    let mut played = 0usize;
    let mut outside = 0usize;
    let mut worst = f64::NEG_INFINITY;
    for json in configs {
        let cfg = config(json, dir.path());
        let t = cfg.t_grid[0];
        let stream = cfg
            .build_problem(t, problem_seed(cfg.base_seed, 0, t))
            .unwrap();
        let set = &stream.meta.set;
        for &algo in &cfg.algos {
            let p = resolve(algo, &stream.meta, &cfg.overrides).unwrap();
            let mut learner = build_learner(&p, &stream.meta, 17).unwrap();
            for round in stream.iter() {
                let x = learner.step(round).unwrap().played;
                let excess = match set.kind() {
                    SetKind::L2Ball => x.iter().map(|v| v * v).sum::<f64>().sqrt() - set.radius(),
                    SetKind::Box => x.iter().fold(0.0f64, |m, v| m.max(v.abs())) - set.radius(),
                    SetKind::TraceNormBall { rows, cols } => {
                        DMatrix::from_row_slice(rows, cols, &x)
                            .singular_values()
                            .sum()
                            - set.radius()
                    }
                    SetKind::Simplex => unreachable!("no simplex runs here"),
                };
                played += 1;
                worst = worst.max(excess);
                if excess > 1e-9 {
                    outside += 1;
                }
            }
        }
    }
    Verdict::new(
        outside == 0,
        format!("{played} decisions, {outside} outside the set, max excess {worst:.2e}"),
    )
}

fn criterion_5() -> Verdict {
    let started = Instant::now();
    let mut notes = Vec::new();
    let mut pass = true;

    // (a) one-point estimates of f(x) = 0.5 ||x - a||^2 + <c, x>; smoothing leaves its gradient unchanged
    let d = 5;
    let a = [0.3, -0.2, 0.1, 0.0, 0.25];
    let c = [0.5, 0.1, -0.4, 0.2, 0.0];
    let x = [0.1, 0.2, -0.1, 0.3, 0.0];
    let delta = 0.3;
    let f = |p: &[f64]| -> f64 {
        p.iter()
            .zip(&a)
            .map(|(pi, ai)| 0.5 * (pi - ai).powi(2))
            .sum::<f64>()
            + p.iter().zip(&c).map(|(pi, ci)| pi * ci).sum::<f64>()
    };
    let truth: Vec<f64> = (0..d).map(|i| x[i] - a[i] + c[i]).collect();
    let mut sampler = SphereSampler::new(5, d).unwrap();
    let n = 100_000;
    let mut mean = vec![0.0; d];
    let mut m2 = vec![0.0; d];
    for k in 0..n {
        let u = sampler.sample();
        let xp: Vec<f64> = x.iter().zip(&u).map(|(xi, ui)| xi + delta * ui).collect();
        let est = one_point_grad(f(&xp), &u, d, delta).unwrap();
        for i in 0..d {
            let diff = est[i] - mean[i];
            mean[i] += diff / (k + 1) as f64;
            m2[i] += diff * (est[i] - mean[i]);
        }
    }
    let worst_z = (0..d)
        .map(|i| (mean[i] - truth[i]).abs() / (m2[i] / (n - 1) as f64 / n as f64).sqrt())
        .fold(0.0, f64::max);
    pass &= worst_z <= 3.0;
    notes.push(format!("(a) max |z| {worst_z:.2}"));

    // (b) smoothed value within delta G of f for a G-Lipschitz function
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let g_lip = 2.0;
    let centre = [0.2, -0.1, 0.4];
    let h = |p: &[f64]| {
        g_lip
            * p.iter()
                .zip(&centre)
                .map(|(pi, ci)| (pi - ci).powi(2))
                .sum::<f64>()
                .sqrt()
    };
    let mut worst_b = f64::NEG_INFINITY;
    for _ in 0..100 {
        let xb: Vec<f64> = (0..3).map(|_| rng.random_range(-1.0..1.0)).collect();
        let db = rng.random_range(0.01..0.5);
        let (smooth, se) = smoothed_value_mc(h, &xb, db, 4000, &mut rng);
        worst_b = worst_b.max((smooth - h(&xb)).abs() - (db * g_lip + 3.0 * se));
    }
    pass &= worst_b <= 0.0;
    notes.push(format!("(b) max excess {worst_b:.2e}"));

    // (c) second moment of a block of K estimates of f with |f| <= M and gradient norm <= G
    let (k_block, dc, deltac) = (16usize, 4usize, 0.2);
    let lin = [0.6, -0.3, 0.2, 0.5];
    let lin_norm = lin.iter().map(|v: &f64| v * v).sum::<f64>().sqrt();
    let yc = [0.1, 0.0, -0.2, 0.1];
    let fc = |p: &[f64]| 0.5 + p.iter().zip(&lin).map(|(pi, li)| pi * li).sum::<f64>();
    // |fc| over the ball of radius ||yc|| + delta
    let reach = yc.iter().map(|v: &f64| v * v).sum::<f64>().sqrt() + deltac;
    let m_bound = 0.5 + lin_norm * reach;
    let mut sampler = SphereSampler::new(9, dc).unwrap();
    let reps = 20_000;
    let mut second = 0.0;
    for _ in 0..reps {
        let mut block = vec![0.0; dc];
        for _ in 0..k_block {
            let u = sampler.sample();
            let xp: Vec<f64> = yc.iter().zip(&u).map(|(yi, ui)| yi + deltac * ui).collect();
            let est = one_point_grad(fc(&xp), &u, dc, deltac).unwrap();
            block.iter_mut().zip(&est).for_each(|(b, e)| *b += e);
        }
        second += block.iter().map(|v| v * v).sum::<f64>() / reps as f64;
    }
    let kf = k_block as f64;
    let dd = dc as f64;
    let limit = 2.0
        * (kf * dd * dd * m_bound * m_bound / (deltac * deltac) + kf * kf * lin_norm * lin_norm);
    pass &= second <= limit;
    notes.push(format!("(c) second moment {second:.1} <= {limit:.1}"));

    let secs = started.elapsed().as_secs_f64();
    pass &= secs < 60.0;
    Verdict::new(pass, format!("{}, {secs:.2}s", notes.join(", ")))
}

struct GrowthCheck {
    algo: Algo,
    regret_max: f64,
    ccv_max: f64,
    ccv_strict: bool,
    need_r2: bool,
    ccv_rate_decreasing: bool,
}

fn criterion_6() -> Verdict {
    let started = Instant::now();
    let dir = scratch();
    let grid = r#""t_grid": [1024, 2048, 4096, 8192, 16384], "seeds": 5, "dimension": 10, "set": "l2-ball""#;
    let linear = config(
        &format!(r#"{{"algo": ["ofw-tvc", "bfw-tvc"], "problem": "synthetic-linear", {grid}}}"#),
        &dir.path().join("linear"),
    );
    let quadratic = config(
        &format!(
            r#"{{"algo": ["scofw-tvc", "scbfw-tvc"], "problem": "synthetic-quadratic", "alpha_f": 1.0, "loss_spread": 0.1, {grid}}}"#
        ),
        &dir.path().join("quadratic"),
    );
    let checks = [
        GrowthCheck {
            algo: Algo::OfwTvc,
            regret_max: 0.85,
            ccv_max: 0.90,
            ccv_strict: false,
            need_r2: true,
            ccv_rate_decreasing: false,
        },
        GrowthCheck {
            algo: Algo::ScofwTvc,
            regret_max: 0.75,
            ccv_max: 0.95,
            ccv_strict: false,
            need_r2: false,
            ccv_rate_decreasing: false,
        },
        GrowthCheck {
            algo: Algo::BfwTvc,
            regret_max: 0.90,
            ccv_max: 0.95,
            ccv_strict: false,
            need_r2: false,
            ccv_rate_decreasing: false,
        },
        GrowthCheck {
            algo: Algo::ScbfwTvc,
            regret_max: 0.85,
            ccv_max: 1.0,
            ccv_strict: true,
            need_r2: false,
            ccv_rate_decreasing: true,
        },
    ];
    let summaries = [
        run_experiment(&linear).expect("linear sweep").summary,
        run_experiment(&quadratic).expect("quadratic sweep").summary,
    ];
    let mut pass = true;
    let mut parts = Vec::new();
    for c in &checks {
        let summary = summaries
            .iter()
            .find(|s| s.runs.iter().any(|r| r.algo == c.algo))
            .unwrap();
        let fit = |metric: &str| summary.slope(c.algo, metric).and_then(|s| s.fit.clone());
        let (Some(reg), Some(ccv)) = (fit("regret"), fit("ccv")) else {
            pass = false;
            parts.push(format!("{}: slope fit unavailable", c.algo));
            continue;
        };
        let mut ok = reg.slope <= c.regret_max;
        ok &= if c.ccv_strict {
            ccv.slope < c.ccv_max
        } else {
            ccv.slope <= c.ccv_max
        };
        if c.need_r2 {
            ok &= reg.r_squared >= 0.8 && ccv.r_squared >= 0.8;
        }
        if c.ccv_rate_decreasing {
            let rates: Vec<f64> = summary
                .means
                .iter()
                .filter(|m| m.algo == c.algo)
                .map(|m| m.ccv_per_round)
                .collect();
            ok &= rates.windows(2).all(|w| w[1] < w[0]);
        }
        pass &= ok;
        parts.push(format!(
            "{} {} regret {:.3} (r2 {:.2}) ccv {:.3} (r2 {:.2})",
            c.algo,
            if ok { "ok" } else { "FAIL" },
            reg.slope,
            reg.r_squared,
            ccv.slope,
            ccv.r_squared
        ));
    }
    let secs = started.elapsed().as_secs_f64();
    pass &= secs < 900.0;
    Verdict::new(pass, format!("{}; {secs:.1}s", parts.join("; ")))
}

fn criterion_7() -> Verdict {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let steps = 1_000_000usize;
    // exact minimizer over the 1e-6 grid of a convex function of sigma, by
    // ternary search on grid indices
    let grid_min = |phi: &dyn Fn(f64) -> f64| -> f64 {
        let (mut lo, mut hi) = (0usize, steps);
        while hi - lo > 2 {
            let m1 = lo + (hi - lo) / 3;
            let m2 = hi - (hi - lo) / 3;
            if phi(m1 as f64 / steps as f64) <= phi(m2 as f64 / steps as f64) {
                hi = m2;
            } else {
                lo = m1;
            }
        }
        (lo..=hi)
            .map(|i| i as f64 / steps as f64)
            .min_by(|a, b| phi(*a).total_cmp(&phi(*b)))
            .unwrap()
    };
    let mut worst_value = 0.0f64;
    let mut worst_sigma = 0.0f64;
    let d = 6;
    let rand_vec = |rng: &mut ChaCha8Rng, s: f64| -> Vec<f64> {
        (0..d).map(|_| rng.random_range(-s..s)).collect()
    };
    for i in 0..1000 {
        let x = rand_vec(&mut rng, 1.0);
        let v = rand_vec(&mut rng, 1.0);
        let (sigma, model): (f64, Model) = match i % 3 {
            0 => {
                // strongly convex full-information model: <G, y> + C1 sum ||y - x_tau||^2
                let c1 = rng.random_range(0.01..2.0);
                let history: Vec<(Vec<f64>, Vec<f64>)> = (0..1 + i % 7)
                    .map(|_| (rand_vec(&mut rng, 3.0), rand_vec(&mut rng, 1.0)))
                    .collect();
                let mut state = ScofwState::new(x.clone(), c1);
                for (g, p) in &history {
                    state.accumulate(g, p);
                }
                let (s, _) = state.line_search_sigma(&x, &v);
                let model = move |y: &[f64]| {
                    history
                        .iter()
                        .map(|(g, p)| {
                            g.iter().zip(y).map(|(a, b)| a * b).sum::<f64>()
                                + c1 * y.iter().zip(p).map(|(a, b)| (a - b).powi(2)).sum::<f64>()
                        })
                        .sum()
                };
                (s, Box::new(model))
            }
            1 => {
                // bandit block model: eta <G, y> + ||y - anchor||^2
                let eta = rng.random_range(0.01..1.0);
                let gsum = rand_vec(&mut rng, 5.0);
                let anchor = rand_vec(&mut rng, 1.0);
                let grad: Vec<f64> = (0..d)
                    .map(|k| eta * gsum[k] + 2.0 * (x[k] - anchor[k]))
                    .collect();
                let dir: Vec<f64> = v.iter().zip(&x).map(|(a, b)| a - b).collect();
                let s = quadratic_line_search(&grad, &dir, 1.0);
                let model = move |y: &[f64]| {
                    eta * gsum.iter().zip(y).map(|(a, b)| a * b).sum::<f64>()
                        + y.iter()
                            .zip(&anchor)
                            .map(|(a, b)| (a - b).powi(2))
                            .sum::<f64>()
                };
                (s, Box::new(model))
            }
            _ => {
                // strongly convex bandit model: <G, y> + C3 ||y||^2
                let c3 = rng.random_range(0.05..5.0);
                let gsum = rand_vec(&mut rng, 5.0);
                let grad: Vec<f64> = (0..d).map(|k| gsum[k] + 2.0 * c3 * x[k]).collect();
                let dir: Vec<f64> = v.iter().zip(&x).map(|(a, b)| a - b).collect();
                let s = quadratic_line_search(&grad, &dir, c3);
                let model = move |y: &[f64]| {
                    gsum.iter().zip(y).map(|(a, b)| a * b).sum::<f64>()
                        + c3 * y.iter().map(|a| a * a).sum::<f64>()
                };
                (s, Box::new(model))
            }
        };
        let phi = |s: f64| {
            let y: Vec<f64> = x.iter().zip(&v).map(|(a, b)| a + s * (b - a)).collect();
            model(&y)
        };
        let grid = grid_min(&phi);
        worst_value = worst_value.max(phi(sigma) - phi(grid));
        worst_sigma = worst_sigma.max((sigma - grid).abs());
    }
    Verdict::new(
        worst_value <= 1e-8 && worst_sigma <= 1e-6,
        format!("1000 instances, closed form above grid by at most {worst_value:.2e}, max |sigma - grid| {worst_sigma:.2e}"),
    )
}

fn criterion_8() -> Verdict {
    let dir = scratch();
    let t = 4096;
    let cfg = config(
        &format!(
            r#"{{"algo": ["ofw-tvc", "scofw-tvc"], "problem": "matrix-completion", "rows": 32, "cols": 32, "rank": 3,
                 "obs_per_round": 1024, "alpha_f": 1.0, "offset_mode": "feasible", "t_grid": [{t}], "seeds": 3}}"#
        ),
        dir.path(),
    );
    let mut pass = true;
    let mut parts = Vec::new();
    for seed in 0..cfg.seeds {
        let (records, _) = run_unit(&cfg, seed, t, 10 * t).expect("matrix completion run");
        let loss = |a: Algo| {
            records
                .iter()
                .find(|r| r.algo == a)
                .unwrap()
                .last()
                .unwrap()
                .cum_loss
        };
        let ordered = loss(Algo::ScofwTvc) < loss(Algo::OfwTvc);
        let mut sublinear = true;
        for r in &records {
            let q_end = r.rows[t - 1].q / t as f64;
            let q_quarter = r.rows[t / 4 - 1].q / (t / 4) as f64;
            sublinear &= q_end < q_quarter;
        }
        pass &= ordered && sublinear;
        parts.push(format!(
            "seed {seed}: loss scofw {:.1} vs ofw {:.1}, ccv rate falling {sublinear}",
            loss(Algo::ScofwTvc),
            loss(Algo::OfwTvc)
        ));
    }
    Verdict::new(pass, parts.join("; "))
}

fn criterion_9() -> Verdict {
    let dir = scratch();
    let json = r#"{"algo": ["ofw-tvc", "scofw-tvc", "bfw-tvc", "scbfw-tvc"], "problem": "synthetic-quadratic",
                   "alpha_f": 1.0, "t_grid": [300, 1000], "seeds": 3, "seed": 42}"#;
    let mut traces = Vec::new();
    for (run, threads) in [(0, 1), (1, 4)] {
        let mut cfg = config(json, &dir.path().join(format!("run{run}")));
        cfg.threads = Some(threads);
        let out = run_experiment(&cfg).expect("determinism run");
        traces.push(std::fs::read(out.trace_path).expect("trace readable"));
    }
    let same = traces[0] == traces[1] && !traces[0].is_empty();
    Verdict::new(
        same,
        format!(
            "two invocations, {} bytes each, identical {same}",
            traces[0].len()
        ),
    )
}

fn main() -> ExitCode {
    let started = Instant::now();
    let records = sweep_records();
    let criteria: Vec<Criterion<'_>> = vec![
        (
            1,
            "surrogate decomposition",
            true,
            Box::new(|| criterion_1(&records)),
        ),
        (
            2,
            "doubling correctness",
            true,
            Box::new(|| criterion_2(&records)),
        ),
        (3, "LMO optimality", true, Box::new(criterion_3)),
        (4, "feasibility", true, Box::new(criterion_4)),
        (5, "estimator suite", true, Box::new(criterion_5)),
        (6, "growth exponents", false, Box::new(criterion_6)),
        (7, "line-search oracles", true, Box::new(criterion_7)),
        (8, "matrix-completion ordering", true, Box::new(criterion_8)),
        (9, "determinism", true, Box::new(criterion_9)),
    ];
    let mut hard_failures = 0;
    for (n, name, hard, check) in &criteria {
        let t0 = Instant::now();
        let v = check();
        let tag = if v.pass { "PASS" } else { "FAIL" };
        let note = if !v.pass && !hard {
            " [reported only]"
        } else {
            ""
        };
        println!(
            "criterion {n} ({name}): {tag}{note} | {} | {:.1}s",
            v.detail,
            t0.elapsed().as_secs_f64()
        );
        if !v.pass && *hard {
            hard_failures += 1;
        }
    }
    println!(
        "acceptance finished in {:.1}s",
        started.elapsed().as_secs_f64()
    );
    if hard_failures > 0 {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
