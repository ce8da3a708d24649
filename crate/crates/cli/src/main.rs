mod args;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::Parser;
use cocofw::harness::{read_trace, slope_table, summarize, write_json, TRACE_FILE};
use cocofw::{run_experiment, Error, ExperimentConfig, PartialConfig, Summary};
use serde_json::json;

use args::{Cli, Command, ExperimentArgs, ReportArgs};

const EXIT_INVARIANT: u8 = 1;
const EXIT_CONFIG: u8 = 2;
const EXIT_RUNTIME: u8 = 3;
const FAILURES_FILE: &str = "failures.json";

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(a) => experiment(a, true),
        Command::Sweep(a) => experiment(a, false),
        Command::Report(a) => report(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let (code, kind, messages) = match &e {
                Error::Config(msgs) => (EXIT_CONFIG, "config", msgs.clone()),
                Error::InvalidArgument(m) => (EXIT_CONFIG, "invalid-argument", vec![m.clone()]),
                other => (EXIT_RUNTIME, "runtime", vec![other.to_string()]),
            };
            eprintln!("{e}");
            eprintln!(
                "{}",
                json!({ "status": "error", "kind": kind, "errors": messages })
            );
            ExitCode::from(code)
        }
    }
}

fn load_config(a: &ExperimentArgs, single_algo: bool) -> cocofw::Result<ExperimentConfig> {
    let base = match &a.config {
        Some(path) => PartialConfig::from_file(path)?,
        None => PartialConfig::default(),
    };
    let merged = base.merge(a.to_partial());
    let algo_count = merged.algo.as_ref().map_or(0, |x| x.to_vec().len());
    let resolved = merged.resolve();
    if single_algo && algo_count > 1 {
        let mut msgs = vec![format!(
            "algo: run takes one algorithm, got {algo_count}; use sweep for several"
        )];
        if let Err(Error::Config(more)) = resolved {
            msgs.extend(more);
        }
        return Err(Error::Config(msgs));
    }
    resolved
}

fn experiment(a: &ExperimentArgs, single_algo: bool) -> cocofw::Result<ExitCode> {
    let cfg = load_config(a, single_algo)?;
    let runs = cfg.algos.len() * cfg.t_grid.len() * cfg.seeds;
    println!(
        "{runs} runs announced: {} algorithm(s) x {} horizon(s) x {} seed(s) on {}",
        cfg.algos.len(),
        cfg.t_grid.len(),
        cfg.seeds,
        cfg.problem
    );
    let out = run_experiment(&cfg)?;
    println!("{} runs completed", out.run_count);
    print!("{}", means_table(&out.summary));
    if cfg.t_grid.len() > 1 {
        print!("{}", slope_table(&out.summary));
    }
    println!("trace: {}", out.trace_path.display());
    println!("summary: {}", out.summary_path.display());
    println!("metadata: {}", out.metadata_path.display());

    if out.summary.failure_count == 0 {
        return Ok(ExitCode::SUCCESS);
    }
    let list: Vec<_> = out
        .failures()
        .map(|(r, f)| {
            json!({
                "algo": r.algo.name(),
                "problem": r.problem.name(),
                "seed": r.seed,
                "horizon": r.horizon,
                "invariant": f.invariant,
                "round": f.round,
                "detail": f.detail,
            })
        })
        .collect();
    let doc = json!({ "status": "invariant-failure", "failure_count": out.summary.failure_count, "failures": list });
    write_json(&cfg.out_dir.join(FAILURES_FILE), &doc)?;
    eprintln!(
        "{} invariant failure(s); details in {}",
        out.summary.failure_count,
        cfg.out_dir.join(FAILURES_FILE).display()
    );
    eprintln!("{doc}");
    Ok(ExitCode::from(EXIT_INVARIANT))
}

fn trace_path(input: &Path) -> PathBuf {
    if input.is_dir() {
        input.join(TRACE_FILE)
    } else {
        input.to_path_buf()
    }
}

fn report(a: &ReportArgs) -> cocofw::Result<ExitCode> {
    let mut runs = Vec::new();
    for input in &a.inputs {
        runs.extend(read_trace(&trace_path(input))?);
    }
    let summary = summarize(runs);
    let out_dir = match &a.out {
        Some(d) => d.clone(),
        None => trace_path(&a.inputs[0])
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_default(),
    };
    std::fs::create_dir_all(&out_dir)
        .map_err(|e| Error::Runtime(format!("{}: {e}", out_dir.display())))?;
    let table = format!("{}{}", means_table(&summary), slope_table(&summary));
    write_json(&out_dir.join("report.json"), &summary)?;
    let txt = out_dir.join("report.txt");
    std::fs::write(&txt, &table).map_err(|e| Error::Runtime(format!("{}: {e}", txt.display())))?;
    print!("{table}");
    println!("report: {}", out_dir.join("report.json").display());
    Ok(ExitCode::SUCCESS)
}

fn means_table(s: &Summary) -> String {
    let opt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |x| format!("{x:.4}"));
    let mut out = format!(
        "{:<10} {:<20} {:>7} {:>5} {:>12} {:>12} {:>12}\n",
        "algo", "problem", "T", "seeds", "cum_loss", "ccv", "regret"
    );
    for m in &s.means {
        out.push_str(&format!(
            "{:<10} {:<20} {:>7} {:>5} {:>12.4} {:>12.4} {:>12}\n",
            m.algo.name(),
            m.problem.name(),
            m.horizon,
            m.seeds,
            m.cum_loss,
            m.ccv,
            opt(m.regret)
        ));
    }
    out
}
