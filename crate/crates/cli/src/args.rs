use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use cocofw::config::{OneOrMany, SetChoice};
use cocofw::{Algo, OffsetMode, PartialConfig, ProblemKind, ScVariant};

#[derive(Debug, Parser)]
#[command(
    name = "cocofw",
    version,
    about = "Projection-free online learners with time-varying constraints"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one algorithm over the configured horizons and seeds.
    Run(ExperimentArgs),
    /// Cross every configured algorithm with the horizon grid and the seeds.
    Sweep(ExperimentArgs),
    /// Fit growth exponents from existing trace files.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Switch {
    On,
    Off,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// JSON config file; flags given on the command line override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Algorithm name; repeat or comma-separate for several.
    #[arg(long, value_delimiter = ',', value_parser = parse_with::<Algo>)]
    pub algo: Vec<Algo>,
    #[arg(long, value_parser = parse_with::<ProblemKind>)]
    pub problem: Option<ProblemKind>,
    /// Horizon T; repeat or comma-separate for a grid.
    #[arg(long = "t", value_delimiter = ',')]
    pub t: Vec<usize>,
    #[arg(long)]
    pub seeds: Option<usize>,
    /// Base seed mixed into every problem and learner seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overwrite an existing trace in the output directory.
    #[arg(long)]
    pub force: bool,
    /// Runtime invariant checks.
    #[arg(long = "assert", value_enum)]
    pub assertions: Option<Switch>,
    #[arg(long)]
    pub threads: Option<usize>,
    #[arg(long)]
    pub comparator_iters: Option<usize>,

    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub lambda: Option<f64>,
    #[arg(long)]
    pub c: Option<f64>,
    #[arg(long)]
    pub block_k: Option<usize>,
    #[arg(long)]
    pub inner_l: Option<usize>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub delta: Option<f64>,
    #[arg(long)]
    pub alpha_f: Option<f64>,
    #[arg(long, value_parser = parse_with::<OffsetMode>)]
    pub offset_mode: Option<OffsetMode>,
    /// Default parameters for the strongly convex learners: conservative or simple.
    #[arg(long, value_parser = parse_with::<ScVariant>)]
    pub variant: Option<ScVariant>,

    #[arg(long = "dim")]
    pub dimension: Option<usize>,
    #[arg(long, value_parser = parse_with::<SetChoice>)]
    pub set: Option<SetChoice>,
    #[arg(long)]
    pub radius: Option<f64>,
    /// Inner radius r of the feasible set.
    #[arg(long)]
    pub r: Option<f64>,
    #[arg(long)]
    pub lipschitz: Option<f64>,
    #[arg(long)]
    pub slack_max: Option<f64>,
    #[arg(long)]
    pub loss_spread: Option<f64>,
    #[arg(long)]
    pub rows: Option<usize>,
    #[arg(long)]
    pub cols: Option<usize>,
    #[arg(long)]
    pub rank: Option<usize>,
    #[arg(long)]
    pub obs_per_round: Option<usize>,
    /// Trace-norm bound of matrix problems.
    #[arg(long)]
    pub tau: Option<f64>,
    /// Rating file for the movielens-file problem.
    #[arg(long = "data")]
    pub data_path: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Trace files, or directories holding a trace.csv.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
    /// Directory for report.json and report.txt; defaults to the first input's directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn parse_with<T: std::str::FromStr<Err = cocofw::Error>>(s: &str) -> Result<T, String> {
    s.parse().map_err(|e: cocofw::Error| e.to_string())
}

impl ExperimentArgs {
    /// The command-line layer; unset flags stay `None` so lower layers show through.
    pub fn to_partial(&self) -> PartialConfig {
        PartialConfig {
            algo: match self.algo.as_slice() {
                [] => None,
                [one] => Some(OneOrMany::One(*one)),
                many => Some(OneOrMany::Many(many.to_vec())),
            },
            problem: self.problem,
            t_grid: (!self.t.is_empty()).then(|| self.t.clone()),
            seeds: self.seeds,
            seed: self.seed,
            out_dir: self.out.clone(),
            assertions: self.assertions.map(|s| s == Switch::On),
            force: self.force.then_some(true),
            threads: self.threads,
            comparator_iters: self.comparator_iters,
            beta: self.beta,
            gamma: self.gamma,
            lambda: self.lambda,
            c: self.c,
            block_k: self.block_k,
            inner_l: self.inner_l,
            epsilon: self.epsilon,
            delta: self.delta,
            alpha_f: self.alpha_f,
            offset_mode: self.offset_mode,
            variant: self.variant,
            dimension: self.dimension,
            set: self.set,
            radius: self.radius,
            r: self.r,
            lipschitz: self.lipschitz,
            slack_max: self.slack_max,
            loss_spread: self.loss_spread,
            rows: self.rows,
            cols: self.cols,
            rank: self.rank,
            obs_per_round: self.obs_per_round,
            tau: self.tau,
            data_path: self.data_path.clone(),
        }
    }
}
