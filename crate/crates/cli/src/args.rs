//! Command-line surface.

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ompath_core::optimize::DescentMethod;
use ompath_core::{Discretization, OptimizerConfig};

const AFTER_HELP: &str = "\
Config files: --config FILE reads flat `key = value` lines (keys are long flag
names, `_` or `-`); command-line flags override them.

Environment: OMPATH_THREADS caps the number of worker threads.

Exit codes: 0 success, 1 I/O failure, 2 usage error, 3 numerical failure
(singular diffusion, divergence, non-finite values), 4 non-convergence.

Path CSV files have the header `t,x1,...,xn` and one row per grid node.";

#[derive(Debug, Parser)]
#[command(name = "ompath", version, about = "Most probable transition paths via the Onsager-Machlup functional")]
#[command(after_help = AFTER_HELP)]
pub struct RunConfig {
    /// Flat `key = value` file of default flags for the subcommand.
    #[arg(long, global = true, value_name = "FILE")]
    pub config: Option<PathBuf>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate sample paths with Euler-Maruyama; one CSV per sample.
    #[command(args_override_self = true, after_help = "Writes DIR/sample_NNNN.csv for every sample.")]
    Simulate(SimulateArgs),
    /// Minimize the OM functional between two states.
    #[command(name = "mpp", args_override_self = true, after_help = MPP_HELP)]
    Mpp(MppArgs),
    /// Monte Carlo tube probabilities and the OM ratio law.
    #[command(args_override_self = true, after_help = TUBE_HELP)]
    Tube(TubeArgs),
    /// Evaluate the OM functional of a path CSV; prints JSON
    /// {total, drift_term, divergence_term, grid_size}.
    #[command(name = "om-eval", args_override_self = true)]
    OmEval(OmEvalArgs),
    /// Run both worked examples end to end into one output directory.
    #[command(args_override_self = true, after_help = REPRODUCE_HELP)]
    Reproduce(ReproduceArgs),
}

const MPP_HELP: &str = "\
Writes DIR/mpp.csv and DIR/mpp.json, or DIR/mpp_aA_bB.{csv,json} per value of
a sweep. JSON keys: model, params, start, end, steps, converged, solver,
iterations, om {total, drift_term, divergence_term, grid_size},
objective_value, gradient_norm (max-norm of the minimized objective's
gradient), el_residual, start_oms, best_start, path_file, shooting (example1
only: path_file, om, sup_gap, residual, minimizer_residual).
Exits with 4 when any run did not converge.";

const TUBE_HELP: &str = "\
With one reference path: DIR/tube.csv (epsilon,hits,samples,probability,stderr)
and DIR/tube.json (list of estimates).
With two reference paths (--compare or --mpp-vs-line): DIR/tube.csv
(epsilon,hits1,hits2,log_ratio,om_prediction,stderr) and DIR/tube.json with one
record per epsilon holding log_prob_ratio, om_prediction (-(OM1 - OM2)/2),
agreement (|difference|), standard_error, paired_standard_error, within_3se,
sign_agrees and inconclusive. An inconclusive ratio (empty tube) is reported,
not treated as an error.";

const REPRODUCE_HELP: &str = "\
Layout: example1/sample_NNNN.csv, example1/mpp.{csv,json}, example1/shooting.csv,
example2/mpp_aA_bB.{csv,json}, summary.json and manifest.json (sha256 and size
of every file plus the curve files of each figure). Exits with 4 when any most
probable path did not converge; all files are still written.";

#[derive(Clone, Debug, Args)]
pub struct ModelArgs {
    /// Built-in model: example1, example2, linear_test or zero_drift.
    #[arg(long, default_value = "example1")]
    pub model: String,
    /// Model parameter, repeatable.
    #[arg(long = "param", value_name = "KEY=VALUE")]
    pub params: Vec<String>,
    /// Parameter `a` (fast scale of example2). `mpp` sweeps over a comma list.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub a: Vec<f64>,
    /// Parameter `b` (slow scale of example2).
    #[arg(long, allow_hyphen_values = true)]
    pub b: Option<f64>,
    /// Fail instead of warning when the model's regularity checks fail.
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Initial state, comma separated. Defaults to the model's first
    /// metastable state where it has one.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub x0: Vec<f64>,
    #[arg(long, default_value_t = 1000)]
    pub steps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 1)]
    pub samples: usize,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Method {
    Lbfgs,
    Cg,
    Gd,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Objective {
    Midpoint,
    NodeCentered,
}

#[derive(Clone, Debug, Args)]
pub struct OptimizerArgs {
    #[arg(long, value_enum, default_value = "lbfgs")]
    pub method: Method,
    /// L-BFGS history length.
    #[arg(long, default_value_t = 12)]
    pub memory: usize,
    #[arg(long)]
    pub no_precondition: bool,
    #[arg(long, value_enum, default_value = "midpoint")]
    pub objective: Objective,
    #[arg(long, default_value_t = 5000)]
    pub max_iters: usize,
    /// Convergence threshold on the gradient max-norm.
    #[arg(long, default_value_t = 1e-8)]
    pub tolerance: f64,
    /// Number of optimizer starts; the best converged one is reported.
    #[arg(long, default_value_t = 1)]
    pub starts: usize,
    /// When the minimizer fails, solve the discrete Euler-Lagrange equations
    /// by damped Newton from the straight line.
    #[arg(long)]
    pub newton_fallback: bool,
}

impl OptimizerArgs {
    pub fn config(&self, steps: usize) -> OptimizerConfig {
        OptimizerConfig {
            max_iters: self.max_iters,
            gradient_tolerance: self.tolerance,
            method: match self.method {
                Method::Lbfgs => DescentMethod::Lbfgs { memory: self.memory },
                Method::Cg => DescentMethod::ConjugateGradient,
                Method::Gd => DescentMethod::GradientDescent,
            },
            objective: match self.objective {
                Objective::Midpoint => Discretization::Midpoint,
                Objective::NodeCentered => Discretization::NodeCentered,
            },
            preconditioned: !self.no_precondition,
            ..OptimizerConfig::default().with_steps(steps)
        }
    }
}

#[derive(Debug, Args)]
pub struct MppArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub optimizer: OptimizerArgs,
    /// Start state; defaults to the model's first metastable state.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub start: Vec<f64>,
    /// End state; defaults to the model's second metastable state.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub end: Vec<f64>,
    #[arg(long, default_value_t = 200)]
    pub steps: usize,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct TubeArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    #[command(flatten)]
    pub optimizer: OptimizerArgs,
    /// Reference path CSV (tube center).
    #[arg(long, conflicts_with = "mpp_vs_line")]
    pub reference: Option<PathBuf>,
    /// Second reference path CSV for a ratio check against --reference.
    #[arg(long, requires = "reference")]
    pub compare: Option<PathBuf>,
    /// Ratio check of the minimizer against the straight line between
    /// --start and --end on a grid of --steps.
    #[arg(long)]
    pub mpp_vs_line: bool,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub start: Vec<f64>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub end: Vec<f64>,
    #[arg(long, default_value_t = 64)]
    pub steps: usize,
    /// Tube radii, comma separated; all share one ensemble.
    #[arg(long, value_delimiter = ',', default_value = "1")]
    pub epsilon: Vec<f64>,
    /// Hölder exponent, in (0, 1/4).
    #[arg(long, default_value_t = 0.2)]
    pub alpha: f64,
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct OmEvalArgs {
    #[command(flatten)]
    pub model: ModelArgs,
    /// Path CSV with header t,x1,...,xn.
    pub path: PathBuf,
    /// Write the JSON here instead of standard output.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ReproduceArgs {
    #[arg(long)]
    pub out: PathBuf,
    /// Example-1 sample paths drawn under the most probable path.
    #[arg(long, default_value_t = 10)]
    pub samples: usize,
    #[arg(long, default_value_t = 7)]
    pub seed: u64,
    /// Grid for the sample paths.
    #[arg(long, default_value_t = 1000)]
    pub sim_steps: usize,
    /// Grid for the most probable paths.
    #[arg(long, default_value_t = 400)]
    pub steps: usize,
    /// Example-2 fast scales.
    #[arg(long, value_delimiter = ',', default_value = "1,5,10,30")]
    pub a: Vec<f64>,
    /// Example-2 slow scale.
    #[arg(long, default_value_t = 1.0)]
    pub b: f64,
}
