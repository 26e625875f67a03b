//! Command-line runner: load a scenario, dispatch a solver or planner, and
//! emit plot-ready CSV/JSON files.
//!
//! Exit codes: 0 success, 1 infeasible planning instance, 2 configuration or
//! usage errors. Failures print a single machine-parsable line to stderr.

mod output;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use waypath_core::Error;

#[derive(Parser)]
#[command(name = "waypath", version, about = "Grid-based path planning under target uncertainty")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the per-target value fields and derived cost fields.
    Solve(RunArgs),
    /// Waypoint for a fixed certainty time.
    PlanFixed(RunArgs),
    /// Waypoint chain for a discretely distributed certainty time.
    PlanDiscrete(RunArgs),
    /// Free-boundary plan for an exponentially distributed certainty time.
    PlanExponential(RunArgs),
    /// Worst-case optimal waypoint.
    RobustWorst(RunArgs),
    /// Risk-sensitive (exponential-moment) waypoint.
    RobustRisk(RunArgs),
    /// Expected-cost waypoint under a hard worst-case bound.
    RobustHard(RunArgs),
    /// Mixed waypoint strategy under a chance constraint.
    RobustChance(RunArgs),
    /// Distributionally robust waypoint over a total-variation ball.
    RobustDr(RunArgs),
    /// Worst-vs-average Pareto front (fixed horizon, or exponential with --lambda).
    Pareto(RunArgs),
    /// Compare coarse-target planning against a refined target cloud.
    CoarsenCheck(RunArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Built-in scenario name or path to a JSON config.
    #[arg(long, default_value = "four_targets")]
    scenario: String,
    /// Override the grid node count per axis.
    #[arg(long)]
    grid: Option<usize>,
    /// Certainty time horizon.
    #[arg(long = "T")]
    t: Option<f64>,
    /// Discrete certainty times (comma separated).
    #[arg(long, value_delimiter = ',', allow_hyphen_values = false)]
    times: Option<Vec<f64>>,
    /// Probabilities of the discrete certainty times.
    #[arg(long = "time-probs", value_delimiter = ',')]
    time_probs: Option<Vec<f64>>,
    /// Rate of the exponential certainty time.
    #[arg(long)]
    lambda: Option<f64>,
    /// Risk-sensitivity parameter.
    #[arg(long)]
    beta: Option<f64>,
    /// Worst-case (or per-target) cost bound.
    #[arg(long = "C")]
    c: Option<f64>,
    /// Chance-constraint risk budget.
    #[arg(long)]
    epsilon: Option<f64>,
    /// Total-variation ball radius.
    #[arg(long)]
    delta: Option<f64>,
    /// Override the target (or hypothesis) probabilities.
    #[arg(long, value_delimiter = ',')]
    probs: Option<Vec<f64>>,
    /// Half-width of the refinement cells for coarsen-check.
    #[arg(long = "cell-width")]
    cell_width: Option<f64>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    configure_threads();
    let result = match &cli.command {
        Command::Solve(a) => run::solve(a),
        Command::PlanFixed(a) => run::plan_fixed(a),
        Command::PlanDiscrete(a) => run::plan_discrete(a),
        Command::PlanExponential(a) => run::plan_exponential(a),
        Command::RobustWorst(a) => run::robust_worst(a),
        Command::RobustRisk(a) => run::robust_risk(a),
        Command::RobustHard(a) => run::robust_hard(a),
        Command::RobustChance(a) => run::robust_chance(a),
        Command::RobustDr(a) => run::robust_dr(a),
        Command::Pareto(a) => run::pareto(a),
        Command::CoarsenCheck(a) => run::coarsen_check(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let (code, kind) = match &err {
                Error::Infeasible(_) | Error::Stagnation { .. } => (1, "infeasible"),
                _ => (2, "config"),
            };
            eprintln!("error: {kind}: {err}");
            ExitCode::from(code)
        }
    }
}

/// `PLANNER_THREADS` caps solver parallelism.
fn configure_threads() {
    if let Ok(val) = std::env::var("PLANNER_THREADS") {
        if let Ok(n) = val.trim().parse::<usize>() {
            if n > 0 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
        }
    }
}
